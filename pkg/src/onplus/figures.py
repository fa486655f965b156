"""Figure helpers for the sweep reports.

Everything renders through the Agg backend straight to files, so the
helpers work identically in headless runs.  Each helper draws one figure,
writes it to the given path and returns that path; none of them ever
opens a window or mutates global state beyond the backend selection.
"""

from __future__ import annotations

from pathlib import Path
from typing import Mapping, Sequence

import matplotlib

matplotlib.use("Agg")

import matplotlib.pyplot as plt
import numpy as np

__all__ = [
    "decay_figure",
    "density_figure",
    "pairing_figure",
    "series_figure",
]

# Values at or below this floor are parity zeros; they are left out of
# logarithmic plots entirely rather than clipped.
_ZERO_FLOOR = 10.0 * float(np.finfo(float).eps)

_FIGSIZE = (6.0, 4.0)


def _finish(fig, path: str | Path) -> Path:
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    fig.savefig(path, dpi=150)
    plt.close(fig)
    return path


def decay_figure(
    path: str | Path,
    parameters: Sequence[float],
    magnitudes: Sequence[float],
    fitted_rate: float,
    *,
    xlabel: str,
    title: str,
) -> Path:
    """Semilogy of sweep magnitudes with the fitted geometric decay line."""
    xs = np.asarray(parameters, dtype=float)
    ys = np.abs(np.asarray(magnitudes, dtype=float))
    live = ys > _ZERO_FLOOR
    fig, ax = plt.subplots(figsize=_FIGSIZE)
    ax.semilogy(xs[live], ys[live], "o", label="measured")
    if live.sum() >= 2 and np.isfinite(fitted_rate):
        intercept = float(np.mean(np.log(ys[live]) - fitted_rate * xs[live]))
        span = np.linspace(xs[live].min(), xs[live].max(), 64)
        ax.semilogy(
            span,
            np.exp(intercept + fitted_rate * span),
            "--",
            label=f"fit, rate {fitted_rate:.4f}",
        )
    ax.set_xlabel(xlabel)
    ax.set_ylabel("magnitude")
    ax.set_title(title)
    ax.legend()
    fig.tight_layout()
    return _finish(fig, path)


def series_figure(
    path: str | Path,
    series: Mapping[str, tuple[Sequence[float], Sequence[float]]],
    *,
    xlabel: str,
    ylabel: str,
    title: str,
    log_y: bool = False,
    hline: float | None = None,
    hline_label: str | None = None,
) -> Path:
    """One marker-line per named series, optionally on a log axis."""
    fig, ax = plt.subplots(figsize=_FIGSIZE)
    for label, (xs, ys) in series.items():
        ax.plot(xs, ys, marker="o", label=label)
    if log_y:
        ax.set_yscale("log")
    if hline is not None:
        ax.axhline(hline, linestyle=":", color="black", label=hline_label)
    ax.set_xlabel(xlabel)
    ax.set_ylabel(ylabel)
    ax.set_title(title)
    ax.legend()
    fig.tight_layout()
    return _finish(fig, path)


def pairing_figure(
    path: str | Path,
    labels: Sequence[int],
    magnitudes: np.ndarray,
    fitted_rate: float,
    *,
    title: str,
) -> Path:
    """Pairing grid as a log-magnitude heatmap plus the diagonal decay."""
    mags = np.abs(np.asarray(magnitudes, dtype=float))
    fig, (ax_grid, ax_diag) = plt.subplots(1, 2, figsize=(9.0, 4.0))

    shown = np.log10(np.maximum(mags, _ZERO_FLOOR))
    image = ax_grid.imshow(shown, origin="lower", cmap="viridis")
    ax_grid.set_xlabel("l'")
    ax_grid.set_ylabel("l")
    ax_grid.set_title("log10 |pairing|")
    fig.colorbar(image, ax=ax_grid, fraction=0.046)

    xs = np.asarray(labels, dtype=float)
    diag = np.diag(mags)
    live = diag > _ZERO_FLOOR
    ax_diag.semilogy(xs[live], diag[live], "o", label="diagonal")
    if live.sum() >= 2 and np.isfinite(fitted_rate):
        intercept = float(np.mean(np.log(diag[live]) - fitted_rate * xs[live]))
        span = np.linspace(xs[live].min(), xs[live].max(), 64)
        ax_diag.semilogy(
            span,
            np.exp(intercept + fitted_rate * span),
            "--",
            label=f"fit, rate {fitted_rate:.4f}",
        )
    ax_diag.set_xlabel("l")
    ax_diag.set_ylabel("|pairing|")
    ax_diag.set_title("diagonal decay")
    ax_diag.legend()

    fig.suptitle(title)
    fig.tight_layout()
    return _finish(fig, path)


def density_figure(
    path: str | Path,
    s_axis: Sequence[float],
    t_axis: Sequence[float],
    values: np.ndarray,
    *,
    title: str,
) -> Path:
    """Heatmap of a bivariate density sampled on a rectangular grid."""
    grid = np.asarray(values, dtype=float)
    fig, ax = plt.subplots(figsize=(5.4, 4.4))
    mesh = ax.pcolormesh(np.asarray(t_axis), np.asarray(s_axis), grid, shading="auto")
    ax.set_xlabel("t")
    ax.set_ylabel("s")
    ax.set_title(title)
    fig.colorbar(mesh, ax=ax)
    fig.tight_layout()
    return _finish(fig, path)
