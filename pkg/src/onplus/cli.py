"""Command-line entry point: configuration, dispatch, deterministic reports.

Each subcommand runs one verification suite, writes its report under the
output directory (CSV or JSON, plus a PNG figure for the sweep suites)
and prints one PASS or FAIL line.  Reports never contain timestamps, so
identical configurations produce byte-identical files.

Exit codes: 0 when every assertion in the selected suite holds, 1 when a
numerical invariant fails (the failing check is named on stderr and the
report is still written), 2 for configuration errors, 3 when a requested
label exceeds the backend caps.

Every long flag can also be supplied through the environment with the
``ONPLUS_`` prefix (``ONPLUS_L_MAX=7`` matches ``--l-max 7``); explicit
flags win over the environment.
"""

from __future__ import annotations

import argparse
import csv
import io
import json
import os
import sys
import time
from dataclasses import dataclass
from fractions import Fraction
from pathlib import Path
from typing import Callable, Mapping, Sequence

import numpy as np

from . import figures
from .coupled_backend import DEFAULT_DIM_CAP, CoupledBackend
from .estimates import (
    DecayReport,
    SpectralDensityReport,
    TraceRotationReport,
    alpha_pq,
    default_vectors,
    key_estimate_sweep,
    mixing_partial_sums,
    partial_trace_convergence,
    projection_defect_sweep,
    spectral_density,
    trace_rotation_sweep,
)
from .fourier import character, coefficient, haar_state, multiply
from .qcore import QParams, catalan, chebyshev_T, make_params, quantum_dim, semicircle_moment
from .tensor_backend import TensorBackend
from .types import CapExceededError, ConfigError, InvariantError
from .weingarten import haar_moment, weingarten_table

__all__ = ["ExperimentReport", "RunConfig", "main", "serialize_report"]

_BACKENDS = ("tensor", "coupled", "cross-check")
_FORMATS = ("csv", "json")
_ENV_PREFIX = "ONPLUS_"


@dataclass(frozen=True)
class RunConfig:
    """Shared configuration of every suite run."""

    N: int = 3
    backend: str = "cross-check"
    tol: float = 1e-8
    seed: int = 42
    tensor_dim: int = 59049
    coupled_dim: int = DEFAULT_DIM_CAP
    l_max: int = 6
    b_max: int = 6
    k_max: int = 5
    out: Path = Path("reports")
    format: str = "csv"
    figures: bool = True

    def validate(self) -> None:
        if self.N < 3:
            raise ConfigError(f"N must be >= 3, got {self.N}")
        if not 0.0 < self.tol <= 1e-4:
            raise ConfigError(f"tol must lie in (0, 1e-4], got {self.tol}")
        if self.seed < 0:
            raise ConfigError(f"seed must be >= 0, got {self.seed}")
        if self.tensor_dim <= 0 or self.coupled_dim <= 0:
            raise ConfigError("backend caps must be positive")
        if self.l_max < 2 or self.b_max < 2 or self.k_max < 1:
            raise ConfigError("needs l_max >= 2, b_max >= 2 and k_max >= 1")
        if self.backend not in _BACKENDS:
            raise ConfigError(f"backend must be one of {_BACKENDS}, got {self.backend!r}")
        if self.format not in _FORMATS:
            raise ConfigError(f"format must be one of {_FORMATS}, got {self.format!r}")


@dataclass(frozen=True)
class ExperimentReport:
    """Flat, serialization-ready outcome of one suite.

    ``grid`` rows pair with ``values`` and (when present) ``residuals``;
    ``columns`` names the grid entries.  ``fitted_rate`` and
    ``empirical_constant`` carry the sweep-level derived scalars of the
    suites that have them and stay ``None`` elsewhere.
    """

    command: str
    config: RunConfig
    columns: tuple[str, ...]
    grid: tuple[tuple[object, ...], ...]
    values: tuple[complex, ...]
    residuals: tuple[float, ...] | None
    fitted_rate: float | None
    empirical_constant: float | None
    passed: bool
    failure: str | None


# ---------------------------------------------------------------------------
# serialization


def _fmt_float(value: float) -> str:
    return format(float(value), ".17g")


def _csv_cell(value: object) -> str:
    if value is None:
        return ""
    if isinstance(value, bool):
        return "true" if value else "false"
    if isinstance(value, (int, np.integer)):
        return str(int(value))
    if isinstance(value, (float, np.floating)):
        return "" if np.isnan(value) else _fmt_float(float(value))
    return str(value)

def _to_csv(report: ExperimentReport) -> bytes:
    buffer = io.StringIO()
    writer = csv.writer(buffer, lineterminator="\n")
    writer.writerow(
        [
            *report.columns,
            "value_re",
            "value_im",
            "residual",
            "fitted_rate",
            "empirical_constant",
            "pass",
        ]
    )
    residuals = report.residuals
    if residuals is None:
        residuals = (float("nan"),) * len(report.grid)
    for point, value, residual in zip(report.grid, report.values, residuals):
        value = complex(value)
        writer.writerow(
            [
                *(_csv_cell(entry) for entry in point),
                _fmt_float(value.real),
                _fmt_float(value.imag),
                _csv_cell(residual),
                _csv_cell(report.fitted_rate),
                _csv_cell(report.empirical_constant),
                "true" if report.passed else "false",
            ]
        )
    return buffer.getvalue().encode()


def _json_value(value: object) -> str:
    if value is None:
        return "null"
    if isinstance(value, bool):
        return "true" if value else "false"
    if isinstance(value, (int, np.integer)):
        return str(int(value))
    if isinstance(value, (float, np.floating)):
        return "null" if not np.isfinite(value) else _fmt_float(float(value))
    if isinstance(value, str):
        return json.dumps(value)
    if isinstance(value, complex):
        return f"[{_fmt_float(value.real)}, {_fmt_float(value.imag)}]"
    if isinstance(value, (list, tuple)):
        return "[" + ", ".join(_json_value(entry) for entry in value) + "]"
    raise TypeError(f"cannot serialize {type(value).__name__}")


def _json_object(pairs: Sequence[tuple[str, str]], indent: str) -> str:
    body = ",\n".join(f'{indent}  "{key}": {rendered}' for key, rendered in pairs)
    return "{\n" + body + "\n" + indent + "}"


def _to_json(report: ExperimentReport) -> bytes:
    cfg = report.config
    config = _json_object(
        [
            ("N", _json_value(cfg.N)),
            ("backend", _json_value(cfg.backend)),
            ("tol", _json_value(cfg.tol)),
            ("seed", _json_value(cfg.seed)),
            ("tensor_dim", _json_value(cfg.tensor_dim)),
            ("coupled_dim", _json_value(cfg.coupled_dim)),
            ("l_max", _json_value(cfg.l_max)),
            ("b_max", _json_value(cfg.b_max)),
            ("k_max", _json_value(cfg.k_max)),
            ("out", _json_value(str(cfg.out))),
            ("format", _json_value(cfg.format)),
            ("figures", _json_value(cfg.figures)),
        ],
        indent="  ",
    )
    document = _json_object(
        [
            ("command", _json_value(report.command)),
            ("config", config),
            ("columns", _json_value(list(report.columns))),
            ("grid", _json_value([list(point) for point in report.grid])),
            ("values", _json_value([complex(v) for v in report.values])),
            ("fitted_rate", _json_value(report.fitted_rate)),
            ("empirical_constant", _json_value(report.empirical_constant)),
            (
                "residuals",
                _json_value(list(report.residuals)) if report.residuals is not None else "null",
            ),
            ("pass", _json_value(report.passed)),
            ("failure", _json_value(report.failure)),
        ],
        indent="",
    )
    return (document + "\n").encode()


def serialize_report(report: ExperimentReport, fmt: str) -> bytes:
    """Render a report as CSV rows or one JSON document.

    Column order is fixed: grid parameters first, then value real and
    imaginary parts, then the per-row residual and the repeated derived
    fields.  Floats use 17 significant digits so parsing them back is
    lossless; NaN residuals serialize as empty cells (CSV) or null (JSON).
    """
    if fmt == "csv":
        return _to_csv(report)
    if fmt == "json":
        return _to_json(report)
    raise ConfigError(f"format must be one of {_FORMATS}, got {fmt!r}")


# ---------------------------------------------------------------------------
# suite runners


@dataclass
class _Context:
    cfg: RunConfig
    params: QParams
    tensor: TensorBackend
    coupled: CoupledBackend

    def figure_path(self, command: str) -> Path | None:
        if not self.cfg.figures:
            return None
        return self.cfg.out / f"{command}.png"


def _coordinate(dim: int, index: int) -> np.ndarray:
    vec = np.zeros(dim, dtype=complex)
    vec[index] = 1.0
    return vec


def _unit(rng: np.random.Generator, dim: int) -> np.ndarray:
    vec = rng.standard_normal(dim) + 1j * rng.standard_normal(dim)
    return vec / np.linalg.norm(vec)


def _run_dims(ctx: _Context, args: argparse.Namespace) -> ExperimentReport:
    cfg, params = ctx.cfg, ctx.params
    check_tensor = cfg.backend in ("tensor", "cross-check")
    check_coupled = cfg.backend in ("coupled", "cross-check")
    grid, values, residuals = [], [], []
    passed, failure = True, None

    def record_failure(message: str) -> None:
        nonlocal passed, failure
        passed = False
        if failure is None:
            failure = message

    exact_prev, exact = 0, 1
    for n in range(args.max + 1):
        closed = quantum_dim(params, n)
        recursion = float(chebyshev_T(n, float(params.N)))
        worst = max(abs(recursion - closed), abs(closed - exact)) / exact
        if worst > 1e-9:
            record_failure(f"closed form vs recursion differ at n={n}: {worst:.2e}")
        if check_coupled and ctx.coupled.dim(n) != exact:
            record_failure(f"coupled dimension is off at n={n}")
        if check_tensor:
            try:
                trace = ctx.tensor.trace(n)
            except CapExceededError:
                trace = None
            if trace is not None:
                diff = abs(trace - exact) / exact
                worst = max(worst, diff)
                if diff > 1e-8:
                    record_failure(f"projector trace misses d_n at n={n}: {diff:.2e}")
        grid.append((n,))
        values.append(complex(exact))
        residuals.append(worst)
        exact_prev, exact = exact, params.N * exact - exact_prev

    path = ctx.figure_path("dims")
    if path is not None:
        figures.series_figure(
            path,
            {"d_n": ([p[0] for p in grid], [v.real for v in values])},
            xlabel="label n",
            ylabel="dimension",
            title=f"quantum dimensions, N={params.N}",
            log_y=True,
        )
    return ExperimentReport(
        command="dims",
        config=cfg,
        columns=("n",),
        grid=tuple(grid),
        values=tuple(values),
        residuals=tuple(residuals),
        fitted_rate=None,
        empirical_constant=None,
        passed=passed,
        failure=failure,
    )


def _run_jw_verify(ctx: _Context, args: argparse.Namespace) -> ExperimentReport:
    cfg, params = ctx.cfg, ctx.params
    grid, values = [], []
    passed, failure = True, None

    def record(check: str, label: int, worst: float, tol: float) -> None:
        nonlocal passed, failure
        grid.append((check, label))
        values.append(complex(worst))
        if worst > tol:
            passed = False
            if failure is None:
                failure = f"{check} at label {label}: residual {worst:.2e}"

    if cfg.backend in ("tensor", "cross-check"):
        rng = np.random.default_rng(cfg.seed)
        for n in range(2, args.n_max + 1):
            try:
                forms = {
                    "reduced": ctx.tensor.dense_reduced(n),
                    "full": ctx.tensor.dense_full(n),
                    "reflected": ctx.tensor.dense_reflected(n),
                }
            except CapExceededError:
                break
            ambient = params.N**n
            probes = rng.standard_normal((args.trials, ambient)) + 1j * rng.standard_normal(
                (args.trials, ambient)
            )
            for name, dense in forms.items():
                worst = 0.0
                for probe in probes:
                    reference = ctx.tensor.jw_apply(n, probe)
                    worst = max(
                        worst,
                        float(np.linalg.norm(dense @ probe - reference))
                        / float(np.linalg.norm(probe)),
                    )
                record(name, n, worst, 1e-9)

    if cfg.backend in ("coupled", "cross-check"):
        for l, k in ((1, 1), (1, 2), (2, 2), (2, 3), (3, 3)):
            decomposition = ctx.coupled.decompose_tensor(l, k)
            record(f"completeness({l},{k})", l + k, decomposition.completeness_defect(), 1e-9)
            for m in decomposition.labels():
                coupler = ctx.coupled.cg_component(l, k, m)
                gram = coupler.T @ coupler - np.eye(coupler.shape[1])
                record(f"isometry({l},{k};{m})", m, float(np.linalg.norm(gram, 2)), 1e-9)

    return ExperimentReport(
        command="jw-verify",
        config=cfg,
        columns=("check", "n"),
        grid=tuple(grid),
        values=tuple(values),
        residuals=None,
        fitted_rate=None,
        empirical_constant=None,
        passed=passed,
        failure=failure,
    )


def _run_trace_rotation(ctx: _Context, args: argparse.Namespace) -> ExperimentReport:
    cfg, params = ctx.cfg, ctx.params
    passed, failure = True, None
    try:
        report = trace_rotation_sweep(
            params, cfg.k_max, args.trials, backend=ctx.coupled, seed=cfg.seed, b_max=cfg.b_max
        )
    except InvariantError as err:
        passed, failure = False, str(err)
        report = err.report if isinstance(err.report, TraceRotationReport) else None

    grid, values, residuals = [], [], []
    constant = None
    if report is not None:
        for k, worst_trace, worst_excess in report.rotation_grid:
            grid.append(("rotation", k))
            values.append(complex(worst_trace))
            residuals.append(worst_excess)
        for k, value, expected in report.identity_grid:
            grid.append(("identity", k))
            values.append(complex(value))
            residuals.append(abs(value - expected))
        for b, value in report.corollary_grid:
            grid.append(("corollary", b))
            values.append(complex(value))
            residuals.append(float("nan"))
        grid.append(("spearman", 0))
        values.append(complex(report.spearman))
        residuals.append(float("nan"))
        constant = report.corollary_sup

        path = ctx.figure_path("trace-rotation")
        if path is not None:
            figures.series_figure(
                path,
                {
                    "|d_b tr(x f)|": (
                        [b for b, _ in report.corollary_grid],
                        [v for _, v in report.corollary_grid],
                    )
                },
                xlabel="middle label b",
                ylabel="pairing magnitude",
                title=f"bounded-trace corollary, N={params.N}",
                hline=report.corollary_sup,
                hline_label="sup",
            )

    return ExperimentReport(
        command="trace-rotation",
        config=cfg,
        columns=("section", "index"),
        grid=tuple(grid),
        values=tuple(values),
        residuals=tuple(residuals) if grid else None,
        fitted_rate=None,
        empirical_constant=constant,
        passed=passed,
        failure=failure,
    )


def _decay_report_rows(
    ctx: _Context,
    command: str,
    report: DecayReport | None,
    passed: bool,
    failure: str | None,
    columns: tuple[str, ...],
    xlabel: str,
) -> ExperimentReport:
    grid: tuple[tuple[object, ...], ...] = ()
    values: tuple[complex, ...] = ()
    residuals = None
    rate = constant = None
    if report is not None:
        grid = report.parameters
        values = tuple(complex(v) for v in report.values)
        residuals = report.residuals
        rate = report.fitted_rate
        constant = report.empirical_constant

        path = ctx.figure_path(command)
        if path is not None:
            if len(columns) == 1:
                figures.decay_figure(
                    path,
                    [point[0] for point in grid],
                    [abs(v) for v in values],
                    rate,
                    xlabel=xlabel,
                    title=f"{command}, N={ctx.params.N}",
                )
            else:
                side = max(point[0] for point in grid) + 1
                magnitudes = np.abs(np.asarray(values)).reshape(side, side)
                figures.pairing_figure(
                    path,
                    list(range(side)),
                    magnitudes,
                    rate,
                    title=f"{command}, N={ctx.params.N}",
                )
    return ExperimentReport(
        command=command,
        config=ctx.cfg,
        columns=columns,
        grid=grid,
        values=values,
        residuals=residuals,
        fitted_rate=rate,
        empirical_constant=constant,
        passed=passed,
        failure=failure,
    )


def _run_partial_trace(ctx: _Context, args: argparse.Namespace) -> ExperimentReport:
    passed, failure, report = True, None, None
    try:
        report = partial_trace_convergence(
            ctx.params, args.a, args.c, ctx.cfg.b_max, backend=ctx.coupled
        )
    except InvariantError as err:
        passed, failure = False, str(err)
        report = err.report if isinstance(err.report, DecayReport) else None
    return _decay_report_rows(
        ctx, "partial-trace", report, passed, failure, ("b",), "middle label b"
    )


def _run_projection_defect(ctx: _Context, args: argparse.Namespace) -> ExperimentReport:
    passed, failure, report = True, None, None
    try:
        report = projection_defect_sweep(
            ctx.params, args.x, args.z, range(1, ctx.cfg.b_max + 1), backend=ctx.coupled
        )
    except InvariantError as err:
        passed, failure = False, str(err)
        report = err.report if isinstance(err.report, DecayReport) else None
    return _decay_report_rows(
        ctx, "projection-defect", report, passed, failure, ("y",), "middle label y"
    )


def _run_key_estimate(ctx: _Context, args: argparse.Namespace) -> ExperimentReport:
    passed, failure, report = True, None, None
    vectors = default_vectors(ctx.params, args.n, args.k, backend=ctx.coupled)
    try:
        report = key_estimate_sweep(
            ctx.params, args.n, args.k, vectors, ctx.cfg.l_max, backend=ctx.coupled
        )
    except InvariantError as err:
        passed, failure = False, str(err)
        report = err.report if isinstance(err.report, DecayReport) else None
    return _decay_report_rows(
        ctx, "key-estimate", report, passed, failure, ("l", "l_p"), "character label l"
    )


def _run_alpha(ctx: _Context, args: argparse.Namespace) -> ExperimentReport:
    cfg, params = ctx.cfg, ctx.params
    rng = np.random.default_rng(cfg.seed)
    grid, values, residuals = [], [], []
    passed, failure = True, None

    def record_failure(message: str) -> None:
        nonlocal passed, failure
        passed = False
        if failure is None:
            failure = message

    series: dict[str, tuple[list[int], list[float]]] = {}
    for p, q_label in ((0, 1), (1, 1), (1, 2), (2, 1), (2, 2)):
        xs, ys = series.setdefault(f"p={p}, q={q_label}", ([], []))
        for n in range(p + q_label, args.n_max + 1):
            zeta = _unit(rng, ctx.coupled.dim(p + q_label))
            try:
                result = alpha_pq(params, n, p, q_label, zeta, backend=ctx.coupled)
            except InvariantError as err:
                record_failure(f"alpha({p},{q_label};{n}): {err}")
                grid.append((n, p, q_label))
                values.append(complex(float("nan")))
                residuals.append(float("nan"))
                continue
            grid.append((n, p, q_label))
            values.append(complex(result.alpha))
            residuals.append(result.residual)
            xs.append(n)
            ys.append(abs(result.alpha))
            if p == 0 and abs(result.alpha - 1.0) > 1e-8:
                record_failure(f"trivial left insertion is not 1 at n={n}")
            if (p, q_label) == (1, 1):
                expected = -quantum_dim(params, n - 2) / quantum_dim(params, n - 1)
                if abs(result.alpha - expected) > 1e-8:
                    record_failure(f"single-strand scalar misses -d_(n-2)/d_(n-1) at n={n}")

    path = ctx.figure_path("alpha")
    if path is not None:
        figures.series_figure(
            path,
            {label: data for label, data in series.items() if data[0]},
            xlabel="strand count n",
            ylabel="|alpha|",
            title=f"insertion scalars, N={params.N}",
            log_y=True,
        )
    return ExperimentReport(
        command="alpha",
        config=cfg,
        columns=("n", "p", "q"),
        grid=tuple(grid),
        values=tuple(values),
        residuals=tuple(residuals),
        fitted_rate=None,
        empirical_constant=None,
        passed=passed,
        failure=failure,
    )


def _run_mixing_sum(ctx: _Context, args: argparse.Namespace) -> ExperimentReport:
    cfg, params = ctx.cfg, ctx.params
    vectors = default_vectors(params, args.n, args.k, backend=ctx.coupled)
    passed, failure = True, None
    try:
        partials = mixing_partial_sums(params, args.n, args.k, vectors, cfg.l_max, backend=ctx.coupled)
    except InvariantError as err:
        passed, failure = False, str(err)
        partials = err.report if isinstance(err.report, tuple) else ()

    path = ctx.figure_path("mixing-sum")
    if path is not None and partials:
        figures.series_figure(
            path,
            {"partial sum": (list(range(len(partials))), list(partials))},
            xlabel="grid size",
            ylabel="sum of |pairing|^2",
            title=f"mixing partial sums, N={params.N}",
        )
    return ExperimentReport(
        command="mixing-sum",
        config=cfg,
        columns=("size",),
        grid=tuple((size,) for size in range(len(partials))),
        values=tuple(complex(p) for p in partials),
        residuals=None,
        fitted_rate=None,
        empirical_constant=partials[-1] if partials else None,
        passed=passed,
        failure=failure,
    )


def _run_spectral_density(ctx: _Context, args: argparse.Namespace) -> ExperimentReport:
    cfg, params = ctx.cfg, ctx.params
    axis = np.linspace(-2.0, 2.0, args.grid_points)
    points = [(float(s), float(t)) for s in axis for t in axis]
    vectors = default_vectors(params, args.n, args.k, backend=ctx.coupled)
    passed, failure, report = True, None, None
    try:
        report = spectral_density(
            params, args.n, args.k, vectors, cfg.l_max, points, backend=ctx.coupled
        )
    except InvariantError as err:
        passed, failure = False, str(err)
        report = err.report if isinstance(err.report, SpectralDensityReport) else None

    grid: tuple[tuple[object, ...], ...] = ()
    values: tuple[complex, ...] = ()
    rate = mass = None
    if report is not None:
        grid = tuple((s, t) for s, t in report.points)
        values = tuple(complex(v) for v in report.values)
        rate = report.fitted_rate
        mass = report.mass
        path = ctx.figure_path("spectral-density")
        if path is not None:
            figures.density_figure(
                path,
                axis,
                axis,
                np.asarray([v.real for v in values]).reshape(len(axis), len(axis)),
                title=f"spectral density partial sum, N={params.N}",
            )
    return ExperimentReport(
        command="spectral-density",
        config=cfg,
        columns=("s", "t"),
        grid=grid,
        values=values,
        residuals=None,
        fitted_rate=rate,
        empirical_constant=mass,
        passed=passed,
        failure=failure,
    )


def _run_haar_oracle(ctx: _Context, args: argparse.Namespace) -> ExperimentReport:
    cfg, params = ctx.cfg, ctx.params
    rng = np.random.default_rng(cfg.seed)
    grid, values, residuals = [], [], []
    passed, failure = True, None

    def record(kind: str, index: int, value: complex, residual: float, tol: float) -> None:
        nonlocal passed, failure
        grid.append((kind, index))
        values.append(complex(value))
        residuals.append(residual)
        if residual > tol:
            passed = False
            if failure is None:
                failure = f"{kind}[{index}]: residual {residual:.2e}"

    dim = params.N
    letters = [
        [coefficient(params, 1, _coordinate(dim, r), _coordinate(dim, c)) for c in range(dim)]
        for r in range(dim)
    ]
    for degree in range(2, args.degree + 1, 2):
        for index in range(args.words):
            word = [
                (int(rng.integers(dim)), int(rng.integers(dim))) for _ in range(degree)
            ]
            element = character(params, 0)
            for row, col in word:
                element = multiply(params, element, letters[row][col], backend=ctx.coupled)
            value = haar_state(element)
            residual = abs(value - haar_moment(params, word))
            record(f"word-{degree}", index, value, residual, 1e-10)

    # Catalan moments of the single character by three routes: the fusion
    # algebra product, adaptive semicircle quadrature, and the exact
    # Weingarten trace identity.
    chi = character(params, 1)
    power = character(params, 0)
    for m in range(1, args.catalan + 1):
        power = multiply(params, power, chi, backend=ctx.coupled)
        power = multiply(params, power, chi, backend=ctx.coupled)
        expected = float(catalan(m))
        fusion_value = haar_state(power).real
        record("catalan-fusion", m, fusion_value, abs(fusion_value - expected), 1e-10)
        quadrature = semicircle_moment(lambda s, m=m: s ** (2 * m))
        record("catalan-quadrature", m, quadrature, abs(quadrature - expected), 1e-8)
        # The sum of the degree-2m Haar moments over all diagonal index words
        # collapses, pairing by pairing, to exactly the Gram entries.
        table = weingarten_table(params, m)
        total = Fraction(0)
        for wg_row, gram_row in zip(table.wg, table.gram):
            for wg_entry, gram_entry in zip(wg_row, gram_row):
                total += wg_entry * gram_entry
        weingarten_value = float(total)
        record("catalan-weingarten", m, weingarten_value, abs(weingarten_value - expected), 1e-12)

    return ExperimentReport(
        command="haar-oracle",
        config=cfg,
        columns=("kind", "index"),
        grid=tuple(grid),
        values=tuple(values),
        residuals=tuple(residuals),
        fitted_rate=None,
        empirical_constant=None,
        passed=passed,
        failure=failure,
    )


# ---------------------------------------------------------------------------
# registry and entry point


@dataclass(frozen=True)
class _Suite:
    name: str
    runner: Callable[[_Context, argparse.Namespace], ExperimentReport]
    help: str
    add_arguments: Callable[[argparse.ArgumentParser], None] | None = None


def _dims_args(parser: argparse.ArgumentParser) -> None:
    parser.add_argument("--max", type=int, default=8, help="largest label to tabulate")


def _jw_args(parser: argparse.ArgumentParser) -> None:
    parser.add_argument("--n-max", type=int, default=6, help="largest strand count")
    parser.add_argument("--trials", type=int, default=20, help="random probes per label")


def _rotation_args(parser: argparse.ArgumentParser) -> None:
    parser.add_argument("--trials", type=int, default=20, help="random operators per label")


def _partial_trace_args(parser: argparse.ArgumentParser) -> None:
    parser.add_argument("--a", type=int, default=1, help="left outer label")
    parser.add_argument("--c", type=int, default=1, help="right outer label")


def _alpha_args(parser: argparse.ArgumentParser) -> None:
    parser.add_argument("--n-max", type=int, default=5, help="largest strand count")


def _projection_args(parser: argparse.ArgumentParser) -> None:
    parser.add_argument("--x", type=int, default=1, help="left outer label")
    parser.add_argument("--z", type=int, default=1, help="right outer label")


def _pair_args(parser: argparse.ArgumentParser) -> None:
    parser.add_argument("--n", type=int, default=1, help="label of the first coefficient")
    parser.add_argument("--k", type=int, default=1, help="label of the second coefficient")


def _density_args(parser: argparse.ArgumentParser) -> None:
    _pair_args(parser)
    parser.add_argument("--grid-points", type=int, default=21, help="points per axis")


def _haar_args(parser: argparse.ArgumentParser) -> None:
    parser.add_argument("--degree", type=int, default=6, help="largest even word degree")
    parser.add_argument("--words", type=int, default=8, help="random words per degree")
    parser.add_argument("--catalan", type=int, default=4, help="largest Catalan index")


_SUITES: tuple[_Suite, ...] = (
    _Suite("dims", _run_dims, "quantum dimension table and identities", _dims_args),
    _Suite("jw-verify", _run_jw_verify, "projector recursion and coupler checks", _jw_args),
    _Suite("haar-oracle", _run_haar_oracle, "Haar moments against Weingarten sums", _haar_args),
    _Suite("trace-rotation", _run_trace_rotation, "rotation trace identity sweep", _rotation_args),
    _Suite("partial-trace", _run_partial_trace, "traced projector convergence", _partial_trace_args),
    _Suite("alpha", _run_alpha, "two-sided insertion scalars", _alpha_args),
    _Suite("projection-defect", _run_projection_defect, "projection product defects", _projection_args),
    _Suite("key-estimate", _run_key_estimate, "character-coefficient pairing decay", _pair_args),
    _Suite("mixing-sum", _run_mixing_sum, "square-summability of the pairings", _pair_args),
    _Suite("spectral-density", _run_spectral_density, "bivariate density partial sums", _density_args),
)

_SUITE_BY_NAME: Mapping[str, _Suite] = {suite.name: suite for suite in _SUITES}


def _parse_bool(text: str) -> bool:
    lowered = text.strip().lower()
    if lowered in ("1", "true", "yes", "on"):
        return True
    if lowered in ("0", "false", "no", "off"):
        return False
    raise ValueError(f"expected a boolean, got {text!r}")


def _env_defaults(environ: Mapping[str, str]) -> dict[str, object]:
    """Config defaults pulled from ONPLUS_* environment variables."""
    converters: dict[str, Callable[[str], object]] = {
        "N": int,
        "backend": str,
        "tol": float,
        "seed": int,
        "tensor_dim": int,
        "coupled_dim": int,
        "l_max": int,
        "b_max": int,
        "k_max": int,
        "out": Path,
        "format": str,
        "figures": _parse_bool,
    }
    defaults: dict[str, object] = {}
    for name, convert in converters.items():
        raw = environ.get(_ENV_PREFIX + name.upper())
        if raw is None:
            continue
        try:
            defaults[name] = convert(raw)
        except ValueError as err:
            raise ConfigError(f"invalid {_ENV_PREFIX}{name.upper()}: {err}") from err
    return defaults


def build_parser(env_defaults: Mapping[str, object] | None = None) -> argparse.ArgumentParser:
    base = RunConfig()
    overrides = dict(env_defaults or {})

    def default(name: str) -> object:
        return overrides.get(name, getattr(base, name))

    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--N", dest="N", type=int, default=default("N"), help="matrix size, >= 3")
    common.add_argument("--backend", choices=_BACKENDS, default=default("backend"))
    common.add_argument("--tol", type=float, default=default("tol"), help="config tolerance, in (0, 1e-4]")
    common.add_argument("--seed", type=int, default=default("seed"))
    common.add_argument("--tensor-dim", dest="tensor_dim", type=int, default=default("tensor_dim"),
                        help="ambient dimension cap of the tensor backend")
    common.add_argument("--coupled-dim", dest="coupled_dim", type=int, default=default("coupled_dim"),
                        help="dimension cap of the coupled backend")
    common.add_argument("--l-max", dest="l_max", type=int, default=default("l_max"))
    common.add_argument("--b-max", dest="b_max", type=int, default=default("b_max"))
    common.add_argument("--k-max", dest="k_max", type=int, default=default("k_max"))
    common.add_argument("--out", type=Path, default=default("out"), help="report directory")
    common.add_argument("--format", choices=_FORMATS, default=default("format"))
    common.add_argument("--figures", action=argparse.BooleanOptionalAction,
                        default=default("figures"), help="render PNG figures for sweeps")

    parser = argparse.ArgumentParser(
        prog="onplus",
        description="Verification suites for the representation calculus of O_N+.",
        epilog=f"Flags may also be set via {_ENV_PREFIX}* environment variables.",
    )
    subparsers = parser.add_subparsers(dest="command", required=True)
    for suite in _SUITES:
        sub = subparsers.add_parser(suite.name, parents=[common], help=suite.help)
        if suite.add_arguments is not None:
            suite.add_arguments(sub)
    subparsers.add_parser("all", parents=[common], help="run every suite in order")
    return parser


def _config_from_args(args: argparse.Namespace) -> RunConfig:
    cfg = RunConfig(
        N=args.N,
        backend=args.backend,
        tol=args.tol,
        seed=args.seed,
        tensor_dim=args.tensor_dim,
        coupled_dim=args.coupled_dim,
        l_max=args.l_max,
        b_max=args.b_max,
        k_max=args.k_max,
        out=Path(args.out),
        format=args.format,
        figures=bool(args.figures),
    )
    cfg.validate()
    return cfg


def _suite_defaults(suite: _Suite) -> argparse.Namespace:
    parser = argparse.ArgumentParser()
    if suite.add_arguments is not None:
        suite.add_arguments(parser)
    return parser.parse_args([])


def _write_report(cfg: RunConfig, report: ExperimentReport) -> Path:
    cfg.out.mkdir(parents=True, exist_ok=True)
    path = cfg.out / f"{report.command}.{cfg.format}"
    path.write_bytes(serialize_report(report, cfg.format))
    return path


def _announce(report: ExperimentReport, elapsed: float) -> None:
    verdict = "PASS" if report.passed else "FAIL"
    print(f"[{verdict}] {report.command}")
    print(f"{report.command}: {elapsed:.1f}s", file=sys.stderr)
    if not report.passed and report.failure is not None:
        print(f"invariant failed in {report.command}: {report.failure}", file=sys.stderr)


def _run_single(ctx: _Context, suite: _Suite, args: argparse.Namespace) -> ExperimentReport:
    start = time.perf_counter()
    report = suite.runner(ctx, args)
    _write_report(ctx.cfg, report)
    _announce(report, time.perf_counter() - start)
    return report


def main(argv: Sequence[str] | None = None) -> int:
    try:
        env_defaults = _env_defaults(os.environ)
    except ConfigError as err:
        print(f"config error: {err}", file=sys.stderr)
        return 2
    parser = build_parser(env_defaults)
    try:
        args = parser.parse_args(argv)
    except SystemExit as exit_request:
        return int(exit_request.code or 0)

    try:
        cfg = _config_from_args(args)
        params = make_params(cfg.N)
    except ConfigError as err:
        print(f"config error: {err}", file=sys.stderr)
        return 2

    ctx = _Context(
        cfg=cfg,
        params=params,
        tensor=TensorBackend(params, dim_cap=cfg.tensor_dim),
        coupled=CoupledBackend(params, dim_cap=cfg.coupled_dim),
    )

    try:
        if args.command == "all":
            reports = [
                _run_single(ctx, suite, _suite_defaults(suite)) for suite in _SUITES
            ]
            summary = ExperimentReport(
                command="all",
                config=cfg,
                columns=("suite",),
                grid=tuple((r.command,) for r in reports),
                values=tuple(complex(1.0 if r.passed else 0.0) for r in reports),
                residuals=None,
                fitted_rate=None,
                empirical_constant=None,
                passed=all(r.passed for r in reports),
                failure=next(
                    (f"{r.command}: {r.failure}" for r in reports if not r.passed), None
                ),
            )
            _write_report(cfg, summary)
            print(f"[{'PASS' if summary.passed else 'FAIL'}] all")
            if not summary.passed:
                print(f"invariant failed in all: {summary.failure}", file=sys.stderr)
            return 0 if summary.passed else 1
        report = _run_single(ctx, _SUITE_BY_NAME[args.command], args)
        return 0 if report.passed else 1
    except CapExceededError as err:
        print(f"cap exhausted: {err}", file=sys.stderr)
        return 3
    except ValueError as err:
        print(f"config error: {err}", file=sys.stderr)
        return 2


if __name__ == "__main__":
    sys.exit(main())
