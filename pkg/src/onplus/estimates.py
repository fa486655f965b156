"""Decay experiments: every quantitative estimate, measured on concrete grids.

Each sweep in this module evaluates one inequality of the calculus on a
finite grid, fits the observed decay rate by least squares in log scale,
and reports the empirical constant in front of the decay.  Constants are
reported, never asserted; rates and cross-consistency checks are asserted
and raise :class:`~onplus.types.InvariantError` when violated.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Sequence

import numpy as np
import scipy.integrate
import scipy.stats
from scipy.sparse.linalg import LinearOperator, aslinearoperator

from . import fourier
from .coupled_backend import CoupledBackend
from .intertwiners import coupled_backend_for, partial_trace_x, rotate
from .qcore import QParams, fusion_labels, quantum_dim
from .types import InvariantError

__all__ = [
    "AlphaResult",
    "DecayReport",
    "SpectralDensityReport",
    "TraceRotationReport",
    "alpha_pq",
    "default_vectors",
    "fit_decay",
    "key_estimate_S",
    "key_estimate_sweep",
    "mixing_partial_sums",
    "mixing_sum",
    "operator_norm",
    "partial_trace_convergence",
    "projection_defect_sweep",
    "projection_product_defect",
    "random_orthonormal_pair",
    "spectral_density",
    "trace_rotation_sweep",
]

# Grid values at or below this floor are treated as exact zeros (parity
# forbidden points) and excluded from every log-scale fit.
_FIT_FLOOR = 10.0 * float(np.finfo(float).eps)

# Agreement tolerance between the two evaluation paths of the key estimate.
_PATH_TOL = 1e-8

# Relative band around the expected decay rate accepted by the sweeps.
_RATE_BAND = 0.15


@dataclass(frozen=True)
class DecayReport:
    """Grid of measured values together with a fitted decay rate.

    ``grid`` holds ``(parameters, value)`` pairs in deterministic sweep
    order.  ``fitted_rate`` is the least-squares slope of log|value|
    against the decaying parameter, computed over the points with
    |value| above the zero floor only; ``residuals`` align with ``grid``
    and hold NaN for excluded points.  ``empirical_constant`` is the
    maximum of |value| times the inverse of the expected decay.
    """

    grid: tuple[tuple[tuple[int, ...], complex], ...]
    fitted_rate: float
    empirical_constant: float
    residuals: tuple[float, ...]

    @property
    def parameters(self) -> tuple[tuple[int, ...], ...]:
        return tuple(point for point, _ in self.grid)

    @property
    def values(self) -> tuple[complex, ...]:
        return tuple(value for _, value in self.grid)


@dataclass(frozen=True)
class AlphaResult:
    """Proportionality scalar between the two sides of the swap identity."""

    alpha: complex
    residual: float
    degenerate: bool


@dataclass(frozen=True)
class TraceRotationReport:
    """Rotation-trace checks and the bounded-trace corollary sweep."""

    rotation_grid: tuple[tuple[int, float, float], ...]
    identity_grid: tuple[tuple[int, float, float], ...]
    corollary_grid: tuple[tuple[int, float], ...]
    corollary_sup: float
    spearman: float


@dataclass(frozen=True)
class SpectralDensityReport:
    """Bivariate density partial sums built from product coefficients."""

    coefficients: tuple[tuple[complex, ...], ...]
    points: tuple[tuple[float, float], ...]
    values: tuple[complex, ...]
    increment_sups: tuple[float, ...]
    fitted_rate: float
    mass: float | None
    mass_expected: float | None


def operator_norm(
    op: np.ndarray | LinearOperator,
    *,
    tol: float = 1e-10,
    max_iter: int = 10_000,
    seed: int = 11,
) -> float:
    """Largest singular value by power iteration on ``op* op``.

    Deterministic for a given seed and shape; converges when the estimate
    moves by less than ``tol`` relative per step, with a hard iteration
    cap for degenerate spectra.
    """
    lin = op if isinstance(op, LinearOperator) else aslinearoperator(np.asarray(op))
    dim_in = lin.shape[1]
    rng = np.random.default_rng(seed + 31 * dim_in)
    vec = rng.standard_normal(dim_in) + 1j * rng.standard_normal(dim_in)
    vec /= np.linalg.norm(vec)
    estimate = 0.0
    for _ in range(max_iter):
        image = lin.matvec(vec)
        sigma = float(np.linalg.norm(image))
        if sigma < 1e-300:
            return 0.0
        back = lin.rmatvec(image)
        scale = float(np.linalg.norm(back))
        if scale < 1e-300:
            return sigma
        if abs(sigma - estimate) <= tol * max(sigma, 1e-30):
            return sigma
        estimate = sigma
        vec = back / scale
    return estimate


def fit_decay(
    parameters: Sequence[float], values: Sequence[complex]
) -> tuple[float, tuple[float, ...]]:
    """Least-squares slope of log|value| against the parameter.

    Points with |value| at the zero floor are excluded (parity zeros);
    residuals align with the input and hold NaN for excluded points.
    """
    xs = np.asarray(parameters, dtype=float)
    mags = np.abs(np.asarray(values))
    mask = mags > _FIT_FLOOR
    if int(mask.sum()) < 2:
        raise InvariantError("decay fit needs at least two grid points above the zero floor")
    slope, intercept = np.polyfit(xs[mask], np.log(mags[mask]), 1)
    residuals = np.full(xs.shape, np.nan)
    residuals[mask] = np.log(mags[mask]) - (slope * xs[mask] + intercept)
    return float(slope), tuple(float(r) for r in residuals)


def default_vectors(
    params: QParams, n: int, k: int, backend: CoupledBackend | None = None
) -> tuple[np.ndarray, np.ndarray, np.ndarray, np.ndarray]:
    """Coordinate unit vectors (e1, e2) in H_n and H_k, the default probes."""
    cb = backend if backend is not None else coupled_backend_for(params)
    if min(n, k) < 1:
        raise ValueError("default probe vectors need labels >= 1")
    xi = np.zeros(cb.dim(n), dtype=complex)
    eta = np.zeros(cb.dim(n), dtype=complex)
    xi[0] = 1.0
    eta[1] = 1.0
    xi_p = np.zeros(cb.dim(k), dtype=complex)
    eta_p = np.zeros(cb.dim(k), dtype=complex)
    xi_p[0] = 1.0
    eta_p[1] = 1.0
    return xi, eta, xi_p, eta_p


def random_orthonormal_pair(
    rng: np.random.Generator, dim: int
) -> tuple[np.ndarray, np.ndarray]:
    """Two orthonormal complex vectors drawn from the rotation-invariant law."""
    if dim < 2:
        raise ValueError(f"an orthonormal pair needs dimension >= 2, got {dim}")
    block = rng.standard_normal((dim, 2)) + 1j * rng.standard_normal((dim, 2))
    basis, _ = np.linalg.qr(block)
    return basis[:, 0].copy(), basis[:, 1].copy()


def _check_unit(name: str, vec: np.ndarray, dim: int) -> np.ndarray:
    arr = np.asarray(vec, dtype=complex)
    if arr.shape != (dim,):
        raise ValueError(f"{name} must have shape ({dim},), got {arr.shape}")
    if abs(np.linalg.norm(arr) - 1.0) > 1e-12:
        raise ValueError(f"{name} must be a unit vector")
    return arr


def key_estimate_S(
    params: QParams,
    n: int,
    k: int,
    xi: np.ndarray,
    eta: np.ndarray,
    xi_p: np.ndarray,
    eta_p: np.ndarray,
    l: int,
    l_p: int,
    backend: CoupledBackend | None = None,
    check_orthogonality: bool = True,
) -> tuple[complex, dict[int, complex]]:
    """Mixed character-coefficient pairing, evaluated along two routes.

    Returns ``S = <chi_l u^k_{xi' eta'}, u^n_{xi eta} chi_l'>`` together
    with its per-label contributions.  The direct route multiplies in the
    coefficient algebra and pairs; the per-label route contracts fusion
    isometries against pair vectors.  Both must agree at 1e-8, which ties
    the fusion isometries, the pair vectors and the product transport to
    each other; disagreement raises :class:`InvariantError`.
    """
    cb = backend if backend is not None else coupled_backend_for(params)
    xi = _check_unit("xi", xi, cb.dim(n))
    eta = _check_unit("eta", eta, cb.dim(n))
    xi_p = _check_unit("xi_p", xi_p, cb.dim(k))
    eta_p = _check_unit("eta_p", eta_p, cb.dim(k))
    if check_orthogonality and abs(np.vdot(eta, xi)) > 1e-12:
        raise ValueError("xi and eta must be orthogonal (pass check_orthogonality=False to probe)")
    if min(l, l_p) < 0:
        raise ValueError("character labels must be >= 0")

    x = fourier.multiply(
        params,
        fourier.character(params, l),
        fourier.coefficient(params, k, xi_p, eta_p),
        backend=cb,
    )
    y = fourier.multiply(
        params,
        fourier.coefficient(params, n, xi, eta),
        fourier.character(params, l_p),
        backend=cb,
    )
    direct = complex(fourier.inner_product(params, x, y))

    terms = _pairing_terms(params, cb, n, k, xi, eta, xi_p, eta_p, l, l_p)
    total = complex(sum(terms.values()))
    if abs(direct - total) > _PATH_TOL * max(1.0, abs(direct)):
        raise InvariantError(
            "key estimate paths disagree: "
            f"direct {direct!r} vs per-label sum {total!r} at ({l}, {l_p})"
        )
    return direct, terms


def _pairing_terms(
    params: QParams,
    cb: CoupledBackend,
    n: int,
    k: int,
    xi: np.ndarray,
    eta: np.ndarray,
    xi_p: np.ndarray,
    eta_p: np.ndarray,
    l: int,
    l_p: int,
) -> dict[int, complex]:
    """Per-label pairing terms from fusion isometries and pair vectors.

    For each common label m the two sides are realized as matrices over
    the m-isotypic multiplicity pattern: contract the (l, k) isometry
    against xi' and the conjugated eta', sandwich with the pair matrix of
    H_l, and mirror on the (n, l') side; the term is the normalized
    Frobenius pairing of the two matrices.
    """
    labels = sorted(set(fusion_labels(l, k)) & set(fusion_labels(n, l_p)))
    t_l = cb.t_matrix(l)
    t_lp = cb.t_matrix(l_p)
    c_k = cb.t_matrix(k)
    c_n = cb.t_matrix(n)
    eta_p_bar = c_k @ np.conj(eta_p)
    eta_bar = c_n @ np.conj(eta)
    d_l, d_k, d_n, d_lp = cb.dim(l), cb.dim(k), cb.dim(n), cb.dim(l_p)

    terms: dict[int, complex] = {}
    for m in labels:
        d_m = cb.dim(m)
        c_m = cb.t_matrix(m)
        v_lk = cb.cg_component(l, k, m).reshape(d_l, d_k, d_m)
        v_nl = cb.cg_component(n, l_p, m).reshape(d_n, d_lp, d_m)

        # Left side: (l, k) isometry against xi', conjugate-transported
        # (k, l) isometry against the conjugated eta', pair matrix of H_l
        # in the middle.
        a_kept = np.tensordot(v_lk, xi_p, axes=([1], [0]))
        a_conj = np.tensordot(v_lk, c_k @ eta_p_bar, axes=([1], [0]))
        left = (a_kept.T @ t_l) @ ((t_l @ a_conj) @ c_m)

        # Right side: same construction for (n, l') with the pair matrix
        # of H_l' and the conjugated eta.
        b_kept = np.tensordot(v_nl, xi, axes=([0], [0]))
        b_conj = np.tensordot(v_nl, c_n @ eta_bar, axes=([0], [0]))
        right = (b_kept.T @ t_lp) @ ((t_lp @ b_conj) @ c_m)

        terms[m] = complex(np.vdot(right, left) / quantum_dim(params, m))
    return terms


def key_estimate_sweep(
    params: QParams,
    n: int,
    k: int,
    vectors: tuple[np.ndarray, np.ndarray, np.ndarray, np.ndarray],
    l_max: int,
    backend: CoupledBackend | None = None,
    check_orthogonality: bool = True,
) -> DecayReport:
    """Pairing magnitudes over a character grid, with the decay fitted.

    Sweeps 0 <= l, l' <= l_max, reports the empirical constant
    max |S| q^{-max(l, l')} and fits the decay rate along the diagonal.
    Raises :class:`InvariantError` when the fitted rate is slower than
    log q plus the accepted slack, or when the constant is not finite.
    """
    cb = backend if backend is not None else coupled_backend_for(params)
    xi, eta, xi_p, eta_p = vectors
    grid: list[tuple[tuple[int, ...], complex]] = []
    diag: list[complex] = []
    for l in range(l_max + 1):
        for l_p in range(l_max + 1):
            value, _ = key_estimate_S(
                params, n, k, xi, eta, xi_p, eta_p, l, l_p,
                backend=cb, check_orthogonality=check_orthogonality,
            )
            grid.append(((l, l_p), value))
            if l == l_p:
                diag.append(value)

    rate, diag_residuals = fit_decay(range(l_max + 1), diag)
    constant = max(
        abs(value) * params.q ** (-max(point)) for point, value in grid
    )
    residuals = []
    diag_iter = iter(diag_residuals)
    for point, _ in grid:
        residuals.append(next(diag_iter) if point[0] == point[1] else np.nan)
    report = DecayReport(
        grid=tuple(grid),
        fitted_rate=rate,
        empirical_constant=float(constant),
        residuals=tuple(residuals),
    )
    if not np.isfinite(constant):
        raise InvariantError("key estimate constant is not finite", report=report)
    slack = (1.0 - _RATE_BAND) * np.log(params.q)
    if rate > slack:
        raise InvariantError(
            f"key estimate diagonal decays at rate {rate:.4f}, slower than {slack:.4f}",
            report=report,
        )
    return report


def mixing_partial_sums(
    params: QParams,
    n: int,
    k: int,
    vectors: tuple[np.ndarray, np.ndarray, np.ndarray, np.ndarray],
    l_max: int,
    backend: CoupledBackend | None = None,
) -> tuple[float, ...]:
    """Partial sums of |S(l, l')|^2 over growing square grids.

    Asserts the increments shrink geometrically: the measured ratio of
    successive nonzero increments must stay at or below q with 20% slack.
    """
    cb = backend if backend is not None else coupled_backend_for(params)
    xi, eta, xi_p, eta_p = vectors
    values = np.zeros((l_max + 1, l_max + 1))
    for l in range(l_max + 1):
        for l_p in range(l_max + 1):
            s, _ = key_estimate_S(
                params, n, k, xi, eta, xi_p, eta_p, l, l_p, backend=cb
            )
            values[l, l_p] = abs(s) ** 2

    partials = [float(values[: size + 1, : size + 1].sum()) for size in range(l_max + 1)]
    increments = np.diff(partials)
    floor = _FIT_FLOOR * max(partials[-1], 1.0)
    ratios = [
        increments[i] / increments[i - 1]
        for i in range(1, len(increments))
        if increments[i - 1] > floor
    ]
    bound = 1.2 * params.q
    if ratios and max(ratios) > bound:
        raise InvariantError(
            f"mixing increments shrink at ratio {max(ratios):.4f}, above {bound:.4f}",
            report=tuple(partials),
        )
    return tuple(partials)


def mixing_sum(
    params: QParams,
    n: int,
    k: int,
    vectors: tuple[np.ndarray, np.ndarray, np.ndarray, np.ndarray],
    l_max: int,
    backend: CoupledBackend | None = None,
) -> float:
    """Total of |S|^2 over the full grid; finite by the verified decay."""
    return mixing_partial_sums(params, n, k, vectors, l_max, backend=backend)[-1]


def partial_trace_convergence(
    params: QParams,
    a: int,
    c: int,
    b_max: int,
    backend: CoupledBackend | None = None,
) -> DecayReport:
    """Distance of the traced top projector from its scalar limit.

    The middle partial trace converges to q^{-a-c} / (d_a d_c) times the
    identity; the sweep measures the operator-norm deviation for
    1 <= b <= b_max and fits the decay rate.  For a, c >= 1 the rate must
    match log q within the accepted band; for degenerate outer labels the
    deviation decays strictly faster and only that direction is required.
    """
    cb = backend if backend is not None else coupled_backend_for(params)
    if min(a, c) < 0 or b_max < 2:
        raise ValueError("needs a, c >= 0 and b_max >= 2")
    limit = params.q ** (-(a + c)) / (quantum_dim(params, a) * quantum_dim(params, c))
    dim_ac = cb.dim(a) * cb.dim(c)
    grid: list[tuple[tuple[int, ...], complex]] = []
    for b in range(1, b_max + 1):
        x = partial_trace_x(params, a, b, c, backend=cb)
        deviation = operator_norm(x - limit * np.eye(dim_ac))
        grid.append(((b,), deviation))

    rate, residuals = fit_decay([point[0] for point, _ in grid], [v for _, v in grid])
    constant = max(abs(v) * params.q ** (-point[0]) for point, v in grid)
    report = DecayReport(
        grid=tuple(grid),
        fitted_rate=rate,
        empirical_constant=float(constant),
        residuals=residuals,
    )
    log_q = np.log(params.q)
    if min(a, c) >= 1:
        if abs(rate - log_q) > _RATE_BAND * abs(log_q):
            raise InvariantError(
                f"partial trace deviation decays at rate {rate:.4f}, "
                f"outside the {_RATE_BAND:.0%} band around {log_q:.4f}",
                report=report,
            )
    elif rate > (1.0 - _RATE_BAND) * log_q:
        raise InvariantError(
            f"partial trace deviation decays at rate {rate:.4f}, slower than log q",
            report=report,
        )
    return report


def alpha_pq(
    params: QParams,
    n: int,
    p: int,
    q: int,
    zeta: np.ndarray,
    backend: CoupledBackend | None = None,
) -> AlphaResult:
    """Proportionality scalar of the two-sided insertion identities.

    A vector in H_{p+q} can be split across H_p (x) H_q or across
    H_q (x) H_p; inserting either split around the top projector of n
    strands yields proportional operators H_{n-q} -> H_{n-p}.  Both
    displayed identities are built explicitly from fusion isometries and
    the scalar is recovered by least squares over the stacked pair.
    """
    cb = backend if backend is not None else coupled_backend_for(params)
    if min(p, q) < 0 or n < p + q:
        raise ValueError("needs p, q >= 0 and n >= p + q")
    zeta = np.asarray(zeta, dtype=complex)
    if zeta.shape != (cb.dim(p + q),):
        raise ValueError(f"zeta must have shape ({cb.dim(p + q)},), got {zeta.shape}")

    d_p, d_q, d_n = cb.dim(p), cb.dim(q), cb.dim(n)
    d_np, d_nq, d_mid = cb.dim(n - p), cb.dim(n - q), cb.dim(n - p - q)
    t_p, t_q = cb.t_matrix(p), cb.t_matrix(q)
    z1 = (cb.cg_component(p, q, p + q) @ zeta).reshape(d_p, d_q)
    z2 = (cb.cg_component(q, p, p + q) @ zeta).reshape(d_q, d_p)

    # First identity: conjugated left split against the top projector.
    v_p = cb.cg_component(p, n - p, n).reshape(d_p, d_np, d_n)
    v_q = cb.cg_component(q, n - q, n).reshape(d_q, d_nq, d_n)
    w1 = t_p @ z1
    lhs1 = np.tensordot(np.tensordot(w1, v_p, axes=([0], [0])), v_q, axes=([0, 2], [0, 2]))
    g1 = z2 @ t_p
    v_a = cb.cg_component(q, n - p - q, n - p).reshape(d_q, d_mid, d_np)
    v_b = cb.cg_component(p, n - p - q, n - q).reshape(d_p, d_mid, d_nq)
    rhs1 = np.tensordot(v_a, np.tensordot(g1, v_b, axes=([1], [0])), axes=([0, 1], [0, 1]))

    # Second identity: the mirror insertion on the right legs.  The
    # reversed-order realizations must be the conjugates of the ones used
    # above; independently phase-fixed couplers would flip the sign of the
    # scalar for some label combinations.
    v_pb = cb.conjugate_coupler(p, n - p, n).reshape(d_np, d_p, d_n)
    v_qb = cb.conjugate_coupler(q, n - q, n).reshape(d_nq, d_q, d_n)
    w2 = np.conj(z1) @ t_q
    lhs2 = np.tensordot(np.tensordot(v_pb, w2, axes=([1], [0])), v_qb, axes=([2, 1], [1, 2]))
    g2 = t_q @ np.conj(z2)
    v_c = cb.conjugate_coupler(q, n - p - q, n - p).reshape(d_mid, d_q, d_np)
    v_d = cb.conjugate_coupler(p, n - p - q, n - q).reshape(d_mid, d_p, d_nq)
    rhs2 = np.tensordot(v_c, np.tensordot(g2, v_d, axes=([1], [1])), axes=([0, 1], [1, 0]))

    lhs = np.concatenate([lhs1.ravel(), lhs2.ravel()])
    rhs = np.concatenate([rhs1.ravel(), rhs2.ravel()])
    scale = max(float(np.linalg.norm(zeta)) ** 2, 1e-300)
    norm_l = float(np.linalg.norm(lhs))
    norm_r = float(np.linalg.norm(rhs))
    if norm_l <= 1e-13 * scale and norm_r <= 1e-13 * scale:
        return AlphaResult(alpha=0j, residual=0.0, degenerate=True)

    alpha = complex(np.vdot(rhs, lhs) / norm_r**2)
    residual = float(np.linalg.norm(lhs - alpha * rhs) / norm_l)
    if residual > 1e-7:
        raise InvariantError(f"insertion identities are not proportional: residual {residual:.2e}")
    if not 0.0 < abs(alpha) <= 1.0 + 1e-9:
        raise InvariantError(f"insertion scalar {alpha!r} is outside (0, 1]")
    return AlphaResult(alpha=alpha, residual=residual, degenerate=False)


def projection_product_defect(
    params: QParams,
    x: int,
    y: int,
    z: int,
    backend: CoupledBackend | None = None,
) -> tuple[float, float]:
    """Distance of the two-sided projection product from the top projector.

    Realizes id (x) P_{y+z} and P_{x+y} (x) id on the coupled space
    H_x (x) H_y (x) H_z and measures the operator norm of their product
    minus the top projector (``defect``).  Independently, ``cross`` is
    the largest principal-angle cosine between matching non-top isotypic
    copies of the two factorizations; the proof chain gives
    cross <= defect.
    """
    cb = backend if backend is not None else coupled_backend_for(params)
    if min(x, y, z) < 0:
        raise ValueError("strand counts must be >= 0")
    top = x + y + z
    d_x, d_y, d_z = cb.dim(x), cb.dim(y), cb.dim(z)
    dim = d_x * d_y * d_z
    w_xy = cb.cg_component(x, y, x + y)
    w_yz = cb.cg_component(y, z, y + z)
    w_mid = cb.cg_component(x + y, z, top).reshape(cb.dim(x + y), d_z * cb.dim(top))
    w_top = (w_xy @ w_mid).reshape(dim, cb.dim(top))

    def apply_left(vec: np.ndarray) -> np.ndarray:
        rows = vec.reshape(d_x * d_y, d_z)
        return (w_xy @ (w_xy.T @ rows)).reshape(-1)

    def apply_right(vec: np.ndarray) -> np.ndarray:
        rows = vec.reshape(d_x, d_y * d_z)
        return ((rows @ w_yz) @ w_yz.T).reshape(-1)

    def matvec(vec: np.ndarray) -> np.ndarray:
        return apply_right(apply_left(vec)) - w_top @ (w_top.T @ vec)

    def rmatvec(vec: np.ndarray) -> np.ndarray:
        return apply_left(apply_right(vec)) - w_top @ (w_top.T @ vec)

    delta = LinearOperator((dim, dim), matvec=matvec, rmatvec=rmatvec, dtype=complex)
    defect = operator_norm(delta)

    cross = 0.0
    shared = set(fusion_labels(x, y + z)) & set(fusion_labels(x + y, z))
    for mu in sorted(shared - {top}):
        u3 = cb.cg_component(x, y + z, mu).reshape(d_x, cb.dim(y + z), cb.dim(mu))
        a = np.tensordot(u3, w_yz, axes=([1], [1])).transpose(0, 2, 1).reshape(dim, cb.dim(mu))
        v3 = cb.cg_component(x + y, z, mu).reshape(cb.dim(x + y), d_z, cb.dim(mu))
        b = np.tensordot(w_xy, v3, axes=([1], [0])).reshape(dim, cb.dim(mu))
        cross = max(cross, operator_norm(a.T @ b))
    return defect, cross


def projection_defect_sweep(
    params: QParams,
    x: int,
    z: int,
    y_values: Sequence[int],
    backend: CoupledBackend | None = None,
) -> DecayReport:
    """Projection-product defect over growing middle labels.

    Asserts cross <= defect pointwise and fits the decay of the defect
    in y, which must match log q within the accepted band.
    """
    cb = backend if backend is not None else coupled_backend_for(params)
    grid: list[tuple[tuple[int, ...], complex]] = []
    for y in y_values:
        defect, cross = projection_product_defect(params, x, y, z, backend=cb)
        if cross > defect + 1e-10:
            raise InvariantError(
                f"isotypic cross norm {cross:.6e} exceeds the defect {defect:.6e} at y={y}"
            )
        grid.append(((y,), defect))
    rate, residuals = fit_decay([point[0] for point, _ in grid], [v for _, v in grid])
    constant = max(abs(v) * params.q ** (-point[0]) for point, v in grid)
    report = DecayReport(
        grid=tuple(grid),
        fitted_rate=rate,
        empirical_constant=float(constant),
        residuals=residuals,
    )
    log_q = np.log(params.q)
    if abs(rate - log_q) > _RATE_BAND * abs(log_q):
        raise InvariantError(
            f"projection defect decays at rate {rate:.4f}, "
            f"outside the {_RATE_BAND:.0%} band around {log_q:.4f}",
            report=report,
        )
    return report


def trace_rotation_sweep(
    params: QParams,
    k_max: int,
    trials: int,
    backend: CoupledBackend | None = None,
    seed: int = 2026,
    b_max: int = 6,
) -> TraceRotationReport:
    """Rotation trace identity plus the bounded-trace corollary.

    For every label up to ``k_max`` and ``trials`` random operators the
    rotated trace must equal (-1)^{k-1} Tr(f) / d_{k-1} and the
    Hilbert-Schmidt norm must not grow.  The corollary sweep pairs the
    traced top projector with a trace-zero operator on the outer legs
    and reports |d_b Tr(x f)| over the middle label, which stays bounded
    and shows no growth trend.
    """
    cb = backend if backend is not None else coupled_backend_for(params)
    if k_max < 1 or trials < 1:
        raise ValueError("needs k_max >= 1 and trials >= 1")
    rng = np.random.default_rng(seed)

    rotation_grid: list[tuple[int, float, float]] = []
    identity_grid: list[tuple[int, float, float]] = []
    for k in range(1, k_max + 1):
        d_k = cb.dim(k)
        d_prev = quantum_dim(params, k - 1)
        sign = -1.0 if k % 2 == 0 else 1.0
        worst_trace = 0.0
        worst_excess = 0.0
        for _ in range(trials):
            f = rng.standard_normal((d_k, d_k)) + 1j * rng.standard_normal((d_k, d_k))
            f /= np.linalg.norm(f)
            rotated = rotate(params, k, f, backend=cb)
            expected = sign * np.trace(f) / d_prev
            worst_trace = max(worst_trace, abs(complex(np.trace(rotated)) - expected))
            worst_excess = max(
                worst_excess, float(np.linalg.norm(rotated) - np.linalg.norm(f))
            )
        if worst_trace > 1e-9:
            raise InvariantError(f"rotation trace identity fails at k={k}: {worst_trace:.2e}")
        if worst_excess > 1e-10:
            raise InvariantError(f"rotation expands the HS norm at k={k}: {worst_excess:.2e}")
        rotation_grid.append((k, worst_trace, worst_excess))

        identity_value = float(np.trace(rotate(params, k, np.eye(d_k), backend=cb)).real)
        identity_expected = sign * cb.dim(k) / d_prev
        if abs(identity_value - identity_expected) > 1e-9 * max(1.0, abs(identity_expected)):
            raise InvariantError(f"rotated identity trace is off at k={k}")
        identity_grid.append((k, identity_value, identity_expected))

    # Corollary: pair the traced projector with a trace-zero operator on
    # the outer legs; the unnormalized pairing stays bounded in b.
    a = c = 1
    dim_ac = cb.dim(a) * cb.dim(c)
    f = rng.standard_normal((dim_ac, dim_ac)) + 1j * rng.standard_normal((dim_ac, dim_ac))
    f = 0.5 * (f + f.conj().T)
    f -= np.trace(f) / dim_ac * np.eye(dim_ac)
    f /= np.linalg.norm(f)
    corollary_grid: list[tuple[int, float]] = []
    for b in range(1, b_max + 1):
        x = partial_trace_x(params, a, b, c, backend=cb)
        value = abs(quantum_dim(params, b) * complex(np.trace(x @ f)))
        corollary_grid.append((b, float(value)))
    sup = max(value for _, value in corollary_grid)
    spearman = float(
        scipy.stats.spearmanr(
            [b for b, _ in corollary_grid], [v for _, v in corollary_grid]
        ).statistic
    )
    report = TraceRotationReport(
        rotation_grid=tuple(rotation_grid),
        identity_grid=tuple(identity_grid),
        corollary_grid=tuple(corollary_grid),
        corollary_sup=float(sup),
        spearman=spearman,
    )
    if spearman > 0.0:
        raise InvariantError(
            f"bounded-trace corollary shows a growth trend: spearman {spearman:.3f}",
            report=report,
        )
    return report


def _chebyshev_rows(l_max: int, points: np.ndarray) -> np.ndarray:
    """Rows of dilated Chebyshev values T_l(points) for 0 <= l <= l_max."""
    rows = np.empty((l_max + 1, points.shape[0]))
    rows[0] = 1.0
    if l_max >= 1:
        rows[1] = points
    for l in range(2, l_max + 1):
        rows[l] = points * rows[l - 1] - rows[l - 2]
    return rows


def spectral_density(
    params: QParams,
    n: int,
    k: int,
    vectors: tuple[np.ndarray, np.ndarray, np.ndarray, np.ndarray],
    l_max: int,
    grid: Sequence[tuple[float, float]],
    backend: CoupledBackend | None = None,
    growth_ratio: float = 1.5,
) -> SpectralDensityReport:
    """Bivariate density partial sums for a pair of coefficient elements.

    The coefficient matrix D pairs the sandwiched element
    chi_l u^k chi_l' against u^n; the density partial sums expand it
    against dilated Chebyshev polynomials on [-2, 2]^2.  Sup increments
    over the grid must decay geometrically at rate q * growth_ratio or
    better.  When the two coefficient pairs coincide the matrix is real
    symmetric, the density is real, and its semicircle mass equals
    1 / d_n (checked by quadrature at 1e-4).
    """
    cb = backend if backend is not None else coupled_backend_for(params)
    if l_max < 2:
        raise ValueError("needs l_max >= 2")
    if growth_ratio <= 1.0:
        raise ValueError("growth_ratio must exceed 1")
    xi, eta, xi_p, eta_p = (np.asarray(v, dtype=complex) for v in vectors)
    u_n = fourier.coefficient(params, n, xi, eta)
    u_k = fourier.coefficient(params, k, xi_p, eta_p)

    # The Haar state is tracial, so pairing chi_l u^k chi_l' against u^n
    # equals pairing chi_l u^k against u^n chi_l'.  The latter association
    # never multiplies two characters together, keeping every coupler
    # within the same budgets as the pairing grid itself.
    right = [
        fourier.multiply(params, u_n, fourier.character(params, l_p), backend=cb)
        for l_p in range(l_max + 1)
    ]
    coeffs = np.zeros((l_max + 1, l_max + 1), dtype=complex)
    for l in range(l_max + 1):
        x_l = fourier.multiply(params, fourier.character(params, l), u_k, backend=cb)
        for l_p in range(l_max + 1):
            coeffs[l, l_p] = fourier.inner_product(params, x_l, right[l_p])

    points = np.asarray(grid, dtype=float)
    if points.ndim != 2 or points.shape[1] != 2:
        raise ValueError("grid must be a sequence of (s, t) pairs")
    if np.abs(points).max() > 2.0 + 1e-12:
        raise ValueError("grid points must lie in [-2, 2]^2")
    rows_s = _chebyshev_rows(l_max, points[:, 0])
    rows_t = _chebyshev_rows(l_max, points[:, 1])

    sums = []
    for size in range(l_max + 1):
        block = coeffs[: size + 1, : size + 1]
        weighted = block @ rows_t[: size + 1]
        sums.append((rows_s[: size + 1] * weighted).sum(axis=0))
    increments = tuple(
        float(np.abs(sums[size] - sums[size - 1]).max()) for size in range(1, l_max + 1)
    )
    rate, _ = fit_decay(range(1, l_max + 1), increments)
    bound = np.log(params.q * growth_ratio)

    coinciding = n == k and np.allclose(xi, xi_p) and np.allclose(eta, eta_p)
    mass = mass_expected = None
    if coinciding:
        asym = float(np.abs(coeffs - coeffs.T).max() + np.abs(coeffs.imag).max())
        if asym > 1e-10:
            raise InvariantError(f"coinciding pairs need a real symmetric matrix: {asym:.2e}")
        if float(np.abs(sums[-1].imag).max()) > 1e-10:
            raise InvariantError("density must be real for coinciding pairs")
        real_coeffs = coeffs.real

        def density(t: float, s: float) -> float:
            row_s = _chebyshev_rows(l_max, np.array([s]))[:, 0]
            row_t = _chebyshev_rows(l_max, np.array([t]))[:, 0]
            weight = np.sqrt(max(4.0 - s * s, 0.0)) * np.sqrt(max(4.0 - t * t, 0.0))
            return float(row_s @ real_coeffs @ row_t) * weight / (4.0 * np.pi**2)

        mass, _ = scipy.integrate.dblquad(
            density, -2.0, 2.0, -2.0, 2.0, epsabs=1e-6, epsrel=1e-6
        )
        mass = float(mass)
        mass_expected = 1.0 / quantum_dim(params, n)

    report = SpectralDensityReport(
        coefficients=tuple(tuple(row) for row in coeffs),
        points=tuple((float(s), float(t)) for s, t in points),
        values=tuple(complex(v) for v in sums[-1]),
        increment_sups=increments,
        fitted_rate=rate,
        mass=mass,
        mass_expected=mass_expected,
    )
    if rate > bound + 1e-9:
        raise InvariantError(
            f"density increments decay at rate {rate:.4f}, slower than {bound:.4f}",
            report=report,
        )
    if mass is not None and abs(mass - mass_expected) > 1e-4:
        raise InvariantError(
            f"density mass {mass:.8f} misses 1/d_n = {mass_expected:.8f}",
            report=report,
        )
    return report
