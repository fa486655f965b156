"""Derived intertwiner operations: coupling scalars, rotation, partial traces.

Everything here runs in irreducible coordinates through a shared
:class:`~onplus.coupled_backend.CoupledBackend` per parameter set, so the
operations stay polynomial in the quantum dimensions.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .coupled_backend import CoupledBackend
from .qcore import QParams, fusion_labels
from .types import CapExceededError

__all__ = [
    "KappaResult",
    "coupled_backend_for",
    "kappa",
    "partial_trace_x",
    "rotate",
]

_BACKENDS: dict[int, CoupledBackend] = {}

# Budgets for the coupling-scalar strategies: a dense Gram computation of
# the middle-pair operator, or probe vectors when that operator is too big.
_DENSE_PAIR_CAP = 25_000_000
_PROBE_ENTRY_CAP = 140_000_000
_OPERATOR_FLOP_CAP = 2_000_000_000


def coupled_backend_for(params: QParams) -> CoupledBackend:
    """Shared per-parameter backend so caches survive across calls."""
    if params.N not in _BACKENDS:
        _BACKENDS[params.N] = CoupledBackend(params)
    return _BACKENDS[params.N]


@dataclass(frozen=True)
class KappaResult:
    """Normalization scalar of a pair-contracted coupler.

    ``scalar`` is the Schur constant c with V*V = c id, ``kappa`` is
    c**-0.5, ``residual`` measures how far V*V is from scalar, and
    ``operator`` is the un-normalized V when it is cheap enough to
    materialize (None otherwise).
    """

    kappa: float
    scalar: float
    residual: float
    operator: np.ndarray | None


def kappa(params: QParams, l: int, k: int, m: int, backend: CoupledBackend | None = None) -> KappaResult:
    """Scalar normalizing the pair-insertion map H_m -> H_l (x) H_k.

    The map inserts the invariant pair vector of a strands between the two
    reduced factors and projects; its Gram matrix is scalar by
    irreducibility, and the returned value is the inverse square root of
    that scalar.
    """
    cb = backend if backend is not None else coupled_backend_for(params)
    if m not in fusion_labels(l, k):
        raise ValueError(f"label {m} does not occur in the product ({l}, {k})")
    a = (l + k - m) // 2
    if a == 0:
        # No pair inserted: the map is the coupler itself, an exact isometry.
        op = None
        try:
            op = cb.cg_component(l, k, m)
        except CapExceededError:
            pass
        return KappaResult(kappa=1.0, scalar=1.0, residual=0.0, operator=op)

    dred = cb.dim(l - a) * cb.dim(k - a)
    if dred * dred <= _DENSE_PAIR_CAP:
        return _kappa_dense(cb, l, k, m, a)
    return _kappa_probe(cb, l, k, m, a)


def _kappa_dense(cb: CoupledBackend, l: int, k: int, m: int, a: int) -> KappaResult:
    dla, dka, da = cb.dim(l - a), cb.dim(k - a), cb.dim(a)
    A = cb.cg_component(l - a, a, l)
    B = cb.cg_component(a, k - a, k)
    W = cb.cg_component(l - a, k - a, m)
    ta = cb.t_matrix(a)

    # Gram of the inserted-pair map on the reduced pair space, built from
    # the two range projectors and two copies of the pair matrix.
    pa = (A @ A.T).reshape(dla, da, dla, da)
    pb = (B @ B.T).reshape(da, dka, da, dka)
    qa = np.tensordot(pa, ta, axes=([3], [0]))  # (p', s', p, t)
    qa = np.tensordot(ta, qa, axes=([0], [1]))  # (t', p', p, t)
    z = np.tensordot(qa, pb, axes=([0, 3], [0, 2]))  # (p', p, r', r)
    z = np.ascontiguousarray(z.transpose(0, 2, 1, 3)).reshape(dla * dka, dla * dka)

    gram = W.T @ (z @ W)
    dm = cb.dim(m)
    c = float(np.trace(gram)) / dm
    if c <= 0.0:
        raise ArithmeticError(f"pair-insertion Gram for ({l}, {k}) -> {m} is not positive")
    residual = float(np.abs(gram - c * np.eye(dm)).max()) / c

    op = None
    if cb.dim(l) * cb.dim(k) * dm * dla * dka <= _OPERATOR_FLOP_CAP:
        at = np.tensordot(A.reshape(dla, da, cb.dim(l)), ta, axes=([1], [0]))  # (u, al, t)
        mid = np.tensordot(at, B.reshape(da, dka, cb.dim(k)), axes=([2], [0]))  # (u, al, v, be)
        op = np.tensordot(
            mid, W.reshape(dla, dka, dm), axes=([0, 2], [0, 1])
        ).reshape(cb.dim(l) * cb.dim(k), dm)
    return KappaResult(kappa=1.0 / np.sqrt(c), scalar=c, residual=residual, operator=op)


def _kappa_probe(cb: CoupledBackend, l: int, k: int, m: int, a: int) -> KappaResult:
    dla, dka, da = cb.dim(l - a), cb.dim(k - a), cb.dim(a)
    dl, dk = cb.dim(l), cb.dim(k)
    dred = dla * dka
    lower = fusion_labels(l - a, k - a)[:-1]
    total = sum(dred * cb.dim(mp) for mp in lower)
    if total > _PROBE_ENTRY_CAP:
        raise CapExceededError(f"probe strategy for ({l}, {k}) -> {m} exceeds the entry budget")
    # The target is the top label of the reduced pair, so its range
    # projector is the identity minus the lower couplers.
    walls = [cb.cg_component(l - a, k - a, mp) for mp in lower]

    A3 = cb.cg_component(l - a, a, l).reshape(dla, da, dl)
    B3 = cb.cg_component(a, k - a, k).reshape(da, dka, dk)
    at = np.tensordot(A3, cb.t_matrix(a), axes=([1], [0]))  # (u, al, t)

    def big_from_reduced(z: np.ndarray) -> np.ndarray:
        t1 = np.tensordot(at, z.reshape(dla, dka), axes=([0], [0]))  # (al, t, v)
        return np.tensordot(t1, B3, axes=([1, 2], [0, 1])).ravel()

    def reduced_from_big(w: np.ndarray) -> np.ndarray:
        t1 = np.tensordot(at, w.reshape(dl, dk), axes=([1], [0]))  # (u, t, be)
        return np.tensordot(t1, B3, axes=([1, 2], [0, 2])).ravel()

    def apply_vvstar(x: np.ndarray) -> np.ndarray:
        z = reduced_from_big(x)
        for wall in walls:
            z = z - wall @ (wall.T @ z)
        return big_from_reduced(z)

    rng = np.random.default_rng(402_113 + 7919 * l + 101 * k + m)
    y = apply_vvstar(rng.standard_normal(dl * dk))
    c = float(np.dot(y, apply_vvstar(y)) / np.dot(y, y))
    if c <= 0.0:
        raise ArithmeticError(f"pair-insertion Gram for ({l}, {k}) -> {m} is not positive")

    residual = 0.0
    for _ in range(30):
        y = apply_vvstar(rng.standard_normal(dl * dk))
        dev = np.linalg.norm(apply_vvstar(y) - c * y) / (c * np.linalg.norm(y))
        residual = max(residual, float(dev))
    return KappaResult(kappa=1.0 / np.sqrt(c), scalar=c, residual=residual, operator=None)


def rotate(
    params: QParams, k: int, f: np.ndarray, backend: CoupledBackend | None = None
) -> np.ndarray:
    """Rotation of an operator on H_k by one strand.

    Caps the input with a pair vector on the left, acts with f on the
    shifted window of k strands, and contracts a pair on the right.  For
    k = 1 this is plain transposition.
    """
    cb = backend if backend is not None else coupled_backend_for(params)
    if k < 1:
        raise ValueError(f"rotation needs a label >= 1, got {k}")
    dk = cb.dim(k)
    f = np.asarray(f)
    if f.shape != (dk, dk):
        raise ValueError(f"expected an operator of shape ({dk}, {dk}), got {f.shape}")
    if k == 1:
        return f.T.copy()

    N = params.N
    dkm1, dkm2 = cb.dim(k - 1), cb.dim(k - 2)
    split = cb.left_split(k)
    # Window operator on the one-strand-shifted realization of H_k.
    fext = (split @ f @ split.conj().T).reshape(N, dkm1, N, dkm1)

    ik = cb.step_isometry(k).reshape(dkm1, N, dk)
    ikm1 = cb.step_isometry(k - 1).reshape(dkm2, N, dkm1)
    # psi regroups H_k as first strand, second strand, remainder.
    km1 = cb.left_split(k - 1).reshape(N, dkm2, dkm1)
    psi = np.tensordot(km1, split.reshape(N, dkm1, dk), axes=([2], [1]))
    psi = psi.transpose(2, 0, 1, 3).reshape(N * N * dkm2, dk)

    # t1[i, b', a, j, mu]: window applied with the cap strand in slot a and
    # the input's last strand j kept outside the window.
    t1 = np.tensordot(fext, ik, axes=([3], [0]))
    # Contract the window output's last strand against j (the pair cap on
    # the right), leaving t2[i, a, mu, c].
    t2 = np.tensordot(t1, ikm1, axes=([1, 3], [2, 1]))
    t2 = np.ascontiguousarray(t2.transpose(1, 0, 3, 2)).reshape(N * N * dkm2, dk)
    return psi.T @ t2


def partial_trace_x(
    params: QParams, a: int, b: int, c: int, backend: CoupledBackend | None = None
) -> np.ndarray:
    """Middle partial trace of the top projector on a (x) b (x) c strands.

    Realizes the top projection inside H_a (x) H_b (x) H_c through two
    nested couplers and traces out the middle factor with the normalized
    trace, returning an operator on H_a (x) H_c.
    """
    cb = backend if backend is not None else coupled_backend_for(params)
    if min(a, b, c) < 0:
        raise ValueError(f"strand counts must be >= 0, got ({a}, {b}, {c})")
    da, db, dc = cb.dim(a), cb.dim(b), cb.dim(c)
    n = a + b + c
    if b == 0:
        w = cb.cg_component(a, c, n)
        return w @ w.T
    u3 = cb.cg_component(a, b, a + b).reshape(da, db, cb.dim(a + b))
    v3 = cb.cg_component(a + b, c, n).reshape(cb.dim(a + b), dc, cb.dim(n))
    w4 = np.tensordot(u3, v3, axes=([2], [0]))  # (al, be, ga, m)
    x4 = np.tensordot(w4, w4, axes=([1, 3], [1, 3])) / db  # (al, ga, al', ga')
    return x4.reshape(da * dc, da * dc)
