"""Finite Fourier data over the coefficient algebra of the quantum group.

An element is stored as a finite map ``n -> a_n`` with ``a_n`` a complex
d_n x d_n matrix, standing for ``sum_n sum_ij (a_n)_ij u^n_ij``.  Products
follow the fusion rules through the coupling isometries, and the Haar
state reads off the label-0 block, which makes every moment a finite
linear-algebra computation.
"""

from __future__ import annotations

from dataclasses import dataclass
from types import MappingProxyType
from typing import Mapping

import numpy as np

from .coupled_backend import CoupledBackend
from .intertwiners import coupled_backend_for
from .qcore import QParams, fusion_labels, quantum_dim
from .types import CapExceededError

__all__ = [
    "FourierElement",
    "adjoint",
    "character",
    "coefficient",
    "expectation_E",
    "haar_state",
    "inner_product",
    "multiply",
    "zero",
]

# Blocks within this relative distance of a scalar matrix take the exact
# scalar shortcut in multiply; far below every advertised tolerance.
_SCALAR_TOL = 1e-12


@dataclass(frozen=True)
class FourierElement:
    """Immutable finite family of Fourier blocks, one per irreducible label.

    ``params`` identifies the algebra, ``blocks`` maps a label n to the
    complex matrix a_n.  Zero blocks are pruned on construction and the
    stored arrays are read-only.
    """

    params: QParams
    blocks: Mapping[int, np.ndarray]

    def labels(self) -> list[int]:
        return sorted(self.blocks)

    def block(self, n: int) -> np.ndarray | None:
        return self.blocks.get(n)

    def degree(self) -> int:
        return max(self.blocks, default=0)

    def __add__(self, other: FourierElement) -> FourierElement:
        _check_same_algebra(self, other)
        merged: dict[int, np.ndarray] = {n: a.copy() for n, a in self.blocks.items()}
        for n, b in other.blocks.items():
            merged[n] = merged[n] + b if n in merged else b
        return _element(self.params, merged)

    def __sub__(self, other: FourierElement) -> FourierElement:
        return self + (-1.0) * other

    def __mul__(self, scalar: complex) -> FourierElement:
        return _element(self.params, {n: scalar * a for n, a in self.blocks.items()})

    __rmul__ = __mul__

    def __neg__(self) -> FourierElement:
        return (-1.0) * self


def _check_same_algebra(x: FourierElement, y: FourierElement) -> None:
    if x.params.N != y.params.N:
        raise ValueError(f"mixed algebras: N = {x.params.N} and N = {y.params.N}")


def _element(params: QParams, blocks: dict[int, np.ndarray]) -> FourierElement:
    clean: dict[int, np.ndarray] = {}
    for n, a in blocks.items():
        mat = np.array(a, dtype=complex)
        if mat.size == 0 or not np.abs(mat).max() > 0.0:
            continue
        mat.setflags(write=False)
        clean[int(n)] = mat
    return FourierElement(params=params, blocks=MappingProxyType(clean))


def _block_dim(params: QParams, n: int) -> int:
    return int(round(quantum_dim(params, n)))


def zero(params: QParams) -> FourierElement:
    return _element(params, {})


def coefficient(params: QParams, n: int, xi: np.ndarray, eta: np.ndarray) -> FourierElement:
    """Single coefficient u^n with coordinate vectors xi and eta on H_n."""
    d = _block_dim(params, n)
    xi = np.asarray(xi, dtype=complex).reshape(-1)
    eta = np.asarray(eta, dtype=complex).reshape(-1)
    if xi.shape != (d,) or eta.shape != (d,):
        raise ValueError(f"label {n} needs vectors of length {d}, got {xi.shape} and {eta.shape}")
    return _element(params, {n: np.outer(np.conj(eta), xi)})


def character(params: QParams, n: int) -> FourierElement:
    """Character of the label-n irreducible: the identity block."""
    if n < 0:
        raise ValueError(f"label must be >= 0, got {n}")
    return _element(params, {n: np.eye(_block_dim(params, n))})


def _scalar_part(mat: np.ndarray) -> complex | None:
    """The scalar s when mat is s * identity up to a tiny tolerance."""
    d = mat.shape[0]
    s = complex(np.trace(mat)) / d
    scale = max(abs(s), float(np.abs(mat).max()))
    if scale == 0.0:
        return 0.0
    if np.abs(mat - s * np.eye(d)).max() <= _SCALAR_TOL * scale:
        return s
    return None


def _factors(mat: np.ndarray) -> list[tuple[float, np.ndarray, np.ndarray]]:
    """Numerical-rank factorization mat = sum_r s_r outer(c_r, d_r)."""
    u, s, vh = np.linalg.svd(mat)
    if s.size == 0 or s[0] == 0.0:
        return []
    keep = s > s[0] * max(mat.shape) * np.finfo(float).eps * 8
    return [(float(s[r]), u[:, r], vh[r, :]) for r in np.nonzero(keep)[0]]


def _transport(V3: np.ndarray, a: np.ndarray, b: np.ndarray,
               sa: complex | None, sb: complex | None) -> np.ndarray:
    """Block of the product: contraction of a (x) b with two couplers.

    Computes sum over tensor indices of V3[i,i',mu] a[i,j] b[i',j']
    V3[j,j',nu] by factoring one side into rank-one terms, so the cost
    stays linear in the larger block dimension times d_m squared.
    """
    dl, dk, dm = V3.shape
    out = np.zeros((dm, dm), dtype=complex)
    if sa is not None:
        for s, c, d in _factors(b):
            x = np.tensordot(c, V3, axes=([0], [1]))
            y = np.tensordot(d, V3, axes=([0], [1]))
            out += (sa * s) * (x.T @ y)
        return out
    if sb is not None:
        for s, c, d in _factors(a):
            x = np.tensordot(c, V3, axes=([0], [0]))
            y = np.tensordot(d, V3, axes=([0], [0]))
            out += (sb * s) * (x.T @ y)
        return out
    if dk <= dl:
        for s, c, d in _factors(b):
            x = np.tensordot(c, V3, axes=([0], [1]))
            y = np.tensordot(d, V3, axes=([0], [1]))
            out += s * (x.T @ (a @ y))
        return out
    for s, c, d in _factors(a):
        x = np.tensordot(c, V3, axes=([0], [0]))
        y = np.tensordot(d, V3, axes=([0], [0]))
        out += s * (x.T @ (b @ y))
    return out


def multiply(params: QParams, x: FourierElement, y: FourierElement,
             backend: CoupledBackend | None = None) -> FourierElement:
    """Product in the coefficient algebra via the fusion rules."""
    _check_same_algebra(x, y)
    cb = backend if backend is not None else coupled_backend_for(params)
    out: dict[int, np.ndarray] = {}
    for l, a in x.blocks.items():
        if a.shape != (cb.dim(l), cb.dim(l)):
            raise ValueError(f"block {l} has shape {a.shape}, expected square of size {cb.dim(l)}")
        sa = _scalar_part(a)
        for k, b in y.blocks.items():
            if b.shape != (cb.dim(k), cb.dim(k)):
                raise ValueError(f"block {k} has shape {b.shape}, expected square of size {cb.dim(k)}")
            sb = _scalar_part(b)
            for m in fusion_labels(l, k):
                dm = cb.dim(m)
                if sa is not None and sb is not None:
                    # Scalar blocks transport to the exact scalar: the
                    # couplers are isometries, so no contraction is needed.
                    if dm > cb.dim_cap:
                        raise CapExceededError(
                            f"product block {m} has dimension {dm} > cap {cb.dim_cap}"
                        )
                    term = (sa * sb) * np.eye(dm)
                else:
                    V3 = cb.cg_component(l, k, m).reshape(cb.dim(l), cb.dim(k), dm)
                    term = _transport(V3, a, b, sa, sb)
                out[m] = out[m] + term if m in out else term
    return _element(params, out)


def adjoint(x: FourierElement) -> FourierElement:
    """Star of the element: conjugated blocks transported by the pair matrices."""
    cb = coupled_backend_for(x.params)
    blocks = {}
    for n, a in x.blocks.items():
        C = cb.t_matrix(n)
        blocks[n] = C @ np.conj(a) @ C
    return _element(x.params, blocks)


def inner_product(params: QParams, x: FourierElement, y: FourierElement) -> complex:
    """Haar pairing <x, y> = sum_n Tr(a_n b_n*) / d_n, linear in x."""
    _check_same_algebra(x, y)
    total = 0.0 + 0.0j
    for n, a in x.blocks.items():
        b = y.blocks.get(n)
        if b is None:
            continue
        total += np.vdot(b, a) / quantum_dim(params, n)
    return complex(total)


def expectation_E(params: QParams, x: FourierElement) -> FourierElement:
    """Conditional expectation onto the span of characters, blockwise."""
    blocks = {}
    for n, a in x.blocks.items():
        d = a.shape[0]
        blocks[n] = (np.trace(a) / d) * np.eye(d)
    return _element(params, blocks)


def haar_state(x: FourierElement) -> complex:
    """Value of the Haar state: the label-0 block entry."""
    a0 = x.blocks.get(0)
    if a0 is None:
        return 0.0 + 0.0j
    return complex(a0[0, 0])
