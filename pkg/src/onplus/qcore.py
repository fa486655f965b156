"""Scalar layer: deformation parameter, quantum dimensions, dilated Chebyshev
polynomials and semicircle integrals.

Everything downstream (fusion isometries, Haar-state formulas, decay fits)
consumes these scalars, so this module is deliberately dependency-free apart
from numpy/scipy and is tested against closed forms and exact integer
sequences.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Callable

import numpy as np
from scipy.integrate import quad

from .types import ConfigError

__all__ = [
    "QParams",
    "make_params",
    "quantum_dim",
    "chebyshev_T",
    "semicircle_moment",
    "catalan",
    "fusion_labels",
]


@dataclass(frozen=True)
class QParams:
    """Parameters of the model: matrix size N and deformation parameter q.

    q is the root in (0, 1) of q + 1/q = N.
    """

    N: int
    q: float


def make_params(N: int) -> QParams:
    """Build QParams for integer N >= 3.

    Uses the subtraction-free root q = 2 / (N + sqrt(N^2 - 4)) so no
    cancellation occurs for large N.
    """
    if not isinstance(N, (int, np.integer)) or isinstance(N, bool):
        raise ConfigError(f"N must be an integer, got {N!r}")
    if N < 3:
        raise ConfigError(f"N must be >= 3, got {N}")
    q = 2.0 / (N + math.sqrt(N * N - 4.0))
    return QParams(N=int(N), q=q)


def quantum_dim(params: QParams, n: int) -> float:
    """Dimension of the irreducible with label n.

    Satisfies d_0 = 1, d_1 = N, d_{n+1} = N d_n - d_{n-1}; evaluated through
    the closed form (q^{-(n+1)} - q^{n+1}) / (q^{-1} - q). n = -1 returns 0,
    which is the seed the recursion needs.
    """
    if n < -1:
        raise ValueError(f"label must be >= -1, got {n}")
    if n == -1:
        return 0.0
    q = params.q
    return (q ** -(n + 1) - q ** (n + 1)) / (1.0 / q - q)


def chebyshev_T(n: int, x):
    """Dilated Chebyshev polynomial of the second kind.

    T_0 = 1, T_1 = x, T_{n+1} = x T_n - T_{n-1}; equivalently
    T_n(2 cos t) = sin((n+1) t) / sin(t). Accepts scalars or arrays.
    """
    if n < 0:
        raise ValueError(f"degree must be >= 0, got {n}")
    x = np.asarray(x, dtype=float)
    prev = np.ones_like(x)
    if n == 0:
        return prev if prev.ndim else float(prev)
    cur = x.copy()
    for _ in range(n - 1):
        prev, cur = cur, x * cur - prev
    return cur if cur.ndim else float(cur)


def semicircle_moment(g: Callable[[float], float]) -> float:
    """Integral of g against the standard semicircle law on [-2, 2].

    The weight is sqrt(4 - s^2) / (2 pi); quadrature is adaptive with
    absolute tolerance 1e-10.
    """
    value, _ = quad(
        lambda s: g(s) * math.sqrt(max(4.0 - s * s, 0.0)) / (2.0 * math.pi),
        -2.0,
        2.0,
        epsabs=1e-10,
        epsrel=1e-12,
        limit=400,
    )
    return value


def catalan(m: int) -> int:
    """m-th Catalan number binom(2m, m) / (m + 1), exactly."""
    if m < 0:
        raise ValueError(f"index must be >= 0, got {m}")
    return math.comb(2 * m, m) // (m + 1)


def fusion_labels(l: int, k: int) -> list[int]:
    """Labels of the irreducible summands of the product of labels l and k.

    The decomposition is multiplicity free; the summands run from |l - k|
    up to l + k in steps of two.
    """
    if l < 0 or k < 0:
        raise ValueError(f"labels must be >= 0, got ({l}, {k})")
    return list(range(abs(l - k), l + k + 1, 2))
