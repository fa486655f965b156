"""Exact Haar-state oracle via noncrossing pair partitions.

Moments of the fundamental matrix entries are computed from first principles:
enumerate noncrossing pairings, build the integer Gram matrix of loop counts,
invert it exactly over the rationals, and contract index deltas against the
inverse. Nothing here depends on the representation backends, which is the
point: every Haar-state quantity computed by the calculus elsewhere in the
package can be cross-checked against this module.

Degree is capped at 16 (eight pairings points on each index row). Tables for
k = 7, 8 are legal but the exact rational inversion takes minutes; everything
the test suite needs stays at k <= 5.
"""

from __future__ import annotations

import string
from dataclasses import dataclass
from fractions import Fraction
from typing import Iterable, Sequence

import numpy as np

from .qcore import QParams
from .types import CapExceededError

__all__ = [
    "NoncrossingPairing",
    "enumerate_pairings",
    "is_noncrossing",
    "loop_count",
    "WeingartenTable",
    "weingarten_table",
    "haar_moment",
    "tensor_word_moment",
]

# A pairing is a tuple of (a, b) pairs with a < b, sorted by first element.
NoncrossingPairing = tuple[tuple[int, int], ...]

MAX_HALF_DEGREE = 8

_PAIRINGS_CACHE: dict[int, list[NoncrossingPairing]] = {}
_TABLE_CACHE: dict[tuple[int, int], "WeingartenTable"] = {}
_CONVENTION_CHECKED: set[int] = set()


def _gen_pairings(points: tuple[int, ...]) -> Iterable[NoncrossingPairing]:
    if not points:
        yield ()
        return
    first = points[0]
    # The partner of the first point must leave an even number of points on
    # each side, otherwise no pairing of the pieces exists.
    for idx in range(1, len(points), 2):
        partner = points[idx]
        inside = points[1:idx]
        outside = points[idx + 1 :]
        for left in _gen_pairings(inside):
            for right in _gen_pairings(outside):
                yield ((first, partner),) + left + right


def enumerate_pairings(k: int) -> list[NoncrossingPairing]:
    """All noncrossing pairings of {0, ..., 2k-1} in lexicographic order."""
    if k < 0:
        raise ValueError(f"k must be >= 0, got {k}")
    if k > MAX_HALF_DEGREE:
        raise CapExceededError(
            f"pairings are capped at k <= {MAX_HALF_DEGREE}, got k = {k}"
        )
    if k not in _PAIRINGS_CACHE:
        raw = _gen_pairings(tuple(range(2 * k)))
        _PAIRINGS_CACHE[k] = sorted(tuple(sorted(p)) for p in raw)
    return list(_PAIRINGS_CACHE[k])


def is_noncrossing(pairing: Sequence[tuple[int, int]]) -> bool:
    """True when no two pairs (a, b), (c, d) interleave as a < c < b < d."""
    for a, b in pairing:
        for c, d in pairing:
            if a < c < b < d:
                return False
    return True


def loop_count(p: NoncrossingPairing, q: NoncrossingPairing) -> int:
    """Number of loops formed when the two pairings are glued point to point.

    Equivalently half the number of cycles of the composed pair involutions;
    implemented as connected components of the union graph.
    """
    if len(p) != len(q):
        raise ValueError("pairings must have the same size")
    n = 2 * len(p)
    parent = list(range(n))

    def find(x: int) -> int:
        while parent[x] != x:
            parent[x] = parent[parent[x]]
            x = parent[x]
        return x

    for a, b in list(p) + list(q):
        ra, rb = find(a), find(b)
        if ra != rb:
            parent[ra] = rb
    return len({find(x) for x in range(n)})


def _invert_exact(mat: list[list[Fraction]]) -> list[list[Fraction]]:
    """Gaussian elimination over Fraction with partial pivoting."""
    n = len(mat)
    aug = [row[:] + [Fraction(int(i == j)) for j in range(n)] for i, row in enumerate(mat)]
    for col in range(n):
        pivot = next((r for r in range(col, n) if aug[r][col] != 0), None)
        if pivot is None:
            raise ArithmeticError("Gram matrix is singular")
        aug[col], aug[pivot] = aug[pivot], aug[col]
        inv_p = 1 / aug[col][col]
        aug[col] = [x * inv_p for x in aug[col]]
        for r in range(n):
            if r != col and aug[r][col] != 0:
                factor = aug[r][col]
                aug[r] = [x - factor * y for x, y in zip(aug[r], aug[col])]
    return [row[n:] for row in aug]


@dataclass(frozen=True)
class WeingartenTable:
    """Gram matrix and its exact rational inverse for one (N, k)."""

    N: int
    k: int
    pairings: tuple[NoncrossingPairing, ...]
    gram: tuple[tuple[int, ...], ...]
    wg: tuple[tuple[Fraction, ...], ...]

    def wg_float(self) -> np.ndarray:
        return np.array([[float(x) for x in row] for row in self.wg])


def weingarten_table(params: QParams, k: int) -> WeingartenTable:
    """Build (memoized) the exact Weingarten table for moments of degree 2k."""
    key = (params.N, k)
    if key not in _TABLE_CACHE:
        pairings = tuple(enumerate_pairings(k))
        gram = tuple(
            tuple(params.N ** loop_count(p, q) for q in pairings) for p in pairings
        )
        wg = _invert_exact([[Fraction(x) for x in row] for row in gram])
        _TABLE_CACHE[key] = WeingartenTable(
            N=params.N,
            k=k,
            pairings=pairings,
            gram=gram,
            wg=tuple(tuple(row) for row in wg),
        )
        _convention_self_test(params)
    return _TABLE_CACHE[key]


def haar_moment(params: QParams, word: Sequence[tuple[int, int]]) -> float:
    """Haar state applied to a word of fundamental entries.

    ``word`` lists (row, column) index pairs of u, 0-based; the value is
    sum_{p,q} Wg(p, q) delta_p(rows) delta_q(columns), exactly rational,
    returned as float. Odd-length words vanish identically.
    """
    word = list(word)
    for i, j in word:
        if not (0 <= i < params.N and 0 <= j < params.N):
            raise ValueError(f"index pair ({i}, {j}) out of range for N = {params.N}")
    if len(word) % 2 == 1:
        return 0.0
    k = len(word) // 2
    if k == 0:
        return 1.0
    table = weingarten_table(params, k)
    rows = [i for i, _ in word]
    cols = [j for _, j in word]
    ok_rows = [
        idx
        for idx, p in enumerate(table.pairings)
        if all(rows[a] == rows[b] for a, b in p)
    ]
    ok_cols = [
        idx
        for idx, q in enumerate(table.pairings)
        if all(cols[a] == cols[b] for a, b in q)
    ]
    total = Fraction(0)
    for pi in ok_rows:
        row = table.wg[pi]
        for qi in ok_cols:
            total += row[qi]
    return float(total)


def _letter_tensor(vec: np.ndarray, N: int) -> np.ndarray:
    vec = np.asarray(vec)
    size = vec.size
    n = 0
    s = 1
    while s < size:
        s *= N
        n += 1
    if s != size or n == 0:
        raise ValueError(f"letter vector size {size} is not a positive power of N = {N}")
    return vec.reshape((N,) * n)


def tensor_word_moment(
    params: QParams, letters: Sequence[tuple[np.ndarray, np.ndarray]]
) -> complex:
    """Haar moment of a product of subrepresentation coefficients.

    Each letter is a pair of ambient vectors (x, y) with x, y in (C^N)^{tensor n},
    standing for the coefficient sum_{I,J} x_J conj(y_I) u_{I_1 J_1} ... u_{I_n J_n}.
    Row deltas summed against the conj(y) tensors and column deltas against the
    x tensors reduce each pairing to one tensor contraction, evaluated by einsum.
    """
    N = params.N
    xs = [_letter_tensor(x, N) for x, _ in letters]
    ys = [np.conj(_letter_tensor(y, N)) for _, y in letters]
    degrees = [t.ndim for t in xs]
    for t, s in zip(xs, ys):
        if t.shape != s.shape:
            raise ValueError("letter vectors must have matching sizes")
    total_positions = sum(degrees)
    if total_positions % 2 == 1:
        return 0.0
    k = total_positions // 2
    if k == 0:
        return 1.0
    table = weingarten_table(params, k)
    wg = table.wg_float()

    symbols = string.ascii_letters

    def contract(tensors: list[np.ndarray], pairing: NoncrossingPairing) -> complex:
        pos_symbol = {}
        for pid, (a, b) in enumerate(pairing):
            pos_symbol[a] = symbols[pid]
            pos_symbol[b] = symbols[pid]
        subs = []
        pos = 0
        for n in degrees:
            subs.append("".join(pos_symbol[pos + leg] for leg in range(n)))
            pos += n
        expr = ",".join(subs) + "->"
        return complex(np.einsum(expr, *tensors, optimize=True))

    col_vals = np.array([contract(xs, q) for q in table.pairings])
    row_vals = np.array([contract(ys, p) for p in table.pairings])
    return complex(row_vals @ wg @ col_vals)


def _convention_self_test(params: QParams) -> None:
    """Pin the index conventions once per N; dies loudly on any slip.

    Checks the degree-2 orthogonality h(u_ij u_kl) = delta_ik delta_jl / N
    both entrywise and through the coefficient-word contraction with random
    complex vectors, where it must read <xi, xi'> <eta', eta> / N.
    """
    if params.N in _CONVENTION_CHECKED:
        return
    _CONVENTION_CHECKED.add(params.N)
    N = params.N
    for i in range(N):
        for j in range(N):
            for a in range(N):
                for b in range(N):
                    expected = (1.0 / N) if (i == a and j == b) else 0.0
                    got = haar_moment(params, [(i, j), (a, b)])
                    if abs(got - expected) > 1e-13:
                        raise AssertionError(
                            "Weingarten convention self-test failed on "
                            f"h(u_{i}{j} u_{a}{b}): got {got}, expected {expected}"
                        )
    rng = np.random.default_rng(20240517)
    for _ in range(3):
        xi, eta, xip, etap = (
            rng.normal(size=N) + 1j * rng.normal(size=N) for _ in range(4)
        )
        # <u_xi,eta , u_xi',eta'> = h((u_xi',eta')^* u_xi,eta); the adjoint of a
        # coefficient of the (real-entried) fundamental rep conjugates both vectors.
        got = tensor_word_moment(params, [(np.conj(xip), np.conj(etap)), (xi, eta)])
        expected = np.vdot(xip, xi) * np.vdot(eta, etap) / N
        if abs(got - expected) > 1e-10:
            raise AssertionError(
                "Weingarten coefficient-convention self-test failed: "
                f"got {got}, expected {expected}"
            )
