"""Ambient tensor-power backend.

Realizes the label-n irreducible space as the range of its projector inside
(C^N)^{tensor n}. The projector is applied matrix-free through the reduced
recursion

    P_n = Q - (d_{n-2}/d_{n-1}) Q (id^{n-2} tensor t t*) Q,   Q = P_{n-1} tensor id,

with P_{n-1} realized through a cached orthonormal basis of its range, so the
reachable label is one above the largest basis that fits the size caps.
Exponential in n, which is the point: within its reach this backend knows
nothing about fusion combinatorics and therefore certifies the coupled
backend independently.
"""

from __future__ import annotations

import numpy as np
from scipy.linalg import qr

from .qcore import QParams, quantum_dim
from .types import CapExceededError

__all__ = ["TensorBackend"]

# Ambient-dimension ceilings: QR factorizations and dense projector matrices
# get expensive much sooner than single applications do.
_QR_AMBIENT_CAP = 4096
_DENSE_AMBIENT_CAP = 8192


def _reversal_permutation(N: int, n: int) -> np.ndarray:
    """perm[i] = index whose base-N digits are those of i reversed."""
    idx = np.arange(N**n)
    rev = np.zeros_like(idx)
    rest = idx.copy()
    for _ in range(n):
        rev = rev * N + rest % N
        rest //= N
    return rev


class TensorBackend:
    """Concrete tensor-space realization of the irreducibles, within caps."""

    def __init__(self, params: QParams, dim_cap: int = 59049):
        self.params = params
        self.dim_cap = int(dim_cap)
        self._basis: dict[int, np.ndarray] = {}
        self._dense: dict[int, np.ndarray] = {}

    # -- size management ---------------------------------------------------

    def _ambient(self, n: int) -> int:
        return self.params.N**n

    def max_basis_label(self) -> int:
        n = 0
        cap = min(self.dim_cap, _QR_AMBIENT_CAP)
        while self._ambient(n + 1) <= cap:
            n += 1
        return n

    def max_apply_label(self) -> int:
        n = self.max_basis_label() + 1
        while self._ambient(n) > self.dim_cap:
            n -= 1
        return n

    def _require(self, n: int, ambient_cap: int, what: str) -> None:
        if self._ambient(n) > ambient_cap:
            raise CapExceededError(
                f"{what} needs ambient dimension {self._ambient(n)} "
                f"> cap {ambient_cap} (N = {self.params.N}, n = {n})"
            )

    # -- projector application ----------------------------------------------

    def jw_apply(self, n: int, vec: np.ndarray) -> np.ndarray:
        """Apply the label-n projector to ambient vectors (matrix-free).

        ``vec`` has shape (N^n,) or (N^n, batch).
        """
        if n < 0:
            raise ValueError(f"label must be >= 0, got {n}")
        self._require(n, self.dim_cap, "jw_apply")
        vec = np.asarray(vec)
        single = vec.ndim == 1
        v = vec[:, None] if single else vec
        if v.shape[0] != self._ambient(n):
            raise ValueError(
                f"expected leading dimension {self._ambient(n)}, got {v.shape[0]}"
            )
        if n <= 1:
            out = v.copy()
        else:
            out = self._jw_apply_batch(n, v)
        return out[:, 0] if single else out

    def _proj_prev_batch(self, n: int, v: np.ndarray) -> np.ndarray:
        """Apply P_{n-1} tensor id_1 to a (N^n, m) batch."""
        N = self.params.N
        m = v.shape[1]
        E = self.basis(n - 1)
        w = v.reshape(N ** (n - 1), N * m)
        return (E @ (E.T @ w)).reshape(N**n, m)

    def _jw_apply_batch(self, n: int, v: np.ndarray) -> np.ndarray:
        N = self.params.N
        m = v.shape[1]
        coef = quantum_dim(self.params, n - 2) / quantum_dim(self.params, n - 1)
        qv = self._proj_prev_batch(n, v)
        z = qv.reshape(N ** (n - 2), N, N, m)
        s = np.einsum("ajjc->ac", z)
        z2 = np.zeros_like(z)
        diag = np.arange(N)
        z2[:, diag, diag, :] = s[:, None, :]
        corr = self._proj_prev_batch(n, z2.reshape(N**n, m))
        return qv - coef * corr

    # -- orthonormal range bases ---------------------------------------------

    def basis(self, n: int) -> np.ndarray:
        """Orthonormal basis of the label-n range, shape (N^n, d_n).

        Column-pivoted QR of the dense projector; the rank is checked against
        the quantum dimension rounded to the nearest integer.
        """
        if n < 0:
            raise ValueError(f"label must be >= 0, got {n}")
        if n in self._basis:
            return self._basis[n]
        N = self.params.N
        if n == 0:
            E = np.ones((1, 1))
        elif n == 1:
            E = np.eye(N)
        else:
            self._require(n, min(self.dim_cap, _QR_AMBIENT_CAP), "basis")
            P = self.dense_projector(n)
            d = round(quantum_dim(self.params, n))
            Q, R, _ = qr(P, mode="economic", pivoting=True)
            diag = np.abs(np.diag(R))
            rank = int(np.sum(diag > diag[0] * 1e-9))
            if rank != d:
                raise ArithmeticError(
                    f"projector rank {rank} does not match dimension {d} at n = {n}"
                )
            E = Q[:, :d]
        self._basis[n] = E
        return E

    def dense_projector(self, n: int) -> np.ndarray:
        """Dense label-n projector, built by batched matrix-free application."""
        if n in self._dense:
            return self._dense[n]
        self._require(n, min(self.dim_cap, _DENSE_AMBIENT_CAP), "dense_projector")
        P = self.jw_apply(n, np.eye(self._ambient(n)))
        # Only small matrices are worth keeping around.
        if self._ambient(n) <= _QR_AMBIENT_CAP:
            self._dense[n] = P
        return P

    def trace(self, n: int) -> float:
        """Trace of the label-n projector as actually computed, not assumed."""
        if n == 0:
            return 1.0
        if n == 1:
            return float(self.params.N)
        return float(np.trace(self.dense_projector(n)))

    # -- dense recursion variants (for agreement tests) ----------------------

    def dense_reduced(self, n: int) -> np.ndarray:
        self._require(n, min(self.dim_cap, _DENSE_AMBIENT_CAP), "dense_reduced")
        N = self.params.N
        P = np.eye(N)
        for m in range(2, n + 1):
            Q = np.kron(P, np.eye(N))
            coef = quantum_dim(self.params, m - 2) / quantum_dim(self.params, m - 1)
            P = Q - coef * Q @ self._cap_insert(m, m - 1, Q)
        return P if n >= 1 else np.ones((1, 1))

    def dense_full(self, n: int) -> np.ndarray:
        self._require(n, min(self.dim_cap, _DENSE_AMBIENT_CAP), "dense_full")
        N = self.params.N
        P = np.eye(N)
        for m in range(2, n + 1):
            Q = np.kron(P, np.eye(N))
            acc = Q.copy()
            dprev = quantum_dim(self.params, m - 1)
            for l in range(1, m):
                sign = (-1) ** (m - l)
                coef = sign * quantum_dim(self.params, l - 1) / dprev
                acc += coef * self._cap_insert(m, l, Q)
            P = acc
        return P if n >= 1 else np.ones((1, 1))

    def dense_reflected(self, n: int) -> np.ndarray:
        self._require(n, min(self.dim_cap, _DENSE_AMBIENT_CAP), "dense_reflected")
        N = self.params.N
        P = np.eye(N)
        for m in range(2, n + 1):
            Q = np.kron(np.eye(N), P)
            coef = quantum_dim(self.params, m - 2) / quantum_dim(self.params, m - 1)
            P = Q - coef * Q @ self._mirror_cap_insert(m, Q)
        return P if n >= 1 else np.ones((1, 1))

    def _cap_insert(self, n: int, l: int, mat: np.ndarray) -> np.ndarray:
        """(id^{l-1} tensor t tensor id^{n-l-1} tensor t*) applied to columns of mat.

        Contracts the last two legs of each column and re-inserts the pair
        vector after the first l-1 legs.
        """
        N = self.params.N
        m = mat.shape[1]
        z = mat.reshape(N ** (n - 2), N, N, m)
        s = np.einsum("ajjc->ac", z).reshape(N ** (l - 1), N ** (n - l - 1), m)
        out = np.zeros((N ** (l - 1), N, N, N ** (n - l - 1), m))
        diag = np.arange(N)
        out[:, diag, diag, :, :] = s[:, None, :, :]
        return out.reshape(N**n, m)

    def _mirror_cap_insert(self, n: int, mat: np.ndarray) -> np.ndarray:
        """(t t* tensor id^{n-2}) applied to columns of mat."""
        N = self.params.N
        m = mat.shape[1]
        z = mat.reshape(N, N, N ** (n - 2), m)
        s = np.einsum("jjac->ac", z)
        out = np.zeros_like(z)
        diag = np.arange(N)
        out[diag, diag, :, :] = s[None, :, :]
        return out.reshape(N**n, m)

    # -- invariant pair vector and conjugation --------------------------------

    def t_matrix(self, n: int) -> np.ndarray:
        """Coordinates of the invariant vector of H_n tensor H_n as a d_n x d_n matrix.

        The ambient invariant vector is (P_n tensor P_n) applied to the nested
        rainbow sum_I e_I tensor e_rev(I); since the basis columns already lie
        in the range, the coordinates reduce to E^T Rev E.
        """
        E = self.basis(n)
        perm = _reversal_permutation(self.params.N, n)
        return E.T @ E[perm, :]

    def t_vector(self, n: int) -> np.ndarray:
        return self.t_matrix(n).reshape(-1)

    def conjugate(self, n: int, coords: np.ndarray) -> np.ndarray:
        """Antilinear conjugation on label-n coordinates: C conj(x)."""
        C = self.t_matrix(n)
        return C @ np.conj(np.asarray(coords))
