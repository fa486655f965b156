"""Irreducible-coordinate backend built from fusion step isometries.

The ambient backend stores vectors with N**n entries, which caps the usable
labels near n = 8.  This backend keeps every irreducible space H_n as C**d_n
and realizes the structure maps as small dense matrices produced by a strand
recursion:

* ``step_isometry(n)``   embeds H_n into H_{n-1} (x) H_1,
* ``drop_isometry(n)``   embeds H_{n-1} into H_n (x) H_1,
* ``left_split(n)``      embeds H_n into H_1 (x) H_{n-1},
* ``t_matrix(n)``        coordinates of the invariant pair vector,
* ``cg_component``       the coupler of one irreducible inside H_l (x) H_k.

The two fusion channels of H_{n-1} (x) H_1 form an orthogonal pair (the
second is a QR complement of the first), larger couplers are compositions of
such steps, and a Schur scalar renormalizes every level, so no error
accumulates along the recursion.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from scipy.linalg import qr

from .qcore import QParams, fusion_labels, quantum_dim
from .types import CapExceededError

__all__ = ["CGDecomposition", "CoupledBackend", "DEFAULT_DIM_CAP"]

DEFAULT_DIM_CAP = 100_000

# Entry budgets: any single stored matrix, matrices kept in the persistent
# coupler cache, and the total size of a full decomposition.
_MATRIX_ENTRY_CAP = 60_000_000
_PERSIST_ENTRY_CAP = 2_000_000
_DECOMP_ENTRY_CAP = 80_000_000

# Dense Gram checks of coupler scalarity are done up to this flop count;
# beyond it a handful of probe vectors is used instead.
_GRAM_FLOP_CAP = 2_000_000_000


@dataclass(frozen=True)
class CGDecomposition:
    """All irreducible couplers of a product H_left (x) H_right.

    ``components[m]`` is the isometry C**d_m -> C**(d_left * d_right) whose
    range is the label-m summand; the family is mutually orthogonal and
    jointly complete.
    """

    left: int
    right: int
    components: dict[int, np.ndarray]

    def labels(self) -> list[int]:
        return sorted(self.components)

    def component(self, m: int) -> np.ndarray:
        if m not in self.components:
            raise KeyError(f"label {m} not in decomposition of ({self.left}, {self.right})")
        return self.components[m]

    def total_dim(self) -> int:
        return sum(mat.shape[1] for mat in self.components.values())

    def completeness_defect(self, rng: np.random.Generator | None = None) -> float:
        """Max deviation of the summed range projectors from the identity."""
        mats = [self.components[m] for m in self.labels()]
        rows = mats[0].shape[0]
        if rows * rows <= 16_000_000:
            acc = np.zeros((rows, rows))
            for mat in mats:
                acc += mat @ mat.T
            return float(np.abs(acc - np.eye(rows)).max())
        if rng is None:
            rng = np.random.default_rng(11)
        probes = rng.standard_normal((rows, 6))
        acc = np.zeros_like(probes)
        for mat in mats:
            acc += mat @ (mat.T @ probes)
        num = np.linalg.norm(acc - probes, axis=0)
        den = np.linalg.norm(probes, axis=0)
        return float((num / den).max())


class CoupledBackend:
    """Representation-space calculus in irreducible coordinates."""

    def __init__(self, params: QParams, dim_cap: int = DEFAULT_DIM_CAP):
        self.params = params
        self.dim_cap = int(dim_cap)
        self._dims: dict[int, int] = {}
        self._steps: list[np.ndarray] = [np.zeros((0, 0)), np.eye(params.N)]
        self._drops: dict[int, np.ndarray] = {}
        self._lefts: list[np.ndarray] = [np.zeros((0, 0)), np.eye(params.N)]
        self._t: list[np.ndarray] = [np.eye(1), np.eye(params.N)]
        self._cg_cache: dict[tuple[int, int, int], np.ndarray] = {}

    # -- dimensions ------------------------------------------------------

    def dim(self, n: int) -> int:
        """Integer dimension of the label-n irreducible (0 for n = -1)."""
        if n == -1:
            return 0
        if n < -1:
            raise ValueError(f"label must be >= -1, got {n}")
        if n not in self._dims:
            self._dims[n] = int(round(quantum_dim(self.params, n)))
        return self._dims[n]

    def _require(self, ok: bool, msg: str) -> None:
        if not ok:
            raise CapExceededError(msg)

    def _require_label(self, n: int) -> None:
        self._require(
            self.dim(n) <= self.dim_cap,
            f"dimension {self.dim(n)} of label {n} exceeds cap {self.dim_cap}",
        )

    # -- fusion steps with one strand ------------------------------------

    def step_isometry(self, n: int) -> np.ndarray:
        """Isometry C**d_n -> C**d_{n-1} (x) C**N onto the top channel."""
        if n < 1:
            raise ValueError(f"step isometry needs a label >= 1, got {n}")
        self._require_label(n)
        while len(self._steps) <= n:
            self._build_step(len(self._steps))
        return self._steps[n]

    def drop_isometry(self, n: int) -> np.ndarray:
        """Isometry C**d_{n-1} -> C**d_n (x) C**N onto the low channel."""
        if n < 1:
            raise ValueError(f"drop isometry needs a label >= 1, got {n}")
        self._require_label(n)
        if n not in self._drops:
            N = self.params.N
            dn, dprev = self.dim(n), self.dim(n - 1)
            step3 = self.step_isometry(n).reshape(dprev, N, dn)
            # Pairing the extra strand with the pair vector lowers the label;
            # in coordinates this is an index shuffle of the step isometry.
            raw = step3.transpose(2, 1, 0).reshape(dn * N, dprev)
            w = raw * np.sqrt(dprev / dn)
            gram = w.T @ w
            if np.abs(gram - np.eye(dprev)).max() > 1e-10:
                raise ArithmeticError(f"low fusion channel at label {n} is not isometric")
            self._drops[n] = w
        return self._drops[n]

    def _build_step(self, j: int) -> None:
        N = self.params.N
        dj, dprev = self.dim(j), self.dim(j - 1)
        rows = dprev * N
        self._require(rows * dj <= _MATRIX_ENTRY_CAP, f"step isometry at label {j} too large")
        w = self.drop_isometry(j - 1)
        # The top channel is the orthocomplement of the low one, read off a
        # full QR factorization of the low-channel isometry.
        full_q = qr(w, mode="full")[0]
        iota = np.ascontiguousarray(full_q[:, w.shape[1]:])
        if iota.shape[1] != dj:
            raise ArithmeticError(
                f"fusion complement at label {j} has dimension {iota.shape[1]}, expected {dj}"
            )
        self._steps.append(iota)

    def left_split(self, n: int) -> np.ndarray:
        """Isometry C**d_n -> C**N (x) C**d_{n-1} splitting off the first strand."""
        if n < 1:
            raise ValueError(f"left split needs a label >= 1, got {n}")
        self._require_label(n)
        N = self.params.N
        while len(self._lefts) <= n:
            j = len(self._lefts)
            dprev, dj = self.dim(j - 1), self.dim(j)
            prev3 = self._lefts[j - 1].reshape(N, self.dim(j - 2), dprev)
            i3 = self.step_isometry(j).reshape(dprev, N, dj)
            ip = self.step_isometry(j - 1)
            # out[x, b, m] = sum_{u, i, a} prev3[x, u, a] i3[a, i, m] ip[(u, i), b]
            tmp = np.tensordot(prev3, i3, axes=([2], [0]))  # (x, u, i, m)
            tmp = tmp.transpose(0, 3, 1, 2).reshape(N * dj, ip.shape[0])
            out = (tmp @ ip).reshape(N, dj, dprev).transpose(0, 2, 1)
            self._lefts.append(np.ascontiguousarray(out).reshape(N * dprev, dj))
        return self._lefts[n]

    # -- invariant pair vector -------------------------------------------

    def t_matrix(self, n: int) -> np.ndarray:
        """Invariant pair vector of H_n (x) H_n, reshaped to d_n x d_n."""
        if n < 0:
            raise ValueError(f"label must be >= 0, got {n}")
        self._require_label(n)
        N = self.params.N
        while len(self._t) <= n:
            j = len(self._t)
            dprev, dj = self.dim(j - 1), self.dim(j)
            k3 = self.left_split(j).reshape(N, dprev, dj)
            i3 = self.step_isometry(j).reshape(dprev, N, dj)
            # t[m, n] = sum_{i, a, b} k3[i, a, m] t_prev[a, b] i3[b, i, n]
            tmp = np.tensordot(self._t[j - 1], i3, axes=([1], [0]))  # (a, i, n)
            lhs = k3.transpose(2, 0, 1).reshape(dj, N * dprev)
            rhs = tmp.transpose(1, 0, 2).reshape(N * dprev, dj)
            self._t.append(lhs @ rhs)
        return self._t[n]

    def conjugate(self, n: int, coords: np.ndarray) -> np.ndarray:
        """Antilinear conjugation of a label-n vector in these coordinates."""
        coords = np.asarray(coords)
        if coords.shape != (self.dim(n),):
            raise ValueError(f"expected shape ({self.dim(n)},), got {coords.shape}")
        return self.t_matrix(n) @ np.conj(coords)

    # -- general couplers --------------------------------------------------

    def _validate_pair(self, l: int, k: int) -> None:
        if l < 0 or k < 0:
            raise ValueError(f"labels must be >= 0, got ({l}, {k})")
        self._require_label(l)
        self._require_label(k)
        self._require(
            self.dim(l) * self.dim(k) <= self.dim_cap,
            f"product dimension {self.dim(l) * self.dim(k)} exceeds cap {self.dim_cap}",
        )

    def cg_component(self, l: int, k: int, m: int) -> np.ndarray:
        """Isometry C**d_m -> C**(d_l * d_k) onto the label-m summand."""
        self._validate_pair(l, k)
        if m not in fusion_labels(l, k):
            raise ValueError(f"label {m} does not occur in the product ({l}, {k})")
        self._require(
            self.dim(l) * self.dim(k) * self.dim(m) <= _MATRIX_ENTRY_CAP,
            f"coupler ({l}, {k}) -> {m} exceeds the entry budget",
        )
        return self._component(l, k, m, {})

    def decompose_tensor(self, l: int, k: int) -> CGDecomposition:
        """All irreducible couplers of H_l (x) H_k at once."""
        self._validate_pair(l, k)
        prod = self.dim(l) * self.dim(k)
        self._require(prod * prod <= _DECOMP_ENTRY_CAP, f"decomposition of ({l}, {k}) too large")
        scratch: dict[tuple[int, int, int], np.ndarray] = {}
        comps = {m: self._component(l, k, m, scratch) for m in fusion_labels(l, k)}
        return CGDecomposition(left=l, right=k, components=comps)

    def _component(
        self,
        l: int,
        j: int,
        mu: int,
        scratch: dict[tuple[int, int, int], np.ndarray],
    ) -> np.ndarray:
        key = (l, j, mu)
        if key in self._cg_cache:
            return self._cg_cache[key]
        if key in scratch:
            return scratch[key]

        if j == 0 or l == 0:
            out = np.eye(self.dim(max(l, j)))
        elif j == 1:
            out = self.step_isometry(l + 1) if mu == l + 1 else self.drop_isometry(l)
        else:
            out = None
            prev = fusion_labels(l, j - 1)
            for src in (mu - 1, mu + 1):
                if src not in prev:
                    continue
                self._require(
                    self.dim(l) * self.dim(j - 1) * self.dim(src) <= _MATRIX_ENTRY_CAP,
                    f"intermediate coupler ({l}, {j - 1}) -> {src} exceeds the entry budget",
                )
                raw = self._fuse_step(l, j, mu, src, self._component(l, j - 1, src, scratch))
                c, res = self._schur_scalar(raw, self.dim(mu), key)
                if c <= 1e-12:
                    continue
                if res > 1e-6:
                    raise ArithmeticError(
                        f"coupler ({l}, {j}) -> {mu} via {src} lost scalarity ({res:.2e})"
                    )
                out = _fix_sign(raw / np.sqrt(c))
                break
            if out is None:
                raise ArithmeticError(f"all fusion channels for ({l}, {j}) -> {mu} degenerate")

        scratch[key] = out
        if out.size <= _PERSIST_ENTRY_CAP:
            self._cg_cache[key] = out
        return out

    def _fuse_step(self, l: int, j: int, mu: int, src: int, W: np.ndarray) -> np.ndarray:
        N = self.params.N
        dl, dj, dsrc = self.dim(l), self.dim(j), self.dim(src)
        W3 = W.reshape(dl, self.dim(j - 1), dsrc)
        cstep = self.step_isometry(mu) if mu == src + 1 else self.drop_isometry(src)
        i3 = self.step_isometry(j).reshape(self.dim(j - 1), N, dj)
        # raw[(a, k), m] = sum_{b, s, i} W3[a, b, s] i3[b, i, k] cstep[(s, i), m]
        tmp = np.tensordot(W3, i3, axes=([1], [0]))  # (a, s, i, k)
        tmp = np.ascontiguousarray(tmp.transpose(0, 3, 1, 2)).reshape(dl * dj, dsrc * N)
        return tmp @ cstep

    def _schur_scalar(
        self, raw: np.ndarray, dmu: int, key: tuple[int, int, int]
    ) -> tuple[float, float]:
        """Scalar of the Gram matrix of a raw coupler, plus a scalarity residual."""
        rows = raw.shape[0]
        if 2 * dmu * dmu * rows <= _GRAM_FLOP_CAP:
            gram = raw.T @ raw
            c = float(np.trace(gram)) / dmu
            if c <= 0.0:
                return 0.0, 0.0
            res = float(np.abs(gram - c * np.eye(dmu)).max()) / c
            return c, res
        l, j, mu = key
        rng = np.random.default_rng(733_001 + 1009 * (1013 * l + j) + mu)
        probes = rng.standard_normal((dmu, 4))
        image = raw @ probes
        gx = probes.T @ probes
        gy = image.T @ image
        c = float(np.trace(gy) / np.trace(gx))
        if c <= 0.0:
            return 0.0, 0.0
        res = float(np.abs(gy - c * gx).max() / (c * np.abs(gx).max()))
        return c, res

    def conjugate_coupler(self, l: int, k: int, m: int) -> np.ndarray:
        """Coupler of H_k (x) H_l obtained by conjugating the (l, k) one.

        Conjugating both tensor factors and the source swaps the factors, so
        this is a valid coupler for the reversed product whose phase is tied
        to ``cg_component(l, k, m)`` rather than fixed independently.
        """
        V = self.cg_component(l, k, m)
        dl, dk, dm = self.dim(l), self.dim(k), self.dim(m)
        V3 = np.conj(V).reshape(dl, dk, dm)
        # out[(y, x), z] = sum_{a, b, m'} t_l[x, a] t_k[y, b] conj(V3)[a, b, m'] t_m[m', z]
        tmp = np.tensordot(V3, self.t_matrix(m), axes=([2], [0]))  # (a, b, z)
        tmp = np.tensordot(self.t_matrix(l), tmp, axes=([1], [0]))  # (x, b, z)
        out = np.tensordot(self.t_matrix(k), tmp, axes=([1], [1]))  # (y, x, z)
        return out.reshape(dk * dl, dm)

    # -- ambient cross-certification ---------------------------------------

    def chain_embedding(self, n: int) -> np.ndarray:
        """Column isometry C**d_n -> C**(N**n) realizing H_n in the ambient space."""
        if n < 1:
            raise ValueError(f"chain embedding needs a label >= 1, got {n}")
        self._require_label(n)
        N = self.params.N
        self._require(N**n * self.dim(n) <= _MATRIX_ENTRY_CAP, f"ambient chain at {n} too large")
        out = np.eye(N)
        for j in range(2, n + 1):
            i3 = self.step_isometry(j).reshape(self.dim(j - 1), N, self.dim(j))
            out = np.tensordot(out, i3, axes=([1], [0])).reshape(N**j, self.dim(j))
        return out


def _fix_sign(mat: np.ndarray) -> np.ndarray:
    """Make the first significant entry of the leading column positive."""
    col = mat[:, 0]
    amax = np.abs(col).max()
    nz = np.flatnonzero(np.abs(col) > 1e-10 * amax)
    if mat[nz[0], 0] < 0:
        mat = -mat
    return mat
