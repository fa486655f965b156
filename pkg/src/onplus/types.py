"""Shared small types and errors used across the package."""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np


class CapExceededError(RuntimeError):
    """A requested computation does not fit inside the configured size caps."""


class ConfigError(ValueError):
    """Invalid run configuration (bad N, tolerance, cap values, ...)."""


class InvariantError(ArithmeticError):
    """A numerical invariant that the calculus guarantees failed to hold.

    When the failing check runs at the end of a sweep, the computed
    report rides along on the ``report`` attribute so callers can still
    serialize the measured data.
    """

    def __init__(self, message: str, report: object | None = None):
        super().__init__(message)
        self.report = report


@dataclass(frozen=True)
class HVec:
    """A vector living in the realized irreducible space with the given label.

    ``coords`` are coordinates in the backend's orthonormal basis of that
    space; the basis itself is fixed per backend instance, so two HVecs with
    the same label are directly comparable.
    """

    label: int
    coords: np.ndarray = field(repr=False)

    def __post_init__(self):
        object.__setattr__(self, "coords", np.asarray(self.coords))
        if self.coords.ndim != 1:
            raise ValueError("HVec coords must be one-dimensional")
        if self.label < 0:
            raise ValueError("HVec label must be nonnegative")

    @property
    def dim(self) -> int:
        return self.coords.shape[0]

    def norm(self) -> float:
        return float(np.linalg.norm(self.coords))
