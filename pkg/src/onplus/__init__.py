"""Representation-category calculus for the free orthogonal quantum group O_N+.

The package realizes the irreducible representation spaces concretely (two
interchangeable backends), builds the fusion isometries between them, and
evaluates Haar-state quantities both through that calculus and through an
independent exact Weingarten oracle.
"""

from .qcore import QParams, catalan, chebyshev_T, make_params, quantum_dim, semicircle_moment
from .types import CapExceededError, ConfigError, HVec

__version__ = "0.1.0"

__all__ = [
    "QParams",
    "make_params",
    "quantum_dim",
    "chebyshev_T",
    "semicircle_moment",
    "catalan",
    "CapExceededError",
    "ConfigError",
    "HVec",
    "__version__",
]
