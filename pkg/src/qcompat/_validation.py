"""Input validation helpers and tolerance bookkeeping.

These play the role ``sklearn.utils.validation`` plays for real-valued data;
sklearn's own ``check_array`` refuses complex input, so the quantum objects get
their own checks here.
"""
from __future__ import annotations

from dataclasses import asdict, dataclass, fields, replace

import numpy as np

__all__ = [
    "Tolerances",
    "DEFAULT_TOLERANCES",
    "check_vector",
    "check_square",
    "check_states",
    "check_seed",
    "derive_seed",
    "make_rng",
]


@dataclass(frozen=True)
class Tolerances:
    """Numerical thresholds used across the package.

    Defaults sit roughly one order of magnitude above the error of double
    precision SVD/eigensolvers for dimensions up to 64.
    """

    tol_norm: float = 1e-9
    tol_unitary: float = 1e-9
    tol_herm: float = 1e-9
    tol_eig: float = 1e-8
    tol_product: float = 1e-7
    tol_schmidt: float = 1e-7
    tol_psd: float = 1e-10
    tol_eigvec: float = 1e-7

    def __post_init__(self):
        for f in fields(self):
            value = getattr(self, f.name)
            if not np.isfinite(value) or value < 0:
                raise ValueError(f"{f.name} must be a finite non-negative number, got {value!r}")

    def override(self, **changes) -> "Tolerances":
        unknown = set(changes) - set(self.names())
        if unknown:
            raise KeyError(f"unknown tolerance(s): {sorted(unknown)}")
        return replace(self, **{k: float(v) for k, v in changes.items()})

    @classmethod
    def names(cls) -> tuple[str, ...]:
        return tuple(f.name for f in fields(cls))

    def as_dict(self) -> dict[str, float]:
        return asdict(self)


DEFAULT_TOLERANCES = Tolerances()


def check_vector(values, *, name: str = "vector", dim: int | None = None) -> np.ndarray:
    """Return ``values`` as a finite 1-D complex array."""
    arr = np.asarray(values, dtype=complex)
    if arr.ndim != 1:
        raise ValueError(f"{name} must be one-dimensional, got shape {arr.shape}")
    if arr.size == 0:
        raise ValueError(f"{name} must have at least one entry")
    if not np.all(np.isfinite(arr)):
        raise ValueError(f"{name} contains NaN or Inf")
    if dim is not None and arr.size != dim:
        raise ValueError(f"{name} has dimension {arr.size}, expected {dim}")
    return arr


def check_square(values, *, name: str = "matrix", dim: int | None = None) -> np.ndarray:
    """Return ``values`` as a finite square complex matrix."""
    arr = np.asarray(values, dtype=complex)
    if arr.ndim != 2 or arr.shape[0] != arr.shape[1]:
        raise ValueError(f"{name} must be a square matrix, got shape {arr.shape}")
    if arr.shape[0] == 0:
        raise ValueError(f"{name} must be at least 1x1")
    if not np.all(np.isfinite(arr)):
        raise ValueError(f"{name} contains NaN or Inf")
    if dim is not None and arr.shape[0] != dim:
        raise ValueError(f"{name} has dimension {arr.shape[0]}, expected {dim}")
    return arr


def check_states(X, dim: int, *, tol_norm: float = DEFAULT_TOLERANCES.tol_norm) -> np.ndarray:
    """Validate a batch of state vectors, one per row.

    A single 1-D state is promoted to a batch of one.
    """
    arr = np.asarray(X, dtype=complex)
    if arr.ndim == 1:
        arr = arr[np.newaxis, :]
    if arr.ndim != 2:
        raise ValueError(f"expected a 2-D array of states, got shape {arr.shape}")
    if arr.shape[1] != dim:
        raise ValueError(f"states have dimension {arr.shape[1]}, expected {dim}")
    if not np.all(np.isfinite(arr)):
        raise ValueError("states contain NaN or Inf")
    norms = np.linalg.norm(arr, axis=1)
    bad = np.flatnonzero(np.abs(norms - 1.0) > tol_norm)
    if bad.size:
        raise ValueError(f"state {bad[0]} is not normalized (norm {norms[bad[0]]!r})")
    return arr


def check_seed(seed) -> int:
    """Map a user seed onto the unsigned 64-bit range."""
    if isinstance(seed, (bool, np.bool_)) or not isinstance(seed, (int, np.integer)):
        raise TypeError(f"seed must be an integer, got {type(seed).__name__}")
    return int(seed) % (1 << 64)


def derive_seed(seed, *keys: int) -> int:
    """Derive an independent 64-bit seed from a root seed and integer keys."""
    ss = np.random.SeedSequence([check_seed(seed), *(int(k) for k in keys)])
    return int(ss.generate_state(1, dtype=np.uint64)[0])


def make_rng(seed, *keys: int) -> np.random.Generator:
    """Return a generator for ``seed``; generators pass through untouched when no keys are given."""
    if isinstance(seed, np.random.Generator):
        if keys:
            raise TypeError("stream keys need an integer root seed")
        return seed
    return np.random.default_rng(np.random.SeedSequence([check_seed(seed), *(int(k) for k in keys)]))
