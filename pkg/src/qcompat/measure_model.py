"""Joint unitaries for apparatus + system, and Haar-random sampling."""
from __future__ import annotations

from dataclasses import dataclass, field
from typing import Sequence

import numpy as np

from ._validation import DEFAULT_TOLERANCES, make_rng
from .qcore import BipartiteSplit, Observable, StateVector, UnitaryOperator

__all__ = [
    "PointerAssignment",
    "MeasurementSetup",
    "von_neumann_unitary",
    "haar_random_unitary",
    "haar_random_state",
    "gram_schmidt_complete",
    "controlled_flip_setup",
    "product_setup",
]

# Pointer orthogonality threshold (max |<mu_i|mu_j>|, i != j).
POINTER_ORTHOGONALITY_TOL = 1e-9


@dataclass(frozen=True, eq=False)
class PointerAssignment:
    """Apparatus ready state plus one pointer state per eigenbasis vector.

    ``pointers[i]`` records the outcome for the i-th vector of
    ``Observable.eigenbasis()``, unless ``eigenbasis`` is given explicitly.
    """

    ready: StateVector
    pointers: tuple[StateVector, ...]
    eigenbasis: tuple[StateVector, ...] | None = None
    orthogonal_pointers: bool = field(init=False)

    def __post_init__(self):
        object.__setattr__(self, "ready", _as_state(self.ready, "ready"))
        pointers = tuple(_as_state(p, f"pointers[{i}]") for i, p in enumerate(self.pointers))
        if not pointers:
            raise ValueError("at least one pointer state is required")
        if any(p.dim != self.ready.dim for p in pointers):
            raise ValueError("pointer states must live in the apparatus space of the ready state")
        object.__setattr__(self, "pointers", pointers)
        if self.eigenbasis is not None:
            basis = tuple(_as_state(v, f"eigenbasis[{i}]") for i, v in enumerate(self.eigenbasis))
            object.__setattr__(self, "eigenbasis", basis)
        gram = np.array([[p.overlap(q) for q in pointers] for p in pointers])
        off = np.abs(gram - np.eye(len(pointers)))
        object.__setattr__(self, "orthogonal_pointers", bool(np.max(off) <= POINTER_ORTHOGONALITY_TOL))


@dataclass(frozen=True, eq=False)
class MeasurementSetup:
    """A joint unitary on apparatus (x) system, an apparatus ready state and a system observable."""

    split: BipartiteSplit
    ready: StateVector
    observable: Observable
    unitary: UnitaryOperator
    assignment: PointerAssignment | None = None

    def __post_init__(self):
        object.__setattr__(self, "ready", _as_state(self.ready, "ready"))
        if not isinstance(self.unitary, UnitaryOperator):
            object.__setattr__(self, "unitary", UnitaryOperator(self.unitary))
        if not isinstance(self.observable, Observable):
            object.__setattr__(self, "observable", Observable.from_matrix(self.observable))
        if self.unitary.dim != self.split.dim:
            raise ValueError(f"unitary dimension {self.unitary.dim} != split dimension {self.split.dim}")
        if self.observable.dim != self.split.dim_right:
            raise ValueError(f"observable dimension {self.observable.dim} != system dimension {self.split.dim_right}")
        if self.ready.dim != self.split.dim_left:
            raise ValueError(f"ready state dimension {self.ready.dim} != apparatus dimension {self.split.dim_left}")

    @property
    def system_dim(self) -> int:
        return self.split.dim_right

    @property
    def apparatus_dim(self) -> int:
        return self.split.dim_left

    def joint_output(self, psi) -> np.ndarray:
        """``U (|ready> (x) |psi>)`` as a raw amplitude array."""
        return self.unitary.matrix @ np.kron(self.ready.amplitudes, np.asarray(psi, dtype=complex))

    def summary(self) -> dict:
        return {
            "apparatus_dim": self.split.dim_left,
            "system_dim": self.split.dim_right,
            "eigenvalues": [float(v) for v in self.observable.eigenvalues],
            "multiplicities": [c.multiplicity for c in self.observable.spectrum],
            "von_neumann": self.assignment is not None,
        }


def _as_state(value, name: str) -> StateVector:
    if isinstance(value, StateVector):
        return value
    try:
        return StateVector(value)
    except ValueError as exc:
        raise ValueError(f"{name}: {exc}") from None


def gram_schmidt_complete(frame: np.ndarray, *, cutoff: float = 1e-8) -> np.ndarray:
    """Extend orthonormal columns to a full orthonormal basis.

    Candidates are the standard basis vectors in index order, each
    orthogonalized twice against the growing frame; the result is fully
    determined by the input.
    """
    dim, k = frame.shape
    basis = [frame[:, j] for j in range(k)]
    for idx in range(dim):
        if len(basis) == dim:
            break
        v = np.zeros(dim, dtype=complex)
        v[idx] = 1.0
        for _ in range(2):
            for b in basis:
                v = v - np.vdot(b, v) * b
        norm = np.linalg.norm(v)
        if norm > cutoff:
            basis.append(v / norm)
    if len(basis) != dim:
        raise np.linalg.LinAlgError("could not complete the orthonormal frame")
    return np.column_stack(basis)


def von_neumann_unitary(observable: Observable, assignment: PointerAssignment,
                        split: BipartiteSplit) -> MeasurementSetup:
    """Build a unitary with ``U(|ready>|psi_i>) = |pointer_i>|psi_i>`` for every eigenvector.

    The map is fixed on span{|ready>|psi_i>}; the rest of the space is mapped
    basis-to-basis after completing source and target frames with
    :func:`gram_schmidt_complete`.

    Raises
    ------
    ValueError
        Degenerate observable, non-orthogonal pointers or mismatched dimensions.
    """
    if observable.dim != split.dim_right:
        raise ValueError(f"observable dimension {observable.dim} != system dimension {split.dim_right}")
    if assignment.ready.dim != split.dim_left:
        raise ValueError(f"ready state dimension {assignment.ready.dim} != apparatus dimension {split.dim_left}")
    if observable.is_degenerate:
        raise ValueError("degenerate observable unsupported for Theorem-2 construction")
    if len(assignment.pointers) != split.dim_right:
        raise ValueError(f"expected {split.dim_right} pointer states, got {len(assignment.pointers)}")
    if not assignment.orthogonal_pointers:
        raise ValueError("pointer states must be mutually orthogonal for a unitary extension to exist")

    if assignment.eigenbasis is None:
        eigvecs = [v for _, v in observable.eigenbasis()]
    else:
        eigvecs = list(assignment.eigenbasis)
        if len(eigvecs) != split.dim_right:
            raise ValueError("explicit eigenbasis must have one vector per system dimension")
        for i, v in enumerate(eigvecs):
            _, residual = observable.closest_cluster(v.amplitudes)
            if residual > DEFAULT_TOLERANCES.tol_eigvec:
                raise ValueError(f"eigenbasis[{i}] is not an eigenvector of the observable")

    mu = assignment.ready.amplitudes
    source = np.column_stack([np.kron(mu, v.amplitudes) for v in eigvecs])
    target = np.column_stack([np.kron(p.amplitudes, v.amplitudes)
                              for p, v in zip(assignment.pointers, eigvecs)])
    for name, frame in (("source", source), ("target", target)):
        gram_err = np.max(np.abs(frame.conj().T @ frame - np.eye(frame.shape[1])))
        if gram_err > POINTER_ORTHOGONALITY_TOL:
            raise ValueError(f"{name} frame is not orthonormal (error {gram_err:.3e})")
    unitary = gram_schmidt_complete(target) @ gram_schmidt_complete(source).conj().T
    return MeasurementSetup(
        split=split,
        ready=assignment.ready,
        observable=observable,
        unitary=UnitaryOperator(unitary),
        assignment=PointerAssignment(assignment.ready, assignment.pointers, tuple(eigvecs)),
    )


def haar_random_unitary(dim: int, seed) -> UnitaryOperator:
    """Haar-distributed unitary from the phase-corrected QR of a complex Ginibre matrix.

    ``seed`` may be an integer or a ``numpy.random.Generator``.
    """
    if dim < 1:
        raise ValueError(f"dim must be >= 1, got {dim}")
    rng = make_rng(seed)
    z = (rng.standard_normal((dim, dim)) + 1j * rng.standard_normal((dim, dim))) / np.sqrt(2)
    q, r = np.linalg.qr(z)
    d = np.diag(r)
    q = q * (d / np.abs(d))
    return UnitaryOperator(q)


def haar_random_state(dim: int, seed) -> StateVector:
    """Uniformly distributed pure state (normalized complex Gaussian vector)."""
    if dim < 1:
        raise ValueError(f"dim must be >= 1, got {dim}")
    if dim == 1:
        return StateVector([1.0])
    rng = make_rng(seed)
    v = rng.standard_normal(dim) + 1j * rng.standard_normal(dim)
    return StateVector(v / np.linalg.norm(v))


def controlled_flip_setup() -> MeasurementSetup:
    """Two-qubit von Neumann setup for sigma_z with ready state |0>: a CNOT controlled by the system."""
    sigma_z = Observable.from_matrix(np.diag([1.0, -1.0]))
    assignment = PointerAssignment(
        ready=StateVector.basis(2, 0),
        pointers=(StateVector.basis(2, 0), StateVector.basis(2, 1)),
    )
    return von_neumann_unitary(sigma_z, assignment, BipartiteSplit(2, 2))


def product_setup(apparatus_unitary, system_unitary, ready, observable) -> MeasurementSetup:
    """Setup whose joint unitary is a non-interacting product ``V (x) W``."""
    V = np.asarray(apparatus_unitary, dtype=complex)
    W = np.asarray(system_unitary, dtype=complex)
    if not isinstance(observable, Observable):
        observable = Observable.from_matrix(observable)
    return MeasurementSetup(
        split=BipartiteSplit(V.shape[0], W.shape[0]),
        ready=_as_state(ready, "ready"),
        observable=observable,
        unitary=UnitaryOperator(np.kron(V, W)),
    )

