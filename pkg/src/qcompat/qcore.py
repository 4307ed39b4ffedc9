"""Finite-dimensional states, operators and the basic quantum operations.

Every object here is immutable once built: the backing arrays are private
copies flagged read-only. Joint spaces always put the apparatus factor on the
left (slow) index, so amplitude ``i * d_right + j`` belongs to ``|i>|j>``.
"""
from __future__ import annotations

from dataclasses import dataclass
from typing import Literal, Sequence

import numpy as np

from ._validation import DEFAULT_TOLERANCES, check_square, check_vector, make_rng

__all__ = [
    "StateVector",
    "Operator",
    "UnitaryOperator",
    "Observable",
    "SpectralCluster",
    "DensityMatrix",
    "BipartiteSplit",
    "SchmidtDecomposition",
    "tensor",
    "tensor_op",
    "apply_unitary",
    "evolve_density",
    "spectral_decompose",
    "schmidt",
    "is_product",
    "partial_trace",
    "born_probabilities",
    "born_measure",
    "decohere",
]

# Smallest Born weight that may be sampled.
_MIN_OUTCOME_PROB = 1e-14
# Amplitudes below this are treated as zero when fixing a global phase.
_PHASE_CUTOFF = 1e-10


def _frozen(arr: np.ndarray) -> np.ndarray:
    arr = np.array(arr, dtype=complex, copy=True)
    arr.setflags(write=False)
    return arr


class StateVector:
    """A normalized vector of complex amplitudes.

    Parameters
    ----------
    amplitudes : array-like of complex
    tol_norm : float
        Allowed deviation of the Euclidean norm from one.
    """

    __slots__ = ("_amps",)

    def __init__(self, amplitudes, *, tol_norm: float = DEFAULT_TOLERANCES.tol_norm):
        amps = check_vector(amplitudes, name="amplitudes")
        norm = np.linalg.norm(amps)
        if abs(norm - 1.0) > tol_norm:
            raise ValueError(f"state is not normalized: norm {norm!r} (tol_norm={tol_norm})")
        self._amps = _frozen(amps)

    @classmethod
    def normalized(cls, amplitudes) -> "StateVector":
        """Build a state from an unnormalized intermediate."""
        amps = check_vector(amplitudes, name="amplitudes")
        norm = np.linalg.norm(amps)
        if norm == 0:
            raise ValueError("cannot normalize the zero vector")
        return cls(amps / norm)

    @classmethod
    def basis(cls, dim: int, index: int) -> "StateVector":
        if not 0 <= index < dim:
            raise IndexError(f"basis index {index} out of range for dim {dim}")
        amps = np.zeros(dim, dtype=complex)
        amps[index] = 1.0
        return cls(amps)

    @property
    def amplitudes(self) -> np.ndarray:
        return self._amps

    @property
    def dim(self) -> int:
        return self._amps.size

    def __len__(self):
        return self.dim

    def __array__(self, dtype=None, copy=None):
        if dtype is None:
            return self._amps
        return self._amps.astype(dtype)

    def __repr__(self):
        return f"StateVector({np.array2string(self._amps, precision=4)})"

    def overlap(self, other) -> complex:
        """Inner product <self|other>."""
        return complex(np.vdot(self._amps, np.asarray(other, dtype=complex)))

    def same_ray(self, other, tol: float = DEFAULT_TOLERANCES.tol_norm) -> bool:
        """True when the two states differ only by a global phase."""
        return abs(abs(self.overlap(other)) - 1.0) <= tol

    def projector(self) -> np.ndarray:
        return np.outer(self._amps, self._amps.conj())


class Operator:
    """A square complex matrix with finite entries."""

    __slots__ = ("_mat",)

    def __init__(self, matrix):
        self._mat = _frozen(check_square(matrix, name="operator"))

    @property
    def matrix(self) -> np.ndarray:
        return self._mat

    @property
    def dim(self) -> int:
        return self._mat.shape[0]

    def __array__(self, dtype=None, copy=None):
        if dtype is None:
            return self._mat
        return self._mat.astype(dtype)

    def __repr__(self):
        return f"{type(self).__name__}(dim={self.dim})"

    def dagger(self) -> np.ndarray:
        return self._mat.conj().T

    def hermiticity_error(self) -> float:
        return float(np.max(np.abs(self._mat - self._mat.conj().T)))


class UnitaryOperator(Operator):
    """An operator with ``max|U^dagger U - I| <= tol_unitary``."""

    __slots__ = ()

    def __init__(self, matrix, *, tol_unitary: float = DEFAULT_TOLERANCES.tol_unitary):
        super().__init__(matrix)
        err = self.unitarity_error()
        if err > tol_unitary:
            raise ValueError(f"operator is not unitary: max|U'U - I| = {err:.3e} > {tol_unitary}")

    @classmethod
    def identity(cls, dim: int) -> "UnitaryOperator":
        return cls(np.eye(dim))

    def unitarity_error(self) -> float:
        gram = self._mat.conj().T @ self._mat
        return float(np.max(np.abs(gram - np.eye(self.dim))))

    def inverse(self) -> "UnitaryOperator":
        return UnitaryOperator(self.dagger(), tol_unitary=np.inf)

    def compose(self, other: "UnitaryOperator", *, tol_unitary: float | None = None) -> "UnitaryOperator":
        """Return ``self @ other`` (apply ``other`` first)."""
        if other.dim != self.dim:
            raise ValueError(f"dimension mismatch: {self.dim} vs {other.dim}")
        tol = 2 * DEFAULT_TOLERANCES.tol_unitary if tol_unitary is None else tol_unitary
        return UnitaryOperator(self._mat @ other.matrix, tol_unitary=tol)


class DensityMatrix(Operator):
    """Hermitian, unit-trace, positive semidefinite operator."""

    __slots__ = ()

    def __init__(
        self,
        matrix,
        *,
        tol_herm: float = DEFAULT_TOLERANCES.tol_herm,
        tol_norm: float = DEFAULT_TOLERANCES.tol_norm,
        tol_psd: float = DEFAULT_TOLERANCES.tol_psd,
    ):
        super().__init__(matrix)
        herm = self.hermiticity_error()
        if herm > tol_herm:
            raise ValueError(f"density matrix is not Hermitian (error {herm:.3e})")
        tr = np.trace(self._mat)
        if abs(tr - 1.0) > tol_norm:
            raise ValueError(f"density matrix trace is {tr!r}, expected 1")
        lowest = self.eigenvalues()[0]
        if lowest < -tol_psd:
            raise ValueError(f"density matrix has negative eigenvalue {lowest:.3e}")

    @classmethod
    def from_state(cls, psi) -> "DensityMatrix":
        v = np.asarray(psi, dtype=complex)
        return cls(np.outer(v, v.conj()))

    @classmethod
    def maximally_mixed(cls, dim: int) -> "DensityMatrix":
        return cls(np.eye(dim) / dim)

    @classmethod
    def mixture(cls, weights: Sequence[float], states: Sequence) -> "DensityMatrix":
        """Statistical mixture ``sum_k w_k |psi_k><psi_k|``."""
        w = np.asarray(weights, dtype=float)
        if w.ndim != 1 or w.size != len(states) or w.size == 0:
            raise ValueError("weights and states must be non-empty and of equal length")
        if np.any(w < 0) or abs(w.sum() - 1.0) > DEFAULT_TOLERANCES.tol_norm:
            raise ValueError("weights must be a probability vector")
        vecs = np.array([np.asarray(s, dtype=complex) for s in states])
        return cls(np.einsum("k,ki,kj->ij", w, vecs, vecs.conj()))

    def eigenvalues(self) -> np.ndarray:
        return np.linalg.eigvalsh(self._mat)

    def purity(self) -> float:
        return float(np.real(np.trace(self._mat @ self._mat)))


@dataclass(frozen=True, eq=False)
class SpectralCluster:
    """One distinct eigenvalue with its eigenprojector and an orthonormal basis of its eigenspace."""

    eigenvalue: float
    multiplicity: int
    projector: np.ndarray
    vectors: np.ndarray  # columns

    def residual(self, v: np.ndarray) -> float:
        """Norm of the component of ``v`` outside this eigenspace."""
        return float(np.linalg.norm(v - self.projector @ v))


class Observable(Operator):
    """A Hermitian operator together with its clustered spectral decomposition.

    Build instances with :func:`spectral_decompose` or :meth:`from_matrix`.
    """

    __slots__ = ("_spectrum",)

    def __init__(self, matrix, spectrum: Sequence[SpectralCluster]):
        super().__init__(matrix)
        self._spectrum = tuple(spectrum)

    @classmethod
    def from_matrix(cls, matrix, *, tol_eig: float = DEFAULT_TOLERANCES.tol_eig,
                    tol_herm: float = DEFAULT_TOLERANCES.tol_herm) -> "Observable":
        return spectral_decompose(matrix, tol_eig=tol_eig, tol_herm=tol_herm)

    @property
    def spectrum(self) -> tuple[SpectralCluster, ...]:
        return self._spectrum

    @property
    def eigenvalues(self) -> np.ndarray:
        return np.array([c.eigenvalue for c in self._spectrum])

    @property
    def is_degenerate(self) -> bool:
        return any(c.multiplicity > 1 for c in self._spectrum)

    def eigenbasis(self) -> list[tuple[float, StateVector]]:
        """Orthonormal eigenbasis as ``(eigenvalue, vector)`` pairs.

        Vectors are ordered by the index of their dominant amplitude (ties broken
        by eigenvalue), and each is phased so that amplitude is real positive.
        For a diagonal observable this reproduces the standard basis order.
        """
        pairs = []
        for cluster in self._spectrum:
            for k in range(cluster.vectors.shape[1]):
                v = cluster.vectors[:, k]
                lead = int(np.argmax(np.abs(v) > np.max(np.abs(v)) - 1e-12))
                v = v * (abs(v[lead]) / v[lead])
                pairs.append((lead, cluster.eigenvalue, v))
        pairs.sort(key=lambda p: (p[0], p[1]))
        return [(val, StateVector(v)) for _, val, v in pairs]

    def closest_cluster(self, v: np.ndarray) -> tuple[int, float]:
        """Index of the eigenspace nearest to ``v`` and the corresponding residual."""
        residuals = [c.residual(v) for c in self._spectrum]
        best = int(np.argmin(residuals))
        return best, residuals[best]

    def cluster_of(self, eigenvalue: float, tol: float | None = None) -> SpectralCluster:
        vals = self.eigenvalues
        idx = int(np.argmin(np.abs(vals - eigenvalue)))
        if tol is not None and abs(vals[idx] - eigenvalue) > tol:
            raise KeyError(f"no eigenvalue within {tol} of {eigenvalue}")
        return self._spectrum[idx]


@dataclass(frozen=True)
class BipartiteSplit:
    """Factorization of a joint space as apparatus (left) times system (right)."""

    dim_left: int
    dim_right: int

    def __post_init__(self):
        for name in ("dim_left", "dim_right"):
            value = getattr(self, name)
            if isinstance(value, bool) or not isinstance(value, (int, np.integer)) or value < 1:
                raise ValueError(f"{name} must be a positive integer, got {value!r}")

    @property
    def dim(self) -> int:
        return self.dim_left * self.dim_right


@dataclass(frozen=True, eq=False)
class SchmidtDecomposition:
    coefficients: np.ndarray
    left_vectors: tuple[StateVector, ...]
    right_vectors: tuple[StateVector, ...]

    @property
    def rank(self) -> int:
        return int(np.count_nonzero(self.coefficients))

    @property
    def second_coefficient(self) -> float:
        return float(self.coefficients[1]) if self.coefficients.size > 1 else 0.0

    def reconstruct(self) -> np.ndarray:
        out = 0
        for c, u, v in zip(self.coefficients, self.left_vectors, self.right_vectors):
            out = out + c * np.kron(u.amplitudes, v.amplitudes)
        return out


def _check_dims(expected: int, got: int, what: str):
    if expected != got:
        raise ValueError(f"dimension mismatch in {what}: expected {expected}, got {got}")


def tensor(a, b) -> StateVector:
    """Product state ``a (x) b`` with ``a`` on the slow index."""
    return StateVector(np.kron(np.asarray(a, dtype=complex), np.asarray(b, dtype=complex)))


def tensor_op(A, B) -> Operator:
    """Kronecker product of two operators."""
    return Operator(np.kron(np.asarray(A, dtype=complex), np.asarray(B, dtype=complex)))


def apply_unitary(U: UnitaryOperator, psi: StateVector) -> StateVector:
    vec = np.asarray(psi, dtype=complex)
    _check_dims(U.dim, vec.size, "apply_unitary")
    return StateVector(U.matrix @ vec)


def evolve_density(U: UnitaryOperator, rho: DensityMatrix) -> DensityMatrix:
    """Return ``U rho U^-1`` with the inverse taken as the adjoint."""
    _check_dims(U.dim, rho.dim, "evolve_density")
    out = U.matrix @ rho.matrix @ U.dagger()
    return DensityMatrix(0.5 * (out + out.conj().T))


def spectral_decompose(A, tol_eig: float = DEFAULT_TOLERANCES.tol_eig, *,
                       tol_herm: float = DEFAULT_TOLERANCES.tol_herm) -> Observable:
    """Cluster the eigendecomposition of a Hermitian matrix.

    Sorted eigenvalues are merged whenever consecutive gaps are ``<= tol_eig``;
    each cluster is represented by its projector, which (unlike the individual
    eigenvectors) is unique under degeneracy.
    """
    mat = check_square(A, name="observable")
    herm = float(np.max(np.abs(mat - mat.conj().T)))
    if herm > tol_herm:
        raise ValueError(f"observable is not Hermitian: max|A - A'| = {herm:.3e}")
    mat = 0.5 * (mat + mat.conj().T)
    vals, vecs = np.linalg.eigh(mat)
    breaks = np.flatnonzero(np.diff(vals) > tol_eig) + 1
    clusters = []
    for idx in np.split(np.arange(vals.size), breaks):
        block = vecs[:, idx]
        proj = block @ block.conj().T
        clusters.append(SpectralCluster(
            eigenvalue=float(np.mean(vals[idx])),
            multiplicity=int(idx.size),
            projector=_frozen(proj),
            vectors=_frozen(block),
        ))
    return Observable(mat, clusters)


def _schmidt_arrays(vec: np.ndarray, dim_left: int, dim_right: int):
    u, s, vh = np.linalg.svd(vec.reshape(dim_left, dim_right), full_matrices=False)
    return u, s, vh


def schmidt(psi: StateVector, split: BipartiteSplit, *,
            tol_schmidt: float = DEFAULT_TOLERANCES.tol_schmidt) -> SchmidtDecomposition:
    """Schmidt decomposition via the SVD of the amplitude matrix."""
    vec = np.asarray(psi, dtype=complex)
    _check_dims(split.dim, vec.size, "schmidt")
    u, s, vh = _schmidt_arrays(vec, split.dim_left, split.dim_right)
    dec = SchmidtDecomposition(
        coefficients=np.clip(s, 0.0, None),
        left_vectors=tuple(StateVector(u[:, k]) for k in range(s.size)),
        right_vectors=tuple(StateVector(vh[k, :]) for k in range(s.size)),
    )
    err = np.linalg.norm(vec - dec.reconstruct())
    if err > tol_schmidt:
        raise np.linalg.LinAlgError(f"Schmidt reconstruction error {err:.3e} exceeds {tol_schmidt}")
    return dec


def _fix_phase(left: np.ndarray, right: np.ndarray):
    """Move the phase of the first non-negligible ``right`` amplitude onto ``left``."""
    lead = int(np.argmax(np.abs(right) > _PHASE_CUTOFF))
    phase = right[lead] / abs(right[lead])
    return left * phase, right / phase


def _product_factors(vec: np.ndarray, dim_left: int, dim_right: int):
    """Return ``(second_coefficient, left, right)`` for the leading Schmidt term."""
    u, s, vh = _schmidt_arrays(vec, dim_left, dim_right)
    second = float(s[1]) if s.size > 1 else 0.0
    left, right = _fix_phase(u[:, 0], vh[0, :])
    return second, left, right


def is_product(psi: StateVector, split: BipartiteSplit,
               tol_product: float = DEFAULT_TOLERANCES.tol_product):
    """Factor a joint state as ``left (x) right`` if its Schmidt rank is one.

    Returns
    -------
    (StateVector, StateVector) or None
        ``None`` when the second Schmidt coefficient exceeds ``tol_product``.
        The right factor's first non-negligible amplitude is real positive.
    """
    vec = np.asarray(psi, dtype=complex)
    _check_dims(split.dim, vec.size, "is_product")
    second, left, right = _product_factors(vec, split.dim_left, split.dim_right)
    if second > tol_product:
        return None
    return StateVector(left), StateVector(right)


def partial_trace(rho: DensityMatrix, split: BipartiteSplit,
                  keep: Literal["left", "right"] = "right") -> DensityMatrix:
    _check_dims(split.dim, rho.dim, "partial_trace")
    t = rho.matrix.reshape(split.dim_left, split.dim_right, split.dim_left, split.dim_right)
    if keep == "right":
        out = np.einsum("ijik->jk", t)
    elif keep == "left":
        out = np.einsum("ijkj->ik", t)
    else:
        raise ValueError(f"keep must be 'left' or 'right', got {keep!r}")
    return DensityMatrix(0.5 * (out + out.conj().T))


def born_probabilities(psi: StateVector, O: Observable) -> np.ndarray:
    """Weights ``<psi|P_k|psi>`` over the clustered spectrum."""
    vec = np.asarray(psi, dtype=complex)
    _check_dims(O.dim, vec.size, "born_probabilities")
    return np.array([np.real(np.vdot(vec, c.projector @ vec)) for c in O.spectrum])


def born_measure(psi: StateVector, O: Observable, rng):
    """Projective measurement with Born-rule sampling.

    Parameters
    ----------
    psi : StateVector
    O : Observable
    rng : numpy.random.Generator or int
        Source of randomness; an integer is used as a seed.

    Returns
    -------
    eigenvalue : float
    post_state : StateVector
        ``P_k psi / sqrt(p_k)``.
    probability : float
    """
    probs = born_probabilities(psi, O)
    probs = np.where(probs < _MIN_OUTCOME_PROB, 0.0, probs)
    probs = probs / probs.sum()
    gen = make_rng(rng)
    k = int(gen.choice(probs.size, p=probs))
    cluster = O.spectrum[k]
    post = StateVector.normalized(cluster.projector @ np.asarray(psi, dtype=complex))
    return cluster.eigenvalue, post, float(probs[k])


def decohere(rho: DensityMatrix, O: Observable) -> DensityMatrix:
    """Remove coherences between eigenspaces: ``sum_k P_k rho P_k``."""
    _check_dims(O.dim, rho.dim, "decohere")
    out = sum(c.projector @ rho.matrix @ c.projector for c in O.spectrum)
    return DensityMatrix(0.5 * (out + out.conj().T))
