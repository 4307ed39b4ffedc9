"""Classify initial system states against a unitary measurement setup.

A system state ``psi`` is *compatible* with a setup when
``U(|ready> (x) |psi>)`` is a product ``|mu'> (x) |psi'>`` whose system factor
lies in a single eigenspace of the observable. The audits in this module
sample states and check the two no-go results about such states:

* if every state were compatible, all outcomes would share one eigenvalue;
* for a non-disturbing (von Neumann) apparatus only eigenstates are compatible.
"""
from __future__ import annotations

import enum
from dataclasses import dataclass
from typing import Sequence

import numpy as np

from ._validation import DEFAULT_TOLERANCES, Tolerances, make_rng
from .measure_model import (
    MeasurementSetup,
    PointerAssignment,
    haar_random_state,
    von_neumann_unitary,
)
from .qcore import (
    BipartiteSplit,
    DensityMatrix,
    Observable,
    StateVector,
    _product_factors,
    evolve_density,
    partial_trace,
)

__all__ = [
    "VerdictKind",
    "Conclusion",
    "CompatibilityVerdict",
    "Counterexample",
    "AuditReport",
    "Witness",
    "classify",
    "classify_output",
    "theorem1_audit",
    "theorem2_audit",
    "restriction_witness",
    "measure_zero_probe",
    "eigenspace_weight",
    "density_corollary_check",
]

# A superposition counts as genuine when at least two eigen-coefficients exceed this.
SUPERPOSITION_FLOOR = 0.1
MAX_WITNESS_ATTEMPTS = 1000
_MAX_REJECTIONS = 10_000


class VerdictKind(str, enum.Enum):
    COMPATIBLE = "Compatible"
    ENTANGLED_OUTPUT = "EntangledOutput"
    PRODUCT_NON_EIGENSTATE = "ProductNonEigenstate"


class Conclusion(str, enum.Enum):
    CONSISTENT = "ConsistentWithTheorem"
    HYPOTHESIS_VIOLATED = "HypothesisViolated"
    COUNTEREXAMPLE = "CounterexampleFound"


@dataclass(frozen=True, eq=False)
class CompatibilityVerdict:
    """Outcome of classifying one initial state.

    ``eigenvalue`` is set only for compatible states; the factors and
    ``eigen_residual`` only when the joint output is a product.
    """

    kind: VerdictKind
    second_schmidt_coefficient: float
    eigenvalue: float | None = None
    system_factor: StateVector | None = None
    apparatus_factor: StateVector | None = None
    eigen_residual: float | None = None

    @property
    def compatible(self) -> bool:
        return self.kind is VerdictKind.COMPATIBLE

    @property
    def is_product(self) -> bool:
        return self.kind is not VerdictKind.ENTANGLED_OUTPUT

    def to_dict(self) -> dict:
        out = {
            "kind": self.kind.value,
            "second_schmidt_coefficient": self.second_schmidt_coefficient,
            "eigenvalue": self.eigenvalue,
            "eigen_residual": self.eigen_residual,
        }
        if self.system_factor is not None:
            out["system_factor"] = self.system_factor.amplitudes
            out["apparatus_factor"] = self.apparatus_factor.amplitudes
        return out


@dataclass(frozen=True, eq=False)
class Counterexample:
    states: tuple[StateVector, ...]
    verdicts: tuple[CompatibilityVerdict, ...]
    sample_indices: tuple[int, ...]


@dataclass(frozen=True, eq=False)
class AuditReport:
    setup_summary: dict
    samples_tested: int
    counts: dict
    eigenvalue_clusters: tuple[float, ...]
    conclusion: Conclusion
    counterexample: Counterexample | None = None
    # Smallest second Schmidt coefficient over the non-eigenstate samples (theorem-2 audits).
    min_second_schmidt: float | None = None
    # Largest eigen-residual over the eigenbasis checks (theorem-2 audits).
    max_eigen_residual: float | None = None

    def __post_init__(self):
        if (self.counterexample is None) == (self.conclusion is Conclusion.COUNTEREXAMPLE):
            raise ValueError("a counterexample is present iff the conclusion is CounterexampleFound")

    def to_dict(self) -> dict:
        out = {
            "setup": self.setup_summary,
            "samples_tested": self.samples_tested,
            "counts": dict(self.counts),
            "eigenvalue_clusters": list(self.eigenvalue_clusters),
            "conclusion": self.conclusion.value,
            "counterexample": None,
            "min_second_schmidt": self.min_second_schmidt,
            "max_eigen_residual": self.max_eigen_residual,
        }
        if self.counterexample is not None:
            out["counterexample"] = {
                "sample_indices": list(self.counterexample.sample_indices),
                "states": [s.amplitudes for s in self.counterexample.states],
                "verdicts": [v.to_dict() for v in self.counterexample.verdicts],
            }
        return out


@dataclass(frozen=True, eq=False)
class Witness:
    """An initial state that is not compatible with the setup."""

    state: StateVector
    verdict: CompatibilityVerdict
    attempts: int


def _resolve(tols: Tolerances | None, **overrides) -> Tolerances:
    tols = DEFAULT_TOLERANCES if tols is None else tols
    changes = {k: v for k, v in overrides.items() if v is not None}
    return tols.override(**changes) if changes else tols


def classify_output(joint: np.ndarray, split: BipartiteSplit, observable: Observable,
                    tols: Tolerances | None = None) -> CompatibilityVerdict:
    """Classify a joint output state as entangled, product, or product with an eigenstate factor."""
    tols = _resolve(tols)
    joint = np.asarray(joint, dtype=complex)
    if joint.size != split.dim:
        raise ValueError(f"joint state has dimension {joint.size}, expected {split.dim}")
    second, left, right = _product_factors(joint, split.dim_left, split.dim_right)
    if second > tols.tol_product:
        return CompatibilityVerdict(VerdictKind.ENTANGLED_OUTPUT, second)
    idx, residual = observable.closest_cluster(right)
    apparatus = StateVector(left)
    system = StateVector(right)
    if residual <= tols.tol_eigvec:
        return CompatibilityVerdict(VerdictKind.COMPATIBLE, second,
                                    eigenvalue=observable.spectrum[idx].eigenvalue,
                                    system_factor=system, apparatus_factor=apparatus,
                                    eigen_residual=residual)
    return CompatibilityVerdict(VerdictKind.PRODUCT_NON_EIGENSTATE, second,
                                system_factor=system, apparatus_factor=apparatus,
                                eigen_residual=residual)


def classify(setup: MeasurementSetup, psi, tols: Tolerances | None = None, *,
             tol_product: float | None = None, tol_eigvec: float | None = None) -> CompatibilityVerdict:
    """Decide whether ``psi`` is compatible with ``setup``.

    Parameters
    ----------
    setup : MeasurementSetup
    psi : StateVector or array-like
        Initial system state.
    tols : Tolerances, optional
        Base tolerances; ``tol_product`` and ``tol_eigvec`` override single fields.

    Returns
    -------
    CompatibilityVerdict
    """
    vec = np.asarray(psi, dtype=complex)
    if vec.ndim != 1 or vec.size != setup.system_dim:
        raise ValueError(f"state has shape {vec.shape}, expected ({setup.system_dim},)")
    tols = _resolve(tols, tol_product=tol_product, tol_eigvec=tol_eigvec)
    norm = np.linalg.norm(vec)
    if abs(norm - 1.0) > tols.tol_norm:
        raise ValueError(f"state is not normalized: norm {norm!r}")
    return classify_output(setup.joint_output(vec), setup.split, setup.observable, tols)


def _tally(verdicts: Sequence[CompatibilityVerdict]) -> dict:
    counts = {k.value: 0 for k in VerdictKind}
    for v in verdicts:
        counts[v.kind.value] += 1
    return counts


def _clusters(verdicts: Sequence[CompatibilityVerdict]) -> tuple[float, ...]:
    return tuple(sorted({v.eigenvalue for v in verdicts if v.compatible}))


def _eigenbasis_states(observable: Observable) -> list[StateVector]:
    return [v for _, v in observable.eigenbasis()]


def theorem1_audit(setup: MeasurementSetup, n_samples: int, seed,
                   tols: Tolerances | None = None) -> AuditReport:
    """Check that "every state compatible" forces a single outcome eigenvalue.

    Samples ``n_samples`` Haar-random system states (stream ``i`` seeded from
    ``(seed, i)``) followed by every eigenbasis vector. If any sample is not
    compatible the theorem's premise fails and the conclusion is
    ``HypothesisViolated``. Otherwise all eigenvalues must coincide; a second
    eigenvalue would be a genuine counterexample (and hence a bug).
    """
    if n_samples < 1:
        raise ValueError("n_samples must be >= 1")
    tols = _resolve(tols)
    d = setup.system_dim
    states = [haar_random_state(d, make_rng(seed, i)) for i in range(n_samples)]
    states += _eigenbasis_states(setup.observable)
    verdicts = [classify(setup, s, tols) for s in states]

    conclusion = Conclusion.HYPOTHESIS_VIOLATED
    counterexample = None
    if all(v.compatible for v in verdicts):
        conclusion = Conclusion.CONSISTENT
        first = verdicts[0].eigenvalue
        for k, v in enumerate(verdicts):
            if v.eigenvalue != first:
                conclusion = Conclusion.COUNTEREXAMPLE
                counterexample = Counterexample((states[0], states[k]), (verdicts[0], v), (0, k))
                break
    return AuditReport(
        setup_summary=setup.summary(),
        samples_tested=len(states),
        counts=_tally(verdicts),
        eigenvalue_clusters=_clusters(verdicts),
        conclusion=conclusion,
        counterexample=counterexample,
    )


def _genuine_superposition(d: int, rng: np.random.Generator) -> np.ndarray:
    """Haar-random coefficients with at least two magnitudes above the floor."""
    for _ in range(_MAX_REJECTIONS):
        alpha = haar_random_state(d, rng).amplitudes
        if np.count_nonzero(np.abs(alpha) > SUPERPOSITION_FLOOR) >= 2:
            return alpha
    raise RuntimeError("rejection sampling for superposition coefficients did not terminate")


def theorem2_audit(observable: Observable, assignment: PointerAssignment, split: BipartiteSplit,
                   n_samples: int, seed, tols: Tolerances | None = None) -> AuditReport:
    """Check that a non-disturbing apparatus admits only eigenstates.

    Every eigenbasis vector must classify compatible with its own eigenvalue,
    and no genuine superposition (two or more eigen-coefficients of magnitude
    above 0.1) may classify compatible.
    """
    tols = _resolve(tols)
    setup = von_neumann_unitary(observable, assignment, split)
    eigvecs = setup.assignment.eigenbasis
    states: list[StateVector] = []
    verdicts: list[CompatibilityVerdict] = []
    failure = None

    max_residual = 0.0
    for v in eigvecs:
        own = observable.spectrum[observable.closest_cluster(v.amplitudes)[0]].eigenvalue
        verdict = classify(setup, v, tols)
        states.append(v)
        verdicts.append(verdict)
        if verdict.eigen_residual is not None:
            max_residual = max(max_residual, verdict.eigen_residual)
        if failure is None and not (verdict.compatible and verdict.eigenvalue == own):
            failure = len(states) - 1

    min_second = None
    if split.dim_right >= 2:
        basis = np.column_stack([v.amplitudes for v in eigvecs])
        for i in range(n_samples):
            alpha = _genuine_superposition(split.dim_right, make_rng(seed, i))
            psi = StateVector(basis @ alpha)
            verdict = classify(setup, psi, tols)
            states.append(psi)
            verdicts.append(verdict)
            s2 = verdict.second_schmidt_coefficient
            min_second = s2 if min_second is None else min(min_second, s2)
            if failure is None and verdict.compatible:
                failure = len(states) - 1

    counterexample = None
    conclusion = Conclusion.CONSISTENT
    if failure is not None:
        conclusion = Conclusion.COUNTEREXAMPLE
        counterexample = Counterexample((states[failure],), (verdicts[failure],), (failure,))
    return AuditReport(
        setup_summary=setup.summary(),
        samples_tested=len(states),
        counts=_tally(verdicts),
        eigenvalue_clusters=_clusters(verdicts),
        conclusion=conclusion,
        counterexample=counterexample,
        min_second_schmidt=min_second,
        max_eigen_residual=max_residual,
    )


def restriction_witness(setup: MeasurementSetup, seed, tols: Tolerances | None = None,
                        max_attempts: int = MAX_WITNESS_ATTEMPTS) -> Witness | None:
    """Find an initial state that is not compatible with ``setup``.

    Equal superpositions of eigenbasis pairs are tried first, then Haar-random
    states. Returns ``None`` when every attempt was compatible.
    """
    tols = _resolve(tols)
    basis = _eigenbasis_states(setup.observable)
    d = setup.system_dim

    def candidates():
        for i in range(len(basis)):
            for j in range(i + 1, len(basis)):
                yield StateVector.normalized(basis[i].amplitudes + basis[j].amplitudes)
        k = 0
        while True:
            yield haar_random_state(d, make_rng(seed, k))
            k += 1

    for attempt, psi in enumerate(candidates(), start=1):
        if attempt > max_attempts:
            break
        verdict = classify(setup, psi, tols)
        if not verdict.compatible:
            return Witness(psi, verdict, attempt)
    return None


def measure_zero_probe(setup: MeasurementSetup, n: int, seed,
                       tol_product: float | None = None, tols: Tolerances | None = None) -> float:
    """Fraction of Haar-random joint inputs whose output is product with an eigenstate factor.

    Unlike :func:`classify`, inputs range over the whole joint space rather
    than over ``|ready> (x) |psi>``.
    """
    if n < 1:
        raise ValueError("n must be >= 1")
    tols = _resolve(tols, tol_product=tol_product)
    U = setup.unitary.matrix
    hits = 0
    for i in range(n):
        phi = haar_random_state(setup.split.dim, make_rng(seed, i)).amplitudes
        if classify_output(U @ phi, setup.split, setup.observable, tols).compatible:
            hits += 1
    return hits / n


def eigenspace_weight(setup: MeasurementSetup, weights: Sequence[float], states: Sequence,
                      eigenvalue: float) -> float:
    """Evolve ``|ready><ready| (x) rho`` and return the system's weight in one eigenspace.

    ``rho`` is the mixture of ``states`` with ``weights``; the result is
    ``tr(P rho' P)`` with ``rho'`` the reduced system state after evolution.
    """
    rho = DensityMatrix.mixture(weights, [np.asarray(s, dtype=complex) for s in states])
    ready = setup.ready.projector()
    joint = DensityMatrix(np.kron(ready, rho.matrix))
    reduced = partial_trace(evolve_density(setup.unitary, joint), setup.split, keep="right")
    P = setup.observable.cluster_of(eigenvalue).projector
    return float(np.real(np.trace(P @ reduced.matrix @ P)))


def density_corollary_check(setup: MeasurementSetup, weights: Sequence[float],
                            compatible_states: Sequence, tols: Tolerances | None = None,
                            atol: float = 1e-8) -> bool:
    """Verify that mixtures of compatible states stay in the common eigenspace.

    Raises
    ------
    ValueError
        If a state is not compatible or the states disagree on the eigenvalue.
    """
    tols = _resolve(tols)
    if len(compatible_states) == 0:
        raise ValueError("at least one state is required")
    eigenvalue = None
    for i, psi in enumerate(compatible_states):
        verdict = classify(setup, psi, tols)
        if not verdict.compatible:
            raise ValueError(f"compatible_states[{i}] is not compatible ({verdict.kind.value})")
        if eigenvalue is None:
            eigenvalue = verdict.eigenvalue
        elif verdict.eigenvalue != eigenvalue:
            raise ValueError(
                f"compatible_states[{i}] maps to eigenvalue {verdict.eigenvalue}, expected {eigenvalue}")
    weight = eigenspace_weight(setup, weights, compatible_states, eigenvalue)
    return abs(weight - 1.0) <= atol
