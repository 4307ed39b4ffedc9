"""Mach-Zehnder delayed-choice interferometer and the setting-entangled ensemble state.

Path basis is ``{|A>, |B>}``. The photon enters in ``|A>``, passes a balanced
beamsplitter, picks up a phase on arm B, and is recombined by a second
beamsplitter only in the both-ways setting.
"""
from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Iterable

import numpy as np

from ._validation import DEFAULT_TOLERANCES, make_rng
from .measure_model import MeasurementSetup, PointerAssignment, von_neumann_unitary
from .qcore import (
    BipartiteSplit,
    Observable,
    StateVector,
    UnitaryOperator,
    apply_unitary,
    born_probabilities,
)

__all__ = [
    "BEAMSPLITTER",
    "InterferometerConfig",
    "DetectionRecord",
    "EnsembleState",
    "phase_gate",
    "mz_amplitudes",
    "mz_probabilities",
    "mz_probability_sweep",
    "mz_sample",
    "build_ensemble_state",
    "ensemble_branch_probabilities",
    "which_way_detector",
]

PATH_A = 0
PATH_B = 1

# Apparatus basis for the ensemble state.
BOTH_WAYS = 0
WHICH_WAY_A = 1
WHICH_WAY_B = 2

# Real, self-inverse balanced mixer: |A> -> (|A>+|B>)/sqrt2, |B> -> (|A>-|B>)/sqrt2.
BEAMSPLITTER = UnitaryOperator(np.array([[1.0, 1.0], [1.0, -1.0]]) / math.sqrt(2))


def phase_gate(phase: float) -> UnitaryOperator:
    return UnitaryOperator(np.diag([1.0, np.exp(1j * phase)]))


@dataclass(frozen=True)
class InterferometerConfig:
    """Phase on arm B (radians, stored in [0, 2pi)) and whether the second beamsplitter is in place."""

    phase: float = 0.0
    second_beamsplitter: bool = True

    def __post_init__(self):
        if not math.isfinite(self.phase):
            raise ValueError(f"phase must be finite, got {self.phase!r}")
        object.__setattr__(self, "phase", float(self.phase) % (2 * math.pi))
        object.__setattr__(self, "second_beamsplitter", bool(self.second_beamsplitter))

    @property
    def setting(self) -> str:
        return "both_ways" if self.second_beamsplitter else "which_way"


@dataclass(frozen=True)
class DetectionRecord:
    shots: int
    counts_A: int
    counts_B: int
    analytic_pA: float
    analytic_pB: float

    def __post_init__(self):
        if self.counts_A + self.counts_B != self.shots:
            raise ValueError("counts must add up to the number of shots")
        if abs(self.analytic_pA + self.analytic_pB - 1.0) > 1e-12:
            raise ValueError("analytic probabilities must sum to one")


@dataclass(frozen=True, eq=False)
class EnsembleState:
    """Joint apparatus-setting (dim 3) times path (dim 2) state."""

    alpha: complex
    beta: complex
    joint: StateVector

    @property
    def split(self) -> BipartiteSplit:
        return BipartiteSplit(3, 2)


def mz_amplitudes(config: InterferometerConfig) -> tuple[complex, complex]:
    """Final path amplitudes, obtained by composing the gate matrices."""
    psi = StateVector.basis(2, PATH_A)
    psi = apply_unitary(BEAMSPLITTER, psi)
    psi = apply_unitary(phase_gate(config.phase), psi)
    if config.second_beamsplitter:
        psi = apply_unitary(BEAMSPLITTER, psi)
    amp_a, amp_b = psi.amplitudes
    return complex(amp_a), complex(amp_b)


def mz_probabilities(config: InterferometerConfig) -> tuple[float, float]:
    """Detection probabilities at A and B, renormalized to sum to one exactly."""
    amp_a, amp_b = mz_amplitudes(config)
    w = np.array([abs(amp_a) ** 2, abs(amp_b) ** 2])
    w = w / w.sum()
    return float(w[0]), float(w[1])


def mz_probability_sweep(phases: Iterable[float], setting: bool) -> list[tuple[float, float]]:
    """``(phase, p_A)`` for each phase, with ``setting`` True for both-ways."""
    return [(float(phi), mz_probabilities(InterferometerConfig(phi, setting))[0]) for phi in phases]


def mz_sample(config: InterferometerConfig, shots: int, seed) -> DetectionRecord:
    """Binomial detector counts for ``shots`` photons."""
    if shots < 0:
        raise ValueError("shots must be non-negative")
    p_a, p_b = mz_probabilities(config)
    counts_a = int(make_rng(seed).binomial(shots, p_a))
    return DetectionRecord(shots, counts_a, shots - counts_a, p_a, p_b)


def build_ensemble_state(alpha: complex, beta: complex, *,
                         tol_norm: float = DEFAULT_TOLERANCES.tol_norm) -> EnsembleState:
    """Superposition over which measurement setting is in place.

    ``alpha |BW>|both-ways> + beta/sqrt2 |WW_A>|A> + beta/sqrt2 |WW_B>|B>`` with
    ``|both-ways> = (|A>+|B>)/sqrt2``; the two which-way apparatus kets are
    treated as distinct orthogonal pointer states.
    """
    alpha, beta = complex(alpha), complex(beta)
    norm = math.sqrt(abs(alpha) ** 2 + abs(beta) ** 2)
    if abs(norm - 1.0) > tol_norm:
        raise ValueError(f"|alpha|^2 + |beta|^2 must be 1, got {norm ** 2!r}")
    alpha, beta = alpha / norm, beta / norm
    both_ways = np.array([1.0, 1.0]) / math.sqrt(2)
    amps = np.zeros((3, 2), dtype=complex)
    amps[BOTH_WAYS] = alpha * both_ways
    amps[WHICH_WAY_A, PATH_A] = beta / math.sqrt(2)
    amps[WHICH_WAY_B, PATH_B] = beta / math.sqrt(2)
    return EnsembleState(alpha, beta, StateVector(amps.reshape(-1)))


def ensemble_branch_probabilities(e: EnsembleState) -> tuple[float, float]:
    """Born probabilities of the both-ways and which-way apparatus settings."""
    setting = Observable.from_matrix(np.kron(np.diag([1.0, 0.0, 0.0]), np.eye(2)))
    p_which, p_both = born_probabilities(e.joint, setting)  # eigenvalues 0 < 1
    return float(p_both), float(p_which)


def which_way_detector() -> MeasurementSetup:
    """Path-recording apparatus: a controlled flip of a detector qubit, eigenbasis ``(|A>, |B>)``."""
    path = Observable.from_matrix(np.diag([1.0, -1.0]))
    assignment = PointerAssignment(
        ready=StateVector.basis(2, 0),
        pointers=(StateVector.basis(2, 0), StateVector.basis(2, 1)),
        eigenbasis=(StateVector.basis(2, PATH_A), StateVector.basis(2, PATH_B)),
    )
    return von_neumann_unitary(path, assignment, BipartiteSplit(2, 2))
