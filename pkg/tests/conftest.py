import math

import numpy as np
import pytest

from qcompat import (
    BipartiteSplit,
    MeasurementSetup,
    Observable,
    PointerAssignment,
    StateVector,
    controlled_flip_setup,
    haar_random_unitary,
    product_setup,
)

SQRT_HALF = 1 / math.sqrt(2)
SIGMA_X = np.array([[0, 1], [1, 0]], dtype=complex)
SIGMA_Z = np.diag([1.0, -1.0]).astype(complex)
HADAMARD = np.array([[1, 1], [1, -1]], dtype=complex) * SQRT_HALF


def ket(*amps):
    return StateVector(np.array(amps, dtype=complex))


def random_state_array(rng, dim):
    v = rng.standard_normal(dim) + 1j * rng.standard_normal(dim)
    return v / np.linalg.norm(v)


def random_hermitian(rng, dim):
    a = rng.standard_normal((dim, dim)) + 1j * rng.standard_normal((dim, dim))
    return (a + a.conj().T) / 2


def random_density(rng, dim, rank=None):
    rank = dim if rank is None else rank
    a = rng.standard_normal((dim, rank)) + 1j * rng.standard_normal((dim, rank))
    rho = a @ a.conj().T
    return rho / np.trace(rho)


@pytest.fixture
def rng():
    return np.random.default_rng(20240611)


@pytest.fixture
def flip_setup():
    return controlled_flip_setup()


@pytest.fixture
def identity_setup():
    """No interaction, trivial observable: every state is compatible."""
    return product_setup(haar_random_unitary(2, 5).matrix, np.eye(2), [1, 0], np.eye(2))


def nondegenerate_observable(rng, dim):
    q = haar_random_unitary(dim, rng).matrix
    vals = np.sort(rng.uniform(-3, 3, dim))
    while np.min(np.diff(vals)) < 0.1:
        vals = np.sort(rng.uniform(-3, 3, dim))
    return Observable.from_matrix(q @ np.diag(vals) @ q.conj().T)


def standard_pointers(dim_mu, dim_psi):
    return PointerAssignment(
        ready=StateVector.basis(dim_mu, 0),
        pointers=tuple(StateVector.basis(dim_mu, i) for i in range(dim_psi)),
    )


def split(a, b):
    return BipartiteSplit(a, b)


def degenerate_setup(rng, dim_mu, multiplicities):
    """Random setup that leaves every eigenspace of a degenerate observable invariant.

    ``U = sum_c V_c (x) W_c P_c`` with Haar ``V_c`` on the apparatus and a Haar
    rotation ``W_c`` inside eigenspace ``c``. Returns ``(setup, bases)`` where
    ``bases[c]`` holds an orthonormal basis of eigenspace ``c`` as columns.
    """
    dim = sum(multiplicities)
    q = haar_random_unitary(dim, rng).matrix
    vals = np.repeat(np.arange(len(multiplicities), dtype=float), multiplicities)
    observable = Observable.from_matrix(q @ np.diag(vals) @ q.conj().T)
    U = np.zeros((dim_mu * dim, dim_mu * dim), dtype=complex)
    bases, start = [], 0
    for m in multiplicities:
        block = q[:, start:start + m]
        start += m
        W = block @ haar_random_unitary(m, rng).matrix @ block.conj().T
        U += np.kron(haar_random_unitary(dim_mu, rng).matrix, W)
        bases.append(block)
    ready = StateVector.basis(dim_mu, 0)
    setup = MeasurementSetup(BipartiteSplit(dim_mu, dim), ready, observable, U)
    return setup, bases
