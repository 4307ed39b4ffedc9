import math

import numpy as np
import pytest

from qcompat import (
    BipartiteSplit,
    DensityMatrix,
    Observable,
    StateVector,
    UnitaryOperator,
    apply_unitary,
    born_measure,
    decohere,
    evolve_density,
    haar_random_state,
    haar_random_unitary,
    is_product,
    partial_trace,
    schmidt,
    spectral_decompose,
    tensor,
    tensor_op,
)
from qcompat.qcore import born_probabilities

from conftest import HADAMARD, SIGMA_X, SIGMA_Z, SQRT_HALF, ket, random_density, random_state_array

BELL = ket(SQRT_HALF, 0, 0, SQRT_HALF)
QUBITS = BipartiteSplit(2, 2)


def naive_kron_vec(a, b):
    out = []
    for x in a:
        for y in b:
            out.append(x * y)
    return np.array(out)


def naive_partial_trace(rho, dl, dr, keep):
    if keep == "right":
        out = np.zeros((dr, dr), dtype=complex)
        for j in range(dr):
            for k in range(dr):
                for i in range(dl):
                    out[j, k] += rho[i * dr + j, i * dr + k]
    else:
        out = np.zeros((dl, dl), dtype=complex)
        for i in range(dl):
            for k in range(dl):
                for j in range(dr):
                    out[i, k] += rho[i * dr + j, k * dr + j]
    return out


class TestStateVector:
    def test_rejects_unnormalized(self):
        with pytest.raises(ValueError, match="not normalized"):
            StateVector([1, 1])

    def test_normalized_constructor(self):
        np.testing.assert_allclose(StateVector.normalized([1, 1]).amplitudes, [SQRT_HALF, SQRT_HALF])

    def test_immutable(self):
        s = ket(1, 0)
        with pytest.raises(ValueError):
            s.amplitudes[0] = 0

    def test_input_is_copied(self):
        raw = np.array([1, 0], dtype=complex)
        s = StateVector(raw)
        raw[0] = 5
        assert s.amplitudes[0] == 1

    def test_rejects_nan(self):
        with pytest.raises(ValueError):
            StateVector([np.nan, 1])

    def test_same_ray_ignores_global_phase(self):
        a = ket(0.6, 0.8j)
        b = StateVector(np.exp(0.7j) * a.amplitudes)
        assert a.same_ray(b)
        assert not a.same_ray(ket(0.8, 0.6j))


class TestTensor:
    def test_basis_product(self):
        np.testing.assert_array_equal(tensor(ket(1, 0), ket(1, 0)).amplitudes, [1, 0, 0, 0])

    def test_linearity(self):
        out = tensor(ket(1, 0), ket(SQRT_HALF, SQRT_HALF))
        np.testing.assert_allclose(out.amplitudes, [SQRT_HALF, SQRT_HALF, 0, 0])

    def test_plus_times_one(self):
        a, b = ket(SQRT_HALF, SQRT_HALF), ket(0, 1)
        out = tensor(a, b).amplitudes
        np.testing.assert_allclose(out, [0, SQRT_HALF, 0, SQRT_HALF])
        np.testing.assert_allclose(out, naive_kron_vec(a.amplitudes, b.amplitudes))

    def test_index_formula_random(self, rng):
        for da, db in [(2, 3), (3, 2), (4, 1), (1, 5)]:
            a = StateVector(random_state_array(rng, da))
            b = StateVector(random_state_array(rng, db))
            out = tensor(a, b)
            assert out.dim == da * db
            for i in range(da):
                for j in range(db):
                    assert abs(out.amplitudes[i * db + j] - a.amplitudes[i] * b.amplitudes[j]) <= 1e-15


class TestTensorOp:
    def test_identity(self):
        np.testing.assert_array_equal(tensor_op(np.eye(2), np.eye(2)).matrix, np.eye(4))

    def test_sigma_z_identity(self):
        # hand expansion: [[1*I, 0], [0, -1*I]]
        np.testing.assert_array_equal(tensor_op(SIGMA_Z, np.eye(2)).matrix, np.diag([1, 1, -1, -1]))

    def test_mixed_product_property(self, rng):
        for _ in range(20):
            A = rng.standard_normal((2, 2)) + 1j * rng.standard_normal((2, 2))
            B = rng.standard_normal((3, 3)) + 1j * rng.standard_normal((3, 3))
            a, b = random_state_array(rng, 2), random_state_array(rng, 3)
            lhs = tensor_op(A, B).matrix @ naive_kron_vec(a, b)
            rhs = naive_kron_vec(A @ a, B @ b)
            assert np.max(np.abs(lhs - rhs)) <= 1e-12


class TestApplyUnitary:
    def test_identity(self):
        psi = ket(0.6, 0.8j)
        np.testing.assert_array_equal(apply_unitary(UnitaryOperator.identity(2), psi).amplitudes, psi.amplitudes)

    def test_hadamard_on_zero(self):
        out = apply_unitary(UnitaryOperator(HADAMARD), ket(1, 0))
        np.testing.assert_allclose(out.amplitudes, [SQRT_HALF, SQRT_HALF], atol=1e-15)

    def test_norm_preserved(self, rng):
        for k in range(50):
            dim = int(rng.integers(2, 9))
            U = haar_random_unitary(dim, k)
            psi = StateVector(random_state_array(rng, dim))
            assert abs(np.linalg.norm(apply_unitary(U, psi).amplitudes) - 1) <= 1e-12

    def test_dimension_mismatch(self):
        with pytest.raises(ValueError, match="dimension mismatch"):
            apply_unitary(UnitaryOperator.identity(3), ket(1, 0))

    def test_rejects_non_unitary(self):
        with pytest.raises(ValueError, match="not unitary"):
            UnitaryOperator([[1, 1], [0, 1]])

    def test_composition_tolerance(self, rng):
        U, V = haar_random_unitary(4, 1), haar_random_unitary(4, 2)
        assert U.compose(V).unitarity_error() <= 2e-9


class TestEvolveDensity:
    def test_maximally_mixed_invariant(self):
        U = haar_random_unitary(3, 11)
        out = evolve_density(U, DensityMatrix.maximally_mixed(3))
        np.testing.assert_allclose(out.matrix, np.eye(3) / 3, atol=1e-12)

    def test_pure_state_matches_outer_product(self, rng):
        for k in range(10):
            U = haar_random_unitary(4, k)
            psi = random_state_array(rng, 4)
            out = evolve_density(U, DensityMatrix.from_state(psi))
            phi = U.matrix @ psi
            np.testing.assert_allclose(out.matrix, np.outer(phi, phi.conj()), atol=1e-12)

    def test_trace_and_spectrum_preserved(self, rng):
        for k in range(50):
            dim = int(rng.integers(2, 6))
            rho = DensityMatrix(random_density(rng, dim))
            out = evolve_density(haar_random_unitary(dim, k), rho)
            assert abs(np.trace(out.matrix) - 1) <= 1e-10
            np.testing.assert_allclose(out.eigenvalues(), rho.eigenvalues(), atol=1e-10)

    def test_dimension_mismatch(self):
        with pytest.raises(ValueError):
            evolve_density(UnitaryOperator.identity(2), DensityMatrix.maximally_mixed(3))


class TestSpectralDecompose:
    def test_sigma_z(self):
        obs = spectral_decompose(SIGMA_Z)
        assert [(c.eigenvalue, c.multiplicity) for c in obs.spectrum] == [(-1.0, 1), (1.0, 1)]

    def test_identity_merges(self):
        obs = spectral_decompose(np.eye(3))
        assert len(obs.spectrum) == 1
        c = obs.spectrum[0]
        assert c.eigenvalue == pytest.approx(1.0)
        assert c.multiplicity == 3
        np.testing.assert_allclose(c.projector, np.eye(3), atol=1e-12)

    def test_sigma_x(self):
        # characteristic polynomial l^2 - 1: eigenvalues -1, +1 with |->, |+>
        obs = spectral_decompose(SIGMA_X)
        minus, plus = obs.spectrum
        assert minus.eigenvalue == pytest.approx(-1, abs=1e-12)
        assert plus.eigenvalue == pytest.approx(1, abs=1e-12)
        np.testing.assert_allclose(plus.projector, 0.5 * np.array([[1, 1], [1, 1]]), atol=1e-12)
        np.testing.assert_allclose(minus.projector, 0.5 * np.array([[1, -1], [-1, 1]]), atol=1e-12)

    def test_near_degenerate_clustered(self):
        obs = spectral_decompose(np.diag([0.0, 1.0, 1.0 + 5e-9, 2.0]))
        assert [c.multiplicity for c in obs.spectrum] == [1, 2, 1]

    def test_projectors_resolve_identity(self, rng):
        q = haar_random_unitary(5, 3).matrix
        obs = spectral_decompose(q @ np.diag([1, 1, 2, 3, 3.0]) @ q.conj().T)
        total = sum(c.projector for c in obs.spectrum)
        np.testing.assert_allclose(total, np.eye(5), atol=1e-12)
        for c in obs.spectrum:
            np.testing.assert_allclose(c.projector @ c.projector, c.projector, atol=1e-12)
        assert np.all(np.diff(obs.eigenvalues) > 1e-8)

    def test_non_hermitian_rejected(self):
        with pytest.raises(ValueError, match="not Hermitian"):
            spectral_decompose([[0, 1], [0, 0]])

    def test_eigenbasis_order_for_diagonal(self):
        basis = Observable.from_matrix(np.diag([2.0, -1.0, 0.5])).eigenbasis()
        assert [v for v, _ in basis] == [2.0, -1.0, 0.5]
        for i, (_, vec) in enumerate(basis):
            np.testing.assert_allclose(vec.amplitudes, np.eye(3)[i])


class TestSchmidt:
    def test_product(self):
        dec = schmidt(tensor(ket(1, 0), ket(0, 1)), QUBITS)
        np.testing.assert_allclose(dec.coefficients, [1, 0], atol=1e-15)
        assert dec.rank == 1

    def test_bell(self):
        np.testing.assert_allclose(schmidt(BELL, QUBITS).coefficients, [SQRT_HALF, SQRT_HALF])

    def test_unequal_weights(self):
        psi = ket(math.sqrt(0.8), 0, 0, math.sqrt(0.2))
        dec = schmidt(psi, QUBITS)
        np.testing.assert_allclose(dec.coefficients, [math.sqrt(0.8), math.sqrt(0.2)], atol=1e-15)
        np.testing.assert_allclose(dec.reconstruct(), psi.amplitudes, atol=1e-15)

    def test_rectangular_reconstruction(self, rng):
        psi = StateVector(random_state_array(rng, 12))
        dec = schmidt(psi, BipartiteSplit(3, 4))
        assert dec.coefficients.size == 3
        assert np.all(np.diff(dec.coefficients) <= 0)
        assert abs(np.sum(dec.coefficients ** 2) - 1) <= 1e-12
        np.testing.assert_allclose(dec.reconstruct(), psi.amplitudes, atol=1e-12)

    def test_dimension_mismatch(self):
        with pytest.raises(ValueError):
            schmidt(BELL, BipartiteSplit(3, 2))


class TestIsProduct:
    def test_factors(self):
        left, right = is_product(tensor(ket(1, 0), ket(SQRT_HALF, SQRT_HALF)), QUBITS)
        assert left.same_ray(ket(1, 0))
        assert right.same_ray(ket(SQRT_HALF, SQRT_HALF))

    def test_bell_is_not(self):
        assert is_product(BELL, QUBITS) is None

    def test_small_entangling_perturbation(self):
        prod = np.kron([1, 0], [SQRT_HALF, SQRT_HALF])
        raw = 0.999 * prod + 0.001 * BELL.amplitudes
        psi = StateVector.normalized(raw)
        second = schmidt(psi, QUBITS).coefficients[1]
        assert second > 1e-6
        assert is_product(psi, QUBITS, tol_product=1e-6) is None

    def test_phase_convention_and_accuracy(self, rng):
        a, b = random_state_array(rng, 3), random_state_array(rng, 2)
        psi = StateVector(np.exp(1.3j) * np.kron(a, b))
        left, right = is_product(psi, BipartiteSplit(3, 2))
        assert right.amplitudes[0].imag == pytest.approx(0, abs=1e-15)
        assert right.amplitudes[0].real > 0
        assert np.linalg.norm(psi.amplitudes - np.kron(left.amplitudes, right.amplitudes)) <= 2e-7


class TestPartialTrace:
    def test_bell_reduction(self):
        out = partial_trace(DensityMatrix.from_state(BELL), QUBITS, keep="right")
        np.testing.assert_allclose(out.matrix, np.eye(2) / 2, atol=1e-15)

    def test_product_factor(self, rng):
        rho_b = random_density(rng, 3)
        rho = DensityMatrix(np.kron(np.diag([1.0, 0.0]), rho_b))
        out = partial_trace(rho, BipartiteSplit(2, 3), keep="right")
        assert np.max(np.abs(out.matrix - rho_b)) <= 1e-12

    def test_against_loop_oracle(self, rng):
        rho = random_density(rng, 6)
        for keep, dl, dr in [("right", 2, 3), ("left", 2, 3), ("right", 3, 2)]:
            out = partial_trace(DensityMatrix(rho), BipartiteSplit(dl, dr), keep=keep)
            np.testing.assert_allclose(out.matrix, naive_partial_trace(rho, dl, dr, keep), atol=1e-14)

    def test_reduced_spectra_agree(self, rng):
        psi = random_state_array(rng, 12)
        rho = DensityMatrix.from_state(psi)
        sp = BipartiteSplit(3, 4)
        left = np.sort(partial_trace(rho, sp, "left").eigenvalues())[::-1]
        right = np.sort(partial_trace(rho, sp, "right").eigenvalues())[::-1]
        np.testing.assert_allclose(left, right[:3], atol=1e-10)
        np.testing.assert_allclose(right[3:], 0, atol=1e-10)

    def test_bad_keep(self):
        with pytest.raises(ValueError):
            partial_trace(DensityMatrix.from_state(BELL), QUBITS, keep="middle")


class TestBornMeasure:
    sigma_z = Observable.from_matrix(SIGMA_Z)

    def test_eigenstate_is_fixed(self):
        val, post, p = born_measure(ket(1, 0), self.sigma_z, 0)
        assert val == 1.0 and p == pytest.approx(1.0)
        assert post.same_ray(ket(1, 0))

    def test_equal_superposition(self):
        probs = born_probabilities(ket(SQRT_HALF, SQRT_HALF), self.sigma_z)
        np.testing.assert_allclose(probs, [0.5, 0.5], atol=1e-15)

    def test_unequal_weights(self):
        probs = born_probabilities(ket(math.sqrt(0.8), math.sqrt(0.2)), self.sigma_z)
        # spectrum order is (-1, +1)
        assert abs(probs[1] - 0.8) <= 1e-12
        assert abs(probs.sum() - 1) <= 1e-12

    def test_post_state_is_projection(self):
        psi = ket(math.sqrt(0.8), math.sqrt(0.2))
        for seed in range(20):
            val, post, p = born_measure(psi, self.sigma_z, seed)
            expected = ket(1, 0) if val == 1.0 else ket(0, 1)
            assert post.same_ray(expected)
            assert p == pytest.approx(0.8 if val == 1.0 else 0.2)

    def test_deterministic_given_seed(self):
        psi = haar_random_state(4, 3)
        obs = Observable.from_matrix(np.diag([0.0, 1.0, 2.0, 3.0]))
        runs = [born_measure(psi, obs, 99) for _ in range(3)]
        assert len({r[0] for r in runs}) == 1
        assert all(np.array_equal(r[1].amplitudes, runs[0][1].amplitudes) for r in runs)

    def test_frequencies(self):
        psi = ket(math.sqrt(0.8), math.sqrt(0.2))
        rng = np.random.default_rng(4)
        hits = sum(born_measure(psi, self.sigma_z, rng)[0] == 1.0 for _ in range(4000))
        assert abs(hits / 4000 - 0.8) < 4 * math.sqrt(0.16 / 4000)

    def test_negligible_outcome_never_returned(self):
        psi = StateVector.normalized([1, 1e-8])
        rng = np.random.default_rng(0)
        assert all(born_measure(psi, self.sigma_z, rng)[0] == 1.0 for _ in range(200))


class TestDecohere:
    sigma_z = Observable.from_matrix(SIGMA_Z)

    def test_fixed_point(self):
        rho = DensityMatrix(np.diag([0.3, 0.7]))
        np.testing.assert_allclose(decohere(rho, self.sigma_z).matrix, rho.matrix, atol=1e-12)

    def test_full_dephasing(self):
        rho = DensityMatrix.from_state(ket(SQRT_HALF, SQRT_HALF))
        np.testing.assert_allclose(decohere(rho, self.sigma_z).matrix, np.eye(2) / 2, atol=1e-15)

    def test_idempotent_and_commutes(self, rng):
        q = haar_random_unitary(4, 8).matrix
        obs = Observable.from_matrix(q @ np.diag([0, 1, 1, 2.0]) @ q.conj().T)
        for _ in range(10):
            rho = DensityMatrix(random_density(rng, 4))
            once = decohere(rho, obs)
            twice = decohere(once, obs)
            np.testing.assert_allclose(twice.matrix, once.matrix, atol=1e-12)
            comm = obs.matrix @ once.matrix - once.matrix @ obs.matrix
            assert np.max(np.abs(comm)) <= 1e-10
            weights = [np.real(np.trace(c.projector @ rho.matrix)) for c in obs.spectrum]
            kept = [np.real(np.trace(c.projector @ once.matrix)) for c in obs.spectrum]
            np.testing.assert_allclose(kept, weights, atol=1e-12)

    def test_dimension_mismatch(self):
        with pytest.raises(ValueError):
            decohere(DensityMatrix.maximally_mixed(3), self.sigma_z)


class TestDensityMatrix:
    def test_rejects_bad_trace(self):
        with pytest.raises(ValueError, match="trace"):
            DensityMatrix(np.eye(2))

    def test_rejects_negative(self):
        with pytest.raises(ValueError, match="negative"):
            DensityMatrix(np.diag([1.5, -0.5]))

    def test_mixture(self):
        rho = DensityMatrix.mixture([0.25, 0.75], [ket(1, 0), ket(0, 1)])
        np.testing.assert_allclose(rho.matrix, np.diag([0.25, 0.75]))
