import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from mixedorder.channels import (
    KrausChannel,
    LocalGate,
    SymmetrySpec,
    apply,
    beta_weight,
    channel_from_json,
    check_strong_symmetry,
    compose,
    effective_beta,
    general_ising_channel,
    random_local_channel,
    site_x_dephasing,
    theta_channel,
    zz_dephasing,
)
from mixedorder.densmat import DensityMatrix, PauliString, random_density_matrix, random_unitary
from mixedorder.diagnostics import fidelity
from mixedorder.errors import BadProbability, BadWeights, CompletenessViolated, DimensionMismatch
from mixedorder.lattice import LatticeSpec
from mixedorder.models import state_ghz, state_plus_product


def dense_action(kraus, m):
    return sum(k @ m @ k.conj().T for k in kraus)


def completeness_error(ch):
    ops = ch.full_kraus()
    return np.max(np.abs(sum(k.conj().T @ k for k in ops) - np.eye(ops[0].shape[0])))


class TestZZDephasing:
    def test_zero_is_identity(self, rng):
        rho = random_density_matrix(3, rng)
        assert np.allclose(apply(zz_dephasing(3, None, 0.0), rho).mat, rho.mat)

    def test_half_on_plus_pair(self):
        out = apply(zz_dephasing(2, None, 0.5), state_plus_product(2))
        zz = PauliString.from_map(2, {0: "Z", 1: "Z"}).to_dense()
        x0 = PauliString.from_map(2, {0: "X"}).to_dense()
        assert abs(np.trace(out.mat @ zz)) < 1e-14
        # |++> is an X eigenstate and the channel commutes with X_0 X_1, not X_0 alone
        assert abs(np.trace(out.mat @ x0)) < 1e-14

    @given(p=st.floats(0, 1), q=st.floats(0, 1), seed=st.integers(0, 2**32 - 1))
    @settings(max_examples=30)
    def test_composition_rule(self, p, q, seed):
        rho = random_density_matrix(2, np.random.default_rng(seed))
        two = apply(zz_dephasing(2, None, q), apply(zz_dephasing(2, None, p), rho))
        one = apply(zz_dephasing(2, None, p + q - 2 * p * q), rho)
        assert np.allclose(two.mat, one.mat, atol=1e-12)

    def test_bad_probability(self):
        with pytest.raises(BadProbability):
            zz_dephasing(2, None, 1.5)

    def test_square_lattice_bond_count(self):
        ch = zz_dephasing(6, LatticeSpec.square(3, 2), 0.1)
        assert len(ch.gates) == 7

    @pytest.mark.parametrize("p", [0.0, 0.1, 0.5, 1.0])
    def test_completeness(self, p):
        assert completeness_error(zz_dephasing(3, None, p)) <= 1e-10


class TestThetaChannels:
    @pytest.mark.parametrize("p", [0.05, 0.3, 0.7])
    def test_pi_half_is_pauli(self, p, rng):
        rho = random_density_matrix(2, rng)
        a = apply(theta_channel(2, None, p, np.pi / 2), rho).mat
        b = apply(zz_dephasing(2, None, p), rho).mat
        assert np.max(np.abs(a - b)) <= 1e-12

    def test_zero_angle_is_identity(self, rng):
        rho = random_density_matrix(2, rng)
        assert np.allclose(apply(theta_channel(2, None, 0.3, 0.0), rho).mat, rho.mat, atol=1e-14)

    @given(p=st.floats(0, 1), theta=st.floats(-np.pi, np.pi))
    def test_beta_weight_modulus(self, p, theta):
        assert abs(abs(beta_weight(p, theta)) - np.sqrt(1 - 4 * p * (1 - p) * np.sin(theta) ** 2)) < 1e-12

    def test_single_term_is_unitary(self, rng):
        ch = general_ising_channel(2, None, [(1.0, 0.4)])
        rho = random_density_matrix(2, rng)
        assert np.allclose(apply(ch, rho).eigenvalues, rho.eigenvalues, atol=1e-12)

    def test_two_terms_reproduce_theta(self, rng):
        rho = random_density_matrix(2, rng)
        a = apply(general_ising_channel(2, None, [(0.7, 0.0), (0.3, 0.9)]), rho).mat
        b = apply(theta_channel(2, None, 0.3, 0.9), rho).mat
        assert np.allclose(a, b, atol=1e-13)

    def test_effective_beta_is_coherence_damping(self):
        weights = [(0.5, 0.2), (0.3, 1.1), (0.2, -0.4)]
        psi = np.zeros(4)
        psi[1] = psi[2] = 1 / np.sqrt(2)
        rho = DensityMatrix.from_pure(np.ones(4) / 2)
        out = apply(general_ising_channel(2, None, weights), rho).mat
        # |00> (ZZ=+1) and |01> (ZZ=-1) coherence picks up sum_n p_n e^{2i theta_n}
        assert abs(abs(out[0, 1]) / abs(rho.mat[0, 1]) - effective_beta(weights)) < 1e-13

    def test_bad_weights(self):
        with pytest.raises(BadWeights):
            general_ising_channel(2, None, [(0.5, 0.1), (0.4, 0.2)])


class TestSiteXDephasing:
    def test_zero_is_identity(self, rng):
        rho = random_density_matrix(2, rng)
        assert np.allclose(apply(site_x_dephasing(2, 0.0), rho).mat, rho.mat)

    @pytest.mark.parametrize("n", [3, 5])
    def test_ghz_goes_to_one_plus_x(self, n):
        out = apply(site_x_dephasing(n, 0.5), state_ghz(n)).mat
        ref = (np.eye(2**n) + PauliString.global_x(n).to_dense()) / 2**n
        assert np.max(np.abs(out - ref)) < 1e-14

    def test_partial_sites(self):
        ch = site_x_dephasing(4, 0.5, [1, 3])
        assert ch.support == (1, 3)


class TestApply:
    def test_identity(self, rng):
        rho = random_density_matrix(3, rng)
        assert np.allclose(apply(KrausChannel.identity(3), rho).mat, rho.mat)

    def test_unitary_preserves_spectrum(self, rng):
        u = random_unitary(4, rng)
        ch = KrausChannel(3, (LocalGate((0, 2), (u,)),))
        rho = random_density_matrix(3, rng)
        assert np.allclose(apply(ch, rho).eigenvalues, rho.eigenvalues, atol=1e-12)

    def test_dimension_mismatch(self, rng):
        with pytest.raises(DimensionMismatch):
            apply(zz_dephasing(3, None, 0.1), random_density_matrix(2, rng))

    def test_incomplete_kraus_rejected(self):
        with pytest.raises(CompletenessViolated):
            LocalGate((0,), (0.5 * np.eye(2),))

    def test_local_gate_matches_dense(self, rng):
        ch = random_local_channel(3, [2, 0], rng, n_kraus=3)
        rho = random_density_matrix(3, rng)
        assert np.allclose(apply(ch, rho).mat, dense_action(ch.full_kraus(), rho.mat), atol=1e-13)

    @given(seed=st.integers(0, 2**32 - 1), p=st.floats(0, 1))
    @settings(max_examples=30)
    def test_unital_purity_does_not_increase(self, seed, p):
        rng = np.random.default_rng(seed)
        rho = random_density_matrix(3, rng)
        for ch in (zz_dephasing(3, None, p), site_x_dephasing(3, p), theta_channel(3, None, p, 0.7)):
            assert apply(ch, rho).purity() <= rho.purity() + 1e-12

    @given(seed=st.integers(0, 2**32 - 1), p=st.floats(0, 1))
    @settings(max_examples=30)
    def test_fidelity_data_processing(self, seed, p):
        rng = np.random.default_rng(seed)
        r, s = random_density_matrix(3, rng), random_density_matrix(3, rng)
        for ch in (zz_dephasing(3, None, p), theta_channel(3, None, p, 0.4), random_local_channel(3, [1], rng)):
            assert fidelity(r, s) <= fidelity(apply(ch, r), apply(ch, s)) + 1e-9


class TestSymmetry:
    @pytest.mark.parametrize("p", [0.0, 0.2, 0.5, 1.0])
    def test_zz_is_strongly_symmetric(self, p):
        ok, worst = check_strong_symmetry(zz_dephasing(4, None, p), SymmetrySpec.z2(4))
        assert ok and worst <= 1e-10

    def test_single_z_breaks(self):
        ch = KrausChannel(3, (LocalGate((0,), (np.diag([1.0, -1.0]),)),))
        ok, worst = check_strong_symmetry(ch, SymmetrySpec.z2(3))
        assert not ok and worst > 1

    @pytest.mark.parametrize("theta", [0.1, 0.9, 2.5])
    def test_theta_channel_symmetric(self, theta):
        assert check_strong_symmetry(theta_channel(3, None, 0.3, theta), SymmetrySpec.z2(3))[0]

    def test_symmetric_channel_keeps_strong_symmetry(self):
        rho = apply(zz_dephasing(4, None, 0.3), state_plus_product(4))
        u = PauliString.global_x(4).to_dense()
        assert np.max(np.abs(u @ rho.mat - rho.mat)) <= 1e-10

    def test_generator_order_checked(self):
        with pytest.raises(ValueError):
            SymmetrySpec(PauliString.from_map(2, {0: "X"}, phase=1j), 2)


class TestCompose:
    def test_identity_left(self, rng):
        c = random_local_channel(2, [0, 1], rng)
        rho = random_density_matrix(2, rng)
        assert np.allclose(apply(compose(KrausChannel.identity(2), c), rho).mat, apply(c, rho).mat)

    @given(p=st.floats(0, 1), q=st.floats(0, 1), seed=st.integers(0, 2**32 - 1))
    @settings(max_examples=20)
    def test_zz_composition(self, p, q, seed):
        rho = random_density_matrix(3, np.random.default_rng(seed))
        a = apply(compose(zz_dephasing(3, None, p), zz_dephasing(3, None, q)), rho).mat
        b = apply(zz_dephasing(3, None, p + q - 2 * p * q), rho).mat
        assert np.allclose(a, b, atol=1e-12)

    def test_kraus_count_multiplies_without_pruning(self, rng):
        a = random_local_channel(2, [0], rng, n_kraus=2)
        b = random_local_channel(2, [1], rng, n_kraus=3)
        assert compose(a, b, prune=False).n_kraus == 6
        assert completeness_error(compose(a, b, prune=False)) <= 1e-10

    def test_pauli_pruning_exact(self, rng):
        c = compose(zz_dephasing(2, None, 0.2), zz_dephasing(2, None, 0.3))
        assert c.n_kraus == 2

    def test_size_mismatch(self):
        with pytest.raises(DimensionMismatch):
            compose(zz_dephasing(2, None, 0.1), zz_dephasing(3, None, 0.1))


def test_json_roundtrip(rng):
    rho = random_density_matrix(4, rng)
    lat = LatticeSpec.square(2, 2)
    for ch in (zz_dephasing(4, lat, 0.2), theta_channel(4, lat, 0.2, 0.3), site_x_dephasing(4, 0.4, [1, 2]),
               general_ising_channel(4, lat, [(0.6, 0.1), (0.4, 1.0)])):
        back = channel_from_json(ch.to_json())
        assert np.allclose(apply(back, rho).mat, apply(ch, rho).mat, atol=1e-14)
