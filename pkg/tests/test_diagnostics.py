import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st
from scipy.linalg import polar, sqrtm

from mixedorder.channels import apply, random_local_channel, site_x_dephasing, theta_channel, zz_dephasing
from mixedorder.densmat import DensityMatrix, PauliString, SiteOperator, random_density_matrix, random_unitary
from mixedorder.diagnostics import (
    classify_ssb,
    cmi,
    detectability_bound,
    fidelity,
    fidelity_average,
    fidelity_correlator,
    fidelity_normalized,
    linear_correlator,
    local_indistinguishability_check,
    relative_entropy,
    renyi2_correlator,
    replicated_fidelity,
    sandwiched_renyi,
    trace_distance,
    verdict_from,
)
from mixedorder.errors import BadPartition, BadSiteSet, DegeneratePurity, DimensionMismatch
from mixedorder.lattice import LatticeSpec
from mixedorder.models import (
    ThermalSpec,
    state_counterexample,
    state_decohered_ising,
    state_ghz,
    state_one_plus_X,
    state_plus_product,
    state_thermal_commuting,
)

LN2 = np.log(2.0)


def pure(v):
    return DensityMatrix.from_pure(np.asarray(v, dtype=complex))


def psd_sqrt(m):
    w, v = np.linalg.eigh(m)
    w = np.where(w > 1e-14 * w.max(), w, 0.0)
    return (v * np.sqrt(w)) @ v.conj().T


def fidelity_oracle(r, s):
    """Tr |sqrt(r) sqrt(s)| from explicit square roots with the null space zeroed."""
    return float(np.sum(np.linalg.svd(psd_sqrt(r) @ psd_sqrt(s), compute_uv=False)))


class TestFidelity:
    def test_orthogonal(self):
        assert fidelity(pure([1, 0]), pure([0, 1])) < 1e-14

    def test_self(self, rng):
        r = random_density_matrix(3, rng)
        assert abs(fidelity(r, r) - 1) < 1e-10

    def test_symmetric_invariant(self):
        rho = state_one_plus_X(4)
        u = PauliString.global_x(4)
        assert abs(fidelity(rho, u.conjugate(rho.mat)) - 1) < 1e-12

    @given(seed=st.integers(0, 2**32 - 1), n=st.integers(1, 3))
    @settings(max_examples=30)
    def test_symmetric_and_matches_oracle(self, seed, n):
        rng = np.random.default_rng(seed)
        r, s = random_density_matrix(n, rng), random_density_matrix(n, rng, rank=1 + n)
        f = fidelity(r, s)
        assert abs(f - fidelity(s, r)) <= 1e-9
        assert abs(f - fidelity_oracle(r.mat, s.mat)) <= 1e-8

    @given(seed=st.integers(0, 2**32 - 1))
    @settings(max_examples=30)
    def test_uhlmann_purifications_lower_bound(self, seed):
        rng = np.random.default_rng(seed)
        r, s = random_density_matrix(1, rng), random_density_matrix(1, rng)
        # purifications on a 2-dim auxiliary: |psi> = (sqrt(rho) (x) 1) |Omega>
        omega = np.eye(2).reshape(-1)
        psi = np.kron(sqrtm(r.mat), np.eye(2)) @ omega
        f = fidelity(r, s)
        for _ in range(10):
            u = random_unitary(2, rng)
            phi = np.kron(sqrtm(s.mat), u) @ omega
            assert abs(np.vdot(psi, phi)) <= f + 1e-10
        # the polar unitary attains it
        up, _ = polar(sqrtm(r.mat) @ sqrtm(s.mat))
        phi = np.kron(sqrtm(s.mat), up.conj()) @ omega
        assert abs(abs(np.vdot(psi, phi)) - f) < 1e-8

    def test_unnormalized_second_argument(self, rng):
        r = random_density_matrix(2, rng)
        s = 0.3 * random_density_matrix(2, rng).mat
        assert abs(fidelity(r, s) - np.sqrt(0.3) * fidelity_normalized(r, s)) < 1e-12

    def test_dimension_mismatch(self, rng):
        with pytest.raises(DimensionMismatch):
            fidelity(random_density_matrix(1, rng), random_density_matrix(2, rng))


class TestCorrelators:
    def test_one_plus_x(self):
        rho = state_one_plus_X(5)
        assert abs(fidelity_correlator(rho, 0, 4) - 1) < 1e-12
        assert abs(renyi2_correlator(rho, 1, 3) - 1) < 1e-12
        assert linear_correlator(rho, 0, 4) < 1e-14

    def test_plus_product(self):
        assert fidelity_correlator(state_plus_product(4), 0, 3) < 1e-10

    def test_ghz_linear(self):
        assert abs(linear_correlator(state_ghz(5), 0, 4) - 1) < 1e-14

    @pytest.mark.parametrize("p", [0.05, 0.2, 0.5])
    def test_decohered_ising_linear_zero(self, p):
        assert linear_correlator(state_decohered_ising(LatticeSpec.square(2, 2), p), 0, 3) < 1e-14

    def test_renyi2_pure_state(self, rng):
        psi = rng.standard_normal(8) + 1j * rng.standard_normal(8)
        psi /= np.linalg.norm(psi)
        w = PauliString.two_point(3, 0, 2).to_dense()
        assert abs(renyi2_correlator(pure(psi), 0, 2) - abs(np.vdot(psi, w @ psi)) ** 2) < 1e-12

    def test_renyi2_below_fidelity_counterexample(self):
        rho = state_counterexample(8)
        assert renyi2_correlator(rho, 0, 7) < fidelity_correlator(rho, 0, 7)

    def test_renyi2_degenerate(self):
        with pytest.raises(DegeneratePurity):
            renyi2_correlator(_zero_purity_stub(), 0, 1)

    def test_same_site_rejected(self):
        with pytest.raises(BadSiteSet):
            fidelity_correlator(state_ghz(3), 1, 1)

    def test_charged_operator_average_vanishes(self):
        # a single charged operator cannot connect the sector of a strongly symmetric state to itself
        for rho in (state_one_plus_X(4), state_thermal_commuting(4, ThermalSpec(0.7)),
                    state_decohered_ising(LatticeSpec.chain(4), 0.2)):
            assert fidelity_average(rho, SiteOperator(2, "Z")) <= 1e-9


def _zero_purity_stub():
    class Stub:
        n_sites = 2

        def purity(self):
            return 0.0

    return Stub()


class TestTraceDistance:
    def test_self(self, rng):
        r = random_density_matrix(2, rng)
        assert trace_distance(r, r) < 1e-14

    def test_orthogonal(self):
        assert abs(trace_distance(pure([1, 0]), pure([0, 1])) - 1) < 1e-14

    @given(seed=st.integers(0, 2**32 - 1), n=st.integers(1, 3))
    @settings(max_examples=40)
    def test_fuchs_van_de_graaf(self, seed, n):
        rng = np.random.default_rng(seed)
        r, s = random_density_matrix(n, rng), random_density_matrix(n, rng)
        f, d = fidelity(r, s), trace_distance(r, s)
        assert 1 - f <= d + 1e-9
        assert d <= np.sqrt(max(0.0, 1 - f**2)) + 1e-9


class TestRelativeEntropy:
    def test_self(self, rng):
        r = random_density_matrix(2, rng)
        assert abs(relative_entropy(r, r)) < 1e-12

    def test_pure_vs_mixed(self):
        assert abs(relative_entropy(pure([1, 0]), DensityMatrix.maximally_mixed(1)) - LN2) < 1e-14

    def test_infinite_off_support(self):
        assert relative_entropy(pure([1, 0]), pure([0, 1])) == np.inf

    @pytest.mark.parametrize("p", [0.05, 0.2])
    def test_decohered_ising_fidelity_bound(self, p):
        rho = state_decohered_ising(LatticeSpec.square(2, 2), p)
        sig = DensityMatrix(PauliString.two_point(4, 0, 3).conjugate(rho.mat))
        s = relative_entropy(rho, sig)
        assert np.isfinite(s)
        # F >= 2^{-S_bits/2} = e^{-(ln2/2) S_bits} with S in nats converted
        assert fidelity(rho, sig) >= np.exp(-s / 2) - 1e-9

    @given(seed=st.integers(0, 2**32 - 1))
    @settings(max_examples=30)
    def test_fidelity_entropy_bound(self, seed):
        rng = np.random.default_rng(seed)
        r, s = random_density_matrix(2, rng), random_density_matrix(2, rng)
        assert fidelity(r, s) >= 2 ** (-relative_entropy(r, s) / LN2 / 2) - 1e-9


class TestSandwichedRenyi:
    @given(seed=st.integers(0, 2**32 - 1))
    @settings(max_examples=30)
    def test_half_is_fidelity(self, seed):
        rng = np.random.default_rng(seed)
        r, s = random_density_matrix(2, rng), random_density_matrix(2, rng)
        assert abs(sandwiched_renyi(r, s, 0.5) + 2 * np.log2(fidelity(r, s))) < 1e-8

    @pytest.mark.parametrize("eps", [1e-4, -1e-4])
    def test_limit_is_relative_entropy(self, eps, rng):
        r, s = random_density_matrix(2, rng), random_density_matrix(2, rng)
        assert abs(sandwiched_renyi(r, s, 1 + eps) - relative_entropy(r, s) / LN2) < 1e-2

    @given(seed=st.integers(0, 2**32 - 1))
    @settings(max_examples=30)
    def test_monotone_in_alpha(self, seed):
        rng = np.random.default_rng(seed)
        r, s = random_density_matrix(2, rng), random_density_matrix(2, rng)
        vals = [sandwiched_renyi(r, s, a) for a in (0.3, 0.5, 0.7, 0.9)]
        assert all(b >= a - 1e-9 for a, b in zip(vals, vals[1:]))

    def test_bad_alpha(self, rng):
        r = random_density_matrix(1, rng)
        with pytest.raises(ValueError):
            sandwiched_renyi(r, r, 1.0)


class TestReplicatedFidelity:
    def test_one_plus_x_is_trace_cube(self):
        rho = state_one_plus_X(4)
        assert abs(replicated_fidelity(rho, 0, 3, 1, 1) - np.sum(rho.eigenvalues**3)) < 1e-14

    @pytest.mark.parametrize("m,n", [(1, 1), (2, 1), (1, 3)])
    def test_identity_operator(self, m, n, rng):
        rho = random_density_matrix(3, rng)
        val = replicated_fidelity(rho, 0, 2, m, n, O="I")
        assert abs(val - np.sum(rho.eigenvalues ** ((2 * m + 1) * n))) < 1e-13

    def test_rejects_fractional(self, rng):
        with pytest.raises(ValueError):
            replicated_fidelity(random_density_matrix(2, rng), 0, 1, 1.5, 1)


class TestCMI:
    def test_product_zero(self, rng):
        a, b, c = (random_density_matrix(1, rng) for _ in range(3))
        assert abs(cmi(a.tensor(b).tensor(c), [0], [1], [2])) < 1e-12

    def test_ghz(self):
        assert abs(cmi(state_ghz(3), [0], [1], [2]) - LN2) < 1e-12

    def test_overlap_rejected(self):
        with pytest.raises(BadPartition):
            cmi(state_ghz(3), [0], [0, 1], [2])

    @given(seed=st.integers(0, 2**32 - 1))
    @settings(max_examples=30)
    def test_nonnegative_and_data_processing_on_a(self, seed):
        rng = np.random.default_rng(seed)
        rho = random_density_matrix(4, rng, rank=int(rng.integers(1, 5)))
        A, B, C = [0], [1, 2], [3]
        before = cmi(rho, A, B, C)
        after = cmi(apply(random_local_channel(4, A, rng), rho), A, B, C)
        assert before >= -1e-9 and after >= -1e-9
        assert after <= before + 1e-9


class TestClassification:
    @pytest.mark.parametrize("make,verdict", [(state_plus_product, "unbroken"), (state_one_plus_X, "sw_ssb"),
                                              (state_ghz, "fully_broken")])
    def test_table(self, make, verdict):
        n = 6
        c = classify_ssb(make(n), [(0, y) for y in range(1, n)])
        assert c.verdict == verdict
        assert c.pair == (0, n - 1)

    def test_thresholds(self):
        assert verdict_from(0.05, 0.2) == "inconsistent"
        assert verdict_from(0.5, 0.05, theta_f=0.6) == "unbroken"

    def test_needs_pair(self):
        with pytest.raises(BadSiteSet):
            classify_ssb(state_ghz(3), [])


class TestIndistinguishability:
    def test_identity_probe(self, rng):
        rho = random_density_matrix(3, rng)
        assert local_indistinguishability_check(rho, PauliString.identity(3)) < 1e-14

    def test_one_plus_x_single_probe(self):
        rho = state_one_plus_X(4)
        assert local_indistinguishability_check(rho, PauliString.from_map(4, {0: "X"})) < 1e-14

    def test_thermal_two_site_probe(self):
        n = 8
        rho = state_thermal_commuting(n, ThermalSpec(1.0))
        assert local_indistinguishability_check(rho, PauliString.from_map(n, {0: "X", 1: "X"})) <= 2 * 2 / n

    def test_detectability_one_plus_x(self):
        lhs, rhs = detectability_bound(state_one_plus_X(4))
        assert abs(lhs - 1) < 1e-10 and abs(rhs - 1) < 1e-10

    def test_detectability_plus_product(self):
        lhs, rhs = detectability_bound(state_plus_product(4))
        assert lhs >= -1e-12
        # only the x = y terms survive
        assert abs(rhs - 1 / 4) < 1e-10

    def test_detectability_thermal_strict(self):
        lhs, rhs = detectability_bound(state_thermal_commuting(6, ThermalSpec(1.0)))
        assert lhs > rhs + 1e-6


@given(seed=st.integers(0, 2**32 - 1), p=st.floats(0, 1))
@settings(max_examples=25)
def test_data_processing_all_channels(seed, p):
    rng = np.random.default_rng(seed)
    r, s = random_density_matrix(3, rng), random_density_matrix(3, rng)
    f0, d0, s0 = fidelity(r, s), trace_distance(r, s), relative_entropy(r, s)
    for ch in (zz_dephasing(3, None, p), theta_channel(3, None, p, 1.1), site_x_dephasing(3, p),
               random_local_channel(3, [0, 2], rng)):
        r2, s2 = apply(ch, r), apply(ch, s)
        assert f0 <= fidelity(r2, s2) + 1e-9
        assert trace_distance(r2, s2) <= d0 + 1e-9
        assert relative_entropy(r2, s2) <= s0 + 1e-9
