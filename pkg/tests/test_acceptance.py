"""End-to-end acceptance checks, one test group per numbered criterion.

Run with ``pytest tests/test_acceptance.py -v``; the terminal summary prints one PASS/FAIL line per
criterion. The Villain KT scan is marked ``slow``.
"""
import itertools

import numpy as np
import pytest

from mixedorder import experiments as ex
from mixedorder.channels import apply, random_local_channel, theta_channel, zz_dephasing
from mixedorder.densmat import DensityMatrix, random_density_matrix
from mixedorder.diagnostics import (
    fidelity,
    fidelity_correlator,
    linear_correlator,
    relative_entropy,
    renyi2_correlator,
    replicated_fidelity_normalized,
    sandwiched_renyi,
    trace_distance,
)
from mixedorder.lattice import LatticeSpec
from mixedorder.models import (
    ThermalSpec,
    state_counterexample,
    state_decohered_ising,
    state_one_plus_X,
    state_thermal_commuting,
    thermal_fidelity_closed_form,
)
from mixedorder.statmech.replica import ReplicaSpinModel, fdw_beta, fdw_weight, purity_ising_pc, replica_enumerate

SEED = 20240611
LN2 = np.log(2.0)


def run(name, **params):
    """Run an experiment exactly as the CLI would with its default seed."""
    cfg = ex.RunConfig(experiment=name, params=params)
    return ex.run_experiment(cfg, cfg.resolved_params(), workers=ex.default_workers())


# 1 -----------------------------------------------------------------------------------------------

@pytest.mark.criterion(1, "ideal strong-to-weak state: F = R2 = 1, linear = 0")
@pytest.mark.parametrize("n", [4, 6, 8, 10])
def test_ideal_state(n):
    rho = state_one_plus_X(n)
    for x, y in itertools.combinations(range(n), 2):
        assert abs(fidelity_correlator(rho, x, y) - 1.0) <= 1e-10
        assert abs(renyi2_correlator(rho, x, y) - 1.0) <= 1e-10
        assert abs(linear_correlator(rho, x, y)) <= 1e-10


# 2 -----------------------------------------------------------------------------------------------

@pytest.mark.criterion(2, "thermal fidelity closed form")
@pytest.mark.parametrize("n", [4, 6, 8, 10])
def test_thermal_closed_form(n):
    for beta in (0.3, 1.0, 2.0):
        rho = state_thermal_commuting(n, ThermalSpec(beta))
        exact = thermal_fidelity_closed_form(n, beta)
        assert abs(exact - (1 + np.tanh(beta) ** n) ** -1 / np.cosh(beta) ** 2) < 1e-14
        # Z_i Z_j = Z_j Z_i, so each unordered pair covers both orders
        for i, j in itertools.combinations(range(n), 2):
            assert abs(fidelity_correlator(rho, i, j) - exact) <= 1e-8
            assert abs(linear_correlator(rho, i, j)) <= 1e-12


# 3 -----------------------------------------------------------------------------------------------

@pytest.mark.criterion(3, "replicated fidelity equals t=3 replica enumeration")
@pytest.mark.parametrize("shape", [(2, 2), (2, 3)])
@pytest.mark.parametrize("p", [0.05, 0.1, 0.2])
def test_replica_oracle(shape, p):
    lat = LatticeSpec.square(*shape)
    x, y = lat.farthest_pair()
    dense = replicated_fidelity_normalized(state_decohered_ising(lat, p), x, y, 1, 1)
    spin = replica_enumerate(ReplicaSpinModel.from_p(3, lat, p), [(1, x), (1, y)])
    assert abs(dense - spin) <= 1e-10


# 4 -----------------------------------------------------------------------------------------------

@pytest.mark.criterion(4, "fidelity order without Renyi-2 order")
def test_counterexample():
    r2 = []
    for L in (6, 8, 10, 12):
        rho = state_counterexample(L)
        assert fidelity_correlator(rho, 0, L - 1) >= 0.49
        r2.append(renyi2_correlator(rho, 0, L - 1))
    for a, b in zip(r2, r2[1:]):
        assert a / b >= 1.5


# 5 -----------------------------------------------------------------------------------------------

@pytest.mark.criterion(5, "RBIM Nishimori Binder crossing in [0.089, 0.129]")
def test_rbim_crossing():
    res = run("rbim_scan")
    est = res.summary["p_c_estimate"]
    print(f"RBIM crossing {est:.4f} +- {res.summary['p_c_error']:.4f}")
    assert 0.089 <= est <= 0.129


# 6 -----------------------------------------------------------------------------------------------

@pytest.mark.criterion(6, "Renyi-2 critical point: analytic 0.178, MC within 0.01")
def test_renyi2_point():
    pc = purity_ising_pc()
    assert abs(pc - 0.178) <= 1e-3
    res = run("renyi2_pc")
    est = res.summary["p_c_mc"]
    print(f"analytic {pc:.6f}, MC crossing {est:.6f} +- {res.summary['p_c_mc_error']:.6f}")
    assert abs(est - pc) <= 0.01


# 7 -----------------------------------------------------------------------------------------------

@pytest.mark.slow
@pytest.mark.criterion(7, "Villain KT point in [1.20, 1.50]; f_n Fourier oracle")
def test_villain_kt():
    res = run("villain_scan")
    est = res.summary["alpha_c_estimate"]
    print(f"alpha_c {est:.4f}, crossings {res.summary['crossing_by_size']}")
    assert res.summary["fourier_max_rel_error"] <= 1e-8
    assert 1.20 <= est <= 1.50


# 8 -----------------------------------------------------------------------------------------------

@pytest.mark.criterion(8, "Petz recoverability bound on random instances")
def test_petz_bound_suite():
    res = run("recovery_suite")
    assert len(res.rows) >= 200
    assert max(r["n"] for r in res.rows) <= 8
    assert res.summary["min_bound_slack"] >= -1e-8
    assert res.summary["max_identity_residual"] <= 1e-10


# 9 -----------------------------------------------------------------------------------------------

@pytest.mark.criterion(9, "GHZ: CMI 2 ln 2, layered recovery fails, product recovers")
def test_ghz():
    res = run("ghz_counterexample", n=8)
    assert abs(res.summary["cmi"] - 2 * LN2) <= 1e-9
    assert res.summary["ghz_final_residual"] >= 0.4
    assert res.summary["product_zero_final_residual"] <= 1e-6


# 10 ----------------------------------------------------------------------------------------------

N_INSTANCES = 1000
DIMS = [2, 4, 8]
SLACK = 1e-8


def draw_state(n, rng, full_rank=False):
    d = 2**n
    rank = d if full_rank else int(rng.integers(1, d + 1))
    return random_density_matrix(n, rng, rank)


def draw_channel(n, rng):
    return random_local_channel(n, list(range(n)), rng, n_kraus=int(rng.integers(1, 5)))


def mix(lam, a, b):
    return DensityMatrix(lam * a.mat + (1 - lam) * b.mat)


def instances(dim, tag):
    n = int(np.log2(dim))
    rng = np.random.default_rng([SEED, dim, tag])
    for _ in range(N_INSTANCES):
        yield n, rng


@pytest.mark.criterion(10, "inequality property suites")
@pytest.mark.parametrize("dim", DIMS)
def test_fuchs_van_de_graaf(dim):
    for n, rng in instances(dim, 0):
        r, s = draw_state(n, rng), draw_state(n, rng)
        f, d = fidelity(r, s), trace_distance(r, s)
        assert 1 - f <= d + SLACK
        assert d <= np.sqrt(max(1 - f * f, 0.0)) + SLACK


@pytest.mark.criterion(10, "inequality property suites")
@pytest.mark.parametrize("dim", DIMS)
def test_data_processing(dim):
    for n, rng in instances(dim, 1):
        r, s = draw_state(n, rng, True), draw_state(n, rng, True)
        ch = draw_channel(n, rng)
        r2, s2 = apply(ch, r), apply(ch, s)
        assert fidelity(r, s) <= fidelity(r2, s2) + SLACK
        assert trace_distance(r2, s2) <= trace_distance(r, s) + SLACK
        assert relative_entropy(r2, s2) <= relative_entropy(r, s) + SLACK


@pytest.mark.criterion(10, "inequality property suites")
@pytest.mark.parametrize("dim", DIMS)
def test_joint_concavity_and_convexity(dim):
    for n, rng in instances(dim, 2):
        r1, r2, s1, s2 = (draw_state(n, rng, True) for _ in range(4))
        lam = rng.random()
        r, s = mix(lam, r1, r2), mix(lam, s1, s2)
        assert lam * fidelity(r1, s1) + (1 - lam) * fidelity(r2, s2) <= fidelity(r, s) + SLACK
        assert trace_distance(r, s) <= lam * trace_distance(r1, s1) + (1 - lam) * trace_distance(r2, s2) + SLACK
        assert relative_entropy(r, s) <= (lam * relative_entropy(r1, s1)
                                          + (1 - lam) * relative_entropy(r2, s2) + SLACK)


ALPHAS = [0.5, 0.7, 0.9, 1.5, 2.0, 3.0]


@pytest.mark.criterion(10, "inequality property suites")
@pytest.mark.parametrize("dim", DIMS)
def test_sandwiched_renyi_limits_and_monotonicity(dim):
    eps = 1e-4
    for n, rng in instances(dim, 3):
        r, s = draw_state(n, rng, True), draw_state(n, rng, True)
        # alpha = 1/2 is -2 log2 F
        assert abs(sandwiched_renyi(r, s, 0.5) + 2 * np.log2(fidelity(r, s))) <= SLACK
        # alpha -> 1 recovers the relative entropy in bits
        s_bits = relative_entropy(r, s) / LN2
        for a in (1 - eps, 1 + eps):
            assert abs(sandwiched_renyi(r, s, a) - s_bits) <= 1e-2
        vals = [sandwiched_renyi(r, s, a) for a in ALPHAS]
        vals.insert(3, s_bits)
        assert all(a <= b + SLACK for a, b in zip(vals, vals[1:]))


# 11 ----------------------------------------------------------------------------------------------

@pytest.mark.criterion(11, "non-Pauli channel: domain-wall phases cancel; theta = pi/2 is ZZ")
@pytest.mark.parametrize("t", [2, 3, 4])
def test_fdw_cyclic(t):
    rng = np.random.default_rng([SEED, t])
    for _ in range(10_000):
        p, theta = rng.random(), rng.uniform(0, np.pi)
        n_edges = int(rng.integers(1, 13))
        ds = rng.choice([-1, 1], size=(t, n_edges))
        prod = np.prod([fdw_weight(p, theta, ds[k], ds[(k + 1) % t]) for k in range(t)])
        n_diff = int(np.sum(ds != np.roll(ds, -1, axis=0)))
        assert abs(prod - fdw_beta(p, theta) ** n_diff) <= 1e-12


@pytest.mark.criterion(11, "non-Pauli channel: domain-wall phases cancel; theta = pi/2 is ZZ")
@pytest.mark.parametrize("p", [0.0, 0.1, 0.3, 0.5, 0.9])
def test_theta_half_pi_is_zz(p):
    rng = np.random.default_rng([SEED, int(p * 100)])
    lat = LatticeSpec.square(2, 2)
    a, b = theta_channel(4, lat, p, np.pi / 2), zz_dephasing(4, lat, p)
    for _ in range(20):
        rho = random_density_matrix(4, rng)
        assert np.max(np.abs(apply(a, rho).mat - apply(b, rho).mat)) <= 1e-12
