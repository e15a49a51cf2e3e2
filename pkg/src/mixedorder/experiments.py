"""Experiment definitions: strict parameter schemas, resource estimates and runners.

Each runner returns an ExperimentResult whose rows carry the producing module and
operation, plus (x, y, yerr) series for plotting.
"""

from __future__ import annotations

import os
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from typing import Any, Callable, Literal

import numpy as np
from scipy.special import logsumexp
from pydantic import BaseModel, ConfigDict, Field, ValidationError, field_validator, model_validator

from . import channels, diagnostics, models, recovery
from .densmat import DensityMatrix
from .errors import ConfigInvalid, ResourceExceeded
from .lattice import LatticeSpec
from .rng import stream
from .statmech import montecarlo as mc
from .statmech.replica import ReplicaSpinModel, purity_ising_pc, replica_enumerate
from .statmech.villain import truncated_coefficients, villain_fn_coefficients

EXPERIMENTS = (
    "table1_demo", "thermal_scan", "ising_decohere_scan", "replica_oracle", "rbim_scan",
    "renyi2_pc", "villain_scan", "recovery_suite", "ghz_counterexample",
)

DENSE_EXPERIMENT_CAP = 12


class _Strict(BaseModel):
    model_config = ConfigDict(extra="forbid")


class MCParams(_Strict):
    n_therm: int = Field(1000, ge=100)
    n_sweeps: int = Field(4000, ge=1)
    measure_stride: int = Field(1, ge=1)

    def run(self, seed: int, **kw) -> mc.MCRun:
        return mc.MCRun(n_therm=self.n_therm, n_sweeps=self.n_sweeps, measure_stride=self.measure_stride,
                        seed=seed, **kw)


def _increasing(v: list[float], lo: float, hi: float, name: str) -> list[float]:
    if not v:
        raise ValueError(f"{name} must not be empty")
    if sorted(v) != list(v) or len(set(v)) != len(v):
        raise ValueError(f"{name} must be strictly increasing")
    if v[0] <= lo or v[-1] > hi:
        raise ValueError(f"{name} must lie in ({lo}, {hi}]")
    return list(v)


class Table1Params(_Strict):
    n: int = Field(8, ge=2)
    theta_f: float = Field(0.1, gt=0)
    theta_l: float = Field(0.1, gt=0)


class ThermalScanParams(_Strict):
    n: int = Field(8, ge=2)
    betas: list[float] = [0.3, 0.5, 1.0, 1.5, 2.0]

    @field_validator("betas")
    @classmethod
    def _betas(cls, v):
        return _increasing(v, -1e-300, 50.0, "betas")


class IsingDecohereParams(_Strict):
    Lx: int = Field(4, ge=2)
    Ly: int = Field(2, ge=1)
    p_grid: list[float] = [0.0, 0.05, 0.1, 0.15, 0.2, 0.3, 0.4, 0.5]

    @field_validator("p_grid")
    @classmethod
    def _p(cls, v):
        if any(not (0.0 <= p <= 0.5) for p in v) or sorted(v) != list(v):
            raise ValueError("p_grid must be increasing inside [0, 0.5]")
        return v


class ReplicaOracleParams(_Strict):
    lattices: list[tuple[int, int]] = [(2, 2), (3, 2)]
    p_grid: list[float] = [0.05, 0.1, 0.2]

    @field_validator("p_grid")
    @classmethod
    def _p(cls, v):
        if not v or any(not (0.0 < p < 0.5) for p in v):
            raise ValueError("p_grid must lie inside (0, 0.5)")
        return v


class RbimScanParams(_Strict):
    p_grid: list[float] = [0.07, 0.085, 0.1, 0.11, 0.12, 0.135, 0.15]
    sizes: list[int] = [8, 16]
    n_disorder: int = Field(200, ge=2)
    # L=16 Metropolis from an ordered start still drifts at 1000/4000 sweeps near the crossing
    mc: MCParams = MCParams(n_therm=4000, n_sweeps=16000)

    @field_validator("p_grid")
    @classmethod
    def _p(cls, v):
        return _increasing(v, 0.0, 0.25, "p_grid")


class Renyi2Params(_Strict):
    p_grid: list[float] = [0.168, 0.173, 0.178, 0.183, 0.188]
    sizes: list[int] = [16, 32]
    mc: MCParams = MCParams(n_therm=1000, n_sweeps=20000)

    @field_validator("p_grid")
    @classmethod
    def _p(cls, v):
        return _increasing(v, 0.0, 0.499, "p_grid")


class VillainParams(_Strict):
    alpha_grid: list[float] = [1.1, 1.2, 1.3, 1.4, 1.5, 1.6]
    sizes: list[int] = [16, 32]
    n_wolff: int = Field(1, ge=0)
    mc: MCParams = MCParams(n_therm=2000, n_sweeps=8000)
    fourier_check_alphas: list[float] = [0.1, 0.5, 1.0, 1.353, 2.0, 5.0]

    @field_validator("alpha_grid")
    @classmethod
    def _a(cls, v):
        return _increasing(v, 0.0, 20.0, "alpha_grid")


class RotationParams(_Strict):
    kind: Literal["standard", "rotated"] = "rotated"
    n_nodes: int = Field(96, ge=2)
    t_cutoff: float = Field(7.0, gt=0)

    def build(self) -> recovery.Rotation:
        if self.kind == "standard":
            return recovery.Rotation.standard()
        return recovery.Rotation(self.kind, self.n_nodes, self.t_cutoff)


class RecoverySuiteParams(_Strict):
    n_instances: int = Field(200, ge=1)
    max_qubits: int = Field(8, ge=3)
    rotation: RotationParams = RotationParams()


class GhzParams(_Strict):
    n: int = Field(8, ge=4)
    x: int | None = None
    block_size: int = Field(2, ge=1)
    rotation: RotationParams = RotationParams()

    @model_validator(mode="after")
    def _x(self):
        if self.x is not None and not (1 < self.x < self.n - 1):
            raise ValueError("x must lie strictly inside the chain, away from site 0 and the last site")
        return self


PARAMS: dict[str, type[_Strict]] = {
    "table1_demo": Table1Params,
    "thermal_scan": ThermalScanParams,
    "ising_decohere_scan": IsingDecohereParams,
    "replica_oracle": ReplicaOracleParams,
    "rbim_scan": RbimScanParams,
    "renyi2_pc": Renyi2Params,
    "villain_scan": VillainParams,
    "recovery_suite": RecoverySuiteParams,
    "ghz_counterexample": GhzParams,
}


class RunConfig(_Strict):
    experiment: Literal[EXPERIMENTS]  # type: ignore[valid-type]
    params: dict[str, Any] = {}
    seed: int = Field(12345, ge=0, lt=2**64)
    output_dir: str = "runs"

    def resolved_params(self) -> _Strict:
        return PARAMS[self.experiment].model_validate(self.params)

    def resolved(self) -> dict:
        d = self.model_dump()
        d["params"] = self.resolved_params().model_dump(mode="json")
        return d


def parse_config(data: dict) -> tuple[RunConfig, _Strict]:
    try:
        cfg = RunConfig.model_validate(data)
        return cfg, cfg.resolved_params()
    except ValidationError as exc:
        raise ConfigInvalid(str(exc)) from None


# --- resources ------------------------------------------------------------------


@dataclass
class ResourceEstimate:
    dense_sites: int = 0
    memory_bytes: float = 0.0
    seconds: float = 0.0
    violations: list[str] = field(default_factory=list)

    @property
    def ok(self) -> bool:
        return not self.violations

    def check(self) -> None:
        if self.violations:
            raise ResourceExceeded("; ".join(self.violations))


def _dense_bytes(n: int, copies: int = 8) -> float:
    return copies * 16.0 * 4.0**n


# rough single-core costs per spin update
_ISING_UPDATE_S = 2e-8
_XY_UPDATE_S = 2.5e-7


def estimate(name: str, p: _Strict) -> ResourceEstimate:
    est = ResourceEstimate()
    if name == "table1_demo":
        est.dense_sites = p.n
        est.seconds = 3 * 1e-9 * 8.0**p.n
    elif name == "thermal_scan":
        est.dense_sites = p.n
        est.seconds = len(p.betas) * 2e-9 * 8.0**p.n
    elif name == "ising_decohere_scan":
        est.dense_sites = p.Lx * p.Ly
        est.seconds = len(p.p_grid) * 6e-9 * 8.0 ** (p.Lx * p.Ly)
    elif name == "replica_oracle":
        est.dense_sites = max(a * b for a, b in p.lattices)
        est.seconds = len(p.p_grid) * sum(1e-7 * 4.0 ** (a * b) for a, b in p.lattices)
    elif name == "rbim_scan":
        if max(p.sizes) > mc.MAX_MC_L:
            est.violations.append(f"lattice size {max(p.sizes)} above {mc.MAX_MC_L}")
        upd = (p.mc.n_therm + p.mc.n_sweeps) * p.n_disorder * len(p.p_grid) * sum(L * L for L in p.sizes)
        est.seconds = upd * _ISING_UPDATE_S * 4
    elif name == "renyi2_pc":
        if max(p.sizes) > mc.MAX_MC_L:
            est.violations.append(f"lattice size {max(p.sizes)} above {mc.MAX_MC_L}")
        est.seconds = (p.mc.n_therm + p.mc.n_sweeps) * len(p.p_grid) * sum(L * L for L in p.sizes) * _ISING_UPDATE_S * 6
    elif name == "villain_scan":
        if max(p.sizes) > mc.MAX_MC_L:
            est.violations.append(f"lattice size {max(p.sizes)} above {mc.MAX_MC_L}")
        est.seconds = ((p.mc.n_therm + p.mc.n_sweeps) * len(p.alpha_grid) * sum(L * L for L in p.sizes)
                       * _XY_UPDATE_S * (1 + p.n_wolff))
    elif name == "recovery_suite":
        est.dense_sites = p.max_qubits
        est.seconds = p.n_instances * 4e-8 * 8.0**p.max_qubits
    elif name == "ghz_counterexample":
        est.dense_sites = p.n
        est.seconds = 4e-9 * 8.0**p.n * 10
    est.memory_bytes = _dense_bytes(est.dense_sites) if est.dense_sites else 64e6
    if est.dense_sites > DENSE_EXPERIMENT_CAP:
        est.violations.append(f"{est.dense_sites} dense sites exceed the cap of {DENSE_EXPERIMENT_CAP}")
    return est


# --- results ----------------------------------------------------------------------


@dataclass
class ExperimentResult:
    rows: list[dict] = field(default_factory=list)
    series: dict[str, list[tuple[float, float, float]]] = field(default_factory=dict)
    summary: dict = field(default_factory=dict)

    def add(self, module: str, operation: str, **values) -> None:
        self.rows.append({"module": module, "operation": operation, **values})

    def point(self, name: str, x: float, y: float, yerr: float = 0.0) -> None:
        self.series.setdefault(name, []).append((float(x), float(y), float(yerr)))


def _pool_map(fn: Callable, items: list, workers: int) -> list:
    # results come back in item order regardless of completion order
    if workers <= 1:
        return [fn(it) for it in items]
    with ThreadPoolExecutor(max_workers=workers) as ex:
        return list(ex.map(fn, items))


# --- runners --------------------------------------------------------------------------


TABLE1_EXPECTED = {"plus_product": "unbroken", "one_plus_X": "sw_ssb", "ghz": "fully_broken"}


def run_table1(p: Table1Params, seed: int, workers: int) -> ExperimentResult:
    res = ExperimentResult()
    states = {"plus_product": models.state_plus_product, "one_plus_X": models.state_one_plus_X,
              "ghz": models.state_ghz}
    pairs = [(0, y) for y in range(1, p.n)]
    for name, make in states.items():
        c = diagnostics.classify_ssb(make(p.n), pairs, theta_f=p.theta_f, theta_l=p.theta_l)
        res.add("diagnostics", "classify_ssb", state=name, n=p.n, x=c.pair[0], y=c.pair[1],
                fidelity_correlator=c.fidelity_value, renyi2_correlator=c.renyi2_value,
                linear_correlator=c.linear_value, verdict=c.verdict, expected=TABLE1_EXPECTED[name])
    res.summary["all_match"] = all(r["verdict"] == r["expected"] for r in res.rows)
    return res


def run_thermal(p: ThermalScanParams, seed: int, workers: int) -> ExperimentResult:
    res = ExperimentResult()
    x, y = 0, p.n // 2
    worst = 0.0
    for beta in p.betas:
        rho = models.state_thermal_commuting(p.n, models.ThermalSpec(beta))
        F = diagnostics.fidelity_correlator(rho, x, y)
        exact = models.thermal_fidelity_closed_form(p.n, beta)
        lin = diagnostics.linear_correlator(rho, x, y)
        worst = max(worst, abs(F - exact))
        res.add("models", "state_thermal_commuting", beta=beta, n=p.n, x=x, y=y, fidelity_correlator=F,
                closed_form=exact, abs_error=abs(F - exact), linear_correlator=lin)
        res.point("fidelity_vs_beta", beta, F)
        res.point("closed_form_vs_beta", beta, exact)
    res.summary["max_abs_error"] = worst
    return res


def run_ising_decohere(p: IsingDecohereParams, seed: int, workers: int) -> ExperimentResult:
    res = ExperimentResult()
    lat = LatticeSpec.square(p.Lx, p.Ly) if p.Ly > 1 else LatticeSpec.chain(p.Lx)
    x, y = lat.farthest_pair()
    for q in p.p_grid:
        rho = models.state_decohered_ising(lat, q)
        F = diagnostics.fidelity_correlator(rho, x, y)
        R2 = diagnostics.renyi2_correlator(rho, x, y)
        lin = diagnostics.linear_correlator(rho, x, y)
        res.add("models", "state_decohered_ising", p=q, Lx=p.Lx, Ly=p.Ly, x=x, y=y, fidelity_correlator=F,
                renyi2_correlator=R2, linear_correlator=lin)
        res.point("fidelity_vs_p", q, F)
        res.point("renyi2_vs_p", q, R2)
    return res


def run_replica_oracle(p: ReplicaOracleParams, seed: int, workers: int) -> ExperimentResult:
    res = ExperimentResult()
    worst = 0.0
    for Lx, Ly in p.lattices:
        lat = LatticeSpec.square(Lx, Ly)
        x, y = lat.farthest_pair()
        for q in p.p_grid:
            rho = models.state_decohered_ising(lat, q)
            dense = diagnostics.replicated_fidelity_normalized(rho, x, y, 1, 1)
            spin = replica_enumerate(ReplicaSpinModel.from_p(3, lat, q), [(1, x), (1, y)])
            worst = max(worst, abs(dense - spin))
            res.add("statmech", "replica_enumerate", Lx=Lx, Ly=Ly, p=q, x=x, y=y, dense=dense,
                    enumeration=spin, abs_error=abs(dense - spin))
    res.summary["max_abs_error"] = worst
    return res


def _scan_rows(res: ExperimentResult, scan: mc.ScanResult, operation: str) -> None:
    for r in scan.records:
        res.add("statmech", operation, **r.row())


def run_rbim(p: RbimScanParams, seed: int, workers: int) -> ExperimentResult:
    res = ExperimentResult()
    scan = mc.rbim_nishimori_scan(p.p_grid, p.sizes, p.mc.run(seed), p.n_disorder, workers)
    _scan_rows(res, scan, "rbim_nishimori_scan")
    for L, (x, m, e) in scan.table("binder").items():
        for a, b, c in zip(x, m, e):
            res.point(f"binder_L{L}", a, b, c)
    res.summary.update(p_c_estimate=scan.estimate, p_c_error=scan.estimate_err, **scan.extra)
    return res


def run_renyi2(p: Renyi2Params, seed: int, workers: int) -> ExperimentResult:
    res = ExperimentResult()
    pc, tau_c = purity_ising_pc(return_tau=True)
    res.add("statmech", "purity_ising_pc", p_c_analytic=pc, tau_c=tau_c)
    scan = mc.renyi2_ising_scan(p.p_grid, p.sizes, p.mc.run(seed, wolff=True), workers)
    _scan_rows(res, scan, "renyi2_ising_scan")
    for L, (x, m, e) in scan.table("binder").items():
        for a, b, c in zip(x, m, e):
            res.point(f"binder_L{L}", a, b, c)
    res.summary.update(p_c_analytic=pc, p_c_mc=scan.estimate, p_c_mc_error=scan.estimate_err, **scan.extra)
    return res


FOURIER_CHECK_NMAX = 10


def fourier_oracle(alpha: float, n_max: int, k_max: int = 60) -> np.ndarray:
    """f_n / f_0 as the Fourier coefficients of G(phi)^2 with G = sum_k p_k e^{ik phi}, p_k ~ exp(-alpha k^2).

    The coefficient of e^{in phi} in G^2 is the self-convolution sum_k p_k p_{n-k}; all terms are
    positive, so summing in log space keeps full relative precision even where f_n underflows an FFT.
    """
    k = np.arange(-k_max, k_max + 1, dtype=float)
    logs = np.array([logsumexp(-alpha * (k**2 + (n - k) ** 2)) for n in range(n_max + 1)])
    return np.exp(logs - logs[0])


def run_villain(p: VillainParams, seed: int, workers: int) -> ExperimentResult:
    res = ExperimentResult()
    worst = 0.0
    for a in p.fourier_check_alphas:
        f = villain_fn_coefficients(a, FOURIER_CHECK_NMAX)
        o = fourier_oracle(a, FOURIER_CHECK_NMAX)
        err = float(np.max(np.abs(f / o - 1.0)))
        worst = max(worst, err)
        res.add("statmech", "villain_fn_coefficients", alpha=a, n_max=FOURIER_CHECK_NMAX, max_rel_error=err)
    scan = mc.villain_kt_scan(p.alpha_grid, p.sizes, p.mc.run(seed, n_wolff=p.n_wolff), workers)
    _scan_rows(res, scan, "villain_kt_scan")
    for L, (x, m, e) in scan.table("helicity_reduced").items():
        for a, b, c in zip(x, m, e):
            res.point(f"helicity_reduced_L{L}", a, b, c)
    for a in p.alpha_grid:
        res.point("kt_jump", a, mc.KT_JUMP)
    res.summary.update(alpha_c_estimate=scan.estimate, fourier_max_rel_error=worst,
                       crossing_by_size={str(k): v for k, v in scan.extra["crossing_by_size"].items()},
                       truncation_orders={str(a): int(truncated_coefficients(a).size - 1) for a in p.alpha_grid})
    return res


def recovery_instance_report(rng: np.random.Generator, max_qubits: int, rotation) -> dict:
    rho, ch, A, B, C = recovery.random_recovery_instance(rng, max_qubits)
    rep = recovery.cmi_markov_gap(rho, ch, A, B, C, rotation)
    ident = recovery.cmi_markov_gap(rho, channels.KrausChannel.identity(rho.n_sites), A, B, C, rotation)
    return dict(n=rho.n_sites, A=" ".join(map(str, A)), B=" ".join(map(str, B)), C=" ".join(map(str, C)),
                fidelity_recovered=rep.fidelity_recovered, cmi_before=rep.cmi_before, cmi_after=rep.cmi_after,
                bound_slack=rep.bound_slack, trace_distance_residual=rep.trace_distance_residual,
                trace_norm_bound=rep.trace_norm_bound, trace_norm_slack=rep.trace_norm_slack,
                identity_residual=ident.trace_distance_residual)


def run_recovery_suite(p: RecoverySuiteParams, seed: int, workers: int) -> ExperimentResult:
    res = ExperimentResult()
    rot = p.rotation.build()
    rows = _pool_map(lambda i: recovery_instance_report(stream(seed, 8, i), p.max_qubits, rot),
                     list(range(p.n_instances)), workers)
    for i, r in enumerate(rows):
        res.add("recovery", "cmi_markov_gap", instance=i, **r)
        res.point("slack_vs_cmi_drop", r["cmi_before"] - r["cmi_after"], r["bound_slack"])
    res.summary.update(min_bound_slack=min(r["bound_slack"] for r in rows),
                       min_trace_norm_slack=min(r["trace_norm_slack"] for r in rows),
                       max_identity_residual=max(r["identity_residual"] for r in rows))
    return res


def product_zero_state(n: int) -> DensityMatrix:
    psi = np.zeros(2**n)
    psi[0] = 1.0
    return DensityMatrix.from_pure(psi)


def run_ghz(p: GhzParams, seed: int, workers: int) -> ExperimentResult:
    res = ExperimentResult()
    x = p.x if p.x is not None else p.n // 2
    rot = p.rotation.build()
    rho = recovery.ghz_partial_dephasing(p.n, x)
    A, B, C = recovery.ghz_partition(p.n, x)
    I = diagnostics.cmi(rho, A, B, C)
    res.add("recovery", "ghz_partial_dephasing", n=p.n, x=x, cmi=I, two_ln2=2 * np.log(2.0))
    rep = recovery.ghz_counterexample(p.n, x, rotation=rot)
    res.add("recovery", "cmi_markov_gap", n=p.n, x=x, **{k: v for k, v in rep.to_dict().items() if k != "extra"})
    full = channels.site_x_dephasing(p.n, 0.5)
    for name, state in [("ghz", models.state_ghz(p.n)), ("product_zero", product_zero_state(p.n))]:
        lay = recovery.layered_recovery(state, [full], p.block_size, rot)
        for s in lay.steps:
            res.add("recovery", "layered_recovery", state=name, step=s.step, layer=s.layer, parity=s.parity,
                    blocks=" ".join(map(str, s.blocks)), cmi_before=s.cmi_before, cmi_after=s.cmi_after,
                    fidelity=s.fidelity, step_residual=s.step_residual,
                    cumulative_residual=s.cumulative_residual, residual_bound=s.residual_bound)
            res.point(f"cumulative_{name}", s.step, s.cumulative_residual)
        res.add("recovery", "layered_recovery", state=name, step="final", final_residual=lay.final_residual,
                single_shot_residual=lay.single_shot_residual)
        res.summary[f"{name}_final_residual"] = lay.final_residual
    res.summary["cmi"] = I
    return res


RUNNERS: dict[str, Callable[[Any, int, int], ExperimentResult]] = {
    "table1_demo": run_table1,
    "thermal_scan": run_thermal,
    "ising_decohere_scan": run_ising_decohere,
    "replica_oracle": run_replica_oracle,
    "rbim_scan": run_rbim,
    "renyi2_pc": run_renyi2,
    "villain_scan": run_villain,
    "recovery_suite": run_recovery_suite,
    "ghz_counterexample": run_ghz,
}

DESCRIPTIONS = {
    "table1_demo": "fidelity/linear correlators and verdicts for |+...+>, (1 + prod X)/2^n and GHZ",
    "thermal_scan": "charged fidelity correlator of the even-sector commuting thermal state vs beta",
    "ising_decohere_scan": "fidelity, Renyi-2 and linear correlators of ZZ-dephased |+...+> vs p",
    "replica_oracle": "dense replicated fidelity vs three-replica spin-model enumeration",
    "rbim_scan": "Binder cumulant of the +-J Ising model on the Nishimori line",
    "renyi2_pc": "analytic and Monte Carlo threshold of the Renyi-2 correlator",
    "villain_scan": "helicity modulus of the f_n-weighted XY model and its KT crossing",
    "recovery_suite": "Petz recovery bound on random annular instances",
    "ghz_counterexample": "CMI of the partially dephased GHZ state and layered recovery",
}


def default_workers() -> int:
    env = os.environ.get("MIXEDORDER_THREADS")
    return int(env) if env and env.isdigit() and int(env) > 0 else 1


def run_experiment(cfg: RunConfig, params: _Strict, workers: int = 1) -> ExperimentResult:
    estimate(cfg.experiment, params).check()
    return RUNNERS[cfg.experiment](params, cfg.seed, workers)
