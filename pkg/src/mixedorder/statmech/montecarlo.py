"""Monte Carlo drivers: the random-bond Ising model on the Nishimori line, the doubled-coupling
Ising image of the purity, and the XY model with the squared rotor-dephasing bond weight."""

from __future__ import annotations

from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field, replace
from typing import Sequence

import numpy as np

from ..errors import BadAlpha, BadGrid, BadProbability
from ..lattice import LatticeSpec
from ..rng import stream
from . import kernels
from .analysis import binder, block, crossing_with_error, jackknife, level_crossing
from .replica import p_of_tau, tau_of_p
from .villain import bond_weight, truncated_coefficients

MODEL_RBIM = 1
MODEL_RENYI2 = 2
MODEL_VILLAIN = 3
MAX_MC_L = 32


@dataclass(frozen=True)
class Neighbors:
    nbr: np.ndarray
    bond_slot: np.ndarray  # bond index feeding nbr[i, k]
    bond_i: np.ndarray
    bond_j: np.ndarray
    is_x: np.ndarray


def neighbors(lattice: LatticeSpec) -> Neighbors:
    """Neighbor table of a periodic square lattice (every site has four bonds)."""
    if lattice.kind != "square" or lattice.boundary != "periodic" or min(lattice.Lx, lattice.Ly) < 3:
        raise BadGrid("Monte Carlo needs a periodic square lattice with L >= 3")
    n = lattice.n_sites
    nbr = np.empty((n, 4), dtype=np.int64)
    slot = np.empty((n, 4), dtype=np.int64)
    fill = np.zeros(n, dtype=np.int64)
    bonds = lattice.bond_array
    for b, (i, j) in enumerate(bonds):
        nbr[i, fill[i]], slot[i, fill[i]] = j, b
        fill[i] += 1
        nbr[j, fill[j]], slot[j, fill[j]] = i, b
        fill[j] += 1
    n_horizontal = lattice.Lx * lattice.Ly
    is_x = np.arange(len(bonds)) < n_horizontal
    return Neighbors(nbr, slot, bonds[:, 0].copy(), bonds[:, 1].copy(), is_x)


@dataclass(frozen=True)
class BondDisorder:
    """Quenched bond signs, one per lattice bond in lattice bond order; -1 with probability flip_prob."""

    lattice: LatticeSpec
    bond_signs: np.ndarray
    flip_prob: float
    seed: int

    @classmethod
    def sample(cls, lattice: LatticeSpec, p: float, seed: int, *key: int) -> "BondDisorder":
        if not (0.0 <= p <= 1.0):
            raise BadProbability(f"p={p!r} outside [0, 1]")
        rng = stream(seed, *key, 0)
        signs = np.where(rng.random(lattice.n_bonds) < p, -1.0, 1.0)
        return cls(lattice, signs, float(p), int(seed))


@dataclass(frozen=True)
class MCRun:
    """Sampler settings (sweeps are full lattice sweeps)."""

    n_therm: int = 1000
    n_sweeps: int = 4000
    measure_stride: int = 1
    seed: int = 12345
    wolff: bool = False
    n_wolff: int = 0

    def __post_init__(self):
        if self.n_therm < 100:
            raise BadGrid("n_therm must be at least 100 sweeps")
        if self.n_sweeps < 1 or self.measure_stride < 1:
            raise BadGrid("n_sweeps and measure_stride must be positive")

    @property
    def n_measurements(self) -> int:
        return self.n_sweeps // self.measure_stride


@dataclass
class MCRecord:
    model: str
    L: int
    p_or_alpha: float
    beta: float
    observable: str
    mean: float
    stderr: float
    n_samples: int
    seed: int

    def row(self) -> dict:
        return dict(self.__dict__)


@dataclass
class ScanResult:
    records: list[MCRecord] = field(default_factory=list)
    estimate: float = float("nan")
    estimate_err: float = float("nan")
    extra: dict = field(default_factory=dict)

    def table(self, observable: str) -> dict[int, tuple[np.ndarray, np.ndarray, np.ndarray]]:
        """{L: (x, mean, stderr)} for one observable, sorted by x."""
        out: dict = {}
        for r in self.records:
            if r.observable == observable:
                out.setdefault(r.L, []).append((r.p_or_alpha, r.mean, r.stderr))
        return {L: tuple(np.array(c) for c in zip(*sorted(v))) for L, v in out.items()}


def _map(fn, items, workers: int):
    if workers <= 1:
        return [fn(it) for it in items]
    with ThreadPoolExecutor(max_workers=workers) as ex:
        return list(ex.map(fn, items))


def nishimori_beta(p: float) -> float:
    """e^{-2 beta} = p / (1 - p)."""
    return float(0.5 * np.log((1.0 - p) / p))


# --- random-bond Ising --------------------------------------------------------------


def rbim_realization(L: int, p: float, beta: float, run: MCRun, key: tuple[int, ...]) -> np.ndarray:
    """Thermal means [m2, m4, |m|, |m(k)|^2, energy per bond, half-length correlator] for one disorder draw."""
    lat = LatticeSpec.square(L, boundary="periodic")
    nb = neighbors(lat)
    dis = BondDisorder.sample(lat, p, run.seed, *key)
    coup = dis.bond_signs[nb.bond_slot]
    rng = stream(run.seed, *key, 1)
    spins = np.ones(lat.n_sites, dtype=np.float64)
    means, _ = kernels.ising_run(spins, nb.nbr, coup, nb.bond_i, nb.bond_j, dis.bond_signs, L, beta,
                                 run.n_therm, run.n_measurements, run.measure_stride, False, rng)
    return means


def _xi_second_moment(means: np.ndarray, L: int) -> float:
    m2, mk = means[0], means[3]
    if mk <= 0 or m2 <= mk:
        return float("nan")
    return float(np.sqrt(m2 / mk - 1.0) / (2.0 * np.sin(np.pi / L)))


def rbim_nishimori_scan(p_grid: Sequence[float], sizes: Sequence[int], run: MCRun, n_disorder: int = 200,
                        workers: int = 1, crossing_sizes: tuple[int, int] | None = None) -> ScanResult:
    """Disorder-averaged Binder cumulant of the +-J model on the Nishimori line for each (p, L)."""
    p_grid = [float(p) for p in p_grid]
    if not p_grid or any(not (0.0 < p <= 0.25) for p in p_grid) or sorted(p_grid) != p_grid:
        raise BadGrid("p grid must be increasing inside (0, 0.25]")
    if any(L > MAX_MC_L or L < 4 for L in sizes):
        raise BadGrid(f"sizes must lie in [4, {MAX_MC_L}]")
    if n_disorder < 2:
        raise BadGrid("need at least two disorder realizations")
    res = ScanResult()
    binders: dict[int, list[tuple[float, float]]] = {}
    for L in sizes:
        for ip, p in enumerate(p_grid):
            beta = nishimori_beta(p)
            keys = [(MODEL_RBIM, L, ip, r) for r in range(n_disorder)]
            rows = np.array(_map(lambda k: rbim_realization(L, p, beta, run, k), keys, workers))
            u, du = binder(rows[:, 0], rows[:, 1])
            binders.setdefault(L, []).append((u, du))
            common = dict(model="rbim_nishimori", L=L, p_or_alpha=p, beta=beta, n_samples=n_disorder, seed=run.seed)
            res.records.append(MCRecord(observable="binder", mean=u, stderr=du, **common))
            for col, name in [(0, "m2"), (2, "abs_m"), (4, "energy_per_bond"), (5, "corr_half_L")]:
                res.records.append(MCRecord(observable=name, mean=float(rows[:, col].mean()),
                                            stderr=float(rows[:, col].std(ddof=1) / np.sqrt(n_disorder)), **common))
            xi, dxi = jackknife(rows[:, [0, 3]], lambda m: _xi_second_moment(np.array([m[0], 0, 0, m[1]]), L))
            res.records.append(MCRecord(observable="xi_second_moment", mean=xi, stderr=dxi, **common))
            res.records.append(MCRecord(observable="nishimori_energy_exact", mean=1.0 - 2.0 * p, stderr=0.0, **common))
    a, b = crossing_sizes or (min(sizes), max(sizes))
    if a != b:
        ua, ea = np.array(binders[a]).T
        ub, eb = np.array(binders[b]).T
        res.estimate, res.estimate_err = crossing_with_error(p_grid, ua, ea, ub, eb, stream(run.seed, MODEL_RBIM, 0, 0))
    res.extra = {"crossing_sizes": [a, b]}
    return res


# --- doubled-coupling Ising (purity image) ------------------------------------------------


def ising_point(L: int, coupling: float, run: MCRun, key: tuple[int, ...], n_blocks: int = 20):
    lat = LatticeSpec.square(L, boundary="periodic")
    nb = neighbors(lat)
    coup = np.ones((lat.n_sites, 4))
    rng = stream(run.seed, *key)
    spins = np.ones(lat.n_sites)
    stack = np.empty(lat.n_sites, dtype=np.int64)
    for _ in range(run.n_therm):
        kernels.ising_wolff_update(spins, nb.nbr, coupling, rng, stack)
        kernels.ising_metropolis_sweep(spins, nb.nbr, coup, coupling, rng)
    series = np.empty((run.n_measurements, 2))
    buf = np.zeros(4)
    ones = np.ones(lat.n_bonds)
    for t in range(run.n_measurements):
        for _ in range(run.measure_stride):
            kernels.ising_wolff_update(spins, nb.nbr, coupling, rng, stack)
            kernels.ising_metropolis_sweep(spins, nb.nbr, coup, coupling, rng)
        kernels.ising_measure(spins, L, nb.bond_i, nb.bond_j, ones, buf)
        series[t, 0] = buf[0] ** 2
        series[t, 1] = buf[0] ** 4
    blocks = block(series, n_blocks)
    return binder(blocks[:, 0], blocks[:, 1])


def renyi2_ising_scan(p_grid: Sequence[float], sizes: Sequence[int], run: MCRun, workers: int = 1) -> ScanResult:
    """Binder cumulant of the uniform Ising model at coupling 2 tau(p), tanh tau = p/(1-p)."""
    p_grid = [float(p) for p in p_grid]
    if not p_grid or any(not (0.0 < p < 0.5) for p in p_grid) or sorted(p_grid) != p_grid:
        raise BadGrid("p grid must be increasing inside (0, 0.5)")
    if any(L > MAX_MC_L or L < 4 for L in sizes):
        raise BadGrid(f"sizes must lie in [4, {MAX_MC_L}]")
    res = ScanResult()
    binders: dict[int, list] = {}
    for L in sizes:
        cells = [(L, ip, p) for ip, p in enumerate(p_grid)]
        out = _map(lambda c: ising_point(c[0], 2.0 * tau_of_p(c[2]), run, (MODEL_RENYI2, c[0], c[1])), cells, workers)
        for (L_, ip, p), (u, du) in zip(cells, out):
            binders.setdefault(L, []).append((u, du))
            res.records.append(MCRecord("renyi2_ising", L, p, 2.0 * tau_of_p(p), "binder", u, du,
                                        run.n_measurements, run.seed))
    a, b = min(sizes), max(sizes)
    if a != b:
        ua, ea = np.array(binders[a]).T
        ub, eb = np.array(binders[b]).T
        res.estimate, res.estimate_err = crossing_with_error(p_grid, ua, ea, ub, eb, stream(run.seed, MODEL_RENYI2, 0, 0))
    res.extra = {"crossing_sizes": [a, b]}
    return res


# --- XY model with the squared-kernel bond weight -------------------------------------


KT_JUMP = 2.0 / np.pi


def villain_point(L: int, alpha: float, run: MCRun, key: tuple[int, ...], n_blocks: int = 20):
    """Reduced helicity modulus and |m|^2 with blocked jackknife errors."""
    f = truncated_coefficients(alpha)
    if bond_weight(np.pi, f) <= 1e-9:
        raise BadAlpha(f"alpha={alpha} too small: truncated bond weight is not safely positive")
    lat = LatticeSpec.square(L, boundary="periodic")
    nb = neighbors(lat)
    rng = stream(run.seed, *key)
    theta = np.zeros(lat.n_sites)
    series, width, rate = kernels.xy_run(theta, nb.nbr, nb.bond_i, nb.bond_j, nb.is_x, f, L, run.n_therm,
                                         run.n_measurements, run.measure_stride, run.n_wolff, 1.0, rng)
    blocks = block(series, n_blocks)
    ups = jackknife(blocks[:, 1:3], lambda m: m[0] - m[1])
    mag = jackknife(blocks[:, 0], lambda m: m[0])
    return ups, mag, rate


def villain_kt_scan(alpha_grid: Sequence[float], sizes: Sequence[int], run: MCRun, workers: int = 1) -> ScanResult:
    """Helicity modulus of the f_n-weighted XY model over alpha; the KT estimate is where the reduced
    modulus of the largest size crosses 2/pi (i.e. alpha * Upsilon_reduced = 2 alpha / pi)."""
    alpha_grid = [float(a) for a in alpha_grid]
    if not alpha_grid or any(a <= 0 for a in alpha_grid) or sorted(alpha_grid) != alpha_grid:
        raise BadGrid("alpha grid must be positive and increasing")
    if any(L > MAX_MC_L or L < 4 for L in sizes):
        raise BadGrid(f"sizes must lie in [4, {MAX_MC_L}]")
    res = ScanResult()
    per_size: dict[int, list[float]] = {}
    for L in sizes:
        cells = [(ia, a) for ia, a in enumerate(alpha_grid)]
        out = _map(lambda c: villain_point(L, c[1], run, (MODEL_VILLAIN, L, c[0])), cells, workers)
        for (ia, a), ((u, du), (m2, dm2), rate) in zip(cells, out):
            per_size.setdefault(L, []).append(u)
            common = dict(model="villain_fn", L=L, p_or_alpha=a, beta=1.0 / a, n_samples=run.n_measurements,
                          seed=run.seed)
            res.records.append(MCRecord(observable="helicity_reduced", mean=u, stderr=du, **common))
            res.records.append(MCRecord(observable="helicity", mean=a * u, stderr=a * du, **common))
            res.records.append(MCRecord(observable="kt_line", mean=2.0 * a / np.pi, stderr=0.0, **common))
            res.records.append(MCRecord(observable="m2", mean=m2, stderr=dm2, **common))
            res.records.append(MCRecord(observable="metropolis_acceptance", mean=rate, stderr=0.0, **common))
    crossings = {L: level_crossing(alpha_grid, per_size[L], KT_JUMP) for L in sizes}
    res.estimate = crossings[max(sizes)]
    res.extra = {"crossing_by_size": crossings}
    return res


def renyi2_pc_from_coupling(coupling: float) -> float:
    """p at which the doubled coupling 2 tau(p) equals `coupling`."""
    return p_of_tau(coupling / 2.0)


def with_seed(run: MCRun, seed: int) -> MCRun:
    return replace(run, seed=int(seed))
