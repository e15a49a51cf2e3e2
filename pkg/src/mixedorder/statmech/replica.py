"""Exact enumeration of the replicated Ising model and related closed forms.

The t-replica model has independent spins sigma^(1..t-1) per site; the t-th
replica is their product. Its Boltzmann weight is

    exp(+tau * sum_<ij> [ sum_{k<t} s_i^k s_j^k + prod_{k<t} s_i^k s_j^k ]),

i.e. -H_eff at inverse temperature tau, with tanh(tau) = p/(1-p). Each factor
(1 + tanh(tau) s s') equals exp(tau s s')/cosh(tau), which fixes the sign.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Sequence

import numpy as np

from ..errors import BadProbability, TooLarge
from ..lattice import LatticeSpec

MAX_ENUM_SPINS = 24
_CHUNK = 1 << 18


@dataclass(frozen=True)
class ReplicaSpinModel:
    t: int
    lattice: LatticeSpec
    tanh_tau: float

    def __post_init__(self):
        if self.t < 2:
            raise ValueError("replica count t must be at least 2")
        if not (0.0 <= self.tanh_tau < 1.0):
            raise BadProbability(f"tanh_tau={self.tanh_tau!r} outside [0, 1)")

    @classmethod
    def from_p(cls, t: int, lattice: LatticeSpec, p: float) -> "ReplicaSpinModel":
        if not (0.0 <= p < 0.5):
            raise BadProbability(f"p={p!r} must lie in [0, 1/2) for a real coupling")
        return cls(t, lattice, p / (1.0 - p))

    @property
    def tau(self) -> float:
        return float(np.arctanh(self.tanh_tau))


def _bond_wall_table(lattice: LatticeSpec) -> tuple[np.ndarray, np.ndarray]:
    """For each single-replica configuration c (bit s = spin down at site s, site 0 MSB):
    the number of unsatisfied bonds and the bitmask of unsatisfied bonds."""
    n = lattice.n_sites
    c = np.arange(2**n, dtype=np.int64)
    walls = np.zeros(2**n, dtype=np.int64)
    for e, (i, j) in enumerate(lattice.bonds):
        bi = (c >> (n - 1 - i)) & 1
        bj = (c >> (n - 1 - j)) & 1
        walls |= (bi ^ bj) << e
    return np.bitwise_count(walls.astype(np.uint64)).astype(np.int64), walls


def replica_enumerate(model: ReplicaSpinModel, insert: Sequence[tuple[int, int]] | None = None) -> float:
    """Partition sum, or with `insert` the expectation of the product of spins
    sigma_site^(replica) (replicas numbered 1..t; replica t is the product spin)."""
    n = model.lattice.n_sites
    r = model.t - 1
    if r * n > MAX_ENUM_SPINS:
        raise TooLarge(f"(t-1)*n = {r * n} exceeds {MAX_ENUM_SPINS}")
    ne = model.lattice.n_bonds
    tau = model.tau
    nwall, walls = _bond_wall_table(model.lattice)
    total = 2 ** (r * n)
    insert = list(insert or [])
    num = 0.0
    den = 0.0
    # shift energies by the all-satisfied maximum to avoid overflow
    emax = tau * ne * model.t
    for start in range(0, total, _CHUNK):
        idx = np.arange(start, min(total, start + _CHUNK), dtype=np.int64)
        cfg = [(idx >> (n * k)) & (2**n - 1) for k in range(r)]
        energy = np.zeros(idx.size)
        prod_walls = np.zeros(idx.size, dtype=np.int64)
        for k in range(r):
            energy += ne - 2 * nwall[cfg[k]]
            prod_walls ^= walls[cfg[k]]
        energy += ne - 2 * np.bitwise_count(prod_walls.astype(np.uint64)).astype(np.int64)
        w = np.exp(tau * energy - emax)
        den += float(w.sum())
        if insert:
            sign = np.ones(idx.size)
            for rep, site in insert:
                if not (1 <= rep <= model.t) or not (0 <= site < n):
                    raise ValueError(f"bad insertion ({rep}, {site})")
                bit_of = lambda c: (c >> (n - 1 - site)) & 1  # noqa: E731
                if rep < model.t:
                    sign *= 1 - 2 * bit_of(cfg[rep - 1])
                else:
                    for k in range(r):
                        sign *= 1 - 2 * bit_of(cfg[k])
            num += float((w * sign).sum())
    if insert:
        return num / den
    return den * float(np.exp(emax))


def ising_enumerate(lattice: LatticeSpec, coupling: float, insert: Sequence[int] | None = None) -> float:
    """Single Ising model exp(K sum s_i s_j): partition sum or spin-product expectation."""
    n = lattice.n_sites
    if n > MAX_ENUM_SPINS:
        raise TooLarge(f"{n} spins exceeds {MAX_ENUM_SPINS}")
    nwall, _ = _bond_wall_table(lattice)
    c = np.arange(2**n, dtype=np.int64)
    w = np.exp(coupling * (lattice.n_bonds - 2 * nwall))
    if not insert:
        return float(w.sum())
    sign = np.ones(c.size)
    for site in insert:
        sign *= 1 - 2 * ((c >> (n - 1 - site)) & 1)
    return float((w * sign).sum() / w.sum())


ONSAGER_KC = float(np.arctanh(np.sqrt(2.0) - 1.0))


def tau_of_p(p: float) -> float:
    return float(np.arctanh(p / (1.0 - p)))


def p_of_tau(tau: float) -> float:
    t = np.tanh(tau)
    return float(t / (1.0 + t))


def purity_ising_pc(return_tau: bool = False):
    """Decoherence strength at which the doubled-coupling Ising image of the purity is critical.

    2 tau_c = arctanh(sqrt(2) - 1), p_c = tanh(tau_c) / (1 + tanh(tau_c)).
    """
    tau_c = ONSAGER_KC / 2.0
    pc = p_of_tau(tau_c)
    return (pc, tau_c) if return_tau else pc


def fdw_weight(p: float, theta: float, D: np.ndarray, D_prime: np.ndarray) -> complex:
    """prod_e alpha^{(s_e - s'_e)/2} beta^{|s_e - s'_e|/2} for edge signs s, s' in {+1, -1}.

    beta = |1 - p + p e^{2 i theta}| and alpha = (1 - p + p e^{2 i theta}) / beta.
    """
    if not (0.0 <= p <= 1.0):
        raise BadProbability(f"p={p!r} outside [0, 1]")
    D = np.asarray(D)
    Dp = np.asarray(D_prime)
    z = 1.0 - p + p * np.exp(2j * theta)
    beta = abs(z)
    diff = (D - Dp) // 2
    n_diff = int(np.sum(np.abs(diff)))
    if n_diff == 0:
        return 1.0 + 0j
    if beta == 0.0:
        return 0j
    alpha = z / beta
    return complex(alpha ** int(np.sum(diff)) * beta**n_diff)


def fdw_beta(p: float, theta: float) -> float:
    return float(np.sqrt(1.0 - 4.0 * p * (1.0 - p) * np.sin(theta) ** 2))
