"""Named states: product, ideal strong-to-weak broken, counterexample, GHZ, thermal and decohered Ising.

Most of these states are diagonal in the X basis. A label b in {0,1}^n marks
site s in |-> when bit s is set (site 0 is the most significant bit). Such a
state with X-basis weights q has matrix elements rho[i, j] = g[i ^ j] where
g is the Walsh-Hadamard transform of q divided by 2^n.
"""

from __future__ import annotations

import base64
from dataclasses import dataclass
from functools import cached_property
from typing import Literal, Sequence

import numpy as np
from scipy.linalg import hadamard

from .channels import apply, zz_dephasing
from .densmat import (
    DensityMatrix,
    PauliString,
    check_dense_size,
)
from .errors import BadProbability, DimensionMismatch, MixedOrderError, TooLarge
from .lattice import LatticeSpec

__all__ = [
    "LatticeSpec",
    "ThermalSpec",
    "StringBasisState",
    "fwht",
    "popcount",
    "x_diagonal_state",
    "state_plus_product",
    "state_one_plus_X",
    "state_counterexample",
    "state_ghz",
    "state_thermal_commuting",
    "thermal_weights",
    "thermal_fidelity_closed_form",
    "state_decohered_ising",
    "decohered_ising_weights",
    "thermal_replicated_correlator",
    "state_to_json",
    "state_from_json",
]

MAX_STRING_SITES = 20


def popcount(a: np.ndarray) -> np.ndarray:
    a = np.asarray(a, dtype=np.uint64)
    return np.bitwise_count(a).astype(np.int64)


def fwht(q: np.ndarray) -> np.ndarray:
    """Unnormalized Walsh-Hadamard transform, Sylvester ordering."""
    a = np.array(q, dtype=float)
    d = a.size
    h = 1
    while h < d:
        a = a.reshape(-1, 2, h)
        a = np.stack([a[:, 0] + a[:, 1], a[:, 0] - a[:, 1]], axis=1).reshape(d)
        h *= 2
    return a


def x_diagonal_state(q: np.ndarray, n_sites: int | None = None) -> DensityMatrix:
    """Density matrix with X-basis weights q; the spectrum is known and passed through."""
    q = np.asarray(q, dtype=float)
    d = q.size
    n = int(np.log2(d)) if n_sites is None else n_sites
    if 2**n != d:
        raise DimensionMismatch(f"{d} weights do not fit {n} sites")
    check_dense_size(n)
    if np.any(q < -1e-15) or abs(q.sum() - 1.0) > 1e-10:
        raise BadProbability("X-basis weights must be a probability vector")
    q = np.clip(q, 0.0, None) / q.sum()
    g = fwht(q) / d
    idx = np.arange(d)
    mat = g[idx[:, None] ^ idx[None, :]]
    order = np.argsort(q, kind="stable")
    v = hadamard(d).astype(float)[:, order] / np.sqrt(d)
    return DensityMatrix(mat, n, _spectrum=(q[order], v))


def _parity_even(d: int) -> np.ndarray:
    return popcount(np.arange(d)) % 2 == 0


def state_plus_product(n: int) -> DensityMatrix:
    """|+...+><+...+|."""
    check_dense_size(n)
    q = np.zeros(2**n)
    q[0] = 1.0
    return x_diagonal_state(q, n)


def state_one_plus_X(n: int) -> DensityMatrix:
    """(1 + prod X) / 2^n."""
    check_dense_size(n)
    q = _parity_even(2**n) * 2.0 ** (1 - n)
    return x_diagonal_state(q, n)


def state_counterexample(L: int) -> DensityMatrix:
    """Equal mixture of |+...+> and (1 + prod X)/2^L."""
    check_dense_size(L, 12)
    d = 2**L
    q = _parity_even(d) * 2.0 ** (-L)
    q[0] += 0.5
    return x_diagonal_state(q, L)


def state_ghz(n: int) -> DensityMatrix:
    """Projector on (|0...0> + |1...1>)/sqrt(2)."""
    check_dense_size(n)
    d = 2**n
    mat = np.zeros((d, d))
    mat[0, 0] = mat[0, -1] = mat[-1, 0] = mat[-1, -1] = 0.5
    if d == 1:
        return DensityMatrix(np.ones((1, 1)))
    v = np.eye(d)
    s = 1 / np.sqrt(2)
    v[:, 0] = 0.0
    v[:, -1] = 0.0
    v[0, 0], v[-1, 0] = s, -s
    v[0, -1], v[-1, -1] = s, s
    w = np.zeros(d)
    w[-1] = 1.0
    return DensityMatrix(mat, n, _spectrum=(w, v))


@dataclass(frozen=True)
class ThermalSpec:
    """Gibbs weight exp(-beta sum_i b_i) over X eigenvalues b_i, restricted to a parity sector."""

    beta: float
    sector: Literal["even", "odd"] = "even"

    def __post_init__(self):
        if not np.isfinite(self.beta) or self.beta < 0:
            raise MixedOrderError(f"beta must be finite and nonnegative, got {self.beta!r}")
        if self.sector not in ("even", "odd"):
            raise MixedOrderError(f"unknown sector {self.sector!r}")


def thermal_weights(n: int, spec: ThermalSpec) -> np.ndarray:
    d = 2**n
    pc = popcount(np.arange(d))
    energy = n - 2 * pc  # sum_i b_i with b_i = +1 on unset bits
    logw = -spec.beta * energy.astype(float)
    mask = (pc % 2 == 0) if spec.sector == "even" else (pc % 2 == 1)
    w = np.where(mask, np.exp(logw - logw[mask].max()), 0.0)
    return w / w.sum()


def state_thermal_commuting(n: int, spec: ThermalSpec) -> DensityMatrix:
    """Sector-projected Gibbs state of the commuting model with B_i = X_i."""
    check_dense_size(n, 12)
    return x_diagonal_state(thermal_weights(n, spec), n)


def thermal_fidelity_closed_form(n: int, beta: float) -> float:
    """Charged two-point fidelity of the even-sector state, any pair of distinct sites."""
    return float(1.0 / np.cosh(beta) ** 2 / (1.0 + np.tanh(beta) ** n))


def decohered_ising_weights(lattice: LatticeSpec, p: float) -> np.ndarray:
    """X-basis weights of the ZZ-dephased |+...+>: each bond flips its two endpoint bits with probability p."""
    if not (0.0 <= p <= 1.0):
        raise BadProbability(f"p={p!r} outside [0, 1]")
    n = lattice.n_sites
    if n > MAX_STRING_SITES:
        raise TooLarge(f"{n} sites exceeds the string-basis cap of {MAX_STRING_SITES}")
    d = 2**n
    idx = np.arange(d)
    q = np.zeros(d)
    q[0] = 1.0
    for i, j in lattice.bonds:
        mask = (1 << (n - 1 - i)) | (1 << (n - 1 - j))
        q = (1.0 - p) * q + p * q[idx ^ mask]
    return q


@dataclass(frozen=True, eq=False)
class StringBasisState:
    """Decohered Ising state as a distribution over string boundaries.

    rho = (1-p)^{N_e} sum_l (tanh tau)^{|l|} |boundary(l)><boundary(l)| with
    tanh tau = p/(1-p); `boundary_probs[b]` aggregates all strings l sharing
    the boundary b.
    """

    lattice: LatticeSpec
    p: float

    @cached_property
    def boundary_probs(self) -> np.ndarray:
        return decohered_ising_weights(self.lattice, self.p)

    @property
    def n_sites(self) -> int:
        return self.lattice.n_sites

    @property
    def tanh_tau(self) -> float:
        return self.p / (1.0 - self.p) if self.p < 1 else np.inf

    def edge_masks(self) -> np.ndarray:
        n = self.n_sites
        return np.array([(1 << (n - 1 - i)) | (1 << (n - 1 - j)) for i, j in self.lattice.bonds], dtype=np.int64)

    def string_weights(self, max_edges: int = 22) -> dict[int, float]:
        """{edge-subset bitmask: weight} with weight p^|l| (1-p)^(N_e - |l|)."""
        ne = self.lattice.n_bonds
        if ne > max_edges:
            raise TooLarge(f"{ne} edges: too many string configurations to list")
        ls = np.arange(2**ne, dtype=np.int64)
        k = popcount(ls)
        w = self.p**k * (1.0 - self.p) ** (ne - k)
        return {int(m): float(x) for m, x in zip(ls, w)}

    def boundary_of(self, edge_mask: int) -> int:
        b = 0
        for e, m in enumerate(self.edge_masks()):
            if (edge_mask >> e) & 1:
                b ^= int(m)
        return b

    def to_density_matrix(self) -> DensityMatrix:
        check_dense_size(self.n_sites, 12)
        return x_diagonal_state(self.boundary_probs, self.n_sites)

    def to_json(self) -> dict:
        if self.lattice.n_bonds <= 22:
            data = {str(k): v for k, v in self.string_weights().items() if v > 0}
        else:
            data = {}
        return {"n_sites": self.n_sites, "representation": "string_basis", "lattice": self.lattice.to_json(),
                "p": self.p, "data": data}


def state_decohered_ising(lattice: LatticeSpec, p: float, representation: str = "dense"):
    """ZZ-dephased |+...+> on `lattice`."""
    if not (0.0 <= p <= 1.0):
        raise BadProbability(f"p={p!r} outside [0, 1]")
    if representation == "dense":
        check_dense_size(lattice.n_sites, 12)
        rho0 = state_plus_product(lattice.n_sites)
        return apply(zz_dephasing(lattice.n_sites, lattice, p), rho0)
    if representation == "string_basis":
        if lattice.n_sites > MAX_STRING_SITES:
            raise TooLarge(f"{lattice.n_sites} sites exceeds the string-basis cap of {MAX_STRING_SITES}")
        return StringBasisState(lattice, float(p))
    raise ValueError(f"unknown representation {representation!r}")


def hamiltonian_matrix(n_sites: int, terms: Sequence[tuple[float, PauliString]]) -> np.ndarray:
    check_dense_size(n_sites, 10)
    h = np.zeros((2**n_sites,) * 2, dtype=complex)
    for c, ps in terms:
        if ps.n_sites != n_sites:
            raise DimensionMismatch("Hamiltonian term size differs")
        h += c * ps.to_dense()
    return h


def gibbs_state(n_sites: int, terms, beta: float, sector: str | None = None) -> DensityMatrix:
    """exp(-beta H) / Z, optionally projected with (1 +- prod X)/2."""
    h = hamiltonian_matrix(n_sites, terms)
    w, v = np.linalg.eigh((h + h.conj().T) / 2)
    m = (v * np.exp(-beta * (w - w[0]))) @ v.conj().T
    if sector is not None:
        u = PauliString.global_x(n_sites)
        sign = 1.0 if sector == "even" else -1.0
        m = (m + sign * u.apply_left(m)) / 2
        m = (m + m.conj().T) / 2
    return DensityMatrix(m / np.trace(m).real)


def thermal_replicated_correlator(n_sites: int, terms, beta: float, n_rep: float, x: int, y: int,
                                  O="Z", sector: str | None = None) -> float:
    """Tr[(sqrt(rho) W rho W^dagger sqrt(rho))^n] / Tr rho^{2n} with W = O_x O_y^dagger.

    `terms` is a list of (coefficient, PauliString); rho is the (optionally
    sector-projected) Gibbs state. n_rep = 1/2 reproduces the fidelity correlator.
    """
    if n_sites > 10:
        raise TooLarge("replicated thermal correlator is limited to 10 sites")
    rho = gibbs_state(n_sites, terms, beta, sector)
    w = PauliString.two_point(n_sites, x, y, O)
    # sqrt(rho) W rho W^dag sqrt(rho) shares its nonzero spectrum with B B^dag, B = A^dag W A, rho = A A^dag
    a = rho.sqrt_factor
    sv = np.linalg.svd(a.conj().T @ w.apply_left(a), compute_uv=False)
    num = float(np.sum(sv ** (2 * n_rep)))
    den = float(np.sum(rho.eigenvalues ** (2 * n_rep)))
    return num / den


def commuting_model_terms(n_sites: int) -> list[tuple[float, PauliString]]:
    """H = sum_i X_i, the sign convention of the explicit partition sum."""
    return [(1.0, PauliString.from_map(n_sites, {i: "X"})) for i in range(n_sites)]


def state_to_json(rho) -> dict:
    if isinstance(rho, StringBasisState):
        return rho.to_json()
    m = np.ascontiguousarray(rho.mat, dtype="<c16")
    return {"n_sites": rho.n_sites, "representation": "dense", "dtype": "complex128-le",
            "data": base64.b64encode(m.tobytes()).decode("ascii")}


def state_from_json(d: dict):
    if d["representation"] == "string_basis":
        return StringBasisState(LatticeSpec.from_json(d["lattice"]), float(d["p"]))
    n = int(d["n_sites"])
    raw = np.frombuffer(base64.b64decode(d["data"]), dtype="<c16").reshape(2**n, 2**n)
    return DensityMatrix(raw.copy(), n)
