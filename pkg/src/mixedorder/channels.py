"""Quantum channels stored as ordered products of site-local Kraus gates."""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Sequence

import numpy as np

from .densmat import (
    PAULI,
    DensityMatrix,
    PauliString,
    SiteOperator,
    _check_sites,
    check_dense_size,
    conjugate_local,
    embed,
)
from .errors import (
    BadProbability,
    BadWeights,
    CompletenessViolated,
    DimensionMismatch,
)
from .lattice import LatticeSpec

COMPLETENESS_TOL = 1e-10
SYMMETRY_TOL = 1e-10


def _check_prob(p: float, name: str = "p") -> float:
    p = float(p)
    if not (0.0 <= p <= 1.0) or not np.isfinite(p):
        raise BadProbability(f"{name}={p!r} outside [0, 1]")
    return p


def _pauli_matrix(labels: Sequence[str]) -> np.ndarray:
    out = np.ones((1, 1), dtype=complex)
    for lab in labels:
        out = np.kron(out, PAULI[lab])
    return out


@dataclass(frozen=True, eq=False)
class LocalGate:
    """A channel acting on `sites` with Kraus operators given on those sites (in order).

    `pauli_mixture` maps Pauli label tuples to probabilities when the gate is a
    Pauli channel; such gates are applied by permutation and can be merged exactly.
    """

    sites: tuple[int, ...]
    kraus: tuple[np.ndarray, ...]
    pauli_mixture: dict | None = None

    def __post_init__(self):
        sites = tuple(int(s) for s in self.sites)
        d = 2 ** len(sites)
        ks = tuple(np.asarray(k, dtype=complex) for k in self.kraus)
        if not ks:
            raise CompletenessViolated("a gate needs at least one Kraus operator")
        for k in ks:
            if k.shape != (d, d):
                raise DimensionMismatch(f"Kraus operator shape {k.shape} does not fit {len(sites)} sites")
        s = sum(k.conj().T @ k for k in ks)
        dev = float(np.max(np.abs(s - np.eye(d))))
        if dev > COMPLETENESS_TOL:
            raise CompletenessViolated(f"|sum K^dagger K - 1|_max = {dev:.3e}")
        object.__setattr__(self, "sites", sites)
        object.__setattr__(self, "kraus", ks)

    @classmethod
    def from_pauli_mixture(cls, sites: Sequence[int], mixture: dict) -> "LocalGate":
        mixture = {tuple(k): float(v) for k, v in mixture.items() if v > 0.0}
        kraus = tuple(np.sqrt(p) * _pauli_matrix(lab) for lab, p in mixture.items())
        return cls(tuple(sites), kraus, mixture)

    def is_identity(self) -> bool:
        d = 2 ** len(self.sites)
        return len(self.kraus) == 1 and bool(np.allclose(self.kraus[0], np.eye(d), atol=1e-15))

    def apply_matrix(self, m: np.ndarray, n: int) -> np.ndarray:
        if self.pauli_mixture is not None:
            out = np.zeros(m.shape, dtype=np.result_type(m, float))
            for labels, p in self.pauli_mixture.items():
                if all(lab == "I" for lab in labels):
                    out = out + p * m
                    continue
                ps = PauliString(tuple(SiteOperator(s, lab) for s, lab in sorted(zip(self.sites, labels)) if lab != "I"), n)
                out = out + p * ps.conjugate(m)
            return out
        return sum(conjugate_local(m, k, self.sites, n) for k in self.kraus)

    def adjoint_matrix(self, m: np.ndarray, n: int) -> np.ndarray:
        """Heisenberg-picture map X -> sum K^dagger X K."""
        if self.pauli_mixture is not None:
            return self.apply_matrix(m, n)
        return sum(conjugate_local(m, k.conj().T, self.sites, n) for k in self.kraus)

    def shifted(self, offset: int) -> "LocalGate":
        mix = dict(self.pauli_mixture) if self.pauli_mixture is not None else None
        return LocalGate(tuple(s + offset for s in self.sites), self.kraus, mix)


def _merge_pauli(a: dict, b: dict) -> dict:
    """Mixture for applying a then b: products of Pauli labels, phases drop out under conjugation."""
    table = {("I", "X"): "X", ("X", "I"): "X", ("I", "Y"): "Y", ("Y", "I"): "Y", ("I", "Z"): "Z", ("Z", "I"): "Z",
             ("X", "Y"): "Z", ("Y", "X"): "Z", ("Y", "Z"): "X", ("Z", "Y"): "X", ("X", "Z"): "Y", ("Z", "X"): "Y"}
    out: dict = {}
    for la, pa in a.items():
        for lb, pb in b.items():
            lab = tuple("I" if x == y else table[(x, y)] for x, y in zip(la, lb))
            out[lab] = out.get(lab, 0.0) + pa * pb
    return out


@dataclass(frozen=True, eq=False)
class KrausChannel:
    """Ordered product of local gates on `n_sites` qubits (first gate acts first)."""

    n_sites: int
    gates: tuple[LocalGate, ...]
    description: dict = field(default_factory=dict)

    def __post_init__(self):
        gates = tuple(self.gates)
        for g in gates:
            _check_sites(g.sites, self.n_sites)
        object.__setattr__(self, "gates", gates)

    @classmethod
    def identity(cls, n_sites: int) -> "KrausChannel":
        return cls(n_sites, (), {"type": "identity", "n_sites": n_sites, "params": {}})

    @property
    def support(self) -> tuple[int, ...]:
        return tuple(sorted({s for g in self.gates for s in g.sites}))

    @property
    def n_kraus(self) -> int:
        """Size of the Kraus set of the product representation."""
        return int(np.prod([len(g.kraus) for g in self.gates])) if self.gates else 1

    def apply_matrix(self, m: np.ndarray) -> np.ndarray:
        if m.shape != (2**self.n_sites,) * 2:
            raise DimensionMismatch(f"channel on {self.n_sites} sites, matrix of shape {m.shape}")
        for g in self.gates:
            m = g.apply_matrix(m, self.n_sites)
        return m

    def adjoint_matrix(self, m: np.ndarray) -> np.ndarray:
        if m.shape != (2**self.n_sites,) * 2:
            raise DimensionMismatch(f"channel on {self.n_sites} sites, matrix of shape {m.shape}")
        for g in reversed(self.gates):
            m = g.adjoint_matrix(m, self.n_sites)
        return m

    def full_kraus(self, limit: int = 4096) -> list[np.ndarray]:
        """All products K_{i_last} ... K_{i_first} as full matrices (small systems only)."""
        check_dense_size(self.n_sites, 10)
        if self.n_kraus > limit:
            raise DimensionMismatch(f"{self.n_kraus} Kraus products exceed limit {limit}")
        d = 2**self.n_sites
        ops = [np.eye(d, dtype=complex)]
        for g in self.gates:
            local = [embed(k, g.sites, self.n_sites) for k in g.kraus]
            ops = [k @ o for o in ops for k in local]
        return ops

    def restricted_to(self, sites) -> "KrausChannel":
        """Gates whose support lies inside `sites`, re-indexed to positions within the sorted set."""
        sites = sorted(sites)
        pos = {s: i for i, s in enumerate(sites)}
        gates = []
        for g in self.gates:
            if all(s in pos for s in g.sites):
                mix = dict(g.pauli_mixture) if g.pauli_mixture is not None else None
                gates.append(LocalGate(tuple(pos[s] for s in g.sites), g.kraus, mix))
        return KrausChannel(len(sites), tuple(gates), {"type": "restricted", "n_sites": len(sites), "params": {"sites": sites}})

    def to_json(self) -> dict:
        return dict(self.description)


def apply(channel: KrausChannel, rho: DensityMatrix) -> DensityMatrix:
    """rho -> sum K rho K^dagger, re-validated."""
    if rho.n_sites != channel.n_sites:
        raise DimensionMismatch(f"channel on {channel.n_sites} sites, state on {rho.n_sites}")
    return DensityMatrix(channel.apply_matrix(rho.mat), rho.n_sites, rho.psd_tol)


# --- constructors -----------------------------------------------------------------


def _lattice_arg(n_sites: int, lattice: LatticeSpec | None) -> LatticeSpec:
    if lattice is None:
        return LatticeSpec.chain(n_sites)
    if lattice.n_sites != n_sites:
        raise DimensionMismatch(f"lattice has {lattice.n_sites} sites, expected {n_sites}")
    return lattice


def zz_dephasing(n_sites: int, lattice: LatticeSpec | None, p: float) -> KrausChannel:
    """Per bond: rho -> (1-p) rho + p Z_i Z_j rho Z_i Z_j."""
    p = _check_prob(p)
    lat = _lattice_arg(n_sites, lattice)
    mix = {("I", "I"): 1.0 - p, ("Z", "Z"): p}
    gates = tuple(LocalGate.from_pauli_mixture(b, mix) for b in lat.bonds)
    desc = {"type": "zz_dephasing", "n_sites": n_sites, "lattice": lat.to_json(), "params": {"p": p}}
    return KrausChannel(n_sites, gates, desc)


def zz_rotation(theta: float) -> np.ndarray:
    """exp(i theta Z Z) on two qubits."""
    ph = np.exp(1j * theta)
    return np.diag([ph, ph.conjugate(), ph.conjugate(), ph])


def general_ising_channel(n_sites: int, lattice: LatticeSpec | None, weights: Sequence[tuple[float, float]]) -> KrausChannel:
    """Per bond: rho -> sum_n p_n e^{i theta_n ZZ} rho e^{-i theta_n ZZ}."""
    ps = np.array([float(w[0]) for w in weights])
    if ps.size == 0 or np.any(ps < 0) or abs(ps.sum() - 1.0) > 1e-12:
        raise BadWeights(f"weights must be nonnegative and sum to 1, got {ps.tolist()}")
    lat = _lattice_arg(n_sites, lattice)
    kraus = tuple(np.sqrt(p) * zz_rotation(th) for p, th in weights if p > 0)
    gates = tuple(LocalGate(b, kraus) for b in lat.bonds)
    desc = {"type": "general_ising", "n_sites": n_sites, "lattice": lat.to_json(),
            "params": {"weights": [[float(p), float(t)] for p, t in weights]}}
    return KrausChannel(n_sites, gates, desc)


def theta_channel(n_sites: int, lattice: LatticeSpec | None, p: float, theta: float) -> KrausChannel:
    """Per bond: rho -> (1-p) rho + p e^{i theta ZZ} rho e^{-i theta ZZ}."""
    p = _check_prob(p)
    ch = general_ising_channel(n_sites, lattice, [(1.0 - p, 0.0), (p, theta)])
    desc = dict(ch.description, type="theta", params={"p": p, "theta": float(theta)})
    return KrausChannel(n_sites, ch.gates, desc)


def site_x_dephasing(n_sites: int, p: float, sites: Sequence[int] | None = None) -> KrausChannel:
    """Per site in `sites` (default all): rho -> (1-p) rho + p X_i rho X_i."""
    p = _check_prob(p)
    sites = list(range(n_sites)) if sites is None else sorted(int(s) for s in sites)
    mix = {("I",): 1.0 - p, ("X",): p}
    gates = tuple(LocalGate.from_pauli_mixture((s,), mix) for s in sites)
    desc = {"type": "site_x_dephasing", "n_sites": n_sites, "params": {"p": p, "sites": sites}}
    return KrausChannel(n_sites, gates, desc)


def beta_weight(p: float, theta: float) -> complex:
    """1 - p + p e^{2 i theta}: the factor multiplying a coherence flipped by one bond."""
    return 1.0 - p + p * np.exp(2j * theta)


def effective_beta(weights: Sequence[tuple[float, float]]) -> float:
    return float(abs(sum(p * np.exp(2j * th) for p, th in weights)))


def _commute_as_channels(g: LocalGate, h: LocalGate) -> bool:
    if not set(g.sites) & set(h.sites):
        return True
    return g.pauli_mixture is not None and h.pauli_mixture is not None


def compose(a: KrausChannel, b: KrausChannel, prune: bool = True) -> KrausChannel:
    """Channel applying `a` then `b`.

    The Kraus set is the set of products; with `prune`, Pauli-mixture gates on the
    same sites are merged exactly whenever every gate between them commutes with
    them as a channel (disjoint support, or both Pauli mixtures).
    """
    if a.n_sites != b.n_sites:
        raise DimensionMismatch(f"cannot compose channels on {a.n_sites} and {b.n_sites} sites")
    gates = list(a.gates) + list(b.gates)
    if prune:
        merged: list[LocalGate] = []
        for g in gates:
            target = None
            if g.pauli_mixture is not None:
                for idx in range(len(merged) - 1, -1, -1):
                    h = merged[idx]
                    if h.sites == g.sites and h.pauli_mixture is not None:
                        target = idx
                        break
                    if not _commute_as_channels(g, h):
                        break
            if target is None:
                merged.append(g)
            else:
                h = merged[target]
                merged[target] = LocalGate.from_pauli_mixture(g.sites, _merge_pauli(h.pauli_mixture, g.pauli_mixture))
        gates = merged
    desc = {"type": "composite", "n_sites": a.n_sites, "params": {"parts": [a.to_json(), b.to_json()]}}
    return KrausChannel(a.n_sites, tuple(gates), desc)


# --- symmetry -----------------------------------------------------------------------


@dataclass(frozen=True, eq=False)
class SymmetrySpec:
    generator: PauliString
    group_order: int = 2

    def __post_init__(self):
        if self.group_order < 1:
            raise ValueError("group order must be positive")
        scalar = 1.0 + 0j
        for f in self.generator.factors:
            m = np.linalg.matrix_power(f.matrix, self.group_order)
            c = m[0, 0]
            if np.max(np.abs(m - c * np.eye(2))) > 1e-12:
                raise ValueError("generator^order is not the identity")
            scalar *= c
        if abs(scalar - 1.0) > 1e-12:
            raise ValueError("generator^order is not the identity")

    @classmethod
    def z2(cls, n_sites: int) -> "SymmetrySpec":
        return cls(PauliString.global_x(n_sites), 2)


def check_strong_symmetry(channel: KrausChannel, sym: SymmetrySpec) -> tuple[bool, float]:
    """True iff every Kraus operator of the given representation commutes with the generator.

    The generator is a product over sites, so commutation of a gate's Kraus operator
    with the full generator is equivalent to commutation with its restriction to
    the gate's sites. Returns the max |[K, U]| entry as the violation.
    """
    if sym.generator.n_sites != channel.n_sites:
        raise DimensionMismatch("symmetry and channel sizes differ")
    worst = 0.0
    for g in channel.gates:
        u = sym.generator.local_matrix(g.sites)
        for k in g.kraus:
            worst = max(worst, float(np.max(np.abs(k @ u - u @ k))))
    return worst <= SYMMETRY_TOL, worst


# --- JSON ----------------------------------------------------------------------------


def channel_from_json(d: dict) -> KrausChannel:
    kind = d["type"]
    n = int(d["n_sites"])
    params = d.get("params", {})
    lat = LatticeSpec.from_json(d["lattice"]) if d.get("lattice") else None
    if kind == "identity":
        return KrausChannel.identity(n)
    if kind == "zz_dephasing":
        return zz_dephasing(n, lat, params["p"])
    if kind == "theta":
        return theta_channel(n, lat, params["p"], params["theta"])
    if kind == "general_ising":
        return general_ising_channel(n, lat, [tuple(w) for w in params["weights"]])
    if kind == "site_x_dephasing":
        return site_x_dephasing(n, params["p"], params.get("sites"))
    if kind == "composite":
        parts = [channel_from_json(x) for x in params["parts"]]
        out = parts[0]
        for q in parts[1:]:
            out = compose(out, q)
        return out
    raise ValueError(f"unknown channel type {kind!r}")


def random_local_channel(n_sites: int, sites: Sequence[int], rng: np.random.Generator, n_kraus: int = 2) -> KrausChannel:
    """Haar-ish random channel on `sites` from an isometry (Stinespring) draw."""
    k = len(sites)
    d = 2**k
    g = rng.standard_normal((n_kraus * d, d)) + 1j * rng.standard_normal((n_kraus * d, d))
    q, _ = np.linalg.qr(g)
    kraus = tuple(q[i * d:(i + 1) * d] for i in range(n_kraus))
    desc = {"type": "random_local", "n_sites": n_sites, "params": {"sites": list(sites), "n_kraus": n_kraus}}
    return KrausChannel(n_sites, (LocalGate(tuple(sites), kraus),), desc)

