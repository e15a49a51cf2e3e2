"""Petz recovery maps, the CMI recoverability bound, layered recovery on chains and the GHZ obstruction.

The recovery map for reference sigma and channel E is

    R^t(X) = sigma^{1/2 - it} E^dag[ E(sigma)^{-1/2 + it} X E(sigma)^{-1/2 - it} ] sigma^{1/2 + it},

and the rotated map averages R^{t/2} against beta0(t) = (pi/2) / (cosh(pi t) + 1).
With sigma = rho_AB (x) rho_C and E acting inside A, the C factor drops out, so the map is
built on the region AB and applied to a global state as a local operation.
"""

from __future__ import annotations

import json
import logging
from dataclasses import asdict, dataclass, field
from functools import cached_property
from typing import Sequence

import numpy as np

from .channels import KrausChannel, LocalGate, SymmetrySpec, apply, site_x_dephasing
from .densmat import (
    SUPPORT_TOL,
    DensityMatrix,
    check_dense_size,
    hermitian_eigh,
    hermitian_part,
    partial_trace,
    permute_qubits,
)
from .diagnostics import cmi, fidelity, trace_distance
from .errors import BadPartition, BadSchedule, DimensionMismatch, SingularReference, TooLarge
from .models import state_ghz

log = logging.getLogger(__name__)

MAX_LAYERED_SITES = 12
TRACE_DEFICIT_WARN = 1e-8
SYMMETRY_TOL = 1e-8
SUPEROP_MAX_SITES = 5


def beta0(t):
    """(pi/2) / (cosh(pi t) + 1); integrates to 1 over the real line."""
    t = np.asarray(t, dtype=float)
    return (np.pi / 2.0) / (np.cosh(np.pi * t) + 1.0)


def beta0_tail(t_cutoff: float) -> float:
    """Mass of beta0 outside [-t_cutoff, t_cutoff], i.e. 1 - tanh(pi t_cutoff / 2)."""
    return float(2.0 / (np.exp(np.pi * t_cutoff) + 1.0))


@dataclass(frozen=True)
class Rotation:
    """`standard` is the t = 0 Petz map; `rotated` integrates over t by Gauss-Legendre."""

    kind: str = "rotated"
    n_nodes: int = 96
    t_cutoff: float = 7.0

    def __post_init__(self):
        if self.kind not in ("standard", "rotated"):
            raise ValueError(f"unknown rotation kind {self.kind!r}")
        if self.kind == "rotated" and (self.n_nodes < 2 or not self.t_cutoff > 0):
            raise ValueError("rotated quadrature needs n_nodes >= 2 and t_cutoff > 0")

    @classmethod
    def standard(cls) -> "Rotation":
        return cls("standard", 1, 0.0)

    def nodes(self) -> tuple[np.ndarray, np.ndarray]:
        """Points t_j and weights w_j with sum_j w_j g(t_j) ~ integral beta0(t) g(t) dt."""
        if self.kind == "standard":
            return np.zeros(1), np.ones(1)
        x, gw = np.polynomial.legendre.leggauss(self.n_nodes)
        t = self.t_cutoff * x
        return t, self.t_cutoff * gw * beta0(t)


@dataclass(frozen=True, eq=False)
class PetzSpec:
    """Reference state and channel on a region; `sites` places the region in a larger system."""

    sigma: DensityMatrix
    channel: KrausChannel
    rotation: Rotation = field(default_factory=Rotation)
    sites: tuple[int, ...] | None = None

    def __post_init__(self):
        if self.channel.n_sites != self.sigma.n_sites:
            raise DimensionMismatch(
                f"reference on {self.sigma.n_sites} sites, channel on {self.channel.n_sites}")
        sites = tuple(range(self.sigma.n_sites)) if self.sites is None else tuple(self.sites)
        if len(sites) != self.sigma.n_sites or len(set(sites)) != len(sites):
            raise BadPartition(f"region sites {sites} do not match a {self.sigma.n_sites}-site reference")
        if list(sites) != sorted(sites):
            raise BadPartition("region sites must be sorted (reference is in ascending site order)")
        object.__setattr__(self, "sites", sites)


def _support_log(w: np.ndarray, tol: float) -> tuple[np.ndarray, np.ndarray]:
    on = w > tol
    lw = np.where(on, np.log(np.where(on, w, 1.0)), 0.0)
    return on, lw


class PetzMap:
    """Channel X -> sum_j w_j R^{t_j/2}(X) acting on the region of `spec`.

    Each R^t is trace preserving on the support of E(sigma); input weight outside it is
    sent to sigma, which makes the map trace preserving everywhere.
    """

    def __init__(self, spec: PetzSpec, support_tol: float = SUPPORT_TOL):
        self.spec = spec
        self.sites = spec.sites
        self.k = len(spec.sites)
        lam, vl = hermitian_eigh(spec.sigma.mat)
        es = spec.channel.apply_matrix(spec.sigma.mat)
        mu, vm = hermitian_eigh(es)
        if mu.max() <= support_tol:
            raise SingularReference("E(sigma) vanishes")
        self._on_l, self._log_l = _support_log(lam, support_tol * lam.max())
        self._on_m, self._log_m = _support_log(mu, support_tol * mu.max())
        self._sqrt_l = np.where(self._on_l, np.sqrt(np.clip(lam, 0, None)), 0.0)
        self._isqrt_m = np.where(self._on_m, 1.0 / np.sqrt(np.where(self._on_m, mu, 1.0)), 0.0)
        self._vl, self._vm = vl.astype(complex), vm.astype(complex)
        self.t, self.w = spec.rotation.nodes()
        self._adj_cache: dict[int, KrausChannel] = {}

    # -- Kraus form ----------------------------------------------------------------

    def kraus_at(self, t: float) -> list[np.ndarray]:
        """Kraus operators sigma^{1/2 - it} K^dag E(sigma)^{-1/2 + it} of R^t on the region."""
        a = self._vl @ np.diag(self._sqrt_l * np.exp(-1j * t * self._log_l)) @ self._vl.conj().T
        b = self._vm @ np.diag(self._isqrt_m * np.exp(1j * t * self._log_m)) @ self._vm.conj().T
        return [a @ K.conj().T @ b for K in self.spec.channel.full_kraus()]

    def kraus_operators(self) -> list[np.ndarray]:
        """Kraus set of the quadrature map (weights folded in) including the completion
        sqrt(lambda_c) |c><b| that sends supp E(sigma)-complement vectors b to sigma."""
        ops = [np.sqrt(w) * K for t, w in zip(self.t, self.w) for K in self.kraus_at(t / 2.0)]
        for b in self._vm[:, ~self._on_m].T:
            for lam, c in zip(self._sqrt_l, self._vl.T):
                if lam > 0:
                    ops.append(lam * np.outer(c, b.conj()))
        return ops

    # -- action --------------------------------------------------------------------

    def _adjoint_channel(self, n: int) -> KrausChannel:
        # region occupies the leading qubits after permutation
        if n not in self._adj_cache:
            self._adj_cache[n] = KrausChannel(n, self.spec.channel.gates)
        return self._adj_cache[n]

    @cached_property
    def _eigen_superoperator(self) -> np.ndarray:
        """Node-summed map from the E(sigma) eigenbasis to the sigma eigenbasis (row-major vec).

        The node phase exp(-i t/2 (log l_a - log l_b - log m_c + log m_d)) factorizes into a
        row part and a column part, so the node sum is one matrix product.
        """
        ll, lm = self._log_l, self._log_m
        alpha = (ll[:, None] - ll[None, :]).reshape(-1)
        beta = (lm[:, None] - lm[None, :]).reshape(-1)
        ea = np.exp(-0.5j * np.outer(self.t, alpha))
        eb = np.exp(0.5j * np.outer(self.t, beta))
        G = (ea.T * self.w) @ eb
        G *= np.outer(np.outer(self._sqrt_l, self._sqrt_l).reshape(-1), np.outer(self._isqrt_m, self._isqrt_m).reshape(-1))
        M = np.zeros_like(G)
        for K in self.spec.channel.full_kraus():
            A = self._vl.conj().T @ K.conj().T @ self._vm
            M += np.kron(A, A.conj())
        return G * M

    @cached_property
    def superoperator(self) -> np.ndarray:
        """S with vec(R(X)) = S vec(X) for row-major vec on the region."""
        vl, vm = self._vl, self._vm
        S = np.kron(vl, vl.conj()) @ self._eigen_superoperator @ np.kron(vm.conj().T, vm.T)
        # trace-preserving completion: weight outside supp E(sigma) is replaced by sigma
        S += np.outer(self.spec.sigma.mat.reshape(-1), self._off_projector.T.reshape(-1))
        return S

    @cached_property
    def _off_projector(self) -> np.ndarray:
        off = self._vm[:, ~self._on_m]
        return off @ off.conj().T

    def _off_support_weight(self, x4: np.ndarray) -> float:
        """Fraction of the trace of the (region-leading) operator outside supp E(sigma)."""
        w = np.einsum("ba,aebe->", self._off_projector, x4).real
        total = np.einsum("aeae->", x4).real
        return abs(w) / max(abs(total), 1e-300)

    def apply_matrix(self, m: np.ndarray, n: int | None = None, check_support: bool = True) -> np.ndarray:
        """Apply the map to an operator on n >= region qubits (region sites given by `spec.sites`)."""
        n = self.k if n is None else n
        if m.shape != (2**n, 2**n):
            raise DimensionMismatch(f"matrix of shape {m.shape} is not on {n} qubits")
        if self.sites and max(self.sites) >= n:
            raise BadPartition(f"region {self.sites} outside a {n}-site system")
        order = list(self.sites) + [s for s in range(n) if s not in self.sites]
        inverse = [order.index(s) for s in range(n)]
        dr, d = 2**self.k, 2**n
        do = d // dr
        x = permute_qubits(np.asarray(m, dtype=complex), order, n)
        if check_support and not self._on_m.all():
            off = self._off_support_weight(x.reshape(dr, do, dr, do))
            if off > 1e-8:
                raise SingularReference(f"input has weight {off:.3e} outside the support of E(sigma)")
        if self.k <= SUPEROP_MAX_SITES:
            return permute_qubits(self._apply_superop(x, n), inverse, n)
        return permute_qubits(self._apply_by_nodes(x, n), inverse, n)

    def _apply_superop(self, x: np.ndarray, n: int) -> np.ndarray:
        dr, d = 2**self.k, 2**n
        do = d // dr
        vl, vm = self._vl, self._vm
        x4 = x.reshape(dr, do, dr, do)
        xt = np.einsum("ca,aebf,bd->cdef", vm.conj().T, x4, vm, optimize=True).reshape(dr * dr, do * do)
        y = (self._eigen_superoperator @ xt).reshape(dr, dr, do, do)
        out = np.einsum("ac,cdef,db->aebf", vl, y, vl.conj().T, optimize=True).reshape(d, d)
        if not self._on_m.all():
            rest = np.einsum("ba,aebf->ef", self._off_projector, x4)
            out += np.kron(self.spec.sigma.mat, rest)
        return out

    def _apply_by_nodes(self, x: np.ndarray, n: int) -> np.ndarray:
        # region-leading operator; node by node in the eigenbases of E(sigma) and sigma
        dr, d = 2**self.k, 2**n
        do = d // dr

        def left(op, x):
            return (op @ x.reshape(dr, do * d)).reshape(d, d)

        def right(x, op):
            return (x.reshape(d, dr, do).transpose(0, 2, 1) @ op).transpose(0, 2, 1).reshape(d, d)

        def scale(x, a, b):
            return (x.reshape(dr, do, dr, do) * (a[:, None, None, None] * b[None, None, :, None])).reshape(d, d)

        vm, vl = self._vm, self._vl
        xt = scale(right(left(vm.conj().T, x), vm), self._isqrt_m, self._isqrt_m)
        adj = self._adjoint_channel(n)
        acc = np.zeros((d, d), dtype=complex)
        for t, w in zip(self.t, self.w):
            ph = np.exp(0.5j * t * self._log_m)
            y = right(left(vm, scale(xt, ph, ph.conj())), vm.conj().T)
            z = adj.adjoint_matrix(y)
            wz = right(left(vl.conj().T, z), vl)
            pl = np.exp(-0.5j * t * self._log_l)
            acc += w * scale(wz, pl, pl.conj())
        out = right(left(vl, scale(acc, self._sqrt_l, self._sqrt_l)), vl.conj().T)
        if not self._on_m.all():
            rest = np.einsum("ba,aebf->ef", self._off_projector, x.reshape(dr, do, dr, do))
            out += np.kron(self.spec.sigma.mat, rest)
        return out

    def apply_with_deficit(self, rho: DensityMatrix, strict: bool = True) -> tuple[DensityMatrix, float]:
        """Apply and renormalize away the quadrature tail. With strict=False, input weight
        outside the support of E(sigma) is accepted and mapped to sigma instead of raising."""
        out = hermitian_part(self.apply_matrix(rho.mat, rho.n_sites, check_support=strict), tol=1e-6)
        if np.iscomplexobj(out) and np.max(np.abs(out.imag)) < 1e-14:
            out = np.ascontiguousarray(out.real)
        tr = float(np.trace(out).real)
        if tr <= 0:
            raise SingularReference("recovered operator has non-positive trace")
        deficit = 1.0 - tr
        if abs(deficit) > TRACE_DEFICIT_WARN:
            log.log(logging.WARNING if strict else logging.INFO, "recovery trace deficit %.3e renormalized", deficit)
        return DensityMatrix(out / tr, rho.n_sites), float(deficit)

    def apply(self, rho: DensityMatrix, strict: bool = True) -> DensityMatrix:
        return self.apply_with_deficit(rho, strict)[0]


def petz_map(spec: PetzSpec) -> PetzMap:
    return PetzMap(spec)


def check_recovery_symmetry(spec: PetzSpec, sym: SymmetrySpec) -> tuple[bool, float]:
    """Whether every Kraus operator of R^{t_j/2}, at every quadrature node, commutes with the
    symmetry generator restricted to the region. Returns (ok, max |[K, U]| entry)."""
    u = sym.generator.local_matrix(spec.sites)
    if u.shape[0] != 2 ** len(spec.sites):
        raise DimensionMismatch("symmetry generator does not cover the region")
    pm = PetzMap(spec)
    worst = 0.0
    for t in pm.t:
        for K in pm.kraus_at(t / 2.0):
            worst = max(worst, float(np.max(np.abs(K @ u - u @ K))))
    return worst <= SYMMETRY_TOL, worst


# --- recoverability bound --------------------------------------------------------------


@dataclass
class RecoveryReport:
    fidelity_recovered: float
    cmi_before: float
    cmi_after: float
    bound_slack: float
    trace_distance_residual: float
    trace_norm_bound: float = float("nan")
    trace_deficit: float = 0.0
    extra: dict = field(default_factory=dict)

    @property
    def trace_norm_residual(self) -> float:
        return 2.0 * self.trace_distance_residual

    @property
    def trace_norm_slack(self) -> float:
        return self.trace_norm_bound - self.trace_norm_residual

    def to_dict(self) -> dict:
        return asdict(self)

    def to_json(self) -> str:
        return json.dumps(self.to_dict())


def _partition(n: int, A, B, C) -> tuple[list[int], list[int], list[int]]:
    A, B, C = sorted(set(A)), sorted(set(B)), sorted(set(C))
    if not A:
        raise BadPartition("region A is empty")
    if set(A) & set(B) or set(B) & set(C) or set(A) & set(C):
        raise BadPartition("A, B, C must be disjoint")
    if sorted(A + B + C) != list(range(n)):
        raise BadPartition(f"A, B, C must cover all {n} sites")
    return A, B, C


def local_petz(rho: DensityMatrix, channel: KrausChannel, region: Sequence[int],
               rotation: Rotation | None = None) -> PetzMap:
    """Petz map on `region` with reference rho_region for the part of `channel` inside it."""
    region = sorted(region)
    outside = set(channel.support) - set(region)
    if outside:
        raise BadPartition(f"channel acts on {sorted(outside)} outside the recovery region")
    spec = PetzSpec(partial_trace(rho, region), channel.restricted_to(region),
                    rotation or Rotation(), tuple(region))
    return PetzMap(spec)


def cmi_markov_gap(rho: DensityMatrix, channel: KrausChannel, A, B, C,
                   rotation: Rotation | None = None) -> RecoveryReport:
    """Recover E(rho) with the Petz map of sigma = rho_AB (x) rho_C and compare with the CMI drop.

    CMIs are in nats; the bound reads -2 log2 F <= (I_before - I_after) / ln 2, and the
    trace-norm form ||rho - R(E(rho))||_1 <= sqrt(4 I_before) (nats).
    """
    A, B, C = _partition(rho.n_sites, A, B, C)
    if not set(channel.support) <= set(A):
        raise BadPartition(f"channel support {channel.support} is not inside A={A}")
    rho_f = apply(channel, rho)
    before = cmi(rho, A, B, C)
    after = cmi(rho_f, A, B, C)
    pm = local_petz(rho, channel, A + B, rotation)
    rec, deficit = pm.apply_with_deficit(rho_f)
    F = min(fidelity(rho, rec), 1.0)
    lhs = -2.0 * np.log2(F) if F > 0 else np.inf
    rhs = (before - after) / np.log(2.0)
    return RecoveryReport(
        fidelity_recovered=float(F),
        cmi_before=float(before),
        cmi_after=float(after),
        bound_slack=float(rhs - lhs),
        trace_distance_residual=float(trace_distance(rho, rec)),
        trace_norm_bound=float(np.sqrt(4.0 * max(before, 0.0))),
        trace_deficit=deficit,
    )


def annular_partition(n: int, start: int, width: int, buffer: int) -> tuple[list[int], list[int], list[int]]:
    """A = [start, start + width), B = up to `buffer` sites on each side of A, C = the rest (chain)."""
    if not (0 <= start and width >= 1 and start + width <= n and buffer >= 0):
        raise BadPartition(f"block [{start}, {start + width}) does not fit a {n}-site chain")
    A = list(range(start, start + width))
    B = [s for s in range(start - buffer, start + width + buffer) if 0 <= s < n and s not in A]
    C = [s for s in range(n) if s not in A and s not in B]
    return A, B, C


def random_recovery_instance(rng: np.random.Generator, max_qubits: int = 8, min_qubits: int = 3):
    """Random state, random channel on a random block A and an annular B around it.

    Returns (rho, channel, A, B, C). States are drawn with random rank so that both
    full-rank and low-rank references occur.
    """
    from .channels import random_local_channel
    from .densmat import random_density_matrix

    n = int(rng.integers(min_qubits, max_qubits + 1))
    width = int(rng.integers(1, min(2, n - 1) + 1))
    start = int(rng.integers(0, n - width + 1))
    buffer = int(rng.integers(1, 3))
    A, B, C = annular_partition(n, start, width, buffer)
    rank = int(rng.integers(1, 2**n + 1))
    rho = random_density_matrix(n, rng, rank=rank)
    channel = random_local_channel(n, A, rng, n_kraus=int(rng.integers(1, 4)))
    return rho, channel, A, B, C


# --- layered recovery --------------------------------------------------------------------


@dataclass
class RecoveryStep:
    step: int
    layer: int
    parity: int
    blocks: list[int]
    cmi_before: float
    cmi_after: float
    fidelity: float
    step_residual: float
    cumulative_residual: float
    residual_bound: float

    def rows(self) -> list[dict]:
        return [dict(step=self.step, block=b, cmi_before=self.cmi_before, cmi_after=self.cmi_after,
                     fidelity=self.fidelity, cumulative_residual=self.cumulative_residual)
                for b in self.blocks]


@dataclass
class LayeredReport:
    steps: list[RecoveryStep]
    final_residual: float
    single_shot_residual: float
    block_size: int

    def rows(self) -> list[dict]:
        return [r for s in self.steps for r in s.rows()]

    def to_dict(self) -> dict:
        return {"steps": [asdict(s) for s in self.steps], "final_residual": self.final_residual,
                "single_shot_residual": self.single_shot_residual, "block_size": self.block_size}


def _sublayers(n: int, layers: Sequence[KrausChannel], L0: int) -> list[tuple[int, int, dict[int, list[LocalGate]]]]:
    """Split each layer into block-parity sublayers: [(layer, parity, {block: gates})]."""
    out = []
    for li, layer in enumerate(layers):
        if layer.n_sites != n:
            raise BadSchedule(f"layer {li} acts on {layer.n_sites} sites, chain has {n}")
        used: set[int] = set()
        by_parity: list[dict[int, list[LocalGate]]] = [{}, {}]
        for g in layer.gates:
            if used & set(g.sites):
                raise BadSchedule(f"gates overlap within layer {li}")
            used |= set(g.sites)
            if max(g.sites) - min(g.sites) + 1 > L0 // 2 + 1:
                raise BadSchedule(f"gate on {g.sites} wider than the buffer allows for block size {L0}")
            b = min(g.sites) // L0
            by_parity[b % 2].setdefault(b, []).append(g)
        for parity in (0, 1):
            if by_parity[parity]:
                out.append((li, parity, by_parity[parity]))
    return out


def _block_region(n: int, block: int, L0: int, gates: Sequence[LocalGate]) -> list[int]:
    lo = max(0, block * L0 - L0 // 2)
    hi = min(n, (block + 1) * L0 + L0 // 2)
    region = set(range(lo, hi))
    for g in gates:
        region |= set(g.sites)
    return sorted(region)


def _recover_blocks(rho_ref: DensityMatrix, blocks: dict[int, list[LocalGate]], L0: int,
                    rotation: Rotation) -> list[tuple[int, PetzMap]]:
    n = rho_ref.n_sites
    maps = []
    for b in sorted(blocks):
        ch = KrausChannel(n, tuple(blocks[b]))
        maps.append((b, local_petz(rho_ref, ch, _block_region(n, b, L0, blocks[b]), rotation)))
    return maps


def _apply_maps(maps, rho: DensityMatrix) -> DensityMatrix:
    # later steps may see states outside a reference support; that signals failed recovery, not an error
    for _, pm in maps:
        rho = pm.apply(rho, strict=False)
    return rho


def layered_recovery(rho0: DensityMatrix, channel_layers: Sequence[KrausChannel], block_size: int,
                     rotation: Rotation | None = None, step_diagnostics: bool = True) -> LayeredReport:
    """Undo a finite-depth channel on a chain sublayer by sublayer, last first.

    Each layer is split into two sublayers by the parity of the block (size `block_size`)
    that holds a gate's leftmost site. Gates of one block are reversed by a Petz map on
    the block widened by block_size // 2 on both sides, with the pre-sublayer state as
    reference. The single-shot comparison reverses every gate of the whole channel at once,
    block by block, with rho0 as the reference. With step_diagnostics=False only the final
    and single-shot residuals are computed (per-step fields are nan).
    """
    n = rho0.n_sites
    if n > MAX_LAYERED_SITES:
        raise TooLarge(f"layered recovery limited to {MAX_LAYERED_SITES} sites, got {n}")
    check_dense_size(n)
    L0 = int(block_size)
    if L0 < 1:
        raise BadSchedule("block size must be positive")
    rotation = rotation or Rotation()
    subs = _sublayers(n, channel_layers, L0)
    if not subs:
        raise BadSchedule("no gates to recover")
    states = [rho0]
    for _, _, blocks in subs:
        ch = KrausChannel(n, tuple(g for b in sorted(blocks) for g in blocks[b]))
        states.append(apply(ch, states[-1]))
    h = len(subs)
    cur = states[-1]
    steps: list[RecoveryStep] = []
    bound = 0.0
    for k in range(h, 0, -1):
        li, parity, blocks = subs[k - 1]
        prev = states[k - 1]
        maps = _recover_blocks(prev, blocks, L0, rotation)
        cur = _apply_maps(maps, cur)
        nan = float("nan")
        row = dict(cmi_before=nan, cmi_after=nan, fidelity=nan, step_residual=nan,
                   cumulative_residual=nan, residual_bound=nan)
        if step_diagnostics:
            one_step = _apply_maps(maps, states[k])
            r_k = trace_distance(one_step, prev)
            bound += r_k
            # CMI of the first block's partition, as a representative of the step
            b0, pm0 = maps[0]
            A = sorted({s for g in blocks[b0] for s in g.sites})
            B = sorted(set(pm0.sites) - set(A))
            C = sorted(set(range(n)) - set(pm0.sites))
            row = dict(cmi_before=cmi(prev, A, B, C), cmi_after=cmi(states[k], A, B, C),
                       fidelity=min(fidelity(prev, one_step), 1.0), step_residual=r_k,
                       cumulative_residual=trace_distance(cur, prev), residual_bound=bound)
        steps.append(RecoveryStep(step=h - k + 1, layer=li, parity=parity, blocks=sorted(blocks),
                                  **{key: float(v) for key, v in row.items()}))
    final = trace_distance(cur, rho0)
    # single shot: all gates of the whole channel grouped by block, reference rho0
    all_blocks: dict[int, list[LocalGate]] = {}
    for layer in channel_layers:
        for g in layer.gates:
            all_blocks.setdefault(min(g.sites) // L0, []).append(g)
    single = states[-1]
    for b in sorted(all_blocks, reverse=True):
        ch = KrausChannel(n, tuple(all_blocks[b]))
        single = local_petz(rho0, ch, _block_region(n, b, L0, all_blocks[b]), rotation).apply(single, strict=False)
    return LayeredReport(steps, float(final), float(trace_distance(single, rho0)), L0)


# --- GHZ obstruction -------------------------------------------------------------------


def ghz_partial_dephasing(n: int, x: int, p: float = 0.5) -> DensityMatrix:
    """GHZ state with X dephasing on every site except 0 and x."""
    if not (0 < x < n):
        raise BadPartition(f"x={x} must lie in 1..{n - 1}")
    sites = [s for s in range(n) if s not in (0, x)]
    return apply(site_x_dephasing(n, p, sites), state_ghz(n))


def ghz_partition(n: int, x: int) -> tuple[list[int], list[int], list[int]]:
    """(first site, sites strictly between it and x, x together with the sites after it)."""
    return [0], list(range(1, x)), [x] + list(range(x + 1, n))


def ghz_counterexample(n: int = 8, x: int | None = None, p: float = 0.5,
                       rotation: Rotation | None = None) -> RecoveryReport:
    """Dephase the first site of the partially dephased GHZ state and try to recover it locally.

    The conditional mutual information between the first site and {x, sites after x}
    given the sites in between stays at 2 ln 2 however wide the buffer is, so the bound
    permits no local recovery.
    """
    x = n // 2 if x is None else x
    rho = ghz_partial_dephasing(n, x, p)
    A, B, C = ghz_partition(n, x)
    return cmi_markov_gap(rho, site_x_dephasing(n, p, A), A, B, C, rotation)
