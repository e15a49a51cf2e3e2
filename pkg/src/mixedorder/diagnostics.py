"""Distinguishability measures and symmetry-breaking diagnostics on dense states.

Entropies and relative entropies are in nats; the sandwiched Renyi divergence
is in bits.
"""

from __future__ import annotations

from dataclasses import asdict, dataclass, field
from typing import Iterable, Literal, Sequence

import numpy as np

from .densmat import (
    SUPPORT_TOL,
    DensityMatrix,
    PauliString,
    SiteOperator,
    as_density_matrix,
    entropy_of_sites,
    mat_power,
    spectral_function,
)
from .errors import BadPartition, BadSiteSet, DegeneratePurity, DimensionMismatch, NotPSD

LN2 = float(np.log(2.0))


def _same_dim(rho: DensityMatrix, sigma) -> np.ndarray:
    s = sigma.mat if isinstance(sigma, DensityMatrix) else np.asarray(sigma)
    if s.shape != rho.mat.shape:
        raise DimensionMismatch(f"shapes {rho.mat.shape} and {s.shape} differ")
    return s


def fidelity(rho, sigma) -> float:
    """Tr sqrt(sqrt(rho) sigma sqrt(rho)).

    `sigma` may be any PSD matrix (it is not renormalized). With rho = A A^dagger and
    sigma = B B^dagger on their supports, F is the sum of singular values of B^dagger A,
    which stays accurate to machine precision for rank-deficient inputs.
    """
    rho = as_density_matrix(rho)
    s = _same_dim(rho, sigma)
    a = rho.sqrt_factor
    if isinstance(sigma, DensityMatrix):
        b = sigma.sqrt_factor
    else:
        w, v = np.linalg.eigh((s + s.conj().T) / 2)
        if w.size and w[0] < -1e-9 * max(1.0, w[-1]):
            raise NotPSD(f"second argument has eigenvalue {w[0]:.3e}")
        keep = w > SUPPORT_TOL * max(w[-1], 0.0)
        b = v[:, keep] * np.sqrt(w[keep])
    if a.shape[1] == 0 or b.shape[1] == 0:
        return 0.0
    return float(np.sum(np.linalg.svd(b.conj().T @ a, compute_uv=False)))


def fidelity_normalized(rho, sigma) -> float:
    """F(rho, sigma / Tr sigma)."""
    rho = as_density_matrix(rho)
    s = _same_dim(rho, sigma)
    return fidelity(rho, s / np.trace(s).real)


def fidelity_conjugated(rho: DensityMatrix, op: PauliString | np.ndarray) -> float:
    """F(rho, W rho W^dagger) as the sum of singular values of A^dagger W A."""
    a = rho.sqrt_factor
    if isinstance(op, PauliString):
        wa = op.apply_left(a)
    else:
        wa = np.asarray(op) @ a
    return float(np.sum(np.linalg.svd(a.conj().T @ wa, compute_uv=False)))


def _two_point(rho: DensityMatrix, x: int, y: int, O) -> PauliString:
    n = rho.n_sites
    if x == y:
        raise BadSiteSet("correlators need x != y")
    if not (0 <= x < n and 0 <= y < n):
        raise BadSiteSet(f"sites ({x}, {y}) out of range for {n} qubits")
    return PauliString.two_point(n, x, y, O)


def fidelity_correlator(rho: DensityMatrix, x: int, y: int, O="Z") -> float:
    """F(rho, W rho W^dagger) with W = O_x O_y^dagger."""
    return fidelity_conjugated(rho, _two_point(rho, x, y, O))


def renyi2_correlator(rho: DensityMatrix, x: int, y: int, O="Z") -> float:
    """Tr(W rho W^dagger rho) / Tr rho^2."""
    pur = rho.purity()
    if pur <= SUPPORT_TOL:
        raise DegeneratePurity(f"purity {pur:.3e} too small")
    sig = _two_point(rho, x, y, O).conjugate(rho.mat)
    return float(np.real(np.sum(sig * rho.mat.T))) / pur


def linear_correlator(rho: DensityMatrix, x: int, y: int, O="Z") -> float:
    """|Tr(rho O_x O_y^dagger)|."""
    w = _two_point(rho, x, y, O)
    return float(abs(np.trace(w.apply_left(rho.mat))))


def trace_distance(rho, sigma) -> float:
    rho = as_density_matrix(rho)
    s = _same_dim(rho, sigma)
    lam = np.linalg.eigvalsh(rho.mat - s)
    return float(0.5 * np.sum(np.abs(lam)))


def _support_contained(rho: DensityMatrix, sigma: DensityMatrix, tol: float) -> bool:
    _, vs = sigma.support(tol)
    a = rho.sqrt_factor
    resid = a - vs @ (vs.conj().T @ a)
    return float(np.sum(np.abs(resid) ** 2)) <= 1e-10


def relative_entropy(rho, sigma, support_tol: float = SUPPORT_TOL) -> float:
    """Tr rho (ln rho - ln sigma) in nats; +inf when supp(rho) is not inside supp(sigma)."""
    rho, sigma = as_density_matrix(rho), as_density_matrix(sigma)
    _same_dim(rho, sigma)
    if not _support_contained(rho, sigma, support_tol):
        return float("inf")
    w, _ = rho.support(support_tol)
    s_rho = float(np.sum(w * np.log(w)))
    ws, vs = sigma.support(support_tol)
    # Tr(rho ln sigma) = sum_k ln(ws_k) <v_k|rho|v_k>
    diag = np.real(np.einsum("ik,ij,jk->k", vs.conj(), rho.mat, vs))
    return s_rho - float(np.sum(np.log(ws) * diag))


def sandwiched_renyi(rho, sigma, renyi_alpha: float, support_tol: float = SUPPORT_TOL) -> float:
    """log2 Tr[(sigma^g rho sigma^g)^alpha] / (alpha - 1) with g = (1 - alpha)/(2 alpha)."""
    a = float(renyi_alpha)
    if a <= 0 or a == 1:
        raise ValueError("renyi_alpha must lie in (0,1) or (1,inf)")
    rho, sigma = as_density_matrix(rho), as_density_matrix(sigma)
    _same_dim(rho, sigma)
    if a > 1 and not _support_contained(rho, sigma, support_tol):
        return float("inf")
    g = (1.0 - a) / (2.0 * a)
    sg = mat_power(sigma, g, support_tol=support_tol)
    m = sg @ rho.mat @ sg
    lam = np.clip(np.linalg.eigvalsh((m + m.conj().T) / 2), 0.0, None)
    q = float(np.sum(lam[lam > 0] ** a))
    if q <= 0:
        return float("inf")
    return float(np.log2(q) / (a - 1.0))


def replicated_fidelity(rho: DensityMatrix, x: int, y: int, m: int, n: int, O="Z") -> float:
    """Tr[(rho^m sigma rho^m)^n] with sigma = W rho W^dagger (unnormalized)."""
    if m < 1 or n < 1 or int(m) != m or int(n) != n:
        raise ValueError("m and n must be positive integers")
    w_op = _two_point(rho, x, y, O)
    w, v = rho.spectrum
    rm = spectral_function(w, v, w**m)
    sig = w_op.conjugate(rho.mat)
    mm = rm @ sig @ rm
    lam = np.linalg.eigvalsh((mm + mm.conj().T) / 2)
    return float(np.sum(np.clip(lam, 0.0, None) ** n))


def replicated_fidelity_normalized(rho: DensityMatrix, x: int, y: int, m: int = 1, n: int = 1, O="Z") -> float:
    """Replicated fidelity divided by Tr rho^{(2m+1) n}."""
    den = float(np.sum(rho.eigenvalues ** ((2 * m + 1) * n)))
    return replicated_fidelity(rho, x, y, m, n, O) / den


def trace_power(rho: DensityMatrix, k: float) -> float:
    return float(np.sum(rho.eigenvalues**k))


def cmi(rho: DensityMatrix, A: Iterable[int], B: Iterable[int], C: Iterable[int]) -> float:
    """S(AB) + S(BC) - S(B) - S(ABC) in nats."""
    A, B, C = set(A), set(B), set(C)
    if A & B or B & C or A & C:
        raise BadPartition("A, B, C must be disjoint")
    if any(s < 0 or s >= rho.n_sites for s in A | B | C):
        raise BadPartition("partition sites out of range")
    s = lambda sites: entropy_of_sites(rho, sites)  # noqa: E731
    return s(A | B) + s(B | C) - s(B) - s(A | B | C)


def fidelity_average(rho: DensityMatrix, op: SiteOperator) -> float:
    """F(rho, O rho O^dagger) for a single-site operator."""
    return fidelity_conjugated(rho, PauliString((op,), rho.n_sites))


# --- classification ----------------------------------------------------------------


@dataclass
class SSBClassification:
    fidelity_value: float
    renyi2_value: float
    linear_value: float
    verdict: Literal["unbroken", "sw_ssb", "fully_broken", "inconsistent"]
    pair: tuple[int, int]
    thresholds: dict = field(default_factory=dict)

    def to_json(self) -> dict:
        return asdict(self)


def verdict_from(fid: float, lin: float, theta_f: float = 0.1, theta_l: float = 0.1) -> str:
    if fid >= theta_f and lin < theta_l:
        return "sw_ssb"
    if fid >= theta_f and lin >= theta_l:
        return "fully_broken"
    if fid < theta_f and lin < theta_l:
        return "unbroken"
    return "inconsistent"


def classify_ssb(rho: DensityMatrix, pairs: Sequence[tuple[int, int]], operators: Sequence = ("Z", "Y"),
                 theta_f: float = 0.1, theta_l: float = 0.1) -> SSBClassification:
    """Threshold the farthest pair (largest |x - y|; first on ties); each value is the max over `operators`."""
    if not pairs:
        raise BadSiteSet("need at least one pair")
    x, y = max(pairs, key=lambda pr: abs(pr[0] - pr[1]))
    fid = max(fidelity_correlator(rho, x, y, o) for o in operators)
    r2 = max(renyi2_correlator(rho, x, y, o) for o in operators)
    lin = max(linear_correlator(rho, x, y, o) for o in operators)
    return SSBClassification(fid, r2, lin, verdict_from(fid, lin, theta_f, theta_l), (x, y),
                             {"theta_F": theta_f, "theta_L": theta_l, "operators": [str(o) for o in operators]})


# --- local indistinguishability -------------------------------------------------------


def _averaged_shift(mat: np.ndarray, n: int, O) -> np.ndarray:
    acc = np.zeros(mat.shape, dtype=complex)
    for x in range(n):
        acc += PauliString((SiteOperator(x, O),), n).conjugate(mat)
    return acc / n


def local_indistinguishability_check(rho: DensityMatrix, M: PauliString, O="Z") -> float:
    """|Tr[M (rho_tilde - rho)]| with rho_tilde the site average of O_x rho O_x^dagger."""
    if M.n_sites != rho.n_sites:
        raise DimensionMismatch("probe and state sizes differ")
    diff = _averaged_shift(rho.mat, rho.n_sites, O) - rho.mat
    return float(abs(np.trace(M.apply_left(diff))))


def detectability_bound(rho: DensityMatrix, O="Z") -> tuple[float, float]:
    """(lhs, rhs) of the joint-concavity chain; lhs >= rhs is expected.

    lhs = F(rho_plus, avg_y O_y rho_plus O_y^dagger) with rho_plus = (rho + rho_tilde)/2,
    rhs = avg_{x,y} F(rho, O_x^dagger O_y rho O_x O_y^dagger), including x = y terms.
    """
    n = rho.n_sites
    rho_tilde = _averaged_shift(rho.mat, n, O)
    rho_plus = DensityMatrix((rho.mat + rho_tilde) / 2, n)
    lhs = fidelity(rho_plus, _averaged_shift(rho_plus.mat, n, O))
    total = 0.0
    for x in range(n):
        for y in range(n):
            if x == y:
                total += 1.0
                continue
            ox = SiteOperator(x, O).dagger()
            oy = SiteOperator(y, O)
            pair = tuple(sorted([ox, oy], key=lambda f: f.site))
            total += fidelity_conjugated(rho, PauliString(pair, n))
    return float(lhs), total / n**2
