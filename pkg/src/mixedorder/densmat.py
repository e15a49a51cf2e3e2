"""Dense qubit density matrices and the spectral matrix calculus built on them.

Site 0 is the most significant bit of a basis index, i.e. the leftmost
factor of a Kronecker product. All entropies are in nats.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from functools import cached_property
from typing import Iterable, Sequence

import numpy as np

from .errors import BadSiteSet, DimensionMismatch, NotHermitian, NotPSD, TooLarge

MAX_DENSE_SITES = 14
HERMITIAN_TOL = 1e-12
PSD_TOL = 1e-10
SUPPORT_TOL = 1e-12
TRACE_TOL = 1e-8
EAGER_EIGH_SITES = 10

PAULI = {
    "I": np.eye(2, dtype=complex),
    "X": np.array([[0, 1], [1, 0]], dtype=complex),
    "Y": np.array([[0, -1j], [1j, 0]], dtype=complex),
    "Z": np.array([[1, 0], [0, -1]], dtype=complex),
}


def _as_real_if_possible(m: np.ndarray) -> np.ndarray:
    if np.iscomplexobj(m) and not np.any(m.imag):
        return np.ascontiguousarray(m.real)
    return m


def hermitian_part(m: np.ndarray, tol: float = HERMITIAN_TOL) -> np.ndarray:
    """Return (m + m^dagger)/2 after checking m is Hermitian to `tol` (relative to max|m|)."""
    m = np.asarray(m)
    if m.ndim != 2 or m.shape[0] != m.shape[1]:
        raise DimensionMismatch(f"expected a square matrix, got shape {m.shape}")
    if not np.all(np.isfinite(m)):
        raise NotHermitian("matrix has non-finite entries")
    scale = max(1.0, float(np.max(np.abs(m)))) if m.size else 1.0
    asym = float(np.max(np.abs(m - m.conj().T))) if m.size else 0.0
    if asym > tol * scale:
        raise NotHermitian(f"max|m - m^dagger| = {asym:.3e} exceeds {tol:.1e}")
    return _as_real_if_possible((m + m.conj().T) / 2)


def hermitian_eigh(m: np.ndarray, tol: float = HERMITIAN_TOL) -> tuple[np.ndarray, np.ndarray]:
    h = hermitian_part(m, tol)
    w, v = np.linalg.eigh(h)
    return w, v


def _check_psd(w: np.ndarray, psd_tol: float) -> None:
    if w.size and w[0] < -psd_tol:
        raise NotPSD(f"eigenvalue {w[0]:.3e} below -{psd_tol:.1e}")


def spectral_function(w: np.ndarray, v: np.ndarray, values: np.ndarray) -> np.ndarray:
    """V diag(values) V^dagger, staying real when possible."""
    if not np.iscomplexobj(values) and not np.iscomplexobj(v):
        return (v * values) @ v.T
    return (v * values) @ v.conj().T


def _support_power(w: np.ndarray, exponent: complex, support_tol: float) -> np.ndarray:
    out = np.zeros(w.shape, dtype=complex if np.iscomplex(exponent) else float)
    mask = w > support_tol
    out[mask] = np.power(w[mask], exponent)
    return out


def mat_sqrt(m, psd_tol: float = PSD_TOL) -> np.ndarray:
    """Principal square root of a Hermitian PSD matrix."""
    w, v = _spectrum_of(m)
    _check_psd(w, psd_tol)
    return spectral_function(w, v, np.sqrt(np.clip(w, 0.0, None)))


def mat_power(m, exponent: float, psd_tol: float = PSD_TOL, support_tol: float = SUPPORT_TOL) -> np.ndarray:
    """Real power of a Hermitian PSD matrix; eigenvalues at or below `support_tol` map to 0.

    Negative exponents therefore give the pseudo-inverse convention.
    """
    w, v = _spectrum_of(m)
    _check_psd(w, psd_tol)
    if exponent == 1:
        return spectral_function(w, v, np.where(w > support_tol, w, 0.0))
    return spectral_function(w, v, _support_power(w, float(exponent), support_tol))


def mat_complex_power(m, exponent: complex, psd_tol: float = PSD_TOL, support_tol: float = SUPPORT_TOL) -> np.ndarray:
    """Complex power m^z on the support of m (0 off the support)."""
    w, v = _spectrum_of(m)
    _check_psd(w, psd_tol)
    return spectral_function(w, v.astype(complex), _support_power(w, complex(exponent), support_tol))


def mat_log(m, psd_tol: float = PSD_TOL, support_tol: float = SUPPORT_TOL) -> np.ndarray:
    """Natural log on the support (0 off the support)."""
    w, v = _spectrum_of(m)
    _check_psd(w, psd_tol)
    vals = np.zeros_like(w)
    mask = w > support_tol
    vals[mask] = np.log(w[mask])
    return spectral_function(w, v, vals)


def _check_psd_cholesky(m: np.ndarray, psd_tol: float) -> None:
    try:
        np.linalg.cholesky(m + 2.0 * psd_tol * np.eye(m.shape[0]))
    except np.linalg.LinAlgError:
        w = np.linalg.eigvalsh(m)
        raise NotPSD(f"minimum eigenvalue {w[0]:.3e} below -{psd_tol:.1e}") from None


def _spectrum_of(m) -> tuple[np.ndarray, np.ndarray]:
    if isinstance(m, DensityMatrix):
        return m.spectrum
    return hermitian_eigh(np.asarray(m))


def n_sites_of_dim(dim: int) -> int:
    n = int(round(np.log2(dim))) if dim > 0 else -1
    if n < 0 or 2**n != dim:
        raise DimensionMismatch(f"dimension {dim} is not a power of two")
    return n


def check_dense_size(n_sites: int, cap: int = MAX_DENSE_SITES) -> None:
    if n_sites > cap:
        raise TooLarge(f"{n_sites} sites exceeds the dense cap of {cap}")


@dataclass(frozen=True, eq=False)
class DensityMatrix:
    """Hermitian, unit-trace, PSD matrix on `n_sites` qubits.

    Construction symmetrizes, checks Hermiticity, trace and positivity, and
    caches the eigendecomposition. Eigenvalues in [-psd_tol, 0) are clipped to
    zero and the spectrum renormalized; the matrix itself is only rebuilt when
    the clipped mass is numerically visible.
    """

    mat: np.ndarray
    n_sites: int | None = None
    psd_tol: float = PSD_TOL
    _spectrum: tuple | None = field(default=None, repr=False)

    def __post_init__(self):
        m = np.asarray(self.mat)
        n = n_sites_of_dim(m.shape[0]) if m.ndim == 2 else -1
        if self.n_sites is not None and self.n_sites != n:
            raise DimensionMismatch(f"matrix dimension {m.shape} does not match n_sites={self.n_sites}")
        check_dense_size(n)
        m = hermitian_part(m)
        tr = float(np.trace(m).real)
        if abs(tr - 1.0) > TRACE_TOL:
            raise DimensionMismatch(f"trace {tr!r} differs from 1")
        m = m / tr
        object.__setattr__(self, "n_sites", n)
        if self._spectrum is not None:
            w, v = self._spectrum
            w = np.asarray(w, dtype=float) / tr
        elif n > EAGER_EIGH_SITES:
            # large states: positivity by a shifted Cholesky, spectrum on first use
            _check_psd_cholesky(m, self.psd_tol)
            object.__setattr__(self, "mat", m)
            object.__setattr__(self, "_spectrum", None)
            return
        else:
            w, v = np.linalg.eigh(m)
        self._finish(m, w, v)

    def _finish(self, m: np.ndarray, w: np.ndarray, v: np.ndarray) -> None:
        _check_psd(w, self.psd_tol)
        if w.size and w[0] < 0:
            neg_mass = float(-w[w < 0].sum())
            w = np.clip(w, 0.0, None)
            w = w / w.sum()
            if neg_mass > 1e-14:
                m = spectral_function(w, v, w)
        object.__setattr__(self, "mat", m)
        object.__setattr__(self, "_spectrum", (w, v))

    @property
    def dim(self) -> int:
        return self.mat.shape[0]

    @property
    def spectrum(self) -> tuple[np.ndarray, np.ndarray]:
        """(ascending eigenvalues, eigenvectors as columns)."""
        if self._spectrum is None:
            w, v = np.linalg.eigh(self.mat)
            self._finish(self.mat, w, v)
        return self._spectrum

    @property
    def eigenvalues(self) -> np.ndarray:
        return self.spectrum[0]

    def support(self, support_tol: float = SUPPORT_TOL) -> tuple[np.ndarray, np.ndarray]:
        w, v = self.spectrum
        mask = w > support_tol
        return w[mask], v[:, mask]

    @cached_property
    def sqrt_factor(self) -> np.ndarray:
        """A = V_s sqrt(Lambda_s) with rho = A A^dagger, restricted to the support."""
        w, v = self.support()
        return v * np.sqrt(w)

    def sqrt(self) -> np.ndarray:
        return mat_sqrt(self)

    def power(self, exponent: float) -> np.ndarray:
        return mat_power(self, exponent, self.psd_tol)

    def purity(self) -> float:
        return float(np.sum(self.eigenvalues**2))

    def expectation(self, op) -> complex:
        op = op.to_dense() if hasattr(op, "to_dense") else np.asarray(op)
        return complex(np.sum(self.mat * op.T))

    def is_real(self) -> bool:
        return not np.iscomplexobj(self.mat)

    def tensor(self, other: "DensityMatrix") -> "DensityMatrix":
        return DensityMatrix(np.kron(self.mat, other.mat))

    @classmethod
    def from_pure(cls, psi) -> "DensityMatrix":
        psi = np.asarray(psi)
        psi = psi / np.linalg.norm(psi)
        return cls(_as_real_if_possible(np.outer(psi, psi.conj())))

    @classmethod
    def maximally_mixed(cls, n_sites: int) -> "DensityMatrix":
        check_dense_size(n_sites)
        d = 2**n_sites
        return cls(np.eye(d) / d, _spectrum=(np.full(d, 1.0 / d), np.eye(d)))


def as_density_matrix(rho) -> DensityMatrix:
    return rho if isinstance(rho, DensityMatrix) else DensityMatrix(np.asarray(rho))


def random_density_matrix(n_sites: int, rng: np.random.Generator, rank: int | None = None) -> DensityMatrix:
    """Ginibre-ensemble mixed state; full rank unless `rank` is given."""
    d = 2**n_sites
    r = d if rank is None else rank
    g = rng.standard_normal((d, r)) + 1j * rng.standard_normal((d, r))
    m = g @ g.conj().T
    return DensityMatrix(m / np.trace(m).real)


def random_unitary(dim: int, rng: np.random.Generator) -> np.ndarray:
    z = (rng.standard_normal((dim, dim)) + 1j * rng.standard_normal((dim, dim))) / np.sqrt(2)
    q, r = np.linalg.qr(z)
    d = np.diagonal(r)
    return q * (d / np.abs(d))


# --- local operator application -------------------------------------------------


def _check_sites(sites: Sequence[int], n: int) -> tuple[int, ...]:
    sites = tuple(int(s) for s in sites)
    if len(set(sites)) != len(sites) or any(s < 0 or s >= n for s in sites):
        raise BadSiteSet(f"sites {sites} invalid for {n} qubits")
    return sites


def apply_left(m: np.ndarray, op: np.ndarray, sites: Sequence[int], n: int) -> np.ndarray:
    """(op on `sites`, identity elsewhere) @ m, without forming the full operator."""
    k = len(sites)
    cols = m.shape[1]
    if k == n and tuple(sites) == tuple(range(n)):
        return op @ m
    t = m.reshape((2,) * n + (cols,))
    t = np.moveaxis(t, sites, range(k))
    shape = t.shape
    t = (op @ t.reshape(2**k, -1)).reshape(shape)
    return np.moveaxis(t, range(k), sites).reshape(2**n, cols)


def apply_right(m: np.ndarray, op: np.ndarray, sites: Sequence[int], n: int) -> np.ndarray:
    """m @ (op on `sites`, identity elsewhere)."""
    return apply_left(m.T, op.T, sites, n).T


def conjugate_local(m: np.ndarray, op: np.ndarray, sites: Sequence[int], n: int) -> np.ndarray:
    """op m op^dagger with op acting on `sites`."""
    return apply_left(apply_right(m, op.conj().T, sites, n), op, sites, n)


def embed(op: np.ndarray, sites: Sequence[int], n: int) -> np.ndarray:
    """Full 2^n matrix of a local operator."""
    return apply_left(np.eye(2**n, dtype=op.dtype), op, sites, n)


# --- site operators and Pauli strings -----------------------------------------


@dataclass(frozen=True, eq=False)
class SiteOperator:
    site: int
    op: str | np.ndarray = "Z"
    phase: complex = 1.0

    def __post_init__(self):
        if isinstance(self.op, str):
            if self.op not in PAULI:
                raise ValueError(f"unknown Pauli label {self.op!r}")
        else:
            a = np.asarray(self.op, dtype=complex)
            if a.shape != (2, 2):
                raise DimensionMismatch("site operator must be 2x2")
            if np.linalg.norm(a, 2) > 1e6:
                raise ValueError("site operator norm exceeds 1e6")
            object.__setattr__(self, "op", a)
        if abs(abs(self.phase) - 1.0) > 1e-12:
            raise ValueError("phase must be a complex unit")

    @property
    def label(self) -> str | None:
        return self.op if isinstance(self.op, str) else None

    @property
    def matrix(self) -> np.ndarray:
        base = PAULI[self.op] if isinstance(self.op, str) else self.op
        return self.phase * base

    def dagger(self) -> "SiteOperator":
        if isinstance(self.op, str):
            return SiteOperator(self.site, self.op, np.conj(self.phase))
        return SiteOperator(self.site, self.matrix.conj().T)

    def is_unitary(self) -> bool:
        m = self.matrix
        return bool(np.allclose(m @ m.conj().T, np.eye(2), atol=1e-12))


@dataclass(frozen=True, eq=False)
class PauliString:
    """Ordered product of single-site operators; unlisted sites are identity.

    Despite the name, factors may be arbitrary 2x2 matrices. Pure Pauli strings
    are applied through a bit-flip permutation and a phase vector.
    """

    factors: tuple[SiteOperator, ...]
    n_sites: int

    def __post_init__(self):
        factors = tuple(self.factors)
        sites = [f.site for f in factors]
        if any(b <= a for a, b in zip(sites, sites[1:])):
            raise BadSiteSet(f"factor sites must be strictly increasing, got {sites}")
        if sites and (sites[0] < 0 or sites[-1] >= self.n_sites):
            raise BadSiteSet(f"sites {sites} out of range for {self.n_sites} qubits")
        object.__setattr__(self, "factors", factors)

    @classmethod
    def from_map(cls, n_sites: int, ops: dict, phase: complex = 1.0) -> "PauliString":
        items = sorted(ops.items())
        factors = [SiteOperator(s, o) for s, o in items]
        if factors and phase != 1.0:
            f0 = factors[0]
            factors[0] = SiteOperator(f0.site, f0.op, phase)
        return cls(tuple(factors), n_sites)

    @classmethod
    def identity(cls, n_sites: int) -> "PauliString":
        return cls((), n_sites)

    @classmethod
    def global_x(cls, n_sites: int) -> "PauliString":
        return cls.from_map(n_sites, {i: "X" for i in range(n_sites)})

    @classmethod
    def two_point(cls, n_sites: int, x: int, y: int, op="Z") -> "PauliString":
        """O(x) O^dagger(y) for a site-operator template `op`."""
        if x == y:
            raise BadSiteSet("two-point operator needs x != y")
        ox = SiteOperator(x, op)
        oy = SiteOperator(y, op).dagger()
        pair = sorted([ox, oy], key=lambda f: f.site)
        return cls(tuple(pair), n_sites)

    @property
    def sites(self) -> tuple[int, ...]:
        return tuple(f.site for f in self.factors)

    @property
    def is_pauli(self) -> bool:
        return all(f.label is not None for f in self.factors)

    def is_unitary(self) -> bool:
        return all(f.is_unitary() for f in self.factors)

    def dagger(self) -> "PauliString":
        return PauliString(tuple(f.dagger() for f in self.factors), self.n_sites)

    def restrict(self, sites: Iterable[int]) -> "PauliString":
        """Factors on `sites`, re-indexed to positions within `sites` (sorted)."""
        sites = sorted(sites)
        pos = {s: i for i, s in enumerate(sites)}
        fs = [SiteOperator(pos[f.site], f.op, f.phase) for f in self.factors if f.site in pos]
        return PauliString(tuple(fs), len(sites))

    def local_matrix(self, sites: Sequence[int]) -> np.ndarray:
        """Dense operator on `sites` (in the given order)."""
        by_site = {f.site: f.matrix for f in self.factors}
        out = np.ones((1, 1), dtype=complex)
        for s in sites:
            out = np.kron(out, by_site.get(s, PAULI["I"]))
        return out

    def _flip_and_phase(self) -> tuple[int, np.ndarray]:
        n = self.n_sites
        idx = np.arange(2**n)
        xmask = 0
        c = np.ones(2**n, dtype=complex)
        for f in self.factors:
            bit = (idx >> (n - 1 - f.site)) & 1
            sign = 1 - 2 * bit
            if f.label in ("X", "Y"):
                xmask |= 1 << (n - 1 - f.site)
            if f.label == "Z":
                c *= sign
            elif f.label == "Y":
                c *= 1j * sign
            c *= f.phase
        return xmask, c

    def _conjugate_pauli(self, m: np.ndarray) -> np.ndarray:
        # X and Y flip a row and a column axis; Z and Y contribute (-1)^(b + c) on that site
        n = self.n_sites
        t = m.reshape((2,) * (2 * n))
        flips = [a for f in self.factors if f.label in ("X", "Y") for a in (f.site, n + f.site)]
        if flips:
            t = np.flip(t, axis=flips)
        scale = float(np.prod([abs(f.phase) ** 2 for f in self.factors]))
        signed = [f.site for f in self.factors if f.label in ("Y", "Z")]
        if signed:
            sign = np.array([[1.0, -1.0], [-1.0, 1.0]]) * scale
            for k, s in enumerate(signed):
                shape = [1] * (2 * n)
                shape[s] = shape[n + s] = 2
                t = t * (sign if k == 0 else sign / scale).reshape(shape)
            return t.reshape(m.shape)
        return (t * scale if scale != 1.0 else t.copy()).reshape(m.shape)

    def to_dense(self) -> np.ndarray:
        check_dense_size(self.n_sites)
        return self.apply_left(np.eye(2**self.n_sites, dtype=complex))

    def apply_left(self, m: np.ndarray) -> np.ndarray:
        """P @ m."""
        if m.shape[0] != 2**self.n_sites:
            raise DimensionMismatch("operator and matrix dimensions differ")
        if not self.factors:
            return m.copy()
        if self.is_pauli:
            xmask, c = self._flip_and_phase()
            perm = np.arange(2**self.n_sites) ^ xmask
            # (P m)[b ^ xmask, :] = c_b m[b, :]
            out = (c[:, None] * m) if np.any(c.imag) or np.iscomplexobj(m) else (c.real[:, None] * m)
            return _as_real_if_possible(out[perm]) if not np.iscomplexobj(m) else out[perm]
        return apply_left(m, self.local_matrix(self.sites), self.sites, self.n_sites)

    def conjugate(self, m: np.ndarray) -> np.ndarray:
        """P m P^dagger."""
        if m.shape != (2**self.n_sites,) * 2:
            raise DimensionMismatch("operator and matrix dimensions differ")
        if not self.factors:
            return m.copy()
        if self.is_pauli:
            return self._conjugate_pauli(m)
        local = self.local_matrix(self.sites)
        return conjugate_local(m, local, self.sites, self.n_sites)


def apply_pauli_string(rho: DensityMatrix, p: PauliString) -> DensityMatrix:
    """P rho P^dagger. For unitary P the cached spectrum is carried over."""
    if p.n_sites != rho.n_sites:
        raise DimensionMismatch(f"string on {p.n_sites} sites, state on {rho.n_sites}")
    out = p.conjugate(rho.mat)
    if p.is_unitary():
        w, v = rho.spectrum
        return DensityMatrix(out, rho.n_sites, rho.psd_tol, _spectrum=(w, p.apply_left(v)))
    return DensityMatrix(out / np.trace(out).real, rho.n_sites, rho.psd_tol)


# --- partial trace and entropy --------------------------------------------------


def partial_trace_matrix(m: np.ndarray, keep: Sequence[int], n: int) -> np.ndarray:
    keep = sorted(_check_sites(keep, n))
    traced = [s for s in range(n) if s not in keep]
    if not traced:
        return m
    dk, dt = 2 ** len(keep), 2 ** len(traced)
    t = m.reshape((2,) * (2 * n))
    perm = keep + traced + [n + s for s in keep] + [n + s for s in traced]
    t = t.transpose(perm).reshape(dk, dt, dk, dt)
    return np.trace(t, axis1=1, axis2=3)


def partial_trace(rho: DensityMatrix, keep: Iterable[int]) -> DensityMatrix:
    """Reduced state on `keep`; output qubits are ordered by increasing site index."""
    keep = list(keep)
    try:
        out = partial_trace_matrix(rho.mat, keep, rho.n_sites)
    except BadSiteSet:
        raise
    return DensityMatrix(out, len(keep), rho.psd_tol)


def von_neumann_entropy(rho: DensityMatrix, support_tol: float = SUPPORT_TOL) -> float:
    w = rho.eigenvalues
    w = w[w > support_tol]
    return float(-np.sum(w * np.log(w)))


def entropy_of_sites(rho: DensityMatrix, sites: Iterable[int]) -> float:
    sites = sorted(set(sites))
    if not sites:
        return 0.0
    if len(sites) == rho.n_sites:
        return von_neumann_entropy(rho)
    return von_neumann_entropy(partial_trace(rho, sites))


def permute_qubits(m: np.ndarray, order: Sequence[int], n: int) -> np.ndarray:
    """Reorder tensor factors: qubit q of the result is qubit order[q] of `m`."""
    order = list(order)
    if sorted(order) != list(range(n)):
        raise BadSiteSet(f"{order} is not a permutation of {n} qubits")
    if order == list(range(n)):
        return m
    d = 2**n
    if m.ndim == 1:
        return m.reshape((2,) * n).transpose(order).reshape(d)
    t = m.reshape((2,) * (2 * n)).transpose(order + [n + q for q in order])
    return t.reshape(d, d)


def tensor_in_order(parts: Sequence[tuple[Sequence[int], np.ndarray]], n: int) -> np.ndarray:
    """Kronecker product of matrices on disjoint site sets, returned in global site order."""
    sites: list[int] = []
    out = np.ones((1, 1))
    for s, mat in parts:
        sites.extend(sorted(s))
        out = np.kron(out, mat)
    if sorted(sites) != list(range(n)):
        raise BadSiteSet("parts must cover all sites exactly once")
    # factor at position q currently holds site sites[q]; we need site s at position s
    inverse = [sites.index(s) for s in range(n)]
    return permute_qubits(out, inverse, n)
