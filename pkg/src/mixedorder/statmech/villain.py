"""Fourier coefficients of the squared rotor-dephasing kernel and the Villain weight they approximate."""

from __future__ import annotations

import numpy as np

from ..errors import BadAlpha

TRUNCATION = 1e-12


def jacobi_theta3(q: float) -> float:
    """sum_{k in Z} q^{k^2}."""
    return 1.0 + 2.0 * sum(q ** (k * k) for k in range(1, _n_terms(q)))


def jacobi_theta2(q: float) -> float:
    """sum_{k in Z} q^{(k + 1/2)^2}."""
    return 2.0 * sum(q ** ((k + 0.5) ** 2) for k in range(0, _n_terms(q)))


def _n_terms(q: float) -> int:
    # q^{k^2} < 1e-18 for k^2 > 41.5 / -ln q
    return int(np.ceil(np.sqrt(41.5 / -np.log(q)))) + 2


def villain_fn_coefficients(rotor_alpha: float, n_max: int) -> np.ndarray:
    """f_0..f_{n_max} normalized to f_0 = 1; f_{-n} = f_n.

    f_n is proportional to exp(-alpha n^2 / 2) times theta3(e^{-2 alpha}) for even n
    and theta2(e^{-2 alpha}) for odd n.
    """
    a = float(rotor_alpha)
    if not (a > 0 and np.isfinite(a)):
        raise BadAlpha(f"alpha must be positive and finite, got {rotor_alpha!r}")
    if n_max < 0 or n_max > 64:
        raise BadAlpha(f"n_max={n_max} outside [0, 64]")
    q = np.exp(-2.0 * a)
    t3, t2 = jacobi_theta3(q), jacobi_theta2(q)
    n = np.arange(n_max + 1)
    return np.exp(-0.5 * a * n**2) * np.where(n % 2 == 0, 1.0, t2 / t3)


def truncation_order(rotor_alpha: float, tol: float = TRUNCATION) -> int:
    """Smallest n_max such that every omitted f_n / f_0 is below `tol`."""
    full = villain_fn_coefficients(rotor_alpha, 64)
    above = np.nonzero(full >= tol)[0]
    return int(above[-1]) if above.size else 0


def truncated_coefficients(rotor_alpha: float, tol: float = TRUNCATION) -> np.ndarray:
    return villain_fn_coefficients(rotor_alpha, truncation_order(rotor_alpha, tol))


def bond_weight(phi, f: np.ndarray):
    """W(phi) = f_0 + 2 sum_n f_n cos(n phi)."""
    phi = np.asarray(phi, dtype=float)
    n = np.arange(1, f.size)
    return f[0] + 2.0 * np.sum(f[1:] * np.cos(np.multiply.outer(phi, n)), axis=-1)


def villain_weight(phi, alpha: float, m_max: int = 20):
    """sqrt(2 pi / alpha) sum_m exp(-(phi + 2 pi m)^2 / (2 alpha)); its Fourier coefficients are exp(-alpha n^2 / 2)."""
    phi = np.asarray(phi, dtype=float)
    m = np.arange(-m_max, m_max + 1)
    s = np.exp(-np.add.outer(phi, 2 * np.pi * m) ** 2 / (2 * alpha)).sum(axis=-1)
    return np.sqrt(2 * np.pi / alpha) * s
