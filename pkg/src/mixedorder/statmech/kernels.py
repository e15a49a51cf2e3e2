"""numba kernels: Metropolis and Wolff for Ising-type models, Metropolis and Wolff for
XY-type models with an arbitrary even bond potential given by Fourier coefficients."""

from __future__ import annotations

import numpy as np
from numba import njit

# Ising -----------------------------------------------------------------------------


@njit(cache=True, nogil=True)
def ising_metropolis_sweep(spins, nbr, coup, beta, rng):
    """One sweep (n random-site single-flip attempts) of H = -sum J_ij s_i s_j; returns accepted flips.

    Sites are drawn at random rather than in lattice order: a sequential sweep accepts every
    zero-cost flip deterministically and gets trapped in period-2 cycles on small tori.
    """
    n = spins.size
    z = nbr.shape[1]
    acc = 0
    for _ in range(n):
        i = min(int(rng.random() * n), n - 1)
        h = 0.0
        for k in range(z):
            h += coup[i, k] * spins[nbr[i, k]]
        de = 2.0 * spins[i] * h
        if de <= 0.0 or rng.random() < np.exp(-beta * de):
            spins[i] = -spins[i]
            acc += 1
    return acc


@njit(cache=True, nogil=True)
def ising_wolff_update(spins, nbr, beta, rng, stack):
    """Single Wolff cluster flip for the uniform ferromagnet at coupling beta; returns cluster size."""
    n = spins.size
    z = nbr.shape[1]
    padd = 1.0 - np.exp(-2.0 * beta)
    seed = rng.integers(0, n)
    s0 = spins[seed]
    spins[seed] = -s0
    top = 0
    stack[top] = seed
    top += 1
    size = 1
    while top > 0:
        top -= 1
        i = stack[top]
        for k in range(z):
            j = nbr[i, k]
            if spins[j] == s0 and rng.random() < padd:
                spins[j] = -s0
                stack[top] = j
                top += 1
                size += 1
    return size


@njit(cache=True, nogil=True)
def ising_bond_energy(spins, bond_i, bond_j, bond_J):
    e = 0.0
    for b in range(bond_i.size):
        e += bond_J[b] * spins[bond_i[b]] * spins[bond_j[b]]
    return e


@njit(cache=True, nogil=True)
def ising_measure(spins, L, bond_i, bond_j, bond_J, out):
    """Fill out = [m, |m(k_min)|^2, bond energy sum, mean s_x s_{x + L/2 e_x}]."""
    n = spins.size
    m = 0.0
    re = 0.0
    im = 0.0
    k = 2.0 * np.pi / L
    corr = 0.0
    half = L // 2
    for i in range(n):
        s = spins[i]
        m += s
        x = i % L
        re += s * np.cos(k * x)
        im += s * np.sin(k * x)
        y = i // L
        corr += s * spins[y * L + (x + half) % L]
    out[0] = m / n
    out[1] = (re * re + im * im) / (n * n)
    out[2] = ising_bond_energy(spins, bond_i, bond_j, bond_J)
    out[3] = corr / n


@njit(cache=True, nogil=True)
def ising_run(spins, nbr, coup, bond_i, bond_j, bond_J, L, beta, n_therm, n_meas, stride, wolff, rng):
    """Thermalize then measure; returns thermal means of
    [m^2, m^4, |m|, |m(k)|^2, energy per bond, half-length correlator] and the Metropolis acceptance rate."""
    stack = np.empty(spins.size, dtype=np.int64)
    acc = 0
    for _ in range(n_therm):
        if wolff:
            ising_wolff_update(spins, nbr, beta, rng, stack)
        acc += ising_metropolis_sweep(spins, nbr, coup, beta, rng)
    sums = np.zeros(6)
    buf = np.zeros(4)
    nb = bond_i.size
    for t in range(n_meas):
        for _ in range(stride):
            if wolff:
                ising_wolff_update(spins, nbr, beta, rng, stack)
            acc += ising_metropolis_sweep(spins, nbr, coup, beta, rng)
        ising_measure(spins, L, bond_i, bond_j, bond_J, buf)
        m2 = buf[0] * buf[0]
        sums[0] += m2
        sums[1] += m2 * m2
        sums[2] += abs(buf[0])
        sums[3] += buf[1]
        sums[4] += buf[2] / nb
        sums[5] += buf[3]
    rate = acc / (spins.size * (n_therm + n_meas * stride))
    return sums / n_meas, rate


@njit(cache=True, nogil=True)
def ising_histogram(spins, nbr, coup, beta, n_therm, n_samples, wolff, rng):
    """Visit counts of each configuration index (site 0 is the most significant bit, bit set = spin -1)."""
    n = spins.size
    counts = np.zeros(2**n, dtype=np.int64)
    stack = np.empty(n, dtype=np.int64)
    for _ in range(n_therm):
        if wolff:
            ising_wolff_update(spins, nbr, beta, rng, stack)
        else:
            ising_metropolis_sweep(spins, nbr, coup, beta, rng)
    for _ in range(n_samples):
        if wolff:
            ising_wolff_update(spins, nbr, beta, rng, stack)
        else:
            ising_metropolis_sweep(spins, nbr, coup, beta, rng)
        c = 0
        for i in range(n):
            c = 2 * c + (1 if spins[i] < 0 else 0)
        counts[c] += 1
    return counts


# XY with a Fourier bond weight W(phi) = f_0 + 2 sum_{n>=1} f_n cos(n phi) > 0 ---------


@njit(cache=True, nogil=True)
def fourier_weight(phi, f):
    """Return W, W', W'' at phi."""
    c1 = np.cos(phi)
    s1 = np.sin(phi)
    c = 1.0
    s = 0.0
    w = f[0]
    w1 = 0.0
    w2 = 0.0
    for n in range(1, f.size):
        c, s = c * c1 - s * s1, s * c1 + c * s1
        w += 2.0 * f[n] * c
        w1 -= 2.0 * n * f[n] * s
        w2 -= 2.0 * n * n * f[n] * c
    return w, w1, w2


@njit(cache=True, nogil=True)
def bond_potential(phi, f):
    """V = -ln W."""
    c1 = np.cos(phi)
    s1 = np.sin(phi)
    c = 1.0
    s = 0.0
    w = f[0]
    for n in range(1, f.size):
        c, s = c * c1 - s * s1, s * c1 + c * s1
        w += 2.0 * f[n] * c
    return -np.log(w)


@njit(cache=True, nogil=True)
def xy_metropolis_sweep(theta, nbr, f, width, rng):
    n = theta.size
    z = nbr.shape[1]
    acc = 0
    for i in range(n):
        old = theta[i]
        new = old + width * (rng.random() - 0.5)
        if new >= 2.0 * np.pi:
            new -= 2.0 * np.pi
        elif new < 0.0:
            new += 2.0 * np.pi
        dv = 0.0
        for k in range(z):
            tj = theta[nbr[i, k]]
            dv += bond_potential(new - tj, f) - bond_potential(old - tj, f)
        if dv <= 0.0 or rng.random() < np.exp(-dv):
            theta[i] = new
            acc += 1
    return acc


@njit(cache=True, nogil=True)
def xy_wolff_update(theta, nbr, f, rng, stack, in_cluster):
    """Wolff reflection cluster update; valid because the bond potential is even."""
    n = theta.size
    z = nbr.shape[1]
    u = 2.0 * np.pi * rng.random()
    seed = rng.integers(0, n)
    in_cluster[:] = False
    top = 0
    stack[top] = seed
    top += 1
    in_cluster[seed] = True
    old_seed = theta[seed]
    theta[seed] = (np.pi + 2.0 * u - old_seed) % (2.0 * np.pi)
    size = 1
    while top > 0:
        top -= 1
        i = stack[top]
        ti_new = theta[i]
        ti_old = (np.pi + 2.0 * u - ti_new) % (2.0 * np.pi)
        for k in range(z):
            j = nbr[i, k]
            if in_cluster[j]:
                continue
            tj = theta[j]
            tj_ref = (np.pi + 2.0 * u - tj) % (2.0 * np.pi)
            # cost of not reflecting j given i was reflected
            dv = bond_potential(ti_new - tj, f) - bond_potential(ti_old - tj, f)
            if dv > 0.0 and rng.random() < 1.0 - np.exp(-dv):
                in_cluster[j] = True
                theta[j] = tj_ref
                stack[top] = j
                top += 1
                size += 1
    return size


@njit(cache=True, nogil=True)
def xy_measure(theta, L, bond_i, bond_j, is_x, f, out):
    """out = [|m|^2, sum_x V'', (sum_x V')^2 (x-bonds only), sum V]."""
    n = theta.size
    mx = 0.0
    my = 0.0
    for i in range(n):
        mx += np.cos(theta[i])
        my += np.sin(theta[i])
    d2 = 0.0
    d1 = 0.0
    vsum = 0.0
    for b in range(bond_i.size):
        phi = theta[bond_i[b]] - theta[bond_j[b]]
        w, w1, w2 = fourier_weight(phi, f)
        vsum += -np.log(w)
        if is_x[b]:
            r = w1 / w
            d1 += -r
            d2 += -w2 / w + r * r
    out[0] = (mx * mx + my * my) / (n * n)
    out[1] = d2
    out[2] = d1 * d1
    out[3] = vsum


@njit(cache=True, nogil=True)
def xy_run(theta, nbr, bond_i, bond_j, is_x, f, L, n_therm, n_meas, stride, n_wolff, width, rng):
    """Returns the per-measurement series [|m|^2, sum_x V''/N, (sum_x V')^2/N], final width, acceptance.

    The reduced helicity modulus is the mean of column 1 minus the mean of column 2.
    """
    n = theta.size
    stack = np.empty(n, dtype=np.int64)
    in_cluster = np.zeros(n, dtype=np.bool_)
    # width adaptation toward 50% acceptance during thermalization
    for t in range(n_therm):
        for _ in range(n_wolff):
            xy_wolff_update(theta, nbr, f, rng, stack, in_cluster)
        a = xy_metropolis_sweep(theta, nbr, f, width, rng) / n
        if t < n_therm // 2:
            width *= np.exp(a - 0.5)
            if width > 2.0 * np.pi:
                width = 2.0 * np.pi
            if width < 1e-3:
                width = 1e-3
    series = np.zeros((n_meas, 3))
    buf = np.zeros(4)
    acc = 0
    for t in range(n_meas):
        for _ in range(stride):
            for _ in range(n_wolff):
                xy_wolff_update(theta, nbr, f, rng, stack, in_cluster)
            acc += xy_metropolis_sweep(theta, nbr, f, width, rng)
        xy_measure(theta, L, bond_i, bond_j, is_x, f, buf)
        series[t, 0] = buf[0]
        series[t, 1] = buf[1] / n
        series[t, 2] = buf[2] / n
    rate = acc / (n * max(1, n_meas * stride))
    return series, width, rate
