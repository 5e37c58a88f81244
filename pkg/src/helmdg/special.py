"""Bessel and Hankel function evaluation.

Power series for small argument, Hankel asymptotic expansions for large
argument, switched at x = 12 where both branches deliver ~1e-12 relative
accuracy in double precision.  Orders needed by the benchmark solutions:
integer 0 and 1 (Hankel), and 2/3 with its derivative companions -1/3, 5/3.
"""

import math

import numpy as np

_EULER_GAMMA = 0.5772156649015328606
_CUTOFF = 12.0
_SERIES_KMAX = 80
_ASYMPT_KMAX = 40


def _series_j(nu: float, x: np.ndarray) -> np.ndarray:
    """Ascending series for J_nu, nu > -1.  Accurate for x <= ~15."""
    out = np.zeros_like(x, dtype=float)
    pos = x > 0
    if np.any(pos):
        xp = x[pos]
        q = 0.25 * xp * xp
        term = np.exp(nu * np.log(0.5 * xp) - math.lgamma(nu + 1.0))
        acc = term.copy()
        for k in range(1, _SERIES_KMAX):
            term *= -q / (k * (k + nu))
            acc += term
            if np.all(np.abs(term) <= 1e-18 * np.abs(acc)):
                break
        out[pos] = acc
    if np.any(~pos):
        if nu == 0.0:
            out[~pos] = 1.0
        elif nu < 0.0:
            raise ValueError("negative-order Bessel J requires x > 0")
    return out


def _asympt_pq(nu: float, x: np.ndarray):
    """P and Q of the Hankel asymptotic expansion, truncated per element
    at the smallest term (standard optimal truncation of the divergent tail).
    """
    mu = 4.0 * nu * nu
    p = np.ones_like(x)
    q = np.zeros_like(x)
    term = np.ones_like(x)
    prev = np.full_like(x, np.inf)
    active = np.ones(x.shape, dtype=bool)
    for k in range(1, _ASYMPT_KMAX):
        term = term * (mu - (2 * k - 1) ** 2) / (8.0 * k * x)
        mag = np.abs(term)
        active &= mag < prev  # freeze once the tail starts growing
        if not active.any():
            break
        contrib = np.where(active, term, 0.0)
        sgn = 1.0 if (k // 2) % 2 == 0 else -1.0
        if k % 2 == 1:
            q += sgn * contrib
        else:
            p += sgn * contrib
        active &= mag > 1e-18
        if not active.any():
            break
        prev = mag
    return p, q


def _asympt_jy(nu: float, x: np.ndarray):
    p, q = _asympt_pq(nu, x)
    chi = x - (0.5 * nu + 0.25) * math.pi
    amp = np.sqrt(2.0 / (math.pi * x))
    j = amp * (p * np.cos(chi) - q * np.sin(chi))
    y = amp * (p * np.sin(chi) + q * np.cos(chi))
    return j, y


def _series_y0(x: np.ndarray) -> np.ndarray:
    q = 0.25 * x * x
    term = np.ones_like(x)
    acc = np.zeros_like(x)
    h = 0.0
    for k in range(1, _SERIES_KMAX):
        term *= -q / (k * k)
        h += 1.0 / k
        contrib = -term * h  # (-1)^(k+1) H_k q^k / (k!)^2
        acc += contrib
        if np.all(np.abs(contrib) <= 1e-18):
            break
    j0 = _series_j(0.0, x)
    return (2.0 / math.pi) * ((np.log(0.5 * x) + _EULER_GAMMA) * j0 + acc)


def _series_y1(x: np.ndarray) -> np.ndarray:
    q = 0.25 * x * x
    half = 0.5 * x
    term = half.copy()  # k = 0 term of sum (H_k + H_{k+1}) ... starts at H_0+H_1 = 1
    acc = term * 1.0
    hk = 0.0
    hk1 = 1.0
    for k in range(1, _SERIES_KMAX):
        term *= -q / (k * (k + 1.0))
        hk += 1.0 / k
        hk1 += 1.0 / (k + 1.0)
        contrib = term * (hk + hk1)
        acc += contrib
        if np.all(np.abs(contrib) <= 1e-18):
            break
    j1 = _series_j(1.0, x)
    return (2.0 / math.pi) * ((np.log(0.5 * x) + _EULER_GAMMA) * j1) - (
        2.0 / (math.pi * x)
    ) - acc / math.pi


def bessel_j(nu: float, x) -> np.ndarray:
    """J_nu(x) for real order nu > -1, x >= 0 (x > 0 when nu < 0)."""
    x = np.asarray(x, dtype=float)
    scalar = x.ndim == 0
    x = np.atleast_1d(x)
    if np.any(x < 0):
        raise ValueError("bessel_j requires x >= 0")
    out = np.empty_like(x)
    small = x <= _CUTOFF
    if np.any(small):
        out[small] = _series_j(nu, x[small])
    if np.any(~small):
        out[~small] = _asympt_jy(nu, x[~small])[0]
    return out[0] if scalar else out


def bessel_y(n: int, x) -> np.ndarray:
    """Y_n(x) for n in {0, 1}, x > 0."""
    if n not in (0, 1):
        raise ValueError("bessel_y implemented for orders 0 and 1")
    x = np.asarray(x, dtype=float)
    scalar = x.ndim == 0
    x = np.atleast_1d(x)
    if np.any(x <= 0):
        raise ValueError("bessel_y requires x > 0")
    out = np.empty_like(x)
    small = x <= _CUTOFF
    if np.any(small):
        out[small] = _series_y0(x[small]) if n == 0 else _series_y1(x[small])
    if np.any(~small):
        out[~small] = _asympt_jy(float(n), x[~small])[1]
    return out[0] if scalar else out


def hankel1(n: int, x) -> np.ndarray:
    """H^(1)_n(x) = J_n(x) + i Y_n(x) for n in {0, 1}, x > 0."""
    return bessel_j(float(n), x) + 1j * bessel_y(n, x)


def bessel_j_prime(nu: float, x) -> np.ndarray:
    """d/dx J_nu(x) = J_{nu-1}(x) - (nu/x) J_nu(x), x > 0."""
    x = np.asarray(x, dtype=float)
    return bessel_j(nu - 1.0, x) - (nu / x) * bessel_j(nu, x)


#: First positive root of J_1; enters the Poincare constant h_T / j11.
J1_FIRST_ROOT = 3.83170597020751
