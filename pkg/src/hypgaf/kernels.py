"""Covariance kernel of the hyperbolic GAF and derived special functions.

K_L(z, w) = (1 - <z, w>)^-L  (principal branch; Re(1 - <z,w>) > 0 on the ball),
theta_L   = K_L / sqrt(K_L(z,z) K_L(w,w)),   |theta_L|^2 = (1 - rho(z,w)^2)^L,
rho_L     = Li2(|theta_L|^2), the dilogarithm series sum_m x^m / m^2.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .errors import DomainError
from .geometry import as_points, hermitian_inner, one_minus_pseudo_sq

__all__ = [
    "kernel",
    "kernel_diag",
    "normalized_kernel",
    "theta_sq",
    "dilog",
    "rho",
    "zeta_value",
    "KernelEvaluator",
]

PI_SQ_OVER_6 = math.pi ** 2 / 6.0

# Series length after reflection to y <= 1/2: tail < y^(M+1) / ((M+1)^2 (1-y))
# is below 2^-61 for M = 60.
_DILOG_TERMS = 60


def _check_L(L):
    if not L > 0:
        raise DomainError("intensity L must be positive")


def kernel(z, w, L):
    """K_L(z, w) = (1 - <z, w>)^-L with the principal power branch."""
    _check_L(L)
    h = hermitian_inner(as_points(z), as_points(w))
    return np.exp(-L * np.log(1.0 - h))


def kernel_diag(z, L):
    """K_L(z, z) = (1 - |z|^2)^-L, real and >= 1."""
    _check_L(L)
    z = as_points(z)
    t = np.sum(np.abs(z) ** 2, axis=-1)
    return (1.0 - t) ** (-L)


def normalized_kernel(z, w, L):
    """theta_L(z, w) = K_L(z, w) / sqrt(K_L(z, z) K_L(w, w)); |theta_L| <= 1."""
    _check_L(L)
    z = as_points(z)
    w = as_points(w)
    tz = np.sum(np.abs(z) ** 2, axis=-1)
    tw = np.sum(np.abs(w) ** 2, axis=-1)
    h = hermitian_inner(z, w)
    # log-scale combination avoids overflow of the separate factors for large L
    log_mod = (L / 2.0) * (np.log1p(-tz) + np.log1p(-tw)) - L * np.log(np.abs(1.0 - h))
    phase = -L * np.angle(1.0 - h)
    return np.exp(log_mod + 1j * phase)


def theta_sq(z, w, L):
    """|theta_L(z, w)|^2 = (1 - rho(z, w)^2)^L, computed through the distance identity."""
    _check_L(L)
    q = one_minus_pseudo_sq(z, w)
    return np.exp(L * np.log(q))


def dilog(x):
    """Li2(x) for x in [0, 1], by power series with reflection at x = 1/2.

    Li2(x) = pi^2/6 - log(x) log(1-x) - Li2(1-x) for x > 1/2; the series on
    y <= 1/2 is truncated at 60 terms (tail below 2^-61).
    """
    x = np.asarray(x, dtype=float)
    if np.any(x < -1e-15) or np.any(x > 1.0 + 1e-12):
        raise DomainError("dilog implemented on [0, 1]")
    x = np.clip(x, 0.0, 1.0)
    scalar = x.ndim == 0
    x = np.atleast_1d(x)

    big = x > 0.5
    y = np.where(big, 1.0 - x, x)
    series = np.zeros_like(y)
    p = np.ones_like(y)
    for m in range(1, _DILOG_TERMS + 1):
        p = p * y
        series += p / (m * m)

    out = np.where(big, PI_SQ_OVER_6 - series, series)
    with np.errstate(divide="ignore", invalid="ignore"):
        cross = np.log(x) * np.log1p(-x)
    cross = np.where(big & (x < 1.0), cross, 0.0)
    out = out - cross
    out = np.where(x == 1.0, PI_SQ_OVER_6, out)
    return float(out[0]) if scalar else out


def rho(z, w, L):
    """Covariance of the log-modulus field: rho_L(z, w) = Li2(|theta_L(z, w)|^2)."""
    return dilog(theta_sq(z, w, L))


# Euler-Maclaurin tail: sum_{k>=N} k^-s = N^(1-s)/(s-1) + N^-s/2
#   + sum_j B_2j/(2j)! * s(s+1)...(s+2j-2) * N^(-s-2j+1)
_EM_COEFFS = (1.0 / 12.0, -1.0 / 720.0, 1.0 / 30240.0)  # B_2/2!, B_4/4!, B_6/6!


def zeta_value(s, terms=30):
    """Riemann zeta(s) for s > 1 by direct series plus Euler-Maclaurin remainder."""
    if not s > 1:
        raise DomainError("zeta_value requires s > 1")
    s = float(s)
    N = int(terms)
    total = sum(k ** (-s) for k in range(1, N))
    total += N ** (1.0 - s) / (s - 1.0) + 0.5 * N ** (-s)
    fact = s
    power = N ** (-s - 1.0)
    for j, coeff in enumerate(_EM_COEFFS):
        total += coeff * fact * power
        fact *= (s + 2 * j + 1) * (s + 2 * j + 2)
        power /= N * N
    return total


@dataclass(frozen=True)
class KernelEvaluator:
    """Stateless closed-form kernel bundle at fixed intensity."""

    L: float

    def kernel(self, z, w):
        return kernel(z, w, self.L)

    def normalized(self, z, w):
        return normalized_kernel(z, w, self.L)

    def theta_sq(self, z, w):
        return theta_sq(z, w, self.L)

    def rho(self, z, w):
        return rho(z, w, self.L)
