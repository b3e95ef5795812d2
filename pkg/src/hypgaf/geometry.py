"""Geometry of the unit ball of C^n.

Conventions used throughout the package:

* ``nu`` is Lebesgue measure on the ball normalised so that nu(B_n) = 1
  (i.e. nu = (n!/pi^n) dm).
* ``mu`` is the automorphism-invariant measure d mu = d nu / (1-|z|^2)^(n+1).
* ``phi_w`` is the Moebius involution exchanging w and 0 (orthogonal
  projection form); the pseudo-hyperbolic distance is rho(z, w) = |phi_w(z)|,
  computed through the distance identity

      1 - rho(z, w)^2 = (1-|z|^2)(1-|w|^2) / |1 - <z, w>|^2 ,

  with <z, w> = sum_j z_j conj(w_j).

Quadrature grids use the substitution v_j = |z_j|^2, under which

    int_{B(0,s)} f d nu = n! int_{v in Delta(s^2)} avg_theta f dv ,

where Delta(c) = {v >= 0 : sum v_j < c} and the theta-average runs over the
n independent phases.  Radial-type variables get composite Gauss-Legendre
panels, phases get uniform grids.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np
from scipy import integrate

from .errors import DomainError, ResourceCapError

__all__ = [
    "Point",
    "Automorphism",
    "MeasureDensities",
    "QuadratureGrid",
    "GridRule",
    "hermitian_inner",
    "mobius_apply",
    "pseudo_distance",
    "one_minus_pseudo_sq",
    "invariant_volume_ball",
    "epsilon_mean",
    "mu_density",
    "omega_matrix",
    "build_grid",
    "grid_on_pseudo_ball",
]

_NORM_TOL = 1e-12


def as_points(z, n=None):
    """Coerce input (Point, scalar, sequence, ndarray) to a complex array (..., n)."""
    if isinstance(z, Point):
        arr = np.asarray(z.coords, dtype=complex)
    else:
        arr = np.asarray(z, dtype=complex)
    if arr.ndim == 0:
        arr = arr.reshape(1)
    if n is not None and arr.shape[-1] != n:
        raise DomainError(f"expected points in C^{n}, got last axis {arr.shape[-1]}")
    return arr


def _check_in_ball(z, what="point"):
    nrm = np.sum(np.abs(z) ** 2, axis=-1)
    if np.any(nrm >= 1.0):
        raise DomainError(f"{what} must lie in the open unit ball (|z|^2 < 1)")
    return nrm


@dataclass(frozen=True)
class Point:
    """A point of the open unit ball with its squared norm cached."""

    coords: tuple
    norm_sq: float = field(default=None)

    def __post_init__(self):
        coords = tuple(complex(c) for c in self.coords)
        object.__setattr__(self, "coords", coords)
        nrm = float(sum(abs(c) ** 2 for c in coords))
        if self.norm_sq is None:
            object.__setattr__(self, "norm_sq", nrm)
        elif abs(self.norm_sq - nrm) > _NORM_TOL * max(1.0, nrm):
            raise DomainError("cached norm_sq inconsistent with coordinates")
        if self.norm_sq >= 1.0:
            raise DomainError("point outside the open unit ball")

    @classmethod
    def of(cls, *coords):
        return cls(tuple(coords))

    @property
    def n(self):
        return len(self.coords)

    def array(self):
        return np.asarray(self.coords, dtype=complex)


def hermitian_inner(z, w):
    """<z, w> = sum_j z_j conj(w_j), broadcasting over leading axes."""
    z = np.asarray(z, dtype=complex)
    w = np.asarray(w, dtype=complex)
    return np.sum(z * np.conj(w), axis=-1)


class Automorphism:
    """Moebius involution phi_w of the ball with phi_w(w) = 0 and phi_w(0) = w."""

    def __init__(self, center):
        w = as_points(center)
        if w.ndim != 1:
            raise DomainError("automorphism center must be a single point")
        _check_in_ball(w, "center")
        self.center = w
        self.norm_sq = float(np.sum(np.abs(w) ** 2))
        self._s = math.sqrt(1.0 - self.norm_sq)

    def apply(self, z):
        z = as_points(z, n=self.center.shape[0])
        _check_in_ball(z)
        w = self.center
        if self.norm_sq == 0.0:
            return -z
        zw = hermitian_inner(z, w)[..., None]
        proj = (zw / self.norm_sq) * w
        orth = z - proj
        return (w - proj - self._s * orth) / (1.0 - zw)

    def __call__(self, z):
        return self.apply(z)


def mobius_apply(w, z):
    """Evaluate phi_w(z).  Accepts Points, scalars (n=1) or arrays (..., n)."""
    return Automorphism(w).apply(z)


def one_minus_pseudo_sq(z, w):
    """1 - rho(z,w)^2 via the distance identity (stable near the boundary)."""
    z = as_points(z)
    w = as_points(w)
    tz = _check_in_ball(z)
    tw = _check_in_ball(w)
    denom = np.abs(1.0 - hermitian_inner(z, w)) ** 2
    return (1.0 - tz) * (1.0 - tw) / denom


def pseudo_distance(z, w):
    """Pseudo-hyperbolic distance rho(z, w) = |phi_w(z)| in [0, 1)."""
    q = one_minus_pseudo_sq(z, w)
    return np.sqrt(np.clip(1.0 - q, 0.0, None))


def invariant_volume_ball(s, n):
    """mu(E(w, s)) = s^(2n) / (1 - s^2)^n, independent of the center w."""
    s = float(s)
    if not 0.0 < s < 1.0:
        raise DomainError("radius must satisfy 0 < s < 1")
    return s ** (2 * n) / (1.0 - s * s) ** n


def epsilon_mean(n, s):
    """Sub-mean-value defect eps(n, s) of log(1-|z|^2) over a pseudo-ball.

    eps(n, s) = n / mu(B(0,s)) * int_0^{s^2/(1-s^2)} x^(n-1) log(1+x) dx,
    and 0 < eps(n, s) <= s^2/(1-s^2).
    """
    s = float(s)
    if not 0.0 < s < 1.0:
        raise DomainError("radius must satisfy 0 < s < 1")
    upper = s * s / (1.0 - s * s)
    val, _ = integrate.quad(lambda x: x ** (n - 1) * np.log1p(x), 0.0, upper,
                            epsabs=1e-14, epsrel=1e-13, limit=200)
    return n * val / invariant_volume_ball(s, n)


def mu_density(z, n=None):
    """Density of mu with respect to nu: (1-|z|^2)^-(n+1)."""
    z = as_points(z, n=n)
    nn = z.shape[-1]
    t = np.sum(np.abs(z) ** 2, axis=-1)
    return (1.0 - t) ** (-(nn + 1))


def omega_matrix(z):
    """Coefficient matrix Omega(z) of the invariant (1,1)-form.

    Omega_jk = [(1-|z|^2) delta_jk + conj(z_j) z_k] / (1-|z|^2)^2; positive
    definite for |z| < 1.
    """
    z = as_points(z)
    if z.ndim != 1:
        raise DomainError("omega_matrix expects a single point")
    t = float(np.sum(np.abs(z) ** 2))
    n = z.shape[0]
    outer = np.conj(z)[:, None] * z[None, :]
    return ((1.0 - t) * np.eye(n) + outer) / (1.0 - t) ** 2


@dataclass(frozen=True)
class MeasureDensities:
    """Bundle of the measure conventions for dimension n."""

    n: int

    @property
    def nu_normalisation(self):
        return "nu(B_n) = 1; nu = (n!/pi^n) dm"

    def mu_density_at(self, z):
        return float(mu_density(as_points(z, self.n)))

    def omega_matrix_at(self, z):
        return omega_matrix(as_points(z, self.n))


@dataclass(frozen=True)
class GridRule:
    """Polar-product quadrature rule specification.

    radial_panels composite panels of radial_order Gauss-Legendre nodes in each
    squared-radius-type variable; angular_points uniform nodes per phase.
    """

    radial_panels: int = 8
    radial_order: int = 8
    angular_points: int = 64
    node_cap: int = 2_000_000


@dataclass(frozen=True)
class QuadratureGrid:
    """Nodes and nu-weights over the Euclidean ball B(0, support_radius)."""

    nodes: np.ndarray          # (N, n) complex
    weights: np.ndarray        # (N,) nu-weights
    support_radius: float

    @property
    def n(self):
        return self.nodes.shape[1]

    def norm_sq(self):
        return np.sum(np.abs(self.nodes) ** 2, axis=1)

    def mu_weights(self):
        return self.weights * (1.0 - self.norm_sq()) ** (-(self.n + 1))

    def integrate(self, values):
        values = values(self.nodes) if callable(values) else np.asarray(values)
        return float(np.sum(self.weights * values))

    def integrate_mu(self, values):
        values = values(self.nodes) if callable(values) else np.asarray(values)
        return float(np.sum(self.mu_weights() * values))


def _panel_gauss(a, b, panels, order):
    """Composite Gauss-Legendre nodes/weights on [a, b]."""
    x, w = np.polynomial.legendre.leggauss(order)
    edges = np.linspace(a, b, panels + 1)
    nodes, weights = [], []
    for lo, hi in zip(edges[:-1], edges[1:]):
        h = 0.5 * (hi - lo)
        nodes.append(lo + h * (x + 1.0))
        weights.append(h * w)
    return np.concatenate(nodes), np.concatenate(weights)


def build_grid(n, support_radius, rule=GridRule()):
    """Product quadrature grid on B(0, support_radius) with weights for nu.

    Exact for polynomials in the |z_j|^2 up to the Gauss order and for
    trigonometric polynomials in each phase up to the angular count.
    """
    s = float(support_radius)
    if not 0.0 < s < 1.0:
        raise DomainError("support_radius must lie in (0, 1)")
    if n not in (1, 2, 3):
        raise DomainError("grids implemented for n in {1, 2, 3}")

    T, wT = _panel_gauss(0.0, s * s, rule.radial_panels, rule.radial_order)
    na = rule.angular_points
    theta = 2.0 * np.pi * np.arange(na) / na
    wtheta = np.full(na, 1.0 / na)

    if n == 1:
        count = T.size * na
        _check_cap(count, rule)
        v = T[:, None] * np.ones(na)[None, :]
        w = wT[:, None] * wtheta[None, :]
        z = np.sqrt(v) * np.exp(1j * theta)[None, :]
        nodes = z.reshape(-1, 1)
        weights = w.reshape(-1)
    elif n == 2:
        x, wx = _panel_gauss(0.0, 1.0, 1, rule.radial_order)
        count = T.size * x.size * na * na
        _check_cap(count, rule)
        # dv1 dv2 = T dT dx with v1 = T x, v2 = T (1-x); prefactor n! = 2
        v1 = T[:, None] * x[None, :]
        v2 = T[:, None] * (1.0 - x)[None, :]
        wr = 2.0 * (wT * T)[:, None] * wx[None, :]
        z1 = np.sqrt(v1)[..., None, None] * np.exp(1j * theta)[None, None, :, None]
        z2 = np.sqrt(v2)[..., None, None] * np.exp(1j * theta)[None, None, None, :]
        w = wr[..., None, None] * (wtheta[None, None, :, None] * wtheta[None, None, None, :])
        nodes = np.stack([np.broadcast_to(z1, w.shape).reshape(-1),
                          np.broadcast_to(z2, w.shape).reshape(-1)], axis=1)
        weights = w.reshape(-1)
    else:
        x, wx = _panel_gauss(0.0, 1.0, 1, rule.radial_order)
        y, wy = _panel_gauss(0.0, 1.0, 1, rule.radial_order)
        count = T.size * x.size * y.size * na ** 3
        _check_cap(count, rule)
        # dv = T^2 (1-x) dT dx dy; prefactor n! = 6
        v1 = T[:, None, None] * x[None, :, None] * np.ones_like(y)[None, None, :]
        v2 = T[:, None, None] * ((1.0 - x)[None, :, None] * y[None, None, :])
        v3 = T[:, None, None] * ((1.0 - x)[None, :, None] * (1.0 - y)[None, None, :])
        wr = 6.0 * (wT * T ** 2)[:, None, None] * (wx * (1.0 - x))[None, :, None] * wy[None, None, :]
        shape = wr.shape + (na, na, na)
        e1 = np.exp(1j * theta)
        z1 = np.sqrt(v1)[..., None, None, None] * e1[None, None, None, :, None, None]
        z2 = np.sqrt(v2)[..., None, None, None] * e1[None, None, None, None, :, None]
        z3 = np.sqrt(v3)[..., None, None, None] * e1[None, None, None, None, None, :]
        w = wr[..., None, None, None] * (wtheta[:, None, None] * wtheta[None, :, None] * wtheta[None, None, :])
        nodes = np.stack([np.broadcast_to(z1, shape).reshape(-1),
                          np.broadcast_to(z2, shape).reshape(-1),
                          np.broadcast_to(z3, shape).reshape(-1)], axis=1)
        weights = w.reshape(-1)

    return QuadratureGrid(nodes=nodes, weights=weights, support_radius=s)


def _check_cap(count, rule):
    if count > rule.node_cap:
        raise ResourceCapError(f"grid would need {count} nodes (cap {rule.node_cap})")


def grid_on_pseudo_ball(center, s, rule=GridRule()):
    """Nodes and mu-weights for integration over the pseudo-ball E(center, s).

    Uses the invariance of mu: int_{E(w,s)} g d mu = int_{B(0,s)} g(phi_w(u)) d mu(u).
    Returns (nodes_in_E, mu_weights, base_grid_on_B0s).
    """
    base = build_grid(len(as_points(center)), s, rule)
    phi = Automorphism(center)
    return phi.apply(base.nodes), base.mu_weights(), base
