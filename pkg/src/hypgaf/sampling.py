"""Sampling and evaluation of truncated hyperbolic GAFs.

A realisation is f(z) = sum_alpha a_alpha w_alpha z^alpha with i.i.d. complex
Gaussians a_alpha ~ N_C(0, 1) (components N(0, 1/2), so E|a|^2 = 1) and

    w_alpha = sqrt( Gamma(L + |alpha|) / (alpha! Gamma(L)) ).

The series is truncated at total degree M; M is chosen so that the diagonal
tail variance sum_{m>M} Gamma(L+m)/(m! Gamma(L)) r_max^(2m) stays below
eps_tail^2 on |z| <= r_max (certified through a geometric majorant).

Randomness is counter-based: each (master seed, trial) pair keys its own
Philox stream and coefficients are drawn in the fixed layer order, so results
do not depend on scheduling or worker count.
"""

from __future__ import annotations

import csv
import math
from dataclasses import dataclass

import numpy as np
from scipy.special import gammaincc, gammaln

from .errors import DomainError, ResourceCapError
from .geometry import as_points
from .indices import layer_count, layer_layout

__all__ = [
    "log_layer_weights",
    "WeightTable",
    "TailPolicy",
    "GafSample",
    "choose_truncation",
    "sample",
    "evaluate",
    "evaluate_log_normalized",
    "Evaluator",
    "first_intensity_density",
    "normalisation_constant_log",
    "dump_coefficients",
    "load_coefficients",
]

DEFAULT_TRUNCATION_CAP = 20_000


def log_layer_weights(L, exponents):
    """log w_alpha for an exponent table (K, n)."""
    m = np.sum(exponents, axis=1)
    return 0.5 * (gammaln(L + m) - gammaln(L) - np.sum(gammaln(exponents + 1.0), axis=1))


def log_diag_term(L, m):
    """log of T_m = Gamma(L+m) / (m! Gamma(L)), the diagonal layer total."""
    m = np.asarray(m, dtype=float)
    return gammaln(L + m) - gammaln(L) - gammaln(m + 1.0)


def normalisation_constant_log(n, L):
    """log of Gamma(L) / (n! Gamma(L - n)); defined for L > n.

    Documented constant of the weighted Bergman norm; the sampler itself only
    uses the coefficient weights, which are valid for every L > 0.
    """
    if L <= n:
        raise DomainError("normalisation constant requires L > n")
    return gammaln(L) - gammaln(L - n) - math.lgamma(n + 1)


@dataclass(frozen=True)
class WeightTable:
    """Layer weights for (n, L) up to total degree M, stored in log scale."""

    n: int
    L: float
    max_degree: int
    log_w: np.ndarray  # (K,) aligned with layer_layout(n, M).exponents

    @classmethod
    def build(cls, n, L, max_degree):
        if L <= 0:
            raise DomainError("intensity L must be positive")
        layout = layer_layout(n, max_degree)
        return cls(n=n, L=float(L), max_degree=max_degree,
                   log_w=log_layer_weights(float(L), layout.exponents))

    @property
    def layout(self):
        return layer_layout(self.n, self.max_degree)


def choose_truncation(n, L, r_max, eps_tail, cap=DEFAULT_TRUNCATION_CAP):
    """Smallest M whose certified tail bound satisfies
    sum_{m>M} T_m r_max^(2m) <= eps_tail^2.

    The tail is majorised by the geometric series term(M+1) / (1 - qbar) with
    qbar an upper bound for all successive term ratios beyond M+1.
    """
    r_max = float(r_max)
    if not 0.0 <= r_max < 1.0:
        raise DomainError("r_max must lie in [0, 1)")
    if eps_tail <= 0:
        raise DomainError("eps_tail must be positive")
    x = r_max * r_max
    if x == 0.0:
        return 0
    target = 2.0 * math.log(eps_tail)
    log_x = math.log(x)
    for M in range(cap + 1):
        m1 = M + 1
        log_term = float(log_diag_term(L, m1)) + m1 * log_x
        qbar = max((L + m1) / (m1 + 1) * x, x)
        if qbar < 1.0 and log_term - math.log1p(-qbar) <= target:
            return M
    raise ResourceCapError(f"truncation degree exceeds cap {cap} "
                           f"(L={L}, r_max={r_max}, eps_tail={eps_tail})")


def _tail_exceedance_log_prob(n, L, M, extra_terms=64):
    """log of sum_{m>M} P[ Gamma(N(n,m)) > m^(2n) ], the layer-norm exceedance bound."""
    worst = -math.inf
    acc = 0.0
    for m in range(M + 1, M + 1 + extra_terms):
        N = layer_count(n, m)
        p = float(gammaincc(N, float(m) ** (2 * n)))
        acc += p
        worst = max(worst, p)
    if acc == 0.0:
        return -math.inf
    return math.log(acc)


@dataclass(frozen=True)
class TailPolicy:
    """Truncation bookkeeping carried by every sample.

    exceedance_log_prob bounds the probability that some discarded layer norm
    ||a_m||, m > M, exceeds m^n; under its complement the discarded tail is
    below the envelope used by the zero-count certification.
    """

    r_max: float
    eps_tail: float
    exceedance_log_prob: float


@dataclass(frozen=True)
class GafSample:
    """One truncated realisation; immutable and safe to share across workers."""

    n: int
    L: float
    max_degree: int
    seed: int
    trial: int
    coeffs: np.ndarray  # (K,) complex, layer order
    tail: TailPolicy

    @property
    def layout(self):
        return layer_layout(self.n, self.max_degree)

    @property
    def weights(self):
        return WeightTable.build(self.n, self.L, self.max_degree)

    def weighted_coeffs(self):
        """c_alpha = a_alpha w_alpha in plain float scale (safe when the scale
        check of Evaluator passes; campaign regimes stay far from overflow)."""
        return self.coeffs * np.exp(self.weights.log_w)


def gaussian_stream(seed, trial, salt=0):
    """Philox generator keyed by (seed, trial, salt); order-independent."""
    key = np.array([np.uint64(seed), np.uint64(trial) ^ np.uint64(salt)], dtype=np.uint64)
    return np.random.Generator(np.random.Philox(key=key))


def sample(n, L, M, seed, trial, r_max=None, eps_tail=None):
    """Draw a truncated GAF realisation, deterministic in (seed, trial)."""
    if L <= 0:
        raise DomainError("intensity L must be positive")
    layout = layer_layout(n, M)
    rng = gaussian_stream(seed, trial)
    flat = rng.standard_normal(2 * layout.size)
    coeffs = (flat[0::2] + 1j * flat[1::2]) / math.sqrt(2.0)
    if r_max is None:
        r_max = 0.0
        eps = math.inf
        exc = -math.inf
    else:
        eps = float(eps_tail) if eps_tail is not None else float("nan")
        exc = _tail_exceedance_log_prob(n, L, M)
    tail = TailPolicy(r_max=float(r_max), eps_tail=eps, exceedance_log_prob=exc)
    return GafSample(n=n, L=float(L), max_degree=M, seed=int(seed), trial=int(trial),
                     coeffs=coeffs, tail=tail)


def _monomials(layout, z):
    """Monomial table z^alpha of shape (N_points, K) from power tables."""
    z = np.atleast_2d(z)
    npts = z.shape[0]
    M = layout.max_degree
    out = np.ones((npts, layout.size), dtype=complex)
    for j in range(layout.n):
        powers = np.ones((npts, M + 1), dtype=complex)
        for k in range(1, M + 1):
            powers[:, k] = powers[:, k - 1] * z[:, j]
        out *= powers[:, layout.exponents[:, j]]
    return out


def _evaluate_scaled(sample, pts, warn_outside):
    """Layer-scaled accumulation: returns (acc, big) with f = acc * exp(big)."""
    if warn_outside and sample.tail.r_max > 0.0:
        outside = np.sqrt(np.sum(np.abs(pts) ** 2, axis=1)) > sample.tail.r_max + 1e-12
        if np.any(outside):
            import warnings
            warnings.warn("evaluation outside the tail-certified radius r_max",
                          stacklevel=3)
    layout = sample.layout
    logw = sample.weights.log_w
    mono = _monomials(layout, pts)
    acc = np.zeros(pts.shape[0], dtype=complex)
    big = 0.0
    for m in range(layout.max_degree + 1):
        sl = layout.layer_slice(m)
        g = float(np.max(logw[sl]))
        u = mono[:, sl] @ (sample.coeffs[sl] * np.exp(logw[sl] - g))
        if g > big:
            acc *= math.exp(big - g)
            big = g
        acc += u * math.exp(g - big)
    return acc, big


def evaluate(sample, z, warn_outside=True):
    """Evaluate f at points z (overflow-safe layer accumulation).

    Points beyond the tail policy's r_max are legal but the truncation bound
    does not cover them; they are flagged, not fatal.
    """
    z = as_points(z, n=sample.n)
    pts = np.atleast_2d(z)
    acc, big = _evaluate_scaled(sample, pts, warn_outside)
    values = acc * math.exp(big) if big < 700.0 else acc * math.inf
    return values if z.ndim > 1 else values[0]


def evaluate_log_normalized(sample, z, warn_outside=True):
    """log |f_hat(z)|^2 = log|f(z)|^2 + L log(1 - |z|^2), overflow-safe."""
    z = as_points(z, n=sample.n)
    pts = np.atleast_2d(z)
    acc, big = _evaluate_scaled(sample, pts, warn_outside)
    t = np.sum(np.abs(pts) ** 2, axis=1)
    with np.errstate(divide="ignore"):
        vals = 2.0 * (np.log(np.abs(acc)) + big) + sample.L * np.log1p(-t)
    return vals if z.ndim > 1 else float(vals[0])


class Evaluator:
    """Weighted monomial basis bound to a fixed node set; f(nodes) = B @ a.

    Plain float64 storage; construction refuses regimes where the basis scale
    could overflow (campaigns sit far below the guard).
    """

    def __init__(self, n, L, max_degree, nodes):
        nodes = np.atleast_2d(as_points(nodes, n=n))
        wt = WeightTable.build(n, L, max_degree)
        layout = wt.layout
        rmax = float(np.max(np.sqrt(np.sum(np.abs(nodes) ** 2, axis=1)))) if nodes.size else 0.0
        if rmax >= 1.0:
            raise DomainError("nodes must lie in the open unit ball")
        degrees = layout.degrees()
        scale = np.max(wt.log_w + degrees * math.log(max(rmax, 1e-300)))
        if scale > 600.0:
            raise ResourceCapError("basis scale too large for float64; use evaluate()")
        self.n, self.L, self.max_degree = n, float(L), max_degree
        self.nodes = nodes
        self.basis = _monomials(layout, nodes) * np.exp(wt.log_w)[None, :]
        self._t = np.sum(np.abs(nodes) ** 2, axis=1)

    def values(self, coeffs):
        """f at the nodes from *raw* coefficients a_alpha (weights live in the
        basis); coeffs (K,) or (K, batch) -> (N,) or (N, batch)."""
        return self.basis @ coeffs

    def log_normalized(self, coeffs):
        vals = self.values(coeffs)
        t = self._t if vals.ndim == 1 else self._t[:, None]
        with np.errstate(divide="ignore"):
            return 2.0 * np.log(np.abs(vals)) + self.L * np.log1p(-t)


def first_intensity_density(z, L, n=None):
    """Expected zero-density L (1-|z|^2)^-(n+1) relative to nu.

    For n = 1 this is the density of the expected zero-counting measure:
    E[#(Z_f cap B(0,r))] = L r^2/(1-r^2).  In general E[I_L(psi)] =
    L int psi d mu for scalar linear statistics.
    """
    z = as_points(z, n=n)
    nn = z.shape[-1]
    t = np.sum(np.abs(z) ** 2, axis=-1)
    return L * (1.0 - t) ** (-(nn + 1))


def dump_coefficients(sample, path):
    """Write the coefficient layout to CSV (reproducibility audits).

    Header records (n, L, M, seed, trial, r_max, eps_tail); rows are
    (degree, alpha_1..alpha_n, re, im) in layer order.
    """
    layout = sample.layout
    with open(path, "w", newline="") as fh:
        fh.write(f"# n={sample.n} L={sample.L:.17g} M={sample.max_degree} "
                 f"seed={sample.seed} trial={sample.trial} "
                 f"r_max={sample.tail.r_max:.17g} eps_tail={sample.tail.eps_tail:.17g}\n")
        writer = csv.writer(fh)
        writer.writerow(["m"] + [f"alpha_{j+1}" for j in range(sample.n)] + ["re", "im"])
        degrees = layout.degrees()
        for i in range(layout.size):
            row = [int(degrees[i])] + [int(a) for a in layout.exponents[i]]
            row += [format(sample.coeffs[i].real, ".17g"), format(sample.coeffs[i].imag, ".17g")]
            writer.writerow(row)


def load_coefficients(path):
    """Inverse of dump_coefficients."""
    with open(path) as fh:
        header = fh.readline().lstrip("# ").split()
        meta = dict(kv.split("=") for kv in header)
        reader = csv.reader(fh)
        next(reader)
        re_im = [(float(row[-2]), float(row[-1])) for row in reader]
    coeffs = np.array([complex(a, b) for a, b in re_im])
    n = int(meta["n"])
    M = int(meta["M"])
    tail = TailPolicy(r_max=float(meta["r_max"]), eps_tail=float(meta["eps_tail"]),
                      exceedance_log_prob=_tail_exceedance_log_prob(n, float(meta["L"]), M))
    return GafSample(n=n, L=float(meta["L"]), max_degree=M, seed=int(meta["seed"]),
                     trial=int(meta["trial"]), coeffs=coeffs, tail=tail)
