"""Zero location and counting.

For n = 1 the truncated GAF is a polynomial: roots come from the companion
matrix (with a radius rescaling for balance) plus two Newton polish steps.
Counts inside |z| < r are certified by a Rouche margin test: if the modulus
of the truncation on the circle exceeds the discarded-tail envelope, the
truncated and untruncated counts agree outside an event whose probability is
bounded by the sample's tail policy.

A much faster winding-number path evaluates f on a circle grid and reads the
count from the total phase increment; it falls back to companion roots when
the phase steps are too large or the margin too small.

For n >= 2 zero evidence is one-sided: restricting f to random complex lines
through the origin gives univariate polynomials whose roots certify
"no hole"; declaring a hole relies on a covering grid and a gradient
heuristic, and is labelled as such.
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass, field

import numpy as np
from numpy.polynomial import polynomial as P

from .errors import DomainError
from .indices import layer_count
from .sampling import GafSample, gaussian_stream, log_diag_term

__all__ = [
    "ZeroReport",
    "tail_envelope",
    "roots_disk",
    "count_zeros_disk",
    "batch_counts",
    "hole_indicator",
    "slice_coefficients",
]

RESIDUAL_REL_TOL = 1e-8


@dataclass(frozen=True)
class ZeroReport:
    """Outcome of zero location / counting inside a region."""

    mode: str                   # "exact-roots" (n=1) or "slice-evidence" (n>=2)
    count_in_region: int
    certainty: str              # "certified" | "uncertain"
    trial: int
    roots: np.ndarray | None = None
    slices_used: int = 0
    min_modulus: float = field(default=math.nan)

    def to_json_line(self):
        rec = {"trial": self.trial, "count": self.count_in_region,
               "certainty": self.certainty}
        if self.roots is not None:
            rec["roots"] = [[float(r.real), float(r.imag)] for r in self.roots]
        return json.dumps(rec)


def tail_envelope(n, L, M, r, extra=400):
    """Certified bound for sup_{|z|<=r} |sum_{m>M} layer_m| on the event that
    every discarded layer norm satisfies ||a_m|| <= m^n.

    Uses |layer_m(z)| <= ||a_m|| sqrt(T_m) |z|^m with T_m the diagonal layer
    total; the series is summed until a geometric remainder certifies the rest.
    """
    if not 0.0 <= r < 1.0:
        raise DomainError("envelope radius must lie in [0, 1)")
    if r == 0.0:
        return 0.0
    log_r = math.log(r)
    acc = 0.0
    m = M + 1
    while m <= M + extra:
        log_term = n * math.log(m) + 0.5 * float(log_diag_term(L, m)) + m * log_r
        term = math.exp(log_term)
        acc += term
        q = ((m + 1) / m) ** n * max(1.0, math.sqrt((L + m) / (m + 1))) * r
        if q < 1.0 and term * q / (1.0 - q) < 1e-18 * max(acc, 1e-300):
            return acc + term * q / (1.0 - q)
        m += 1
    # final geometric closure (q < 1 is guaranteed once m >> L r^2/(1-r^2))
    q = ((m + 1) / m) ** n * max(1.0, math.sqrt((L + m) / (m + 1))) * r
    if q >= 1.0:
        raise DomainError("envelope series did not enter its geometric regime; "
                          "increase extra")
    return acc + term * q / (1.0 - q)


def _poly_coeffs(sample):
    if sample.n != 1:
        raise DomainError("polynomial coefficients require n = 1")
    return sample.weighted_coeffs()


def _circle_values(coeffs, r, n_points):
    z = r * np.exp(2j * np.pi * np.arange(n_points) / n_points)
    return z, P.polyval(z, coeffs)


def _derivative_sup(coeffs, r):
    m = np.arange(len(coeffs), dtype=float)
    return float(np.sum(m * np.abs(coeffs) * r ** np.maximum(m - 1, 0)))


def _winding(values):
    """Total winding number of a cyclic value sequence, with the largest
    phase step for reliability checks."""
    ratios = np.roll(values, -1) / values
    steps = np.angle(ratios)
    total = float(np.sum(steps))
    return total / (2.0 * math.pi), float(np.max(np.abs(steps)))


def roots_disk(sample, r, polish_steps=2, n_points=512):
    """All roots of the truncation inside |z| < r with a Rouche certainty flag."""
    if not 0.0 < r <= max(sample.tail.r_max, r):
        raise DomainError("radius must be positive")
    coeffs = _poly_coeffs(sample)
    # rescale z = s y for balance; s anchored at the counting radius
    s = max(r, 1e-3)
    scaled = coeffs * s ** np.arange(len(coeffs))
    scaled = np.trim_zeros(scaled, "b")
    if len(scaled) <= 1:
        roots = np.empty(0, dtype=complex)
    else:
        try:
            roots = np.roots(scaled[::-1]) * s
        except np.linalg.LinAlgError as exc:
            raise ArithmeticError("companion eigenvalue solve failed") from exc
        dcoeffs = P.polyder(coeffs)
        for _ in range(polish_steps):
            fv = P.polyval(roots, coeffs)
            dv = P.polyval(roots, dcoeffs)
            ok = np.abs(dv) > 0
            roots = np.where(ok, roots - fv / np.where(ok, dv, 1.0), roots)

    inside = roots[np.abs(roots) < r]
    # residual contract relative to the local layer scale
    if inside.size:
        scale = np.array([np.max(np.abs(coeffs) * np.abs(z) ** np.arange(len(coeffs)))
                          for z in inside])
        resid = np.abs(P.polyval(inside, coeffs))
        if np.any(resid > RESIDUAL_REL_TOL * np.maximum(scale, 1e-300)):
            raise ArithmeticError("root residual above tolerance")

    env = tail_envelope(sample.n, sample.L, sample.max_degree, r)
    _, vals = _circle_values(coeffs, r, n_points)
    disc_min = float(np.min(np.abs(vals)))
    margin = disc_min - _derivative_sup(coeffs, r) * math.pi * r / n_points
    certainty = "certified" if margin > env else "uncertain"
    return ZeroReport(mode="exact-roots", count_in_region=int(inside.size),
                      certainty=certainty, trial=sample.trial, roots=inside,
                      min_modulus=disc_min)


def count_zeros_disk(sample, r, n_points=256):
    """Zero count in |z| < r via the winding number, with companion fallback."""
    coeffs = _poly_coeffs(sample)
    env = tail_envelope(sample.n, sample.L, sample.max_degree, r)
    count, certified, needs_fallback = _count_from_circle(coeffs, r, env, n_points)
    if needs_fallback:
        report = roots_disk(sample, r)
        return report.count_in_region, report.certainty == "certified"
    return count, certified


def _count_from_circle(coeffs, r, env, n_points):
    _, vals = _circle_values(coeffs, r, n_points)
    disc_min = float(np.min(np.abs(vals)))
    margin = disc_min - _derivative_sup(coeffs, r) * math.pi * r / n_points
    winding, max_step = _winding(vals)
    count = int(round(winding))
    reliable = (max_step < 2.8) and abs(winding - count) < 0.2 and margin > 0.0
    certified = reliable and margin > env
    return count, certified, not reliable


def batch_counts(coeff_matrix, r, env, n_points=256):
    """Winding counts for a batch of degree-M polynomials.

    coeff_matrix has shape (M+1, B), ascending degree.  Returns
    (counts, certified, needs_fallback) arrays of length B; flagged columns
    should be recounted through roots_disk.
    """
    K, B = coeff_matrix.shape
    z = r * np.exp(2j * np.pi * np.arange(n_points) / n_points)
    # Vandermonde-style basis (n_points, K): powers of the circle nodes
    V = np.empty((n_points, K), dtype=complex)
    V[:, 0] = 1.0
    for k in range(1, K):
        V[:, k] = V[:, k - 1] * z
    vals = V @ coeff_matrix                             # (n_points, B)
    disc_min = np.min(np.abs(vals), axis=0)
    m = np.arange(K, dtype=float)[:, None]
    deriv_sup = np.sum(m * np.abs(coeff_matrix) * r ** np.maximum(m - 1, 0), axis=0)
    margin = disc_min - deriv_sup * math.pi * r / n_points

    ratios = np.roll(vals, -1, axis=0) / vals
    steps = np.angle(ratios)
    winding = np.sum(steps, axis=0) / (2.0 * math.pi)
    counts = np.rint(winding).astype(np.int64)
    reliable = (np.max(np.abs(steps), axis=0) < 2.8) \
        & (np.abs(winding - counts) < 0.2) & (margin > 0.0)
    certified = reliable & (margin > env)
    return counts, certified, ~reliable


def slice_coefficients(sample, direction):
    """Coefficients of t -> f(t * direction) for a unit direction in C^n."""
    direction = np.asarray(direction, dtype=complex)
    layout = sample.layout
    weighted = sample.weighted_coeffs()
    mono = np.prod(direction[None, :] ** layout.exponents, axis=1)
    out = np.zeros(sample.max_degree + 1, dtype=complex)
    contrib = weighted * mono
    for m in range(sample.max_degree + 1):
        sl = layout.layer_slice(m)
        out[m] = np.sum(contrib[sl])
    return out


def hole_indicator(sample, r, slices=8, grid_points=24):
    """Decide whether the zero set misses the ball B(0, r).

    n = 1: exact through certified counting.  n >= 2: roots on random complex
    lines are *sound* evidence against a hole; the hole verdict itself uses a
    covering grid with a gradient margin and stays an explicitly one-sided
    heuristic.
    """
    if r > sample.tail.r_max + 1e-12 and sample.tail.r_max > 0:
        raise DomainError("hole radius exceeds the tail-certified r_max")
    if sample.n == 1:
        count, certified = count_zeros_disk(sample, r)
        if count > 0:
            return "no-hole"
        return "hole" if certified else "uncertain"

    rng = gaussian_stream(sample.seed, sample.trial, salt=0xD1CE)
    env = tail_envelope(sample.n, sample.L, sample.max_degree, r)
    for _ in range(slices):
        v = rng.standard_normal(sample.n) + 1j * rng.standard_normal(sample.n)
        v /= np.linalg.norm(v)
        coeffs = slice_coefficients(sample, v)
        count, certified, needs_fallback = _count_from_circle(coeffs, r, env, 256)
        if needs_fallback:
            scaled = np.trim_zeros(coeffs * r ** np.arange(len(coeffs)), "b")
            if len(scaled) > 1:
                roots = np.roots(scaled[::-1]) * r
                count = int(np.sum(np.abs(roots) < r))
            else:
                count = 0
        if count > 0:
            return "no-hole"

    # covering-grid heuristic: a hole verdict needs min |f| to clear both the
    # truncation envelope and a mesh-scale variation margin
    from .geometry import GridRule, build_grid
    from .sampling import evaluate

    grid = build_grid(sample.n, r, GridRule(radial_panels=3, radial_order=4,
                                            angular_points=grid_points))
    vals = np.abs(evaluate(sample, grid.nodes, warn_outside=False))
    mesh_ratio = max(2.0 * math.pi / grid_points, 1.0 / 12.0)
    margin = 2.0 * float(np.max(vals)) * mesh_ratio
    if float(np.min(vals)) > margin + env:
        return "hole"
    return "uncertain"
