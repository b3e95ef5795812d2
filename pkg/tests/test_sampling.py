import math

import numpy as np
import pytest
from scipy.special import gammaln

from hypgaf.errors import DomainError, ResourceCapError
from hypgaf.indices import layer_layout
from hypgaf.kernels import kernel_diag
from hypgaf.sampling import (
    Evaluator,
    GafSample,
    TailPolicy,
    WeightTable,
    choose_truncation,
    dump_coefficients,
    evaluate,
    evaluate_log_normalized,
    load_coefficients,
    log_diag_term,
    normalisation_constant_log,
    sample,
)


def tail_sum(L, x, M, terms=4000):
    """Slow oracle for sum_{m>M} Gamma(L+m)/(m! Gamma(L)) x^m."""
    ms = np.arange(M + 1, M + 1 + terms, dtype=float)
    return float(np.sum(np.exp(gammaln(L + ms) - gammaln(L) - gammaln(ms + 1) + ms * np.log(x))))


class TestChooseTruncation:
    def test_zero_radius(self):
        assert choose_truncation(1, 5.0, 0.0, 1e-8) == 0

    def test_geometric_case(self):
        # L = 1 makes the diagonal series exactly geometric: the smallest M
        # with sum_{m>M} 0.25^m = 0.25^(M+1)/0.75 <= 1e-16 is M = 26.
        M = choose_truncation(1, 1.0, 0.5, 1e-8)
        assert M == 26
        assert 0.25 ** (M + 1) / 0.75 <= 1e-16 < 0.25 ** M / 0.75

    @pytest.mark.parametrize("n", [1, 2])
    @pytest.mark.parametrize("L", [0.5, 3.0, 20.0])
    def test_tail_bound_holds_and_is_tight(self, n, L):
        r, eps = 0.6, 1e-7
        M = choose_truncation(n, L, r, eps)
        x = r * r
        assert tail_sum(L, x, M) <= eps ** 2
        # one degree less must violate the *certified* bound (minimality of M
        # is relative to the geometric majorant used by the implementation)
        m0 = M
        log_term = float(log_diag_term(L, m0)) + m0 * math.log(x)
        qbar = max((L + m0) / (m0 + 1) * x, x)
        assert log_term - math.log1p(-qbar) > 2 * math.log(eps)

    def test_monotone_in_L_and_radius(self):
        eps = 1e-8
        Ms_L = [choose_truncation(1, L, 0.5, eps) for L in (1.0, 2.0, 5.0, 20.0, 80.0)]
        assert all(a <= b for a, b in zip(Ms_L, Ms_L[1:]))
        Ms_r = [choose_truncation(1, 5.0, r, eps) for r in (0.1, 0.3, 0.5, 0.7, 0.9)]
        assert all(a <= b for a, b in zip(Ms_r, Ms_r[1:]))

    def test_cap(self):
        with pytest.raises(ResourceCapError):
            choose_truncation(1, 5.0, 0.999, 1e-8, cap=50)


class TestWeights:
    def test_one_dim_square(self):
        wt = WeightTable.build(1, 2.5, 10)
        for m in range(11):
            expected = math.exp(gammaln(2.5 + m) - gammaln(2.5) - gammaln(m + 1.0))
            got = math.exp(2 * wt.log_w[wt.layout.layer_slice(m)][0])
            assert got == pytest.approx(expected, rel=1e-13)

    def test_ratio_identity(self):
        # w^2_{alpha+e_j} / w^2_alpha = (L + m) / (alpha_j + 1)
        rng = np.random.default_rng(2)
        n, L, M = 3, 500.0, 40
        wt = WeightTable.build(n, L, M)
        layout = wt.layout
        exps = layout.exponents
        lookup = {tuple(e): i for i, e in enumerate(exps)}
        for _ in range(200):
            i = rng.integers(0, layout.size)
            alpha = exps[i]
            m = int(alpha.sum())
            if m >= M:
                continue
            j = rng.integers(0, n)
            beta = alpha.copy()
            beta[j] += 1
            k = lookup[tuple(beta)]
            ratio = math.exp(2 * (wt.log_w[k] - wt.log_w[i]))
            assert ratio == pytest.approx((L + m) / (alpha[j] + 1), rel=1e-12)

    def test_log_scale_no_overflow(self):
        wt = WeightTable.build(1, 500.0, 5000)
        assert np.all(np.isfinite(wt.log_w))
        wt2 = WeightTable.build(2, 500.0, 700)
        assert np.all(np.isfinite(wt2.log_w))

    def test_kernel_layer_reproduction(self):
        # sum_{|alpha|=m} w_alpha^2 z^alpha conj(w^alpha) = T_m <z,w>^m
        n, L, M = 2, 3.5, 8
        wt = WeightTable.build(n, L, M)
        layout = wt.layout
        rng = np.random.default_rng(4)
        z = (rng.standard_normal(n) + 1j * rng.standard_normal(n)) * 0.4
        w = (rng.standard_normal(n) + 1j * rng.standard_normal(n)) * 0.4
        h = np.sum(z * np.conj(w))
        for m in range(M + 1):
            sl = layout.layer_slice(m)
            exps = layout.exponents[sl]
            mono = np.prod(z[None, :] ** exps, axis=1) * np.prod(np.conj(w)[None, :] ** exps, axis=1)
            got = np.sum(np.exp(2 * wt.log_w[sl]) * mono)
            want = math.exp(float(log_diag_term(L, m))) * h ** m
            assert got == pytest.approx(want, rel=1e-12, abs=1e-15)

    def test_normalisation_constant(self):
        assert normalisation_constant_log(1, 3.0) == pytest.approx(math.log(2.0 / 1.0), rel=1e-12)
        with pytest.raises(DomainError):
            normalisation_constant_log(2, 1.5)


class TestSampling:
    def test_bitwise_determinism(self):
        a = sample(2, 5.0, 12, seed=12345, trial=7)
        b = sample(2, 5.0, 12, seed=12345, trial=7)
        assert np.array_equal(a.coeffs, b.coeffs)
        c = sample(2, 5.0, 12, seed=12345, trial=8)
        assert not np.array_equal(a.coeffs, c.coeffs)

    def test_coefficient_moments(self):
        # per-coefficient mean |a|^2 = 1 within 3 SE over 1e5 draws
        trials = 400
        layout = layer_layout(1, 249)
        acc = np.zeros(layout.size)
        for t in range(trials):
            s = sample(1, 2.0, 249, seed=99, trial=t)
            acc += np.abs(s.coeffs) ** 2
        n_draws = trials * layout.size  # 1e5 coefficient draws in total
        mean = float(np.sum(acc)) / n_draws
        se = 1.0 / math.sqrt(n_draws)  # Var(|a|^2) = 1 for N_C(0,1)
        assert abs(mean - 1.0) <= 3 * se

    def test_field_variance_matches_kernel(self):
        n, L, M = 1, 6.0, 40
        z = np.array([0.45 + 0.2j])
        trials = 4000
        vals = np.empty(trials, dtype=complex)
        for t in range(trials):
            s = sample(n, L, M, seed=7, trial=t)
            vals[t] = evaluate(s, z, warn_outside=False)
        emp = float(np.mean(np.abs(vals) ** 2))
        expect = float(kernel_diag(z, L))
        se = float(np.std(np.abs(vals) ** 2, ddof=1)) / math.sqrt(trials)
        assert abs(emp - expect) <= 3 * se


class TestEvaluate:
    def test_constant_sample(self):
        s = sample(1, 4.0, 10, seed=1, trial=0)
        coeffs = np.zeros_like(s.coeffs)
        coeffs[0] = 1.0
        s = GafSample(n=1, L=4.0, max_degree=10, seed=1, trial=0, coeffs=coeffs,
                      tail=TailPolicy(0.9, 1e-9, -math.inf))
        z = np.array([[0.3 + 0.4j]])
        got = evaluate_log_normalized(s, z)
        assert got[0] == pytest.approx(4.0 * math.log1p(-0.25), rel=1e-12)

    def test_linear_sample(self):
        # coefficients encoding f(z) = z: a_1 = 1 / w_1 with w_1 = sqrt(L)
        L = 9.0
        wt = WeightTable.build(1, L, 5)
        coeffs = np.zeros(wt.layout.size, dtype=complex)
        coeffs[1] = 1.0 / math.exp(wt.log_w[1])
        s = GafSample(n=1, L=L, max_degree=5, seed=0, trial=0, coeffs=coeffs,
                      tail=TailPolicy(0.9, 1e-9, -math.inf))
        assert evaluate(s, np.array([0.5])) == pytest.approx(0.5, rel=1e-13)
        assert math.exp(wt.log_w[1]) == pytest.approx(math.sqrt(L), rel=1e-14)

    def test_truncation_stability(self):
        # values at degree M vs degree M+10 differ by less than 10 eps_tail
        n, L, r_max, eps = 1, 8.0, 0.55, 1e-7
        M = choose_truncation(n, L, r_max, eps)
        rng = np.random.default_rng(3)
        pts = (rng.standard_normal((50, 1)) + 1j * rng.standard_normal((50, 1)))
        pts *= 0.5 * r_max / np.abs(pts)
        big = sample(n, L, M + 10, seed=11, trial=3, r_max=r_max, eps_tail=eps)
        small = GafSample(n=n, L=L, max_degree=M, seed=11, trial=3,
                          coeffs=big.coeffs[:layer_layout(n, M).size],
                          tail=TailPolicy(r_max, eps, -math.inf))
        va = evaluate(small, pts)
        vb = evaluate(big, pts)
        assert np.max(np.abs(va - vb)) < 10 * eps

    def test_outside_warns(self):
        s = sample(1, 3.0, 10, seed=5, trial=0, r_max=0.4, eps_tail=1e-6)
        with pytest.warns(UserWarning):
            evaluate(s, np.array([0.6]))

    def test_evaluator_matches_evaluate(self):
        n, L, M = 2, 7.0, 12
        s = sample(n, L, M, seed=21, trial=4)
        rng = np.random.default_rng(8)
        pts = (rng.standard_normal((30, n)) + 1j * rng.standard_normal((30, n))) * 0.3
        ev = Evaluator(n, L, M, pts)
        ref = evaluate(s, pts, warn_outside=False)
        assert np.max(np.abs(ev.values(s.coeffs) - ref)) < 1e-11 * np.max(np.abs(ref))
        ln = evaluate_log_normalized(s, pts, warn_outside=False)
        assert np.max(np.abs(ev.log_normalized(s.coeffs) - ln)) < 1e-10


def test_dump_load_roundtrip(tmp_path):
    s = sample(2, 4.5, 8, seed=77, trial=3, r_max=0.5, eps_tail=1e-6)
    path = tmp_path / "coeffs.csv"
    dump_coefficients(s, path)
    back = load_coefficients(path)
    assert back.n == s.n and back.L == s.L and back.max_degree == s.max_degree
    assert back.seed == s.seed and back.trial == s.trial
    assert np.array_equal(back.coeffs, s.coeffs)
    assert back.tail.r_max == s.tail.r_max
