import itertools
import math

import mpmath
import numpy as np
import pytest

from varjack import asymptotics as A
from varjack import exact


class TestPolynomial:
    def test_derivative_beyond_degree(self):
        assert A.PolynomialG((1, 2, 3)).derivative(3).coeffs == (0.0,)

    def test_moments(self):
        assert [A.gaussian_moment(p) for p in range(7)] == [1, 0, 1, 0, 3, 0, 15]


class TestTargets:
    def test_linear(self):
        t = A.gaussian_targets(A.PolynomialG((0, 1)), 3)
        np.testing.assert_array_equal(t.eta, [1, 0, 0])
        np.testing.assert_array_equal(t.theta, [1, 0, 0])
        assert t.variance == 1.0

    def test_square(self):
        t = A.gaussian_targets(A.PolynomialG((0, 0, 1)))
        np.testing.assert_array_equal(t.eta, [4, 4])
        np.testing.assert_array_equal(t.theta, [0, 4])
        assert t.variance == 2.0
        assert t.eta[0] - t.eta[1] / 2 == 2.0
        assert t.theta[1] / 2 == 2.0

    def test_cube(self):
        assert A.gaussian_targets(A.PolynomialG((0, 0, 0, 1))).eta[0] == 27.0

    def test_random_series(self):
        rng = np.random.default_rng(0)
        for _ in range(10):
            t = A.gaussian_targets(A.PolynomialG(tuple(rng.normal(size=rng.integers(1, 7)))), 6)
            assert t.passed, t.residuals
            assert np.all(t.eta >= t.theta - 1e-12)

    def test_variance_by_quadrature(self):
        G = A.PolynomialG((0.3, -1.0, 0.5, 0.2))
        f = lambda z: G(float(z)) * mpmath.npdf(z)
        m = mpmath.quad(f, [-mpmath.inf, mpmath.inf])
        s2 = mpmath.quad(lambda z: G(float(z)) ** 2 * mpmath.npdf(z), [-mpmath.inf, mpmath.inf])
        assert G.gaussian_variance() == pytest.approx(float(s2 - m * m), rel=1e-10)


class TestRademacher:
    def test_linear(self):
        for n in (1, 5, 30):
            J, K = A.rademacher_jackknife(A.PolynomialG((0, 1)), n, 1)
            assert J[0] == pytest.approx(1.0)
            assert K[0] == pytest.approx(1.0)

    def test_square_closed_form(self):
        for n in (2, 10, 50, 200):
            J, _ = A.rademacher_jackknife(A.PolynomialG((0, 0, 1)), n, 1)
            assert J[0] == pytest.approx(4 * (n - 1) / n, rel=1e-12)

    def test_against_exact_engine(self):
        rng = np.random.default_rng(1)
        for _ in range(10):
            G = A.PolynomialG(tuple(rng.normal(size=rng.integers(1, 6))))
            for n in (1, 3, 6, 8):
                J, K = A.rademacher_jackknife(G, n)
                _, r = exact.decompose(A.rademacher_space(n), A.rademacher_sum_function(G, n))
                fact = np.array([math.factorial(k) for k in range(1, n + 1)])
                np.testing.assert_allclose(J, r.Jp * fact, atol=1e-9)
                np.testing.assert_allclose(K, r.Kp * fact, atol=1e-9)

    def test_binomial_weights_log_space(self):
        w = A.binom_weights(200)
        assert w.sum() == pytest.approx(1.0)
        assert w[100] == pytest.approx(math.comb(200, 100) / 2 ** 200, rel=1e-12)

    def test_kmax_range(self):
        with pytest.raises(ValueError):
            A.rademacher_jackknife(A.PolynomialG((0, 1)), 3, 4)


class TestConvergence:
    def test_constant(self):
        rows = A.convergence_table(A.PolynomialG((2.0,)), [5, 10], 2)
        assert all(r["J"] == 0 and r["K"] == 0 and r["eta"] == 0 for r in rows)

    def test_linear_exact(self):
        rows = A.convergence_table(A.PolynomialG((0, 1)), [5, 10, 20], 2)
        assert all(r["gap_J"] < 1e-12 and r["gap_K"] < 1e-12 for r in rows)

    def test_square_rows(self):
        rows = [r for r in A.convergence_table(A.PolynomialG((0, 0, 1)), [10, 20, 40], 1)]
        assert [r["gap_J"] for r in rows] == pytest.approx([0.4, 0.2, 0.1], rel=1e-10)
        assert A.gaps_nonincreasing(rows) == []


class TestHoeffding:
    def test_zero(self):
        f, _ = A.hoeffding_construct(A.HoeffdingSpec((0, 0, 0)))
        assert np.all(f(A.rademacher_space(3).grid()) == 0)

    def test_first_order(self):
        f, rep = A.hoeffding_construct(A.HoeffdingSpec((1, 0, 0, 0)))
        assert rep["amplitudes"][0] == pytest.approx(0.5)
        assert f([1, 1, 0, 1]) == pytest.approx((1 + 1 - 1 + 1) / 2)
        assert rep["K"][0] == pytest.approx(1.0)

    def test_round_trip(self):
        _, rep = A.hoeffding_construct(A.HoeffdingSpec((3, 1, 4, 1, 5)))
        assert rep["verified"] and rep["max_residual"] <= 1e-9

    def test_negative(self):
        with pytest.raises(ValueError, match="K_2"):
            A.HoeffdingSpec((1, -1))

    def test_elementary_symmetric(self):
        v = np.array([0.5, -2.0, 3.0, 1.5])
        e = A.elementary_symmetric(v)
        for k in range(5):
            ref = sum(math.prod(c) for c in itertools.combinations(v, k))
            assert e[k] == pytest.approx(ref)


class TestHyper:
    def test_r1_against_mpmath(self):
        with mpmath.workdps(40):
            ref = mpmath.sqrt(2) * mpmath.quad(lambda t: mpmath.exp(-t / 2) / mpmath.sqrt(t), [0, 0.5])
        assert A.hyper_gap_ratio(1).R == pytest.approx(float(ref), abs=1e-10)

    def test_r1_closed_form(self):
        assert A.hyper_gap_ratio(1).R == pytest.approx(2 * math.sqrt(math.pi) * math.erf(0.5), abs=1e-12)

    def test_against_mpmath_general(self):
        for n in (3, 7):
            def g(t):
                return mpmath.sqrt(sum(2 ** i * mpmath.exp(-(2 ** i) * t) for i in range(n)) / n) / mpmath.sqrt(t)

            with mpmath.workdps(40):
                pts = [0] + [mpmath.mpf(2) ** -i for i in range(n - 1, 0, -1)] + [0.5]
                ref = mpmath.sqrt(2) * mpmath.quad(g, pts)
            assert A.hyper_gap_ratio(n).R == pytest.approx(float(ref), abs=1e-8)

    def test_growth(self):
        r = [A.hyper_gap_ratio(n).R for n in range(1, 41)]
        assert all(b > a for a, b in zip(r, r[1:]))
        ratios = [r[4 * n - 1] / r[n - 1] for n in range(2, 11)]
        assert all(b > a for a, b in zip(ratios, ratios[1:]))
        assert ratios[-1] > 1.85

    def test_range(self):
        with pytest.raises(ValueError):
            A.hyper_gap_ratio(41)
