import math

import numpy as np
import pytest

from oracles import dp_lcs

from varjack import lcs_lab as L
from varjack.model import FiniteDistribution
from varjack.montecarlo import EstimatorConfig


def exact_b_last(model):
    _, r = L.exact_decomposition(model)
    return float(r.B[-1]), r


class TestB1:
    def test_small_exact(self):
        model = L.LcsModel.uniform(3)
        _, r = L.exact_decomposition(model)
        est = L.b1_lcs_estimate(model, EstimatorConfig(40000, seed=1))
        assert est.within(r.B[0])

    def test_single_letter_alphabet(self):
        d = FiniteDistribution((0,), (1.0,))
        est = L.b1_lcs_estimate(L.LcsModel(5, d, d), EstimatorConfig(100))
        assert est.mean == 0.0

    def test_positive_at_n100(self):
        est = L.b1_lcs_estimate(L.LcsModel.uniform(100), EstimatorConfig(100_000, seed=2))
        assert est.mean >= 0.01


class TestBlast:
    def test_symmetric_zero(self):
        est = L.blast_lcs_estimate(L.LcsModel.uniform(30), EstimatorConfig(20000, seed=3))
        assert est.within(0.0)

    @pytest.mark.parametrize("n", [2, 3, 4])
    def test_biased_exact(self, n):
        model = L.LcsModel.bernoulli(n, 0.3)
        b, _ = exact_b_last(model)
        est = L.blast_lcs_estimate(model, EstimatorConfig(40000, seed=n))
        assert est.within(b)
        assert est.extra["lower_bound_var"] == pytest.approx(2 * n * est.mean)

    def test_degenerate(self):
        est = L.blast_lcs_estimate(L.LcsModel.bernoulli(5, 0.0), EstimatorConfig(100))
        assert est.mean == 0.0 and est.stderr == 0.0

    def test_exact_symmetry_small(self):
        for n in (1, 2, 3, 4):
            b, _ = exact_b_last(L.LcsModel.uniform(n))
            assert abs(b) < 1e-12

    def test_non_binary(self):
        with pytest.raises(ValueError, match="binary"):
            L.blast_lcs_estimate(L.LcsModel.uniform(5, 3), EstimatorConfig(10))


class TestCellStatistic:
    def test_equal_words(self):
        spec = L.PerturbationSpec((1, 0), (1, 0), 10)
        assert L.cell_statistic(L.LcsModel.uniform(10), spec, EstimatorConfig(2)).mean == 0.0

    def test_divisibility(self):
        with pytest.raises(ValueError, match="divide"):
            L.cell_statistic(L.LcsModel.uniform(9), L.PerturbationSpec((1, 0), (1, 1), 10), EstimatorConfig(2))

    @pytest.mark.parametrize("n", [2, 3, 4])
    def test_paired_formula_matches_exact(self, n):
        exact_bn = L.paired_exact_b_last(n)
        est = L.cell_statistic(L.LcsModel.uniform(n), L.PerturbationSpec.pair_formula(5000),
                               EstimatorConfig(2, seed=n))
        assert abs(est.extra["B_n"] - exact_bn) <= 4 * est.extra["B_n_stderr"]

    def test_block_effect_by_enumeration(self):
        # n = 2, one block of length 2 over X: (E[LCS(10, Y) - LCS(11, Y)])^2
        ys = [(a, b) for a in (0, 1) for b in (0, 1)]
        mean = np.mean([dp_lcs((1, 0), y) - dp_lcs((1, 1), y) for y in ys])
        est = L.cell_statistic(L.LcsModel.uniform(2), L.PerturbationSpec((1, 0), (1, 1), 20000),
                               EstimatorConfig(2, seed=5))
        assert est.within(mean ** 2)

    def test_thread_independence(self):
        spec = L.PerturbationSpec((1, 0), (1, 1), 50)
        a = L.cell_statistic(L.LcsModel.uniform(20), spec, EstimatorConfig(2, seed=1, streams=1))
        b = L.cell_statistic(L.LcsModel.uniform(20), spec, EstimatorConfig(2, seed=1, streams=3))
        assert (a.mean, a.stderr) == (b.mean, b.stderr)


class TestOmittedLetter:
    def model(self, n, p=0.3):
        x = FiniteDistribution.from_probs([(1 - p) / 2, (1 - p) / 2, p])
        return L.LcsModel(n, x, FiniteDistribution.uniform(2))

    def test_p_one(self):
        x = FiniteDistribution((2,), (1.0,))
        res = L.omitted_letter_bound(L.LcsModel(5, x, FiniteDistribution.uniform(2)), EstimatorConfig(100))
        assert res.delta_e.mean == 0 and res.bound_linear == 0 and res.bound_quadratic == 0

    def test_letter_in_y(self):
        with pytest.raises(L.HypothesisError):
            L.omitted_letter_bound(L.LcsModel.uniform(5, 3), EstimatorConfig(10), omitted=2)

    @pytest.mark.parametrize("n", [1, 2, 3])
    def test_against_exact(self, n):
        model = self.model(n)
        b, _ = exact_b_last(model)
        de = L.exact_delta_e(model)
        # quadratic form is a valid lower bound on B_2n
        assert 0.25 * de * de * 0.3 <= b + 1e-12
        res = L.omitted_letter_bound(model, EstimatorConfig(40000, seed=n), with_variance=False)
        assert res.delta_e.within(de)
        assert res.delta_e_squared.within(de * de)

    def test_linear_form_can_exceed_b2n(self):
        model = self.model(2)
        b, _ = exact_b_last(model)
        assert 0.25 * L.exact_delta_e(model) * 0.3 > b

    def test_quadratic_bound_below_variance_n50(self):
        res = L.omitted_letter_bound(self.model(50), EstimatorConfig(4000, seed=7))
        assert res.bound_quadratic <= res.variance.mean + 4 * res.variance.stderr


class TestUpperBound:
    def test_exact_binary_n4(self):
        rep = L.upper_bound_report(L.LcsModel.uniform(4), EstimatorConfig(10))
        assert rep.exact and rep.symmetric and rep.bound == 1.0
        assert rep.variance.mean <= 1.0 and rep.passed

    def test_bounds_formula(self):
        rep = L.upper_bound_report(L.LcsModel.uniform(10, 4), EstimatorConfig(500))
        assert rep.bound_halved == pytest.approx(0.375 * 10)
        rep = L.upper_bound_report(L.LcsModel.bernoulli(10, 0.3), EstimatorConfig(500))
        assert not rep.symmetric
        assert rep.bound == pytest.approx(10 * (1 - 0.09 - 0.49))

    def test_asymmetric_exact(self):
        rep = L.upper_bound_report(L.LcsModel.bernoulli(3, 0.3), EstimatorConfig(10))
        assert rep.exact and rep.passed


class TestVarsup:
    def test_reference_constant(self):
        assert L.varsup_constant(0.096, 0.8263) >= 1.8e-8

    def test_hand_value(self):
        # g(0.096) = 0.096^2 + 0.904^2 = 0.826432; slope = 0.000132 / 0.404
        expected = 2 * 0.096 * 0.904 * (0.000132 / 0.404) ** 2
        assert L.varsup_constant(0.096, 0.8263) == pytest.approx(expected, rel=1e-9)

    def test_boundary_zero(self):
        p0 = 0.1
        assert L.varsup_constant(p0, p0 * p0 + (1 - p0) ** 2) == 0.0

    def test_p005(self):
        v = L.varsup_constant(0.05, 0.8263)
        assert v == pytest.approx(2 * 0.05 * 0.95 * ((0.905 - 0.8263) / 0.45) ** 2, rel=1e-12)
        assert v > L.varsup_constant(0.096, 0.8263)

    def test_hypothesis_violation(self):
        with pytest.raises(L.HypothesisError):
            L.varsup_constant(0.2, 0.8263)
        with pytest.raises(ValueError):
            L.varsup_constant(0.5, 0.1)
