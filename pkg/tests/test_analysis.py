import math

import numpy as np
import pytest
from hypothesis import given, strategies as st

from jumpeuler import (
    ClassParams, ConvergenceTable, InvalidParameter, delta_inverse, fit_loglog_slope,
    optimal_params, power_tail_delta, predict_rate,
)


def rows_from(costs, errors):
    return [(1, 1, c, e, 0.01 * e) for c, e in zip(costs, errors)]


class TestFit:
    def test_collinear(self):
        costs = np.geomspace(10, 1e6, 9)
        slope, icpt = fit_loglog_slope(rows_from(costs, costs ** -0.25))
        assert slope == pytest.approx(-0.25, abs=1e-12) and icpt == pytest.approx(0, abs=1e-10)

    def test_two_rows_exact(self):
        r = rows_from([100.0, 700.0], [0.3, 0.11])
        assert fit_loglog_slope(r)[0] == (math.log(0.11) - math.log(0.3)) / (math.log(700.0) - math.log(100.0))

    @given(st.lists(st.tuples(st.floats(1, 1e8), st.floats(1e-6, 10)), min_size=3, max_size=10,
                    unique_by=lambda t: t[0]), st.floats(1e-3, 1e3))
    def test_scale_invariance(self, pts, k):
        costs, errs = zip(*pts)
        if np.ptp(np.log(costs)) < 1e-6:
            return
        s1, i1 = fit_loglog_slope(rows_from(costs, errs))
        s2, i2 = fit_loglog_slope(rows_from(costs, [k * e for e in errs]))
        assert s2 == pytest.approx(s1, abs=1e-9)
        assert i2 - i1 == pytest.approx(math.log(k), abs=1e-8)

    def test_weighted_flag(self):
        costs = np.geomspace(10, 1e4, 5)
        rows = rows_from(costs, costs ** -0.5)
        assert fit_loglog_slope(rows, weighted=True)[0] == pytest.approx(-0.5, abs=1e-12)

    @pytest.mark.parametrize("rows", [rows_from([1.0], [1.0]), rows_from([1.0, 2.0], [0.0, 1.0]),
                                      rows_from([-1.0, 2.0], [1.0, 1.0]), rows_from([3.0, 3.0], [1.0, 2.0])])
    def test_invalid(self, rows):
        with pytest.raises(InvalidParameter):
            fit_loglog_slope(rows)

    def test_table_single_row(self):
        t = ConvergenceTable.from_rows([(20, 662, 13240.0, 0.03, 0.001)], -0.29)
        assert t.slope is None and t.intercept is None and len(t.rows) == 1


class TestPredict:
    def test_ou(self):
        r = predict_rate(ClassParams(p=2, rho1=1, rho2=1), 1.2)
        assert r.gamma == 0.5 and r.slope == pytest.approx(-7 / 24, abs=1e-15)
        assert round(r.slope, 3) == -0.292

    def test_merton(self):
        assert predict_rate(ClassParams(), 1.0).slope == -0.25

    def test_undefined_branch(self):
        r = predict_rate(ClassParams(rho1=0.3), 1.2)
        assert r.gamma == 0.3 and r.slope is None

    def test_cost_exponent(self):
        assert predict_rate(ClassParams(), 1.0).cost_exponent == 4.0
        assert predict_rate(ClassParams(), 1.2).cost_exponent == pytest.approx(24 / 7, rel=1e-15)

    def test_alpha_check(self):
        with pytest.raises(InvalidParameter):
            predict_rate(ClassParams(), 0.7)


class TestDeltaInverse:
    def test_reciprocal(self):
        assert delta_inverse(lambda M: 1.0 / M, 0.1) == 10

    def test_floor(self):
        assert delta_inverse(lambda M: 2.0 ** -M, 1.0) == 1

    def test_power_round_trip(self):
        x = power_tail_delta(1.2, 500)
        assert delta_inverse(lambda M: power_tail_delta(1.2, M), x) == 500

    @given(st.floats(1.0, 3.0), st.floats(1e-6, 2.0))
    def test_minimality(self, alpha, x):
        d = lambda M: power_tail_delta(alpha, M)
        M = delta_inverse(d, x)
        assert d(M) <= x
        assert M == 1 or d(M - 1) > x

    def test_bad_x(self):
        with pytest.raises(InvalidParameter):
            delta_inverse(lambda M: 1.0 / M, 0.0)


class TestOptimal:
    def test_quadrupling(self):
        d = lambda M: M ** -0.5
        M1, n1 = optimal_params(0.01, 0.5, d, 1.0)
        M2, n2 = optimal_params(0.005, 0.5, d, 1.0)
        assert (M2, n2) == (4 * M1, 4 * n1)
        assert (M2 * n2) / (M1 * n1) == 16

    @pytest.mark.parametrize("alpha,want", [(1.0, 4.0), (1.2, 24 / 7)])
    def test_complexity_exponent(self, alpha, want):
        eps = 2.0 ** -np.arange(3, 11)
        costs = [np.prod(optimal_params(e, 0.5, lambda M: power_tail_delta(alpha, M), 1.0)) for e in eps]
        slope = np.polyfit(np.log(1 / eps), np.log(costs), 1)[0]
        assert abs(slope - want) < 0.1

    def test_floor_case(self):
        d = lambda M: 3.0 / M
        assert optimal_params(2 * 1.5 * 3.0, 0.5, d, 1.5) == (1, 1)

    @given(st.floats(1e-3, 1.0), st.floats(0.25, 0.5), st.floats(0.1, 2.0))
    def test_half_budgets(self, eps, gamma, KC):
        d = lambda M: power_tail_delta(1.2, M)
        M, n = optimal_params(eps, gamma, d, KC)
        assert KC * n ** -gamma <= eps / 2 and KC * d(M) <= eps / 2
        assert n == 1 or KC * (n - 1) ** -gamma > eps / 2
        assert M == 1 or KC * d(M - 1) > eps / 2

    def test_plan_example(self):
        d = lambda M: power_tail_delta(1.0, M)
        M, n = optimal_params(0.01, 0.5, d, 1.0)
        assert n == 40_000 and M == delta_inverse(d, 0.005)

    def test_invalid(self):
        with pytest.raises(InvalidParameter):
            optimal_params(0.0, 0.5, lambda M: 1.0 / M, 1.0)
        with pytest.raises(InvalidParameter):
            optimal_params(0.1, 0.5, lambda M: 1.0 / M, -1.0)
        with pytest.raises(InvalidParameter):
            optimal_params(1e-6, 0.05, lambda M: 1.0 / M, 1.0)
