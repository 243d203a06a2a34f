import math
from fractions import Fraction

import numpy as np
import pytest

from _helpers import scalar_model
from jumpeuler import (
    CostModel, ErrorEstimate, InvalidParameter, MissingReference, MertonSpec, TrajectoryFailure,
    informational_cost, make_merton_model, make_ou_model, mc_error_coupled, mc_error_vs_reference,
)
from jumpeuler.config import inline_model
from jumpeuler.estimator import resolve_workers, run_trajectories, summarize_powers


class TestCost:
    def test_values(self):
        assert informational_cost(1, 1) == 1
        assert informational_cost(20, 662) == 13240

    def test_monotone(self):
        rng = np.random.default_rng(0)
        c = CostModel()
        for M, n in rng.integers(1, 10_000, size=(200, 2)):
            assert c(M + 1, n) > c(M, n) and c(M, n + 1) > c(M, n)

    def test_rejects_zero(self):
        with pytest.raises(InvalidParameter):
            informational_cost(0, 3)


class TestSummary:
    def test_matches_numpy(self):
        D = np.random.default_rng(1).exponential(size=1000)
        e = summarize_powers(D, 2.0, 5.0)
        m = D.mean()
        assert e.error == pytest.approx(math.sqrt(m), rel=1e-14)
        assert e.std_error == pytest.approx(0.5 / math.sqrt(m) * D.std(ddof=1) / math.sqrt(1000), rel=1e-12)
        assert e.trajectories == 1000 and e.cost == 5.0

    def test_zero(self):
        e = summarize_powers(np.zeros(10), 2.0, 1.0)
        assert e.error == 0.0 and e.std_error == 0.0

    def test_needs_two(self):
        with pytest.raises(InvalidParameter):
            summarize_powers([1.0], 2.0, 1.0)


class TestWorkers:
    def test_env_default(self, monkeypatch):
        monkeypatch.setenv("JUMPEULER_WORKERS", "3")
        assert resolve_workers(None) == 3
        monkeypatch.delenv("JUMPEULER_WORKERS")
        assert resolve_workers(None) == 1
        assert resolve_workers("max") >= 1 and resolve_workers("auto") >= 1

    @pytest.mark.parametrize("bad", [0, "x", -2])
    def test_bad(self, bad):
        with pytest.raises(InvalidParameter):
            resolve_workers(bad)

    def test_order_preserved(self):
        assert run_trajectories(lambda i: i * i, 300, workers=4) == [i * i for i in range(300)]

    @pytest.mark.parametrize("model", [make_ou_model, make_merton_model])
    def test_thread_count_invariance(self, model):
        m = model()
        runs = [mc_error_coupled(m, 3, 5, (4, 6), K=300, base_seed=2, workers=w) for w in (1, 2, 3, "max")]
        assert all(r == runs[0] for r in runs)
        if m.exact_reference is not None:
            refs = [mc_error_vs_reference(m, 3, 20, K=300, base_seed=2, workers=w) for w in (1, 2, "max")]
            assert all(r == refs[0] for r in refs)


class TestCoupledEstimator:
    def test_zero_model(self):
        e = mc_error_coupled(scalar_model(eta=1.0), 2, 3, K=20)
        assert e.error == 0.0 and e.std_error == 0.0 and e.trajectories == 20 and e.cost == 6.0

    def test_constant_drift(self):
        e = mc_error_coupled(scalar_model(drift=lambda t, x: np.ones(1), T=1.53), 2, 3, K=10)
        assert e.error == 0.0

    def test_failure_aborts(self):
        m = inline_model({"drift": "x*x", "eta": 10.0})
        with pytest.raises(TrajectoryFailure) as exc:
            mc_error_coupled(m, 1, 5, K=4)
        assert exc.value.index == 0

    def test_rejects_small_K(self):
        with pytest.raises(InvalidParameter):
            mc_error_coupled(make_ou_model(), 2, 2, K=1)

    def test_quadrature_difference_variance(self):
        # a = t^2, b = c = 0: rare and fine are independent unbiased randomized
        # Riemann sums, so E|fine - rare|^2 = Var(rare) + Var(fine) exactly.
        n, fn = 4, 25

        def var_sum(N):
            total = Fraction(0)
            for j in range(N):
                t0, t1 = Fraction(j, N), Fraction(j + 1, N)
                h = t1 - t0
                m1 = (t1 ** 3 - t0 ** 3) / (3 * h)
                m2 = (t1 ** 5 - t0 ** 5) / (5 * h)
                total += h * h * (m2 - m1 * m1)
            return float(total)

        want = var_sum(n) + var_sum(n * fn)
        m = inline_model({"drift": "t**2", "horizon": 1.0})
        e = mc_error_coupled(m, 1, n, (1, fn), K=40_000, base_seed=3)
        se_sq = 2 * e.error * e.std_error
        assert abs(e.error ** 2 - want) < 5 * se_sq

    def test_ou_anchor(self):
        e = mc_error_coupled(make_ou_model(), 20, math.floor(10 * 20 ** 1.4), K=10_000, base_seed=1)
        assert e.error > 0
        assert e.error == pytest.approx(0.03545766377485116, rel=1e-12)

    def test_error_trend_along_schedule(self, ou_table):
        rows = ou_table.rows
        for (_, _, _, e0, s0), (_, _, _, e1, s1) in zip(rows, rows[1:]):
            assert e1 - e0 < 2 * math.hypot(s0, s1)
        assert rows[-1][3] < rows[0][3]


class TestReferenceEstimator:
    def test_trivial_merton(self):
        m = make_merton_model(MertonSpec(mu=0.0, sigma=0.0, lam=0.0, eta=1.0))
        assert mc_error_vs_reference(m, 2, 5, K=10).error == 0.0

    def test_missing(self):
        with pytest.raises(MissingReference):
            mc_error_vs_reference(make_ou_model(), 2, 2, K=4)

    def test_merton_anchor(self):
        e = mc_error_vs_reference(make_merton_model(), 20, 4000, K=50_000, base_seed=1)
        assert e.error > 0
        assert e.error == pytest.approx(0.6428504279976176, rel=1e-12)

    def test_std_error_scaling(self):
        # quadrupling K halves the standard error (1/sqrt(K) law), averaged over
        # seeds; a light-tailed jump-free Merton model keeps the ratio stable
        m = make_merton_model(MertonSpec(sigma=0.1, lam=0.0))
        ratios = []
        for seed in range(12):
            small = mc_error_vs_reference(m, 4, 40, K=500, base_seed=seed)
            big = mc_error_vs_reference(m, 4, 40, K=2000, base_seed=100 + seed)
            ratios.append(big.std_error / small.std_error)
        assert np.mean(ratios) == pytest.approx(0.5, rel=0.2)
