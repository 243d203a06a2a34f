import math

import numpy as np
import pytest

from jumpeuler import (
    Channel, DimensionMismatch, InvalidParameter, JumpStream, MertonSpec, OuJumpSpec, SchemeParams,
    make_merton_model, make_ou_model, make_preset, mc_error_coupled, merton_exact_terminal,
    merton_mean, ou_mean, power_tail_delta, simulate_coupled_pair,
)
from jumpeuler.models import merton_mark_mean, merton_marks
from jumpeuler.noise import make_generator


def trapezoid(f, a, b, panels):
    x = np.linspace(a, b, panels + 1)
    y = f(x)
    return (b - a) / panels * (y.sum() - 0.5 * (y[0] + y[-1]))


def ou_mean_oracle(spec, t, panels=1_000_000):
    c1 = (lambda s: s) if spec.c1 is None else np.vectorize(spec.c1)
    e = lambda s: np.exp(spec.A * (s - t))
    return (math.exp(-spec.A * t) * spec.eta + spec.mu * trapezoid(e, 0, t, panels)
            + spec.lam * trapezoid(lambda s: e(s) * c1(s), 0, t, panels))


class TestOu:
    def test_paper_parameters_valid(self):
        m = make_ou_model(OuJumpSpec(mu=0.08, sigma=0.4, alpha=1.2, lam=1.21, T=1.53))
        assert m.horizon == 1.53 and m.jump_law.intensity == 1.21
        assert m.diffusion.tail_delta(10) == pytest.approx(0.4 * power_tail_delta(1.2, 10), rel=1e-15)

    def test_no_jumps(self):
        m = make_ou_model(OuJumpSpec(lam=0.0))
        r, f = simulate_coupled_pair(m, SchemeParams(2, 4), 0, 0, 2, 3)
        assert r.jump_count == f.jump_count == 0

    def test_zero_sigma_drift_only_error(self):
        m = make_ou_model(OuJumpSpec(sigma=0.0))
        e = mc_error_coupled(m, 3, 10, K=200)
        # drift is time-homogeneous and linear; jumps land in different windows
        assert e.error > 0

    @pytest.mark.parametrize("bad", [dict(T=0.0), dict(alpha=0.5), dict(lam=-1.0)])
    def test_invalid(self, bad):
        with pytest.raises(InvalidParameter):
            OuJumpSpec(**bad)

    def test_mean_at_zero(self):
        assert ou_mean(OuJumpSpec(eta=1.7), 0.0) == 1.7

    def test_pure_decay(self):
        s = OuJumpSpec(mu=0.0, lam=0.0, eta=2.0)
        assert ou_mean(s, 1.2) == pytest.approx(2.0 * math.exp(-0.5 * 1.2), rel=1e-13)

    def test_zero_reversion(self):
        s = OuJumpSpec(A=0.0)
        want = s.eta + s.mu * 1.53 + s.lam * 1.53 ** 2 / 2
        assert ou_mean(s, 1.53) == pytest.approx(want, rel=1e-12)

    def test_mean_against_trapezoid(self):
        s = OuJumpSpec()
        assert ou_mean(s, s.T) == pytest.approx(ou_mean_oracle(s, s.T), abs=1e-8)

    def test_custom_c1(self):
        s = OuJumpSpec(c1=lambda t: math.cos(t))
        assert s.jump_size(0.3) == math.cos(0.3)
        assert make_ou_model(s).compiled is None
        assert ou_mean(s, 1.0) == pytest.approx(ou_mean_oracle(s, 1.0, 200_000), abs=1e-8)

    def test_truncation_only_error_tracks_delta(self):
        # A = mu = lam = 0: the scheme is exact in time, only truncation is left
        m = make_ou_model(OuJumpSpec(A=0.0, mu=0.0, lam=0.0))
        errs = {M: mc_error_coupled(m, M, 2, (10, 1), K=4000, base_seed=M).error for M in (5, 20)}
        want = {M: 0.4 * math.sqrt(1.53 * (power_tail_delta(1.2, M) ** 2 - power_tail_delta(1.2, 10 * M) ** 2))
                for M in (5, 20)}
        ratio = (errs[20] / errs[5]) / (want[20] / want[5])
        assert ratio == pytest.approx(1.0, rel=0.2)
        assert (errs[20] / errs[5]) == pytest.approx(power_tail_delta(1.2, 20) / power_tail_delta(1.2, 5), rel=0.2)


class TestMerton:
    def test_paper_parameters_valid(self):
        m = make_merton_model(MertonSpec(sigma=0.4, T=1.53, mu=0.08, alpha=1.0, eta=1.0, lam=1.21))
        assert m.exact_reference is not None and m.name == "merton"

    def test_eta_positive(self):
        with pytest.raises(InvalidParameter):
            MertonSpec(eta=0.0)

    def test_mark_law(self):
        K = 1_000_000
        y = merton_marks(make_generator(0, 0, Channel.MARKS), K)[:, 0]
        assert set(np.unique(y[y <= 0])) == {-0.5}
        assert np.all(y[y > -0.5] > 0.5)
        assert abs(y.mean() - 1 / math.sqrt(2 * math.pi)) < 4 * y.std(ddof=1) / math.sqrt(K)
        p = np.mean(y == -0.5)
        assert abs(p - 0.5) < 4 * math.sqrt(0.25 / K)

    def test_mark_mean_reduction(self):
        from scipy import integrate, stats
        tail, _ = integrate.quad(lambda v: (0.5 + v) * stats.norm.pdf(v), 0, np.inf)
        assert merton_mark_mean() == pytest.approx(-0.25 + tail, abs=1e-12)

    def test_exact_drift_free(self):
        s = MertonSpec(mu=0.0, eta=1.3)
        M = 25
        empty = JumpStream(np.empty(0), np.empty((0, 1)), s.lam, s.T)
        var = sum(s.sigma ** 2 / j ** (2 * s.alpha) for j in range(1, M + 1))
        got = merton_exact_terminal(s, M, np.zeros(M), empty)
        assert got == pytest.approx(1.3 * math.exp(-0.5 * var * s.T), rel=1e-14)

    def test_exact_jump_product(self):
        s = MertonSpec(mu=0.0, sigma=0.0, eta=1.0)
        jumps = JumpStream(np.array([0.2, 0.9]), np.array([[1.0], [1.0]]), s.lam, s.T)
        assert merton_exact_terminal(s, 3, np.zeros(3), jumps) == 4.0

    def test_exact_length_check(self):
        s = MertonSpec()
        empty = JumpStream(np.empty(0), np.empty((0, 1)), s.lam, s.T)
        with pytest.raises(DimensionMismatch):
            merton_exact_terminal(s, 3, np.zeros(2), empty)

    def test_exact_positive(self):
        from jumpeuler import SchemeParams, simulate_with_reference
        m = make_merton_model()
        for i in range(200):
            _, x = simulate_with_reference(m, SchemeParams(3, 5), 0, i)
            assert x[0] > 0

    def test_sigma_zero_jump_moment(self):
        # E over jumps of eta e^{mu T} prod(1 + xi) = eta e^{mu T} e^{lam T E xi}
        from jumpeuler.noise import StreamKey, generate_jump_stream
        s = MertonSpec(sigma=0.0)
        m = make_merton_model(s)
        K = 1_000_000
        vals = np.empty(K)
        for i in range(K):
            jumps = generate_jump_stream(m.jump_law, s.T, StreamKey(9, i, Channel.JUMPS))
            vals[i] = merton_exact_terminal(s, 1, np.zeros(1), jumps)
        want = s.eta * math.exp(s.mu * s.T) * math.exp(s.lam * s.T * merton_mark_mean())
        assert abs(vals.mean() - want) < 4 * vals.std(ddof=1) / math.sqrt(K)

    def test_mean_trivial(self):
        s = MertonSpec(eta=2.0)
        assert merton_mean(s, 0.0) == 2.0
        s0 = MertonSpec(lam=0.0)
        assert merton_mean(s0, 1.1) == pytest.approx(math.exp(0.08 * 1.1), rel=1e-15)


def test_presets():
    assert make_preset("ou-jump").name == "ou-jump"
    assert make_preset("merton", alpha=1.5).diffusion.weight(2) == 2 ** -1.5
    with pytest.raises(InvalidParameter):
        make_preset("heston")
