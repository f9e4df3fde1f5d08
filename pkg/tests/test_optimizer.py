import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from oracles import dense_power_argmax, dense_window_argmax, random_power_configs, window_rates
from wdmqkd.optimizer import (
    WINDOW_MAX_WIDTHS,
    WORKERS_ENV,
    ScenarioConfig,
    apply_detector_cap,
    apply_link_loss_approx,
    default_workers,
    golden_max,
    optimize_power,
    optimize_window,
    optimize_windows,
    standard_scenario,
    sweep_power,
    total_key_rate,
)
from wdmqkd.rates import DetectorParams, SourceParams
from wdmqkd.spectral import WdmGrid, effective_efficiency

JITTER = 38e-12


def small(spacing=50e9, n=4, **kw):
    return ScenarioConfig(grid=WdmGrid(spacing=spacing, num_pairs=n), **kw)


class TestWindow:
    def test_vanishing_accidentals_limit(self):
        # accidentals scale as R**2 and true pairs as R, so the optimal window
        # keeps growing as the pair rate drops and the rate approaches R*eta*eta
        prev = 0.0
        for r in (1e8, 1e6, 1e3, 1.0, 1e-3):
            t, ch = optimize_window(r, 0.2, 0.2, 0.0, JITTER, 0.0, 0.0)
            assert t > prev
            prev = t
        assert ch.secure_rate == pytest.approx(1e-3 * 0.04, rel=1e-9)
        assert t <= WINDOW_MAX_WIDTHS * JITTER

    @pytest.mark.parametrize("r, ea", [(0.0, 0.2), (1e6, 0.0)])
    def test_flat_objective_returns_upper_bound(self, r, ea):
        t, ch = optimize_window(r, ea, 0.2, 0.0, JITTER, 0.0, 0.004)
        assert t == pytest.approx(WINDOW_MAX_WIDTHS * JITTER, rel=1e-12)
        assert ch.secure_rate == 0.0

    def test_wider_jitter_widens_window(self):
        args = (5e8, 0.2, 0.2, 100.0)
        t1, _ = optimize_window(*args, JITTER, 0.0, 0.004)
        t2, _ = optimize_window(*args, 2 * JITTER, 0.0, 0.004)
        assert t2 > t1
        for tj, t in ((JITTER, t1), (2 * JITTER, t2)):
            t_ref, _ = dense_window_argmax(*args, tj, 0.0, 0.004)
            assert abs(t - t_ref) <= 0.05e-12

    @settings(max_examples=30, deadline=None)
    @given(
        st.floats(1e5, 3e9), st.floats(0.01, 0.3), st.floats(0.01, 0.3), st.floats(0.0, 1e4),
        st.floats(10e-12, 100e-12), st.floats(0.0, 100e-12), st.floats(0.0, 0.05),
    )
    def test_not_worse_than_window_at_jitter(self, r, ea, eb, dc, tj, sc, e_pol):
        t, ch = optimize_window(r, ea, eb, dc, tj, sc, e_pol)
        assert 0.1e-12 <= t <= WINDOW_MAX_WIDTHS * math.hypot(tj, sc) * (1 + 1e-12)
        (at_jitter,) = window_rates([tj], r, ea, eb, dc, tj, sc, e_pol)
        assert ch.secure_rate >= at_jitter * (1 - 1e-9)
        assert ch.secure_rate <= ch.cc_true + ch.cc_acc

    def test_vector_matches_scalar(self):
        r = np.array([1e7, 3e8, 1e9])
        ea = np.array([0.1, 0.2, 0.25])
        t, rate, *_ = optimize_windows(r, ea, 0.2, 100.0, JITTER, 10e-12, 0.004)
        for i in range(3):
            ti, ch = optimize_window(r[i], ea[i], 0.2, 100.0, JITTER, 10e-12, 0.004)
            assert t[i] == ti and rate[i] == ch.secure_rate

    def test_rejects_negative_rate(self):
        with pytest.raises(ValueError):
            optimize_window(-1.0, 0.2, 0.2, 0.0, JITTER, 0.0, 0.0)


class TestDetectorCap:
    @pytest.mark.parametrize("singles, loss", [(200e6, 0.98), (0.0, 1.0), (100e6, 0.99)])
    def test_loss_factor(self, singles, loss):
        cap = apply_detector_cap(singles, DetectorParams())
        assert cap.loss_factor == pytest.approx(loss, abs=1e-15)
        assert cap.effective_singles == pytest.approx(singles * loss)
        assert not cap.saturated

    def test_clamp(self):
        cap = apply_detector_cap(np.array([1e8, 3e8, 2e10]), DetectorParams())
        assert cap.effective_singles[1] == 200e6
        assert list(cap.saturated) == [False, True, True]
        assert cap.effective_singles[2] == 0.0

    def test_rejects_negative(self):
        with pytest.raises(ValueError):
            apply_detector_cap(-1.0, DetectorParams())


class TestLinkLoss:
    @pytest.mark.parametrize("db, factor", [(2.0, 0.631), (0.0, 1.0), (10.0, 0.1)])
    def test_factor(self, db, factor):
        assert apply_link_loss_approx(1.0, db) == pytest.approx(factor, abs=5e-4)

    def test_rejects_negative(self):
        with pytest.raises(ValueError):
            apply_link_loss_approx(1.0, -0.5)

    @pytest.mark.parametrize("db_a, db_b", [(1.0, 1.0), (2.0, 0.0), (0.0, 2.0), (0.5, 0.7)])
    def test_exact_close_to_approx(self, db_a, db_b):
        base = total_key_rate(small(n=6), 400.0)
        lossy = total_key_rate(small(n=6, link_loss_db_a=db_a, link_loss_db_b=db_b), 400.0)
        for c0, c1 in zip(base.channels, lossy.channels):
            approx = apply_link_loss_approx(c0.secure_rate, db_a + db_b)
            assert abs(c1.secure_rate - approx) <= 0.10 * approx


class TestTotalKeyRate:
    def test_zero_power(self):
        res = total_key_rate(standard_scenario(100), 0.0)
        assert res.total == 0.0
        assert len(res.channels) == 66

    def test_rejects_negative_power(self):
        with pytest.raises(ValueError):
            total_key_rate(small(), -1.0)

    def test_per_arm_efficiency(self):
        cfg = small(n=5)
        res = total_key_rate(cfg, 1e-6)
        for pair, ch in zip(cfg.grid.pairs(), res.channels):
            assert ch.eta_a == pytest.approx(effective_efficiency(cfg.profile, pair.lambda_low, pair.width_nm_low))
            assert ch.eta_b == pytest.approx(effective_efficiency(cfg.profile, pair.lambda_high, pair.width_nm_high))

    def test_channel_invariants(self):
        res = total_key_rate(standard_scenario(25), 900.0)
        for ch in res.channels:
            assert 0 <= ch.secure_rate <= ch.cc_true + ch.cc_acc
            assert 0 <= ch.qber <= 0.5
        assert res.total == pytest.approx(math.fsum(c.secure_rate for c in res.channels), rel=0)

    def test_hard_clamp_flags_saturation(self):
        det = DetectorParams(hard_clamp=True, max_count_rate=1e6, deadtime_loss_at_max=0.0)
        res = total_key_rate(small(detectors=det), 400.0)
        assert res.saturated
        # the clamp scales the photon part; the 2*DC dark term is left as is
        assert all(ch.singles_a <= 1e6 + 2 * det.dark_counts for ch in res.channels)
        soft = total_key_rate(small(detectors=DetectorParams(max_count_rate=1e6, deadtime_loss_at_max=0.0)), 400.0)
        assert soft.saturated
        assert soft.total > res.total

    def test_swamped_detector_flagged(self):
        # far above the maximum the linear loss floors at zero efficiency
        res = total_key_rate(small(detectors=DetectorParams(max_count_rate=1e6)), 400.0)
        assert res.saturated
        assert res.total == 0.0

    def test_dominance_at_high_power(self):
        narrow, wide = standard_scenario(12.5), standard_scenario(100)
        for p in (600.0, 800.0, 1000.0):
            assert total_key_rate(narrow, p).total >= total_key_rate(wide, p).total


class TestSweep:
    def test_single_step(self):
        cfg = small(power_sweep=(300.0, 300.0, 1))
        sweep = sweep_power(cfg)
        assert len(sweep.rows) == 1
        assert sweep.totals[0] == total_key_rate(cfg, 300.0).total

    def test_rows(self):
        sweep = sweep_power(small(power_sweep=(0.0, 500.0, 11)))
        assert sweep.powers.tolist() == pytest.approx(np.linspace(0, 500, 11).tolist())
        assert np.all(sweep.totals >= 0)

    def test_deterministic_across_workers(self):
        cfg = standard_scenario(50, power_sweep=(0.0, 1000.0, 12))
        a = sweep_power(cfg, workers=1)
        b = sweep_power(cfg, workers=3)
        assert a.totals.tobytes() == b.totals.tobytes()
        assert a.channels == b.channels

    def test_invalid_sweep(self):
        with pytest.raises(ValueError):
            small(power_sweep=(10.0, 5.0, 3))
        with pytest.raises(ValueError):
            small(power_sweep=(0.0, 5.0, 0))


class TestPower:
    def test_golden_max(self):
        x, fx = golden_max(lambda x: -(x - 3.3) ** 2, 0.0, 10.0, 1e-6)
        assert x == pytest.approx(3.3, abs=1e-6)

    def test_monotone_flag(self):
        cfg = small(source=SourceParams(spectral_brightness=1e4, e_pol=0.0), detectors=DetectorParams(dark_counts=0.0))
        opt = optimize_power(cfg)
        assert opt.monotone
        assert opt.power == 1000.0

    def test_matches_dense_grid(self):
        for cfg in random_power_configs(seed=11, n=4):
            ref, ref_rate = dense_power_argmax(cfg)
            opt = optimize_power(cfg)
            assert abs(opt.power - ref) <= 2.0
            assert opt.rate >= ref_rate * (1 - 1e-6)

    def test_polarization_error_lowers_rate(self):
        base = small(n=3, source=SourceParams(spectral_brightness=2e7))
        worse = small(n=3, source=SourceParams(spectral_brightness=2e7, e_pol=0.02))
        o1, o2 = optimize_power(base), optimize_power(worse)
        assert o2.rate < o1.rate
        ref, _ = dense_power_argmax(worse)
        assert abs(o2.power - ref) <= 2.0


class TestWorkers:
    def test_env(self, monkeypatch):
        monkeypatch.setenv(WORKERS_ENV, "3")
        assert default_workers() == 3
        monkeypatch.delenv(WORKERS_ENV)
        assert default_workers() >= 1
        monkeypatch.setenv(WORKERS_ENV, "0")
        with pytest.raises(ValueError):
            default_workers()
