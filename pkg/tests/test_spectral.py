import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st
from scipy.integrate import quad

from wdmqkd.spectral import (
    CENTER_FREQUENCY_HZ,
    LAMBDA0_NM,
    SPEED_OF_LIGHT,
    SpectralProfile,
    WdmGrid,
    build_grid,
    channel_width_nm,
    default_profile,
    effective_efficiency,
    pairs_in_span,
)


def flat(value, lo=1490.0, hi=1610.0):
    return SpectralProfile(np.array([lo, hi]), np.array([value, value]))


def quad_oracle(profile, center, width, fill):
    # integrate the interpolant directly, independent of the running-sum path
    f = lambda x: np.interp(x, profile.wavelengths_nm, profile.efficiency, left=0.0, right=0.0)
    lo, hi = center - width / 2, center + width / 2
    pts = profile.wavelengths_nm[(profile.wavelengths_nm > lo) & (profile.wavelengths_nm < hi)]
    val, _ = quad(f, lo, hi, points=pts if pts.size < 50 else None, limit=500)
    return fill * val / width


class TestProfile:
    def test_default_peak(self):
        assert default_profile()(1550.12) == pytest.approx(0.259, abs=1e-12)

    def test_default_band_average(self):
        p = default_profile()
        mean = (p.integral_to(LAMBDA0_NM + 28.15) - p.integral_to(LAMBDA0_NM - 28.15)) / 56.3
        assert mean >= 0.20

    def test_default_negligible_at_band_edges(self):
        p = default_profile()
        assert p(LAMBDA0_NM - 53.0) < 0.01
        assert p(LAMBDA0_NM + 53.0) < 0.01
        assert p(LAMBDA0_NM + 60.0) == 0.0
        assert p(LAMBDA0_NM - 60.0) == 0.0

    def test_default_sampling(self):
        p = default_profile()
        assert np.allclose(np.diff(p.wavelengths_nm), 0.1)
        assert p.wavelengths_nm[0] == pytest.approx(LAMBDA0_NM - 53.0)
        assert p.wavelengths_nm[-1] == pytest.approx(LAMBDA0_NM + 53.0)

    @pytest.mark.parametrize(
        "lam, eff",
        [
            ([1550.0], [0.1]),
            ([1550.0, 1549.0], [0.1, 0.1]),
            ([1550.0, 1550.0], [0.1, 0.1]),
            ([1550.0, 1551.0], [0.1, 1.2]),
            ([1550.0, 1551.0], [-0.1, 0.1]),
        ],
    )
    def test_invalid(self, lam, eff):
        with pytest.raises(ValueError):
            SpectralProfile(np.array(lam), np.array(eff))

    def test_csv_round_trip(self, tmp_path):
        p = default_profile()
        path = tmp_path / "profile.csv"
        p.to_csv(path)
        q = SpectralProfile.from_csv(path)
        assert np.array_equal(p.wavelengths_nm, q.wavelengths_nm)
        assert np.array_equal(p.efficiency, q.efficiency)

    def test_csv_requires_header(self, tmp_path):
        path = tmp_path / "bad.csv"
        path.write_text("1550,0.2\n1551,0.2\n", encoding="utf-8")
        with pytest.raises(ValueError):
            SpectralProfile.from_csv(path)


class TestChannelWidth:
    def test_100ghz(self):
        assert channel_width_nm(100e9, 1550.12) == pytest.approx(0.8015, abs=5e-5)

    def test_12p5ghz(self):
        assert channel_width_nm(12.5e9, 1550.12) == pytest.approx(0.1002, abs=5e-5)

    def test_zero(self):
        assert channel_width_nm(0.0, 1550.12) == 0.0

    @given(st.floats(1e9, 2500e9), st.floats(1400.0, 1700.0))
    def test_round_trip(self, spacing, lam):
        width = channel_width_nm(spacing, lam)
        recovered = width * 1e-9 * SPEED_OF_LIGHT / (lam * 1e-9) ** 2
        assert abs(recovered - spacing) / spacing < 1e-9


class TestGrid:
    def test_pair_33_35(self):
        (pair,) = build_grid(193.4e12, 100e9, 1)
        assert pair.freq_low == pytest.approx(193.3e12)
        assert pair.freq_high == pytest.approx(193.5e12)
        assert (pair.itu_low, pair.itu_high) == (33, 35)

    def test_pair_31_37(self):
        pair = build_grid(193.4e12, 100e9, 3)[2]
        assert (pair.itu_low, pair.itu_high) == (31, 37)
        # the same frequencies as a 200 GHz pair on the interleaved grid
        pair200 = build_grid(193.4e12, 200e9, 2, half_offset=True)[1]
        assert (pair200.itu_low, pair200.itu_high) == (31, 37)
        assert pair200.width_nm_low == pytest.approx(2 * pair.width_nm_low)

    def test_200ghz_literal_offset(self):
        pair = build_grid(193.4e12, 200e9, 3)[2]
        assert pair.freq_low == pytest.approx(192.8e12)
        assert pair.freq_high == pytest.approx(194.0e12)

    def test_degenerate_channel_excluded(self):
        with pytest.raises(ValueError):
            build_grid(193.4e12, 100e9, 0)
        for p in build_grid(193.4e12, 100e9, 66):
            assert p.freq_low != 193.4e12 and p.freq_high != 193.4e12

    @given(st.sampled_from([12.5e9, 25e9, 50e9, 100e9, 200e9, 2500e9]), st.integers(1, 30), st.booleans())
    def test_energy_conservation(self, spacing, n, half):
        for p in build_grid(CENTER_FREQUENCY_HZ, spacing, n, half_offset=half):
            assert abs(p.freq_low + p.freq_high - 2 * CENTER_FREQUENCY_HZ) <= 4 * np.spacing(CENTER_FREQUENCY_HZ)
            assert p.lambda_low == pytest.approx(SPEED_OF_LIGHT / p.freq_low * 1e9, rel=1e-15)

    def test_strict_rejects_pairs_outside_support(self):
        narrow = SpectralProfile(np.array([1549.0, 1551.0]), np.array([0.2, 0.2]))
        build_grid(193.4e12, 100e9, 1, strict=True, profile=narrow)
        with pytest.raises(ValueError):
            build_grid(193.4e12, 100e9, 5, strict=True, profile=narrow)
        # non-strict mode keeps dark pairs
        assert len(build_grid(193.4e12, 100e9, 5, profile=narrow)) == 5

    @pytest.mark.parametrize("spacing, n", [(100e9, 66), (50e9, 132), (25e9, 264), (12.5e9, 529)])
    def test_pairs_in_span(self, spacing, n):
        assert pairs_in_span(spacing) == n

    def test_wdm_grid_validation(self):
        with pytest.raises(ValueError):
            WdmGrid(spacing=0.0)
        with pytest.raises(ValueError):
            WdmGrid(fill_factor=1.5)
        with pytest.raises(ValueError):
            WdmGrid(num_pairs=0)
        assert len(WdmGrid(num_pairs=4).pairs()) == 4


class TestEffectiveEfficiency:
    def test_flat_020(self):
        assert effective_efficiency(flat(0.20), 1550.0, 0.8, 0.75) == pytest.approx(0.15, abs=1e-14)

    def test_flat_0259(self):
        assert effective_efficiency(flat(0.259), 1530.0, 0.1, 0.75) == pytest.approx(0.19425, abs=1e-14)

    def test_outside_support(self):
        assert effective_efficiency(default_profile(), 1700.0, 0.8) == 0.0

    @pytest.mark.parametrize("center", [1550.12, 1551.37, 1580.0, 1596.5, 1602.9, 1603.0])
    @pytest.mark.parametrize("width", [0.1002, 0.4007, 0.8015, 3.0])
    def test_matches_quadrature(self, center, width):
        p = default_profile()
        assert effective_efficiency(p, center, width, 0.75) == pytest.approx(
            quad_oracle(p, center, width, 0.75), rel=1e-9, abs=1e-13
        )

    def test_vectorized(self):
        p = default_profile()
        centers = np.array([1520.0, 1550.0, 1580.0])
        out = effective_efficiency(p, centers, np.full(3, 0.8), 0.75)
        assert out == pytest.approx([effective_efficiency(p, c, 0.8, 0.75) for c in centers])

    def test_rejects_zero_width(self):
        with pytest.raises(ValueError):
            effective_efficiency(default_profile(), 1550.0, 0.0)

    @settings(max_examples=50)
    @given(st.floats(0.0, 3.0), st.floats(1490.0, 1610.0), st.floats(0.05, 5.0))
    def test_linear_in_scale(self, s, center, width):
        p = default_profile()
        s = min(s, 1 / p.peak)
        assert effective_efficiency(p.scaled(s), center, width) == pytest.approx(
            s * effective_efficiency(p, center, width), rel=1e-12, abs=1e-15
        )

    @settings(max_examples=50)
    @given(st.floats(0.01, 100.0), st.floats(0.01, 100.0))
    def test_bounded_by_peak(self, w1, w2):
        p = default_profile()
        for w in (w1, w2):
            assert 0.0 <= effective_efficiency(p, LAMBDA0_NM, w, 0.75) <= 0.75 * p.peak * (1 + 1e-12)
        # wider centered windows on a unimodal profile never gain
        small, large = sorted((w1, w2))
        assert effective_efficiency(p, LAMBDA0_NM, large) <= effective_efficiency(p, LAMBDA0_NM, small) * (1 + 1e-12)
