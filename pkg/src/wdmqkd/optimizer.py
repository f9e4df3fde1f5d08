"""Coincidence-window and pump-power optimization of the multiplexed key rate.

Each channel pair gets its own coincidence window; the pump power is shared.
The window search is vectorized over all channels of a grid: a coarse scan
brackets every channel's maximum and a golden-section search refines all
brackets in lock-step.
"""

from __future__ import annotations

import math
import os
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from functools import lru_cache
from typing import NamedTuple

import numpy as np
from scipy.special import erf

from . import rates
from .rates import ChannelRates, DetectorParams, SourceParams
from .spectral import (
    SpectralProfile,
    WdmGrid,
    channel_width_nm,
    default_profile,
    effective_efficiency,
    pairs_in_span,
)

INV_PHI = (math.sqrt(5.0) - 1.0) / 2.0
WINDOW_MIN = 0.1e-12
WINDOW_MAX_WIDTHS = 50.0
COARSE_POINTS = 64
WINDOW_TOL = 0.05e-12
POWER_TOL = 1.0  # mW

WORKERS_ENV = "WDMQKD_WORKERS"


def default_workers() -> int:
    """Worker count from ``WDMQKD_WORKERS``; all available CPUs if unset."""
    value = os.environ.get(WORKERS_ENV)
    if value:
        n = int(value)
        if n < 1:
            raise ValueError(f"{WORKERS_ENV} must be >= 1")
        return n
    return os.cpu_count() or 1


@dataclass(frozen=True, eq=False)
class ScenarioConfig:
    grid: WdmGrid = field(default_factory=WdmGrid)
    profile: SpectralProfile = field(default_factory=default_profile)
    source: SourceParams = field(default_factory=SourceParams)
    detectors: DetectorParams = field(default_factory=DetectorParams)
    link_loss_db_a: float = 0.0
    link_loss_db_b: float = 0.0
    power_sweep: tuple[float, float, int] = (0.0, 1000.0, 50)

    def __post_init__(self):
        if self.link_loss_db_a < 0 or self.link_loss_db_b < 0:
            raise ValueError("link losses must be non-negative")
        lo, hi, steps = self.power_sweep
        if lo < 0 or hi < lo:
            raise ValueError("power sweep needs 0 <= min <= max")
        if int(steps) != steps or steps < 1:
            raise ValueError("power sweep steps must be a positive integer")


class KeyRate(NamedTuple):
    total: float
    channels: list[ChannelRates]

    @property
    def saturated(self) -> bool:
        return any(ch.saturated for ch in self.channels)


@dataclass(frozen=True)
class SweepResult:
    powers: np.ndarray
    totals: np.ndarray
    channels: list[list[ChannelRates]]
    spacing: float
    num_pairs: int

    @property
    def rows(self):
        return list(zip(self.powers.tolist(), self.totals.tolist(), self.channels))

    @property
    def saturated(self) -> bool:
        return any(ch.saturated for row in self.channels for ch in row)


class PowerOptimum(NamedTuple):
    power: float
    rate: float
    monotone: bool


class DetectorCap(NamedTuple):
    effective_singles: np.ndarray | float
    loss_factor: np.ndarray | float
    saturated: np.ndarray | bool


def _window_rate(t, pair_rate, eta_a, eta_b, dark_counts, width, e_pol):
    """Unclamped key rate and its parts at window ``t`` (broadcasting)."""
    cc_t = pair_rate * eta_a * eta_b * erf(rates.SQRT_LN2 * t / width)
    cc_a = rates.accidental_coincidences(pair_rate, eta_a, eta_b, dark_counts, t)
    raw, e = rates._key_rate(cc_t, cc_a, e_pol)
    return raw, cc_t, cc_a, e


def optimize_windows(pair_rate, eta_a, eta_b, dark_counts, t_jitter, sigma_c, e_pol, tol=WINDOW_TOL):
    """Best coincidence window for every channel in the input arrays.

    Returns ``(t_cc, secure_rate, cc_true, cc_acc, qber)`` arrays; the secure
    rate is clamped at zero.
    """
    pr, ea, eb, dc, tj, sc = np.broadcast_arrays(
        *(np.atleast_1d(np.asarray(v, dtype=float)) for v in (pair_rate, eta_a, eta_b, dark_counts, t_jitter, sigma_c))
    )
    width = np.hypot(tj, sc)
    lo = np.full_like(width, WINDOW_MIN)
    hi = WINDOW_MAX_WIDTHS * width

    def f(t):
        return _window_rate(t, pr, ea, eb, dc, width, e_pol)[0]

    grid = lo + (hi - lo) * np.linspace(0.0, 1.0, COARSE_POINTS)[:, None]
    scan = _window_rate(grid, pr, ea, eb, dc, width, e_pol)[0]
    k = np.argmax(scan, axis=0)
    cols = np.arange(width.size)
    a = grid[np.maximum(k - 1, 0), cols]
    b = grid[np.minimum(k + 1, COARSE_POINTS - 1), cols]

    x1 = b - INV_PHI * (b - a)
    x2 = a + INV_PHI * (b - a)
    f1, f2 = f(x1), f(x2)
    span = float(np.max(b - a))
    iters = max(0, math.ceil(math.log(tol / span) / math.log(INV_PHI))) if span > tol else 0
    for _ in range(iters):
        right = f1 < f2  # maximum lies in [x1, b]
        a = np.where(right, x1, a)
        b = np.where(right, b, x2)
        x1_new = np.where(right, x2, b - INV_PHI * (b - a))
        x2_new = np.where(right, a + INV_PHI * (b - a), x1)
        f_new = f(np.where(right, x2_new, x1_new))
        f1, f2 = np.where(right, f2, f_new), np.where(right, f_new, f1)
        x1, x2 = x1_new, x2_new
    t_best = 0.5 * (a + b)
    # objective nondecreasing over the scan (including flat zero): take the bound itself
    at_top = (k == COARSE_POINTS - 1) | np.all(np.diff(scan, axis=0) >= 0, axis=0)
    t_best = np.where(at_top, hi, t_best)

    raw, cc_t, cc_a, e = _window_rate(t_best, pr, ea, eb, dc, width, e_pol)
    return t_best, np.maximum(raw, 0.0), cc_t, cc_a, e


def optimize_window(pair_rate, eta_a, eta_b, dark_counts, t_jitter, sigma_c, e_pol, tol=WINDOW_TOL):
    """Coincidence window maximizing one channel's secure key rate.

    Searches ``[0.1 ps, 50 * sqrt(t_jitter**2 + sigma_c**2)]``.
    """
    if pair_rate < 0:
        raise ValueError("pair_rate must be non-negative")
    t, r, cc_t, cc_a, e = (float(v[0]) for v in optimize_windows(
        pair_rate, eta_a, eta_b, dark_counts, t_jitter, sigma_c, e_pol, tol=tol))
    channel = ChannelRates(
        singles_a=rates.singles_rate(pair_rate, eta_a, dark_counts),
        singles_b=rates.singles_rate(pair_rate, eta_b, dark_counts),
        cc_true=cc_t,
        cc_acc=cc_a,
        qber=e,
        t_cc=t,
        secure_rate=r,
        eta_a=float(eta_a),
        eta_b=float(eta_b),
    )
    return t, channel


def apply_detector_cap(singles, detectors: DetectorParams) -> DetectorCap:
    """Linear deadtime loss anchored at ``deadtime_loss_at_max`` at the maximum count rate.

    Effective singles are additionally clamped at ``max_count_rate``; the
    saturation flag marks where the clamp is active.
    """
    s = np.asarray(singles, dtype=float)
    if np.any(s < 0):
        raise ValueError("singles must be non-negative")
    loss = np.maximum(1.0 - detectors.deadtime_loss_at_max * s / detectors.max_count_rate, 0.0)
    eff = s * loss
    # raw singles above the maximum also count: the linear loss alone can hide them
    sat = (eff > detectors.max_count_rate) | (s > detectors.max_count_rate)
    eff = np.minimum(eff, detectors.max_count_rate)
    if s.ndim == 0:
        return DetectorCap(float(eff), float(loss), bool(sat))
    return DetectorCap(eff, loss, sat)


def apply_link_loss_approx(rate, total_loss_db):
    """Scale a key rate by the link transmission (low-loss approximation)."""
    if np.any(np.asarray(total_loss_db) < 0):
        raise ValueError("loss must be non-negative")
    return rate * 10.0 ** (-np.asarray(total_loss_db, dtype=float) / 10.0)


def transmission(loss_db: float) -> float:
    return 10.0 ** (-loss_db / 10.0)


class _Channels(NamedTuple):
    pairs: list
    eta_a: np.ndarray
    eta_b: np.ndarray
    width_nm: float
    sigma_c: float


@lru_cache(maxsize=64)
def _channels(config: ScenarioConfig) -> _Channels:
    grid = config.grid
    pairs = grid.pairs()
    lam_a = np.array([p.lambda_low for p in pairs])
    lam_b = np.array([p.lambda_high for p in pairs])
    w_a = np.array([p.width_nm_low for p in pairs])
    w_b = np.array([p.width_nm_high for p in pairs])
    eta_a = effective_efficiency(config.profile, lam_a, w_a, grid.fill_factor) * transmission(config.link_loss_db_a)
    eta_b = effective_efficiency(config.profile, lam_b, w_b, grid.fill_factor) * transmission(config.link_loss_db_b)
    width = channel_width_nm(grid.spacing, config.source.lambda0)
    sigma_c = rates.coherence_time(config.source.lambda0, grid.spacing, grid.fill_factor)
    return _Channels(pairs, np.atleast_1d(eta_a), np.atleast_1d(eta_b), width, sigma_c)


def _capped_eta(pair_rate, eta, detectors: DetectorParams):
    singles = rates.singles_rate(pair_rate, eta, detectors.dark_counts)
    cap = apply_detector_cap(singles, detectors)
    if detectors.hard_clamp:
        scale = np.divide(cap.effective_singles, singles, out=np.ones_like(singles), where=singles > 0)
        saturated = cap.saturated
    else:
        scale = cap.loss_factor
        saturated = cap.saturated
    return eta * scale, saturated


def total_key_rate(config: ScenarioConfig, pump_power: float) -> KeyRate:
    """Sum of per-channel secure rates, each at its own optimal window."""
    if pump_power < 0:
        raise ValueError("pump_power must be non-negative")
    ch = _channels(config)
    det = config.detectors
    pair_rate = config.source.spectral_brightness * pump_power * ch.width_nm
    eta_a, sat_a = _capped_eta(pair_rate, ch.eta_a, det)
    eta_b, sat_b = _capped_eta(pair_rate, ch.eta_b, det)
    t, r, cc_t, cc_a, e = optimize_windows(
        pair_rate, eta_a, eta_b, det.dark_counts, det.jitter_fwhm, ch.sigma_c, config.source.e_pol
    )
    s_a = rates.singles_rate(pair_rate, eta_a, det.dark_counts)
    s_b = rates.singles_rate(pair_rate, eta_b, det.dark_counts)
    channels = [
        ChannelRates(
            singles_a=float(s_a[i]),
            singles_b=float(s_b[i]),
            cc_true=float(cc_t[i]),
            cc_acc=float(cc_a[i]),
            qber=float(e[i]),
            t_cc=float(t[i]),
            secure_rate=float(r[i]),
            eta_a=float(eta_a[i]),
            eta_b=float(eta_b[i]),
            saturated=bool(sat_a[i] or sat_b[i]),
        )
        for i in range(len(ch.pairs))
    ]
    # fixed channel-index order keeps the sum reproducible
    total = math.fsum(c.secure_rate for c in channels)
    return KeyRate(total, channels)


def power_grid(config: ScenarioConfig) -> np.ndarray:
    lo, hi, steps = config.power_sweep
    return np.linspace(lo, hi, int(steps))


def sweep_power(config: ScenarioConfig, workers: int | None = None) -> SweepResult:
    powers = power_grid(config)
    workers = default_workers() if workers is None else workers
    if workers > 1 and powers.size > 1:
        with ThreadPoolExecutor(max_workers=workers) as pool:
            results = list(pool.map(lambda p: total_key_rate(config, float(p)), powers))
    else:
        results = [total_key_rate(config, float(p)) for p in powers]
    return SweepResult(
        powers=powers,
        totals=np.array([r.total for r in results]),
        channels=[r.channels for r in results],
        spacing=config.grid.spacing,
        num_pairs=config.grid.num_pairs,
    )


def golden_max(f, a: float, b: float, tol: float):
    """Golden-section maximization of a scalar function on ``[a, b]``."""
    x1 = b - INV_PHI * (b - a)
    x2 = a + INV_PHI * (b - a)
    f1, f2 = f(x1), f(x2)
    while b - a > tol:
        if f1 < f2:
            a, x1, f1 = x1, x2, f2
            x2 = a + INV_PHI * (b - a)
            f2 = f(x2)
        else:
            b, x2, f2 = x2, x1, f1
            x1 = b - INV_PHI * (b - a)
            f1 = f(x1)
    x = 0.5 * (a + b)
    return x, f(x)


def optimize_power(config: ScenarioConfig, tol: float = POWER_TOL, workers: int | None = None) -> PowerOptimum:
    """Pump power maximizing the total key rate within the sweep interval.

    The coarse sweep brackets the maximum, golden-section search refines it.
    ``monotone`` is set when the rate never turns down over the interval; the
    upper bound is then returned.
    """
    sweep = sweep_power(config, workers=workers)
    powers, totals = sweep.powers, sweep.totals
    k = int(np.argmax(totals))
    if powers.size == 1:
        return PowerOptimum(float(powers[0]), float(totals[0]), True)
    if k == powers.size - 1 and np.all(np.diff(totals) >= 0):
        return PowerOptimum(float(powers[-1]), float(totals[-1]), True)
    a = float(powers[max(k - 1, 0)])
    b = float(powers[min(k + 1, powers.size - 1)])
    p, r = golden_max(lambda x: total_key_rate(config, x).total, a, b, tol)
    if r < totals[k]:
        p, r = float(powers[k]), float(totals[k])
    return PowerOptimum(float(p), float(r), False)


def standard_scenario(spacing_ghz: float, num_pairs: int | None = None, **overrides) -> ScenarioConfig:
    """Scenario with the default source, detectors and profile for one grid spacing.

    ``num_pairs`` defaults to all pairs fitting in the 106 nm spectrum.
    """
    spacing = spacing_ghz * 1e9
    n = pairs_in_span(spacing) if num_pairs is None else num_pairs
    return ScenarioConfig(grid=WdmGrid(spacing=spacing, num_pairs=n), **overrides)
