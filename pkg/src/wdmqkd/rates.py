"""Analytic coincidence and secure-key-rate kernels.

All functions accept scalars or numpy arrays and broadcast. Times are in
seconds, rates in counts per second, wavelengths in nm, frequencies in Hz.

The per-channel model:

* true coincidences  ``CC_t = R * eta_a * eta_b * erf(sqrt(ln 2) * t_cc / w)``
  with ``w = sqrt(t_jitter**2 + sigma_c**2)`` the combined timing FWHM;
* accidentals ``CC_acc = (R * eta_a + 2 DC) * (R * eta_b + 2 DC) * t_cc``;
* QBER ``E = (CC_t * e_pol + CC_acc / 2) / (CC_t + CC_acc)``;
* secure rate ``(CC_t + CC_acc) * (1 - 2 H2(E))``, clamped at zero.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np
from scipy.optimize import brentq
from scipy.special import erf

from .spectral import LAMBDA0_NM

SQRT_LN2 = math.sqrt(math.log(2.0))
# FWHM of a transform-limited Gaussian: time-bandwidth product 2 ln2 / pi
TIME_BANDWIDTH_PRODUCT = 2.0 * math.log(2.0) / math.pi

DEFAULT_BRIGHTNESS = 4.10e6  # pairs / s / mW / nm
DEFAULT_E_POL = 0.004
DEFAULT_JITTER = 38e-12
DEFAULT_DARK_COUNTS = 100.0
DEFAULT_MAX_COUNT_RATE = 200e6
DEFAULT_DEADTIME_LOSS = 0.02


@dataclass(frozen=True)
class SourceParams:
    spectral_brightness: float = DEFAULT_BRIGHTNESS
    pump_power: float = 0.0  # mW
    e_pol: float = DEFAULT_E_POL
    lambda0: float = LAMBDA0_NM

    def __post_init__(self):
        if not self.spectral_brightness > 0:
            raise ValueError("spectral_brightness must be positive")
        if self.pump_power < 0:
            raise ValueError("pump_power must be non-negative")
        if not 0 <= self.e_pol < 0.5:
            raise ValueError("e_pol must be in [0, 0.5)")


@dataclass(frozen=True)
class DetectorParams:
    jitter_fwhm: float = DEFAULT_JITTER
    dark_counts: float = DEFAULT_DARK_COUNTS
    efficiency_included_in_profile: bool = True
    max_count_rate: float = DEFAULT_MAX_COUNT_RATE
    deadtime_loss_at_max: float = DEFAULT_DEADTIME_LOSS
    # clamp singles at max_count_rate in addition to the deadtime loss term
    hard_clamp: bool = False

    def __post_init__(self):
        if not self.jitter_fwhm > 0:
            raise ValueError("jitter_fwhm must be positive")
        if self.dark_counts < 0:
            raise ValueError("dark_counts must be non-negative")
        if not self.max_count_rate > 0:
            raise ValueError("max_count_rate must be positive")
        if not 0 <= self.deadtime_loss_at_max < 1:
            raise ValueError("deadtime_loss_at_max must be in [0, 1)")


@dataclass(frozen=True)
class ChannelRates:
    singles_a: float
    singles_b: float
    cc_true: float
    cc_acc: float
    qber: float
    t_cc: float
    secure_rate: float
    eta_a: float = float("nan")
    eta_b: float = float("nan")
    saturated: bool = False


def total_pair_rate(source: SourceParams, width_nm):
    """Pairs created in the crystal inside a channel of ``width_nm``."""
    width_nm = np.asarray(width_nm, dtype=float)
    if np.any(width_nm <= 0):
        raise ValueError("width must be positive")
    out = source.spectral_brightness * source.pump_power * width_nm
    return float(out) if out.ndim == 0 else out


def coherence_time(lambda0, spacing, fill_factor=0.75):
    """Coherence-time FWHM of photons filtered to ``fill_factor * spacing``.

    Transform-limited Gaussian: ``0.4413 / (fill_factor * spacing)``.
    ``lambda0`` is accepted for interface symmetry; in frequency units the
    result does not depend on it.
    """
    spacing = np.asarray(spacing, dtype=float)
    if np.any(spacing <= 0):
        raise ValueError("spacing must be positive")
    out = TIME_BANDWIDTH_PRODUCT / (fill_factor * spacing)
    return float(out) if out.ndim == 0 else out


def combined_fwhm(t_jitter, sigma_c):
    return np.hypot(t_jitter, sigma_c)


def window_acceptance(t_cc, t_jitter, sigma_c):
    """Fraction of true pairs whose arrival difference falls in the window."""
    t_cc = np.asarray(t_cc, dtype=float)
    if np.any(t_cc < 0):
        raise ValueError("t_cc must be non-negative")
    out = erf(SQRT_LN2 * t_cc / combined_fwhm(t_jitter, sigma_c))
    return float(out) if np.ndim(out) == 0 else out


def true_coincidences(pair_rate, eta_a, eta_b, acceptance):
    return pair_rate * eta_a * eta_b * acceptance


def singles_rate(pair_rate, eta, dark_counts):
    """Singles of one arm, ``R * eta + 2 DC``, as entering the accidental term."""
    return pair_rate * eta + 2.0 * dark_counts


def accidental_coincidences(pair_rate, eta_a, eta_b, dark_counts, t_cc):
    return singles_rate(pair_rate, eta_a, dark_counts) * singles_rate(pair_rate, eta_b, dark_counts) * t_cc


def binary_entropy(x):
    """H2(x) in bits, with H2(0) = H2(1) = 0."""
    x = np.asarray(x, dtype=float)
    if np.any((x < 0) | (x > 1)):
        raise ValueError("binary_entropy argument must lie in [0, 1]")
    inner = (x > 0) & (x < 1)
    xs = np.where(inner, x, 0.5)
    h = -xs * np.log2(xs) - (1 - xs) * np.log2(1 - xs)
    out = np.where(inner, h, 0.0)
    return float(out) if out.ndim == 0 else out


def qber_from_visibility(visibility):
    v = np.asarray(visibility, dtype=float)
    if np.any((v < 0) | (v > 1)):
        raise ValueError("visibility must be in [0, 1]")
    out = (1.0 - v) / 2.0
    return float(out) if out.ndim == 0 else out


def total_qber(cc_true, cc_acc, e_pol):
    """Polarization errors plus half of the accidentals, per detected coincidence."""
    cc_true = np.asarray(cc_true, dtype=float)
    cc_acc = np.asarray(cc_acc, dtype=float)
    total = cc_true + cc_acc
    if np.any(total <= 0):
        raise ZeroDivisionError("QBER undefined without coincidences")
    out = (cc_true * e_pol + 0.5 * cc_acc) / total
    return float(out) if out.ndim == 0 else out


def _key_rate(cc_true, cc_acc, e_pol):
    # zero-total channels yield zero key, not an error
    total = cc_true + cc_acc
    safe = np.where(total > 0, total, 1.0)
    e = np.clip((cc_true * e_pol + 0.5 * cc_acc) / safe, 0.0, 0.5)
    e = np.where(total > 0, e, 0.5)
    return total * (1.0 - 2.0 * binary_entropy(e)), e


def channel_key_rate(cc_true, cc_acc, e_pol):
    """Asymptotic secure key rate of one channel pair, clamped at zero."""
    cc_true = np.asarray(cc_true, dtype=float)
    cc_acc = np.asarray(cc_acc, dtype=float)
    if np.any(cc_true < 0) or np.any(cc_acc < 0):
        raise ValueError("coincidence rates must be non-negative")
    raw, _ = _key_rate(cc_true, cc_acc, e_pol)
    out = np.maximum(raw, 0.0)
    return float(out) if out.ndim == 0 else out


def qber_threshold(xtol: float = 1e-12) -> float:
    """QBER at which ``1 - 2 H2(E)`` vanishes (about 11.0 %)."""
    return brentq(lambda e: 1.0 - 2.0 * binary_entropy(e), 0.01, 0.2, xtol=xtol)


def klyshko_efficiency(cc, singles_a, singles_b):
    """Heralding efficiency ``CC / sqrt(S_A S_B)``."""
    return _scalar(cc / np.sqrt(np.asarray(singles_a, dtype=float) * singles_b))


def brightness_estimate(cc, singles_a, singles_b):
    """Pair rate before losses, ``S_A S_B / CC``.

    Only meaningful when accidentals are a negligible part of ``cc``;
    otherwise the pair rate is underestimated.
    """
    if np.any(np.asarray(cc) <= 0):
        raise ValueError("cc must be positive")
    return _scalar(np.asarray(singles_a, dtype=float) * singles_b / cc)


def _scalar(x):
    return float(x) if np.ndim(x) == 0 else x
