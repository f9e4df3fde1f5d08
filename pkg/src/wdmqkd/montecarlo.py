"""Time-tag Monte Carlo of a two-arm entangled-pair link.

Pairs are emitted as a homogeneous Poisson process. Each photon is detected
independently, smeared by Gaussian detector jitter (the B photon also by the
coherence-time spread), merged with Poissonian dark counts and filtered by a
non-paralyzable dead time. Every event keeps the id of the pair it came from
(``-1`` for dark counts) so coincidences can be labelled true or accidental
from ground truth, which the analytic model never sees.

Each event carries a measured bit. The two photons of a pair carry the same
bit unless a polarization error (probability ``e_pol``) flips B's; dark
counts carry a uniformly random bit. A coincidence is an error when the two
bits differ, so accidentals are erroneous half of the time.
"""

from __future__ import annotations

import csv
import math
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field

import numpy as np
from scipy.optimize import curve_fit

FWHM_PER_SIGMA = 2.0 * math.sqrt(2.0 * math.log(2.0))
DEFAULT_MAX_EVENTS = 60_000_000

# fixed RNG stream labels, combined with the shard index
_PAIRS, _DARK_A, _DARK_B = 0, 1, 2
_PAIR_ID_STRIDE = 1 << 40

TIMETAG_DTYPE = np.dtype([("time_ps", "<u8"), ("detector", "u1"), ("outcome", "u1")])


@dataclass(frozen=True)
class SimConfig:
    pair_rate: float
    eta_a: float = 1.0
    eta_b: float = 1.0
    jitter_fwhm_per_detector: float = 0.0
    sigma_c: float = 0.0
    dead_time: float = 0.0
    dark_rate: float = 0.0
    e_pol: float = 0.0
    duration: float = 1.0
    seed: int = 0
    shard_duration: float = 1.0
    max_events: int = DEFAULT_MAX_EVENTS

    def __post_init__(self):
        if not self.duration > 0:
            raise ValueError("duration must be positive")
        if not self.shard_duration > 0:
            raise ValueError("shard_duration must be positive")
        for name in ("pair_rate", "jitter_fwhm_per_detector", "sigma_c", "dead_time", "dark_rate"):
            if getattr(self, name) < 0:
                raise ValueError(f"{name} must be non-negative")
        for name in ("eta_a", "eta_b"):
            if not 0 <= getattr(self, name) <= 1:
                raise ValueError(f"{name} must be in [0, 1]")
        if not 0 <= self.e_pol < 0.5:
            raise ValueError("e_pol must be in [0, 0.5)")
        if not 0 <= self.seed < 2**64:
            raise ValueError("seed must be an unsigned 64-bit integer")

    @property
    def expected_events(self) -> float:
        return self.duration * (self.pair_rate * (1.0 + self.eta_a + self.eta_b) + 2.0 * self.dark_rate)

    @property
    def combined_jitter(self) -> float:
        """Timing FWHM of the pair arrival difference without coherence spread."""
        return math.sqrt(2.0) * self.jitter_fwhm_per_detector


@dataclass(frozen=True, eq=False)
class TimeTagStream:
    detector: str
    times: np.ndarray  # s, sorted
    outcomes: np.ndarray  # measured bit, uint8
    pair_ids: np.ndarray  # int64, -1 for dark counts
    duration: float

    def __len__(self):
        return self.times.size

    @property
    def rate(self) -> float:
        return self.times.size / self.duration


@dataclass(frozen=True, eq=False)
class CoincidenceResult:
    cc_total: int
    cc_true_tagged: int
    cc_acc_tagged: int
    cc_error: int
    singles_a: int
    singles_b: int
    histogram: dict[int, int]
    t_cc: float
    duration: float
    matching: str
    bin_width: float = 1e-12
    delays: np.ndarray = field(default_factory=lambda: np.empty(0), repr=False)


@dataclass(frozen=True, eq=False)
class G2Histogram:
    centers: np.ndarray  # s
    counts: np.ndarray
    fwhm: float  # s, from a Gaussian-plus-offset fit
    background: float  # fitted flat level, counts per bin


def _rng(seed: int, shard: int, label: int) -> np.random.Generator:
    return np.random.Generator(np.random.PCG64(np.random.SeedSequence(seed, spawn_key=(shard, label))))


def _dark_counts(rng, rate, start, length):
    n = rng.poisson(rate * length)
    t = start + length * rng.random(n)
    bits = rng.integers(0, 2, n, dtype=np.uint8)
    return t, bits, np.full(n, -1, dtype=np.int64)


def _simulate_shard(config: SimConfig, shard: int, start: float, length: float):
    rng = _rng(config.seed, shard, _PAIRS)
    n = rng.poisson(config.pair_rate * length)
    t0 = start + length * rng.random(n)
    bits = rng.integers(0, 2, n, dtype=np.uint8)
    flip = (rng.random(n) < config.e_pol).astype(np.uint8)
    hit_a = rng.random(n) < config.eta_a
    hit_b = rng.random(n) < config.eta_b
    sig_a = config.jitter_fwhm_per_detector / FWHM_PER_SIGMA
    sig_b = math.hypot(config.jitter_fwhm_per_detector, config.sigma_c) / FWHM_PER_SIGMA
    ids = shard * _PAIR_ID_STRIDE + np.arange(n, dtype=np.int64)

    na, nb = int(hit_a.sum()), int(hit_b.sum())
    ta = t0[hit_a] + (rng.normal(0.0, sig_a, na) if sig_a > 0 else 0.0)
    tb = t0[hit_b] + (rng.normal(0.0, sig_b, nb) if sig_b > 0 else 0.0)
    da = _dark_counts(_rng(config.seed, shard, _DARK_A), config.dark_rate, start, length)
    db = _dark_counts(_rng(config.seed, shard, _DARK_B), config.dark_rate, start, length)
    arm_a = (np.concatenate((ta, da[0])), np.concatenate((bits[hit_a], da[1])), np.concatenate((ids[hit_a], da[2])))
    arm_b = (
        np.concatenate((tb, db[0])),
        np.concatenate((bits[hit_b] ^ flip[hit_b], db[1])),
        np.concatenate((ids[hit_b], db[2])),
    )
    return arm_a, arm_b


def dead_time_mask(times: np.ndarray, dead_time: float) -> np.ndarray:
    """Events surviving a non-paralyzable dead time, for sorted ``times``."""
    keep = np.ones(times.size, dtype=bool)
    if dead_time <= 0 or times.size < 2:
        return keep
    close = np.flatnonzero(np.diff(times) < dead_time) + 1
    if close.size == 0:
        return keep
    # an event far from its raw predecessor is always accepted; only runs of
    # close events need the sequential pass
    last = -np.inf
    prev = -2
    for i in close.tolist():
        if i != prev + 1:
            last = times[i - 1]
        if times[i] - last < dead_time:
            keep[i] = False
        else:
            last = times[i]
        prev = i
    return keep


def _finish_stream(name, parts, config: SimConfig) -> TimeTagStream:
    t = np.concatenate([p[0] for p in parts])
    bits = np.concatenate([p[1] for p in parts])
    ids = np.concatenate([p[2] for p in parts])
    inside = (t >= 0.0) & (t <= config.duration)
    t, bits, ids = t[inside], bits[inside], ids[inside]
    order = np.argsort(t, kind="stable")
    t, bits, ids = t[order], bits[order], ids[order]
    keep = dead_time_mask(t, config.dead_time)
    return TimeTagStream(name, t[keep], bits[keep], ids[keep], config.duration)


def simulate(config: SimConfig, workers: int | None = None) -> tuple[TimeTagStream, TimeTagStream]:
    """Generate the time-tag streams of detectors A and B.

    The run is cut into shards of ``shard_duration`` with seeds derived from
    ``(seed, shard, label)``, so the output does not depend on ``workers``.
    """
    if config.expected_events > config.max_events:
        raise MemoryError(
            f"expected {config.expected_events:.3g} events exceeds the budget of {config.max_events:.3g}"
        )
    n_shards = max(1, math.ceil(config.duration / config.shard_duration - 1e-12))
    bounds = [(k, k * config.shard_duration, min(config.shard_duration, config.duration - k * config.shard_duration))
              for k in range(n_shards)]
    if workers is None:
        from .optimizer import default_workers

        workers = default_workers()
    if workers > 1 and n_shards > 1:
        with ThreadPoolExecutor(max_workers=workers) as pool:
            shards = list(pool.map(lambda b: _simulate_shard(config, *b), bounds))
    else:
        shards = [_simulate_shard(config, *b) for b in bounds]
    return (
        _finish_stream("A", [s[0] for s in shards], config),
        _finish_stream("B", [s[1] for s in shards], config),
    )


def _candidates(ta, tb, half):
    lo = np.searchsorted(tb, ta - half, side="left")
    hi = np.searchsorted(tb, ta + half, side="right")
    counts = hi - lo
    total = int(counts.sum())
    ia = np.repeat(np.arange(ta.size), counts)
    starts = np.cumsum(counts) - counts
    ib = lo[ia] + (np.arange(total) - starts[ia])
    return ia, ib, tb[ib] - ta[ia]


def _greedy(ia, ib, dt):
    """Accept candidates by increasing |dt|; each event matched at most once."""
    order = np.lexsort((ib, ia, np.abs(dt)))
    ia, ib = ia[order], ib[order]
    ua, ca = np.unique(ia, return_counts=True)
    ub, cb = np.unique(ib, return_counts=True)
    multi_a = np.isin(ia, ua[ca > 1])
    multi_b = np.isin(ib, ub[cb > 1])
    accept = ~(multi_a | multi_b)
    used_a, used_b = set(), set()
    for k in np.flatnonzero(~accept).tolist():
        a, b = int(ia[k]), int(ib[k])
        if a not in used_a and b not in used_b:
            used_a.add(a)
            used_b.add(b)
            accept[k] = True
    return order[accept]


def count_coincidences(
    streams: tuple[TimeTagStream, TimeTagStream],
    t_cc: float,
    matching: str = "greedy",
    bin_width: float = 1e-12,
) -> CoincidenceResult:
    """Coincidences with ``|t_B - t_A| <= t_cc / 2``.

    ``matching="greedy"`` pairs every event at most once, nearest first;
    ``"all-pairs"`` counts every A-B combination inside the window, which is
    what a correlation histogram integrates and what the accidental formula
    ``S_A * S_B * t_cc`` describes.
    """
    a, b = streams
    if matching not in ("greedy", "all-pairs"):
        raise ValueError(f"unknown matching rule {matching!r}")
    if t_cc < 0:
        raise ValueError("t_cc must be non-negative")
    if t_cc == 0:
        ia = ib = np.empty(0, dtype=np.int64)
        dt = np.empty(0)
    else:
        ia, ib, dt = _candidates(a.times, b.times, 0.5 * t_cc)
        if matching == "greedy":
            sel = _greedy(ia, ib, dt)
            ia, ib, dt = ia[sel], ib[sel], dt[sel]
    true = (a.pair_ids[ia] == b.pair_ids[ib]) & (a.pair_ids[ia] >= 0)
    errors = a.outcomes[ia] != b.outcomes[ib]
    bins, counts = np.unique(np.round(dt / bin_width).astype(np.int64), return_counts=True)
    n_true = int(true.sum())
    return CoincidenceResult(
        cc_total=int(dt.size),
        cc_true_tagged=n_true,
        cc_acc_tagged=int(dt.size) - n_true,
        cc_error=int(errors.sum()),
        singles_a=len(a),
        singles_b=len(b),
        histogram=dict(zip(bins.tolist(), counts.tolist())),
        t_cc=t_cc,
        duration=a.duration,
        matching=matching,
        bin_width=bin_width,
        delays=dt,
    )


def _gauss(x, amp, mu, sigma, base):
    return base + amp * np.exp(-0.5 * ((x - mu) / sigma) ** 2)


def g2_histogram(streams: tuple[TimeTagStream, TimeTagStream], bin_width: float = 1e-12,
                 span: float = 250e-12) -> G2Histogram:
    """Histogram of all A-B delays within ``+-span`` with a fitted peak FWHM."""
    if not bin_width > 0:
        raise ValueError("bin_width must be positive")
    a, b = streams
    k = int(math.ceil(span / bin_width - 1e-9))
    # collect out to the outer bin edges so the end bins are complete
    _, _, dt = _candidates(a.times, b.times, (k + 0.5) * bin_width)
    edges = (np.arange(-k, k + 2) - 0.5) * bin_width
    counts, _ = np.histogram(dt, bins=edges)
    centers = np.arange(-k, k + 1) * bin_width
    fwhm, base = _fit_peak(centers, counts, bin_width)
    return G2Histogram(centers, counts, fwhm, base)


def _fit_peak(x, y, bin_width):
    if np.count_nonzero(y) == 0:
        return math.nan, 0.0
    if np.count_nonzero(y) < 3:
        return 0.0, 0.0
    # work in bin units to keep the fit well scaled
    u = x / bin_width
    base0 = float(np.median(y))
    amp0 = float(y.max() - base0)
    mu0 = float(u[np.argmax(y)])
    above = u[y - base0 > 0.5 * amp0]
    sig0 = max((above.max() - above.min()) / FWHM_PER_SIGMA, 0.5) if above.size else 1.0
    try:
        p, _ = curve_fit(_gauss, u, y.astype(float), p0=(amp0, mu0, sig0, base0), maxfev=10000)
    except RuntimeError:
        return math.nan, base0
    return abs(p[2]) * FWHM_PER_SIGMA * bin_width, float(p[3])


def estimate_klyshko(result: CoincidenceResult) -> float:
    """Heralding efficiency ``CC / sqrt(S_A S_B)`` from counted events."""
    if result.singles_a <= 0 or result.singles_b <= 0:
        raise ValueError("singles must be positive")
    return result.cc_total / math.sqrt(result.singles_a * result.singles_b)


def estimate_brightness(result: CoincidenceResult) -> float:
    """Pair rate ``S_A S_B / CC`` in pairs per second."""
    if result.cc_total <= 0:
        raise ValueError("no coincidences")
    return result.singles_a * result.singles_b / result.cc_total / result.duration


def estimate_visibility(result: CoincidenceResult) -> float:
    if result.cc_total <= 0:
        raise ValueError("no coincidences")
    return 1.0 - 2.0 * result.cc_error / result.cc_total


def merge_streams(streams: tuple[TimeTagStream, TimeTagStream]) -> np.ndarray:
    """Time-ordered records (``time_ps``, ``detector`` 0=A/1=B, ``outcome``)."""
    a, b = streams
    t = np.concatenate((a.times, b.times))
    det = np.concatenate((np.zeros(len(a), np.uint8), np.ones(len(b), np.uint8)))
    out = np.concatenate((a.outcomes, b.outcomes))
    ps = np.round(t * 1e12).astype(np.uint64)
    order = np.lexsort((det, ps))
    rec = np.empty(t.size, dtype=TIMETAG_DTYPE)
    rec["time_ps"], rec["detector"], rec["outcome"] = ps[order], det[order], out[order]
    return rec


def write_timetags(target, streams, fmt: str = "bin", header_comment: str | None = None) -> None:
    """Dump both streams as packed little-endian records or as CSV.

    Binary records are 10 bytes: uint64 picoseconds, uint8 detector,
    uint8 outcome. The CSV has columns ``time_ps,detector,outcome``.
    ``target`` is a path or an open file (binary for ``"bin"``, text for ``"csv"``).
    """
    if fmt not in ("bin", "csv"):
        raise ValueError(f"unknown format {fmt!r}")
    rec = merge_streams(streams)
    if not hasattr(target, "write"):
        mode = ("wb", None, None) if fmt == "bin" else ("w", "", "utf-8")
        with open(target, mode[0], newline=mode[1], encoding=mode[2]) as fh:
            write_timetags(fh, streams, fmt, header_comment)
        return
    if fmt == "bin":
        target.write(rec.tobytes())
        return
    if header_comment:
        target.write(f"# {header_comment}\n")
    w = csv.writer(target, lineterminator="\n")
    w.writerow(["time_ps", "detector", "outcome"])
    w.writerows(zip(rec["time_ps"].tolist(), rec["detector"].tolist(), rec["outcome"].tolist()))


def read_timetags(path, fmt: str = "bin", duration: float | None = None) -> tuple[TimeTagStream, TimeTagStream]:
    """Load a dump back into two streams (pair identities are not stored)."""
    if fmt == "bin":
        rec = np.fromfile(path, dtype=TIMETAG_DTYPE)
        ps, det, out = rec["time_ps"], rec["detector"], rec["outcome"]
    elif fmt == "csv":
        with open(path, encoding="utf-8") as fh:
            lines = [ln for ln in fh if ln.strip() and not ln.startswith("#")]
        if not lines or lines[0].strip() != "time_ps,detector,outcome":
            raise ValueError(f"{path}: expected header 'time_ps,detector,outcome'")
        data = np.loadtxt(lines[1:], delimiter=",", dtype=np.uint64, ndmin=2).reshape(-1, 3)
        ps, det, out = data[:, 0], data[:, 1].astype(np.uint8), data[:, 2].astype(np.uint8)
    else:
        raise ValueError(f"unknown format {fmt!r}")
    t = ps.astype(np.float64) * 1e-12
    if duration is None:
        duration = float(t.max()) if t.size else 1.0
    streams = []
    for code, name in ((0, "A"), (1, "B")):
        m = det == code
        streams.append(TimeTagStream(name, t[m], out[m].astype(np.uint8), np.full(int(m.sum()), -1, np.int64), duration))
    return streams[0], streams[1]
