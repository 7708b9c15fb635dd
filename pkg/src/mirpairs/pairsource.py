"""Monte-Carlo time tags from a pulsed SFWM pair source behind a 1:1 splitter and two SNSPDs.

Arm A's filter passes only the signal band and arm B's only the idler band, so
a pair gives a coincidence only when the splitter sends the signal to A and
the idler to B (probability 1/4). Generation is split into fixed windows of
pulses, each with its own Philox stream keyed by (seed, window index), so the
output does not depend on how many worker threads are used.
"""

from __future__ import annotations

import logging
import math
import warnings
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass

import numpy as np

from .physmodel import ChannelSpec, db_to_linear
from .tags import CH_A, CH_B, TagStream, spec_hash

logger = logging.getLogger(__name__)

WINDOW_PULSES = 1 << 24
FWHM_TO_SIGMA = 1.0 / (2.0 * math.sqrt(2.0 * math.log(2.0)))
CROSS_JITTER_FWHM = 216e-12
ROUTING_FACTOR = 0.25


@dataclass(frozen=True)
class SourceSpec:
    """``xi`` is pairs per pulse per W^2 of on-chip peak power."""

    xi: float = 0.28
    rep_rate: float = 39.4e6
    linear_noise_b: float = 0.0
    duty_cycle: float = 2.6e-4
    statistics: str = "poisson"

    def __post_init__(self):
        if self.xi < 0 or not self.rep_rate > 0 or self.linear_noise_b < 0:
            raise ValueError("xi and b must be non-negative and rep_rate positive")
        if not 0 < self.duty_cycle < 1:
            raise ValueError("duty cycle must lie in (0, 1)")
        if self.statistics not in ("poisson", "thermal"):
            raise ValueError("statistics must be 'poisson' or 'thermal'")

    @property
    def period_ps(self) -> float:
        return 1e12 / self.rep_rate


@dataclass(frozen=True)
class DetectorSpec:
    sde: float = 0.44
    jitter_fwhm: float = CROSS_JITTER_FWHM / math.sqrt(2.0)
    dcr_dark: float = 0.0
    bb_rate: float = 0.0
    dead_time: float = 0.0
    fiber_loss_db: float = 0.0
    bias_ua: float = 8.0

    def __post_init__(self):
        if not 0 <= self.sde <= 1:
            raise ValueError("sde must lie in [0, 1]")
        if not self.jitter_fwhm > 0:
            raise ValueError("jitter must be positive")
        if min(self.dcr_dark, self.bb_rate, self.dead_time) < 0:
            raise ValueError("rates and dead time must be non-negative")
        if self.dead_time > 100e-9:
            raise ValueError("dead time above 100 ns is outside the model range")
        if self.fiber_loss_db > 0:
            raise ValueError("fiber_loss_db is a transmission exponent and must be <= 0")

    @property
    def noise_rate(self) -> float:
        return self.dcr_dark + self.bb_rate

    @property
    def sigma_ps(self) -> float:
        return self.jitter_fwhm * 1e12 * FWHM_TO_SIGMA


def pairs_per_pulse(xi: float, power: float) -> float:
    if power < 0:
        raise ValueError("power must be non-negative")
    return xi * power**2


def xi_from_rate(rate_per_w2: float, rep_rate: float) -> float:
    """Per-pulse probability per W^2 from an on-chip rate per W^2."""
    return rate_per_w2 / rep_rate


def true_pair_rate(net_rate: float) -> float:
    """Pair rate before the splitter: the measured net coincidence rate over the 1/4 routing factor."""
    return net_rate / ROUTING_FACTOR


def arm_efficiency(channel: ChannelSpec, detector: DetectorSpec) -> float:
    """Probability that a photon in the arm's band, already routed to the arm, produces a click."""
    return channel.transmission() * db_to_linear(detector.fiber_loss_db) * detector.sde


def window_capture(window: float, detectors: tuple[DetectorSpec, DetectorSpec]) -> float:
    """Fraction of the Gaussian coincidence peak inside a full-width ``window`` (s)."""
    sig = math.hypot(detectors[0].sigma_ps, detectors[1].sigma_ps) * 1e-12
    return math.erf(0.5 * window / (sig * math.sqrt(2.0)))


@dataclass
class ExpectedRates:
    singles_a: float
    singles_b: float
    coincidences: float
    accidentals: float
    capture: float
    mu: float

    @property
    def coincidences_in_window(self) -> float:
        return self.coincidences * self.capture

    @property
    def car(self) -> float:
        return self.coincidences_in_window / self.accidentals if self.accidentals > 0 else math.inf


def expected_rates(source: SourceSpec, channels, detectors, power: float, *,
                   window: float = 389e-12) -> ExpectedRates:
    """Low-mu Poisson expectations (Hz) for singles, true coincidences and window accidentals.

    Pulse-synchronous singles (pairs and linear noise) pair up in the side
    peaks at sA*sB/R, scaled by the window capture; any pairing that involves a
    dark or black-body count is flat in delay and contributes rate*rate*window.
    """
    mu = pairs_per_pulse(source.xi, power)
    if mu >= 0.1:
        warnings.warn(f"mu = {mu:.3g} pairs/pulse: multi-pair corrections are neglected", RuntimeWarning,
                      stacklevel=2)
    R = source.rep_rate
    eta = [arm_efficiency(c, d) for c, d in zip(channels, detectors)]
    sync = [R * (mu * e / 2.0 + source.linear_noise_b * power * e) for e in eta]
    singles = [s + d.noise_rate for s, d in zip(sync, detectors)]
    capture = window_capture(window, detectors)
    coinc = R * mu * eta[0] * eta[1] * ROUTING_FACTOR
    acc = capture * sync[0] * sync[1] / R + (singles[0] * singles[1] - sync[0] * sync[1]) * window
    return ExpectedRates(singles[0], singles[1], coinc, acc, capture, mu)


def _poisson_events(rng, n_pulses, mu, p_a, p_b, statistics):
    """Pulse indices of signal clicks in A and idler clicks in B."""
    if statistics == "poisson":
        # Poisson thinning: the three detection classes are independent Poisson counts
        # with uniformly distributed pulse indices.
        n_ab = rng.poisson(n_pulses * mu * p_a * p_b)
        n_a = rng.poisson(n_pulses * mu * p_a * (1 - p_b))
        n_b = rng.poisson(n_pulses * mu * (1 - p_a) * p_b)
        ab = rng.integers(0, n_pulses, n_ab)
        a_only = rng.integers(0, n_pulses, n_a)
        b_only = rng.integers(0, n_pulses, n_b)
        return np.concatenate([ab, a_only]), np.concatenate([ab, b_only])
    # thermal: geometric pair number per pulse; only pulses with >= 1 pair are drawn
    p0 = 1.0 / (1.0 + mu)
    m = rng.binomial(n_pulses, 1.0 - p0)
    pulses = rng.integers(0, n_pulses, m)
    k = rng.geometric(p0, m)  # zero-truncated geometric on {1, 2, ...}
    idx = np.repeat(pulses, k)
    a = rng.random(idx.size) < p_a
    b = rng.random(idx.size) < p_b
    return idx[a], idx[b]


def _window(args):
    (w, seed, n_pulses, first_pulse, mu, eta, b_noise, power, dets, period_ps, statistics) = args
    rng = np.random.Generator(np.random.Philox(np.random.SeedSequence([seed, w])))
    sig_a, idl_b = _poisson_events(rng, n_pulses, mu, eta[0] / 2.0, eta[1] / 2.0, statistics)
    out = []
    for ch, pair_idx in ((CH_A, sig_a), (CH_B, idl_b)):
        e = eta[ch]
        n_noise = rng.poisson(n_pulses * b_noise * power * e)
        noise_idx = rng.integers(0, n_pulses, n_noise)
        # non-photon-number-resolving: one click per pulse per detector
        idx = np.unique(np.concatenate([pair_idx, noise_idx]))
        t = (first_pulse + idx + 0.5) * period_ps + rng.normal(0.0, dets[ch].sigma_ps, idx.size)
        span = n_pulses * period_ps
        n_dark = rng.poisson(dets[ch].noise_rate * span * 1e-12)
        t_dark = first_pulse * period_ps + rng.random(n_dark) * span
        times = np.rint(np.concatenate([t, t_dark])).astype(np.int64)
        out.append(np.sort(np.maximum(times, 0)))
    return out


def _apply_dead_time(times: np.ndarray, dead_ps: int) -> np.ndarray:
    if dead_ps <= 0 or times.size < 2:
        return times
    keep = np.ones(times.size, bool)
    last = times[0]
    for i in range(1, times.size):
        if times[i] - last < dead_ps:
            keep[i] = False
        else:
            last = times[i]
    return times[keep]


def simulate_tags(source: SourceSpec, channels, detectors, power: float, duration: float, seed: int, *,
                  threads: int = 1) -> TagStream:
    """Simulate ``duration`` seconds of detections at on-chip peak power ``power``."""
    if not 0 <= duration <= 3600:
        raise ValueError("duration must lie in [0, 3600] s")
    if power < 0:
        raise ValueError("power must be non-negative")
    seed = int(seed)
    channels = tuple(channels)
    detectors = tuple(detectors)
    mu = pairs_per_pulse(source.xi, power)
    eta = [arm_efficiency(c, d) for c, d in zip(channels, detectors)]
    period_ps = source.period_ps
    n_total = int(round(duration * source.rep_rate))
    jobs = []
    for w, first in enumerate(range(0, n_total, WINDOW_PULSES)):
        n = min(WINDOW_PULSES, n_total - first)
        jobs.append((w, seed, n, first, mu, eta, source.linear_noise_b, power, detectors, period_ps,
                     source.statistics))
    if threads > 1 and len(jobs) > 1:
        with ThreadPoolExecutor(threads) as pool:
            parts = list(pool.map(_window, jobs))
    else:
        parts = [_window(j) for j in jobs]

    per_channel = []
    for ch in (CH_A, CH_B):
        times = np.concatenate([p[ch] for p in parts]) if parts else np.empty(0, np.int64)
        # jitter can push a tag across a window boundary
        times = np.sort(times, kind="stable")
        dead_ps = int(round(detectors[ch].dead_time * 1e12))
        per_channel.append(_apply_dead_time(times, dead_ps))
    chan = np.concatenate([np.full(per_channel[0].size, CH_A, np.uint8),
                           np.full(per_channel[1].size, CH_B, np.uint8)])
    t = np.concatenate(per_channel)
    order = np.argsort(t, kind="stable")
    header = {
        "format": "mirpairs-tags",
        "seed": seed,
        "power_W": float(power),
        "duration_s": float(duration),
        "rep_rate_hz": float(source.rep_rate),
        "source_hash": spec_hash(source),
        "channels_hash": spec_hash(list(map(spec_hash, channels))),
        "detectors_hash": spec_hash(list(map(spec_hash, detectors))),
    }
    return TagStream(chan[order], t[order], header)
