"""Coincidence histograms, peak fits, CAR, and the low-power efficiency estimate."""

from __future__ import annotations

import logging
import math
import warnings
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field

import numpy as np

from . import fitters
from .pairsource import ROUTING_FACTOR
from .tags import CH_A, CH_B, TagStream

logger = logging.getLogger(__name__)

DEFAULT_BIN_PS = 4
DEFAULT_WINDOW_PS = 389.0
DEFAULT_SIDE_PEAKS = 6
LOW_POWER_LIMIT = 0.5
_CHUNK = 1 << 18


@dataclass
class CoincidenceHistogram:
    bin_width: float
    delays: np.ndarray
    counts: np.ndarray
    integration_time: float = 0.0
    period_ps: float | None = None

    @property
    def total(self) -> int:
        return int(self.counts.sum())

    def window_sum(self, center: float, width: float) -> int:
        sel = np.abs(self.delays - center) <= 0.5 * width
        return int(self.counts[sel].sum())

    def mirrored(self) -> "CoincidenceHistogram":
        """Histogram with the start and stop channels exchanged."""
        return CoincidenceHistogram(self.bin_width, -self.delays[::-1], self.counts[::-1].copy(),
                                    self.integration_time, self.period_ps)

    def rebinned(self, factor: int) -> "CoincidenceHistogram":
        if factor <= 1:
            return self
        n = (self.counts.size // factor) * factor
        c = self.counts[:n].reshape(-1, factor).sum(axis=1)
        d = self.delays[:n].reshape(-1, factor).mean(axis=1)
        return CoincidenceHistogram(self.bin_width * factor, d, c, self.integration_time, self.period_ps)


def _pair_delays(a, b, lim):
    lo = np.searchsorted(b, a - lim, "left")
    hi = np.searchsorted(b, a + lim, "right")
    n = hi - lo
    total = int(n.sum())
    if total == 0:
        return np.empty(0, np.int64)
    first = np.cumsum(n) - n
    b_idx = np.repeat(lo, n) + (np.arange(total) - np.repeat(first, n))
    return b[b_idx] - np.repeat(a, n)


def build_histogram(tags: TagStream, bin_width: float = DEFAULT_BIN_PS, span: float | None = None, *,
                    threads: int = 1) -> CoincidenceHistogram:
    """All-pairs histogram of t_B - t_A for |delay| up to ``span`` ps.

    ``span`` defaults to 3.5 pulse periods when the stream records its
    repetition rate, else 100 ns. Bins are centred on multiples of
    ``bin_width``.
    """
    if bin_width < 1:
        raise ValueError("bin_width must be at least 1 ps")
    period = 1e12 / tags.rep_rate if tags.rep_rate else None
    if span is None:
        span = 3.5 * period if period else 100_000.0
    k_max = int(math.ceil(span / bin_width))
    lim = int(math.floor((k_max + 0.5) * bin_width))
    a = tags.times(CH_A)
    b = tags.times(CH_B)
    nbins = 2 * k_max + 1

    def chunk(start):
        d = _pair_delays(a[start:start + _CHUNK], b, lim)
        k = np.floor(d / bin_width + 0.5).astype(np.int64)
        k = k[np.abs(k) <= k_max]
        return np.bincount(k + k_max, minlength=nbins)

    starts = range(0, a.size, _CHUNK)
    if threads > 1 and a.size > _CHUNK:
        with ThreadPoolExecutor(threads) as pool:
            parts = list(pool.map(chunk, starts))
    else:
        parts = [chunk(s) for s in starts]
    counts = np.sum(parts, axis=0) if parts else np.zeros(nbins, np.int64)
    delays = (np.arange(nbins) - k_max) * float(bin_width)
    return CoincidenceHistogram(float(bin_width), delays, counts.astype(np.int64), tags.duration, period)


@dataclass
class PeakFit:
    center: float
    sigma: float
    amplitude: float
    background: float
    errors: np.ndarray
    converged: bool
    rebin: int = 1
    residual_rms: float = 0.0

    @property
    def fwhm(self) -> float:
        return 2.0 * math.sqrt(2.0 * math.log(2.0)) * abs(self.sigma)

    def window(self, n_sigma: float = 3.0) -> float:
        return n_sigma * abs(self.sigma)


def fit_peak(hist: CoincidenceHistogram, center: float = 0.0, half_range: float = 1500.0,
             min_peak: int = 20) -> PeakFit:
    """Gaussian plus flat background fitted around ``center``.

    When the tallest bin holds fewer than ``min_peak`` counts the histogram is
    rebinned (doubling the bin width) until it does or the peak region runs
    out of bins.
    """
    sel = np.abs(hist.delays - center) <= half_range
    h = CoincidenceHistogram(hist.bin_width, hist.delays[sel], hist.counts[sel], hist.integration_time)
    factor = 1
    while h.counts.max(initial=0) < min_peak and h.counts.size >= 16:
        factor *= 2
        h = CoincidenceHistogram(hist.bin_width * factor, hist.delays[sel], hist.counts[sel]).rebinned(factor)
    x = h.delays
    y = h.counts.astype(float)
    try:
        p0 = fitters.initial_guess("gaussian", x, y)
        p0[3] = float(np.median(y))
        p0[2] = max(float(y.max()) - p0[3], 1.0)
        p0[0] = float(x[np.argmax(y)])
    except fitters.GuessUnavailable:
        return PeakFit(center, math.nan, 0.0, 0.0, np.full(4, np.inf), False, factor)
    res = fitters.least_squares("gaussian", x, y, p0, weights="poisson")
    c, s, a, bg = res.params
    errs = res.param_errs.copy()
    errs[2] /= factor
    errs[3] /= factor
    if not res.converged:
        logger.info("peak fit did not converge: %s", res.message)
    return PeakFit(float(c), float(abs(s)), float(a / factor), float(bg / factor), errs, res.converged, factor,
                   res.residual_rms)


@dataclass
class CarResult:
    x_raw: int
    x_acc: float
    car: float
    car_err: float
    window_ps: float
    center: float = 0.0
    acc_zero: bool = False
    side_counts: list = field(default_factory=list)


def car_from_histogram(hist: CoincidenceHistogram, window: float = DEFAULT_WINDOW_PS,
                       n_side_peaks: int = DEFAULT_SIDE_PEAKS, center: float | None = None,
                       period_ps: float | None = None) -> CarResult:
    """CAR = (X_raw - X_acc) / X_acc with X_acc the mean of equal windows at +-k periods.

    ``window`` is the full width in ps. The centre defaults to the fitted peak
    position. Errors propagate Poisson counting statistics.
    """
    if n_side_peaks < 2 or n_side_peaks % 2:
        raise ValueError("n_side_peaks must be an even number >= 2")
    if not window > 0:
        raise ValueError("window must be positive")
    period = period_ps or hist.period_ps
    if period is None:
        raise ValueError("pulse period unknown: pass period_ps")
    if center is None:
        center = 0.0
        if hist.total:
            fit = fit_peak(hist)
            if fit.converged and abs(fit.center) < 0.25 * period:
                center = fit.center
    k = n_side_peaks // 2
    if hist.delays.max() < center + k * period + 0.5 * window or hist.delays.min() > center - k * period - 0.5 * window:
        raise ValueError("histogram span does not cover the requested side peaks")
    x_raw = hist.window_sum(center, window)
    sides = [hist.window_sum(center + s * j * period, window) for j in range(1, k + 1) for s in (-1, 1)]
    x_acc = float(np.mean(sides))
    sig_acc = math.sqrt(sum(sides)) / len(sides)
    if x_acc == 0:
        return CarResult(x_raw, 0.0, math.inf, math.inf, window, center, True, sides)
    car = (x_raw - x_acc) / x_acc
    car_err = math.sqrt(x_raw / x_acc**2 + (x_raw * sig_acc / x_acc**2) ** 2)
    return CarResult(x_raw, x_acc, car, car_err, window, center, False, sides)


@dataclass
class XiEstimate:
    xi: float
    xi_err: float
    rate_per_w2: float
    rate_per_w2_err: float
    singles_a_coeffs: np.ndarray
    singles_b_coeffs: np.ndarray
    net_coeff: float
    singles_a_errs: np.ndarray = None
    singles_b_errs: np.ndarray = None
    net_err: float = 0.0
    negative: bool = False

    def average_power_rate(self, duty_cycle: float) -> float:
        """On-chip rate per W^2 of average (rather than peak) power."""
        return self.rate_per_w2 / duty_cycle**2


def _weights(err):
    if err is None:
        return None
    err = np.asarray(err, dtype=float)
    return 1.0 / np.where(err > 0, err, np.min(err[err > 0], initial=1.0))


def power_scan_fit(powers, singles_a, singles_b, net_coincidences, *, rep_rate: float,
                   singles_a_err=None, singles_b_err=None, net_err=None, capture: float = 1.0) -> XiEstimate:
    """On-chip pair rate a_C0 a_C1 / a_X from quadratic fits of singles and net coincidences.

    Singles are fitted with a P^2 + b P + c; net coincidences with a P^2 alone.
    Channel losses cancel in the ratio. ``capture`` is the fraction of the
    coincidence peak inside the counting window; left at 1 the estimate is
    biased high by its inverse.
    """
    if not 0 < capture <= 1:
        raise ValueError("capture must lie in (0, 1]")
    p = np.asarray(powers, dtype=float)
    low = p < LOW_POWER_LIMIT
    if low.sum() < 5:
        raise ValueError(f"need at least 5 power points below {LOW_POWER_LIMIT} W")
    if not np.all(low):
        logger.info("ignoring %d points at or above %.2f W", int((~low).sum()), LOW_POWER_LIMIT)
    arrays = [np.asarray(v, dtype=float)[low] for v in (singles_a, singles_b, net_coincidences)]
    errs = [None if e is None else np.asarray(e, dtype=float)[low] for e in (singles_a_err, singles_b_err, net_err)]
    p = p[low]
    fa = fitters.least_squares("polynomial", p, arrays[0], weights=_weights(errs[0]), degree=2)
    fb = fitters.least_squares("polynomial", p, arrays[1], weights=_weights(errs[1]), degree=2)
    a0 = float(np.sum(arrays[2] * p**2) / np.sum(p**4))
    fx = fitters.least_squares("polynomial", p, arrays[2], [a0, 0.0, 0.0], weights=_weights(errs[2]),
                               fixed=[False, True, True])
    a_c0, a_c1, a_x = fa.params[0], fb.params[0], fx.params[0] / capture
    negative = min(a_c0, a_c1, a_x) < 0
    if negative:
        warnings.warn("negative quadratic coefficient in power-scan fit", RuntimeWarning, stacklevel=2)
    rate = a_c0 * a_c1 / a_x if a_x != 0 else math.inf
    rel = math.sqrt(sum((e / v) ** 2 for e, v in ((fa.param_errs[0], a_c0), (fb.param_errs[0], a_c1),
                                                   (fx.param_errs[0], a_x)) if v != 0))
    return XiEstimate(rate / rep_rate, abs(rate / rep_rate) * rel, rate, abs(rate) * rel, fa.params, fb.params,
                      float(a_x), fa.param_errs, fb.param_errs, float(fx.param_errs[0] / capture), bool(negative))


@dataclass
class CarRow:
    power: float
    car: float
    car_err: float
    raw_hz: float
    net_hz: float
    singles_a_hz: float
    singles_b_hz: float
    x_raw: int
    x_acc: float
    integration_time: float

    @property
    def true_hz(self) -> float:
        return self.net_hz / ROUTING_FACTOR

    @property
    def net_err_hz(self) -> float:
        return math.sqrt(self.x_raw + self.x_acc) / self.integration_time if self.integration_time else 0.0


def car_power_curve(streams, *, window: float = DEFAULT_WINDOW_PS, n_side_peaks: int = DEFAULT_SIDE_PEAKS,
                    bin_width: float = DEFAULT_BIN_PS, powers=None, threads: int = 1) -> list[CarRow]:
    """CAR and raw/net coincidence rates for each stream (one stream per pump power)."""
    rows = []
    for i, s in enumerate(streams):
        power = float(powers[i]) if powers is not None else s.power
        period = 1e12 / s.rep_rate
        span = (n_side_peaks // 2 + 0.5) * period + window
        hist = build_histogram(s, bin_width, span, threads=threads)
        car = car_from_histogram(hist, window, n_side_peaks)
        T = s.duration
        na, nb = s.counts()
        rows.append(CarRow(power, car.car, car.car_err, car.x_raw / T if T else 0.0,
                           (car.x_raw - car.x_acc) / T if T else 0.0, na / T if T else 0.0,
                           nb / T if T else 0.0, car.x_raw, car.x_acc, T))
    return rows


def xi_from_car_rows(rows: list[CarRow], rep_rate: float, capture: float = 1.0) -> XiEstimate:
    p = [r.power for r in rows]
    T = np.array([r.integration_time for r in rows])
    sa = np.array([r.singles_a_hz for r in rows])
    sb = np.array([r.singles_b_hz for r in rows])
    return power_scan_fit(p, sa, sb, [r.net_hz for r in rows], rep_rate=rep_rate,
                          singles_a_err=np.sqrt(np.maximum(sa * T, 1.0)) / T,
                          singles_b_err=np.sqrt(np.maximum(sb * T, 1.0)) / T,
                          net_err=[max(r.net_err_hz, 1.0 / r.integration_time) for r in rows],
                          capture=capture)
