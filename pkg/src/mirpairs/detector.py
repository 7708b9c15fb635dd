"""SNSPD response curves and efficiency calibration."""

from __future__ import annotations

import logging
import math
from dataclasses import dataclass

import numpy as np

from . import fitters

logger = logging.getLogger(__name__)

#: (slope mV/uA, offset mV) of the discriminator threshold that tracks the bias current
DISCRIMINATION = {"A": (7.46, 15.0), "B": (10.84, 20.0)}
MAX_BIAS_UA = 12.0


@dataclass(frozen=True)
class BiasCurveModel:
    """Sigmoid efficiency plateau plus an exponential intrinsic dark rate and a black-body floor.

    Currents are in uA, rates in Hz.
    """

    sde_max: float = 0.44
    i_half: float = 7.0
    i_width: float = 0.3
    dcr0: float = 1e-4
    i_dcr: float = 1.0
    bb_floor: float = 300.0

    def __post_init__(self):
        if not 0 <= self.sde_max <= 1:
            raise ValueError("sde_max must lie in [0, 1]")
        if not (self.i_width > 0 and self.i_dcr > 0):
            raise ValueError("i_width and i_dcr must be positive")
        if self.dcr0 < 0 or self.bb_floor < 0:
            raise ValueError("rates must be non-negative")


def _bias(i):
    i = np.asarray(i, dtype=float)
    if np.any(i < 0):
        raise ValueError("bias current must be non-negative")
    return i


def _scalar(x):
    return float(x) if np.ndim(x) == 0 else x


def sde_vs_bias(model: BiasCurveModel, i_bias):
    i = _bias(i_bias)
    z = -(i - model.i_half) / model.i_width
    # exp overflow for very low bias is harmless: the efficiency is then 0
    with np.errstate(over="ignore"):
        return _scalar(model.sde_max / (1.0 + np.exp(z)))


def dcr_vs_bias(model: BiasCurveModel, i_bias):
    i = _bias(i_bias)
    intrinsic = model.dcr0 * np.exp(i / model.i_dcr)
    if model.sde_max == 0:
        return _scalar(intrinsic + 0.0 * i)
    # black-body photons are counted with the bias-dependent efficiency
    return _scalar(intrinsic + model.bb_floor * np.asarray(sde_vs_bias(model, i)) / model.sde_max)


def discrimination_voltage(detector_id: str, i_bias):
    """Discriminator threshold (mV) used at bias ``i_bias`` (uA)."""
    try:
        slope, offset = DISCRIMINATION[detector_id]
    except KeyError:
        raise ValueError(f"unknown detector {detector_id!r}; expected 'A' or 'B'") from None
    i = _bias(i_bias)
    if np.any(i > MAX_BIAS_UA):
        raise ValueError(f"bias outside [0, {MAX_BIAS_UA}] uA")
    return _scalar(slope * i + offset)


@dataclass
class Calibration:
    sde: float
    sde_err: float
    intercept_hz: float
    intercept_err: float
    saturated: bool
    n_points: int

    def ci95(self) -> tuple[float, float]:
        return self.sde - 1.96 * self.sde_err, self.sde + 1.96 * self.sde_err

    def to_dict(self) -> dict:
        return {"sde": self.sde, "sde_err": self.sde_err, "intercept_hz": self.intercept_hz}


def calibration_fit(launched_flux, counts, counts_err=None, *, integration_time: float | None = None) -> Calibration:
    """Slope of dark-subtracted count rate against launched photon flux.

    Errors default to Poisson, sqrt(N)/T when ``integration_time`` is given
    and sqrt(rate) otherwise. A free-intercept fit is reported as a
    diagnostic, and a negative quadratic term beyond 3 sigma marks the
    series as saturating.
    """
    flux = np.asarray(launched_flux, dtype=float)
    rate = np.asarray(counts, dtype=float)
    if flux.size < 4 or flux.shape != rate.shape:
        raise ValueError("need at least 4 (flux, counts) pairs of equal length")
    if np.any(flux < 0):
        raise ValueError("flux must be non-negative")
    if not np.any(rate):
        return Calibration(0.0, 0.0, 0.0, 0.0, False, flux.size)
    if counts_err is None:
        if integration_time:
            err = np.sqrt(np.maximum(rate * integration_time, 1.0)) / integration_time
        else:
            err = np.sqrt(np.maximum(np.abs(rate), 1.0))
    else:
        err = np.asarray(counts_err, dtype=float)
        if np.any(err <= 0):
            err = np.where(err > 0, err, np.min(err[err > 0], initial=1.0))
    w = 1.0 / err

    slope, cov, _ = fitters.linear_fit(flux[:, None], rate, w)
    line, cov_l, _ = fitters.linear_fit(np.stack([flux, np.ones_like(flux)], axis=1), rate, w)
    quad, cov_q, _ = fitters.linear_fit(np.stack([flux, flux**2], axis=1), rate, w)
    q_err = math.sqrt(max(cov_q[1, 1], 0.0))
    saturated = bool(quad[1] < 0 and abs(quad[1]) > 3.0 * q_err)
    if saturated:
        logger.warning("count rate is sublinear in flux: detector saturation suspected")
    return Calibration(float(slope[0]), math.sqrt(cov[0, 0]), float(line[1]), math.sqrt(max(cov_l[1, 1], 0.0)),
                       saturated, flux.size)


def smooth_table(values, window: int = 5) -> tuple[np.ndarray, np.ndarray]:
    """Centred moving average and the population standard deviation inside each window.

    Near the ends the window shrinks symmetrically so it stays centred.
    """
    v = np.asarray(values, dtype=float)
    if window < 1 or window % 2 == 0:
        raise ValueError("window must be a positive odd number")
    half = window // 2
    mean = np.empty_like(v)
    std = np.empty_like(v)
    for i in range(v.size):
        h = min(half, i, v.size - 1 - i)
        seg = v[i - h:i + h + 1]
        mean[i] = seg.mean()
        std[i] = seg.std()
    return mean, std


def spectral_sde(wavelengths, sde, query, smoothing_window: int = 5):
    """Smoothed efficiency at ``query`` wavelengths, with the in-window spread as the error.

    Returns (efficiency, error); both are linearly interpolated between nodes.
    """
    wl = np.asarray(wavelengths, dtype=float)
    s = np.asarray(sde, dtype=float)
    if wl.shape != s.shape or wl.size < 2:
        raise ValueError("need matching wavelength and efficiency tables of at least 2 points")
    order = np.argsort(wl)
    wl, s = wl[order], s[order]
    q = np.asarray(query, dtype=float)
    if np.any(q < wl[0]) or np.any(q > wl[-1]):
        raise ValueError("query wavelength outside the tabulated range")
    mean, std = smooth_table(s, smoothing_window)
    return _scalar(np.interp(q, wl, mean)), _scalar(np.interp(q, wl, std))
