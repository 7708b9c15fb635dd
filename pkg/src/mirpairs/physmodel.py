"""Shared physical types, unit conversions and pulse synthesis.

Everything inside the package is SI. Decibels, nanometres, picoseconds and the
like only appear in the ``from_*`` constructors and in the CLI config layer.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

C = 299_792_458.0
HBAR = 1.054_571_817e-34

#: FWHM of sech^2(t/tau0) is 2 arccosh(sqrt 2) tau0.
SECH_FWHM_FACTOR = 2.0 * math.acosh(math.sqrt(2.0))
#: Intensity-autocorrelation FWHM over pulse FWHM for a sech^2 pulse.
SECH_AUTOCORRELATION_FACTOR = 1.5427

DEFAULT_SAMPLES = 2**12
DEFAULT_SPAN_FACTOR = 40.0


def db_to_linear(x):
    """Power transmission fraction for a gain/loss of ``x`` dB."""
    out = 10.0 ** (np.asarray(x, dtype=float) / 10.0)
    return float(out) if out.ndim == 0 else out


def linear_to_db(x):
    return 10.0 * np.log10(x)


def db_per_cm_to_per_m(loss_db_per_cm: float) -> float:
    """Power attenuation coefficient (1/m) for a loss quoted in dB/cm."""
    return abs(loss_db_per_cm) * 100.0 * math.log(10.0) / 10.0


def angular_frequency(wavelength):
    wl = np.asarray(wavelength, dtype=float)
    if np.any(~(wl > 0)):
        raise ValueError("wavelength must be positive")
    out = 2.0 * math.pi * C / wl
    return float(out) if out.ndim == 0 else out


def wavelength_from_omega(omega):
    om = np.asarray(omega, dtype=float)
    if np.any(~(om > 0)):
        raise ValueError("angular frequency must be positive")
    out = 2.0 * math.pi * C / om
    return float(out) if out.ndim == 0 else out


def effective_length(alpha: float, length: float) -> float:
    """Loss-weighted interaction length (1 - exp(-alpha L)) / alpha."""
    if alpha <= 0.0:
        return length
    return -math.expm1(-alpha * length) / alpha


@dataclass(frozen=True)
class WaveguideSpec:
    """One spiral source waveguide, SI units throughout.

    ``alpha_lin`` is the power attenuation coefficient, ``alpha_tpa`` the
    waveguided two-photon absorption coefficient d(alpha)/dP. ``beta2`` keeps
    its sign; anomalous dispersion is negative.
    """

    length: float
    a_eff: float
    n2: float
    beta2: float = 0.0
    alpha_lin: float = 0.0
    alpha_tpa: float = 0.0
    width: float = 510e-9
    height: float = 340e-9
    sidewall_angle: float = 15.0
    beta3: float = 0.0

    def __post_init__(self):
        if not self.a_eff > 0:
            raise ValueError("a_eff must be positive")
        if not self.length > 0:
            raise ValueError("length must be positive")
        if self.alpha_lin < 0 or self.alpha_tpa < 0:
            raise ValueError("loss coefficients must be non-negative")
        if self.n2 < 0:
            raise ValueError("n2 must be non-negative")

    @classmethod
    def from_lab_units(
        cls,
        *,
        length_mm: float,
        a_eff_um2: float,
        n2_m2_per_w: float,
        beta2_ps2_per_m: float = 0.0,
        loss_db_per_cm: float = 0.0,
        alpha_tpa_per_w_m: float = 0.0,
        width_nm: float = 510.0,
        height_nm: float = 340.0,
        sidewall_angle_deg: float = 15.0,
        beta3_ps3_per_m: float = 0.0,
    ) -> "WaveguideSpec":
        return cls(
            length=length_mm * 1e-3,
            a_eff=a_eff_um2 * 1e-12,
            n2=n2_m2_per_w,
            beta2=beta2_ps2_per_m * 1e-24,
            alpha_lin=db_per_cm_to_per_m(loss_db_per_cm),
            alpha_tpa=alpha_tpa_per_w_m,
            width=width_nm * 1e-9,
            height=height_nm * 1e-9,
            sidewall_angle=sidewall_angle_deg,
            beta3=beta3_ps3_per_m * 1e-36,
        )

    @property
    def l_eff(self) -> float:
        return effective_length(self.alpha_lin, self.length)

    def gamma(self, wavelength: float) -> float:
        return 2.0 * math.pi * self.n2 / (wavelength * self.a_eff)


@dataclass(frozen=True)
class ChannelSpec:
    """Optical path of one detection arm, from the chip output to the fibre feeding a detector.

    Losses are transmission exponents in dB and must be <= 0.
    """

    coupler_peak_db: float = -7.3
    coupler_center: float = 2.0715e-6
    coupler_bw3db: float = 60e-9
    mono_loss_db: float = -4.5
    n_monochromators: int = 2
    filter_center: float = 2.0715e-6
    filter_width: float = 1.0e-9
    pump_rejection_db: float = 100.0
    fiber_loss_db: float = 0.0

    def __post_init__(self):
        for name in ("coupler_peak_db", "mono_loss_db", "fiber_loss_db"):
            if getattr(self, name) > 0:
                raise ValueError(f"{name} must be <= 0 dB (a transmission exponent)")
        if not self.filter_width > 0:
            raise ValueError("filter_width must be positive")
        if not self.coupler_bw3db > 0:
            raise ValueError("coupler_bw3db must be positive")
        if self.pump_rejection_db < 100:
            raise ValueError("pump_rejection_db must be at least 100 dB")

    def coupler_db(self, wavelength):
        """Grating-coupler transmission in dB: a Gaussian, i.e. a parabola in dB."""
        x = (np.asarray(wavelength, dtype=float) - self.coupler_center) / (0.5 * self.coupler_bw3db)
        out = self.coupler_peak_db - 3.0 * x**2
        return float(out) if out.ndim == 0 else out

    def transmission(self, wavelength: float | None = None) -> float:
        """Linear transmission at ``wavelength`` (defaults to the filter centre)."""
        wl = self.filter_center if wavelength is None else wavelength
        total_db = self.coupler_db(wl) + self.n_monochromators * self.mono_loss_db + self.fiber_loss_db
        return db_to_linear(total_db)


@dataclass(frozen=True)
class TimeGrid:
    n_samples: int = DEFAULT_SAMPLES
    dt: float = 1e-13

    def __post_init__(self):
        n = self.n_samples
        if n < 256 or n & (n - 1):
            raise ValueError("n_samples must be a power of two >= 256")
        if not self.dt > 0:
            raise ValueError("dt must be positive")

    @classmethod
    def for_pulse(cls, fwhm: float, n_samples: int = DEFAULT_SAMPLES,
                  span_factor: float = DEFAULT_SPAN_FACTOR) -> "TimeGrid":
        return cls(n_samples, span_factor * fwhm / n_samples)

    @property
    def t(self) -> np.ndarray:
        # t[k] == -t[n-k] exactly, so even envelopes are exactly symmetric
        return (np.arange(self.n_samples) - self.n_samples // 2) * self.dt

    @property
    def omega(self) -> np.ndarray:
        """Angular-frequency offsets in numpy FFT order."""
        return 2.0 * math.pi * np.fft.fftfreq(self.n_samples, self.dt)


@dataclass(frozen=True)
class SampledPulse:
    """Complex envelope in sqrt(W) on a uniform grid centred on ``t = 0``."""

    envelope: np.ndarray
    dt: float
    carrier_wavelength: float = 2.0715e-6
    rep_rate: float = 39.4e6
    meta: dict = field(default_factory=dict, compare=False)

    def __post_init__(self):
        env = np.array(self.envelope, dtype=complex)
        env.setflags(write=False)
        object.__setattr__(self, "envelope", env)
        TimeGrid(env.size, self.dt)  # validates size and dt
        if not np.all(np.isfinite(env)):
            raise ValueError("envelope must be finite")

    @property
    def grid(self) -> TimeGrid:
        return TimeGrid(self.n_samples, self.dt)

    @property
    def n_samples(self) -> int:
        return self.envelope.size

    @property
    def t(self) -> np.ndarray:
        return self.grid.t

    @property
    def omega(self) -> np.ndarray:
        return self.grid.omega

    @property
    def power(self) -> np.ndarray:
        return np.abs(self.envelope) ** 2

    @property
    def peak_power(self) -> float:
        return float(self.power.max())

    @property
    def energy(self) -> float:
        return float(self.power.sum() * self.dt)

    @property
    def omega0(self) -> float:
        return angular_frequency(self.carrier_wavelength)

    def spectrum(self) -> np.ndarray:
        """Power spectral density |FFT(a)|^2 in FFT order (arbitrary but consistent units)."""
        return np.abs(np.fft.fft(self.envelope)) ** 2

    def with_envelope(self, envelope: np.ndarray) -> "SampledPulse":
        return SampledPulse(envelope, self.dt, self.carrier_wavelength, self.rep_rate, dict(self.meta))


def sech_pulse(peak_power: float, duration_fwhm: float, grid: TimeGrid | None = None, *,
               carrier_wavelength: float = 2.0715e-6, rep_rate: float = 39.4e6) -> SampledPulse:
    """Transform-limited sech pulse with intensity FWHM ``duration_fwhm``."""
    if peak_power < 0:
        raise ValueError("peak_power must be non-negative")
    grid = TimeGrid.for_pulse(duration_fwhm) if grid is None else grid
    if duration_fwhm < 8 * grid.dt:
        raise ValueError("pulse is under-resolved: need duration_fwhm >= 8 dt")
    tau0 = duration_fwhm / SECH_FWHM_FACTOR
    env = math.sqrt(peak_power) / np.cosh(grid.t / tau0)
    return SampledPulse(env, grid.dt, carrier_wavelength, rep_rate,
                        {"duration_fwhm": duration_fwhm, "tau0": tau0})


def autocorrelation_fwhm_to_pulse_fwhm(ac_fwhm: float) -> float:
    if not ac_fwhm > 0:
        raise ValueError("autocorrelation FWHM must be positive")
    return ac_fwhm / SECH_AUTOCORRELATION_FACTOR


def intensity_autocorrelation(pulse: SampledPulse) -> tuple[np.ndarray, np.ndarray]:
    """Background-free intensity autocorrelation, returned as (lag, signal) centred on zero lag."""
    p = pulse.power
    n = p.size
    spec = np.fft.rfft(p, 2 * n)
    ac = np.fft.irfft(np.abs(spec) ** 2, 2 * n)
    ac = np.fft.fftshift(ac)[n // 2: n // 2 + n]
    lags = (np.arange(n) - n // 2) * pulse.dt
    return lags, ac


def measure_fwhm(x: np.ndarray, y: np.ndarray) -> float:
    """Full width at half maximum of a single-peaked curve, linearly interpolated."""
    y = np.asarray(y, dtype=float)
    x = np.asarray(x, dtype=float)
    k = int(np.argmax(y))
    half = 0.5 * y[k]
    above = np.nonzero(y >= half)[0]
    lo, hi = above[0], above[-1]
    if lo == 0 or hi == y.size - 1:
        raise ValueError("peak is not contained in the sampled range")
    x_lo = np.interp(half, [y[lo - 1], y[lo]], [x[lo - 1], x[lo]])
    x_hi = np.interp(half, [y[hi + 1], y[hi]], [x[hi + 1], x[hi]])
    return float(x_hi - x_lo)
