"""Four-wave-mixing phase matching, stimulated-FWM spectral maps and scaling curves."""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .physmodel import (
    C,
    ChannelSpec,
    SampledPulse,
    WaveguideSpec,
    angular_frequency,
    db_to_linear,
    wavelength_from_omega,
)

RAYLEIGH_REFERENCE = 1.55e-6


def nonlinear_parameter(n2: float, a_eff: float, wavelength: float) -> float:
    """gamma = k0 n2 / A_eff in 1/(W m)."""
    if not a_eff > 0:
        raise ValueError("a_eff must be positive")
    if not wavelength > 0:
        raise ValueError("wavelength must be positive")
    return 2.0 * math.pi * n2 / (wavelength * a_eff)


def n2_from_gamma(gamma: float, a_eff: float, wavelength: float) -> float:
    return gamma * wavelength * a_eff / (2.0 * math.pi)


def tpa_bulk_to_waveguide(beta_tpa: float, a_eff: float) -> float:
    """Waveguide TPA coefficient (1/(W m)) from the bulk coefficient (m/W)."""
    if not a_eff > 0:
        raise ValueError("a_eff must be positive")
    return beta_tpa / a_eff


def tpa_waveguide_to_bulk(alpha_tpa: float, a_eff: float) -> float:
    return alpha_tpa * a_eff


def linear_mismatch(beta2: float, delta_omega):
    """Delta k_lin = -beta2 * delta_omega**2."""
    return -beta2 * np.square(delta_omega)


def total_mismatch(dk_lin, gamma: float, power: float):
    if power < 0:
        raise ValueError("power must be non-negative")
    return dk_lin - 2.0 * gamma * power


def perfect_match_detuning(beta2: float, gamma: float, power: float) -> float | None:
    """Detuning at which the total mismatch vanishes.

    Returns None when ``beta2 >= 0``: there is then no finite phase-matched
    detuning (for ``beta2 == 0`` the mismatch is flat at -2 gamma P).
    """
    if beta2 >= 0:
        return None
    gp = gamma * power
    if gp < 0:
        raise ValueError("gamma * power must be non-negative")
    return math.sqrt(2.0 * gp / abs(beta2))


def idler_frequency(omega_pump, omega_seed):
    return 2.0 * np.asarray(omega_pump) - np.asarray(omega_seed)


def idler_wavelength(pump_wavelength, seed_wavelength):
    """Energy-conserving idler wavelength: 1/l_i = 2/l_p - 1/l_s."""
    return 1.0 / (2.0 / np.asarray(pump_wavelength) - 1.0 / np.asarray(seed_wavelength))


@dataclass(frozen=True)
class PhaseMatchPoint:
    delta_omega: float
    dk_lin: float
    dk_total: float
    gain_rel: float


def conversion_efficiency(gamma: float, power: float, l_eff: float, dk_total, length: float):
    """Undepleted-pump idler/seed power ratio (gamma P L_eff)^2 sinc^2(dk L / 2)."""
    # np.sinc(x) = sin(pi x)/(pi x)
    return (gamma * power * l_eff) ** 2 * np.sinc(np.asarray(dk_total) * length / (2.0 * np.pi)) ** 2


def phase_match_curve(wg: WaveguideSpec, wavelength: float, power: float, delta_omega) -> list[PhaseMatchPoint]:
    """Mismatch and normalised conversion efficiency over a detuning sweep."""
    gamma = wg.gamma(wavelength)
    dw = np.atleast_1d(np.asarray(delta_omega, dtype=float))
    dk_lin = linear_mismatch(wg.beta2, dw)
    dk = total_mismatch(dk_lin, gamma, power)
    gain = np.sinc(dk * wg.length / (2.0 * np.pi)) ** 2
    return [PhaseMatchPoint(float(a), float(b), float(c), float(d)) for a, b, c, d in zip(dw, dk_lin, dk, gain)]


def rayleigh_relative(wavelength):
    """Rayleigh scattering efficiency relative to 1.55 um."""
    wl = np.asarray(wavelength, dtype=float)
    if np.any(~(wl > 0)):
        raise ValueError("wavelength must be positive")
    out = (RAYLEIGH_REFERENCE / wl) ** 4
    return float(out) if out.ndim == 0 else out


def coupler_transmission(coupler: ChannelSpec, wavelength):
    """Grating-coupler transmission in dB (Gaussian envelope, parabolic in dB)."""
    return coupler.coupler_db(wavelength)


@dataclass
class FwmMap:
    """Stimulated-FWM spectra, one max-normalised row per seed wavelength."""

    wavelengths: np.ndarray
    seed_wavelengths: np.ndarray
    idler_wavelengths: np.ndarray
    psd: np.ndarray
    idler_rel: np.ndarray  # idler/seed peak ratio at the output

    def psd_db(self, floor_db: float = -200.0) -> np.ndarray:
        with np.errstate(divide="ignore"):
            out = 10.0 * np.log10(self.psd)
        return np.maximum(out, floor_db)

    def to_csv_rows(self, floor_db: float = -200.0):
        """Long-format rows (seed_nm, idler_nm, wavelength_nm, rel_psd_db)."""
        db = self.psd_db(floor_db)
        for i, (s, idl) in enumerate(zip(self.seed_wavelengths, self.idler_wavelengths)):
            for wl, v in zip(self.wavelengths, db[i]):
                yield s * 1e9, idl * 1e9, wl * 1e9, v


def _line(wavelengths, center, fwhm):
    sigma = fwhm / (2.0 * math.sqrt(2.0 * math.log(2.0)))
    return np.exp(-0.5 * ((wavelengths - center) / sigma) ** 2)


def stimulated_fwm_map(wg: WaveguideSpec, pump: SampledPulse, seed_wavelengths, coupler: ChannelSpec, *,
                       seed_power: float = 1e-3, wavelengths=None, resolution: float = 0.5e-9) -> FwmMap:
    """Output spectra for a CW seed swept on one side of a pulsed pump.

    Each spectrum holds three lines of width ``resolution`` (the analyser
    resolution bandwidth): pump, seed, and the idler at 2 w_p - w_s with
    power seed * (gamma P L_eff)^2 sinc^2(dk L/2). All lines pass the
    grating coupler on the way in and on the way out; the idler is generated
    from coupled-in pump and seed light. Powers are pulse-averaged.
    """
    lam_p = pump.carrier_wavelength
    seeds = np.asarray(seed_wavelengths, dtype=float)
    if seeds.ndim != 1 or seeds.size == 0:
        raise ValueError("seed_wavelengths must be a non-empty 1-D sequence")
    if np.any(np.isclose(seeds, lam_p, rtol=0, atol=1e-13)):
        raise ValueError("a seed at the pump wavelength is degenerate")
    side = np.sign(seeds - lam_p)
    if np.any(side != side[0]):
        raise ValueError("seed wavelengths must lie on one side of the pump")

    w_p = angular_frequency(lam_p)
    w_s = angular_frequency(seeds)
    w_i = idler_frequency(w_p, w_s)
    lam_i = wavelength_from_omega(w_i)
    if wavelengths is None:
        lo = min(seeds.min(), lam_i.min()) - 10e-9
        hi = max(seeds.max(), lam_i.max()) + 10e-9
        wavelengths = np.arange(lo, hi, resolution / 5.0)
    wavelengths = np.asarray(wavelengths, dtype=float)

    p_peak = pump.peak_power
    duty = pump.energy * pump.rep_rate / p_peak if p_peak > 0 else 0.0
    gamma = wg.gamma(lam_p)
    dk = total_mismatch(linear_mismatch(wg.beta2, w_s - w_p), gamma, p_peak)
    # on-chip peak pump power sets the gain; p_peak is taken as the in-guide value
    eff = conversion_efficiency(gamma, p_peak, wg.l_eff, dk, wg.length)

    t_p = db_to_linear(coupler.coupler_db(lam_p))
    t_s = db_to_linear(coupler.coupler_db(seeds))
    t_i = db_to_linear(coupler.coupler_db(lam_i))
    pump_out = p_peak * duty * math.exp(-wg.alpha_lin * wg.length) * t_p
    seed_out = seed_power * math.exp(-wg.alpha_lin * wg.length) * t_s * t_s
    idler_out = seed_power * t_s * eff * duty * math.exp(-wg.alpha_lin * wg.length) * t_i

    pump_shape = _line(wavelengths, lam_p, max(resolution, _pump_bandwidth(pump)))
    psd = np.empty((seeds.size, wavelengths.size))
    for k in range(seeds.size):
        row = (pump_out * pump_shape
               + seed_out[k] * _line(wavelengths, seeds[k], resolution)
               + idler_out[k] * _line(wavelengths, lam_i[k], resolution))
        peak = row.max()
        psd[k] = row / peak if peak > 0 else row
    return FwmMap(wavelengths, seeds, lam_i, psd, idler_out / seed_out)


def _pump_bandwidth(pump: SampledPulse) -> float:
    """Spectral FWHM of the pump in wavelength units."""
    spec = np.fft.fftshift(pump.spectrum())
    if not spec.max() > 0:
        return 0.0
    w = np.fft.fftshift(pump.omega)
    above = w[spec >= 0.5 * spec.max()]
    dw = above.max() - above.min() + (w[1] - w[0])
    return pump.carrier_wavelength**2 * dw / (2.0 * math.pi * C)
