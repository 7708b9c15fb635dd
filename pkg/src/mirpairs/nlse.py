"""Symmetric split-step propagation of a pump pulse through a lossy Kerr waveguide.

The envelope obeys

    dA/dz = -(alpha/2) A - i (beta2/2) d2A/dt2 + (beta3/6) d3A/dt3
            + i gamma |A|^2 A - (alpha_tpa/2) |A|^2 A  [+ free-carrier terms]

The Kerr + TPA substep is integrated exactly pointwise:
|A|^2 -> |A|^2 / (1 + alpha_tpa |A|^2 h), phase += (gamma/alpha_tpa) ln(1 + alpha_tpa |A|^2 h).
"""

from __future__ import annotations

import logging
import math
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field

import numpy as np

from .fitters import linear_fit
from .physmodel import HBAR, SampledPulse, WaveguideSpec

logger = logging.getLogger(__name__)

#: int sech^4 / int sech^2: the energy-weighted TPA strength of a sech^2 pulse
#: relative to a flat-top pulse of the same peak power (first order in alpha_tpa).
SECH2_SHAPE_FACTOR = 2.0 / 3.0

ENERGY_TOLERANCE = 1e-3
MIN_STEPS = 64


class NonConvergenceError(RuntimeError):
    def __init__(self, message, result=None, energy_change=None):
        super().__init__(message)
        self.result = result
        self.energy_change = energy_change


@dataclass(frozen=True)
class FreeCarrierOptions:
    """Free-carrier absorption/dispersion driven by TPA-generated carriers.

    ``fca_cross_section`` (m^2) sets alpha_fc = sigma N; ``fcd_coefficient``
    (m^3) sets the index change dn = -k_c N. Carriers accumulate within one
    pulse and do not recombine on picosecond scales.
    """

    fca_cross_section: float = 1.45e-21 * (2.0715 / 1.55) ** 2
    fcd_coefficient: float = 1.35e-27 * (2.0715 / 1.55) ** 2


@dataclass
class PropagationResult:
    pulse_out: SampledPulse
    transmission_eta: float
    phi_nl_max: float
    phi_total_max: float = 0.0
    carrier_density_peak: float = 0.0
    steps: int = 0
    energy_in: float = 0.0
    energy_out: float = 0.0
    phase_profile: np.ndarray = field(default=None, repr=False)


def _nonlinear_step(a, gamma, alpha_tpa, h):
    p = np.abs(a) ** 2
    x = alpha_tpa * p * h
    ratio = np.ones_like(x)
    nz = x > 0
    ratio[nz] = np.log1p(x[nz]) / x[nz]
    phase = gamma * p * h * ratio
    return a * np.exp(1j * phase) / np.sqrt(1.0 + x), phase


def propagate(pulse: SampledPulse, wg: WaveguideSpec, steps: int = 256,
              fc: FreeCarrierOptions | None = None, *, check_convergence: bool = False) -> PropagationResult:
    """Propagate ``pulse`` (in-guide envelope at z = 0) to the end of ``wg``.

    With ``check_convergence`` the run is repeated at twice the step count and
    a relative energy change above 0.1 % raises NonConvergenceError carrying
    the finer result. The finer result is returned on success.
    """
    if steps < MIN_STEPS:
        raise ValueError(f"steps must be >= {MIN_STEPS}")
    coarse = _run(pulse, wg, steps, fc)
    if not check_convergence:
        return coarse
    fine = _run(pulse, wg, 2 * steps, fc)
    ref = max(fine.energy_out, np.finfo(float).tiny)
    change = abs(fine.energy_out - coarse.energy_out) / ref
    if change > ENERGY_TOLERANCE:
        raise NonConvergenceError(
            f"energy changed by {change:.2e} between {steps} and {2 * steps} steps", fine, change)
    return fine


def _run(pulse, wg, steps, fc):
    n = pulse.n_samples
    dt = pulse.dt
    lam = pulse.carrier_wavelength
    gamma = wg.gamma(lam)
    w = pulse.omega
    h = wg.length / steps
    lin_exp = (0.5j * wg.beta2 * w**2 - 1j * wg.beta3 * w**3 / 6.0 - 0.5 * wg.alpha_lin)
    half = np.exp(lin_exp * 0.5 * h)
    full = half * half

    a = np.array(pulse.envelope, dtype=complex)
    phi_kerr = np.zeros(n)
    phi_fc = np.zeros(n)
    n_peak = 0.0
    if fc is not None:
        k0 = 2.0 * math.pi / lam
        gen = wg.alpha_tpa / (2.0 * HBAR * pulse.omega0 * wg.a_eff)

    a = np.fft.ifft(np.fft.fft(a) * half)
    for k in range(steps):
        a, dphi = _nonlinear_step(a, gamma, wg.alpha_tpa, h)
        phi_kerr += dphi
        if fc is not None and wg.alpha_tpa > 0:
            carriers = np.cumsum(gen * np.abs(a) ** 4) * dt
            n_peak = max(n_peak, float(carriers.max()))
            dphi_fc = -k0 * fc.fcd_coefficient * carriers * h
            a = a * np.exp(-0.5 * fc.fca_cross_section * carriers * h + 1j * dphi_fc)
            phi_fc += dphi_fc
        a = np.fft.ifft(np.fft.fft(a) * (full if k < steps - 1 else half))

    e_in = pulse.energy
    out = pulse.with_envelope(a)
    e_out = out.energy
    if e_in > 0:
        eta = e_out / (e_in * math.exp(-wg.alpha_lin * wg.length))
    else:
        eta = 1.0
    total = phi_kerr + phi_fc
    return PropagationResult(
        pulse_out=out,
        transmission_eta=float(eta),
        phi_nl_max=float(phi_kerr.max()),
        phi_total_max=float(total[np.argmax(np.abs(total))]),
        carrier_density_peak=n_peak,
        steps=steps,
        energy_in=e_in,
        energy_out=e_out,
        phase_profile=phi_kerr,
    )


@dataclass
class SweepRow:
    peak_power: float
    eta: float
    phi_nl: float
    phi_total: float
    converged: bool = True
    error: str = ""
    result: PropagationResult | None = field(default=None, repr=False)


def scale_pulse(template: SampledPulse, peak_power: float) -> SampledPulse:
    p0 = template.peak_power
    if p0 <= 0:
        raise ValueError("template pulse must have positive peak power")
    return template.with_envelope(template.envelope * math.sqrt(peak_power / p0))


def power_sweep(wg: WaveguideSpec, pulse_template: SampledPulse, powers, *, steps: int = 256,
                fc: FreeCarrierOptions | None = None, check_convergence: bool = False,
                threads: int = 1) -> list[SweepRow]:
    """One propagation per peak power; eta renormalised to the lowest-power row."""
    powers = [float(p) for p in powers]
    if any(b < a for a, b in zip(powers, powers[1:])):
        raise ValueError("powers must be sorted ascending")

    def one(p):
        try:
            res = propagate(scale_pulse(pulse_template, p), wg, steps, fc, check_convergence=check_convergence)
            return SweepRow(p, res.transmission_eta, res.phi_nl_max, res.phi_total_max, True, "", res)
        except NonConvergenceError as exc:
            res = exc.result
            return SweepRow(p, res.transmission_eta, res.phi_nl_max, res.phi_total_max, False, str(exc), res)

    if threads > 1:
        with ThreadPoolExecutor(threads) as pool:
            rows = list(pool.map(one, powers))
    else:
        rows = [one(p) for p in powers]
    ref = rows[0].eta if rows else 1.0
    for r in rows:
        r.eta = r.eta / ref if ref > 0 else r.eta
    return rows


@dataclass
class TpaFit:
    alpha_tpa: float
    alpha_tpa_err: float
    slope: float
    intercept: float
    l_eff: float
    shape_factor: float


def inverse_transmission_fit(powers, transmissions, l_eff: float, *,
                             shape_factor: float = SECH2_SHAPE_FACTOR, weights=None) -> TpaFit:
    """Estimate alpha_tpa from the slope of 1/eta against peak power.

    1/eta = c0 (1 + kappa alpha_tpa L_eff P) to first order, so alpha_tpa =
    (c1 / c0) / (kappa L_eff); dividing by the intercept makes the estimate
    blind to any global transmission scale.
    """
    p = np.asarray(powers, dtype=float)
    eta = np.asarray(transmissions, dtype=float)
    if p.size < 5:
        raise ValueError("need at least 5 power points")
    if p.min() <= 0 or p.max() / p.min() < 5.0:
        raise ValueError("powers must span at least a factor of 5")
    if np.any(eta <= 0):
        raise ValueError("transmissions must be positive")
    order = np.argsort(p)
    p, eta = p[order], eta[order]
    if np.any(np.diff(eta) > 1e-9 * eta[:-1]):
        raise ValueError("transmission must not increase with power")
    inv = 1.0 / eta
    X = np.stack([np.ones_like(p), p], axis=1)
    (c0, c1), cov, chi2 = linear_fit(X, inv, weights)
    dof = max(p.size - 2, 1)
    if weights is None:
        cov = cov * chi2 / dof
    ratio = c1 / c0
    # d(ratio) = dc1/c0 - c1 dc0/c0^2
    g = np.array([-c1 / c0**2, 1.0 / c0])
    ratio_err = math.sqrt(max(float(g @ cov @ g), 0.0))
    scale = shape_factor * l_eff
    return TpaFit(ratio / scale, ratio_err / scale, float(c1), float(c0), l_eff, shape_factor)
