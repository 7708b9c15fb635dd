"""Gerchberg-Saxton retrieval of the temporal phase of an SPM-broadened pulse, and n2 extraction."""

from __future__ import annotations

import logging
import math
import warnings
from dataclasses import dataclass, field

import numpy as np

from . import fitters
from .fwm import n2_from_gamma
from .physmodel import C, SampledPulse, TimeGrid, WaveguideSpec, angular_frequency

logger = logging.getLogger(__name__)

DEFAULT_TOL = 1e-6
DEFAULT_MAX_ITER = 500
FIT_THRESHOLD = 0.05


@dataclass
class RetrievalProblem:
    """Amplitude constraints for one pulse.

    ``spectrum_psd`` is in numpy FFT order on the frequency grid conjugate to
    ``temporal_envelope`` (centred time grid with step ``dt``). The PSD scale
    is arbitrary; it is renormalised to the envelope energy.
    """

    spectrum_psd: np.ndarray
    temporal_envelope: np.ndarray
    dt: float
    max_iter: int = DEFAULT_MAX_ITER
    tol: float = DEFAULT_TOL
    initial_phase: np.ndarray | None = None

    def __post_init__(self):
        self.spectrum_psd = np.asarray(self.spectrum_psd, dtype=float)
        self.temporal_envelope = np.asarray(self.temporal_envelope, dtype=float)
        if self.spectrum_psd.shape != self.temporal_envelope.shape:
            raise ValueError("spectrum and envelope must have the same FFT size")
        TimeGrid(self.temporal_envelope.size, self.dt)
        if np.any(self.spectrum_psd < 0) or np.any(self.temporal_envelope < 0):
            raise ValueError("spectrum and envelope must be non-negative")
        if not self.tol > 0:
            raise ValueError("tol must be positive")

    @property
    def grid(self) -> TimeGrid:
        return TimeGrid(self.temporal_envelope.size, self.dt)

    @classmethod
    def from_pulse(cls, pulse: SampledPulse, envelope: np.ndarray | None = None, **kw) -> "RetrievalProblem":
        env = np.abs(pulse.envelope) if envelope is None else envelope
        return cls(pulse.spectrum(), env, pulse.dt, **kw)


@dataclass
class RetrievalResult:
    temporal_phase: np.ndarray
    phi_nl: float
    phi_nl_err: float
    iterations: int
    residual: float
    converged: bool
    residual_history: list = field(default_factory=list, repr=False)


def spectral_residual(envelope, phase, target_amplitude) -> float:
    """RMS mismatch between |FFT(envelope e^{i phase})| and the target, relative to the target."""
    amp = np.abs(np.fft.fft(envelope * np.exp(1j * phase)))
    return float(np.linalg.norm(amp - target_amplitude) / np.linalg.norm(target_amplitude))


def moment_phase_estimate(envelope, psd, dt) -> float:
    """Peak SPM phase implied by the spectral second moment, for phase = phi * (e/e_max)^2.

    For a(t) = e(t) exp(i phi e^2) the spectral variance is
    [int e'^2 + 4 phi^2 int e^4 e'^2] / int e^2, so phi follows in closed form.
    Both spectral moments use the same discrete transform, which makes the
    estimate exactly zero for a transform-limited spectrum.
    """
    e = envelope / envelope.max()
    n = e.size
    w = 2.0 * math.pi * np.fft.fftfreq(n, dt)

    def variance(p):
        p = p / p.sum()
        m = np.sum(w * p)
        return np.sum((w - m) ** 2 * p)

    tl = np.abs(np.fft.fft(e)) ** 2
    excess = (variance(psd) - variance(tl)) * np.sum(e**2)
    de = np.gradient(e, dt)
    denom = 4.0 * np.sum(e**4 * de**2)
    if excess <= 0 or denom <= 0:
        return 0.0
    return math.sqrt(excess / denom)


def gerchberg_saxton(problem: RetrievalProblem) -> RetrievalResult:
    """Alternate between the measured temporal and spectral amplitudes until the residual settles.

    Starts from an SPM-shaped phase whose amplitude comes from
    :func:`moment_phase_estimate`. A real, even start (such as zero phase)
    cannot leave the real subspace for a symmetric spectrum, and stagnates.
    The returned phase is unwrapped, zero at the envelope peak, and chosen
    from the time-reversal pair so that its SPM amplitude is positive.
    """
    env = problem.temporal_envelope
    psd = problem.spectrum_psd
    n = env.size
    e_time = n * float(np.sum(env**2))
    e_freq = float(np.sum(psd))
    if e_time <= 0 or e_freq <= 0:
        raise ValueError("envelope and spectrum must carry energy")
    if abs(e_freq / e_time - 1.0) > 0.2:
        warnings.warn(f"spectrum and envelope energies differ by a factor {e_freq / e_time:.3g}; "
                      "the spectrum is renormalised", RuntimeWarning, stacklevel=2)
    target = np.sqrt(psd * (e_time / e_freq))

    if problem.initial_phase is not None:
        phase = np.asarray(problem.initial_phase, dtype=float).copy()
    else:
        phase = moment_phase_estimate(env, psd, problem.dt) * (env / env.max()) ** 2

    history = []
    converged = False
    it = 0
    for it in range(1, problem.max_iter + 1):
        field_f = np.fft.fft(env * np.exp(1j * phase))
        res = float(np.linalg.norm(np.abs(field_f) - target) / np.linalg.norm(target))
        history.append(res)
        if res < 1e-14 or (len(history) > 1 and abs(history[-2] - res) < problem.tol):
            converged = True
            break
        phase = np.angle(np.fft.ifft(target * np.exp(1j * np.angle(field_f))))

    residual = spectral_residual(env, phase, target)
    phase = _reference(phase, env)
    phi, err = fit_sech_phase(phase, env)
    if phi < 0:
        # time-reversed conjugate a*(-t): same spectral amplitude, opposite chirp
        phase = _reference(-np.roll(phase[::-1], 1), env)
        phi, err = fit_sech_phase(phase, env)
    if not converged:
        logger.info("Gerchberg-Saxton stopped at max_iter=%d with residual %.3g", problem.max_iter, residual)
    return RetrievalResult(phase, phi, err, it, residual, converged, history)


def _reference(phase, env):
    ph = np.unwrap(phase)
    return ph - ph[int(np.argmax(env))]


def fit_sech_phase(temporal_phase, envelope, threshold: float = FIT_THRESHOLD) -> tuple[float, float]:
    """Fit phase = phi_nl * sech^2(t/tau0) + const where the envelope exceeds ``threshold`` of its peak.

    The sech^2 shape is taken from the envelope itself, (e/e_max)^2, so no
    pulse width is fitted. Returns (phi_nl, standard error).
    """
    phase = np.asarray(temporal_phase, dtype=float)
    env = np.asarray(envelope, dtype=float)
    if not np.any(phase):
        return 0.0, 0.0
    mask = env > threshold * env.max()
    shape = (env[mask] / env.max()) ** 2
    res = fitters.least_squares("line", shape, phase[mask], p0=fitters.initial_guess("line", shape, phase[mask]))
    return float(res.params[0]), float(res.param_errs[0])


def spectrum_from_wavelength_table(wavelength, psd_per_wavelength, grid: TimeGrid,
                                   carrier_wavelength: float) -> np.ndarray:
    """Resample an analyser spectrum (per unit wavelength) onto the FFT frequency grid of ``grid``.

    The density is converted per unit angular frequency (|d lambda / d omega| =
    lambda^2 / 2 pi c) and set to zero outside the measured span.
    """
    wl = np.asarray(wavelength, dtype=float)
    s = np.asarray(psd_per_wavelength, dtype=float)
    order = np.argsort(wl)
    wl, s = wl[order], s[order]
    domega = angular_frequency(wl) - angular_frequency(carrier_wavelength)
    dens = np.clip(s, 0.0, None) * wl**2 / (2.0 * math.pi * C)
    # omega decreases with wavelength: reverse for interpolation
    w_grid = grid.omega
    out = np.interp(w_grid, domega[::-1], dens[::-1], left=0.0, right=0.0)
    return out


@dataclass
class N2Estimate:
    n2: float
    n2_err: float
    gamma: float
    gamma_err: float
    curved: bool
    quadratic: float
    quadratic_err: float
    n2_fc: float | None = None
    n2_fc_err: float | None = None


def effective_power_length(powers, wg: WaveguideSpec, tpa_correction: bool = True) -> np.ndarray:
    """Integral of the peak power along the guide, int P(z) dz.

    With linear loss only this is P L_eff; with TPA it becomes
    ln(1 + alpha_tpa P L_eff) / alpha_tpa.
    """
    p = np.asarray(powers, dtype=float)
    x = p * wg.l_eff
    if tpa_correction and wg.alpha_tpa > 0:
        return np.log1p(wg.alpha_tpa * x) / wg.alpha_tpa
    return x


def extract_n2(powers, phi_nl, wg: WaveguideSpec, wavelength: float, *, phi_err=None,
               tpa_correction: bool = True, fc_correction: bool = False) -> N2Estimate:
    """Fit phi_nl = gamma * int P dz and convert gamma to n2 = gamma lambda A_eff / 2 pi.

    With ``fc_correction`` an extra term proportional to P^2 absorbs
    free-carrier phase; both estimates are returned.
    """
    p = np.asarray(powers, dtype=float)
    phi = np.asarray(phi_nl, dtype=float)
    if p.size < 4:
        raise ValueError("need at least 4 (power, phase) points")
    x = effective_power_length(p, wg, tpa_correction)
    weights = None if phi_err is None else 1.0 / np.asarray(phi_err, dtype=float)
    lin = fitters.least_squares("proportional", x, phi, p0=[0.0], weights=weights)
    gamma, gamma_err = float(lin.params[0]), float(lin.param_errs[0])

    X = np.stack([x, x**2], axis=1)
    q, cov, chi2 = fitters.linear_fit(X, phi, weights)
    if weights is None:
        cov = cov * chi2 / max(p.size - 2, 1)
    q_err = math.sqrt(max(cov[1, 1], 0.0))
    curved = abs(q[1]) > 3.0 * q_err and abs(q[1]) * x.max() > 1e-12 * max(abs(q[0]), 1e-300)
    if curved:
        logger.info("phase is curved in power (quadratic term %.3g +- %.3g)", q[1], q_err)

    est = N2Estimate(
        n2=n2_from_gamma(gamma, wg.a_eff, wavelength),
        n2_err=n2_from_gamma(gamma_err, wg.a_eff, wavelength),
        gamma=gamma, gamma_err=gamma_err, curved=bool(curved),
        quadratic=float(q[1]), quadratic_err=q_err,
    )
    if fc_correction:
        Xf = np.stack([x, p**2], axis=1)
        qf, covf, chi2f = fitters.linear_fit(Xf, phi, weights)
        if weights is None:
            covf = covf * chi2f / max(p.size - 2, 1)
        est.n2_fc = n2_from_gamma(float(qf[0]), wg.a_eff, wavelength)
        est.n2_fc_err = n2_from_gamma(math.sqrt(max(covf[0, 0], 0.0)), wg.a_eff, wavelength)
    return est
