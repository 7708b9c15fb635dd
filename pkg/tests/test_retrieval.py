import dataclasses
import math
import warnings

import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from mirpairs import retrieval
from mirpairs.fwm import nonlinear_parameter
from mirpairs.physmodel import TimeGrid, angular_frequency, sech_pulse

FWHM = 4.82e-12


def spm_problem(phi, n=2048, fwhm=FWHM, **kw):
    p = sech_pulse(1.0, fwhm, TimeGrid.for_pulse(fwhm, n))
    env = np.abs(p.envelope)
    field = env * np.exp(1j * phi * env**2)
    return retrieval.RetrievalProblem(np.abs(np.fft.fft(field)) ** 2, env, p.dt, **kw), env


def test_transform_limited_gives_flat_phase():
    prob, env = spm_problem(0.0)
    res = retrieval.gerchberg_saxton(prob)
    assert np.max(np.abs(res.temporal_phase)) < 0.01
    assert res.phi_nl == pytest.approx(0.0, abs=0.01)


def test_spm_phase_recovered():
    prob, env = spm_problem(2.0)
    res = retrieval.gerchberg_saxton(prob)
    assert res.converged
    assert res.phi_nl == pytest.approx(2.0, rel=0.05)
    assert res.iterations <= prob.max_iter
    assert res.residual >= 0


def test_spectral_scaling_invariance():
    prob, env = spm_problem(2.0)
    base = retrieval.gerchberg_saxton(prob).phi_nl
    scaled = dataclasses.replace(prob, spectrum_psd=prob.spectrum_psd * 100.0)  # amplitude x10
    with pytest.warns(RuntimeWarning, match="renormalised"):
        res = retrieval.gerchberg_saxton(scaled)
    assert res.phi_nl == pytest.approx(base, rel=0.01)


def test_time_reversed_start_still_gives_positive_chirp():
    prob, env = spm_problem(1.5)
    prob.initial_phase = -1.5 * env**2
    res = retrieval.gerchberg_saxton(prob)
    assert res.phi_nl == pytest.approx(1.5, rel=0.05)


def test_phase_referenced_at_peak():
    prob, env = spm_problem(1.0)
    res = retrieval.gerchberg_saxton(prob)
    assert res.temporal_phase[np.argmax(env)] == 0.0


def test_resimulated_spectrum_matches():
    prob, env = spm_problem(2.5, tol=1e-9, max_iter=2000)
    res = retrieval.gerchberg_saxton(prob)
    assert res.residual <= 1e-4


@pytest.mark.parametrize("case", range(20))
def test_residual_monotone(case):
    rng = np.random.default_rng(case)
    phi = rng.uniform(0.3, 4.0)
    fwhm = rng.uniform(3e-12, 6e-12)
    prob, _ = spm_problem(phi, n=1024, fwhm=fwhm, max_iter=150)
    h = np.array(retrieval.gerchberg_saxton(prob).residual_history)
    assert np.all(np.diff(h) <= 1e-12 * h[:-1] + 1e-15)


def test_problem_validation():
    with pytest.raises(ValueError):
        retrieval.RetrievalProblem(np.ones(512), np.ones(1024), 1e-13)
    with pytest.raises(ValueError):
        retrieval.RetrievalProblem(-np.ones(512), np.ones(512), 1e-13)
    with pytest.raises(ValueError):
        retrieval.RetrievalProblem(np.ones(512), np.ones(512), 1e-13, tol=0.0)


def test_moment_estimate_zero_for_transform_limit():
    prob, env = spm_problem(0.0)
    assert retrieval.moment_phase_estimate(env, prob.spectrum_psd, prob.dt) == 0.0


def test_moment_estimate_close_to_truth():
    prob, env = spm_problem(2.0)
    assert retrieval.moment_phase_estimate(env, prob.spectrum_psd, prob.dt) == pytest.approx(2.0, rel=0.05)


def sech_shape(n=1025):
    t = np.linspace(-20, 20, n)
    return 1 / np.cosh(t)


def test_fit_sech_phase_exact():
    env = sech_shape()
    phi, err = retrieval.fit_sech_phase(1.7 * env**2 + 0.3, env)
    assert phi == pytest.approx(1.7, abs=1e-9)


def test_fit_sech_phase_zero():
    assert retrieval.fit_sech_phase(np.zeros(100), sech_shape(101)) == (0.0, 0.0)


def test_fit_sech_phase_noise_coverage():
    env = sech_shape(513)
    rng = np.random.default_rng(5)
    inside = 0
    for _ in range(100):
        phi, err = retrieval.fit_sech_phase(2.0 * env**2 + rng.normal(0, 0.05, env.size), env)
        inside += abs(phi - 2.0) <= 3 * err
    assert inside >= 97


def test_fit_threshold_sensitivity():
    prob, env = spm_problem(2.0)
    res = retrieval.gerchberg_saxton(prob)
    a, _ = retrieval.fit_sech_phase(res.temporal_phase, env, 0.05)
    b, _ = retrieval.fit_sech_phase(res.temporal_phase, env, 0.10)
    assert abs(b - a) / a < 0.02


def test_wavelength_table_round_trip():
    p = sech_pulse(1.0, FWHM, TimeGrid.for_pulse(FWHM, 2048))
    field = np.abs(p.envelope) * np.exp(1j * 2.0 * p.power)
    psd_w = np.abs(np.fft.fft(field)) ** 2
    w = p.omega
    sel = np.abs(w) < 0.5 * np.abs(w).max()
    wl = 2 * math.pi * 2.99792458e8 / (angular_frequency(p.carrier_wavelength) + w[sel])
    # density per unit wavelength
    per_wl = psd_w[sel] * 2 * math.pi * 2.99792458e8 / wl**2
    back = retrieval.spectrum_from_wavelength_table(wl, per_wl, p.grid, p.carrier_wavelength)
    np.testing.assert_allclose(back[sel], psd_w[sel], rtol=1e-6, atol=1e-9 * psd_w.max())


def test_extract_n2_identity(device):
    lam = 2.0715e-6
    gamma = device.gamma(lam)
    powers = np.array([0.2, 0.4, 0.6, 0.8, 1.0])
    phi = gamma * retrieval.effective_power_length(powers, device)
    est = retrieval.extract_n2(powers, phi, device, lam)
    assert est.gamma == pytest.approx(gamma, rel=1e-9)
    assert est.n2 == pytest.approx(device.n2, rel=1e-9)
    assert not est.curved
    assert nonlinear_parameter(est.n2, device.a_eff, lam) == pytest.approx(gamma, rel=1e-9)


def test_extract_n2_zero_gamma(device):
    est = retrieval.extract_n2([0.2, 0.4, 0.6, 0.8], np.zeros(4), device, 2.0715e-6)
    assert abs(est.n2) <= max(3 * est.n2_err, 1e-30)


@given(st.floats(0.01, 2.0))
def test_extract_n2_area_scaling(scale):
    # fixed gamma: the reported n2 scales with the assumed effective area
    from mirpairs.physmodel import WaveguideSpec
    wg = WaveguideSpec(length=0.0175, a_eff=0.228e-12, n2=1.53e-17)
    wg2 = dataclasses.replace(wg, a_eff=wg.a_eff * scale)
    powers = np.array([0.2, 0.4, 0.6, 0.8])
    phi = 200.0 * powers * wg.l_eff
    a = retrieval.extract_n2(powers, phi, wg, 2.0715e-6).n2
    b = retrieval.extract_n2(powers, phi, wg2, 2.0715e-6).n2
    assert b == pytest.approx(a * scale, rel=1e-9)


def test_extract_n2_flags_curvature(device):
    powers = np.linspace(0.1, 1.0, 8)
    x = retrieval.effective_power_length(powers, device)
    est = retrieval.extract_n2(powers, 200 * x + 5e5 * x**2, device, 2.0715e-6)
    assert est.curved


def test_extract_n2_fc_term(device):
    powers = np.linspace(0.1, 1.0, 8)
    x = retrieval.effective_power_length(powers, device)
    est = retrieval.extract_n2(powers, 200 * x - 0.3 * powers**2, device, 2.0715e-6, fc_correction=True)
    assert est.n2_fc == pytest.approx(200 * 2.0715e-6 * device.a_eff / (2 * math.pi), rel=1e-6)
    assert est.n2 < est.n2_fc


def test_extract_n2_needs_points(device):
    with pytest.raises(ValueError):
        retrieval.extract_n2([0.1, 0.2, 0.3], [1, 2, 3], device, 2.0715e-6)


def test_tpa_corrected_power_length(device):
    p = np.array([1.0])
    plain = retrieval.effective_power_length(p, device, tpa_correction=False)
    corr = retrieval.effective_power_length(p, device)
    assert plain[0] == pytest.approx(device.l_eff)
    assert corr[0] == pytest.approx(math.log1p(24.4 * device.l_eff) / 24.4)
