import dataclasses
import math

import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from mirpairs import nlse
from mirpairs.physmodel import SECH_FWHM_FACTOR, TimeGrid, WaveguideSpec, sech_pulse

FWHM = 4.82e-12


def pulse(power, n=1024):
    return sech_pulse(power, FWHM, TimeGrid.for_pulse(FWHM, n))


def guide(**kw):
    base = dict(length=17.5e-3, a_eff=0.228e-12, n2=0.0)
    base.update(kw)
    return WaveguideSpec(**base)


def n2_for_gamma(gamma, a_eff=0.228e-12, wl=2.0715e-6):
    return gamma * wl * a_eff / (2 * math.pi)


def test_identity_evolution():
    p = pulse(1.0)
    res = nlse.propagate(p, guide())
    np.testing.assert_allclose(res.pulse_out.envelope, p.envelope, rtol=0, atol=1e-12 * np.abs(p.envelope).max())
    assert res.transmission_eta == pytest.approx(1.0, abs=1e-12)
    assert res.phi_nl_max == 0.0


def test_spm_closed_form():
    p = pulse(1.0, 4096)
    wg = guide(n2=n2_for_gamma(203.0))
    res = nlse.propagate(p, wg)
    assert res.phi_nl_max == pytest.approx(203.0 * 1.0 * 17.5e-3, rel=1e-12)
    assert res.phi_nl_max == pytest.approx(3.55, abs=0.01)
    a0 = p.envelope
    exact = a0 * np.exp(1j * 203.0 * np.abs(a0) ** 2 * 17.5e-3)
    s_num = np.abs(np.fft.fft(res.pulse_out.envelope))
    s_ref = np.abs(np.fft.fft(exact))
    rms = np.sqrt(np.mean((s_num - s_ref) ** 2)) / np.sqrt(np.mean(s_ref**2))
    assert rms < 1e-6
    assert res.energy_out == pytest.approx(res.energy_in, rel=1e-6)


@given(st.floats(-5.0, 5.0), st.floats(0.0, 400.0), st.floats(0.01, 5.0))
def test_energy_conserved_without_losses(beta2_ps, gamma, power):
    wg = guide(n2=n2_for_gamma(gamma), beta2=beta2_ps * 1e-24)
    res = nlse.propagate(pulse(power, 512), wg, steps=64)
    assert res.energy_out == pytest.approx(res.energy_in, rel=1e-6)


@given(st.floats(-50.0, 50.0))
def test_dispersion_preserves_spectrum(beta2_ps):
    p = pulse(1.0, 512)
    res = nlse.propagate(p, guide(beta2=beta2_ps * 1e-24), steps=64)
    s0 = np.abs(np.fft.fft(p.envelope))
    s1 = np.abs(np.fft.fft(res.pulse_out.envelope))
    np.testing.assert_allclose(s1, s0, rtol=0, atol=1e-12 * s0.max())


def test_tpa_pointwise_solution():
    p = pulse(20.0)
    wg = guide(alpha_tpa=24.4)
    res = nlse.propagate(p, wg)
    p0 = p.power
    expected = p0 / (1 + 24.4 * p0 * wg.length)
    np.testing.assert_allclose(res.pulse_out.power, expected, rtol=1e-6, atol=1e-12)


def test_linear_loss_baseline_normalisation():
    wg = guide(alpha_lin=73.7)
    res = nlse.propagate(pulse(0.5), wg)
    assert res.transmission_eta == pytest.approx(1.0, abs=1e-9)


def test_eta_decreases_with_power(device):
    powers = np.linspace(0.5, 25.0, 12)
    rows = nlse.power_sweep(device, pulse(1.0), powers, steps=128)
    eta = np.array([r.eta for r in rows])
    assert rows[0].eta == 1.0
    assert np.all(np.diff(eta) < 0)
    assert np.all(eta <= 1 + 1e-9)
    assert np.all(np.diff([r.phi_nl for r in rows]) > 0)


def test_phase_below_lossless_bound(device):
    res = nlse.propagate(pulse(10.0), device)
    bound = device.gamma(2.0715e-6) * 10.0 * device.length
    assert bound == pytest.approx(35.5, abs=0.2)
    assert 0 < res.phi_nl_max < bound


def test_step_doubling_converges(device):
    p = pulse(1.0, 4096)
    a = nlse.propagate(p, device, steps=256).pulse_out.envelope
    b = nlse.propagate(p, device, steps=512).pulse_out.envelope
    assert np.sqrt(np.mean(np.abs(a - b) ** 2) / np.mean(np.abs(b) ** 2)) < 5e-4


def test_convergence_check_passes_and_fails(device):
    res = nlse.propagate(pulse(1.0), device, steps=64, check_convergence=True)
    assert res.steps == 128
    # soliton-like compression with TPA: far too few steps for the dynamics
    strong = dataclasses.replace(device, n2=10 * device.n2, beta2=-1e-22, alpha_lin=0.0)
    with pytest.raises(nlse.NonConvergenceError) as info:
        nlse.propagate(pulse(25.0), strong, steps=64, check_convergence=True)
    assert info.value.result is not None
    assert info.value.energy_change > nlse.ENERGY_TOLERANCE


def test_too_few_steps_rejected(device):
    with pytest.raises(ValueError):
        nlse.propagate(pulse(1.0), device, steps=10)


def test_sweep_requires_sorted_powers(device):
    with pytest.raises(ValueError):
        nlse.power_sweep(device, pulse(1.0), [1.0, 0.5])


def test_sweep_thread_independent(device):
    a = nlse.power_sweep(device, pulse(1.0), [0.2, 0.5, 1.0], steps=64, threads=1)
    b = nlse.power_sweep(device, pulse(1.0), [0.2, 0.5, 1.0], steps=64, threads=3)
    assert [(r.eta, r.phi_nl) for r in a] == [(r.eta, r.phi_nl) for r in b]


def test_free_carriers_add_loss_and_negative_phase(device):
    p = pulse(20.0)
    plain = nlse.propagate(p, device)
    fc = nlse.propagate(p, device, fc=nlse.FreeCarrierOptions())
    assert fc.carrier_density_peak > 0
    assert fc.transmission_eta < plain.transmission_eta
    assert fc.phi_total_max < plain.phi_total_max


def test_shape_factor_from_sech_integrals():
    # energy-weighted TPA strength of sech^2 relative to a flat top: int sech^4 / int sech^2
    x = np.linspace(-40, 40, 400001)
    s2 = 1 / np.cosh(x) ** 2
    assert np.trapezoid(s2**2, x) / np.trapezoid(s2, x) == pytest.approx(nlse.SECH2_SHAPE_FACTOR, rel=1e-8)


def test_shape_factor_from_weak_tpa_propagation():
    # first-order energy loss of a sech^2 pulse: dE/E = kappa alpha_tpa P0 L
    wg = guide(alpha_tpa=1.0)
    res = nlse.propagate(pulse(1e-3), wg)
    loss = 1 - res.energy_out / res.energy_in
    assert loss / (1.0 * 1e-3 * wg.length) == pytest.approx(2 / 3, rel=1e-4)


def _sweep_data(wg, powers):
    rows = nlse.power_sweep(wg, pulse(1.0), powers, steps=128)
    return [r.eta for r in rows]


def test_inverse_transmission_recovers_alpha(device):
    powers = np.linspace(0.2, 1.0, 5)
    eta = _sweep_data(device, powers)
    fit = nlse.inverse_transmission_fit(powers, eta, device.l_eff)
    assert fit.alpha_tpa == pytest.approx(24.4, rel=0.10)
    assert fit.alpha_tpa_err > 0


def test_inverse_transmission_zero_alpha(device):
    wg = dataclasses.replace(device, alpha_tpa=0.0)
    powers = np.linspace(0.2, 1.0, 5)
    eta = _sweep_data(wg, powers)
    fit = nlse.inverse_transmission_fit(powers, eta, wg.l_eff)
    assert abs(fit.alpha_tpa) <= max(3 * fit.alpha_tpa_err, 1e-9)


@given(st.floats(0.05, 20.0))
def test_inverse_transmission_scale_invariant(scale):
    powers = np.array([0.2, 0.4, 0.6, 0.8, 1.0])
    eta = 1 / (1 + 0.2 * powers + 0.01 * powers**2)
    a = nlse.inverse_transmission_fit(powers, eta, 0.01).alpha_tpa
    b = nlse.inverse_transmission_fit(powers, scale * eta, 0.01).alpha_tpa
    assert b == pytest.approx(a, rel=1e-9)


def test_inverse_transmission_rejections():
    p = [0.2, 0.4, 0.6, 0.8, 1.0]
    with pytest.raises(ValueError):
        nlse.inverse_transmission_fit(p[:4], [1, 0.9, 0.8, 0.7], 0.01)
    with pytest.raises(ValueError):
        nlse.inverse_transmission_fit([0.5, 0.6, 0.7, 0.8, 0.9], [1, 0.9, 0.8, 0.7, 0.6], 0.01)
    with pytest.raises(ValueError):
        nlse.inverse_transmission_fit(p, [1, 0.9, 0.95, 0.7, 0.6], 0.01)
    with pytest.raises(ValueError):
        nlse.inverse_transmission_fit(p, [1, 0.9, 0.8, 0.7, -0.1], 0.01)


def test_tau0_definition():
    assert SECH_FWHM_FACTOR == pytest.approx(1.7627, abs=1e-4)
