import math

import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from mirpairs import fwm
from mirpairs.physmodel import ChannelSpec, TimeGrid, WaveguideSpec, angular_frequency, sech_pulse


def test_gamma_reported_device():
    g = fwm.nonlinear_parameter(15.3e-18, 0.228e-12, 2.071e-6)
    assert g == pytest.approx(203.54, rel=1e-3)


def test_tpa_conversion():
    a = fwm.tpa_bulk_to_waveguide(0.557e-11, 0.228e-12)
    assert a == pytest.approx(24.43, rel=1e-3)
    assert fwm.tpa_waveguide_to_bulk(a, 0.228e-12) == pytest.approx(0.557e-11)


def test_gamma_n2_round_trip():
    g = fwm.nonlinear_parameter(15.3e-18, 0.228e-12, 2.071e-6)
    assert fwm.n2_from_gamma(g, 0.228e-12, 2.071e-6) == pytest.approx(15.3e-18)


def test_gamma_rejects_bad_inputs():
    with pytest.raises(ValueError):
        fwm.nonlinear_parameter(1e-17, 0.0, 2e-6)
    with pytest.raises(ValueError):
        fwm.nonlinear_parameter(1e-17, 1e-13, -2e-6)


def test_mismatch_examples():
    assert fwm.linear_mismatch(-1e-24, 2 * math.pi * 1.46e12) == pytest.approx(84.15, rel=1e-3)
    assert fwm.linear_mismatch(-1e-24, 0.0) == 0.0
    assert fwm.total_mismatch(0.0, 203.0, 0.32) == pytest.approx(-129.92, abs=0.01)
    assert fwm.total_mismatch(12.5, 203.0, 0.0) == 12.5
    with pytest.raises(ValueError):
        fwm.total_mismatch(0.0, 203.0, -1.0)


@given(st.floats(-1e-23, -1e-30), st.floats(1e9, 1e14))
def test_anomalous_dispersion_positive_mismatch(beta2, dw):
    assert fwm.linear_mismatch(beta2, dw) > 0


@given(st.floats(0, 1e3), st.floats(0, 10), st.floats(0, 10))
def test_mismatch_linear_in_power(gamma, p1, p2):
    d1 = fwm.total_mismatch(5.0, gamma, p1)
    d2 = fwm.total_mismatch(5.0, gamma, p2)
    assert d2 - d1 == pytest.approx(-2 * gamma * (p2 - p1), abs=1e-9 * max(1.0, gamma * (p1 + p2)))


def test_perfect_match_detuning():
    dw = fwm.perfect_match_detuning(-0.5e-24, 203.0, 1.0)
    assert dw == pytest.approx(2.85e13, rel=2e-3)
    dk = fwm.total_mismatch(fwm.linear_mismatch(-0.5e-24, dw), 203.0, 1.0)
    assert abs(dk) <= 1e-9 * 2 * 203.0
    assert fwm.perfect_match_detuning(-0.5e-24, 203.0, 1e-12) < 1e-4 * dw
    assert fwm.perfect_match_detuning(0.5e-24, 203.5, 1.0) is None
    assert fwm.perfect_match_detuning(0.0, 203.5, 1.0) is None


def test_zero_power_zero_detuning_phase_matched():
    assert fwm.total_mismatch(fwm.linear_mismatch(-1e-24, 0.0), 200.0, 0.0) == 0.0


def test_idler_wavelength():
    assert fwm.idler_wavelength(2.0715e-6, 2.050e-6) == pytest.approx(2.0934e-6, abs=1e-10)
    assert fwm.idler_wavelength(2.0715e-6, 2.0715e-6) == pytest.approx(2.0715e-6)


@given(st.floats(1.95e-6, 2.07e-6))
def test_idler_involution(seed):
    idler = fwm.idler_wavelength(2.0715e-6, seed)
    assert fwm.idler_wavelength(2.0715e-6, idler) == pytest.approx(seed, rel=1e-12)


@given(st.floats(1.9e-6, 2.06e-6))
def test_energy_conservation(seed_wl):
    wp = angular_frequency(2.0715e-6)
    ws = angular_frequency(seed_wl)
    wi = angular_frequency(fwm.idler_wavelength(2.0715e-6, seed_wl))
    assert ws + wi == pytest.approx(2 * wp, rel=1e-12)


def test_rayleigh():
    assert fwm.rayleigh_relative(2.071e-6) == pytest.approx(0.314, abs=5e-4)
    assert fwm.rayleigh_relative(1.55e-6) == 1.0
    assert fwm.rayleigh_relative(3.10e-6) == pytest.approx(0.0625)


@given(st.floats(0.5e-6, 5e-6), st.floats(1e-9, 1e-6))
def test_rayleigh_decreasing(wl, step):
    assert fwm.rayleigh_relative(wl + step) < fwm.rayleigh_relative(wl)


def test_coupler_db():
    ch = ChannelSpec(coupler_peak_db=-7.3, coupler_center=2.0715e-6, coupler_bw3db=60e-9)
    assert fwm.coupler_transmission(ch, 2.0715e-6) == pytest.approx(-7.3)
    assert fwm.coupler_transmission(ch, 2.0715e-6 + 30e-9) == pytest.approx(-10.3)
    assert fwm.coupler_transmission(ch, 2.0715e-6 - 30e-9) == pytest.approx(-10.3)


@given(st.floats(-1e-23, 1e-23), st.floats(0, 1e14))
def test_mismatch_even_in_detuning(beta2, dw):
    assert fwm.linear_mismatch(beta2, dw) == fwm.linear_mismatch(beta2, -dw)


def _device(**kw):
    base = dict(length_mm=17.5, a_eff_um2=0.228, n2_m2_per_w=1.53e-17, beta2_ps2_per_m=-0.5,
                loss_db_per_cm=3.2)
    base.update(kw)
    return WaveguideSpec.from_lab_units(**base)


def _pump(power):
    return sech_pulse(power, 4.82e-12, TimeGrid.for_pulse(4.82e-12, 1024))


def test_zero_power_map_has_no_idler():
    seeds = np.linspace(2031.5e-9, 2066.5e-9, 8)
    m = fwm.stimulated_fwm_map(_device(), _pump(0.0), seeds, ChannelSpec())
    assert np.all(m.idler_rel == 0.0)
    db = m.psd_db()
    for k, li in enumerate(m.idler_wavelengths):
        j = np.argmin(np.abs(m.wavelengths - li))
        assert db[k, j] < -100


def test_map_rows_normalised():
    seeds = np.linspace(2031.5e-9, 2066.5e-9, 4)
    m = fwm.stimulated_fwm_map(_device(), _pump(1.0), seeds, ChannelSpec())
    np.testing.assert_allclose(m.psd.max(axis=1), 1.0)
    assert len(list(m.to_csv_rows())) == seeds.size * m.wavelengths.size


def test_map_rejects_seeds_on_both_sides():
    with pytest.raises(ValueError):
        fwm.stimulated_fwm_map(_device(), _pump(1.0), [2.05e-6, 2.09e-6], ChannelSpec())
    with pytest.raises(ValueError):
        fwm.stimulated_fwm_map(_device(), _pump(1.0), [2.0715e-6], ChannelSpec())


def test_phase_matched_idler_beats_first_null():
    wg = _device()
    gamma = wg.gamma(2.0715e-6)
    dk0 = 0.0
    dk_null = 2 * math.pi / wg.length  # |dk L/2| = pi
    e0 = fwm.conversion_efficiency(gamma, 1.0, wg.l_eff, dk0, wg.length)
    e1 = fwm.conversion_efficiency(gamma, 1.0, wg.l_eff, dk_null * 0.999, wg.length)
    assert 10 * math.log10(e0 / e1) >= 20


def test_phase_match_curve_peaks_at_perfect_detuning():
    wg = _device()
    gamma = wg.gamma(2.0715e-6)
    dw = fwm.perfect_match_detuning(wg.beta2, gamma, 1.0)
    pts = fwm.phase_match_curve(wg, 2.0715e-6, 1.0, [0.0, dw])
    assert pts[1].gain_rel == pytest.approx(1.0)
    assert pts[0].gain_rel < 1.0
    assert pts[0].dk_total == pytest.approx(-2 * gamma)


@given(st.floats(0.0, 5.0))
def test_conversion_grows_with_power_at_match(p):
    # at dk = 0 the efficiency is (gamma P L_eff)^2
    e = fwm.conversion_efficiency(200.0, p, 0.01, 0.0, 0.0175)
    assert e == pytest.approx((200.0 * p * 0.01) ** 2)


def test_map_symmetric_under_seed_idler_exchange():
    flat = ChannelSpec(coupler_bw3db=1e-3)
    seeds = np.array([2.040e-6, 2.055e-6])
    wg = _device()
    m1 = fwm.stimulated_fwm_map(wg, _pump(1.0), seeds, flat)
    m2 = fwm.stimulated_fwm_map(wg, _pump(1.0), m1.idler_wavelengths, flat)
    np.testing.assert_allclose(m2.idler_wavelengths, seeds, rtol=1e-12)
    np.testing.assert_allclose(m2.idler_rel, m1.idler_rel, rtol=1e-9)


def test_map_spans_sixty_nm_with_antidiagonal_locus():
    seeds = np.linspace(2011.5e-9, 2066.5e-9, 12)
    m = fwm.stimulated_fwm_map(_device(), _pump(1.0), seeds, ChannelSpec())
    assert (m.idler_wavelengths.max() - seeds.min()) >= 60e-9
    assert np.all(np.diff(m.idler_wavelengths) < 0)


def test_gamma_trivial_cases():
    assert fwm.nonlinear_parameter(0.0, 0.228e-12, 2.071e-6) == 0.0
    g1 = fwm.nonlinear_parameter(1.53e-17, 0.228e-12, 2.071e-6)
    assert fwm.nonlinear_parameter(1.53e-17, 0.456e-12, 2.071e-6) == pytest.approx(g1 / 2)
    assert fwm.tpa_bulk_to_waveguide(0.0, 0.228e-12) == 0.0
    assert fwm.tpa_waveguide_to_bulk(fwm.tpa_bulk_to_waveguide(0.557e-11, 0.228e-12), 0.228e-12) / 1e-11 == \
        pytest.approx(0.557, rel=1e-15)
