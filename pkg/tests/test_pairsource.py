import math

import numpy as np
import pytest

from mirpairs import pairsource as ps
from mirpairs.coincidence import build_histogram
from mirpairs.physmodel import ChannelSpec, db_to_linear

IDEAL = ChannelSpec(coupler_peak_db=0.0, mono_loss_db=0.0)


def ideal_detector(**kw):
    return ps.DetectorSpec(sde=1.0, **kw)


def reference_arms():
    chans = (ChannelSpec(filter_center=2050.7e-9), ChannelSpec(filter_center=2092.3e-9))
    dets = (ps.DetectorSpec(sde=0.44, fiber_loss_db=-1.49, dcr_dark=300.0),
            ps.DetectorSpec(sde=0.48, fiber_loss_db=-1.63, dcr_dark=300.0))
    return chans, dets


def test_pairs_per_pulse():
    assert ps.pairs_per_pulse(0.28, 0.32) == pytest.approx(0.0287, abs=1e-4)
    assert ps.pairs_per_pulse(0.28, 0.32) == pytest.approx(0.03, rel=0.05)
    assert ps.pairs_per_pulse(0.28, 0.0) == 0.0
    with pytest.raises(ValueError):
        ps.pairs_per_pulse(0.28, -0.1)


def test_xi_from_rate():
    assert ps.xi_from_rate(11e6, 39.4e6) == pytest.approx(0.279, abs=5e-4)


def test_true_rate_is_four_times_net():
    assert ps.true_pair_rate(112.0) == 448.0


def test_ideal_coincidences():
    mu = 0.01
    src = ps.SourceSpec(xi=mu, rep_rate=1e6)
    dets = (ideal_detector(jitter_fwhm=1e-12), ideal_detector(jitter_fwhm=1e-12))
    s = ps.simulate_tags(src, (IDEAL, IDEAL), dets, 1.0, 1.0, seed=3)
    hist = build_histogram(s, 4, 2000)
    n = hist.window_sum(0, 100)
    expected = 1e6 * mu / 4
    assert abs(n - expected) <= 5 * math.sqrt(expected)


def test_zero_power_no_noise_is_empty():
    src = ps.SourceSpec(xi=0.28)
    chans, _ = reference_arms()
    s = ps.simulate_tags(src, chans, (ps.DetectorSpec(), ps.DetectorSpec()), 0.0, 1.0, seed=1)
    assert len(s) == 0


def test_seed_determinism_and_threads():
    src = ps.SourceSpec(xi=0.28, linear_noise_b=0.03)
    chans, dets = reference_arms()
    a = ps.simulate_tags(src, chans, dets, 0.4, 1.0, seed=9)
    b = ps.simulate_tags(src, chans, dets, 0.4, 1.0, seed=9, threads=3)
    c = ps.simulate_tags(src, chans, dets, 0.4, 1.0, seed=10)
    assert a.to_bytes() == b.to_bytes()
    assert a.to_bytes() != c.to_bytes()


def test_singles_match_expectation():
    src = ps.SourceSpec(xi=0.28, linear_noise_b=0.0353)
    chans, dets = reference_arms()
    s = ps.simulate_tags(src, chans, dets, 0.32, 60.0, seed=5)
    exp = ps.expected_rates(src, chans, dets, 0.32)
    for n, rate in zip(s.counts(), (exp.singles_a, exp.singles_b)):
        mean = rate * 60.0
        assert abs(n - mean) <= 3 * math.sqrt(mean)
    s.check()


def test_zero_efficiency_arm_has_no_coincidences():
    src = ps.SourceSpec(xi=0.28)
    chans, dets = reference_arms()
    dets = (ps.DetectorSpec(sde=0.0), dets[1])
    assert ps.expected_rates(src, chans, dets, 0.3).coincidences == 0.0


def test_expected_coincidence_formula():
    src = ps.SourceSpec(xi=0.28)
    chans, dets = reference_arms()
    r = ps.expected_rates(src, chans, dets, 0.3)
    eta = [ps.arm_efficiency(c, d) for c, d in zip(chans, dets)]
    assert r.coincidences == pytest.approx(39.4e6 * 0.28 * 0.09 * eta[0] * eta[1] / 4)
    assert eta[0] == pytest.approx(db_to_linear(chans[0].coupler_db(2050.7e-9) - 9.0 - 1.49) * 0.44)


def test_multipair_warning():
    chans, dets = reference_arms()
    with pytest.warns(RuntimeWarning):
        ps.expected_rates(ps.SourceSpec(xi=0.28), chans, dets, 1.0)


def test_power_scaling_slopes():
    src = ps.SourceSpec(xi=0.28)
    chans, dets = reference_arms()
    dets = tuple(ps.DetectorSpec(sde=d.sde, fiber_loss_db=d.fiber_loss_db) for d in dets)
    p = np.geomspace(0.01, 0.1, 6)
    rates = [ps.expected_rates(src, chans, dets, x) for x in p]
    slope_c = np.polyfit(np.log(p), np.log([r.coincidences for r in rates]), 1)[0]
    slope_a = np.polyfit(np.log(p), np.log([r.accidentals for r in rates]), 1)[0]
    assert slope_c == pytest.approx(2.0, abs=0.1)
    assert slope_a == pytest.approx(4.0, abs=0.2)


def test_small_jitter_concentrates_in_four_ps():
    # cross-correlation FWHM 1 ps: every true delay lands within +-2 ps
    src = ps.SourceSpec(xi=0.05, rep_rate=1e6)
    fw = 1e-12 / math.sqrt(2)
    dets = (ideal_detector(jitter_fwhm=fw), ideal_detector(jitter_fwhm=fw))
    s = ps.simulate_tags(src, (IDEAL, IDEAL), dets, 1.0, 2.0, seed=2)
    hist = build_histogram(s, 1, 200)
    assert hist.window_sum(0, 4) / hist.total >= 0.999
    # a half-open 4-ps bin loses the +2 ps ties of integer tags
    coarse = build_histogram(s, 4, 200)
    assert coarse.counts[coarse.delays == 0][0] / coarse.total >= 0.995


def test_dead_time_spacing():
    src = ps.SourceSpec(xi=0.28, linear_noise_b=0.5)
    chans, _ = reference_arms()
    dets = (ps.DetectorSpec(dead_time=60e-9, dcr_dark=1e5), ps.DetectorSpec(dead_time=60e-9, dcr_dark=1e5))
    s = ps.simulate_tags(src, chans, dets, 1.0, 0.5, seed=4)
    s.check(dead_time_ps=60_000)


def test_thermal_statistics_have_more_multi_pair_pulses():
    dets = (ideal_detector(), ideal_detector())
    kw = dict(xi=0.2, rep_rate=1e6)
    pois = ps.simulate_tags(ps.SourceSpec(**kw), (IDEAL, IDEAL), dets, 1.0, 1.0, seed=1)
    therm = ps.simulate_tags(ps.SourceSpec(statistics="thermal", **kw), (IDEAL, IDEAL), dets, 1.0, 1.0, seed=1)
    # singles with non-resolving detectors saturate faster for bunched light
    assert therm.counts()[0] < pois.counts()[0]


def test_spec_validation():
    with pytest.raises(ValueError):
        ps.SourceSpec(duty_cycle=1.5)
    with pytest.raises(ValueError):
        ps.SourceSpec(statistics="sub-poisson")
    with pytest.raises(ValueError):
        ps.DetectorSpec(dead_time=1e-6)
    with pytest.raises(ValueError):
        ps.DetectorSpec(fiber_loss_db=1.0)
    with pytest.raises(ValueError):
        ps.simulate_tags(ps.SourceSpec(), (IDEAL, IDEAL), (ps.DetectorSpec(),) * 2, 0.1, 4000.0, seed=1)


def test_header_records_inputs():
    chans, dets = reference_arms()
    s = ps.simulate_tags(ps.SourceSpec(), chans, dets, 0.2, 0.01, seed=77)
    assert s.header["seed"] == 77 and s.header["power_W"] == 0.2
    assert len(s.header["source_hash"]) == 16


def test_window_capture():
    dets = (ps.DetectorSpec(), ps.DetectorSpec())
    # cross-correlation FWHM 216 ps, full window 389 ps
    sigma = 216 / 2.3548
    assert ps.window_capture(389e-12, dets) == pytest.approx(math.erf(194.5 / (sigma * math.sqrt(2))), rel=1e-3)
