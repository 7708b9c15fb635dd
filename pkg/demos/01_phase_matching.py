"""Phase matching and stimulated four-wave mixing in the silicon spiral.

Starts from the measured material constants, turns them into waveguide
coefficients, and shows how the Kerr term shifts the phase-matching point
as the pump gets stronger. Finishes with a stimulated-FWM sweep.
"""

import math

import numpy as np

from mirpairs import fwm
from mirpairs.physmodel import ChannelSpec, TimeGrid, WaveguideSpec, sech_pulse

PUMP = 2.0715e-6

wg = WaveguideSpec.from_lab_units(length_mm=17.5, a_eff_um2=0.228, n2_m2_per_w=1.53e-17,
                                  beta2_ps2_per_m=-0.5, loss_db_per_cm=3.2, alpha_tpa_per_w_m=24.4)
gamma = wg.gamma(PUMP)
print(f"gamma             = {gamma:8.2f} /W/m")
print(f"alpha_tpa (bulk)  = {fwm.tpa_bulk_to_waveguide(0.557e-11, wg.a_eff):8.2f} /W/m")

# Anomalous dispersion lets the Kerr term be cancelled at a finite detuning.
print("\npeak power   perfect-match detuning   mismatch at zero detuning")
for p in (0.1, 1.0, 5.0, 25.0):
    dw = fwm.perfect_match_detuning(wg.beta2, gamma, p)
    print(f"{p:7.1f} W   {dw / (2 * math.pi * 1e12):9.3f} THz            {fwm.total_mismatch(0.0, gamma, p):9.1f} /m")

# Signal/idler pairs are tied by energy conservation.
for seed in (2031.5e-9, 2051.5e-9):
    print(f"seed {seed * 1e9:.1f} nm -> idler {fwm.idler_wavelength(PUMP, seed) * 1e9:.2f} nm")

# Stimulated FWM: a weak CW seed on the blue side, 1 W pump pulse.
fwhm = 4.82e-12
pump = sech_pulse(1.0, fwhm, TimeGrid.for_pulse(fwhm, 4096), carrier_wavelength=PUMP)
seeds = np.arange(2031.5e-9, 2067e-9, 5e-9)
fmap = fwm.stimulated_fwm_map(wg, pump, seeds, ChannelSpec())
print("\nseed nm  idler nm  idler/seed (dB)")
for s, i, r in zip(fmap.seed_wavelengths, fmap.idler_wavelengths, fmap.idler_rel):
    print(f"{s * 1e9:7.1f}  {i * 1e9:8.2f}  {10 * np.log10(r):8.2f}")
