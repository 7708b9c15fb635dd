"""SNSPD characterisation: bias curves, efficiency calibration, spectral response."""

import numpy as np

from mirpairs import detector

model = detector.BiasCurveModel()
print("bias uA   SDE     DCR Hz    discrimination mV")
for i in np.arange(0.0, 12.1, 1.5):
    print(f"{i:6.1f}  {detector.sde_vs_bias(model, i):6.3f}  {detector.dcr_vs_bias(model, i):8.1f}"
          f"  {detector.discrimination_voltage('A', i):8.2f}")

# Counts against a calibrated flux: slope is the efficiency, intercept the dark rate.
rng = np.random.default_rng(44)
flux = np.linspace(2e4, 2e5, 8)
T = 0.5
counts = rng.poisson((0.44 * flux + 300) * T) / T
cal = detector.calibration_fit(flux, counts, integration_time=T)
lo, hi = cal.ci95()
print(f"\nSDE {cal.sde:.3f} (95% CI {lo:.3f}-{hi:.3f}), intercept {cal.intercept_hz:.0f} Hz")

wl = np.linspace(1950, 2150, 21)
sde = 0.45 - 0.0004 * (wl - 2050) + 0.01 * rng.standard_normal(wl.size)
eff, err = detector.spectral_sde(wl, sde, [2000.0, 2071.0, 2100.0])
for q, e, d in zip((2000, 2071, 2100), eff, err):
    print(f"SDE at {q} nm: {e:.3f} +- {d:.3f}")
