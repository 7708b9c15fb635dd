"""Time-reversed HOM interference of two coherently pumped pair sources.

Each source emits a signal-idler pair into its own waveguide mode (a or b);
the pump phase difference phi appears twice because SFWM consumes two pump
photons. A directional coupler with power reflectivity R maps

    a^dag -> sqrt(T) A^dag + i sqrt(R) B^dag,    b^dag -> i sqrt(R) A^dag + sqrt(T) B^dag

for signal and idler alike. Amplitudes are reported in the basis
(|1s1i>_A|0>_B, |0>_A|1s1i>_B, |1s0i>_A|0s1i>_B, |0s1i>_A|1s0i>_B)
with the global phase -i e^{-i phi} removed, so that R = 1/2 gives
(-sin phi, sin phi, cos phi, cos phi) / sqrt(2).
"""

from __future__ import annotations

import math
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass

import numpy as np

from . import fitters

#: measuring all four output combinations instead of one pair of ports doubles the rate
ALL_OUTPUTS_MULTIPLIER = 2.0
DEFAULT_SIDE_PEAKS = 6


@dataclass(frozen=True)
class BiphotonState:
    amplitudes: np.ndarray
    phi: float
    reflectivity: float

    @property
    def norm(self) -> float:
        return float(np.sum(np.abs(self.amplitudes) ** 2))

    @property
    def bunched_a(self) -> complex:
        return complex(self.amplitudes[0])

    @property
    def bunched_b(self) -> complex:
        return complex(self.amplitudes[1])


def biphoton_state(phi: float, R: float = 0.5, pump_split: float = 0.5) -> BiphotonState:
    """Output state for pump phase ``phi`` and coupler reflectivity ``R``.

    ``pump_split`` is the fraction of pump power sent to source a; pair
    amplitudes scale with pump power, so any imbalance lifts the coincidence
    null. With equal pumping the null at phi = pi/2 holds for every R.
    """
    if not 0.0 <= R <= 1.0:
        raise ValueError("R must lie in [0, 1]")
    if not 0.0 <= pump_split <= 1.0:
        raise ValueError("pump_split must lie in [0, 1]")
    T = 1.0 - R
    ca, cb = pump_split, 1.0 - pump_split
    n = math.hypot(ca, cb)
    ca, cb = ca / n, cb * np.exp(2j * phi) / n
    rt = math.sqrt(R * T)
    amps = np.array([
        T * ca - R * cb,
        -R * ca + T * cb,
        1j * rt * (ca + cb),
        1j * rt * (ca + cb),
    ]) * (-1j * np.exp(-1j * phi))
    return BiphotonState(amps, float(phi), float(R))


def coincidence_probability(state: BiphotonState) -> float:
    """Probability of the monitored split outcome |1s0i>_A |0s1i>_B."""
    return float(abs(state.amplitudes[2]) ** 2)


def bunched_probability(state: BiphotonState) -> float:
    return float(abs(state.amplitudes[0]) ** 2 + abs(state.amplitudes[1]) ** 2)


def distinguishable_probability(R: float = 0.5) -> float:
    """Monitored-outcome probability without interference.

    Whichever source emitted, the signal reaches A and the idler B with
    probability R T, so the pump split drops out.
    """
    return R * (1.0 - R)


def classical_fringe(phi):
    """Single-photon Mach-Zehnder transmission, period 2 pi."""
    return 0.5 * (1.0 + np.cos(phi))


@dataclass
class FringeScan:
    phases: np.ndarray
    coincidences: np.ndarray
    accidentals: np.ndarray
    integration_time: float = 1.0

    def __post_init__(self):
        self.phases = np.asarray(self.phases, dtype=float)
        self.coincidences = np.asarray(self.coincidences, dtype=float)
        self.accidentals = np.asarray(self.accidentals, dtype=float)
        if not (self.phases.shape == self.coincidences.shape == self.accidentals.shape):
            raise ValueError("phases, coincidences and accidentals must have equal length")
        if np.any(self.coincidences < 0) or np.any(self.accidentals < 0):
            raise ValueError("counts must be non-negative")

    @property
    def net(self) -> np.ndarray:
        return self.coincidences - self.accidentals

    def to_csv(self) -> str:
        lines = ["phase_rad,coincidences,accidentals,net"]
        for p, c, a, n in zip(self.phases, self.coincidences, self.accidentals, self.net):
            lines.append(f"{p:.10g},{c:.10g},{a:.10g},{n:.10g}")
        return "\n".join(lines) + "\n"


def simulate_fringe(phases, pairs_budget: float, car: float, R: float = 0.5, seed: int = 0, *,
                    indistinguishability: float = 1.0, pump_split: float = 0.5, integration_time: float = 1.0,
                    n_side_peaks: int = DEFAULT_SIDE_PEAKS, threads: int = 1) -> FringeScan:
    """Poisson coincidence counts along a phase scan.

    ``pairs_budget`` is the mean true coincidence count at the fringe maximum
    of an ideal balanced device. Accidentals are flat at pairs_budget / car;
    the reported accidental level is the mean of ``n_side_peaks`` independent
    side-window counts, as a histogram analysis would give. Every point draws
    from its own seeded stream, so the result is independent of ``threads``.
    """
    if not pairs_budget > 0:
        raise ValueError("pairs_budget must be positive")
    if not car > 0:
        raise ValueError("car must be positive")
    if not 0.0 <= indistinguishability <= 1.0:
        raise ValueError("indistinguishability must lie in [0, 1]")
    phases = np.asarray(phases, dtype=float)
    acc_mean = pairs_budget / car if math.isfinite(car) else 0.0
    p_dist = distinguishable_probability(R)

    def point(i):
        p = coincidence_probability(biphoton_state(phases[i], R, pump_split))
        mean = pairs_budget * (indistinguishability * p + (1 - indistinguishability) * p_dist) / 0.5
        rng = np.random.Generator(np.random.Philox(np.random.SeedSequence([int(seed), i])))
        x = rng.poisson(mean + acc_mean)
        acc = rng.poisson(acc_mean * n_side_peaks) / n_side_peaks
        return x, acc

    idx = range(phases.size)
    if threads > 1:
        with ThreadPoolExecutor(threads) as pool:
            out = list(pool.map(point, idx))
    else:
        out = [point(i) for i in idx]
    x = np.array([o[0] for o in out], dtype=float)
    a = np.array([o[1] for o in out], dtype=float)
    return FringeScan(phases, x, a, integration_time)


@dataclass
class VisibilityFit:
    visibility: float
    visibility_err: float
    mean: float
    amplitude: float
    phase0: float
    x_max: float
    x_min: float

    def to_dict(self) -> dict:
        return {"v": self.visibility, "v_err": self.visibility_err}


def fit_visibility(scan: FringeScan, subtract_accidentals: bool = False, n_side_peaks: int = DEFAULT_SIDE_PEAKS
                   ) -> VisibilityFit:
    """Fit X(phi) = A (1 + V cos(2 phi + phi0)) and return V = (X_max - X_min)/(X_max + X_min).

    The fit is linear in (c0, c1, c2) for c0 + c1 cos 2phi + c2 sin 2phi, so
    V = hypot(c1, c2) / c0. Points are weighted by their Poisson variance
    (plus the accidental estimate's variance when subtracting).
    """
    ph = scan.phases
    if ph.size < 8:
        raise ValueError("need at least 8 phase points")
    spacing = (ph.max() - ph.min()) / max(ph.size - 1, 1)
    if ph.max() - ph.min() + spacing < math.pi - 1e-9:
        raise ValueError("phase points must span at least one quantum period (pi)")
    X = np.stack([np.ones_like(ph), np.cos(2 * ph), np.sin(2 * ph)], axis=1)
    if np.linalg.matrix_rank(X) < 3:
        raise ValueError("phase points do not determine the fringe")
    var = np.maximum(scan.coincidences, 1.0)
    y = scan.coincidences
    if subtract_accidentals:
        y = scan.net
        var = var + np.maximum(scan.accidentals, 1.0 / n_side_peaks) / n_side_peaks
    (c0, c1, c2), cov, _ = fitters.linear_fit(X, y, 1.0 / np.sqrt(var))
    amp = math.hypot(c1, c2)
    if c0 <= 0:
        raise ValueError("fitted fringe mean is not positive")
    v = amp / c0
    if amp > 0:
        g = np.array([-amp / c0**2, c1 / (amp * c0), c2 / (amp * c0)])
    else:
        g = np.array([0.0, 1.0 / c0, 1.0 / c0])
    v_err = math.sqrt(max(float(g @ cov @ g), 0.0))
    return VisibilityFit(v, v_err, c0, amp, math.atan2(-c2, c1), c0 + amp, c0 - amp)


def raw_visibility_bound(car: float) -> float:
    """Upper bound CAR/(2 + CAR) on raw visibility for flat accidentals."""
    return car / (2.0 + car)


def phase_from_voltage(v_squared, cal: tuple[float, float]):
    """Phase = slope V^2 + offset for a thermo-optic shifter (phase linear in heater power)."""
    slope, offset = cal
    if not slope > 0:
        raise ValueError("calibration slope must be positive")
    out = slope * np.asarray(v_squared, dtype=float) + offset
    return float(out) if out.ndim == 0 else out


@dataclass
class PhaseCalibration:
    slope: float
    offset: float
    slope_err: float
    offset_err: float
    converged: bool

    @property
    def cal(self) -> tuple[float, float]:
        return self.slope, self.offset


def fit_phase_calibration(v_squared, transmission) -> PhaseCalibration:
    """Fit transmission = c + A cos(a V^2 + b); returns a > 0 and b wrapped to (-pi, pi]."""
    x = np.asarray(v_squared, dtype=float)
    y = np.asarray(transmission, dtype=float)
    if x.size < 5:
        raise ValueError("need at least 5 calibration points")
    res = fitters.least_squares("sinusoid", x, y)
    off, amp, f, ph = res.params
    if amp < 0:
        amp, ph = -amp, ph + math.pi
    if f < 0:
        f, ph = -f, -ph
    b = math.remainder(ph, 2 * math.pi)
    return PhaseCalibration(2 * math.pi * f, b, 2 * math.pi * float(res.param_errs[2]), float(res.param_errs[3]),
                            res.converged)
