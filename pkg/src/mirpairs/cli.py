"""Command-line front end: JSON experiment configs in, deterministic CSV/JSON artifacts out.

Exit codes: 0 success, 2 config error, 3 numerical non-convergence, 4 I/O or malformed input.
"""

from __future__ import annotations

import argparse
import csv
import dataclasses
import json
import logging
import math
import os
import sys
from pathlib import Path

import numpy as np

from . import __version__, coincidence, config, detector, fwm, interference, nlse, pairsource, retrieval
from .config import Config, ConfigError
from .tags import TagFormatError, read_tags, write_tags

logger = logging.getLogger("mirpairs")

EXIT_OK, EXIT_CONFIG, EXIT_NONCONVERGENCE, EXIT_IO = 0, 2, 3, 4


class InputError(Exception):
    """Unreadable or malformed input data file."""


class Diverged(Exception):
    def __init__(self, message, diagnostics_path):
        super().__init__(message)
        self.diagnostics_path = diagnostics_path


class Output:
    """Writes tables and summaries into one directory, stamped with version and config hash."""

    def __init__(self, out_dir, config_hash: str, fmt: str = "csv"):
        self.dir = Path(out_dir)
        self.dir.mkdir(parents=True, exist_ok=True)
        self.hash = config_hash
        self.fmt = fmt
        self.written: list[Path] = []

    def table(self, name: str, columns, rows) -> Path:
        if self.fmt == "json":
            payload = {"columns": list(columns), "rows": [[_num(v) for v in r] for r in rows]}
            return self.summary(name, payload)
        path = self.dir / f"{name}.csv"
        lines = [f"# mirpairs {__version__}", f"# config_hash {self.hash}", ",".join(columns)]
        lines += [",".join(_fmt(v) for v in r) for r in rows]
        path.write_text("\n".join(lines) + "\n")
        self.written.append(path)
        return path

    def summary(self, name: str, payload: dict) -> Path:
        path = self.dir / f"{name}.json"
        doc = {"version": __version__, "config_hash": self.hash, **_clean(payload)}
        path.write_text(json.dumps(doc, indent=2, sort_keys=True) + "\n")
        self.written.append(path)
        return path


def _num(v):
    if isinstance(v, (np.integer,)):
        return int(v)
    if isinstance(v, (float, np.floating)):
        v = float(v)
        return v if math.isfinite(v) else None
    return v


def _fmt(v) -> str:
    if isinstance(v, (int, np.integer)):
        return str(int(v))
    if isinstance(v, (float, np.floating)):
        return f"{float(v):.10g}"
    return str(v)


def _clean(obj):
    """JSON-safe copy: numpy scalars to Python, non-finite floats to null."""
    if isinstance(obj, dict):
        return {k: _clean(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple, np.ndarray)):
        return [_clean(v) for v in obj]
    if isinstance(obj, (np.bool_, bool)):
        return bool(obj)
    return _num(obj)


def read_table(path, required) -> dict[str, np.ndarray]:
    """Numeric columns of a CSV with a header row; '#' lines are skipped."""
    path = Path(path)
    try:
        text = path.read_text()
    except OSError as exc:
        raise InputError(f"cannot read {path}: {exc}") from None
    rows = [r for r in csv.reader(line for line in text.splitlines() if line.strip() and not line.startswith("#"))]
    if not rows:
        raise InputError(f"{path}: no header row")
    header = [h.strip() for h in rows[0]]
    missing = [c for c in required if c not in header]
    if missing:
        raise InputError(f"{path}: missing column(s) {', '.join(missing)}")
    cols = {h: [] for h in header}
    for n, r in enumerate(rows[1:], start=2):
        if len(r) != len(header):
            raise InputError(f"{path}: row {n} has {len(r)} fields, expected {len(header)}")
        for h, v in zip(header, r):
            try:
                cols[h].append(float(v))
            except ValueError:
                raise InputError(f"{path}: row {n}: non-numeric value {v!r} in column {h}") from None
    return {h: np.asarray(v) for h, v in cols.items()}


def threads_from(args) -> int:
    n = args.threads
    if n is None:
        env = os.environ.get("MIRPAIRS_THREADS")
        try:
            n = int(env) if env else 1
        except ValueError:
            raise ConfigError(f"MIRPAIRS_THREADS must be an integer, got {env!r}") from None
    if n < 1:
        raise ConfigError("thread count must be >= 1")
    return n


def _load(args) -> Config:
    if args.config is None:
        raise ConfigError("--config is required")
    path = Path(args.config)
    if not path.exists() and not path.suffix:
        path = config.bundled(args.config)
    try:
        return Config.load(path)
    except OSError as exc:
        raise InputError(f"cannot read config {path}: {exc}") from None


# ----------------------------------------------------------------------------- phase matching

def cmd_phasematch(args, cfg: Config, out: Output) -> None:
    wg = config.waveguide(cfg)
    pump = config.pump_pulse(cfg)
    lam = pump.carrier_wavelength
    power = pump.peak_power
    sweep = cfg.section("sweep", required=False)
    seeds = np.asarray(sweep.get("seed_wavelength_nm", list(np.arange(2031.5, 2067.0, 5.0)))) * 1e-9
    coupler = config.channels(cfg)[0] if "channels" in cfg.doc else config.ChannelSpec()
    fmap = fwm.stimulated_fwm_map(wg, pump, seeds, coupler, seed_power=sweep.get("seed_power_W", 1e-3),
                                  resolution=sweep.get("resolution_nm", 0.5) * 1e-9)
    with np.errstate(divide="ignore"):
        rel_db = np.maximum(10 * np.log10(fmap.idler_rel), -200.0)
    out.table("phasematch_map", ["seed_nm", "idler_nm", "rel_psd_db"],
              zip(fmap.seed_wavelengths * 1e9, fmap.idler_wavelengths * 1e9, rel_db))
    out.table("phasematch_spectra", ["seed_nm"] + [f"{w * 1e9:.4f}" for w in fmap.wavelengths],
              ([s * 1e9, *row] for s, row in zip(fmap.seed_wavelengths, fmap.psd_db())))

    dw_max = sweep.get("detuning_max_rad_s", 2 * math.pi * 3e12)
    dw = np.linspace(-dw_max, dw_max, sweep.get("detuning_points", 201))
    curve = fwm.phase_match_curve(wg, lam, power, dw)
    out.table("phasematch_curve", ["detuning_rad_s", "dk_total"], ((p.delta_omega, p.dk_total) for p in curve))
    gamma = wg.gamma(lam)
    out.summary("phasematch", {
        "gamma_per_W_m": gamma,
        "peak_power_W": power,
        "perfect_match_detuning_rad_s": fwm.perfect_match_detuning(wg.beta2, gamma, power),
        "dk_at_zero_detuning_per_m": fwm.total_mismatch(0.0, gamma, power),
    })


# ----------------------------------------------------------------------------- propagation and retrieval

def _sweep(cfg: Config, threads: int):
    wg = config.waveguide(cfg)
    sweep = cfg.section("sweep")
    powers = cfg.require("sweep", "peak_power_W")
    if not powers or min(powers) <= 0:
        raise ConfigError("need positive peak powers", "sweep.peak_power_W")
    fc = nlse.FreeCarrierOptions() if sweep.get("free_carriers", False) else None
    template = config.pump_pulse(cfg, peak_power=max(powers))
    try:
        rows = nlse.power_sweep(wg, template, sorted(powers), steps=sweep.get("steps", 256), fc=fc,
                                check_convergence=sweep.get("check_convergence", False), threads=threads)
    except ValueError as exc:
        raise ConfigError(str(exc), "sweep") from None
    return wg, rows


def _tpa_fit(wg, rows):
    powers = [r.peak_power for r in rows]
    try:
        return nlse.inverse_transmission_fit(powers, [r.eta for r in rows], wg.l_eff)
    except ValueError as exc:
        logger.warning("alpha_tpa fit skipped: %s", exc)
        return None


def _check_sweep(rows, out: Output, name: str):
    bad = [r for r in rows if not r.converged]
    if bad:
        path = out.summary(f"{name}_diagnostics", {
            "nonconverged": [{"peak_power_W": r.peak_power, "error": r.error} for r in bad]})
        raise Diverged(f"{len(bad)} propagation(s) did not converge", path)


def cmd_propagate(args, cfg: Config, out: Output) -> None:
    wg, rows = _sweep(cfg, threads_from(args))
    _check_sweep(rows, out, "propagate")
    out.table("propagate_sweep", ["peak_power_W", "eta", "phi_nl_rad"],
              ((r.peak_power, r.eta, r.phi_nl) for r in rows))
    fit = _tpa_fit(wg, rows)
    out.summary("propagate", {
        "gamma_per_W_m": wg.gamma(config.pump_wavelength(cfg)),
        "l_eff_m": wg.l_eff,
        "alpha_tpa_per_W_m": None if fit is None else fit.alpha_tpa,
        "alpha_tpa_err": None if fit is None else fit.alpha_tpa_err,
        "phi_nl_max_rad": max(r.phi_nl for r in rows),
    })


def _retrieve_spectrum(args, cfg: Config, out: Output) -> None:
    pump = config.pump_pulse(cfg)
    table = read_table(args.spectrum, ["wavelength_nm", "psd"])
    psd = retrieval.spectrum_from_wavelength_table(table["wavelength_nm"] * 1e-9, table["psd"], pump.grid,
                                                   pump.carrier_wavelength)
    if not psd.any():
        raise InputError(f"{args.spectrum}: spectrum does not overlap the simulation grid")
    env = np.abs(pump.envelope)
    problem = retrieval.RetrievalProblem(psd, env, pump.dt)
    res = retrieval.gerchberg_saxton(problem)
    _phase_outputs(out, pump.t, res)
    if not res.converged:
        path = out.summary("retrieve_diagnostics", {"iterations": res.iterations, "residual": res.residual,
                                                    "residual_history": res.residual_history[-20:]})
        raise Diverged("Gerchberg-Saxton did not converge", path)


def _phase_outputs(out, t, res):
    out.table("retrieve_phase", ["time_ps", "phase_rad"], zip(t * 1e12, res.temporal_phase))
    out.summary("retrieve", {"phi_nl": res.phi_nl, "phi_nl_err": res.phi_nl_err, "iterations": res.iterations,
                             "residual": res.residual, "converged": res.converged})


def cmd_retrieve(args, cfg: Config, out: Output) -> None:
    if args.spectrum:
        return _retrieve_spectrum(args, cfg, out)
    wg, rows = _sweep(cfg, threads_from(args))
    _check_sweep(rows, out, "retrieve")
    lam = config.pump_wavelength(cfg)
    fit = _tpa_fit(wg, rows)
    results = []
    for r in rows:
        pulse = r.result.pulse_out
        results.append(retrieval.gerchberg_saxton(retrieval.RetrievalProblem.from_pulse(pulse)))
    phis = [res.phi_nl for res in results]
    alpha = max(fit.alpha_tpa, 0.0) if fit is not None else wg.alpha_tpa
    est = retrieval.extract_n2([r.peak_power for r in rows], phis, dataclasses.replace(wg, alpha_tpa=alpha), lam)
    top = results[-1]
    out.table("retrieve_sweep", ["peak_power_W", "eta", "phi_nl_rad", "phi_retrieved_rad"],
              ((r.peak_power, r.eta, r.phi_nl, p) for r, p in zip(rows, phis)))
    out.table("retrieve_phase", ["time_ps", "phase_rad"], zip(rows[-1].result.pulse_out.t * 1e12,
                                                              top.temporal_phase))
    out.summary("retrieve", {
        "n2_m2_per_W": est.n2, "n2_err": est.n2_err,
        "gamma_per_W_m": est.gamma, "gamma_err": est.gamma_err,
        "alpha_tpa_per_W_m": None if fit is None else fit.alpha_tpa,
        "alpha_tpa_err": None if fit is None else fit.alpha_tpa_err,
        "phase_curved": est.curved,
        "phi_nl": top.phi_nl, "iterations": top.iterations, "residual": top.residual,
        "converged": all(res.converged for res in results),
    })
    if not all(res.converged for res in results):
        path = out.summary("retrieve_diagnostics", {
            "nonconverged_powers_W": [r.peak_power for r, res in zip(rows, results) if not res.converged]})
        raise Diverged("Gerchberg-Saxton did not converge", path)


# ----------------------------------------------------------------------------- photon pairs

def _point_seed(seed: int, i: int) -> int:
    return int(np.random.SeedSequence([seed, i]).generate_state(1, np.uint64)[0])


def _pair_points(cfg: Config):
    powers = cfg.require("pairs", "peak_power_W")
    durations = cfg.require("pairs", "duration_s")
    if not isinstance(durations, list):
        durations = [durations] * len(powers)
    if len(durations) != len(powers):
        raise ConfigError("duration list must match the power list", "pairs.duration_s")
    if any(p < 0 for p in powers):
        raise ConfigError("powers must be non-negative", "pairs.peak_power_W")
    if any(not 0 <= d <= 3600 for d in durations):
        raise ConfigError("durations must lie in [0, 3600] s", "pairs.duration_s")
    return powers, durations


def cmd_pairs_simulate(args, cfg: Config, out: Output) -> None:
    src, ch, det = config.source(cfg), config.channels(cfg), config.detectors(cfg)
    powers, durations = _pair_points(cfg)
    seed = cfg.seed(args.seed)
    threads = threads_from(args)
    window = cfg.section("pairs").get("window_ps", coincidence.DEFAULT_WINDOW_PS) * 1e-12
    rows = []
    for i, (p, d) in enumerate(zip(powers, durations)):
        stream = pairsource.simulate_tags(src, ch, det, p, d, _point_seed(seed, i), threads=threads)
        stream.header.update({"config_hash": cfg.hash, "version": __version__, "point": i, "run_seed": seed})
        ext = "bin" if args.tag_format == "bin" else "csv"
        path = out.dir / f"tags_{i:02d}.{ext}"
        write_tags(path, stream, args.tag_format)
        out.written.append(path)
        e = pairsource.expected_rates(src, ch, det, p, window=window)
        rows.append((p, e.singles_a, e.singles_b, e.coincidences_in_window, e.accidentals, e.car))
    out.table("pairs_expected", ["peak_power_W", "singles_a_hz", "singles_b_hz", "coincidences_hz",
                                 "accidentals_hz", "car"], rows)


def _tag_inputs(args, out: Output):
    if args.tags:
        return [Path(p) for p in args.tags]
    found = sorted(out.dir.glob("tags_*.bin")) + sorted(out.dir.glob("tags_*.csv"))
    if not found:
        raise InputError(f"no tag files given and none found in {out.dir}")
    return found


def cmd_pairs_analyze(args, cfg: Config, out: Output) -> None:
    s = cfg.section("pairs", required=False)
    bin_width = s.get("bin_width_ps", coincidence.DEFAULT_BIN_PS)
    window = s.get("window_ps", coincidence.DEFAULT_WINDOW_PS)
    side = s.get("side_peaks", coincidence.DEFAULT_SIDE_PEAKS)
    threads = threads_from(args)
    streams = []
    for path in _tag_inputs(args, out):
        try:
            streams.append(read_tags(path))
        except OSError as exc:
            raise InputError(f"cannot read {path}: {exc}") from None
        except TagFormatError as exc:
            raise InputError(f"{path}: {exc}") from None
    points = []
    rows = []
    for i, st in enumerate(streams):
        if not st.rep_rate:
            raise InputError(f"tag stream {i} has no rep_rate_hz in its header")
        period = 1e12 / st.rep_rate
        span = (side // 2 + 0.5) * period + window
        hist = coincidence.build_histogram(st, bin_width, span, threads=threads)
        out.table(f"histogram_{i:02d}", ["delay_ps", "counts"], zip(hist.delays, hist.counts))
        car = coincidence.car_from_histogram(hist, window, side)
        fit = coincidence.fit_peak(hist) if hist.total else None
        T = st.duration
        na, nb = st.counts()
        row = coincidence.CarRow(st.power or 0.0, car.car, car.car_err, car.x_raw / T if T else 0.0,
                                 (car.x_raw - car.x_acc) / T if T else 0.0, na / T if T else 0.0,
                                 nb / T if T else 0.0, car.x_raw, car.x_acc, T)
        rows.append(row)
        points.append({
            "peak_power_W": row.power, "car": row.car, "car_err": row.car_err, "raw_hz": row.raw_hz,
            "net_hz": row.net_hz, "true_hz": row.true_hz, "singles_a_hz": row.singles_a_hz,
            "singles_b_hz": row.singles_b_hz, "x_raw": row.x_raw, "x_acc": row.x_acc,
            "accidentals_zero": car.acc_zero,
            "peak_fwhm_ps": fit.fwhm if fit is not None and fit.converged else None,
            "peak_center_ps": car.center,
        })
    out.table("car_scan", ["peak_power_W", "car", "car_err", "raw_hz", "net_hz"],
              ((r.power, r.car, r.car_err, r.raw_hz, r.net_hz) for r in rows))
    summary = {"points": points, "window_ps": window, "side_peaks": side, "xi": None}
    low = [r for r in rows if r.power < coincidence.LOW_POWER_LIMIT and r.integration_time > 0]
    if len(low) >= 5 and streams:
        capture = 1.0
        if s.get("correct_capture", False):
            capture = pairsource.window_capture(window * 1e-12, config.detectors(cfg))
        est = coincidence.xi_from_car_rows(low, streams[0].rep_rate, capture)
        summary["xi"] = {"xi_per_W2": est.xi, "xi_err": est.xi_err, "rate_per_W2_hz": est.rate_per_w2,
                         "rate_err": est.rate_per_w2_err, "negative_coefficients": est.negative,
                         "capture": capture}
    if rows:
        summary["max_net_hz"] = max(r.net_hz for r in rows)
        summary["max_true_hz"] = max(r.true_hz for r in rows)
        finite = [r.car for r in rows if math.isfinite(r.car)]
        summary["max_car"] = max(finite) if finite else None
    out.summary("pairs", summary)


# ----------------------------------------------------------------------------- interference

def _phases(cfg: Config) -> np.ndarray:
    s = cfg.section("interference")
    n = s.get("phase_points", 30)
    return np.linspace(s.get("phase_start_rad", 0.0), s.get("phase_stop_rad", 2 * math.pi), n, endpoint=False)


def cmd_hom_simulate(args, cfg: Config, out: Output) -> None:
    s = cfg.section("interference")
    # no car entry means no accidentals at all
    car = s.get("car", math.inf)
    try:
        scan = interference.simulate_fringe(
            _phases(cfg), cfg.require("interference", "pairs_budget"), car,
            s.get("R", 0.5), cfg.seed(args.seed), indistinguishability=s.get("indistinguishability", 1.0),
            pump_split=s.get("pump_split", 0.5), integration_time=s.get("integration_s", 1.0),
            threads=threads_from(args))
    except ValueError as exc:
        raise ConfigError(str(exc), "interference") from None
    out.table("fringe", ["phase_rad", "coincidences", "accidentals", "net"],
              zip(scan.phases, scan.coincidences, scan.accidentals, scan.net))


def _read_fringe(path, integration_time: float = 1.0) -> interference.FringeScan:
    path = Path(path)
    if path.suffix == ".json":
        try:
            doc = json.loads(path.read_text())
            cols = {c: np.array([r[k] for r in doc["rows"]], float) for k, c in enumerate(doc["columns"])}
        except (OSError, ValueError, KeyError, TypeError) as exc:
            raise InputError(f"{path}: {exc}") from None
    else:
        cols = read_table(path, ["phase_rad", "coincidences", "accidentals"])
    try:
        return interference.FringeScan(cols["phase_rad"], cols["coincidences"], cols["accidentals"],
                                       integration_time)
    except (KeyError, ValueError) as exc:
        raise InputError(f"{path}: {exc}") from None


def cmd_hom_analyze(args, cfg: Config, out: Output) -> None:
    path = args.input
    if path is None:
        path = out.dir / "fringe.csv"
        if not path.exists():
            path = out.dir / "fringe.json"
    t_int = cfg.section("interference", required=False).get("integration_s", 1.0)
    scan = _read_fringe(path, t_int)
    try:
        raw = interference.fit_visibility(scan, False)
        net = interference.fit_visibility(scan, True)
    except ValueError as exc:
        raise InputError(f"{path}: {exc}") from None
    car = cfg.section("interference", required=False).get("car")
    out.summary("hom", {
        "v_raw": raw.visibility, "v_raw_err": raw.visibility_err,
        "v_net": net.visibility, "v_net_err": net.visibility_err,
        "raw_bound": interference.raw_visibility_bound(car) if car and car > 0 else None,
        "fringe_phase0_rad": net.phase0,
        "peak_rate_hz": net.x_max / scan.integration_time,
        "all_outputs_multiplier": interference.ALL_OUTPUTS_MULTIPLIER,
    })


# ----------------------------------------------------------------------------- detectors

def cmd_detector(args, cfg: Config, out: Output) -> None:
    s = cfg.section("detector", required=False)
    model = config.bias_model(cfg) if s else detector.BiasCurveModel()
    det_id = s.get("detector_id", "A")
    if det_id not in detector.DISCRIMINATION:
        raise ConfigError("detector_id must be 'A' or 'B'", "detector.detector_id")
    lo, hi = s.get("bias_min_uA", 0.0), s.get("bias_max_uA", detector.MAX_BIAS_UA)
    if not 0 <= lo < hi <= detector.MAX_BIAS_UA:
        raise ConfigError(f"bias range must lie in [0, {detector.MAX_BIAS_UA}] uA", "detector")
    bias = np.linspace(lo, hi, s.get("bias_points", 49))
    out.table("detector_bias", ["bias_uA", "sde", "dcr_hz", "discrimination_mV"],
              zip(bias, detector.sde_vs_bias(model, bias), detector.dcr_vs_bias(model, bias),
                  detector.discrimination_voltage(det_id, bias)))
    summary = {"detector_id": det_id}
    cal_path = args.input or (cfg.resolve(s["calibration_csv"]) if "calibration_csv" in s else None)
    if cal_path is not None:
        t = read_table(cal_path, ["flux_hz", "counts_hz"])
        try:
            cal = detector.calibration_fit(t["flux_hz"], t["counts_hz"], t.get("counts_err"),
                                           integration_time=s.get("integration_s"))
        except ValueError as exc:
            raise InputError(f"{cal_path}: {exc}") from None
        summary.update(cal.to_dict())
        summary.update({"intercept_err": cal.intercept_err, "saturated": cal.saturated,
                        "ci95": list(cal.ci95()), "n_points": cal.n_points})
    if "spectral_csv" in s:
        t = read_table(cfg.resolve(s["spectral_csv"]), ["wavelength_nm", "sde"])
        query = np.asarray(s.get("query_nm", []), dtype=float)
        try:
            eff, err = detector.spectral_sde(t["wavelength_nm"], t["sde"], query)
        except ValueError as exc:
            raise ConfigError(str(exc), "detector.query_nm") from None
        summary["spectral"] = [{"wavelength_nm": q, "sde": e, "sde_err": d}
                               for q, e, d in zip(query, np.atleast_1d(eff), np.atleast_1d(err))]
    out.summary("detector", summary)


# ----------------------------------------------------------------------------- entry point

def build_parser() -> argparse.ArgumentParser:
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--config", help="experiment config (JSON path or bundled name, e.g. 'reference')")
    common.add_argument("--seed", type=int, default=None, help="overrides the config seed")
    common.add_argument("--out", default=".", help="output directory")
    common.add_argument("--format", choices=("csv", "json"), default="csv", help="table format")
    common.add_argument("--threads", type=int, default=None, help="worker threads (env MIRPAIRS_THREADS)")
    common.add_argument("-v", "--verbose", action="store_true")

    p = argparse.ArgumentParser(prog="mirpairs", description=__doc__.splitlines()[0])
    p.add_argument("--version", action="version", version=f"mirpairs {__version__}")
    sub = p.add_subparsers(dest="command", required=True)
    sub.add_parser("phasematch", parents=[common], help="phase-matching curve and stimulated FWM map")
    sub.add_parser("propagate", parents=[common], help="power sweep of transmission and SPM phase")
    r = sub.add_parser("retrieve", parents=[common], help="phase retrieval and n2 / alpha_tpa estimates")
    r.add_argument("--spectrum", help="CSV wavelength_nm,psd to retrieve instead of simulating")
    for name, helptext in (("pairs", "time-tag simulation and coincidence analysis"),
                           ("hom", "two-source interference fringe simulation and fit")):
        q = sub.add_parser(name, help=helptext)
        act = q.add_subparsers(dest="action", required=True)
        s = act.add_parser("simulate", parents=[common])
        a = act.add_parser("analyze", parents=[common])
        if name == "pairs":
            s.add_argument("--tag-format", choices=("bin", "csv"), default="bin")
            a.add_argument("--tags", nargs="*", help="tag files (default: tags_* in --out)")
        else:
            a.add_argument("--input", help="fringe table (default: fringe.csv in --out)")
    d = sub.add_parser("detector", parents=[common], help="SNSPD bias curves and efficiency calibration")
    d.add_argument("--input", help="calibration CSV flux_hz,counts_hz[,counts_err]")
    return p


COMMANDS = {
    ("phasematch", None): cmd_phasematch,
    ("propagate", None): cmd_propagate,
    ("retrieve", None): cmd_retrieve,
    ("pairs", "simulate"): cmd_pairs_simulate,
    ("pairs", "analyze"): cmd_pairs_analyze,
    ("hom", "simulate"): cmd_hom_simulate,
    ("hom", "analyze"): cmd_hom_analyze,
    ("detector", None): cmd_detector,
}


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s")
    handler = COMMANDS[(args.command, getattr(args, "action", None))]
    try:
        cfg = _load(args)
        out = Output(args.out, cfg.hash, args.format)
        handler(args, cfg, out)
    except ConfigError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except (Diverged, nlse.NonConvergenceError) as exc:
        extra = f" (diagnostics: {exc.diagnostics_path})" if isinstance(exc, Diverged) else ""
        print(f"non-convergence: {exc}{extra}", file=sys.stderr)
        return EXIT_NONCONVERGENCE
    except (InputError, OSError) as exc:
        print(f"input/output error: {exc}", file=sys.stderr)
        return EXIT_IO
    for path in out.written:
        logger.info("wrote %s", path)
    return EXIT_OK


if __name__ == "__main__":
    sys.exit(main())
