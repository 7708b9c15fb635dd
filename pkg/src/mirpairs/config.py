"""Strict JSON experiment configs with unit-suffixed keys.

Every physical quantity carries its unit in the key (``length_mm``,
``peak_power_W``, ``loss_dB_per_cm`` ...). Unknown keys are rejected with
their full dotted path. Builders convert sections to SI domain objects.
"""

from __future__ import annotations

import json
import math
from dataclasses import fields, is_dataclass
from importlib import resources
from pathlib import Path

from .detector import BiasCurveModel
from .fwm import tpa_bulk_to_waveguide
from .pairsource import DetectorSpec, SourceSpec
from .physmodel import ChannelSpec, TimeGrid, WaveguideSpec, sech_pulse
from .tags import spec_hash

NUM = "number"
INT = "integer"
STR = "string"
BOOL = "boolean"
NUMS = "number list"
NUM_OR_NUMS = "number or number list"

CHANNEL = {
    "coupler_peak_dB": NUM, "coupler_center_nm": NUM, "coupler_bw3db_nm": NUM, "mono_loss_dB": NUM,
    "n_monochromators": INT, "filter_center_nm": NUM, "filter_width_nm": NUM, "pump_rejection_dB": NUM,
    "fiber_loss_dB": NUM,
}
DETECTOR = {
    "sde": NUM, "jitter_fwhm_ps": NUM, "dcr_dark_hz": NUM, "bb_rate_hz": NUM, "dead_time_ns": NUM,
    "fiber_loss_dB": NUM, "bias_uA": NUM,
}
SCHEMA = {
    "seed": INT,
    "description": STR,
    "waveguide": {
        "length_mm": NUM, "a_eff_um2": NUM, "n2_m2_per_W": NUM, "beta2_ps2_per_m": NUM, "beta3_ps3_per_m": NUM,
        "loss_dB_per_cm": NUM, "alpha_tpa_per_W_m": NUM, "beta_tpa_cm_per_GW": NUM, "width_nm": NUM,
        "height_nm": NUM, "sidewall_angle_deg": NUM,
    },
    "pump": {"wavelength_nm": NUM, "duration_fwhm_ps": NUM, "rep_rate_hz": NUM, "peak_power_W": NUM,
             "samples": INT},
    "sweep": {
        "peak_power_W": NUMS, "steps": INT, "check_convergence": BOOL, "free_carriers": BOOL,
        "seed_wavelength_nm": NUMS, "seed_power_W": NUM, "resolution_nm": NUM,
        "detuning_max_rad_s": NUM, "detuning_points": INT,
    },
    "channels": {"A": CHANNEL, "B": CHANNEL},
    "detectors": {"A": DETECTOR, "B": DETECTOR},
    "source": {"xi_per_W2": NUM, "rep_rate_hz": NUM, "linear_noise_b_per_W": NUM, "duty_cycle": NUM,
               "statistics": STR},
    "pairs": {"peak_power_W": NUMS, "duration_s": NUM_OR_NUMS, "bin_width_ps": INT, "window_ps": NUM,
              "side_peaks": INT, "correct_capture": BOOL},
    "interference": {"phase_points": INT, "phase_start_rad": NUM, "phase_stop_rad": NUM, "pairs_budget": NUM,
                     "car": NUM, "R": NUM, "indistinguishability": NUM, "pump_split": NUM, "integration_s": NUM},
    "detector": {"detector_id": STR, "sde_max": NUM, "i_half_uA": NUM, "i_width_uA": NUM, "dcr0_hz": NUM,
                 "i_dcr_uA": NUM, "bb_floor_hz": NUM, "bias_min_uA": NUM, "bias_max_uA": NUM, "bias_points": INT,
                 "calibration_csv": STR, "integration_s": NUM, "spectral_csv": STR, "query_nm": NUMS},
}


class ConfigError(ValueError):
    def __init__(self, message: str, path: str = ""):
        super().__init__(f"{path}: {message}" if path else message)
        self.path = path


def _check_value(kind, value, path):
    def is_num(v):
        return isinstance(v, (int, float)) and not isinstance(v, bool) and math.isfinite(v)

    ok = {
        NUM: is_num(value),
        INT: isinstance(value, int) and not isinstance(value, bool),
        STR: isinstance(value, str),
        BOOL: isinstance(value, bool),
        NUMS: isinstance(value, list) and all(is_num(v) for v in value),
        NUM_OR_NUMS: is_num(value) or (isinstance(value, list) and all(is_num(v) for v in value)),
    }[kind]
    if not ok:
        raise ConfigError(f"expected {kind}, got {json.dumps(value)}", path)


def validate(doc, schema=SCHEMA, prefix: str = "") -> None:
    if not isinstance(doc, dict):
        raise ConfigError("expected an object", prefix or "<root>")
    for key, value in doc.items():
        path = f"{prefix}.{key}" if prefix else key
        if key not in schema:
            raise ConfigError("unknown key", path)
        kind = schema[key]
        if isinstance(kind, dict):
            validate(value, kind, path)
        else:
            _check_value(kind, value, path)


class Config:
    """A validated config document plus the directory it came from (for relative paths)."""

    def __init__(self, doc: dict, base_dir: Path | None = None):
        validate(doc)
        self.doc = doc
        self.base_dir = Path(base_dir) if base_dir else Path.cwd()

    @classmethod
    def load(cls, path) -> "Config":
        path = Path(path)
        text = path.read_text()
        try:
            doc = json.loads(text)
        except json.JSONDecodeError as exc:
            raise ConfigError(f"invalid JSON: {exc}", str(path)) from None
        return cls(doc, path.parent)

    @property
    def hash(self) -> str:
        return spec_hash(self.doc)

    def section(self, name: str, required: bool = True) -> dict:
        sec = self.doc.get(name)
        if sec is None:
            if required:
                raise ConfigError("missing section", name)
            return {}
        return sec

    def require(self, section: str, key: str):
        sec = self.section(section)
        if key not in sec:
            raise ConfigError("missing key", f"{section}.{key}")
        return sec[key]

    def seed(self, override: int | None = None) -> int:
        if override is not None:
            return int(override)
        if "seed" not in self.doc:
            raise ConfigError("seed is mandatory for stochastic commands", "seed")
        return int(self.doc["seed"])

    def resolve(self, rel: str) -> Path:
        p = Path(rel)
        return p if p.is_absolute() else self.base_dir / p


def _build(section_path, factory, **kwargs):
    try:
        return factory(**kwargs)
    except (ValueError, TypeError) as exc:
        raise ConfigError(str(exc), section_path) from None


def waveguide(cfg: Config) -> WaveguideSpec:
    s = dict(cfg.section("waveguide"))
    for key in ("length_mm", "a_eff_um2", "n2_m2_per_W"):
        cfg.require("waveguide", key)
    if "beta_tpa_cm_per_GW" in s:
        if "alpha_tpa_per_W_m" in s:
            raise ConfigError("give alpha_tpa_per_W_m or beta_tpa_cm_per_GW, not both", "waveguide")
        # cm/GW -> m/W
        s["alpha_tpa_per_W_m"] = tpa_bulk_to_waveguide(s.pop("beta_tpa_cm_per_GW") * 1e-11, s["a_eff_um2"] * 1e-12)
    return _build("waveguide", WaveguideSpec.from_lab_units,
                  length_mm=s["length_mm"], a_eff_um2=s["a_eff_um2"], n2_m2_per_w=s["n2_m2_per_W"],
                  beta2_ps2_per_m=s.get("beta2_ps2_per_m", 0.0), loss_db_per_cm=s.get("loss_dB_per_cm", 0.0),
                  alpha_tpa_per_w_m=s.get("alpha_tpa_per_W_m", 0.0), width_nm=s.get("width_nm", 510.0),
                  height_nm=s.get("height_nm", 340.0), sidewall_angle_deg=s.get("sidewall_angle_deg", 15.0),
                  beta3_ps3_per_m=s.get("beta3_ps3_per_m", 0.0))


def pump_wavelength(cfg: Config) -> float:
    return cfg.section("pump").get("wavelength_nm", 2071.5) * 1e-9


def pump_pulse(cfg: Config, peak_power: float | None = None):
    s = cfg.section("pump")
    fwhm = cfg.require("pump", "duration_fwhm_ps") * 1e-12
    p = s.get("peak_power_W", 1.0) if peak_power is None else peak_power
    grid = _build("pump", TimeGrid.for_pulse, fwhm=fwhm, n_samples=s.get("samples", 4096))
    return _build("pump", sech_pulse, peak_power=p, duration_fwhm=fwhm, grid=grid,
                  carrier_wavelength=pump_wavelength(cfg), rep_rate=s.get("rep_rate_hz", 39.4e6))


def _channel(d: dict, path: str) -> ChannelSpec:
    nm = {"coupler_center_nm": "coupler_center", "coupler_bw3db_nm": "coupler_bw3db",
          "filter_center_nm": "filter_center", "filter_width_nm": "filter_width"}
    db = {"coupler_peak_dB": "coupler_peak_db", "mono_loss_dB": "mono_loss_db",
          "pump_rejection_dB": "pump_rejection_db", "fiber_loss_dB": "fiber_loss_db"}
    kw = {}
    for k, v in d.items():
        if k in nm:
            kw[nm[k]] = v * 1e-9
        elif k in db:
            kw[db[k]] = v
        else:
            kw[k] = v
    return _build(path, ChannelSpec, **kw)


def _detector(d: dict, path: str) -> DetectorSpec:
    kw = {
        "sde": d.get("sde", 0.44),
        "dcr_dark": d.get("dcr_dark_hz", 0.0),
        "bb_rate": d.get("bb_rate_hz", 0.0),
        "dead_time": d.get("dead_time_ns", 0.0) * 1e-9,
        "fiber_loss_db": d.get("fiber_loss_dB", 0.0),
        "bias_ua": d.get("bias_uA", 8.0),
    }
    if "jitter_fwhm_ps" in d:
        kw["jitter_fwhm"] = d["jitter_fwhm_ps"] * 1e-12
    return _build(path, DetectorSpec, **kw)


def channels(cfg: Config) -> tuple[ChannelSpec, ChannelSpec]:
    s = cfg.section("channels")
    return tuple(_channel(s.get(k, {}), f"channels.{k}") for k in ("A", "B"))


def detectors(cfg: Config) -> tuple[DetectorSpec, DetectorSpec]:
    s = cfg.section("detectors")
    return tuple(_detector(s.get(k, {}), f"detectors.{k}") for k in ("A", "B"))


def source(cfg: Config) -> SourceSpec:
    s = cfg.section("source")
    return _build("source", SourceSpec, xi=s.get("xi_per_W2", 0.28), rep_rate=s.get("rep_rate_hz", 39.4e6),
                  linear_noise_b=s.get("linear_noise_b_per_W", 0.0), duty_cycle=s.get("duty_cycle", 2.6e-4),
                  statistics=s.get("statistics", "poisson"))


def bias_model(cfg: Config) -> BiasCurveModel:
    s = cfg.section("detector")
    return _build("detector", BiasCurveModel, sde_max=s.get("sde_max", 0.44), i_half=s.get("i_half_uA", 7.0),
                  i_width=s.get("i_width_uA", 0.3), dcr0=s.get("dcr0_hz", 1e-4), i_dcr=s.get("i_dcr_uA", 1.0),
                  bb_floor=s.get("bb_floor_hz", 300.0))


def to_doc(obj) -> dict:
    """Plain dict of a dataclass, for the config hash."""
    return {f.name: getattr(obj, f.name) for f in fields(obj)} if is_dataclass(obj) else dict(obj)


def bundled(name: str) -> Path:
    """Path of a config shipped with the package (``reference``, ``zero_power`` ...)."""
    ref = resources.files("mirpairs") / "configs" / (name if name.endswith(".json") else f"{name}.json")
    return Path(str(ref))


def bundled_names() -> list[str]:
    folder = resources.files("mirpairs") / "configs"
    return sorted(p.name[:-5] for p in folder.iterdir() if p.name.endswith(".json"))
