"""INI experiment configuration with defaults, validation and RYDLINK_* environment overrides."""

import configparser
from dataclasses import dataclass
import hashlib
import json
import math
import os

from .constants import CONST, TWO_PI, CS_MASS
from .performance import Modulation, build_scenario
from .quantum_core import AtomicSystem, DriveFields
from .receiver import FrontEnd, LinkScenario

ENV_PREFIX = "RYDLINK_"


class ConfigError(Exception):
    pass


class ParseError(ConfigError):
    pass


class UnknownKey(ConfigError):
    pass


class ValidationError(ConfigError):
    def __init__(self, field, message):
        super().__init__(f"{field}: {message}")
        self.field = field


# (type, default, rule). Rules: pos, nonneg, any, or a tuple of allowed strings.
# A default of None means "derive from the other parameters".
SCHEMA = {
    "atom": {
        "gamma2_hz": (float, 5.2e6, "pos"),
        "gamma3_hz": (float, 3.9e3, "nonneg"),
        "gamma4_hz": (float, 1.7e3, "nonneg"),
        "dip12_ea0": (float, 2.5, "pos"),
        "dip_rf_ea0": (float, -1443.459, "any"),
        "n_density": (float, 4.89e16, "pos"),
        "cell_length": (float, 0.01, "pos"),
        "vapor_temperature": (float, 290.0, "pos"),
    },
    "drive": {
        "omega_p_hz": (float, 8e6, "pos"),
        "omega_c_hz": (float, 1e6, "pos"),
        "omega_rf_hz": (float, 6e6, "nonneg"),
        "omega_lo_hz": (float, None, "pos"),
        "delta_p_hz": (float, 0.0, "any"),
        "delta_c_hz": (float, 0.0, "any"),
        "delta_rf_hz": (float, 0.0, "any"),
        "lambda_p": (float, 852e-9, "pos"),
        "lambda_c": (float, 510e-9, "pos"),
        "beam_diam_p": (float, 0.76e-3, "pos"),
    },
    "link": {
        "p_tx_dbm": (float, 30.0, "any"),
        "g_tx_dbi": (float, 2.15, "any"),
        "g_rx_dbi": (float, 2.15, "any"),
        "distance": (float, 100.0, "pos"),
        "f_rf": (float, 6.9e9, "pos"),
        "bandwidth": (float, 1e5, "pos"),
        "channel_h": (float, 1.0, "pos"),
    },
    "frontend": {
        "kind": (str, "TIA", ("TIA", "LNA")),
        "g_lna": (float, 100.0, "pos"),
        "r_load": (float, 50.0, "pos"),
        "responsivity": (float, 0.55, "pos"),
        "eta_eff": (float, 0.5, "nonneg"),
        "noise_factor": (float, 2.0, "pos"),
        "psn_to_power": (str, "unit", ("unit", "load")),
    },
    "noise": {
        "temperature": (float, 290.0, "pos"),
        "t2": (float, 10e-6, "pos"),
        "detection_mode": (str, "heterodyne", ("heterodyne", "homodyne")),
        "planck_convention": (str, "h", ("h", "hbar")),
        "n_atoms": (float, None, "pos"),
        "sql_mode": (bool, False, "any"),
    },
    "experiment": {
        "seed": (int, 42, "nonneg"),
        "kappa_mode": (str, "fixed", ("fixed", "adaptive")),
        "conventional_snr_variant": (str, "asymmetric", ("asymmetric", "symmetric")),
        "alpha": (float, None, "pos"),
        "gamma_fwhm_hz": (float, None, "pos"),
        "thd_tolerance": (float, 0.01, "pos"),
        "spectrum_span_hz": (float, 10e6, "pos"),
        "spectrum_points": (int, 401, "pos"),
        "spectrum_rf_hz": (list, "0, 2e6, 4e6, 6e6, 8e6", "nonneg"),
        "splitting_r_min": (float, 0.2, "pos"),
        "splitting_r_max": (float, 3.0, "pos"),
        "splitting_r_points": (int, 57, "pos"),
        "ldr_points": (int, 200, "pos"),
        "distance_min": (float, 10.0, "pos"),
        "distance_max": (float, 1e4, "pos"),
        "distance_points": (int, 61, "pos"),
        "mi_snr_db_min": (float, -10.0, "any"),
        "mi_snr_db_max": (float, 30.0, "any"),
        "mi_points": (int, 41, "pos"),
        "ser_snr_db_min": (float, 0.0, "any"),
        "ser_snr_db_max": (float, 24.0, "any"),
        "ser_points": (int, 13, "pos"),
        "ser_symbols": (int, 1_000_000, "pos"),
        "ser_modulations": (list, "4-PAM, 16-QAM", "any"),
    },
}


def _parse_value(field, kind, raw):
    raw = raw.strip()
    if raw == "" or raw.lower() == "auto":
        return None
    try:
        if kind is bool:
            low = raw.lower()
            if low in ("1", "true", "yes", "on"):
                return True
            if low in ("0", "false", "no", "off"):
                return False
            raise ValueError(raw)
        if kind is int:
            value = float(raw)
            if value != int(value):
                raise ValueError(raw)
            return int(value)
        if kind is float:
            return float(raw)
        if kind is list:
            return [item.strip() for item in raw.split(",") if item.strip()]
        return raw
    except ValueError:
        raise ValidationError(field, f"cannot parse {raw!r} as {kind.__name__}") from None


def _check(field, rule, value):
    if value is None:
        return
    if isinstance(rule, tuple):
        if value not in rule:
            raise ValidationError(field, f"must be one of {rule}, got {value!r}")
        return
    values = value if isinstance(value, list) else [value]
    for v in values:
        if rule in ("pos", "nonneg"):
            try:
                x = float(v)
            except ValueError:
                raise ValidationError(field, f"{v!r} is not a number") from None
            if not math.isfinite(x) or x < 0 or (rule == "pos" and x == 0):
                raise ValidationError(field, f"must be {'positive' if rule == 'pos' else 'non-negative'}, got {v}")
        elif isinstance(v, float) and not math.isfinite(v):
            raise ValidationError(field, "must be finite")


@dataclass(frozen=True)
class ExperimentConfig:
    values: dict

    def __getitem__(self, section):
        return self.values[section]

    def canonical_json(self):
        return json.dumps(self.values, sort_keys=True, separators=(",", ":"))

    @property
    def config_hash(self):
        return hashlib.sha256(self.canonical_json().encode()).hexdigest()

    # object builders -------------------------------------------------------
    def atomic_system(self):
        a = self["atom"]
        ea0 = CONST.e_charge * CONST.a0
        return AtomicSystem(
            gamma=(0.0, TWO_PI * a["gamma2_hz"], TWO_PI * a["gamma3_hz"], TWO_PI * a["gamma4_hz"]),
            dip12=a["dip12_ea0"] * ea0, dip_rf=a["dip_rf_ea0"] * ea0,
            n_density=a["n_density"], atom_mass=CS_MASS, cell_length=a["cell_length"],
            temperature=a["vapor_temperature"],
        )

    def drive_fields(self):
        d = self["drive"]
        return DriveFields(
            omega_p=TWO_PI * d["omega_p_hz"], omega_c=TWO_PI * d["omega_c_hz"],
            delta_p=TWO_PI * d["delta_p_hz"], delta_c=TWO_PI * d["delta_c_hz"],
            delta_rf=TWO_PI * d["delta_rf_hz"], lambda_p=d["lambda_p"], lambda_c=d["lambda_c"],
            beam_diam_p=d["beam_diam_p"],
        )

    def link(self):
        k = self["link"]
        return LinkScenario(
            p_tx=10 ** (k["p_tx_dbm"] / 10) * 1e-3, g_tx=10 ** (k["g_tx_dbi"] / 10),
            d_txrx=k["distance"], f_rf=k["f_rf"], bandwidth=k["bandwidth"],
            channel_h=k["channel_h"], g_rx=10 ** (k["g_rx_dbi"] / 10),
        )

    def front_end(self):
        return FrontEnd(**self["frontend"])

    def modulations(self):
        mods = []
        for item in self["experiment"]["ser_modulations"]:
            order, _, family = item.partition("-")
            try:
                mods.append(Modulation(family.upper(), int(order)))
            except ValueError as exc:
                raise ValidationError("experiment.ser_modulations", str(exc)) from None
        return mods

    def scenario(self, **overrides):
        d, n, e = self["drive"], self["noise"], self["experiment"]
        kw = dict(
            omega_lo=None if d["omega_lo_hz"] is None else TWO_PI * d["omega_lo_hz"],
            temperature=n["temperature"], t2=n["t2"], detection_mode=n["detection_mode"],
            planck_convention=n["planck_convention"], sql_mode=n["sql_mode"],
            kappa_mode=e["kappa_mode"], conventional_variant=e["conventional_snr_variant"],
            alpha=e["alpha"],
            gamma_fwhm=None if e["gamma_fwhm_hz"] is None else TWO_PI * e["gamma_fwhm_hz"],
            n_atoms=n["n_atoms"], thd_tolerance=e["thd_tolerance"],
        )
        kw.update(overrides)
        return build_scenario(self.atomic_system(), self.drive_fields(), self.link(),
                              self.front_end(), **kw)


def _validate_objects(cfg):
    builders = (("atom", cfg.atomic_system), ("drive", cfg.drive_fields), ("link", cfg.link),
                ("frontend", cfg.front_end), ("experiment", cfg.modulations))
    for section, build in builders:
        try:
            build()
        except ConfigError:
            raise
        except (ValueError, TypeError) as exc:
            raise ValidationError(section, str(exc)) from None
    e = cfg["experiment"]
    for lo, hi in (("splitting_r_min", "splitting_r_max"), ("distance_min", "distance_max"),
                   ("mi_snr_db_min", "mi_snr_db_max"), ("ser_snr_db_min", "ser_snr_db_max")):
        if e[lo] > e[hi]:
            raise ValidationError(f"experiment.{lo}", f"must not exceed {hi}")
    if not e["thd_tolerance"] < 1:
        raise ValidationError("experiment.thd_tolerance", "must lie in (0, 1)")
    if e["spectrum_points"] < 3:
        raise ValidationError("experiment.spectrum_points", "needs at least 3 points")


def load_config(path=None, environ=None) -> ExperimentConfig:
    """Read an INI file (or none) and apply defaults and RYDLINK_<SECTION>_<KEY> overrides."""
    parser = configparser.ConfigParser(interpolation=None)
    parser.optionxform = str
    if path is not None:
        try:
            with open(path, encoding="utf-8") as fh:
                parser.read_file(fh)
        except FileNotFoundError:
            raise ConfigError(f"config file not found: {path}") from None
        except configparser.Error as exc:
            raise ParseError(f"{path}: {exc}") from None
    raw = {section: {} for section in SCHEMA}
    for section in parser.sections():
        if section not in SCHEMA:
            raise UnknownKey(f"unknown section [{section}]")
        for key, value in parser.items(section):
            if key not in SCHEMA[section]:
                raise UnknownKey(f"unknown key {section}.{key}")
            raw[section][key] = value
    environ = os.environ if environ is None else environ
    for name, value in environ.items():
        if not name.startswith(ENV_PREFIX):
            continue
        rest = name[len(ENV_PREFIX):].lower()
        section = next((s for s in SCHEMA if rest.startswith(s + "_")), None)
        key = rest[len(section) + 1:] if section else None
        if section is None or key not in SCHEMA[section]:
            raise UnknownKey(f"environment variable {name} does not map to a config key")
        raw[section][key] = value

    values = {}
    for section, fields in SCHEMA.items():
        values[section] = {}
        for key, (kind, default, rule) in fields.items():
            name = f"{section}.{key}"
            if key in raw[section]:
                value = _parse_value(name, kind, raw[section][key])
            else:
                value = default
            if kind is list and isinstance(value, str):
                value = _parse_value(name, kind, value)
            if kind is list and value is None:
                value = []
            _check(name, rule, value)
            values[section][key] = value
    cfg = ExperimentConfig(values)
    _validate_objects(cfg)
    return cfg
