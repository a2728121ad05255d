"""Command-line runner: one experiment per invocation, CSV data plus a JSON manifest."""

import argparse
from datetime import datetime, timezone
import hashlib
import json
import math
import os
import sys

import numpy as np

from . import __version__
from .config import ConfigError, load_config
from .constants import TWO_PI
from .noise import photocurrent
from .performance import (
    binomial_se,
    budget_at,
    dynamic_range,
    mutual_info_lo_dressed,
    mutual_info_lo_dressed_raw,
    mutual_info_lo_free,
    sensitivity_lo_free,
    ser_closed_form,
    ser_monte_carlo,
    sweep_snr_vs_distance,
    thd_sweep,
    to_db,
)
from .quantum_core import DegenerateDenominator, QuadratureNotConverged, SingularSystem
from .spectroscopy import (
    GridTooCoarse,
    NonIntegerPeriods,
    at_splitting_interval,
    slope_vs_lo,
    sweep_eit_spectrum,
)

EXPERIMENTS = ("spectrum", "splitting-map", "ldr", "snr-distance", "mi", "ser", "sensitivity")
EXIT_OK, EXIT_CONFIG, EXIT_NUMERIC, EXIT_IO = 0, 2, 3, 4
NUMERIC_ERRORS = (ArithmeticError, GridTooCoarse, NonIntegerPeriods, ValueError,
                  SingularSystem, DegenerateDenominator, QuadratureNotConverged)


class HashMismatch(ConfigError):
    pass


class Table:
    """Column-named rows destined for one CSV file."""

    def __init__(self, name, columns, meta=None):
        self.name = name
        self.columns = list(columns)
        self.rows = []
        self.meta = dict(meta or {})

    def add(self, *values):
        if len(values) != len(self.columns):
            raise ValueError(f"{self.name}: expected {len(self.columns)} values")
        self.rows.append(values)


def _fmt(value):
    if isinstance(value, (bool, np.bool_)):
        return "true" if value else "false"
    if isinstance(value, (int, np.integer)):
        return str(int(value))
    if isinstance(value, (float, np.floating)):
        return "%.12e" % value
    return str(value)


def render_csv(table: Table, header):
    lines = [f"# {k}: {v}" for k, v in header.items()]
    lines += [f"# {k}: {_fmt(v)}" for k, v in table.meta.items()]
    lines.append(",".join(table.columns))
    lines += [",".join(_fmt(v) for v in row) for row in table.rows]
    return "\n".join(lines) + "\n"


# --- experiments ---------------------------------------------------------------

def _spectrum_block(cfg, sys, drives, grid, w_rf):
    spectrum = sweep_eit_spectrum(sys, drives.with_(rf_drive=w_rf), grid, solver="full")
    split = at_splitting_interval(spectrum)
    return spectrum, split


def exp_spectrum(cfg, seed, workers):
    sys, drives = cfg.atomic_system(), cfg.drive_fields()
    e = cfg["experiment"]
    grid = TWO_PI * np.linspace(-e["spectrum_span_hz"], e["spectrum_span_hz"], e["spectrum_points"])
    table = Table("spectrum", ["omega_rf_hz", "delta_c_hz", "p_out_w", "unresolved",
                               "splitting_hz", "linewidth_fwhm_hz"])
    for f_rf in (float(v) for v in e["spectrum_rf_hz"]):
        spectrum, split = _spectrum_block(cfg, sys, drives, grid, TWO_PI * f_rf)
        split_hz = split / TWO_PI if split else math.nan
        for x, p in zip(grid, spectrum.transmission):
            table.add(f_rf, x / TWO_PI, p, not split, split_hz, spectrum.linewidth_fwhm / TWO_PI)
    return [table]


def exp_splitting_map(cfg, seed, workers):
    sys, drives = cfg.atomic_system(), cfg.drive_fields()
    e = cfg["experiment"]
    grid = TWO_PI * np.linspace(-e["spectrum_span_hz"], e["spectrum_span_hz"], e["spectrum_points"])
    base = sweep_eit_spectrum(sys, drives, grid, solver="full")
    width = base.linewidth_fwhm
    ratios = np.linspace(e["splitting_r_min"], e["splitting_r_max"], e["splitting_r_points"])
    table = Table("splitting_map", ["r", "omega_rf_hz", "delta_c_hz", "p_out_norm",
                                    "resolved", "splitting_hz"],
                  meta={"eit_fwhm_hz": width / TWO_PI})
    for r in ratios:
        spectrum, split = _spectrum_block(cfg, sys, drives, grid, r * width)
        p = spectrum.transmission
        norm = (p - p.min()) / (p.max() - p.min())
        split_hz = split / TWO_PI if split else math.nan
        for x, v in zip(grid, norm):
            table.add(float(r), r * width / TWO_PI, x / TWO_PI, v, bool(split), split_hz)
    return [table]


def exp_ldr(cfg, seed, workers):
    scn = cfg.scenario()
    ro = scn.readout
    e = cfg["experiment"]
    gamma = ro.gamma_hwhm
    floor = sensitivity_lo_free(scn.sys, budget_at(scn, scn.link).sigma2_ry_lo, scn.gamma_fwhm,
                                scn.a_eff)
    floor_rabi = floor * abs(scn.sys.dip_rf) / scn.sys.const.hbar
    ldr = dynamic_range(ro, e["thd_tolerance"], floor_rabi)
    meta = {"gamma_hwhm_hz": gamma / TWO_PI, "omega_lo_hz": ro.omega_lo / TWO_PI,
            "omega_lo_opt_hz": ro.omega_lo_opt / TWO_PI, "alpha": ro.alpha,
            "omega_rf_max2_hz": ldr.omega_rf_max2 / TWO_PI,
            "omega_rf_max3_hz": ldr.omega_rf_max3 / TWO_PI,
            "omega_rf_min_hz": ldr.omega_rf_min / TWO_PI, "thd_tolerance": e["thd_tolerance"]}
    lo_grid = gamma * np.linspace(0.01, 2.0, e["ldr_points"])
    slope = Table("ldr_slope", ["omega_lo_hz", "slope_w_per_rad_s", "slope_norm"], meta)
    s = slope_vs_lo(ro, lo_grid)
    for w, v in zip(lo_grid, s):
        slope.add(w / TWO_PI, v, v / s.max())
    rf_grid = gamma * np.logspace(-3, math.log10(2.0), e["ldr_points"])
    thd = Table("ldr_thd", ["omega_rf_hz", "h2_over_h1", "h3_over_h1", "thd"], meta)
    r2, r3, t = thd_sweep(ro, rf_grid)
    for row in zip(rf_grid / TWO_PI, r2, r3, t):
        thd.add(*row)
    return [slope, thd]


def exp_snr_distance(cfg, seed, workers):
    scn = cfg.scenario()
    e = cfg["experiment"]
    d_grid = np.logspace(math.log10(e["distance_min"]), math.log10(e["distance_max"]),
                         e["distance_points"])
    pts = sweep_snr_vs_distance(scn, d_grid, workers)
    cols = ["distance_m", "r", "snr_ry_db", "snr_ry_lo_db", "snr_ry_lo_adaptive_db",
            "snr_sql_db", "snr_conv_db", "kappa_eff", "mi_lo_free_nats", "mi_lo_dressed",
            "ser_16qam"]
    table = Table("snr_distance", cols, {"kappa_mode": scn.kappa_mode,
                                          "conventional_variant": scn.conventional_variant})
    for p in pts:
        table.add(p.distance, p.r, to_db(p.snr_ry), to_db(p.snr_ry_lo),
                  to_db(p.snr_ry_lo_adaptive), to_db(p.snr_sql), to_db(p.snr_conv),
                  p.kappa_eff, p.mi_lo_free, p.mi_lo_dressed, p.ser)
    return [table]


def exp_mi(cfg, seed, workers):
    e = cfg["experiment"]
    snr_db = np.linspace(e["mi_snr_db_min"], e["mi_snr_db_max"], e["mi_points"])
    snr = 10 ** (snr_db / 10)
    table = Table("mi", ["snr_db", "snr", "mi_lo_free_nats", "mi_lo_dressed_ln2",
                         "mi_lo_dressed_raw"],
                  {"mi_lo_dressed_ln2": "e^(1/snr) E1(1/snr) multiplied by ln 2"})
    for row in zip(snr_db, snr, mutual_info_lo_free(snr), mutual_info_lo_dressed(snr),
                   mutual_info_lo_dressed_raw(snr)):
        table.add(*row)
    return [table]


def exp_ser(cfg, seed, workers):
    e = cfg["experiment"]
    snr_db = np.linspace(e["ser_snr_db_min"], e["ser_snr_db_max"], e["ser_points"])
    n = e["ser_symbols"]
    table = Table("ser", ["modulation", "snr_db", "ser_closed_form", "ser_monte_carlo",
                          "binomial_se", "symbols"])
    streams = np.random.SeedSequence(seed).spawn(len(cfg.modulations()) * len(snr_db))
    k = 0
    for mod in cfg.modulations():
        for s_db in snr_db:
            snr = 10 ** (s_db / 10)
            ref = float(ser_closed_form(mod, snr))
            mc = ser_monte_carlo(mod, snr, n, streams[k], workers)
            k += 1
            table.add(str(mod), s_db, ref, mc, binomial_se(ref, n), n)
    return [table]


def exp_sensitivity(cfg, seed, workers):
    scn = cfg.scenario()
    budget = budget_at(scn, scn.link)
    e_min = sensitivity_lo_free(scn.sys, budget.sigma2_ry, scn.gamma_fwhm, scn.a_eff,
                                scn.link.channel_h)
    table = Table("sensitivity", ["e_min_v_per_m", "e_min_uv_per_cm", "gamma_fwhm_hz",
                                  "a_eff_m2", "n_atoms", "bandwidth_hz", "sigma2_ry_w"])
    table.add(e_min, e_min * 1e4, scn.gamma_fwhm / TWO_PI, scn.a_eff, scn.env.n_atoms,
              scn.link.bandwidth, budget.sigma2_ry)
    return [table]


RUNNERS = {
    "spectrum": exp_spectrum,
    "splitting-map": exp_splitting_map,
    "ldr": exp_ldr,
    "snr-distance": exp_snr_distance,
    "mi": exp_mi,
    "ser": exp_ser,
    "sensitivity": exp_sensitivity,
}


def _noise_metadata(cfg):
    scn = cfg.scenario()
    budget = budget_at(scn, scn.link)
    f_p = scn.sys.const.c_light / scn.drives.lambda_p
    return {
        "distance_m": scn.link.d_txrx,
        "variances": budget.as_dict(),
        "photocurrent_lo_a": photocurrent(scn.front, scn.readout.p_bar0, f_p, scn.sys.const),
        "kappa_w_s": scn.readout.kappa,
        "p_bar0_w": scn.readout.p_bar0,
        "alpha": scn.readout.alpha,
        "gamma_hwhm_hz": scn.readout.gamma_hwhm / TWO_PI,
        "a_eff_m2": scn.a_eff,
        "n_atoms": scn.env.n_atoms,
        "psn_to_power": scn.front.psn_to_power,
    }


def run_experiment(cfg, which, out_dir, seed=None, workers=None):
    """Run one experiment, write its CSV files and manifest, return the manifest dict."""
    if which not in RUNNERS:
        raise ConfigError(f"unknown experiment {which!r}; choose from {EXPERIMENTS}")
    seed = cfg["experiment"]["seed"] if seed is None else seed
    workers = workers or os.cpu_count() or 1
    tables = RUNNERS[which](cfg, seed, workers)
    header = {"tool": f"rydlink {__version__}", "experiment": which,
              "config_hash": cfg.config_hash, "seed": seed}
    os.makedirs(out_dir, exist_ok=True)
    checksums = {}
    for table in tables:
        text = render_csv(table, header)
        fname = f"{table.name}.csv"
        with open(os.path.join(out_dir, fname), "w", encoding="utf-8", newline="\n") as fh:
            fh.write(text)
        checksums[fname] = hashlib.sha256(text.encode()).hexdigest()
    manifest = {
        "tool_version": __version__,
        "experiment": which,
        "config_hash": cfg.config_hash,
        "seed": seed,
        "timestamp": datetime.now(timezone.utc).isoformat(),
        "checksums": checksums,
        "config": cfg.values,
        "noise_budget": _noise_metadata(cfg),
    }
    with open(os.path.join(out_dir, f"{which}.json"), "w", encoding="utf-8") as fh:
        json.dump(manifest, fh, indent=2, sort_keys=True, default=str)
        fh.write("\n")
    return manifest


def _config_hash_of(path):
    with open(path, encoding="utf-8") as fh:
        for line in fh:
            if not line.startswith("#"):
                break
            if line.startswith("# config_hash:"):
                return line.split(":", 1)[1].strip()
    return None


def compare_outputs(path_a, path_b):
    """List differing data lines of two CSV outputs; refuses files from different configs."""
    ha, hb = _config_hash_of(path_a), _config_hash_of(path_b)
    if ha is None or ha != hb:
        raise HashMismatch(f"config hashes differ ({ha} vs {hb}); refusing to compare")
    with open(path_a, encoding="utf-8") as fa, open(path_b, encoding="utf-8") as fb:
        a, b = fa.read().splitlines(), fb.read().splitlines()
    diffs = [(i, x, y) for i, (x, y) in enumerate(zip(a, b), 1) if x != y]
    if len(a) != len(b):
        diffs.append((min(len(a), len(b)) + 1, f"<{len(a)} lines>", f"<{len(b)} lines>"))
    return diffs


def build_parser():
    p = argparse.ArgumentParser(prog="rydlink", description="Rydberg atomic receiver experiments")
    p.add_argument("--config", help="INI configuration file (defaults used when omitted)")
    p.add_argument("--out", default="out", help="output directory")
    p.add_argument("--seed", type=int, help="master seed, overrides [experiment] seed")
    p.add_argument("--workers", type=int, help="worker threads (default: all cores)")
    p.add_argument("--experiment", choices=EXPERIMENTS)
    p.add_argument("--compare", nargs=2, metavar=("A", "B"),
                   help="diff two CSV outputs that share a config hash")
    return p


def main(argv=None):
    args = build_parser().parse_args(argv)
    try:
        if args.compare:
            diffs = compare_outputs(*args.compare)
            for line, a, b in diffs:
                print(f"line {line}:\n  - {a}\n  + {b}")
            return EXIT_OK if not diffs else 1
        if not args.experiment:
            print("rydlink: --experiment is required", file=sys.stderr)
            return EXIT_CONFIG
        if args.seed is not None and not 0 <= args.seed < 2**64:
            raise ConfigError("seed must be an unsigned 64-bit integer")
        if args.workers is not None and args.workers < 1:
            raise ConfigError("workers must be >= 1")
        cfg = load_config(args.config)
        manifest = run_experiment(cfg, args.experiment, args.out, args.seed, args.workers)
    except ConfigError as exc:
        print(f"rydlink: config error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except OSError as exc:
        print(f"rydlink: I/O error: {exc}", file=sys.stderr)
        return EXIT_IO
    except NUMERIC_ERRORS as exc:
        print(f"rydlink: numerical failure in {args.experiment}: {type(exc).__name__}: {exc}",
              file=sys.stderr)
        return EXIT_NUMERIC
    for name, digest in manifest["checksums"].items():
        print(f"{os.path.join(args.out, name)}  sha256={digest}")
    return EXIT_OK


if __name__ == "__main__":
    sys.exit(main())
