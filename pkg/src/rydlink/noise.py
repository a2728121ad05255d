"""Noise variances of the Rydberg and conventional front-ends and their compositions."""

from dataclasses import dataclass, asdict
import math

from .constants import CONST, TWO_PI, PhysicalConstants
from .quantum_core import AtomicSystem, DriveFields, rho21_closed_form
from .spectroscopy import ProbeGeometry, probe_transmission

DETECTION_MODES = ("homodyne", "heterodyne")
PLANCK_CONVENTIONS = ("h", "hbar")


@dataclass(frozen=True)
class NoiseEnvironment:
    temperature: float
    bandwidth: float
    f_rf: float
    n_atoms: float
    detection_mode: str = "heterodyne"
    t2: float = 10e-6
    sql_mode: bool = False
    planck_convention: str = "h"
    const: PhysicalConstants = CONST

    def __post_init__(self):
        if not (self.temperature > 0 and self.bandwidth > 0 and self.t2 > 0):
            raise ValueError("temperature, bandwidth and t2 must be positive")
        if self.detection_mode not in DETECTION_MODES:
            raise ValueError(f"detection_mode must be one of {DETECTION_MODES}")
        if self.planck_convention not in PLANCK_CONVENTIONS:
            raise ValueError(f"planck_convention must be one of {PLANCK_CONVENTIONS}")

    @property
    def rf_quantum(self):
        """Photon energy used in the thermal occupation (J)."""
        k = self.const
        return (k.h if self.planck_convention == "h" else k.hbar) * self.f_rf


def thermal_occupation(env: NoiseEnvironment):
    x = env.rf_quantum / (env.const.k_B * env.temperature)
    return 1.0 / math.expm1(x)


def theta(env: NoiseEnvironment):
    n = thermal_occupation(env)
    if env.detection_mode == "homodyne":
        return env.rf_quantum * (n / 2 + 0.5)
    return env.rf_quantum * (2 * n + 1)


def nef_extrinsic(env: NoiseEnvironment):
    """Black-body noise-equivalent field, V/m/sqrt(Hz)."""
    k = env.const
    return math.sqrt(16 * math.pi * env.f_rf**2 / (3 * k.eps0 * k.c_light**3) * theta(env))


def sigma2_extrinsic(env: NoiseEnvironment, a_eff):
    return nef_extrinsic(env) ** 2 / (2 * env.const.Z0) * a_eff * env.bandwidth


def e_sql(env: NoiseEnvironment, dip_rf):
    """Projection-noise-limited field, V/m/sqrt(Hz)."""
    if env.n_atoms < 1:
        raise ValueError("n_atoms must be at least 1")
    return env.const.hbar / (abs(dip_rf) * math.sqrt(env.n_atoms * env.t2))


def sigma2_qpn(env: NoiseEnvironment, dip_rf, a_eff):
    return e_sql(env, dip_rf) ** 2 * a_eff * env.bandwidth / (2 * env.const.Z0)


def photocurrent(front, p_out, f_p, const=CONST):
    if p_out < 0:
        raise ValueError("p_out must be non-negative")
    return front.eta_eff * const.e_charge * p_out / (TWO_PI * const.hbar * f_p)


def sigma2_psn(front, p_out, f_p, bandwidth, const=CONST):
    """Photocurrent shot-noise variance, A^2."""
    return 2 * const.e_charge * bandwidth * photocurrent(front, p_out, f_p, const)


def sigma2_tn(env: NoiseEnvironment, front):
    kt_b = env.const.k_B * env.temperature * env.bandwidth
    if front.kind == "TIA":
        return 4 * kt_b
    return front.noise_factor * kt_b


def psn_power(front, s2_psn):
    """Shot-noise variance expressed as power: 1 ohm reference or the load resistor."""
    return s2_psn * (front.r_load if front.psn_to_power == "load" else 1.0)


def compose_lo_free(s2_ex, s2_qpn, s2_psn, s2_tn, g_ry, front):
    d2 = front.responsivity**2
    g2 = front.g_lna**2
    return g_ry**2 * d2 * g2 * s2_ex + d2 * g2 * s2_qpn + g2 * psn_power(front, s2_psn) + s2_tn


def compose_lo_dressed(s2_ex, s2_qpn, s2_psn, s2_tn, kappa, front):
    return compose_lo_free(s2_ex, s2_qpn, s2_psn, s2_tn, kappa, front)


def compose_sql(s2_qpn, s2_psn, front):
    """Quantum-limited composite: projection and shot noise only."""
    g2 = front.g_lna**2
    return front.responsivity**2 * g2 * s2_qpn + g2 * psn_power(front, s2_psn)


def lo_free_power(sys: AtomicSystem, drives: DriveFields, geom: ProbeGeometry, e_field):
    """Probe power at the operating detunings for an RF field amplitude (V/m)."""
    w = abs(e_field) * abs(sys.dip_rf) / sys.const.hbar
    return probe_transmission(geom, rho21_closed_form(sys, drives.with_(rf_drive=w)))


def transduction_gain_lo_free(sys, drives, geom, e_field, rel_step=1e-4):
    """dP_out/dE_RF (W per V/m) by central difference at the operating field."""
    h = rel_step * abs(e_field)
    if h == 0:
        raise ValueError("operating field must be nonzero")
    hi = lo_free_power(sys, drives, geom, e_field + h)
    lo = lo_free_power(sys, drives, geom, e_field - h)
    return (hi - lo) / (2 * h)


@dataclass(frozen=True)
class NoiseBudget:
    sigma2_ex: float
    sigma2_qpn: float
    sigma2_psn: float
    sigma2_tn: float
    sigma2_ry: float
    sigma2_ry_lo: float
    sigma2_conv: float
    sigma2_psn_lo: float = 0.0
    sigma2_ex_conv: float = 0.0

    def __post_init__(self):
        for name, value in asdict(self).items():
            if value < 0:
                raise ValueError(f"{name} must be non-negative")

    def as_dict(self):
        return asdict(self)


def noise_budget(env: NoiseEnvironment, front, dip_rf, a_eff, a_conv, p_out_lo_free,
                 p_out_lo, f_p, g_ry=0.0, kappa=0.0) -> NoiseBudget:
    """All variances plus the LO-free, LO-dressed and conventional composites.

    With ``env.sql_mode`` both Rydberg composites keep only projection and shot noise.
    """
    s2_ex = sigma2_extrinsic(env, a_eff)
    s2_qpn = sigma2_qpn(env, dip_rf, a_eff)
    s2_psn = sigma2_psn(front, p_out_lo_free, f_p, env.bandwidth, env.const)
    s2_psn_lo = sigma2_psn(front, p_out_lo, f_p, env.bandwidth, env.const)
    s2_tn = sigma2_tn(env, front)
    s2_ex_conv = sigma2_extrinsic(env, a_conv)
    if env.sql_mode:
        ry = compose_sql(s2_qpn, s2_psn, front)
        ry_lo = compose_sql(s2_qpn, s2_psn_lo, front)
    else:
        ry = compose_lo_free(s2_ex, s2_qpn, s2_psn, s2_tn, g_ry, front)
        ry_lo = compose_lo_dressed(s2_ex, s2_qpn, s2_psn_lo, s2_tn, kappa, front)
    conv = front.g_lna**2 * s2_ex_conv + s2_tn
    return NoiseBudget(s2_ex, s2_qpn, s2_psn, s2_tn, ry, ry_lo, conv, s2_psn_lo, s2_ex_conv)
