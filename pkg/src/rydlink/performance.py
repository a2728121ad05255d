"""Link-level figures of merit: SNR, sensitivity, dynamic range, mutual information and SER."""

from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, asdict, field
import math

import numpy as np
from scipy.special import erfc, i0e, i1e

from .noise import (
    NoiseEnvironment,
    noise_budget,
    compose_sql,
    lo_free_power,
    transduction_gain_lo_free,
)
from .quantum_core import AtomicSystem, DriveFields
from .receiver import (
    FrontEnd,
    effective_aperture,
    n_atoms_cylinder,
    LinkScenario,
    coherent_channel,
    conventional_aperture,
    lo_dressed_amplitude,
    magnitude_channel,
    rabi_from_field,
    received_field,
    received_power,
    snr_conventional,
)
from .spectroscopy import (
    LinearizedReadout,
    ProbeGeometry,
    four_level_hwhm,
    linearized_readout,
    beat_grid,
    harmonic_spectrum,
    probe_beat_signal,
)

EULER_GAMMA = 0.57721566490153286061
RESOLVABILITY_THRESHOLD = 1.0


class UnsupportedOrder(ValueError):
    pass


# --- resolvability penalty -------------------------------------------------

def penalty_g(r):
    """G(r) = r^2 / (1 + 1/(2 r^2)), written as 2r^4/(2r^2+1) so that G(0) = 0."""
    r = np.asarray(r, dtype=float)
    if np.any(r < 0):
        raise ValueError("r must be non-negative")
    g = 2 * r**4 / (2 * r**2 + 1)
    return float(g) if g.ndim == 0 else g


@dataclass(frozen=True)
class ResolvabilityRatio:
    r: float
    g_of_r: float

    def __post_init__(self):
        if self.r < 0:
            raise ValueError("r must be non-negative")

    @classmethod
    def from_rabi(cls, omega_rf, gamma_fwhm):
        if not gamma_fwhm > 0:
            raise ValueError("gamma_fwhm must be positive")
        r = abs(omega_rf) / gamma_fwhm
        return cls(r, penalty_g(r))

    @property
    def resolved(self):
        return self.r >= RESOLVABILITY_THRESHOLD


def two_lorentzian_transmission(delta_c, omega_rf, gamma_fwhm, contrast):
    hw2 = (gamma_fwhm / 2) ** 2
    return 1 - contrast * sum(hw2 / ((delta_c - s * omega_rf / 2) ** 2 + hw2) for s in (1, -1))


def fisher_penalty_numeric(r, contrast=0.1, half_span=20.0, points=20001):
    """Omega^2 I(Omega) Gamma^2 / (8 N_ph C^2) from the Poisson Fisher integral.

    Units are Gamma_FWHM = 1 and N_ph = 1; the integral is a trapezoid over
    Delta_c in [-half_span, half_span].
    """
    if not 0 < contrast < 0.5:
        raise ValueError("contrast must lie in (0, 0.5) to keep the transmission positive")
    x = np.linspace(-half_span, half_span, points)
    hw2 = 0.25
    dt = np.zeros_like(x)
    for s in (1, -1):
        u = x - s * r / 2
        dt -= contrast * hw2 * s * u / (u**2 + hw2) ** 2
    fisher = np.trapezoid(dt**2 / two_lorentzian_transmission(x, r, 1.0, contrast), x)
    return r**2 * fisher / (8 * contrast**2)


# --- SNR and sensitivity ---------------------------------------------------

def resolvability(link: LinkScenario, sys: AtomicSystem, gamma_fwhm):
    w = rabi_from_field(received_field(link, sys.const), sys.dip_rf, sys.const)
    return ResolvabilityRatio.from_rabi(w, gamma_fwhm)


def snr_lo_free(link: LinkScenario, sys: AtomicSystem, sigma2_ry, gamma_fwhm, a_eff):
    """P_Rx|h|^2/sigma^2 times (dip/(hbar*Gamma_FWHM))^2 times G(R)."""
    if not sigma2_ry > 0:
        raise ValueError("sigma2_ry must be positive")
    link_snr = received_power(link, a_eff) * abs(link.channel_h) ** 2 / sigma2_ry
    conv_gain = (sys.dip_rf / (sys.const.hbar * gamma_fwhm)) ** 2
    return link_snr * conv_gain * resolvability(link, sys, gamma_fwhm).g_of_r


def sensitivity_lo_free(sys: AtomicSystem, sigma2_ry, gamma_fwhm, a_eff, h=1.0):
    """Minimum detectable field (V/m) where the large-R SNR equals one."""
    if not (a_eff > 0 and gamma_fwhm > 0) or sigma2_ry < 0:
        raise ValueError("a_eff, gamma_fwhm must be positive and sigma2_ry non-negative")
    k = sys.const
    pre = k.hbar * gamma_fwhm / abs(sys.dip_rf)
    return pre * (2 * k.Z0 * sigma2_ry / (a_eff * abs(h) ** 2)) ** 0.25


def snr_lo_dressed(link: LinkScenario, front: FrontEnd, kappa, sys: AtomicSystem, sigma2_ry_lo):
    if not sigma2_ry_lo > 0:
        raise ValueError("sigma2_ry_lo must be positive")
    amp = lo_dressed_amplitude(link, front, kappa, sys)
    return (amp * abs(link.channel_h)) ** 2 / sigma2_ry_lo


# --- dynamic range -----------------------------------------------------------

def lambda_derivatives(omega_lo, gamma):
    """First three derivatives of Gamma^2/(Gamma^2+W^2) at W = omega_lo."""
    g2, w2 = gamma**2, omega_lo**2
    s = g2 + w2
    d1 = -2 * g2 * omega_lo / s**2
    d2 = -2 * g2 * (g2 - 3 * w2) / s**3
    d3 = 24 * g2 * omega_lo * (g2 - w2) / s**4
    return d1, d2, d3


@dataclass(frozen=True)
class DynamicRange:
    omega_rf_min: float
    omega_rf_max2: float
    omega_rf_max3: float
    thd_tolerance: float
    lambda_derivs: tuple

    def __post_init__(self):
        if not (self.omega_rf_max2 > 0 and self.omega_rf_max3 > 0) or self.omega_rf_min < 0:
            raise ValueError("dynamic-range bounds must be positive")

    @property
    def omega_rf_max(self):
        return min(self.omega_rf_max2, self.omega_rf_max3)

    @property
    def usable(self):
        return self.omega_rf_min < self.omega_rf_max

    @property
    def ldr_db(self):
        if self.omega_rf_min == 0:
            return math.inf
        return 20 * math.log10(self.omega_rf_max / self.omega_rf_min)


def dynamic_range(readout: LinearizedReadout, epsilon, sensitivity_floor) -> DynamicRange:
    """Second- and third-order linearity bounds on Omega_RF for a THD tolerance.

    The second-order bound is infinite when the LO sits at Gamma/sqrt(3),
    where the curvature of the Lorentzian vanishes.
    """
    if not 0 < epsilon < 1:
        raise ValueError("epsilon must lie in (0, 1)")
    gamma, w = readout.gamma_hwhm, readout.omega_lo
    d1, d2, d3 = lambda_derivatives(w, gamma)
    if abs(gamma**2 - 3 * w**2) <= 1e-9 * gamma**2:
        d2 = 0.0
    max2 = math.inf if d2 == 0 else 4 * epsilon * abs(d1) / abs(d2)
    max3 = math.inf if d3 == 0 else math.sqrt(6 * epsilon * abs(d1) / abs(d3))
    return DynamicRange(sensitivity_floor, max2, max3, epsilon, (d1, d2, d3))


def thd_sweep(readout: LinearizedReadout, omega_rf_grid, delta_f=1e3, periods=4,
              samples_per_period=256, delta_phi=0.0):
    """Harmonic ratios of the exact beat note for each RF amplitude.

    Returns (h2/h1, h3/h1, thd) arrays with thd = sqrt(h2^2 + h3^2)/h1.
    """
    t = beat_grid(delta_f, periods, samples_per_period)
    grid = np.asarray(omega_rf_grid, dtype=float)
    r2 = np.empty_like(grid)
    r3 = np.empty_like(grid)
    for i, w in enumerate(grid):
        sig = probe_beat_signal(readout, w, delta_f, delta_phi, t)
        a1, a2, a3 = harmonic_spectrum(sig, t, delta_f)
        r2[i] = a2 / a1
        r3[i] = a3 / a1
    return r2, r3, np.hypot(r2, r3)


def first_crossing(x, y, level):
    """Linearly interpolated x where y first rises above level, or nan."""
    y = np.asarray(y)
    above = np.nonzero(y > level)[0]
    if above.size == 0:
        return math.nan
    i = int(above[0])
    if i == 0:
        return float(x[0])
    return float(x[i - 1] + (level - y[i - 1]) * (x[i] - x[i - 1]) / (y[i] - y[i - 1]))


def kappa_effective(readout: LinearizedReadout, omega_rf, delta_f=1e3, samples_per_period=256):
    """Beat-cycle averaged slope: fundamental amplitude of the exact beat over Omega_RF."""
    if omega_rf <= 0:
        return abs(readout.kappa)
    t = beat_grid(delta_f, 1, samples_per_period)
    t2 = beat_grid(delta_f, 2, samples_per_period)
    sig = probe_beat_signal(readout, omega_rf, delta_f, 0.0, t2)
    a1, _, _ = harmonic_spectrum(sig[: t.size], t, delta_f)
    return a1 / omega_rf


# --- mutual information ------------------------------------------------------

def mutual_info_lo_free(snr):
    """Rician-channel expression in nats with the Rician factor set to the SNR.

    Uses exponentially scaled Bessel functions, so large arguments cannot overflow.
    """
    r = np.asarray(snr, dtype=float)
    if np.any(r < 0):
        raise ValueError("snr must be non-negative")
    e0 = i0e(r)
    out = 0.5 * np.log(math.pi * (r + 1) / 2) - (np.log(e0) + r) + r * i1e(r) / e0
    return float(out) if out.ndim == 0 else out


def _exp_e1_scalar(x):
    if x <= 1.0:
        # E1(x) = -gamma - ln x - sum_{k>=1} (-x)^k / (k k!)
        term, total, k = 1.0, 0.0, 0
        while True:
            k += 1
            term *= -x / k
            inc = term / k
            total += inc
            if abs(inc) <= 1e-17 * abs(total) or k > 200:
                break
        return math.exp(x) * (-EULER_GAMMA - math.log(x) - total)
    # modified Lentz for 1/(x+1- 1/(x+3- 4/(x+5- ...)))
    tiny = 1e-300
    b = x + 1.0
    c = 1.0 / tiny
    d = 1.0 / b
    h = d
    for i in range(1, 500):
        a = -float(i * i)
        b += 2.0
        d = 1.0 / (a * d + b)
        c = b + a / c
        delta = c * d
        h *= delta
        if abs(delta - 1.0) < 1e-16:
            break
    return h


def exp_e1(x):
    """e^x E1(x) for x > 0 to about 1e-13 relative accuracy."""
    arr = np.asarray(x, dtype=float)
    if np.any(arr <= 0):
        raise ValueError("x must be positive")
    out = np.vectorize(_exp_e1_scalar, otypes=[float])(arr)
    return float(out) if out.ndim == 0 else out


def mutual_info_lo_dressed_raw(snr):
    """e^{1/SNR} E1(1/SNR); zero at SNR = 0."""
    s = np.asarray(snr, dtype=float)
    if np.any(s < 0):
        raise ValueError("snr must be non-negative")
    out = np.zeros_like(s)
    pos = s > 0
    if np.any(pos):
        out[pos] = exp_e1(1.0 / s[pos])
    return float(out) if out.ndim == 0 else out


def mutual_info_lo_dressed(snr):
    """Coherent-channel expression including its trailing ln 2 factor."""
    return mutual_info_lo_dressed_raw(snr) * math.log(2)


# --- symbol error rate -------------------------------------------------------

SUPPORTED_ORDERS = {"PAM": (2, 4, 8, 16, 64), "QAM": (4, 16, 64)}


@dataclass(frozen=True)
class Modulation:
    family: str
    order: int

    def __post_init__(self):
        if self.family not in SUPPORTED_ORDERS:
            raise UnsupportedOrder(f"unknown modulation family {self.family!r}")
        if self.order not in SUPPORTED_ORDERS[self.family]:
            raise UnsupportedOrder(f"{self.family} order {self.order} is not supported")

    def __str__(self):
        return f"{self.order}-{self.family}"


def PAM(m):
    return Modulation("PAM", m)


def QAM(m):
    return Modulation("QAM", m)


def q_function(x):
    return 0.5 * erfc(np.asarray(x, dtype=float) / math.sqrt(2))


def ser_closed_form(mod: Modulation, snr):
    s = np.asarray(snr, dtype=float)
    if np.any(s < 0):
        raise ValueError("snr must be non-negative")
    m = mod.order
    if mod.family == "PAM":
        out = 2 * (m - 1) / m * q_function(np.sqrt(6 * s / (m**2 - 1)))
    else:
        p = 2 * (1 - 1 / math.sqrt(m)) * q_function(np.sqrt(3 * s / (m - 1)))
        out = 1 - (1 - p) ** 2
    return float(out) if out.ndim == 0 else out


def _ser_chunk(mod: Modulation, snr, n, seed_seq):
    rng = np.random.Generator(np.random.Philox(seed_seq))
    m = mod.order
    if mod.family == "PAM":
        # envelope detection: magnitudes (2k+1), noise set by the bipolar-equivalent energy
        idx = rng.integers(0, m, n)
        levels = 2.0 * np.arange(m) + 1.0
        sigma2 = (m**2 - 1) / (3 * snr)
        z = magnitude_channel(1.0, levels[idx], sigma2, rng)
        det = np.clip(np.floor(z / 2.0), 0, m - 1).astype(int)
        return int(np.count_nonzero(det != idx))
    side = int(round(math.sqrt(m)))
    ii = rng.integers(0, side, n)
    qq = rng.integers(0, side, n)
    x = (2.0 * ii - (side - 1)) + 1j * (2.0 * qq - (side - 1))
    sigma2 = 2 * (m - 1) / 3 / snr
    z = coherent_channel(1.0, x, sigma2, rng)
    di = np.clip(np.round((z.real + side - 1) / 2), 0, side - 1).astype(int)
    dq = np.clip(np.round((z.imag + side - 1) / 2), 0, side - 1).astype(int)
    return int(np.count_nonzero((di != ii) | (dq != qq)))


def ser_monte_carlo(mod: Modulation, snr, n_symbols, seed, workers=1, chunk=1 << 17):
    """Simulated SER; identical for any worker count because each chunk owns a seed stream.

    PAM uses the LO-free envelope channel with nearest-magnitude decisions;
    QAM uses the coherent LO-dressed channel with per-axis slicing.
    """
    if not snr > 0:
        raise ValueError("snr must be positive")
    if n_symbols < 1:
        raise ValueError("n_symbols must be positive")
    sizes = [chunk] * (n_symbols // chunk)
    if n_symbols % chunk:
        sizes.append(n_symbols % chunk)
    root = seed if isinstance(seed, np.random.SeedSequence) else np.random.SeedSequence(seed)
    seqs = root.spawn(len(sizes))
    jobs = list(zip(sizes, seqs))
    if workers > 1:
        with ThreadPoolExecutor(max_workers=workers) as pool:
            counts = list(pool.map(lambda j: _ser_chunk(mod, snr, j[0], j[1]), jobs))
    else:
        counts = [_ser_chunk(mod, snr, n, s) for n, s in jobs]
    return sum(counts) / n_symbols


def binomial_se(p, n):
    return math.sqrt(p * (1 - p) / n)


# --- distance sweep ----------------------------------------------------------

@dataclass(frozen=True)
class ReceiverScenario:
    """Everything needed to evaluate all receiver modes at one link geometry."""
    sys: AtomicSystem
    drives: DriveFields
    link: LinkScenario
    front: FrontEnd
    env: NoiseEnvironment
    geom: ProbeGeometry
    readout: LinearizedReadout
    gamma_fwhm: float
    a_eff: float
    kappa_mode: str = "fixed"
    conventional_variant: str = "asymmetric"
    thd_tolerance: float = 0.01
    ser_modulation: Modulation = field(default_factory=lambda: QAM(16))

    def __post_init__(self):
        if self.kappa_mode not in ("fixed", "adaptive"):
            raise ValueError("kappa_mode must be 'fixed' or 'adaptive'")


@dataclass(frozen=True)
class PerfPoint:
    distance: float
    r: float
    snr_ry: float
    snr_ry_lo: float
    snr_ry_lo_adaptive: float
    snr_sql: float
    snr_conv: float
    mi_lo_free: float
    mi_lo_dressed: float
    ser: float
    kappa_eff: float

    def __post_init__(self):
        if not 0 <= self.ser <= 1:
            raise ValueError("ser must lie in [0, 1]")
        for name in ("snr_ry", "snr_ry_lo", "snr_ry_lo_adaptive", "snr_sql", "snr_conv"):
            if getattr(self, name) < 0:
                raise ValueError(f"{name} must be non-negative")

    def as_dict(self):
        return asdict(self)


def build_scenario(sys: AtomicSystem, drives: DriveFields, link: LinkScenario, front: FrontEnd,
                   omega_lo=None, temperature=290.0, t2=10e-6, detection_mode="heterodyne",
                   planck_convention="h", sql_mode=False, kappa_mode="fixed",
                   conventional_variant="asymmetric", alpha=None, gamma_fwhm=None, n_atoms=None,
                   thd_tolerance=0.01, ser_modulation=None) -> ReceiverScenario:
    """Assemble a scenario; unset quantities take their derived defaults.

    gamma_fwhm defaults to the four-level linewidth, n_atoms to the probe cylinder
    and omega_lo to the slope-optimal Gamma/sqrt(3).
    """
    geom = ProbeGeometry.from_system(sys, drives)
    gamma = four_level_hwhm(sys, drives.omega_p, drives.omega_c)
    if omega_lo is None:
        omega_lo = gamma / math.sqrt(3)
    readout = linearized_readout(sys, drives.omega_p, drives.omega_c, omega_lo, geom, alpha)
    gamma_fwhm = gamma if gamma_fwhm is None else gamma_fwhm
    n_atoms = n_atoms_cylinder(sys, drives.beam_diam_p) if n_atoms is None else n_atoms
    env = NoiseEnvironment(temperature, link.bandwidth, link.f_rf, n_atoms, detection_mode,
                           t2, sql_mode, planck_convention, sys.const)
    a_eff = effective_aperture(sys, n_atoms, link.f_rf, gamma_fwhm)
    return ReceiverScenario(sys, drives, link, front, env, geom, readout, gamma_fwhm, a_eff,
                            kappa_mode, conventional_variant, thd_tolerance,
                            ser_modulation or QAM(16))


def budget_at(scn: ReceiverScenario, link: LinkScenario):
    """Noise budget for the operating field of ``link``."""
    k = scn.sys.const
    e_field = received_field(link, k)
    g_ry = transduction_gain_lo_free(scn.sys, scn.drives, scn.geom, e_field)
    p_lo_free = lo_free_power(scn.sys, scn.drives, scn.geom, e_field)
    f_p = k.c_light / scn.drives.lambda_p
    return noise_budget(scn.env, scn.front, scn.sys.dip_rf, scn.a_eff,
                        conventional_aperture(link, k), p_lo_free, scn.readout.p_bar0,
                        f_p, g_ry=g_ry, kappa=scn.readout.kappa)


def perf_point(scn: ReceiverScenario, d) -> PerfPoint:
    link = scn.link.at_distance(d)
    budget = budget_at(scn, link)
    ratio = resolvability(link, scn.sys, scn.gamma_fwhm)
    snr_ry = snr_lo_free(link, scn.sys, budget.sigma2_ry, scn.gamma_fwhm, scn.a_eff)
    kappa = scn.readout.kappa
    snr_lo = snr_lo_dressed(link, scn.front, kappa, scn.sys, budget.sigma2_ry_lo)
    w_rf = rabi_from_field(received_field(link, scn.sys.const), scn.sys.dip_rf, scn.sys.const)
    k_eff = abs(kappa)
    if scn.kappa_mode == "adaptive":
        ldr = dynamic_range(scn.readout, scn.thd_tolerance, 0.0)
        if w_rf > ldr.omega_rf_max:
            k_eff = kappa_effective(scn.readout, w_rf)
    snr_adapt = snr_lo_dressed(link, scn.front, k_eff, scn.sys, budget.sigma2_ry_lo)
    sql_noise = compose_sql(budget.sigma2_qpn, budget.sigma2_psn_lo, scn.front)
    snr_sql = snr_lo_dressed(link, scn.front, kappa, scn.sys, sql_noise)
    snr_conv = snr_conventional(link, scn.front, budget.sigma2_ex_conv, budget.sigma2_tn,
                                scn.conventional_variant, scn.sys.const)
    lo_snr = snr_adapt if scn.kappa_mode == "adaptive" else snr_lo
    return PerfPoint(
        distance=float(d), r=ratio.r, snr_ry=snr_ry, snr_ry_lo=snr_lo,
        snr_ry_lo_adaptive=snr_adapt, snr_sql=snr_sql, snr_conv=snr_conv,
        mi_lo_free=mutual_info_lo_free(snr_ry), mi_lo_dressed=mutual_info_lo_dressed(lo_snr),
        ser=float(ser_closed_form(scn.ser_modulation, lo_snr)), kappa_eff=k_eff,
    )


def sweep_snr_vs_distance(scn: ReceiverScenario, d_grid, workers=1):
    """PerfPoint for every distance, returned in grid order whatever the worker count."""
    d_grid = [float(d) for d in d_grid]
    if workers > 1:
        with ThreadPoolExecutor(max_workers=workers) as pool:
            return list(pool.map(lambda d: perf_point(scn, d), d_grid))
    return [perf_point(scn, d) for d in d_grid]


def to_db(x):
    x = np.asarray(x, dtype=float)
    with np.errstate(divide="ignore"):
        out = 10 * np.log10(x)
    return float(out) if out.ndim == 0 else out
