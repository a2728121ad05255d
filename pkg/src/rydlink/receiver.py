"""Wireless link side: Friis budget, apertures and the receiver observation models."""

from dataclasses import dataclass
import math

import numpy as np

from .constants import CONST, TWO_PI
from .quantum_core import AtomicSystem

FRONT_END_KINDS = ("TIA", "LNA")
PSN_CONVERSIONS = ("unit", "load")


@dataclass(frozen=True)
class LinkScenario:
    p_tx: float
    g_tx: float
    d_txrx: float
    f_rf: float
    bandwidth: float
    channel_h: complex = 1.0
    g_rx: float = 1.0

    def __post_init__(self):
        if not (self.p_tx > 0 and self.d_txrx > 0 and self.bandwidth > 0 and self.f_rf > 0):
            raise ValueError("p_tx, d_txrx, f_rf and bandwidth must be positive")

    def at_distance(self, d):
        return LinkScenario(self.p_tx, self.g_tx, d, self.f_rf, self.bandwidth,
                            self.channel_h, self.g_rx)


@dataclass(frozen=True)
class FrontEnd:
    g_lna: float = 100.0
    r_load: float = 50.0
    responsivity: float = 0.55
    eta_eff: float = 0.5
    noise_factor: float = 2.0
    kind: str = "TIA"
    psn_to_power: str = "unit"

    def __post_init__(self):
        if self.g_lna < 1:
            raise ValueError("g_lna must be >= 1")
        if not (self.r_load > 0 and self.responsivity > 0):
            raise ValueError("r_load and responsivity must be positive")
        if not 0 <= self.eta_eff <= 1:
            raise ValueError("eta_eff must lie in [0, 1]")
        if self.kind not in FRONT_END_KINDS:
            raise ValueError(f"kind must be one of {FRONT_END_KINDS}")
        if self.psn_to_power not in PSN_CONVERSIONS:
            raise ValueError(f"psn_to_power must be one of {PSN_CONVERSIONS}")


@dataclass(frozen=True)
class Observation:
    value: np.ndarray
    snr_linear: float


def n_atoms_cylinder(sys: AtomicSystem, beam_diam):
    """Atoms inside the probe cylinder of the given diameter over the cell length."""
    return sys.n_density * math.pi * (beam_diam / 2) ** 2 * sys.cell_length


def effective_aperture(sys: AtomicSystem, n_atoms, f_rf, gamma_fwhm):
    if not (n_atoms > 0 and f_rf > 0 and gamma_fwhm > 0):
        raise ValueError("n_atoms, f_rf and gamma_fwhm must be positive")
    k = sys.const
    return 2 * k.Z0 * n_atoms * sys.dip_rf**2 * TWO_PI * f_rf / (k.hbar * gamma_fwhm)


def power_flux_density(link: LinkScenario):
    return link.p_tx * link.g_tx / (4 * math.pi * link.d_txrx**2)


def received_power(link: LinkScenario, a_eff):
    return power_flux_density(link) * a_eff


def conventional_aperture(link: LinkScenario, const=CONST):
    lam = const.c_light / link.f_rf
    return lam**2 * link.g_rx / (4 * math.pi)


def received_field(link: LinkScenario, const=CONST):
    """Peak field amplitude (V/m) of the incident plane wave."""
    return math.sqrt(2 * const.Z0 * power_flux_density(link))


def rabi_from_field(e_field, dip, const=CONST):
    if dip == 0:
        raise ValueError("dipole moment must be nonzero")
    return np.abs(e_field) * abs(dip) / const.hbar


def field_from_rabi(omega, dip, const=CONST):
    if dip == 0:
        raise ValueError("dipole moment must be nonzero")
    return np.abs(omega) * const.hbar / abs(dip)


def _complex_noise(rng, sigma2, shape):
    scale = math.sqrt(sigma2 / 2)
    return scale * (rng.standard_normal(shape) + 1j * rng.standard_normal(shape))


def magnitude_channel(gain, x, sigma2, rng):
    """Envelope detector output |gain*x + n| with circular noise of variance sigma2."""
    x = np.asarray(x, dtype=complex)
    return np.abs(gain * x + _complex_noise(rng, sigma2, x.shape))


def coherent_channel(gain, x, sigma2, rng):
    x = np.asarray(x, dtype=complex)
    return gain * x + _complex_noise(rng, sigma2, x.shape)


def observe_lo_free(link: LinkScenario, sys: AtomicSystem, sigma2_ry, a_eff, x, rng):
    """Magnitude observation (rad/s): Rabi-scaled |sqrt(P_Rx) h x + n|."""
    x = np.asarray(x, dtype=complex)
    p_rx = received_power(link, a_eff)
    z = abs(sys.dip_rf) / sys.const.hbar * magnitude_channel(
        math.sqrt(p_rx) * link.channel_h, x, sigma2_ry, rng)
    snr = p_rx * abs(link.channel_h) ** 2 / sigma2_ry if sigma2_ry > 0 else math.inf
    return Observation(z, snr)


def lo_dressed_amplitude(link: LinkScenario, front: FrontEnd, kappa, sys: AtomicSystem):
    """Noise-free output amplitude per unit symbol (sqrt(W)).

    The RF Rabi frequency is taken from the incident field amplitude, so the
    signal power is G_LNA * R_L * (D * kappa * Omega_RF)^2.
    """
    w_rf = rabi_from_field(received_field(link, sys.const), sys.dip_rf, sys.const)
    return math.sqrt(front.g_lna * front.r_load) * front.responsivity * abs(kappa) * w_rf


def observe_lo_dressed(link: LinkScenario, front: FrontEnd, kappa, sys: AtomicSystem,
                       sigma2_ry_lo, x, rng):
    x = np.asarray(x, dtype=complex)
    amp = lo_dressed_amplitude(link, front, kappa, sys)
    z = coherent_channel(amp * link.channel_h, x, sigma2_ry_lo, rng)
    snr = (amp * abs(link.channel_h)) ** 2 / sigma2_ry_lo if sigma2_ry_lo > 0 else math.inf
    return Observation(z, snr)


def snr_conventional(link: LinkScenario, front: FrontEnd, sigma2_ex_conv, sigma2_tn,
                     variant="asymmetric", const=CONST):
    """Superheterodyne baseline with a lambda^2 G_Rx / 4 pi aperture.

    ``variant="asymmetric"`` amplifies the signal by G_LNA but the extrinsic noise by
    G_LNA^2; ``"symmetric"`` applies G_LNA^2 to both.
    """
    if variant not in ("asymmetric", "symmetric"):
        raise ValueError("variant must be 'asymmetric' or 'symmetric'")
    p_rx = received_power(link, conventional_aperture(link, const))
    gain = front.g_lna if variant == "asymmetric" else front.g_lna**2
    return gain * p_rx * abs(link.channel_h) ** 2 / (front.g_lna**2 * sigma2_ex_conv + sigma2_tn)
