"""Optical observables: probe transmission, EIT/AT spectra and the LO-dressed readout."""

from dataclasses import dataclass, field
import math

import numpy as np

from .constants import TWO_PI
from .quantum_core import (
    AtomicSystem,
    DriveFields,
    doppler_average,
    rho21_closed_form,
    rho21_full,
)


class GridTooCoarse(ValueError):
    pass


class NonIntegerPeriods(ValueError):
    pass


class _Unresolved:
    _instance = None

    def __new__(cls):
        if cls._instance is None:
            cls._instance = super().__new__(cls)
        return cls._instance

    def __repr__(self):
        return "Unresolved"

    def __bool__(self):
        return False


Unresolved = _Unresolved()


@dataclass(frozen=True)
class ProbeGeometry:
    p_in: float
    k_p: float
    cell_length: float
    c0: float

    def __post_init__(self):
        if self.p_in < 0:
            raise ValueError("p_in must be non-negative")
        if not (self.k_p > 0 and self.cell_length > 0):
            raise ValueError("k_p and cell_length must be positive")

    @classmethod
    def from_system(cls, sys: AtomicSystem, drives: DriveFields, p_in=None):
        """Geometry implied by the probe Rabi frequency and beam diameter.

        The probe power follows from the on-axis field of a beam of diameter d,
        P = pi d^2 E^2 / (8 Z0) with E = hbar*Omega_p / (2*dip12).
        """
        k = sys.const
        if p_in is None:
            e_p = drives.omega_p * k.hbar / (2 * abs(sys.dip12))
            p_in = math.pi / (2 * k.Z0) * (drives.beam_diam_p * e_p) ** 2
        c0 = -2 * sys.n_density * sys.dip12**2 / (k.eps0 * k.hbar * drives.omega_p)
        return cls(p_in=p_in, k_p=drives.k_p, cell_length=sys.cell_length, c0=c0)

    @property
    def optical_depth_scale(self):
        """k_p L |C0|: the optical depth per unit of |Im rho_21|."""
        return self.k_p * self.cell_length * abs(self.c0)


def probe_transmission(geom: ProbeGeometry, rho21):
    """Transmitted probe power for a given coherence (scalar or array)."""
    im = np.imag(geom.c0 * np.asarray(rho21))
    out = geom.p_in * np.exp(-geom.k_p * geom.cell_length * im)
    return float(out) if np.ndim(out) == 0 else out


def lorentzian(a, b):
    if not np.all(np.asarray(b) > 0):
        raise ValueError("b must be positive")
    return b**2 / (b**2 + np.asarray(a) ** 2)


@dataclass
class EITSpectrum:
    detuning_grid: np.ndarray
    transmission: np.ndarray
    linewidth_fwhm: float
    peaks: list = field(default_factory=list)

    def __post_init__(self):
        if np.any(np.diff(self.detuning_grid) <= 0):
            raise ValueError("detuning grid must be strictly increasing")
        if np.any(self.transmission < 0):
            raise ValueError("transmission must be non-negative")


def find_peaks(x, y, rel_prominence=0.1):
    """Local maxima above min + rel_prominence*range, refined by a 3-point parabola."""
    y = np.asarray(y, dtype=float)
    lo, hi = float(y.min()), float(y.max())
    floor = lo + rel_prominence * (hi - lo)
    peaks = []
    for i in range(1, len(y) - 1):
        if y[i] >= y[i - 1] and y[i] > y[i + 1] and y[i] > floor:
            y0, y1, y2 = y[i - 1], y[i], y[i + 1]
            denom = y0 - 2 * y1 + y2
            shift = 0.5 * (y0 - y2) / denom if denom != 0 else 0.0
            step = x[i + 1] - x[i] if shift >= 0 else x[i] - x[i - 1]
            peaks.append((float(x[i] + shift * step), float(y1 - 0.25 * (y0 - y2) * shift)))
    return sorted(peaks)


def _half_width(x, y, i_peak, level):
    """Width of the feature around i_peak at ``level`` by linear interpolation."""
    i = i_peak
    while i > 0 and y[i] > level:
        i -= 1
    j = i_peak
    while j < len(y) - 1 and y[j] > level:
        j += 1
    if y[i] > level or y[j] > level:
        return float("nan")
    left = x[i] + (level - y[i]) * (x[i + 1] - x[i]) / (y[i + 1] - y[i])
    right = x[j - 1] + (level - y[j - 1]) * (x[j] - x[j - 1]) / (y[j] - y[j - 1])
    return right - left


def spectrum_fwhm(x, y):
    """FWHM of the tallest transmission feature, measured from the spectrum minimum."""
    y = np.asarray(y, dtype=float)
    i = int(np.argmax(y))
    return _half_width(np.asarray(x), y, i, 0.5 * (y[i] + y.min()))


def _rho21_grid(sys, drives, grid, solver, doppler):
    if doppler:
        return np.array([doppler_average(sys, drives.with_(delta_c=float(dc)), solver=solver)
                         for dc in grid])
    if solver == "closed_form":
        return rho21_closed_form(sys, drives, delta_c=grid)
    if solver == "full":
        return rho21_full(sys, drives, delta_c=grid)
    raise ValueError(f"unknown solver {solver!r}")


def sweep_eit_spectrum(sys: AtomicSystem, drives: DriveFields, grid, doppler=False,
                       solver="closed_form", geom=None) -> EITSpectrum:
    """Probe transmission while scanning the coupling detuning over ``grid`` (rad/s)."""
    grid = np.asarray(grid, dtype=float)
    if grid.size < 3:
        raise ValueError("grid needs at least 3 points")
    geom = geom or ProbeGeometry.from_system(sys, drives)
    p_out = probe_transmission(geom, _rho21_grid(sys, drives, grid, solver, doppler))
    width = spectrum_fwhm(grid, p_out)
    step = float(np.min(np.diff(grid)))
    if not np.isfinite(width) or width < 5 * step:
        raise GridTooCoarse(f"linewidth {width:.3e} rad/s spans fewer than 5 grid steps")
    return EITSpectrum(grid, p_out, width, find_peaks(grid, p_out))


def at_splitting_interval(spectrum: EITSpectrum, rel_saddle=0.05):
    """Separation of the two dominant transmission peaks, or ``Unresolved``.

    Both peaks must rise above the lowest point between them by at least
    ``rel_saddle`` of the spectrum range.
    """
    if len(spectrum.peaks) < 2:
        return Unresolved
    top = sorted(sorted(spectrum.peaks, key=lambda p: p[1])[-2:])
    (x1, y1), (x2, y2) = top
    x, y = spectrum.detuning_grid, spectrum.transmission
    between = (x >= x1) & (x <= x2)
    saddle = float(y[between].min()) if np.any(between) else min(y1, y2)
    margin = rel_saddle * float(y.max() - y.min())
    if min(y1, y2) - saddle < margin:
        return Unresolved
    return x2 - x1


def four_level_hwhm(sys: AtomicSystem, omega_p, omega_c):
    g2 = sys.gamma[1]
    return omega_p * math.sqrt(2 * (omega_c**2 + omega_p**2) / (2 * omega_p**2 + g2**2))


def eit_amplitude(sys: AtomicSystem, omega_p):
    g2 = sys.gamma[1]
    return g2 * omega_p / (g2**2 + 2 * omega_p**2)


def kappa_rho(omega_lo, gamma):
    """Slope of the Lorentzian with respect to the LO Rabi frequency."""
    return -2 * gamma**2 * omega_lo / (gamma**2 + omega_lo**2) ** 2


@dataclass(frozen=True)
class LinearizedReadout:
    p_in: float
    p_bar0: float
    alpha: float
    a_bar: float
    gamma_hwhm: float
    omega_lo: float
    kappa_rho: float
    kappa: float
    omega_lo_opt: float

    def __post_init__(self):
        if self.p_bar0 < 0 or not self.gamma_hwhm > 0:
            raise ValueError("invalid readout parameters")
        bound = 3 * math.sqrt(3) / (8 * self.gamma_hwhm)
        if abs(self.kappa_rho) > bound * (1 + 1e-9):
            raise ValueError("|kappa_rho| exceeds its analytic maximum")

    def power(self, omega_total):
        """Exact transmitted power for a total RF Rabi amplitude (complex allowed)."""
        lam = lorentzian(np.abs(omega_total), self.gamma_hwhm)
        return self.p_in * np.exp(-self.alpha * (1 - lam))


def linearized_readout(sys: AtomicSystem, omega_p, omega_c, omega_lo, geom: ProbeGeometry,
                       alpha=None) -> LinearizedReadout:
    """Small-signal LO-dressed readout about an LO Rabi frequency.

    ``alpha`` overrides the absorption coefficient derived from the atom density.
    """
    if omega_lo < 0:
        raise ValueError("omega_lo must be non-negative")
    a_bar = eit_amplitude(sys, omega_p)
    gamma = four_level_hwhm(sys, omega_p, omega_c)
    if alpha is None:
        alpha = geom.optical_depth_scale * a_bar
    p_bar0 = geom.p_in * math.exp(-alpha) * math.exp(alpha * float(lorentzian(omega_lo, gamma)))
    k_rho = kappa_rho(omega_lo, gamma)
    return LinearizedReadout(
        p_in=geom.p_in, p_bar0=p_bar0, alpha=alpha, a_bar=a_bar, gamma_hwhm=gamma,
        omega_lo=omega_lo, kappa_rho=k_rho, kappa=alpha * p_bar0 * k_rho,
        omega_lo_opt=gamma / math.sqrt(3),
    )


def slope_vs_lo(readout: LinearizedReadout, omega_lo_grid, rel_step=1e-6):
    """|dP_out/dOmega_RF| at Omega_RF -> 0 for each LO Rabi frequency (central difference)."""
    w = np.asarray(omega_lo_grid, dtype=float)
    h = rel_step * readout.gamma_hwhm
    return np.abs(readout.power(w + h) - readout.power(w - h)) / (2 * h)


def _check_beat_grid(t_grid, delta_f):
    t = np.asarray(t_grid, dtype=float)
    if t.size < 2:
        raise ValueError("t_grid needs at least two samples")
    dt = float(t[1] - t[0])
    span = float(t[-1] - t[0]) + dt
    periods = span * delta_f
    return t, dt, span, periods


def probe_beat_signal(readout: LinearizedReadout, omega_rf, delta_f, delta_phi, t_grid):
    """Exact probe power under an LO plus a weak offset RF tone."""
    t, _, _, periods = _check_beat_grid(t_grid, delta_f)
    if periods < 2 - 1e-9 or t.size < 32 * periods - 1e-9:
        raise ValueError("t_grid must span >= 2 beat periods with >= 32 samples per period")
    theta = TWO_PI * delta_f * t + delta_phi
    return readout.power(readout.omega_lo + omega_rf * np.exp(1j * theta))


def linear_beat_signal(readout: LinearizedReadout, omega_rf, delta_f, delta_phi, t_grid):
    theta = TWO_PI * delta_f * np.asarray(t_grid) + delta_phi
    return readout.p_bar0 + readout.kappa * omega_rf * np.cos(theta)


def beat_grid(delta_f, periods=4, samples_per_period=256):
    n = periods * samples_per_period
    return np.arange(n) / (samples_per_period * delta_f)


def harmonic_spectrum(signal, t_grid, delta_f):
    """Single-sided amplitudes at delta_f, 2*delta_f and 3*delta_f by coherent projection."""
    t, _, _, periods = _check_beat_grid(t_grid, delta_f)
    if abs(periods - round(periods)) > 1e-6 * max(1.0, periods) or round(periods) < 1:
        raise NonIntegerPeriods(f"grid spans {periods:.9f} beat periods")
    s = np.asarray(signal, dtype=float)
    amps = []
    for k in (1, 2, 3):
        ph = np.exp(-1j * TWO_PI * k * delta_f * t)
        amps.append(2 * abs(np.mean(s * ph)))
    return tuple(amps)
