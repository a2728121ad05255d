"""Four-level ladder atom: Hamiltonian, decay, steady state and closed forms.

Levels are indexed 0..3 for |1>..|4> (ground, intermediate, Rydberg, Rydberg).
All frequencies are angular (rad/s).
"""

from dataclasses import dataclass, field, replace
import math
import warnings

import numpy as np
from numpy.polynomial.hermite import hermgauss
from scipy import integrate

from .constants import (
    CONST,
    CS_MASS,
    DEFAULT_DIP12_EA0,
    DEFAULT_DIPRF_EA0,
    DEFAULT_GAMMA_HZ,
    DEFAULT_N0_PER_M3,
    TWO_PI,
    PhysicalConstants,
)


class SingularSystem(ArithmeticError):
    pass


class DegenerateDenominator(ArithmeticError):
    pass


class ZeroInput(ValueError):
    pass


class QuadratureNotConverged(ArithmeticError):
    pass


@dataclass(frozen=True)
class AtomicSystem:
    gamma: tuple
    dip12: float
    dip_rf: float
    n_density: float
    atom_mass: float
    cell_length: float
    temperature: float
    const: PhysicalConstants = field(default=CONST)

    def __post_init__(self):
        g = tuple(float(x) for x in self.gamma)
        if len(g) != 4:
            raise ValueError("gamma must have 4 entries")
        if any(x < 0 for x in g):
            raise ValueError("gamma entries must be non-negative")
        if g[0] != 0.0:
            raise ValueError("gamma[0] must be 0 for the ground state")
        object.__setattr__(self, "gamma", g)
        for name in ("cell_length", "n_density", "atom_mass", "temperature"):
            if not getattr(self, name) > 0:
                raise ValueError(f"{name} must be positive")
        if self.dip12 == 0:
            raise ValueError("dip12 must be nonzero")

    @classmethod
    def cesium(cls, **overrides):
        """Cs ladder with the reference vapour-cell parameters."""
        ea0 = CONST.e_charge * CONST.a0
        params = dict(
            gamma=tuple(TWO_PI * g for g in DEFAULT_GAMMA_HZ),
            dip12=DEFAULT_DIP12_EA0 * ea0,
            dip_rf=DEFAULT_DIPRF_EA0 * ea0,
            n_density=DEFAULT_N0_PER_M3,
            atom_mass=CS_MASS,
            cell_length=0.01,
            temperature=290.0,
        )
        params.update(overrides)
        return cls(**params)

    @property
    def gamma_ij(self):
        g = np.asarray(self.gamma)
        return 0.5 * (g[:, None] + g[None, :])

    @property
    def sigma_v(self):
        return math.sqrt(self.const.k_B * self.temperature / self.atom_mass)

    def with_gamma(self, gamma):
        return replace(self, gamma=tuple(gamma))


@dataclass(frozen=True)
class DriveFields:
    omega_p: float
    omega_c: float
    delta_p: float = 0.0
    delta_c: float = 0.0
    delta_rf: float = 0.0
    lambda_p: float = 852e-9
    lambda_c: float = 510e-9
    beam_diam_p: float = 0.76e-3
    rf_drive: complex = 0.0

    def __post_init__(self):
        if not (self.omega_p > 0 and self.omega_c > 0):
            raise ValueError("omega_p and omega_c must be positive")
        if not (self.lambda_p > 0 and self.lambda_c > 0):
            raise ValueError("wavelengths must be positive")
        if not self.beam_diam_p > 0:
            raise ValueError("beam_diam_p must be positive")

    @property
    def k_p(self):
        return TWO_PI / self.lambda_p

    @property
    def k_c(self):
        return TWO_PI / self.lambda_c

    def with_(self, **kw):
        return replace(self, **kw)


@dataclass(frozen=True)
class SteadyState:
    rho: np.ndarray

    @property
    def rho21(self):
        return complex(self.rho[1, 0])

    @property
    def populations(self):
        return np.real(np.diag(self.rho))

    def hermiticity_error(self):
        return float(np.max(np.abs(self.rho - self.rho.conj().T)))

    def trace_error(self):
        return float(abs(np.trace(self.rho) - 1.0))


def _drive_matrix(omega_p, omega_c, rf, dp, dc, drf):
    m = np.zeros((4, 4), dtype=complex)
    m[0, 1] = m[1, 0] = omega_p
    m[1, 2] = m[2, 1] = omega_c
    m[2, 3] = rf
    m[3, 2] = np.conj(rf)
    m[1, 1] = -2.0 * dp
    m[2, 2] = -2.0 * (dp + dc)
    m[3, 3] = -2.0 * (dp + dc + drf)
    return m


def build_hamiltonian(sys: AtomicSystem, drives: DriveFields):
    """Ladder Hamiltonian in joules, rotating frame, rotating-wave approximation."""
    m = _drive_matrix(drives.omega_p, drives.omega_c, complex(drives.rf_drive),
                      drives.delta_p, drives.delta_c, drives.delta_rf)
    return 0.5 * sys.const.hbar * m


def build_lindblad(sys: AtomicSystem, rho, nonhermitian_43=False):
    """Elementwise decay matrix for a cascade 4 -> 3 -> 2 -> 1.

    Coherences decay as -gamma_ij * rho_ij. With ``nonhermitian_43=True`` the (4,3)
    entry becomes -gamma_42 * rho_42, which breaks Hermiticity of the result.
    """
    rho = np.asarray(rho, dtype=complex)
    g = sys.gamma
    gij = sys.gamma_ij
    out = -gij * rho
    out[0, 0] = g[1] * rho[1, 1]
    out[1, 1] = g[2] * rho[2, 2] - g[1] * rho[1, 1]
    out[2, 2] = g[3] * rho[3, 3] - g[2] * rho[2, 2]
    out[3, 3] = -g[3] * rho[3, 3]
    if nonhermitian_43:
        out[3, 2] = -gij[3, 1] * rho[3, 1]
    return out


def _commutator_super(h):
    eye = np.eye(4)
    return -1j * (np.kron(h, eye) - np.kron(eye, h.T))


def _dissipator_super(sys, nonhermitian_43=False):
    d = np.zeros((16, 16), dtype=complex)
    for k in range(16):
        basis = np.zeros(16, dtype=complex)
        basis[k] = 1.0
        d[:, k] = build_lindblad(sys, basis.reshape(4, 4), nonhermitian_43).ravel()
    return d


def liouvillian(sys: AtomicSystem, drives: DriveFields, nonhermitian_43=False):
    """16x16 generator acting on row-major vec(rho); units 1/s."""
    h = build_hamiltonian(sys, drives) / sys.const.hbar
    return _commutator_super(h) + _dissipator_super(sys, nonhermitian_43)


_TRACE_ROW = np.eye(4).ravel().astype(complex)


def _solve_with_trace(lmat):
    a = np.array(lmat, dtype=complex, copy=True)
    a[..., 0, :] = _TRACE_ROW
    b = np.zeros(a.shape[:-1], dtype=complex)
    b[..., 0] = 1.0
    try:
        x = np.linalg.solve(a, b[..., None])[..., 0]
    except np.linalg.LinAlgError as exc:
        raise SingularSystem("steady-state system is rank deficient") from exc
    if not np.all(np.isfinite(x)):
        raise SingularSystem("steady-state solve produced non-finite values")
    return x


def steady_state_full(sys: AtomicSystem, drives: DriveFields) -> SteadyState:
    if max(sys.gamma) <= 0:
        raise SingularSystem("all decay rates are zero; steady state is not unique")
    lmat = liouvillian(sys, drives)
    x = _solve_with_trace(lmat)
    resid = np.linalg.norm(lmat @ x) / max(sys.gamma)
    if resid > 1e-9:
        raise SingularSystem(f"master-equation residual {resid:.3e} too large")
    return SteadyState(x.reshape(4, 4))


def steady_state_batch(sys: AtomicSystem, drives: DriveFields, delta_p=None, delta_c=None):
    """Steady states over broadcast arrays of probe/coupling detunings.

    Returns an array of shape ``broadcast_shape + (4, 4)``.
    """
    if max(sys.gamma) <= 0:
        raise SingularSystem("all decay rates are zero; steady state is not unique")
    dp = drives.delta_p if delta_p is None else delta_p
    dc = drives.delta_c if delta_c is None else delta_c
    dp, dc = np.broadcast_arrays(np.asarray(dp, dtype=float), np.asarray(dc, dtype=float))
    base = liouvillian(sys, drives.with_(delta_p=0.0, delta_c=0.0))
    lp = _commutator_super(np.diag([0.0, -1.0, -1.0, -1.0]))
    lc = _commutator_super(np.diag([0.0, 0.0, -1.0, -1.0]))
    lmat = base + dp[..., None, None] * lp + dc[..., None, None] * lc
    x = _solve_with_trace(lmat)
    return x.reshape(dp.shape + (4, 4))


def rho21_full(sys, drives, delta_p=None, delta_c=None):
    return steady_state_batch(sys, drives, delta_p, delta_c)[..., 1, 0]


def rho21_closed_form(sys: AtomicSystem, drives: DriveFields, delta_p=None, delta_c=None):
    """Weak-probe nested-fraction coherence (ground population ~ 1).

    Detunings may be overridden with broadcastable arrays.
    """
    gij = sys.gamma_ij
    dp = drives.delta_p if delta_p is None else np.asarray(delta_p, dtype=float)
    dc = drives.delta_c if delta_c is None else np.asarray(delta_c, dtype=float)
    w_rf = abs(complex(drives.rf_drive))

    def check(d):
        if np.any(np.abs(d) < 1e-30):
            raise DegenerateDenominator("vanishing denominator in closed-form coherence")
        return d

    d3 = gij[2, 0] - 1j * (dp + dc)
    if w_rf > 0:
        d4 = check(gij[3, 0] - 1j * (dp + dc + drives.delta_rf))
        d3 = d3 + (w_rf / 2) ** 2 / d4
    d2 = gij[1, 0] - 1j * dp + (drives.omega_c / 2) ** 2 / check(d3)
    out = -1j * (drives.omega_p / 2) / check(d2)
    return complex(out) if np.ndim(out) == 0 else out


def rho21_lo_dressed(sys: AtomicSystem, omega_p, omega_c, omega_total):
    """Resonant coherence with gamma_3 = gamma_4 = 0 under an LO-dressed RF field.

    Uses the conjugate phase convention: a positive imaginary part means absorption.
    """
    g2 = sys.gamma[1]
    w2 = np.abs(omega_total) ** 2
    if omega_p == 0 and np.all(w2 == 0):
        raise ZeroInput("omega_p and omega_total are both zero")
    out = 1j * g2 * omega_p * w2 / (g2**2 * w2 + 2 * omega_p**2 * (omega_c**2 + omega_p**2 + w2))
    return complex(out) if np.ndim(out) == 0 else out


_SOLVERS = {"closed_form": rho21_closed_form, "full": rho21_full}


def _gauss_hermite(sys, drives, fn, n):
    x, w = hermgauss(n)
    v = math.sqrt(2.0) * sys.sigma_v * x
    vals = fn(sys, drives, drives.delta_p - drives.k_p * v, drives.delta_c + drives.k_c * v)
    return complex(np.sum(w * vals) / math.sqrt(math.pi))


def _adaptive(sys, drives, fn, rtol):
    s = sys.sigma_v
    kp, kc = drives.k_p, drives.k_c
    dp, dc, drf = drives.delta_p, drives.delta_c, drives.delta_rf
    w_rf = abs(complex(drives.rf_drive))
    # velocities where one-, two- and three-photon resonances sit
    pts = [dp / kp]
    for shift in (0.0, w_rf / 2, -w_rf / 2, drf):
        pts.append(-(dp + dc + shift) / (kc - kp))
    lim = 8.0 * s
    pts = sorted(p for p in pts if -lim < p < lim)

    def f(v):
        return complex(fn(sys, drives, dp - kp * v, dc + kc * v)) * math.exp(-0.5 * (v / s) ** 2)

    with warnings.catch_warnings():
        warnings.simplefilter("ignore", integrate.IntegrationWarning)
        val, err = integrate.quad(f, -lim, lim, points=pts or None, limit=5000,
                                  epsabs=1e-14 * s, epsrel=rtol, complex_func=True)
    val /= math.sqrt(TWO_PI) * s
    err = abs(err) / (math.sqrt(TWO_PI) * s)
    if err > 10 * rtol * max(abs(val), 1e-300):
        raise QuadratureNotConverged(f"adaptive Doppler integral error {err:.2e}")
    return complex(val)


def doppler_average(sys: AtomicSystem, drives: DriveFields, solver="closed_form",
                    nodes=64, max_nodes=128, rtol=1e-6, method="auto"):
    """Maxwell-Boltzmann average of rho_21 over the axial velocity.

    Gauss-Hermite with node doubling up to ``max_nodes``. Narrow EIT features
    at room temperature usually defeat that rule; with ``method="auto"`` the
    integral then falls back to adaptive quadrature with breakpoints at the
    resonant velocity classes. ``method="gauss_hermite"`` raises instead.
    """
    fn = _SOLVERS[solver]
    if method not in ("auto", "gauss_hermite", "adaptive"):
        raise ValueError(f"unknown method {method!r}")
    if method != "adaptive":
        n = nodes
        prev = _gauss_hermite(sys, drives, fn, n)
        while n < max_nodes:
            n *= 2
            cur = _gauss_hermite(sys, drives, fn, n)
            if abs(cur - prev) <= rtol * max(abs(cur), 1e-300):
                return cur
            prev = cur
        if method == "gauss_hermite":
            raise QuadratureNotConverged(f"Gauss-Hermite not converged at {n} nodes")
    return _adaptive(sys, drives, fn, rtol)
