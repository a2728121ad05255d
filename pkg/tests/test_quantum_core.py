import math

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from rydlink.constants import CONST, TWO_PI, PhysicalConstants
from rydlink.quantum_core import (
    AtomicSystem,
    DegenerateDenominator,
    DriveFields,
    SingularSystem,
    ZeroInput,
    build_hamiltonian,
    build_lindblad,
    doppler_average,
    liouvillian,
    rho21_closed_form,
    rho21_full,
    rho21_lo_dressed,
    steady_state_full,
)

MHZ = TWO_PI * 1e6


def test_constants_positive_and_immutable():
    with pytest.raises(ValueError):
        PhysicalConstants(Z0=0.0)
    with pytest.raises(AttributeError):
        CONST.hbar = 1.0
    assert CONST.h == pytest.approx(TWO_PI * CONST.hbar, rel=1e-15)


def test_atomic_system_invariants(cs):
    with pytest.raises(ValueError):
        cs.with_gamma((1.0, 1.0, 1.0, 1.0))
    with pytest.raises(ValueError):
        cs.with_gamma((0.0, -1.0, 1.0, 1.0))
    with pytest.raises(ValueError):
        AtomicSystem.cesium(cell_length=-0.01)
    g = cs.gamma_ij
    assert g[1, 0] == pytest.approx(cs.gamma[1] / 2)
    assert np.allclose(g, g.T)


def test_drive_invariants():
    with pytest.raises(ValueError):
        DriveFields(omega_p=0.0, omega_c=1.0)
    with pytest.raises(ValueError):
        DriveFields(omega_p=1.0, omega_c=1.0, lambda_p=-1.0)


def test_hamiltonian_zero_and_reference_entry(cs):
    h0 = build_hamiltonian(cs, DriveFields(1e-300, 1e-300).with_(omega_p=1e-300))
    assert np.max(np.abs(h0)) < 1e-300
    h = build_hamiltonian(cs, DriveFields(8 * MHZ, 1 * MHZ, rf_drive=6 * MHZ))
    assert h[0, 1].real == pytest.approx(CONST.hbar * TWO_PI * 4e6, rel=1e-14)
    assert np.all(np.diag(h) == 0)


@settings(max_examples=40, deadline=None)
@given(st.floats(0.1, 50), st.floats(0.1, 50), st.floats(-20, 20), st.floats(-20, 20),
       st.floats(0, 20), st.floats(0, 2 * math.pi))
def test_hamiltonian_hermitian(wp, wc, dp, dc, rf, phase):
    d = DriveFields(wp * MHZ, wc * MHZ, dp * MHZ, dc * MHZ, 0.3 * MHZ,
                    rf_drive=rf * MHZ * np.exp(1j * phase))
    h = build_hamiltonian(AtomicSystem.cesium(), d)
    assert np.allclose(h, h.conj().T, atol=0, rtol=0)


def test_lindblad_examples(cs):
    zero = cs.with_gamma((0, 0, 0, 0))
    rho = np.full((4, 4), 0.25, dtype=complex)
    assert np.all(build_lindblad(zero, rho) == 0)
    assert np.all(build_lindblad(cs, np.diag([1, 0, 0, 0])) == 0)
    g = 3.0
    out = build_lindblad(cs.with_gamma((0, g, 0, 0)), np.diag([0, 1, 0, 0]))
    expect = np.zeros((4, 4))
    expect[0, 0], expect[1, 1] = g, -g
    assert np.allclose(out, expect)


def test_lindblad_conserves_population_and_nonhermitian_variant(cs):
    rng = np.random.default_rng(1)
    a = rng.standard_normal((4, 4)) + 1j * rng.standard_normal((4, 4))
    rho = a @ a.conj().T
    rho /= np.trace(rho)
    out = build_lindblad(cs, rho)
    assert abs(np.trace(out)) < 1e-9 * max(cs.gamma)
    assert np.allclose(out, out.conj().T)
    skewed = build_lindblad(cs, rho, nonhermitian_43=True)
    assert skewed[3, 2] == pytest.approx(-cs.gamma_ij[3, 1] * rho[3, 1])
    assert not np.allclose(skewed, skewed.conj().T)


def test_steady_state_no_drive_is_ground(cs):
    st_ = steady_state_full(cs, DriveFields(1e-3, 1e-3))
    assert np.allclose(st_.rho, np.diag([1, 0, 0, 0]), atol=1e-9)


def test_steady_state_singular_without_decay(cs):
    with pytest.raises(SingularSystem):
        steady_state_full(cs.with_gamma((0, 0, 0, 0)), DriveFields(MHZ, MHZ))


@settings(max_examples=30, deadline=None)
@given(st.floats(0.1, 30), st.floats(0.1, 30), st.floats(-15, 15), st.floats(-15, 15),
       st.floats(0, 15))
def test_steady_state_invariants(wp, wc, dp, dc, rf):
    d = DriveFields(wp * MHZ, wc * MHZ, dp * MHZ, dc * MHZ, rf_drive=rf * MHZ)
    st_ = steady_state_full(AtomicSystem.cesium(), d)
    assert st_.hermiticity_error() <= 1e-10
    assert st_.trace_error() <= 1e-10
    assert np.all(st_.populations >= -1e-9) and np.all(st_.populations <= 1 + 1e-9)


def test_weak_probe_closed_form_matches_full(cs):
    d = DriveFields(0.1 * MHZ, 1 * MHZ)
    grid = MHZ * np.linspace(-10, 10, 41)
    cf = rho21_closed_form(cs, d, delta_c=grid)
    full = rho21_full(cs, d, delta_c=grid)
    assert np.max(np.abs(cf.imag - full.imag) / np.abs(full.imag)) < 0.05


def test_closed_form_limits(cs):
    d = DriveFields(1e-3 * MHZ, 1e-9)
    two_level = -1j * d.omega_p / (2 * cs.gamma_ij[1, 0])
    assert rho21_closed_form(cs, d) == pytest.approx(two_level, rel=1e-9)
    a = rho21_closed_form(cs, DriveFields(1e-6, MHZ))
    b = rho21_closed_form(cs, DriveFields(2e-6, MHZ))
    assert b == pytest.approx(2 * a, rel=1e-12)


def test_closed_form_at_peaks_near_half_rf(cs):
    d = DriveFields(8 * MHZ, 1 * MHZ, rf_drive=6 * MHZ)
    grid = MHZ * np.linspace(-6, 6, 12001)
    im = np.abs(rho21_closed_form(cs, d, delta_c=grid).imag)
    # AT doublet: minima of absorption near +-Omega_RF/2
    left = grid[grid < 0][np.argmin(im[grid < 0])]
    right = grid[grid > 0][np.argmin(im[grid > 0])]
    assert left == pytest.approx(-3 * MHZ, rel=0.02)
    assert right == pytest.approx(3 * MHZ, rel=0.02)


def test_closed_form_degenerate_denominator(cs):
    zero = cs.with_gamma((0, 0, 0, 0))
    with pytest.raises(DegenerateDenominator):
        rho21_closed_form(zero, DriveFields(MHZ, MHZ, rf_drive=MHZ))


def test_lo_dressed_examples(cs):
    g2, wp, wc = cs.gamma[1], 8 * MHZ, 1 * MHZ
    assert rho21_lo_dressed(cs, wp, wc, 0.0) == 0
    a_bar = g2 * wp / (g2**2 + 2 * wp**2)
    big = rho21_lo_dressed(cs, wp, wc, 1e3 * wp)
    assert big.imag == pytest.approx(a_bar, rel=1e-5)
    with pytest.raises(ZeroInput):
        rho21_lo_dressed(cs, 0.0, wc, 0.0)
    vals = rho21_lo_dressed(cs, wp, wc, np.linspace(0, 50, 200) * MHZ)
    assert np.all(vals.imag >= 0) and np.all(vals.imag <= a_bar * (1 + 1e-12))


def test_lo_dressed_matches_full_solve(cs):
    sys0 = cs.with_gamma((0, cs.gamma[1], 0, 0))
    wp, wc = 8 * MHZ, 1 * MHZ
    for w in (2 * MHZ, 4.23 * MHZ, 10 * MHZ):
        full = steady_state_full(sys0, DriveFields(wp, wc, rf_drive=w)).rho21
        dressed = rho21_lo_dressed(sys0, wp, wc, w)
        # opposite phase convention: compare magnitudes of the absorptive part
        assert abs(dressed.imag) == pytest.approx(abs(full.imag), rel=0.05)


def test_doppler_cold_limit_and_constant(cs):
    cold = AtomicSystem.cesium(temperature=1e-6**2 * cs.atom_mass / CONST.k_B)
    d = DriveFields(8 * MHZ, 1 * MHZ)
    assert cold.sigma_v == pytest.approx(1e-6, rel=1e-9)
    avg = doppler_average(cold, d)
    assert avg == pytest.approx(rho21_closed_form(cold, d), rel=1e-6)
    x, w = np.polynomial.hermite.hermgauss(64)
    assert np.sum(w) / math.sqrt(math.pi) == pytest.approx(1.0, abs=1e-12)


def test_doppler_reduces_peak(cs):
    d = DriveFields(8 * MHZ, 1 * MHZ)
    avg = doppler_average(cs, d)
    assert abs(avg.imag) < abs(rho21_closed_form(cs, d).imag)


def test_liouvillian_has_trace_preserving_kernel(cs):
    lmat = liouvillian(cs, DriveFields(MHZ, MHZ, rf_drive=MHZ))
    trace_row = np.eye(4).ravel()
    assert np.max(np.abs(trace_row @ lmat)) < 1e-6
