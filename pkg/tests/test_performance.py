import math

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st
from scipy.special import exp1

from rydlink.config import load_config
from rydlink.constants import TWO_PI
from rydlink.performance import (
    PAM,
    QAM,
    Modulation,
    ResolvabilityRatio,
    UnsupportedOrder,
    dynamic_range,
    exp_e1,
    lambda_derivatives,
    mutual_info_lo_dressed,
    mutual_info_lo_free,
    penalty_g,
    perf_point,
    received_field,
    ser_closed_form,
    ser_monte_carlo,
    sensitivity_lo_free,
    snr_lo_dressed,
    snr_lo_free,
    sweep_snr_vs_distance,
)
from rydlink.receiver import FrontEnd, LinkScenario, field_from_rabi

@pytest.fixture(scope="module")
def cfg():
    return load_config(None, environ={})


@pytest.fixture(scope="module")
def scn(cfg):
    return cfg.scenario()


def test_penalty_values_and_limits():
    assert penalty_g(1.0) == pytest.approx(2 / 3)
    assert penalty_g(2.0) == pytest.approx(32 / 9)
    assert penalty_g(0.0) == 0.0
    assert penalty_g(1e4) / 1e8 == pytest.approx(1.0, rel=1e-8)
    r = np.linspace(1e-3, 50, 5000)
    assert np.all(np.diff(penalty_g(r)) > 0)
    with pytest.raises(ValueError):
        penalty_g(-1.0)


def test_resolvability_ratio():
    rr = ResolvabilityRatio.from_rabi(2.0, 2.0)
    assert rr.r == 1.0 and rr.resolved
    assert not ResolvabilityRatio.from_rabi(1.0, 2.0).resolved
    with pytest.raises(ValueError):
        ResolvabilityRatio.from_rabi(1.0, 0.0)


def test_snr_lo_free_friis_asymptote(scn):
    lk = scn.link
    s2 = 1e-15
    snr = snr_lo_free(lk, scn.sys, s2, scn.gamma_fwhm, scn.a_eff)
    rr = ResolvabilityRatio.from_rabi(1.0, 1.0)
    assert snr >= 0 and rr.g_of_r > 0
    from rydlink.performance import resolvability
    r = resolvability(lk, scn.sys, scn.gamma_fwhm).r
    friis = snr / penalty_g(r) * r**2
    assert snr / friis == pytest.approx(penalty_g(r) / r**2)
    assert penalty_g(100.0) / 100.0**2 == pytest.approx(1.0, abs=1e-4)


def test_sensitivity_inverse_closure(scn):
    s2 = 1e-15
    e_min = sensitivity_lo_free(scn.sys, s2, scn.gamma_fwhm, scn.a_eff)
    # place a link whose incident field equals E_min and hold G at r^2
    from rydlink.constants import CONST
    s = e_min**2 / (2 * CONST.Z0)
    lk = LinkScenario(p_tx=s * 4 * math.pi, g_tx=1.0, d_txrx=1.0, f_rf=6.9e9, bandwidth=1e5)
    assert received_field(lk) == pytest.approx(e_min, rel=1e-12)
    from rydlink.performance import resolvability
    r = resolvability(lk, scn.sys, scn.gamma_fwhm).r
    snr = snr_lo_free(lk, scn.sys, s2, scn.gamma_fwhm, scn.a_eff) / penalty_g(r) * r**2
    assert 0.99 <= snr <= 1.01
    assert sensitivity_lo_free(scn.sys, 4 * s2, scn.gamma_fwhm, scn.a_eff) == pytest.approx(
        math.sqrt(2) * e_min, rel=1e-12)
    assert sensitivity_lo_free(scn.sys, 0.0, scn.gamma_fwhm, scn.a_eff) == 0.0


def test_snr_lo_dressed_properties(scn):
    assert snr_lo_dressed(scn.link, scn.front, 0.0, scn.sys, 1e-15) == 0
    near = snr_lo_dressed(scn.link.at_distance(50), scn.front, scn.readout.kappa, scn.sys, 1e-15)
    far = snr_lo_dressed(scn.link.at_distance(500), scn.front, scn.readout.kappa, scn.sys, 1e-15)
    assert near > far


def test_lambda_third_derivative_matches_finite_difference():
    g = 1.0
    for w in (0.2, 0.5, 1 / math.sqrt(3), 1.3):
        h = 1e-4 * g
        d1, d2, d3 = lambda_derivatives(w, g)
        fd = (lambda_derivatives(w + h, g)[1] - lambda_derivatives(w - h, g)[1]) / (2 * h)
        assert d3 == pytest.approx(fd, rel=1e-6)
    assert lambda_derivatives(0.5, g)[1] < 0 < lambda_derivatives(0.7, g)[1]


def test_dynamic_range_at_optimum(scn):
    ro = scn.readout
    assert ro.omega_lo == pytest.approx(ro.omega_lo_opt)
    assert abs(lambda_derivatives(ro.omega_lo, ro.gamma_hwhm)[1]) < 1e-12 / ro.gamma_hwhm**2
    for eps in (1e-6, 0.01, 0.5, 0.999):
        dr = dynamic_range(ro, eps, 0.0)
        assert math.isinf(dr.omega_rf_max2)
        assert 0 < dr.omega_rf_max3 < math.inf
    small = dynamic_range(ro, 1e-12, 0.0).omega_rf_max3
    assert small < 1e-5 * ro.gamma_hwhm
    with pytest.raises(ValueError):
        dynamic_range(ro, 1.0, 0.0)
    dr = dynamic_range(ro, 0.01, 1.0)
    assert dr.usable and dr.ldr_db > 0


def test_mi_lo_free_values():
    assert mutual_info_lo_free(0.0) == pytest.approx(0.5 * math.log(math.pi / 2), abs=1e-12)
    assert mutual_info_lo_free(0.0) == pytest.approx(0.2258, abs=1e-4)
    r = 1e6
    assert math.isfinite(mutual_info_lo_free(r))
    mi = mutual_info_lo_free(np.linspace(0, 200, 4001))
    assert np.all(np.diff(mi) >= -1e-12)
    with pytest.raises(ValueError):
        mutual_info_lo_free(-1.0)


def test_mi_lo_free_concave():
    mi = mutual_info_lo_free(np.linspace(0, 200, 4001))
    worst = float(np.max(np.diff(mi, 2)))
    assert worst <= 1e-9, f"largest positive second difference {worst:.3e}"


def test_mi_lo_free_large_r_growth():
    # ln I0(r) ~ r - ln(2 pi r)/2 and I1/I0 ~ 1 - 1/(2r) give ln(r) + ln(pi) - 1/2
    for r in (1e3, 1e5, 1e8):
        assert mutual_info_lo_free(r) == pytest.approx(math.log(r) + math.log(math.pi) - 0.5,
                                                       abs=2 / r)


def test_mi_lo_dressed_values():
    assert mutual_info_lo_dressed(1.0) == pytest.approx(0.4133, abs=1e-4)
    assert mutual_info_lo_dressed(1e-3) < 1e-3
    grid = np.linspace(0.05, 100, 2000)
    mi = mutual_info_lo_dressed(grid)
    assert np.all(np.diff(mi) > 0)
    assert np.all(np.diff(mi, 2) <= 1e-9)


@settings(max_examples=200)
@given(st.floats(1e-6, 1e4))
def test_exp_e1_bounds_and_accuracy(x):
    v = exp_e1(x)
    assert 1 / (x + 1) < v < 1 / x
    assert v == pytest.approx(math.exp(x) * exp1(x), rel=1e-12) if x < 700 else True


def test_modulation_validation():
    with pytest.raises(UnsupportedOrder):
        PAM(3)
    with pytest.raises(UnsupportedOrder):
        QAM(8)
    with pytest.raises(UnsupportedOrder):
        Modulation("PSK", 4)
    assert str(QAM(16)) == "16-QAM"


def test_ser_closed_form_edges_and_ordering():
    for m in (2, 4, 8, 16, 64):
        assert ser_closed_form(PAM(m), 0.0) == pytest.approx((m - 1) / m)
        assert ser_closed_form(PAM(m), 1e6) < 1e-12
    snr = np.logspace(-1, 2, 50)
    for mod in (PAM(4), QAM(16)):
        assert np.all(np.diff(ser_closed_form(mod, snr)) < 0)
    for a, b in ((PAM(2), PAM(4)), (PAM(4), PAM(16)), (QAM(4), QAM(16)), (QAM(16), QAM(64))):
        assert np.all(ser_closed_form(a, snr) < ser_closed_form(b, snr))
    with pytest.raises(ValueError):
        ser_closed_form(PAM(4), -1.0)


def test_ser_monte_carlo_orderings():
    lo = ser_monte_carlo(QAM(16), 10.0, 100_000, 1)
    hi = ser_monte_carlo(QAM(16), 30.0, 100_000, 1)
    assert hi < lo
    assert ser_monte_carlo(QAM(4), 10.0, 100_000, 1) < lo
    assert ser_monte_carlo(PAM(4), 50.0, 100_000, 1) < ser_monte_carlo(PAM(8), 50.0, 100_000, 1)


def test_ser_monte_carlo_worker_invariance():
    a = ser_monte_carlo(QAM(16), 20.0, 300_001, 7, workers=1, chunk=50_000)
    b = ser_monte_carlo(QAM(16), 20.0, 300_001, 7, workers=4, chunk=50_000)
    assert a == b
    with pytest.raises(ValueError):
        ser_monte_carlo(QAM(16), 0.0, 10, 7)


def test_lo_free_snr_collapses_below_unit_ratio(scn):
    far, near = perf_point(scn, 3000.0), perf_point(scn, 5.0)
    assert far.r < 1 < near.r
    # ratio of the penalised SNR to the Friis-type SNR with G held at r^2
    assert far.snr_ry / (far.snr_ry / penalty_g(far.r) * far.r**2) < 1e-3
    assert near.snr_ry / (near.snr_ry / penalty_g(near.r) * near.r**2) > 0.5


def test_adaptive_kappa_not_above_fixed_thin_medium(cfg):
    scn = cfg.scenario(kappa_mode="adaptive", alpha=1e-4)
    d = np.logspace(0, 3, 31)
    pts = sweep_snr_vs_distance(scn, d)
    for p in pts:
        assert p.snr_ry_lo_adaptive <= p.snr_ry_lo * (1 + 1e-9)


def test_adaptive_kappa_not_above_fixed_default(cfg):
    scn = cfg.scenario(kappa_mode="adaptive")
    d = np.logspace(0, 3, 31)
    pts = sweep_snr_vs_distance(scn, d)
    worst = max(p.snr_ry_lo_adaptive / p.snr_ry_lo for p in pts)
    assert worst <= 1 + 1e-9, f"adaptive/fixed SNR ratio reaches {worst:.3f}"


def test_snrs_decrease_with_distance_in_linear_regime(cfg):
    scn = cfg.scenario(kappa_mode="adaptive")
    pts = sweep_snr_vs_distance(scn, np.logspace(2, 4, 21))
    peak = int(np.argmax([p.snr_ry_lo_adaptive for p in pts]))
    for field in ("snr_ry_lo_adaptive", "snr_sql", "snr_conv", "snr_ry"):
        vals = np.array([getattr(p, field) for p in pts[peak:]])
        assert np.all(np.diff(vals) <= 0), field


def test_perf_point_invariants(scn):
    p = perf_point(scn, 100.0)
    assert 0 <= p.ser <= 1
    assert min(p.snr_ry, p.snr_ry_lo, p.snr_conv, p.snr_sql) >= 0
