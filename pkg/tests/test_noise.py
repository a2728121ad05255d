import math

import pytest
from hypothesis import given, settings, strategies as st

from rydlink.constants import CONST
from rydlink.noise import (
    NoiseBudget,
    NoiseEnvironment,
    compose_lo_free,
    compose_sql,
    e_sql,
    nef_extrinsic,
    photocurrent,
    psn_power,
    sigma2_extrinsic,
    sigma2_psn,
    sigma2_qpn,
    sigma2_tn,
    theta,
    thermal_occupation,
)
from rydlink.receiver import FrontEnd


def env(**kw):
    base = dict(temperature=290.0, bandwidth=1e5, f_rf=6.9e9, n_atoms=2.2e8)
    base.update(kw)
    return NoiseEnvironment(**base)


def test_environment_validation():
    with pytest.raises(ValueError):
        env(temperature=0.0)
    with pytest.raises(ValueError):
        env(detection_mode="direct")
    with pytest.raises(ValueError):
        env(planck_convention="planck")


def test_thermal_limits():
    hot = env(temperature=1e6)
    kt = CONST.k_B * 1e6
    assert thermal_occupation(hot) == pytest.approx(kt / hot.rf_quantum, rel=1e-3)
    cold = env(temperature=1e-3)
    assert thermal_occupation(cold) < 1e-100
    assert theta(cold) == pytest.approx(cold.rf_quantum, rel=1e-12)
    assert theta(env(temperature=1e-3, detection_mode="homodyne")) == pytest.approx(
        cold.rf_quantum / 2, rel=1e-12)


def test_extrinsic_scales_linearly():
    e = env()
    assert sigma2_extrinsic(e, 2.0) == pytest.approx(2 * sigma2_extrinsic(e, 1.0), rel=1e-14)
    e2 = env(bandwidth=2e5)
    assert sigma2_extrinsic(e2, 1.0) == pytest.approx(2 * sigma2_extrinsic(e, 1.0), rel=1e-14)
    assert nef_extrinsic(e) > 0


def test_sql_scaling():
    dip = 1443.459 * CONST.e_charge * CONST.a0
    a = e_sql(env(n_atoms=1e8), dip)
    b = e_sql(env(n_atoms=4e8), dip)
    assert b == pytest.approx(a / 2, rel=1e-14)
    with pytest.raises(ValueError):
        e_sql(env(n_atoms=0.5), dip)
    assert sigma2_qpn(env(), dip, 1.0) > 0


def test_thermal_noise_reference_value():
    assert sigma2_tn(env(), FrontEnd()) == pytest.approx(1.6e-15, rel=0.01)
    lna = FrontEnd(kind="LNA", noise_factor=2.0)
    assert sigma2_tn(env(), lna) == pytest.approx(sigma2_tn(env(), FrontEnd()) / 2)


@settings(max_examples=50)
@given(st.floats(0, 1), st.floats(1e-9, 1e-1), st.floats(1e3, 1e7))
def test_shot_noise_identity(eta, p_out, bandwidth):
    front = FrontEnd(eta_eff=eta)
    f_p = CONST.c_light / 852e-9
    s2 = sigma2_psn(front, p_out, f_p, bandwidth)
    i_ph = photocurrent(front, p_out, f_p)
    assert s2 == pytest.approx(2 * CONST.e_charge * bandwidth * i_ph, rel=1e-14, abs=1e-300)
    assert s2 >= 0


def test_photocurrent_rejects_negative_power():
    with pytest.raises(ValueError):
        photocurrent(FrontEnd(), -1.0, 3.5e14)


def test_psn_power_conversion():
    assert psn_power(FrontEnd(), 1e-20) == 1e-20
    assert psn_power(FrontEnd(psn_to_power="load", r_load=50), 1e-20) == pytest.approx(5e-19)


def test_composites():
    f = FrontEnd()
    total = compose_lo_free(1.0, 2.0, 3.0, 4.0, 0.5, f)
    d2, g2 = f.responsivity**2, f.g_lna**2
    assert total == pytest.approx(0.25 * d2 * g2 + 2 * d2 * g2 + 3 * g2 + 4)
    assert compose_lo_free(0, 0, 0, 4.0, 1.0, f) == 4.0
    assert compose_sql(2.0, 3.0, f) == pytest.approx(2 * d2 * g2 + 3 * g2)
    assert compose_sql(2.0, 3.0, f) < total


def test_budget_rejects_negative():
    with pytest.raises(ValueError):
        NoiseBudget(-1, 0, 0, 0, 0, 0, 0)
    assert math.isclose(NoiseBudget(1, 0, 0, 0, 0, 0, 0).as_dict()["sigma2_ex"], 1)
