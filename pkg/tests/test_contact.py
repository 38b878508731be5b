import warnings

import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from palpsdf.contact import (ContactError, CurvatureModel, EstimateReport, MaterialParams, ProbeRecord,
                             contact_disk_quadrature, estimate_E_kappa_compliance,
                             estimate_youngs_two_point, flat_indentation,
                             geometric_indentation_constant, geometric_indentation_varying,
                             hertz_constant, hertz_indentation, plane_strain_modulus,
                             settling_time_check, total_indentation, transition_force,
                             undeformed_sdf_value)

E, NU, R = 8000.0, 0.45, 0.01
ESTAR = 8000.0 / (1 - 0.45 ** 2)
N_OUT = np.array([0.0, 0.6, 0.8])


def probe_at(F, kappa=10.0, x0=np.zeros(3), n_out=N_OUT):
    d = total_indentation(F, ESTAR, R, kappa)
    return ProbeRecord(x0 - d * n_out, -n_out, F, R)


# ---- types -------------------------------------------------------------------

def test_material_validation():
    assert MaterialParams(E, NU).Estar == pytest.approx(10031.347962, rel=1e-9)
    for bad in (dict(E=0, nu=0.3), dict(E=1, nu=0.5), dict(E=1, nu=-0.1), dict(E=1, nu=0.3, rho=0)):
        with pytest.raises(ContactError):
            MaterialParams(**bad)


def test_probe_record_validation():
    with pytest.raises(ContactError):
        ProbeRecord([0, 0, 0], [0, 0, 1.1], 1.0, R)
    with pytest.raises(ContactError):
        ProbeRecord([0, 0, 0], [0, 0, 1], -1.0, R)
    with pytest.raises(ContactError):
        ProbeRecord([0, 0, 0], [0, 0, 1], 1.0, 0.0)


def test_estimate_report_statistics():
    rep = EstimateReport(2.0, [1.0, 2.0, 3.0])
    assert rep.mean == pytest.approx(2.0, rel=1e-9)
    assert rep.std == pytest.approx(1.0, rel=1e-9)
    assert rep.sample_count == 3
    assert EstimateReport(5.0, [5.0]).std == 0.0


# ---- formulas ------------------------------------------------------------------

def test_plane_strain_modulus():
    assert plane_strain_modulus(8000, 0) == 8000
    assert plane_strain_modulus(8000, 0.45) == pytest.approx(10031.35, abs=5e-3)
    with pytest.raises(ContactError):
        plane_strain_modulus(8000, 0.5)


def test_flat_indentation():
    assert flat_indentation(0.0, ESTAR, R) == 0.0
    assert flat_indentation(3.0, 10031.35, R) == pytest.approx(1.4953e-2, rel=1e-4)
    assert flat_indentation(3.0, 10 * ESTAR, R) == pytest.approx(flat_indentation(3.0, ESTAR, R) / 10,
                                                                 rel=1e-15)
    with pytest.raises(ContactError):
        flat_indentation(1.0, 0.0, R)


def test_geometric_constant():
    assert geometric_indentation_constant(0.0, R) == 0.0
    assert geometric_indentation_constant(10.0, 0.01) == pytest.approx(2.5e-4, rel=1e-12)
    assert geometric_indentation_constant(10.0, 0.02) == pytest.approx(4 * 2.5e-4, rel=1e-12)


def test_geometric_varying():
    const = geometric_indentation_varying(CurvatureModel(lambda rho, th: 10.0 + 0 * rho), R)
    assert const == pytest.approx(10.0 * R * R / 4, rel=1e-4)
    k0 = 7.0
    lin = geometric_indentation_varying(CurvatureModel(lambda rho, th: k0 * rho / R), R)
    assert lin == pytest.approx(k0 * R * R / 5, rel=1e-3)
    assert geometric_indentation_varying(CurvatureModel(lambda rho, th: 0 * rho), R) == 0.0


def test_geometric_varying_sampled_lattice_and_angle():
    rr, tt, _ = contact_disk_quadrature(R, 16, 32)
    sampled = CurvatureModel(10.0 + 3.0 * np.cos(tt))
    # the cos(theta) part integrates to zero
    assert geometric_indentation_varying(sampled, R, 16, 32) == pytest.approx(10.0 * R * R / 4, rel=1e-12)
    with pytest.raises(ContactError):
        geometric_indentation_varying(CurvatureModel(np.ones((3, 3))), R, 16, 32)


def test_undeformed_sdf_value():
    assert undeformed_sdf_value(3.0, 10031.35, R, 0.0) == pytest.approx(-1.4953e-2, rel=1e-4)
    assert undeformed_sdf_value(3.0, 10031.35, R, 10.0) == pytest.approx(-1.5203e-2, rel=1e-4)
    assert undeformed_sdf_value(0.0, ESTAR, R, CurvatureModel.constant(0.0)) == 0.0


def test_hertz():
    C = hertz_constant(10, 10031.35)
    assert C == pytest.approx(3.825e-3, rel=1e-3)
    assert hertz_constant(80, 10031.35) == pytest.approx(2 * C, rel=1e-12)
    assert hertz_constant(10, 10031.35 * np.sqrt(8)) == pytest.approx(C / 2, rel=1e-12)
    assert hertz_indentation(0.0, C) == 0.0
    assert hertz_indentation(1.0, 3.825e-3) == pytest.approx(3.825e-3, rel=1e-15)
    assert hertz_indentation(8.0, C) == pytest.approx(4 * hertz_indentation(1.0, C), rel=1e-12)
    with pytest.raises(ContactError):
        hertz_constant(0.0, ESTAR)


def test_transition_force():
    assert transition_force(10031.35, 0.01, 10) == pytest.approx(0.13375, rel=1e-4)
    assert transition_force(ESTAR, R, 0.0) == 0.0
    assert transition_force(ESTAR, 2 * R, 10) == pytest.approx(8 * transition_force(ESTAR, R, 10), rel=1e-12)


def test_regime_continuity_at_transition():
    Ft = transition_force(ESTAR, R, 10.0)
    geom = geometric_indentation_constant(10.0, R)
    gap = abs(hertz_indentation(Ft, hertz_constant(10.0, ESTAR)) - (flat_indentation(Ft, ESTAR, R) + geom))
    assert gap / geom <= 0.35


@given(st.floats(0.0, 10.0), st.floats(0.0, 10.0), st.floats(0.0, 50.0))
def test_indentation_nonnegative_and_monotone_within_each_regime(f1, f2, kappa):
    lo, hi = sorted((f1, f2))
    Ft = transition_force(ESTAR, R, kappa)
    a = total_indentation(lo, ESTAR, R, kappa)
    b = total_indentation(hi, ESTAR, R, kappa)
    assert a >= 0 and b >= 0
    if kappa == 0 or hi < Ft or lo >= Ft:
        assert b >= a


def test_switch_drops_by_a_third_of_the_geometric_term():
    # Hertz gives kappa R^2 at F_trans, the punch model 11/12 kappa R^2
    Ft = transition_force(ESTAR, R, 10.0)
    below = hertz_indentation(Ft, hertz_constant(10.0, ESTAR))
    above = total_indentation(Ft, ESTAR, R, 10.0)
    assert below == pytest.approx(10.0 * R * R, rel=1e-12)
    assert below - above == pytest.approx(geometric_indentation_constant(10.0, R) / 3, rel=1e-9)


# ---- estimators ----------------------------------------------------------------

def test_two_point_examples():
    n = N_OUT
    a = ProbeRecord(np.zeros(3), -n, 3.0, R)
    b = ProbeRecord(-7.47664e-3 * n, -n, 4.5, R)
    assert estimate_youngs_two_point(a, b, NU) == pytest.approx(8000.0, rel=5e-5)
    b2 = ProbeRecord(-2 * 7.47664e-3 * n, -n, 4.5, R)
    assert estimate_youngs_two_point(a, b2, NU) == pytest.approx(4000.0, rel=5e-5)
    with pytest.raises(ContactError):
        estimate_youngs_two_point(a, ProbeRecord(np.ones(3), -n, 3.0, R), NU)
    with pytest.raises(ContactError):
        estimate_youngs_two_point(a, ProbeRecord(np.zeros(3), -n, 4.5, R), NU)
    with pytest.raises(ContactError):
        estimate_youngs_two_point(a, ProbeRecord(np.ones(3), -n, 4.5, 2 * R), NU)


def test_two_point_warns_on_diverging_normals():
    a = ProbeRecord(np.zeros(3), np.array([0, 0, -1.0]), 3.0, R)
    q = np.array([np.sin(0.2), 0, -np.cos(0.2)])
    b = ProbeRecord(np.array([0, 0, 0.0075]), q, 4.5, R)
    with pytest.warns(RuntimeWarning):
        estimate_youngs_two_point(a, b, NU)


def test_two_point_projected_variant():
    n = N_OUT
    a = ProbeRecord(np.zeros(3), -n, 3.0, R)
    tangent = np.array([1.0, 0.0, 0.0])
    b = ProbeRecord(-7.47664e-3 * n + 1e-3 * tangent, -n, 4.5, R)
    assert estimate_youngs_two_point(a, b, NU, projected=True) == pytest.approx(8000.0, rel=5e-5)
    assert estimate_youngs_two_point(a, b, NU) < 8000.0


@given(E_=st.floats(500, 1e6), nu=st.floats(0, 0.49), R_=st.floats(1e-3, 0.05),
       kappa=st.floats(0, 100), f1=st.floats(0, 10), df=st.floats(0.01, 10))
def test_two_point_round_trip(E_, nu, R_, kappa, f1, df):
    estar = plane_strain_modulus(E_, nu)
    f1 = max(f1, transition_force(estar, R_, kappa) * 1.001)
    f2 = f1 + df
    d1 = flat_indentation(f1, estar, R_) + geometric_indentation_constant(kappa, R_)
    d2 = flat_indentation(f2, estar, R_) + geometric_indentation_constant(kappa, R_)
    a = ProbeRecord(-d1 * N_OUT, -N_OUT, f1, R_)
    b = ProbeRecord(-d2 * N_OUT, -N_OUT, f2, R_)
    assert estimate_youngs_two_point(a, b, nu) == pytest.approx(E_, rel=1e-9)


def test_compliance_estimator_recovers_kappa_and_E():
    probes = [probe_at(F) for F in (0.04, 0.06, 3.0, 4.5)]
    rep = estimate_E_kappa_compliance(probes, NU)
    m = rep.compliances
    C = hertz_constant(10.0, ESTAR)
    assert m[-1] == pytest.approx(4.9844e-3, rel=1e-4)
    # secant over [0.04, 0.06]; the tangent at 0.05 N is 6.92e-3
    assert m[0] == pytest.approx(C * (0.06 ** (2 / 3) - 0.04 ** (2 / 3)) / 0.02, rel=1e-12)
    assert (2 / 3) * C * 0.05 ** (-1 / 3) == pytest.approx(6.92e-3, rel=1e-3)
    assert rep.E_hat == pytest.approx(8000.0, rel=1e-3)
    assert rep.kappa_hat == pytest.approx(10.0, rel=1e-2)


def test_compliance_estimator_punch_regime_only():
    probes = [probe_at(F) for F in (1.0, 2.0, 3.0, 4.5)]
    with warnings.catch_warnings():
        warnings.simplefilter("error")
        rep = estimate_E_kappa_compliance(probes, NU)
    assert rep.kappa_hat is None and "not estimable" in rep.note
    assert rep.E_hat == pytest.approx(8000.0, rel=1e-9)


def test_compliance_estimator_errors():
    with pytest.raises(ContactError):
        estimate_E_kappa_compliance([probe_at(3.0), probe_at(4.5)], NU)
    with pytest.raises(ContactError):
        estimate_E_kappa_compliance([probe_at(3.0), probe_at(2.0), probe_at(4.5)], NU)


def test_compliance_windows():
    forces = (0.02, 0.03, 0.04, 2.0, 3.0, 4.5)
    probes = [probe_at(F) for F in forces]
    rep = estimate_E_kappa_compliance(probes, NU, low_window=(0, 1), high_window=slice(3, 5))
    assert rep.E_hat == pytest.approx(8000.0, rel=1e-9)
    assert rep.kappa_hat == pytest.approx(10.0, rel=0.05)


def test_settling_time():
    T_e, ok = settling_time_check(MaterialParams(4480, NU, rho=960), 0.005, 0.1)
    assert T_e == pytest.approx(2.31e-3, rel=1e-2)
    assert ok
    T4, _ = settling_time_check(MaterialParams(4 * 4480, NU, rho=960), 0.005, 0.1)
    assert T4 == pytest.approx(T_e / 2, rel=1e-12)
    _, ok5 = settling_time_check(MaterialParams(4480, NU, rho=960), 0.005, 5 * T_e)
    assert not ok5
    with pytest.raises(ContactError):
        settling_time_check(MaterialParams(4480, NU), 0.005, 0.1)
