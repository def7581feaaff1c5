import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from erthermo import DomainError, OutOfRangeError, SingularProbeError
from erthermo.estimators import ProbeCalibration, boltzmann_calibration, calibrate_probe
from erthermo.metrology import (
    SensitivityProfile,
    compare_probes,
    profile_from_calibration,
    relative_sensitivity,
    temperature_precision,
)

import oracles


def test_pure_exponential_has_constant_sr():
    cal = ProbeCalibration("exponential_offset", [5.0, 37.0, 0.0], (1.0, 300.0))
    for T in (1.0, 50.0, 300.0):
        assert relative_sensitivity(cal, T)[0] == pytest.approx(1 / 37.0, rel=1e-12)


def test_ratiometric_sensitivity_anchor():
    cal = boltzmann_calibration(16.70, valid_range=(1.0, 20.0))
    s, _ = relative_sensitivity(cal, 2.0)
    assert s == pytest.approx(16.70 / 4.0, rel=1e-12)
    assert 100 * s == pytest.approx(418, abs=0.5)
    assert 370 <= 100 * s <= 470
    s3, _ = relative_sensitivity(boltzmann_calibration(oracles.DELTA_G_3T, valid_range=(1.0, 20.0)), 2.0)
    assert s3 == pytest.approx(oracles.DELTA_G_3T / 4.0, rel=1e-12)


def test_poly2_hand_derivative():
    cal = ProbeCalibration("poly2", [0.0, 0.0, 1.0], (1.0, 10.0))
    assert relative_sensitivity(cal, 3.0)[0] == pytest.approx(2 / 3, rel=1e-14)


def test_singular_and_out_of_range():
    cal = ProbeCalibration("poly2", [0.0, 0.0, 1.0], (-1.0, 10.0))
    with pytest.raises(SingularProbeError):
        relative_sensitivity(cal, 0.0)
    with pytest.raises(OutOfRangeError):
        relative_sensitivity(cal, 11.0)


def test_sr_uncertainty_propagation():
    cov = np.diag([0.01, 4.0, 0.0])
    cal = ProbeCalibration("exponential_offset", [5.0, 40.0, 0.0], (1.0, 300.0), param_covariance=cov)
    s, ss = relative_sensitivity(cal, 100.0)
    assert ss == pytest.approx(2.0 / 40.0**2, rel=1e-5)


def test_precision_examples():
    assert temperature_precision(1.0, 0.01) == pytest.approx(0.01)
    assert temperature_precision(4.18, 0.17) == pytest.approx(0.0407, abs=5e-5)
    assert temperature_precision(0.0022, 0.0132) == pytest.approx(6.0, rel=1e-12)
    for bad in (0.0, -1.0):
        with pytest.raises(DomainError):
            temperature_precision(bad, 0.01)


@given(s=st.floats(1e-4, 10), r=st.floats(0, 1), k=st.floats(0, 100))
def test_precision_linear_in_noise(s, r, k):
    assert temperature_precision(s, k * r) == pytest.approx(k * temperature_precision(s, r), rel=1e-12, abs=1e-300)


MODELS = {
    "exponential_offset": (lambda T: 3 * np.exp(-T / 40) + 0.2, np.linspace(10, 200, 20), {}),
    "poly2": (lambda T: 1 + 0.02 * T + 1e-4 * T * T, np.linspace(2, 200, 20), {}),
    "exponential_piecewise": (lambda T: 50 * np.exp(-np.where(T <= 100, 0.02, 0.03) * (T - 100)),
                              np.linspace(18, 174, 20), {"split": 100.0}),
    "cubic_spline": (lambda T: 100 / (1 + (T / 80) ** 2), np.linspace(2, 200, 30), {}),
}


@settings(max_examples=40, deadline=None)
@given(model=st.sampled_from(list(MODELS)), k=st.sampled_from([-3.0, -0.5, 0.01, 2.0, 1e3]), u=st.floats(0, 1))
def test_sr_invariant_under_rescaling(model, k, u):
    f, T, kw = MODELS[model]
    y = f(T)
    if model == "exponential_piecewise" and k < 0:
        k = -k  # log-linear family needs a positive observable
    base = calibrate_probe(np.column_stack([T, y, 0.01 * np.abs(y)]), model, **kw)
    scaled = calibrate_probe(np.column_stack([T, k * y, 0.01 * np.abs(k * y)]), model, **kw)
    Tq = T[0] + u * (T[-1] - T[0])
    assert relative_sensitivity(scaled, Tq)[0] == pytest.approx(relative_sensitivity(base, Tq)[0], rel=1e-6)


def test_profile_from_calibration():
    cal = ProbeCalibration("exponential_offset", [5.0, 40.0, 0.0], (10.0, 100.0))
    prof = profile_from_calibration(cal, [5.0, 20.0, 50.0], 0.01, integration_time=300.0, label="q")
    np.testing.assert_array_equal(prof.valid, [False, True, True])
    np.testing.assert_allclose(prof.delta_T[1:], 0.4)
    assert prof.delta_T[0] == 0.0 and prof.integration_time == 300.0 and prof.label == "q"


# -- comparison ---------------------------------------------------------------------


def prof(method, T, dT, valid=None, label=""):
    T = np.asarray(T, float)
    dT = np.asarray(dT, float)
    return SensitivityProfile(method, T, np.ones_like(T), dT, valid=valid, label=label)


def test_single_profile_wins_everywhere():
    res = compare_probes([prof("quench", [180, 200, 250], [0.5, 0.4, 0.3])])
    assert res.best == ["quench"] * 3
    assert res.regimes == [("quench", 180.0, 250.0)]


def test_identical_profiles_tie_break_by_method_order():
    a = prof("peak_fwhm", [10, 20], [0.1, 0.1])
    b = prof("filtered", [10, 20], [0.1, 0.1])
    assert compare_probes([a, b]).best == ["filtered", "filtered"]
    assert compare_probes([b, a]).best == ["filtered", "filtered"]


def test_crossing_profiles_and_regimes():
    lowp = prof("ratiometric", [2, 4, 6, 8, 10], [0.01, 0.02, 0.05, 0.2, 0.5])
    mid = prof("peak_amplitude", [2, 4, 6, 8, 10, 50, 100], [0.5, 0.4, 0.3, 0.1, 0.1, 0.1, 0.2])
    hot = prof("quench", [100, 200, 300], [0.5, 0.3, 1.0])
    res = compare_probes([hot, mid, lowp])
    assert res.winner_at(2) == "ratiometric" and res.winner_at(50) == "peak_amplitude"
    assert res.winner_at(300) == "quench"
    assert [r[0] for r in res.regimes] == ["ratiometric", "peak_amplitude", "quench"]


def test_invalid_points_are_skipped():
    a = prof("quench", [10, 20, 30], [0.01, 0.01, 0.01], valid=[True, False, True])
    b = prof("filtered", [10, 20, 30], [1.0, 1.0, 1.0])
    assert compare_probes([a, b]).best == ["quench", "filtered", "quench"]


def test_no_winner_outside_coverage():
    res = compare_probes([prof("quench", [200, 300], [1, 1]), prof("filtered", [10, 20], [1, 1])])
    assert res.best == ["filtered", "filtered", "quench", "quench"]
    res = compare_probes([prof("quench", [200, 300], [1, 1], valid=[False, False])])
    assert res.best == [None, None] and res.regimes == []


def test_compare_empty():
    with pytest.raises(DomainError):
        compare_probes([])


def test_profile_validation():
    with pytest.raises(DomainError):
        prof("thermocouple", [1], [1])
    with pytest.raises(DomainError):
        prof("quench", [1, 2], [1])
    with pytest.raises(DomainError):
        prof("quench", [1, 2], [1, -1])
