import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

import oracles
from erthermo import ConvergenceError, DomainError
from erthermo.physics import ZeemanConfig, zeeman_splitting
from erthermo.spin import (
    ProbeSequence,
    RelaxationParams,
    boltzmann_spin_pair,
    ratiometric_validity_flags,
    relaxation_rate,
    steady_spin_populations,
)


def dg(B):
    return zeeman_splitting(ZeemanConfig(B))


def test_direct_rate_fifth_power_cold():
    rp = RelaxationParams(orbach_coeff=0.0)
    # Delta_g / 2T >> 1, so the thermal factor is 1 at both fields
    T = 0.5
    r = relaxation_rate(rp, 6.0, T, dg(6.0)) / relaxation_rate(rp, 3.0, T, dg(3.0))
    assert r == pytest.approx(32.0, rel=0.01)


def test_direct_rate_fifth_power_pure_switch():
    rp = RelaxationParams(orbach_coeff=0.0, direct_thermal_factor=False)
    assert relaxation_rate(rp, 1.5, 4.0, dg(1.5)) / relaxation_rate(rp, 0.75, 4.0, dg(0.75)) == pytest.approx(32.0, rel=1e-12)


def test_direct_rate_fixed_splitting_argument():
    # with the splitting argument held fixed only B^5 changes
    rp = RelaxationParams(orbach_coeff=0.0)
    assert relaxation_rate(rp, 0.2, 10.0, 0.5) / relaxation_rate(rp, 0.1, 10.0, 0.5) == pytest.approx(32.0, rel=1e-12)


def test_direct_rate_closed_form():
    rp = RelaxationParams(orbach_coeff=0.0)
    d = dg(0.75)
    assert relaxation_rate(rp, 0.75, 2.0, d) == pytest.approx(400 * 0.75**5 / math.tanh(d / 4.0), rel=1e-13)


def test_orbach_arrhenius_slope():
    rp = RelaxationParams(direct_coeff=0.0)
    T = np.array([8.0, 12.0, 20.0])
    lr = np.log([relaxation_rate(rp, 0.0, t, 0.0) for t in T])
    slope, icpt = np.polyfit(1 / T, lr, 1)
    assert slope == pytest.approx(-126.0, rel=0.01)
    assert slope == pytest.approx(-126.0, rel=1e-10)
    assert np.exp(icpt) == pytest.approx(1.5e9, rel=1e-9)


def test_no_channel_no_relaxation():
    assert relaxation_rate(RelaxationParams(orbach_coeff=0.0), 0.0, 5.0, 0.0) == 0.0


@pytest.mark.parametrize("T", [0.0, -2.0])
def test_rate_rejects_bad_temperature(T):
    with pytest.raises(DomainError):
        relaxation_rate(RelaxationParams(), 1.0, T, 1.0)


def test_rate_rejects_negative_field():
    with pytest.raises(DomainError):
        relaxation_rate(RelaxationParams(), -1.0, 2.0, 1.0)


def test_rate_monotone_on_grid():
    rp = RelaxationParams()
    B = np.linspace(0.05, 5, 60)
    T = np.linspace(1.0, 30, 60)
    for t in (2.0, 8.0):
        r = [relaxation_rate(rp, b, t, dg(b)) for b in B]
        assert np.all(np.diff(r) > 0)
    for b in (0.75, 3.0):
        r = [relaxation_rate(rp, b, t, dg(b)) for t in T]
        assert np.all(np.diff(r) > 0)


def test_rate_positive_when_a_channel_exists():
    assert relaxation_rate(RelaxationParams(direct_coeff=0.0), 0.0, 1.0, 0.0) > 0
    assert relaxation_rate(RelaxationParams(orbach_coeff=0.0), 0.1, 1.0, dg(0.1)) > 0


def test_parameter_validation():
    with pytest.raises(DomainError):
        RelaxationParams(direct_coeff=-1)
    with pytest.raises(DomainError):
        ProbeSequence(pulse_duration=5e-3, repetition_period=4e-3)
    with pytest.raises(DomainError):
        ProbeSequence(pump_rate=-1.0)
    with pytest.raises(DomainError):
        steady_spin_populations(RelaxationParams(), ProbeSequence(), 1.0, 2.0, dg(1.0), probed_state="sideways")


# -- steady state -------------------------------------------------------------------


def test_fast_relaxation_is_thermal():
    seq = ProbeSequence(repetition_period=1e-3)
    d = dg(3.0)
    p = steady_spin_populations(RelaxationParams(), seq, 3.0, 5.0, d, rate=1e6)
    np.testing.assert_allclose(p, boltzmann_spin_pair(d, 5.0), atol=1e-6)


@pytest.mark.parametrize("state,k", [("down", 1), ("up", 0)])
def test_full_optical_pumping(state, k):
    seq = ProbeSequence(pump_rate=1e5)
    p = steady_spin_populations(RelaxationParams(), seq, 3.0, 5.0, dg(3.0), probed_state=state, rate=1e-9)
    assert p[k] < 1e-3
    assert p.sum() == pytest.approx(1.0, abs=1e-12)


@settings(max_examples=60, deadline=None)
@given(logR=st.floats(-1, 6), T=st.floats(1.0, 20.0), B=st.floats(0.1, 4.0), logW=st.floats(0, 4),
       state=st.sampled_from(["up", "down"]))
def test_steady_state_matches_closed_form(logR, T, B, logW, state):
    seq = ProbeSequence(pump_rate=10**logW)
    d = dg(B)
    p = steady_spin_populations(RelaxationParams(), seq, B, T, d, probed_state=state, rate=10**logR)
    k = 0 if state == "up" else 1
    p_eq = oracles.boltzmann([0.0, d], [1, 1], T)[::-1][k]
    ref = oracles.periodic_pumped_population(p_eq, 10**logR, 10**logW, seq.pulse_duration, seq.repetition_period)
    assert p[k] == pytest.approx(ref, abs=1e-8)
    assert np.all(p >= 0) and p.sum() == pytest.approx(1.0, abs=1e-9)


def test_probed_population_monotone_in_rate():
    seq = ProbeSequence()
    d = dg(0.75)
    R = np.logspace(-1, 5, 40)
    p = np.array([steady_spin_populations(RelaxationParams(), seq, 0.75, 2.0, d, rate=r)[1] for r in R])
    assert np.all(np.diff(p) >= 0)
    assert np.all(np.diff(p[R < 1e3]) > 0)
    eq = boltzmann_spin_pair(d, 2.0)[1]
    assert p[-1] == pytest.approx(eq, abs=1e-6)
    assert p[0] < eq


def test_more_repetitions_do_not_change_converged_result():
    d = dg(0.75)
    a = steady_spin_populations(RelaxationParams(), ProbeSequence(n_repetitions=100_000), 0.75, 2.0, d)
    b = steady_spin_populations(RelaxationParams(), ProbeSequence(n_repetitions=200_000), 0.75, 2.0, d)
    np.testing.assert_allclose(a, b, atol=1e-9)


def test_non_convergence_carries_last_iterate():
    with pytest.raises(ConvergenceError) as exc:
        steady_spin_populations(RelaxationParams(), ProbeSequence(n_repetitions=3), 0.75, 2.0, dg(0.75), rate=1e-3)
    last = exc.value.last
    assert last is not None and np.sum(last) == pytest.approx(1.0)
    assert exc.value.exit_code == 3


# -- validity flags -----------------------------------------------------------------


def test_flags_fast_and_cold():
    f = ratiometric_validity_flags(RelaxationParams(), ProbeSequence(), 3.0, 4.0, dg(3.0), 2e-4)
    assert not f["slow_thermalization"] and not f["orbach_shortcut"]


def test_orbach_shortcut_at_12K():
    f = ratiometric_validity_flags(RelaxationParams(), ProbeSequence(), 3.0, 12.0, dg(3.0), 2e-4)
    assert f["orbach_shortcut"]


def test_slow_thermalization_at_low_field():
    f = ratiometric_validity_flags(RelaxationParams(), ProbeSequence(), 0.75, 2.0, dg(0.75), 2e-4)
    assert f["slow_thermalization"]


def test_flag_thresholds_configurable():
    rp, seq = RelaxationParams(), ProbeSequence()
    R = relaxation_rate(rp, 3.0, 4.0, dg(3.0))
    f = ratiometric_validity_flags(rp, seq, 3.0, 4.0, dg(3.0), 2e-4, slow_threshold=2 * R * seq.repetition_period)
    assert f["slow_thermalization"]
