import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st
from scipy.integrate import simpson

import oracles
from erthermo import DomainError
from erthermo.physics import SITE_A, ZeemanConfig, boltzmann_populations, zeeman_splitting
from erthermo.synth import (
    DetectionFilter,
    LineShapeParams,
    QuenchModel,
    SynthesisConfig,
    emission_detected_fraction,
    expected_counts,
    gaussian,
    lorentzian,
    quench_factor,
    spin_line_positions,
    spinsplit_ple_spectrum,
    synthesize_ple_spectrum,
)
from erthermo.physics import SiteLevelStructure

GRID = np.arange(1480.0, 1545.0, 0.05)


def single_line_cfg(**kw):
    s = np.zeros((8, 7))
    s[0, 0] = 1.0
    return SynthesisConfig(sites=[SiteLevelStructure.from_dict(SITE_A.to_dict())], strengths=[s], dark_counts=0.0, **kw)


# -- line shapes ---------------------------------------------------------------


def test_lorentzian_examples():
    assert lorentzian(1490.6, 1490.6, 0.8, 5.0) == 5.0
    assert lorentzian(1490.6 + 0.4, 1490.6, 0.8, 5.0) == pytest.approx(2.5, rel=1e-12)
    assert lorentzian(1490.6 - 0.4, 1490.6, 0.8, 5.0) == pytest.approx(2.5, rel=1e-12)
    assert lorentzian(1491.0, 1490.6, 0.8, 100.0) == pytest.approx(50.0, rel=1e-10)
    assert lorentzian(1490.6, 1490.6, 0.8, 5.0, 0.1, 2.0) == 7.0


@given(x=st.floats(1480, 1500), c=st.floats(1485, 1495), w=st.floats(0.01, 5), a=st.floats(0, 1e3),
       b1=st.floats(-1, 1), b0=st.floats(-10, 10))
def test_lineshapes_match_closed_form(x, c, w, a, b1, b0):
    assert lorentzian(x, c, w, a, b1, b0) == pytest.approx(oracles.lorentz(x, c, w, a, b1, b0), rel=1e-12, abs=1e-9)
    assert gaussian(x, c, w, a, b1, b0) == pytest.approx(oracles.gauss(x, c, w, a, b1, b0), rel=1e-12, abs=1e-9)


@pytest.mark.parametrize("w", [0.0, -0.1])
def test_lineshape_rejects_nonpositive_width(w):
    with pytest.raises(DomainError):
        lorentzian(1490.0, 1490.0, w, 1.0)
    with pytest.raises(DomainError):
        gaussian(1490.0, 1490.0, w, 1.0)


def test_lineshape_params_invariants():
    with pytest.raises(DomainError):
        LineShapeParams(fwhm0=0.3, fwhm_poly=(-0.01, 0.0))
    with pytest.raises(DomainError):
        LineShapeParams(center_shift_poly=(-1e-4, 0.0))
    ls = LineShapeParams()
    T = np.linspace(1.2, 295, 300)
    assert np.all(ls.fwhm(T) > 0)


# -- quench ---------------------------------------------------------------------


def test_quench_examples():
    qm = QuenchModel(2000.0, 1e4)
    assert quench_factor(qm, 250.0) == pytest.approx(oracles.ETA_C1E4_250K, rel=1e-12)
    assert quench_factor(qm, 250.0) == pytest.approx(0.2297, abs=1e-4)
    assert quench_factor(QuenchModel(), 0.1) >= 1 - 1e-6
    with pytest.raises(DomainError):
        quench_factor(qm, 0.0)


def test_default_quench_dominates_above_200K():
    qm = QuenchModel()
    assert quench_factor(qm, 300.0) / quench_factor(qm, 200.0) < 0.1
    for T in (200.0, 250.0, 300.0):
        assert qm.prefactor * math.exp(-qm.activation_energy / T) > 1.0


@given(Ea=st.floats(10, 5000), logC=st.floats(0, 8), T=st.lists(st.floats(20, 320), min_size=3, max_size=3, unique=True))
def test_quench_log_odds_affine_in_inverse_T(Ea, logC, T):
    qm = QuenchModel(Ea, 10**logC)
    for t in T:
        eta = quench_factor(qm, t)
        assert 0 < eta <= 1
        assert eta == pytest.approx(oracles.eta(Ea, 10**logC, t), rel=1e-12)
    T = sorted(T)
    etas = [quench_factor(qm, t) for t in T]
    assert etas[0] >= etas[1] >= etas[2]


def test_quench_log_odds_slope():
    qm = QuenchModel(1500.0, 3e3)
    T = np.array([150.0, 200.0, 250.0])
    lo = np.log(1 / np.array([quench_factor(qm, t) for t in T]) - 1)
    slope = np.polyfit(1 / T, lo, 1)[0]
    assert slope == pytest.approx(-1500.0, rel=1e-9)


# -- detection filter -------------------------------------------------------------


def test_filter_ramp():
    f = DetectionFilter()
    assert (f.step_center, f.step_width) == (1551.3, 1.5)
    assert f.transmission(1550.55) == 0.0
    assert f.transmission(1552.05) == 1.0
    assert f.transmission(1551.3) == pytest.approx(0.5)
    lam = np.linspace(1540, 1560, 500)
    t = f.transmission(lam)
    assert np.all((t >= 0) & (t <= 1)) and np.all(np.diff(t) >= 0)
    assert np.all(DetectionFilter("none").transmission(lam) == 1.0)
    with pytest.raises(DomainError):
        DetectionFilter("bandpass")


def test_detected_fraction_none_is_one(default_synth):
    assert emission_detected_fraction(SITE_A, default_synth.branching[0], 40.0, DetectionFilter("none")) == 1.0


def test_detected_fraction_two_line_example():
    # Z levels placed so that Y1 -> Z2 emits at 1545 nm and Y1 -> Z3 at 1560 nm
    z1y1 = 1530.0
    nu0 = oracles.C_LIGHT / (z1y1 * 1e-9)
    def e_of(lam):
        return (nu0 - oracles.C_LIGHT / (lam * 1e-9)) * oracles.H_OVER_KB

    z = [0.0, e_of(1545.0), e_of(1560.0), 200, 250, 300, 350, 400]
    site = SiteLevelStructure("A", z, [0, 100, 120, 140, 160, 180, 200], z1y1)
    assert site.transition_table()[1, 0] == pytest.approx(1545.0, abs=1e-9)
    assert site.transition_table()[2, 0] == pytest.approx(1560.0, abs=1e-9)
    b = np.full((7, 8), 1 / 8)
    b[0] = [0, 0.4, 0.6, 0, 0, 0, 0, 0]
    assert emission_detected_fraction(site, b, 1.0, DetectionFilter()) == pytest.approx(0.6, abs=1e-12)


def test_detected_fraction_matches_oracle(default_synth):
    f = DetectionFilter()
    for site, b in zip(default_synth.sites, default_synth.branching):
        for T in (2.0, 30.0, 150.0, 300.0):
            ref = oracles.detected_fraction(site.z_energies, site.y_energies, site.z1y1_wavelength,
                                            list(site.degeneracies), b.tolist(), T, f.step_center, f.step_width)
            assert emission_detected_fraction(site, b, T, f) == pytest.approx(ref, rel=1e-12)


@given(T1=st.floats(1, 300), dT=st.floats(0.1, 100))
def test_detected_fraction_decreases_with_T(T1, dT):
    f = DetectionFilter()
    b = np.full((7, 8), 1 / 8)
    assert emission_detected_fraction(SITE_A, b, T1, f) >= emission_detected_fraction(SITE_A, b, T1 + dT, f) - 1e-15


def test_detected_fraction_rejects_bad_branching():
    with pytest.raises(DomainError):
        emission_detected_fraction(SITE_A, np.full((7, 8), 0.2), 10.0, DetectionFilter())
    with pytest.raises(DomainError):
        emission_detected_fraction(SITE_A, np.full((8, 8), 1 / 8), 10.0, DetectionFilter())
    with pytest.raises(DomainError):
        SynthesisConfig(branching=[np.full((7, 8), 0.2)] * 2)


def test_amplitude_mechanism_monotone(default_synth):
    T = np.linspace(1.2, 320, 300)
    f = default_synth.filter
    v = [quench_factor(default_synth.quench, t) * emission_detected_fraction(SITE_A, default_synth.branching[0], t, f)
         for t in T]
    assert np.all(np.diff(v) <= 1e-15)
    assert v[-1] < 0.1 * v[0]
    hot = T > 20
    assert np.all(np.diff(np.array(v)[hot]) < 0)


# -- forward model -------------------------------------------------------------------


@pytest.mark.parametrize("T", [1.5, 18.0, 90.0, 294.0])
@pytest.mark.parametrize("kind", ["none", "longpass"])
def test_expected_counts_match_oracle(T, kind):
    cfg = SynthesisConfig(filter=DetectionFilter(kind))
    grid = np.linspace(1476.0, 1569.0, 233)
    np.testing.assert_allclose(expected_counts(cfg, T, grid), oracles.forward_counts(cfg, T, list(grid)), rtol=1e-11)


def test_empty_waveguide_gives_dark_counts():
    cfg = SynthesisConfig(ion_density_scale=0.0, dark_counts=0.5)
    spec = synthesize_ple_spectrum(cfg, 18.0, 0.0, GRID)
    assert np.all(spec.counts == 0.5)


def test_count_scale_anchor(default_synth):
    grid = np.arange(1475.0, 1570.0, 0.01)
    mu = expected_counts(default_synth, 18.0, grid)
    assert 50 < mu.max() < 300
    s = synthesize_ple_spectrum(default_synth, 18.0, 0.0, grid, rng_seed=1)
    assert 50 < s.counts.max() < 300
    # resolved Z1 -> Y lines of both sites are local maxima
    for site in default_synth.sites:
        for lam in site.transition_table()[0] + float(default_synth.lineshape.shift(18.0)):
            i = int(np.argmin(abs(grid - lam)))
            j = i - 5 + int(np.argmax(mu[i - 5:i + 6]))
            assert abs(grid[j] - lam) <= 0.01
            assert mu[j] > mu[j - 5] and mu[j] > mu[j + 5]


def test_hot_to_cold_signal_ratio(default_synth):
    grid = np.arange(1475.0, 1570.0, 0.05)
    r = (expected_counts(default_synth, 294.0, grid).sum() - 0.5 * grid.size) / (
        expected_counts(default_synth, 18.0, grid).sum() - 0.5 * grid.size)
    ref_hot = sum(oracles.forward_counts(default_synth, 294.0, list(grid))) - 0.5 * grid.size
    ref_cold = sum(oracles.forward_counts(default_synth, 18.0, list(grid))) - 0.5 * grid.size
    assert r == pytest.approx(ref_hot / ref_cold, rel=1e-10)
    assert r < 0.02


def test_grid_refinement_invariance(default_synth):
    fine = np.linspace(1480.0, 1540.0, 2401)
    coarse = fine[::4].copy()
    a = expected_counts(default_synth, 40.0, coarse)
    b = expected_counts(default_synth, 40.0, fine)[::4]
    np.testing.assert_allclose(b, a, rtol=1e-13)


@pytest.mark.parametrize("T", [5.0, 60.0, 150.0, 250.0])
def test_single_line_integral_tracks_population_and_quench(T):
    cfg = single_line_cfg(filter=DetectionFilter("none"))
    lo, hi = 1475.0, 1570.0
    grid = np.linspace(lo, hi, 190001)
    area = simpson(expected_counts(cfg, T, grid), x=grid)
    w = float(cfg.lineshape.fwhm(T))
    c = SITE_A.z1y1_wavelength + float(cfg.lineshape.shift(T))
    p1 = oracles.boltzmann(list(SITE_A.z_energies), [2] * 8, T)[0]
    eta = oracles.eta(2000.0, 1e5, T)
    # the window truncates the Lorentzian tails; that share is removed analytically
    ref = cfg.scale * p1 * eta * oracles.lorentz_area(c, w, cfg.lineshape.fwhm0 / w, lo, hi)
    assert area == pytest.approx(ref, rel=1e-6)


def test_input_validation(default_synth):
    with pytest.raises(DomainError):
        synthesize_ple_spectrum(default_synth, 18.0, 0.0, np.linspace(1470, 1500, 50))
    with pytest.raises(DomainError):
        synthesize_ple_spectrum(default_synth, 18.0, 0.0, np.linspace(1540, 1580, 50))
    with pytest.raises(DomainError):
        synthesize_ple_spectrum(default_synth, 0.5, 0.0, GRID)
    with pytest.raises(DomainError):
        synthesize_ple_spectrum(default_synth, 400.0, 0.0, GRID)
    with pytest.raises(DomainError):
        synthesize_ple_spectrum(default_synth, 18.0, 0.0, GRID[::-1])
    with pytest.raises(DomainError):
        SynthesisConfig(n_averages=0)


# -- sampling -------------------------------------------------------------------------


def test_poisson_statistics():
    cfg = SynthesisConfig(ion_density_scale=0.0, dark_counts=7.3, n_averages=1)
    grid = np.linspace(1475.0, 1570.0, 20000)
    s = synthesize_ple_spectrum(cfg, 10.0, 0.0, grid, rng_seed=42)
    mu = 7.3
    assert abs(s.counts.mean() - mu) < 5 * math.sqrt(mu / grid.size)
    assert 0.9 < s.counts.var() / s.counts.mean() < 1.1
    np.testing.assert_allclose(s.uncertainties, math.sqrt(mu))


def test_average_reduces_scatter():
    cfg = SynthesisConfig(ion_density_scale=0.0, dark_counts=4.0, n_averages=400)
    s = synthesize_ple_spectrum(cfg, 10.0, 0.0, np.linspace(1475.0, 1570.0, 20000), rng_seed=3)
    assert s.counts.std() == pytest.approx(math.sqrt(4.0 / 400), rel=0.05)
    np.testing.assert_allclose(s.uncertainties, math.sqrt(4.0 / 400))


def test_deterministic_replay(default_synth):
    a = synthesize_ple_spectrum(default_synth, 18.0, 0.0, GRID, rng_seed=11)
    b = synthesize_ple_spectrum(default_synth, 18.0, 0.0, GRID, rng_seed=11)
    c = synthesize_ple_spectrum(default_synth, 18.0, 0.0, GRID, rng_seed=12)
    assert np.array_equal(a.counts, b.counts)
    assert not np.array_equal(a.counts, c.counts)
    assert a.meta == b.meta and a.meta["seed"] == 11


def test_noiseless_when_unseeded(default_synth):
    s = synthesize_ple_spectrum(default_synth, 18.0, 0.0, GRID)
    np.testing.assert_array_equal(s.counts, expected_counts(default_synth, 18.0, GRID))
    assert s.meta["seed"] is None and s.meta["T_K"] == 18.0


# -- spin-split spectra ---------------------------------------------------------------


def _line_heights(spec):
    i_up = int(np.argmin(abs(spec.wavelengths - spec.meta["line_up_nm"])))
    i_dn = int(np.argmin(abs(spec.wavelengths - spec.meta["line_down_nm"])))
    return spec.counts[i_up], spec.counts[i_dn]


def _grid_with_lines(cfg, T, zc):
    up, dn = spin_line_positions(cfg.sites[0], zc)
    shift = float(cfg.lineshape.shift(T))
    return np.unique(np.concatenate([np.linspace(1536.5, 1539.0, 401), [up + shift, dn + shift]]))


def test_spin_lines_symmetric_about_zero_field_line():
    zc = ZeemanConfig(3.0)
    up, dn = spin_line_positions(SITE_A, zc)
    nu0 = oracles.C_LIGHT / (SITE_A.z1y1_wavelength * 1e-9)
    half = 0.5 * (zeeman_splitting(zc) - zeeman_splitting(zc, "excited")) / oracles.H_OVER_KB
    assert oracles.C_LIGHT / (up * 1e-9) == pytest.approx(nu0 - half, rel=1e-14)
    assert oracles.C_LIGHT / (dn * 1e-9) == pytest.approx(nu0 + half, rel=1e-14)
    assert up > dn  # the upper spin state feeds the lower-frequency line


def test_equal_populations_give_equal_peaks():
    cfg = single_line_cfg()
    zc = ZeemanConfig(3.0)
    spec = spinsplit_ple_spectrum(cfg, 5.0, zc, [0.5, 0.5], _grid_with_lines(cfg, 5.0, zc))
    a, b = _line_heights(spec)
    assert a == pytest.approx(b, rel=1e-9)


def test_boltzmann_populations_set_amplitude_ratio():
    cfg = single_line_cfg()
    zc = ZeemanConfig(3.0)
    dg = zeeman_splitting(zc)
    p_low, p_high = boltzmann_populations([0.0, dg], [1, 1], 5.0)
    spec = spinsplit_ple_spectrum(cfg, 5.0, zc, [p_high, p_low], _grid_with_lines(cfg, 5.0, zc))
    up, dn = _line_heights(spec)
    assert up / dn == pytest.approx(oracles.RATIO_5K_3T, rel=1e-9)
    assert up / dn == pytest.approx(math.exp(-3.340), rel=1e-3)


def test_upper_state_peak_grows_with_T():
    cfg = SynthesisConfig()
    zc = ZeemanConfig(3.0)
    dg = zeeman_splitting(zc)
    ratios = []
    for T in np.arange(2.0, 10.5, 1.0):
        p_low, p_high = boltzmann_populations([0.0, dg], [1, 1], T)
        up, dn = _line_heights(spinsplit_ple_spectrum(cfg, T, zc, [p_high, p_low], _grid_with_lines(cfg, T, zc)))
        ratios.append(up / dn)
    assert np.all(np.diff(ratios) > 0)


@pytest.mark.parametrize("pops", [[0.6, 0.6], [-0.1, 1.1], [1.0]])
def test_spin_population_validation(pops):
    with pytest.raises(DomainError):
        spinsplit_ple_spectrum(SynthesisConfig(), 5.0, ZeemanConfig(3.0), pops, GRID)


@settings(max_examples=30, deadline=None)
@given(T=st.floats(1.0, 320.0))
def test_counts_nonnegative(T):
    mu = expected_counts(SynthesisConfig(), T, GRID)
    assert np.all(mu >= 0.5) and np.all(np.isfinite(mu))
