import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from noisespec.analysis import (
    CorrelationError,
    InfeasibleError,
    InsufficientDataError,
    Peak,
    PeakSet,
    allowed_roles,
    closed_form_seed,
    correlation_sweep,
    detect_peaks,
    effective_samples,
    fit_assignment,
    ensemble_correlation,
    hamiltonian_gaps,
    invert_parameters,
    pearson_r,
    transition_frequencies,
)
from noisespec.integrator import SimConfig, run_ensemble
from noisespec.model import SystemParams, build_hamiltonian, eigen_oracle
from noisespec.spectral import Spectrum
from noisespec.stochastic import NoiseSpec

EXACT = (0.0984, 0.1592, 0.2575, 0.3559)


def peakset(nus, source=""):
    return PeakSet([Peak(float(v), 1.0, 1.0, 0.0, source) for v in nus], 0.0, source)


def test_transitions_reference_values():
    ts = transition_frequencies(1.0, 0.5)
    np.testing.assert_allclose(np.round(ts.nus, 2), [0.16, 0.10, 0.26, 0.36])


def test_transitions_decoupled():
    np.testing.assert_allclose(transition_frequencies(1.0, 0.0).omegas, [0, 1, 1, 2])


def test_transitions_g07():
    ts = transition_frequencies(1.0, 0.7)
    np.testing.assert_allclose(ts.omegas, [1.4, 0.5207, 1.9207, 2.4413], atol=5e-5)
    gaps = hamiltonian_gaps(eigen_oracle(build_hamiltonian(SystemParams.symmetric(1.0, 0.7))))
    np.testing.assert_allclose(np.sort(ts.omegas), gaps, atol=1e-10)


@settings(max_examples=200, deadline=None)
@given(st.floats(0.01, 10), st.floats(-10, 10))
def test_transition_identities(delta, g):
    ts = transition_frequencies(delta, g)
    assert ts.omega1 == pytest.approx(ts.omega3 - ts.omega2, abs=1e-12 * max(1, ts.omega4))
    assert ts.omega4 == pytest.approx(ts.omega2 + ts.omega3, abs=1e-12 * max(1, ts.omega4))
    if g != 0:
        assert np.all(ts.omegas > 0)


def test_transition_sign_symmetry():
    assert transition_frequencies(1.0, 0.4) == transition_frequencies(1.0, -0.4)


# -- peaks --------------------------------------------------------------------

def test_flat_spectrum_has_no_peaks():
    sp = Spectrum(np.arange(513) * 0.01, np.ones(513))
    assert len(detect_peaks(sp)) == 0
    assert len(detect_peaks(Spectrum(np.arange(513) * 0.01, np.zeros(513)))) == 0


def test_on_grid_line():
    nu = np.arange(513) / 204.8
    psd = np.full(513, 1e-6)
    psd[100] = 1.0
    peaks = detect_peaks(Spectrum(nu, psd))
    assert len(peaks) == 1
    assert abs(peaks.nus[0] - nu[100]) <= 0.5 * (nu[1] - nu[0])


def test_peak_count_capped_by_prominence():
    nu = np.arange(1025) * 0.01
    psd = np.full(1025, 1e-3)
    for k, h in enumerate([1, 2, 3, 4, 5, 6, 7, 8]):
        psd[50 + 100 * k] = h
    peaks = detect_peaks(Spectrum(nu, psd), max_peaks=6)
    assert len(peaks) == 6
    assert np.all(np.diff(peaks.nus) > 0)
    assert min(p.height for p in peaks) == 3


@settings(max_examples=40, deadline=None)
@given(st.floats(0.05, 0.45), st.integers(0, 2**32 - 1))
def test_parabolic_refinement_within_half_bin(nu0, seed):
    n, dt = 2048, 0.1
    t = dt * np.arange(n)
    rng = np.random.default_rng(seed)
    x = np.cos(2 * np.pi * nu0 * t + rng.uniform(0, 6)) + 0.07 * rng.normal(size=n)  # > 20 dB
    w = 0.5 - 0.5 * np.cos(2 * np.pi * np.arange(n) / n)
    spec = np.abs(np.fft.rfft((x - x.mean()) * w)) ** 2
    nu = np.arange(n // 2 + 1) / (n * dt)
    peaks = detect_peaks(Spectrum(nu, spec))
    assert len(peaks) >= 1
    best = max(peaks, key=lambda p: p.height)
    assert abs(best.nu - nu0) <= 0.5 / (n * dt)


# -- inversion ----------------------------------------------------------------

def test_exact_round_trip():
    est = invert_parameters(peakset(EXACT))
    assert est.delta_hat == pytest.approx(1.0, abs=2e-3)
    assert est.g_hat_magnitude == pytest.approx(0.5, abs=2e-3)
    assert est.residual < 1e-3
    assert est.g_sign is None and est.g_hat is None
    ts = transition_frequencies(1.0, 0.5)
    est = invert_parameters(peakset(ts.nus))
    assert est.delta_hat == pytest.approx(1.0, abs=1e-6)
    assert est.g_hat_magnitude == pytest.approx(0.5, abs=1e-6)
    assert est.residual < 1e-6
    assert set(est.assignment) == {"nu1", "nu2", "nu3", "nu4"}


@settings(max_examples=60, deadline=None)
@given(st.floats(0.3, 3.0), st.floats(0.05, 2.0))
def test_round_trip_identity(delta, g):
    ts = transition_frequencies(delta, g)
    if np.min(np.abs(np.subtract.outer(ts.nus, ts.nus))[np.triu_indices(4, 1)]) < 1e-3:
        return  # coincident lines merge
    est = invert_parameters(peakset(ts.nus), tol_nu=1e-4)
    assert est.delta_hat == pytest.approx(delta, abs=1e-6)
    assert est.g_hat_magnitude == pytest.approx(g, abs=1e-6)


def test_two_middle_peaks():
    est = invert_parameters(peakset([0.0984, 0.2575]))
    assert est.g_hat_magnitude == pytest.approx(np.pi * (0.2575 - 0.0984), abs=1e-12)
    assert est.g_hat_magnitude == pytest.approx(0.5, abs=1e-3)
    assert est.delta_hat == pytest.approx(1.0, abs=1e-3)
    assert set(est.assignment) == {"nu2", "nu3"}


def test_selection_rules():
    assert allowed_roles("0x") == ("nu2", "nu3")
    assert allowed_roles("spectrum_0z_D0.013") == ("nu1", "nu4")
    assert allowed_roles("xx") == ("nu1", "nu4")
    assert allowed_roles("0x+0z") is None
    assert allowed_roles("given") is None


def test_z_spectrum_alone():
    est = invert_parameters(peakset([0.1592, 0.3559], source="0z"))
    assert est.delta_hat == pytest.approx(1.0, abs=1e-3)
    assert est.g_hat_magnitude == pytest.approx(0.5, abs=1e-3)
    assert set(est.assignment) == {"nu1", "nu4"}


def test_control_cross_check():
    est = invert_parameters(peakset([0.0984, 0.2575], "0x"), peakset([0.1592, 0.3559], "0z"))
    assert set(est.assignment) == {"nu1", "nu2", "nu3", "nu4"}
    for name in ("x", "z"):
        assert est.control[name]["other_max_miss_nu"] < 1e-3
    assert abs(est.consistency["omega1 - (omega3 - omega2)"]) < 1e-3


def test_spurious_peak_left_unassigned():
    est = invert_parameters(peakset(list(EXACT) + [0.61]))
    assert est.g_hat_magnitude == pytest.approx(0.5, abs=2e-3)
    assert 0.61 not in est.assignment.values()


def test_closed_form_seed():
    om = {"nu1": 1.0, "nu4": 2 * np.sqrt(1.25)}
    assert closed_form_seed(om) == pytest.approx((1.0, 0.5))
    assert closed_form_seed({"nu2": np.sqrt(1.25) - 0.5, "nu3": np.sqrt(1.25) + 0.5}) == pytest.approx((1.0, 0.5))


def test_insufficient_and_infeasible():
    with pytest.raises(InsufficientDataError):
        invert_parameters(peakset([0.2]))
    with pytest.raises(InsufficientDataError):
        invert_parameters(peakset([]), peakset([]))
    # 2|g| above 2R has no real delta
    assert fit_assignment({"nu1": 2.0, "nu4": 1.0}) is None
    assert fit_assignment({"nu2": 0.0, "nu3": 1.0}) is None
    assert issubclass(InfeasibleError, ValueError)


# -- correlations -------------------------------------------------------------

def test_pearson_extremes():
    x = np.sin(np.linspace(0, 9, 400))
    assert pearson_r(x, x).r == 1.0
    assert pearson_r(x, -x).r == -1.0
    assert pearson_r(x, 3 * x + 2).r == pytest.approx(1.0, abs=1e-14)


def test_pearson_against_numpy():
    rng = np.random.default_rng(0)
    x = rng.normal(size=1000)
    y = 0.3 * x + rng.normal(size=1000)
    assert pearson_r(x, y).r == pytest.approx(np.corrcoef(x, y)[0, 1], abs=1e-13)


@settings(max_examples=60, deadline=None)
@given(st.integers(0, 2**32 - 1), st.floats(0.1, 10), st.floats(-5, 5))
def test_pearson_affine_invariance(seed, a, b):
    rng = np.random.default_rng(seed)
    x, y = rng.normal(size=(2, 200))
    y = y + 0.5 * x
    r = pearson_r(x, y).r
    assert pearson_r(a * x + b, y).r == pytest.approx(r, abs=1e-10)
    assert pearson_r(x, -a * y + b).r == pytest.approx(-r, abs=1e-10)
    assert abs(r) <= 1


def test_pearson_errors():
    with pytest.raises(CorrelationError):
        pearson_r(np.ones(10), np.arange(10.0))
    with pytest.raises(CorrelationError):
        pearson_r(np.arange(3.0), np.arange(4.0))
    with pytest.raises(CorrelationError):
        pearson_r([1.0], [2.0])


def test_effective_samples():
    rng = np.random.default_rng(1)
    x, y = rng.normal(size=(2, 20000))
    assert effective_samples(x, y) == pytest.approx(20000, rel=0.1)
    # AR(1) with phi=0.9: n (1 - phi^2) / (1 + phi^2)
    e = rng.normal(size=(2, 200000))
    ar = np.zeros_like(e)
    for k in range(1, e.shape[1]):
        ar[:, k] = 0.9 * ar[:, k - 1] + e[:, k]
    assert effective_samples(ar[0], ar[1]) == pytest.approx(200000 * 0.19 / 1.81, rel=0.1)


def test_zero_coupling_null_band():
    cfg = SimConfig(n_trajectories=8, t_max=1000.0)
    trs = run_ensemble(cfg, SystemParams.symmetric(1.0, 0.0, 0.1, 0.1), NoiseSpec(0.013, 5))
    res = ensemble_correlation(trs)
    assert res.n == len(trs[0])
    assert abs(res.r) < res.null_band


def test_small_sweep_sign_structure():
    cfg = SimConfig(n_trajectories=6, t_max=600.0)
    res = correlation_sweep([-0.7, 0.0, 0.7], SystemParams.symmetric(1.0, 0.0, 0.1, 0.1),
                            NoiseSpec(0.013, 21), cfg, workers=2)
    r = {x.g_value: x for x in res}
    assert np.sign(r[-0.7].r) == -np.sign(r[0.7].r)
    assert abs(r[0.7].r) > 0.3
    assert abs(r[0.7].r + r[-0.7].r) < 2 * np.hypot(r[0.7].stderr, r[-0.7].stderr) + 1e-12
    assert abs(r[0.0].r) < r[0.0].null_band
