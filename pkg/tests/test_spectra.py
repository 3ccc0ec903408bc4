import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from gradkit.spectra import (CountData, FlopParams, ScanPoint, SpectrumModelParams,
                             binomial_sigma, fit_decay, fit_flop, fit_spectrum, model_decay,
                             model_flop, model_spectrum, read_counts_csv, read_scan_csv,
                             seed_peaks, simulate_flop, simulate_scan, write_counts_csv)

from conftest import DATA

TRUTH = SpectrumModelParams((-155.0, 155.0), (0.9, 0.9), 9.0, 50.0)
GRID = np.arange(-350.0, 350.0 + 1e-9, 2.0)


def test_model_peaks_and_sorting():
    p = SpectrumModelParams((155.0, -155.0), (0.5, 0.9), 9.0, 50.0)
    assert p.centers == (-155.0, 155.0) and p.amplitudes == (0.9, 0.5)
    # a 50 us pulse at 9 kHz Rabi is a 0.9 pi pulse on resonance; the other
    # peak adds its off-resonant tail at 310 kHz detuning
    w = np.hypot(9.0, 310.0)
    tail = 0.5 * (9.0 / w) ** 2 * np.sin(np.pi * w * 0.05) ** 2
    assert model_spectrum(p, -155.0) == pytest.approx(0.9 * np.sin(0.45 * np.pi) ** 2 + tail,
                                                      rel=1e-12)
    with pytest.raises(ValueError):
        SpectrumModelParams((0.0,), (0.5, 0.5), 9.0)
    with pytest.raises(ValueError):
        ScanPoint(0.0, 101, 100)


@settings(max_examples=30, deadline=None)
@given(st.lists(st.floats(-300, 300), min_size=1, max_size=4), st.floats(1, 40))
def test_model_is_probability(centers, rabi):
    p = SpectrumModelParams(tuple(centers), tuple([1.0] * len(centers)), rabi)
    y = model_spectrum(p, GRID)
    assert np.all((0 <= y) & (y <= 1))


def test_simulation_deterministic_and_pointwise():
    a = simulate_scan(TRUTH, GRID, 100, seed=7)
    b = simulate_scan(TRUTH, GRID, 100, seed=7)
    assert a == b
    # point i depends only on (seed, i): a prefix grid reproduces the prefix
    c = simulate_scan(TRUTH, GRID[:40], 100, seed=7)
    assert c == a[:40]
    assert simulate_scan(TRUTH, GRID, 100, seed=8) != a


def test_noiseless_spectrum_fit_is_exact():
    y = model_spectrum(TRUTH, GRID)
    data = CountData(GRID, y * 1e6, np.full(len(GRID), 1e6))
    fit = fit_spectrum(data, 2)
    assert fit.derived["mean_splitting"] == pytest.approx(310.0, abs=1e-4)
    assert fit.value("rabi") == pytest.approx(9.0, abs=1e-4)


def test_noisy_spectrum_fit_on_fixture():
    fit = fit_spectrum(read_scan_csv(DATA / "synthetic_scan.csv"), 2)
    assert abs(fit.derived["mean_splitting"] - 310.0) <= 4.0
    assert 0.5 < fit.chi2_per_dof < 2.0
    assert not fit.degenerate


def test_fit_is_invariant_to_point_order():
    pts = simulate_scan(TRUTH, GRID, 100, seed=3)
    a = fit_spectrum(pts, 2)
    b = fit_spectrum(pts[::-1], 2)
    assert np.allclose(a.values, b.values, rtol=1e-9)


def test_seed_peaks_tie_goes_to_lower_frequency():
    f = np.arange(20.0)
    y = np.zeros(20)
    y[4] = y[15] = 1.0
    assert seed_peaks(f, y, 1, window=1) == [4]
    with pytest.raises(ValueError):
        seed_peaks(f, y, 3, window=1)


def test_too_few_points():
    with pytest.raises(ValueError):
        fit_spectrum(simulate_scan(TRUTH, GRID[:10], 100, 0), 2)


def test_binomial_sigma_floor():
    assert binomial_sigma(0.0, 100) == pytest.approx(1 / 102)
    assert binomial_sigma(0.5, 100) == pytest.approx(0.05)


def test_flop_fit_recovers_truth():
    truth = FlopParams(35.0, 170.0, 0.97)
    t = np.arange(0.0, 300.0 + 1e-9, 2.0)
    fit = fit_flop(simulate_flop(truth, t, 100, seed=5))
    for name, v in [("rabi", 35.0), ("envelope_hwhm", 170.0), ("contrast", 0.97)]:
        assert abs(fit.value(name) - v) <= 3 * fit.sigma(name)
    assert fit.derived["pi_time_us"] == pytest.approx(1e3 / (2 * fit.value("rabi")))


def test_flop_fit_needs_periods():
    t = np.linspace(0, 40, 30)
    with pytest.raises(ValueError):
        fit_flop(simulate_flop(FlopParams(35.0, 170.0, 0.97), t, 100, 0))


def test_flop_model_limits():
    f = FlopParams(35.0, 170.0, 0.97)
    assert model_flop(f, 0.0) == 0.0
    assert model_flop(f, 170.0) <= 0.97 * 0.5 + 1e-12


@pytest.mark.parametrize("kind, tau", [("gaussian", 632.0), ("exponential", 10_000.0)])
def test_decay_fit_exact(kind, tau):
    t = np.linspace(0, 3 * tau, 25)
    fit = fit_decay(t, model_decay(t, 0.98, tau, kind), kind)
    assert fit.value("tau") == pytest.approx(tau, rel=1e-8)
    assert fit.value("c0") == pytest.approx(0.98, rel=1e-8)


def test_decay_fit_errors():
    with pytest.raises(ValueError):
        fit_decay([1, 2, 3, 4, 5], [0.5] * 5, "lorentzian")
    with pytest.raises(ValueError):
        fit_decay([1, 2, 3, 4, 5], [1.5] * 5)


def test_csv_roundtrip(tmp_path):
    pts = simulate_scan(TRUTH, GRID, 100, seed=1)
    path = tmp_path / "scan.csv"
    write_counts_csv(path, GRID, [p.successes for p in pts], [p.trials for p in pts],
                     "freq_offset_khz")
    assert read_scan_csv(path) == pts


def test_csv_errors_line_numbered(tmp_path):
    path = tmp_path / "bad.csv"
    path.write_text("time_us,successes,trials\n0,1,100\n2,x,100\n")
    with pytest.raises(ValueError, match=":3:"):
        read_counts_csv(path, "time_us")
    path.write_text("time_us,successes,trials\n0,120,100\n")
    with pytest.raises(ValueError, match=":2:"):
        read_counts_csv(path, "time_us")


def test_model_far_tail_and_peak_locations():
    assert model_spectrum(TRUTH, 155.0 + 100 * 9.0 + 1.0) < 1e-3
    f = np.arange(-350.0, 350.0, 0.05)
    y = model_spectrum(TRUTH, f)
    left = f[f < 0][np.argmax(y[f < 0])]
    right = f[f > 0][np.argmax(y[f > 0])]
    assert abs(left + 155.0) <= 1.0 and abs(right - 155.0) <= 1.0


@settings(max_examples=20, deadline=None)
@given(st.permutations([(-155.0, 0.9), (20.0, 0.4), (155.0, 0.7)]))
def test_model_permutation_invariant(peaks):
    p = SpectrumModelParams(tuple(c for c, _ in peaks), tuple(a for _, a in peaks), 9.0)
    assert np.array_equal(model_spectrum(p, GRID), model_spectrum(
        SpectrumModelParams((-155.0, 20.0, 155.0), (0.9, 0.4, 0.7), 9.0), GRID))


def test_zero_amplitude_gives_no_successes():
    p = SpectrumModelParams((0.0,), (0.0,), 9.0)
    assert all(q.successes == 0 for q in simulate_scan(p, GRID, 100, 1))


def test_large_trial_counts_follow_model():
    n = 100_000
    f = np.array([-160.0, -155.0, -100.0, 0.0, 150.0])
    pts = simulate_scan(TRUTH, f, n, seed=12)
    p = model_spectrum(TRUTH, f)
    frac = np.array([q.fraction for q in pts])
    assert np.all(np.abs(frac - p) <= 5 * np.sqrt(p * (1 - p) / n) + 1e-12)


def test_three_peak_mean_splitting():
    truth = SpectrumModelParams((-266.0, 0.0, 266.0), (0.9, 0.9, 0.9), 9.0)
    grid = np.arange(-450.0, 450.0 + 1e-9, 2.0)
    fit = fit_spectrum(simulate_scan(truth, grid, 100, seed=4), 3)
    assert abs(fit.derived["mean_splitting"] - 266.0) <= 3 * fit.derived["mean_splitting_sigma"]
    assert list(fit.params.centers) == sorted(fit.params.centers)
    assert np.allclose(fit.covariance, fit.covariance.T)
    assert np.all(np.diag(fit.covariance) >= 0)


def test_flop_formula_point_and_noiseless_fit():
    truth = FlopParams(35.0, 170.0, 0.97)
    by_hand = 0.97 * np.exp(-np.log(2) * (14.3 / 170) ** 2) * np.sin(np.pi * 35 * 14.3e-3) ** 2
    assert model_flop(truth, 14.3) == pytest.approx(by_hand, rel=1e-12)
    assert model_flop(truth, 14.3) == pytest.approx(0.96, abs=0.01)
    t = np.arange(0.0, 300.0 + 1e-9, 2.0)
    data = CountData(t, model_flop(truth, t) * 1e8, np.full(len(t), 1e8))
    fit = fit_flop(data)
    assert np.allclose(fit.values[:3], [35.0, 170.0, 0.97], rtol=1e-6)


@pytest.mark.parametrize("points_per_period", [4, 5, 8, 16])
def test_rabi_initial_guess_not_aliased(points_per_period):
    from gradkit.spectra import dominant_frequency

    rabi = 35.0
    dt = 1e3 / rabi / points_per_period
    t = np.arange(0.0, 300.0, dt)
    y = model_flop(FlopParams(rabi, 170.0, 0.97), t)
    assert dominant_frequency(t, y) == pytest.approx(rabi, rel=0.05)


def test_noisy_gaussian_decay_within_3_sigma():
    rng = np.random.default_rng(424)
    t = np.linspace(0.0, 1200.0, 30)
    c = np.clip(model_decay(t, 0.95, 424.0) + rng.normal(0, 0.02, len(t)), 0, 1)
    fit = fit_decay(t, c, "gaussian")
    assert abs(fit.value("tau") - 424.0) <= 3 * fit.sigma("tau")
