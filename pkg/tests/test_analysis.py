import json
import math

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from polcascade.analysis import (CoincidenceData, WindowSpec, accumulate, analyze, calibrate_zero_delay,
                                 convergence_track, deconvolve_detector, deconvolved_g2,
                                 detector_response_from_pulse, extract_g2_zero, fourier_noise_filter,
                                 report_json, synthetic_coincidences)
from polcascade.errors import DegenerateInputError, InvalidArgumentError, SymmetryError

SIGMA = 57.64


def test_data_validation():
    with pytest.raises(InvalidArgumentError):
        CoincidenceData([0, 1], [1, 2])
    with pytest.raises(InvalidArgumentError):
        CoincidenceData([0, 1, 2], [1, 2])
    with pytest.raises(InvalidArgumentError):
        CoincidenceData([0, 1, 3], [1, 2, 3]).spacing


def test_load_save_roundtrip(tmp_path):
    d = synthetic_coincidences(1.5, rng=np.random.default_rng(0), tau_max=100.0)
    d.save(tmp_path / "h.csv")
    back = CoincidenceData.load(tmp_path / "h.csv", run="a")
    np.testing.assert_array_equal(back.tau, d.tau)
    np.testing.assert_array_equal(back.counts, d.counts)
    assert back.metadata["run"] == "a"
    (tmp_path / "t.tsv").write_text("# comment\n0\t1\n1\t2\n2\t3\n")
    assert CoincidenceData.load(tmp_path / "t.tsv").counts.tolist() == [1, 2, 3]
    (tmp_path / "bad.csv").write_text("0,1\nx,y\n")
    with pytest.raises(InvalidArgumentError):
        CoincidenceData.load(tmp_path / "bad.csv")


def test_calibration_recovers_peak():
    rng = np.random.default_rng(1)
    d = synthetic_coincidences(2.0, t0=13.0, Y0=400.0, rng=rng)
    cal = calibrate_zero_delay(d)
    assert abs(cal.t0 - 13.0) < 4 * cal.t0_err
    assert abs(cal.sigma - SIGMA) < 4 * cal.sigma_err
    assert cal.fwhm == pytest.approx(cal.sigma * 2 * math.sqrt(2 * math.log(2)))
    with pytest.raises(DegenerateInputError):
        calibrate_zero_delay(synthetic_coincidences(1.0, Y0=400.0))


def test_window_cutoff_frozen():
    w = WindowSpec.for_peak(SIGMA)
    assert w.cutoff == pytest.approx(8.138, abs=5e-3)
    assert w(0.0) == pytest.approx(1.0)
    assert w(w.cutoff) == pytest.approx(0.5, abs=1e-12)
    with pytest.raises(InvalidArgumentError):
        WindowSpec(0.0)
    with pytest.raises(InvalidArgumentError):
        WindowSpec.for_peak(SIGMA, kept=1.0)


@settings(max_examples=30, deadline=None)
@given(st.floats(20, 200), st.floats(0.5, 3))
def test_window_even_and_bounded(sigma, edge):
    w = WindowSpec.for_peak(sigma, edge)
    nu = np.linspace(-50, 50, 201)
    np.testing.assert_allclose(w(nu), w(-nu), atol=1e-15)
    assert np.all((w(nu) >= 0) & (w(nu) <= 1))


def test_filter_keeps_clean_peak():
    d = synthetic_coincidences(2.0)
    f = fourier_noise_filter(d, WindowSpec.for_peak(SIGMA))
    k = np.argmin(np.abs(d.tau))
    assert abs(f.counts[k] - d.counts[k]) / (d.counts[k] - 20.0) < 0.01
    # the background level is untouched
    assert f.counts[:20].mean() == pytest.approx(20.0, rel=1e-6)


def test_filter_suppresses_instrument_ripple():
    clean = synthetic_coincidences(1.0, noise_amplitude=0.0)
    noisy = synthetic_coincidences(1.0, noise_amplitude=0.2, noise_period=10.0)
    w = WindowSpec.for_peak(SIGMA)
    resid = fourier_noise_filter(noisy, w).counts - fourier_noise_filter(clean, w).counts
    before = noisy.counts - clean.counts
    db = 20 * math.log10(np.abs(before).max() / np.abs(resid).max())
    assert db > 40


def test_filter_symmetry_error():
    d = synthetic_coincidences(1.5, tau_max=200.0)

    class Odd(WindowSpec):
        def __call__(self, nu):
            return np.where(np.asarray(nu) > 0, 1.0, 0.2)

    with pytest.raises(SymmetryError):
        fourier_noise_filter(d, Odd(5.0))


def test_extract_noiseless_exact():
    d = synthetic_coincidences(1.7)
    rep = extract_g2_zero(d, 0.0, sigma_init=50.0)
    assert rep.g2_zero == pytest.approx(1.7, rel=1e-8)
    assert rep.sigma == pytest.approx(SIGMA, rel=1e-8)
    with pytest.raises(InvalidArgumentError):
        extract_g2_zero(synthetic_coincidences(1.7, tau_max=150.0), 0.0, sigma_init=SIGMA)


def test_extract_error_matches_scatter():
    cal_data = synthetic_coincidences(2.0, Y0=2000.0, rng=np.random.default_rng(0))
    cal = calibrate_zero_delay(cal_data)
    w = WindowSpec.for_peak(cal.sigma)
    rng = np.random.default_rng(2)
    g, e = [], []
    for _ in range(60):
        rep = analyze(synthetic_coincidences(1.5, rng=rng), cal, w)[0]
        g.append(rep.g2_zero)
        e.append(rep.err)
    g = np.array(g)
    assert abs(g.mean() - 1.5) < 4 * g.std(ddof=1) / math.sqrt(len(g)) + 0.01
    assert np.mean(e) == pytest.approx(g.std(ddof=1), rel=0.35)


def test_fixed_width_on_flat_histogram():
    cal = calibrate_zero_delay(synthetic_coincidences(2.0, Y0=2000.0))
    flat = synthetic_coincidences(1.0, rng=np.random.default_rng(3))
    rep = analyze(flat, cal, fix_width=True)[0]
    assert rep.sigma == pytest.approx(cal.sigma)
    assert abs(rep.g2_zero - 1.0) < 4 * rep.err
    d = json.loads(report_json(rep, cal))
    assert d["convergence_flag"] is None and d["g2_zero"] == rep.g2_zero


def test_detector_arithmetic():
    det = detector_response_from_pulse(57.0, 3.0)
    assert det == pytest.approx(math.sqrt(57.0**2 - 9.0))
    assert deconvolve_detector(5.0, 3.0) == pytest.approx(4.0)
    assert deconvolved_g2(2.0, 5.0, 3.0) == pytest.approx(2.25)
    for f, args in ((deconvolve_detector, (3.0, 3.0)), (deconvolve_detector, (3.0, -1.0)),
                    (detector_response_from_pulse, (2.0, 3.0))):
        with pytest.raises(InvalidArgumentError):
            f(*args)


@settings(max_examples=50)
@given(st.floats(1, 3), st.floats(10, 200), st.floats(0, 0.99))
def test_deconvolution_preserves_area(g2, sigma, frac):
    sd = frac * sigma
    out = deconvolved_g2(g2, sigma, sd)
    assert (out - 1) * deconvolve_detector(sigma, sd) == pytest.approx((g2 - 1) * sigma, rel=1e-10)
    assert out >= g2 - 1e-12


def test_convergence_flags():
    rng = np.random.default_rng(4)
    good = convergence_track(accumulate(rng, 1.6, 12, Y0_final=60.0))
    assert good.converged and good.background_ok
    assert len(good.g2) == 12
    drifting = convergence_track(accumulate(rng, 1.2, 12, Y0_final=400.0, drift_g2=1.5))
    assert not drifting.converged
    sparse = convergence_track(accumulate(rng, 2.0, 6, Y0_final=8.0))
    assert not sparse.background_ok
    assert set(good.as_dict()) >= {"g2", "err", "converged", "background_ok"}
    with pytest.raises(InvalidArgumentError):
        convergence_track(accumulate(rng, 1.6, 3))
