"""Schmidt number, lower bound and record conditioning."""
import itertools
import math
from dataclasses import replace

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st
from hypothesis.extra.numpy import arrays

from biphoton import (
    AmplitudeMatrix, CoverageError, DomainError, JointAmplitude, SpectralGrid,
    TransmittanceError, ValidationError, assemble_jsa, bin_matrix, crop_frame, k_min, k_trace,
    measurement_to_amplitude, schmidt_decompose, simulate_dfg, total_intensity,
)
from biphoton.instruments import InstrumentConfig, MeasurementRecord
from biphoton.schmidt import (
    CoverageWarning, analyze_record, bin_record, condition_record, coverage_estimate,
    crop_record, parse_pipeline,
)


def _random_complex(rng, m, n):
    return rng.normal(size=(m, n)) + 1j * rng.normal(size=(m, n))


def _quadruple_sum_k(g):
    m, n = g.shape
    norm = np.sum(np.abs(g) ** 2)
    acc = 0.0 + 0.0j
    for a, b, c, d in itertools.product(range(m), range(n), range(m), range(n)):
        acc += g[a, b] * np.conj(g[c, b]) * g[c, d] * np.conj(g[a, d])
    return norm ** 2 / acc.real


# --- Schmidt number -------------------------------------------------------

def test_rank_one_has_k_one():
    rng = np.random.default_rng(0)
    g = np.outer(_random_complex(rng, 7, 1), _random_complex(rng, 1, 9))
    res = schmidt_decompose(g)
    assert res.K == pytest.approx(1.0, abs=1e-12)
    assert res.mode_count == 1
    assert k_trace(g) == pytest.approx(1.0, abs=1e-12)


@pytest.mark.parametrize("d", [1, 2, 5, 12])
def test_diagonal_has_k_equal_rank(d):
    assert schmidt_decompose(np.eye(d)).K == pytest.approx(d)
    assert k_trace(np.eye(d) * 3.7) == pytest.approx(d)


def test_coefficients_are_normalized():
    g = _random_complex(np.random.default_rng(1), 10, 6)
    res = schmidt_decompose(g)
    assert np.sum(res.coefficients ** 2) == pytest.approx(1.0)
    assert np.all(np.diff(res.coefficients) <= 0)


def test_trace_matches_svd_on_random_matrices():
    rng = np.random.default_rng(2)
    for _ in range(100):
        m, n = rng.integers(1, 17, size=2)
        g = _random_complex(rng, m, n)
        assert abs(k_trace(g) - schmidt_decompose(g).K) <= 1e-10


def test_trace_matches_quadruple_sum():
    rng = np.random.default_rng(3)
    for _ in range(30):
        m, n = rng.integers(1, 7, size=2)
        g = _random_complex(rng, m, n)
        assert abs(k_trace(g) - _quadruple_sum_k(g)) <= 1e-12


@settings(max_examples=60, deadline=None)
@given(arrays(np.float64, st.tuples(st.integers(1, 8), st.integers(1, 8)),
              elements=st.floats(-10, 10, allow_subnormal=False)),
       st.floats(0.01, 100.0), st.floats(0, 2 * math.pi))
def test_lower_bound_and_scale_invariance(re, scale, phase):
    g = re + 1j * np.roll(re, 1, axis=0)
    if np.sum(np.abs(g) ** 2) < 1e-6:
        return
    K = schmidt_decompose(g).K
    assert k_min(g) <= K + 1e-9
    assert k_trace(g * scale * np.exp(1j * phase)) == pytest.approx(k_trace(g), rel=1e-9)
    assert 1.0 - 1e-12 <= K <= min(g.shape) + 1e-9


def test_lower_bound_strict_for_phase_pattern():
    # a Fourier matrix is maximally entangled but its modulus is rank one
    n = 8
    f = np.exp(2j * np.pi * np.outer(np.arange(n), np.arange(n)) / n)
    assert schmidt_decompose(f).K == pytest.approx(n)
    assert k_min(f) == pytest.approx(1.0)


def test_zero_and_nonfinite_matrices():
    with pytest.raises(CoverageError):
        k_trace(np.zeros((3, 3)))
    with pytest.raises(CoverageError):
        schmidt_decompose(np.zeros((3, 3)))
    from biphoton import NumericalError
    with pytest.raises(NumericalError):
        k_trace(np.array([[1.0, np.inf]]))
    with pytest.raises(ValidationError):
        k_trace(np.ones(4))


def test_amplitude_matrix_checks(grid):
    with pytest.raises(DomainError):
        AmplitudeMatrix(-np.ones(grid.shape), grid)
    with pytest.raises(CoverageError):
        AmplitudeMatrix(np.zeros(grid.shape), grid)
    with pytest.raises(ValidationError):
        AmplitudeMatrix(np.ones((3, 3)), grid)


# --- measurement to amplitude ---------------------------------------------

def _tiny_grid(m=3, n=4):
    return SpectralGrid(1511.4, 0.01, m, 1523.8, 0.01, n)


def test_measurement_arithmetic():
    g = _tiny_grid(2, 2)
    rec = MeasurementRecord(g, np.full((2, 2), 2.0), np.array([0.25, 0.25]))
    f = measurement_to_amplitude(rec).values
    np.testing.assert_allclose(f, math.sqrt(8.0))


def test_measurement_reverses_both_axes():
    g = _tiny_grid()
    R = np.arange(12.0).reshape(3, 4) + 1
    T = np.array([0.5, 1.0, 2.0])
    f = measurement_to_amplitude(MeasurementRecord(g, R, T)).values
    for i, j in itertools.product(range(3), range(4)):
        assert f[i, j] == pytest.approx(math.sqrt(R[2 - i, 3 - j] / T[2 - i]))
    np.testing.assert_allclose(
        measurement_to_amplitude(MeasurementRecord(g, R, T)).wavelength_ordered(),
        np.sqrt(R / T[:, None]))


def test_measurement_clamps_negative_intensity():
    g = _tiny_grid(2, 2)
    rec = MeasurementRecord(g, np.array([[-1.0, 4.0], [1.0, 0.0]]), np.ones(2))
    f = measurement_to_amplitude(rec).values
    assert f.min() == 0.0 and f.max() == 2.0


def test_zero_transmittance_names_the_step():
    g = _tiny_grid()
    rec = MeasurementRecord(g, np.ones((3, 4)), np.array([1.0, 0.0, 1.0]))
    with pytest.raises(TransmittanceError, match=r"\[1\]"):
        measurement_to_amplitude(rec)


def test_underflowing_filter_flags_steps(amp):
    cfg = InstrumentConfig(noise_floor=0.0, filter_fwhm=0.05)
    rec = simulate_dfg(amp, cfg)
    assert rec.flagged.any() and not rec.flagged.all()
    with pytest.raises(TransmittanceError):
        measurement_to_amplitude(rec)


def test_noiseless_round_trip(amp):
    cfg = InstrumentConfig(noise_floor=0.0, dfg_analyzer_resolution=0.0)
    rec = simulate_dfg(amp, cfg)
    assert rec.grid == amp.grid
    f = measurement_to_amplitude(rec).wavelength_ordered()
    mod = amp.modulus()
    nz = mod > 0
    ratio = f[nz] / mod[nz]
    assert np.max(np.abs(ratio / ratio.mean() - 1.0)) < 1e-9


# --- binning and cropping -------------------------------------------------

def test_bin_matrix_reference_shape():
    R = np.ones((141, 501))
    b = bin_matrix(R, 2, 7)
    assert b.shape == (70, 71)
    assert np.all(b == 14.0)


@settings(max_examples=40, deadline=None)
@given(arrays(np.float64, st.tuples(st.integers(1, 20), st.integers(1, 20)), elements=st.floats(0, 1e3)),
       st.integers(1, 5), st.integers(1, 5))
def test_bin_preserves_sum_of_kept_block(R, bx, by):
    if bx > R.shape[0] or by > R.shape[1]:
        with pytest.raises(DomainError):
            bin_matrix(R, bx, by)
        return
    m, n = R.shape[0] // bx * bx, R.shape[1] // by * by
    assert bin_matrix(R, bx, by).sum() == pytest.approx(R[:m, :n].sum(), rel=1e-12, abs=1e-9)


def test_bin_rejects_bad_sizes():
    with pytest.raises(DomainError):
        bin_matrix(np.ones((4, 4)), 0, 1)
    with pytest.raises(DomainError):
        bin_matrix(np.ones((4, 4)), 1.5, 1)


def test_crop_frame_reference_window(grid):
    R = np.arange(grid.axis1_count * grid.axis2_count, dtype=float).reshape(grid.shape)
    cropped, cgrid = crop_frame(R, grid, 0.14)
    assert cropped.shape == (113, 401)
    assert cgrid.axis1_start == pytest.approx(1511.54)
    assert cgrid.end(1) == pytest.approx(1512.66)
    assert cgrid.axis2_start == pytest.approx(1523.94)
    assert cgrid.end(2) == pytest.approx(1525.06)
    assert cropped[0, 0] == R[14, 50]
    same, sgrid = crop_frame(R, grid, 0.0)
    assert same.shape == grid.shape and sgrid == grid
    with pytest.raises(DomainError):
        crop_frame(R, grid, 0.7)
    with pytest.raises(DomainError):
        crop_frame(R, grid, -0.1)


def _gaussian_amplitude(count=200, spread=1.5):
    grid = SpectralGrid(1511.4, 1.4 / (count - 1), count, 1523.8, 1.4 / (count - 1), count)
    x1 = grid.omegas(1) - grid.omegas(1).mean()
    x2 = grid.omegas(2) - grid.omegas(2).mean()
    # midpoint-rule half widths; the axes differ because the centers differ
    half = (0.5 * count * grid.omega_pitch(1), 0.5 * count * grid.omega_pitch(2))
    s = half[0] / spread
    values = np.exp(-(x1[:, None] ** 2 + x2[None, :] ** 2) / (2 * s * s)) / math.sqrt(math.pi * s * s)
    return JointAmplitude(grid, values), half, s


def test_total_intensity_gaussian_oracle():
    a, half, s = _gaussian_amplitude()
    oracle = math.erf(half[0] / s) * math.erf(half[1] / s)
    full = total_intensity(a)
    assert full == pytest.approx(oracle, rel=1e-5)
    jsd, grid, n = a.jsd(), a.grid, a.grid.axis1_count // 2
    assert jsd[n:, n:].sum() == pytest.approx(0.25 * jsd.sum(), rel=1e-12)
    # the quadrant's own linearization center moves by a quarter span, which
    # rescales its frequency pitch by about (span / wavelength)
    quadrant = total_intensity(jsd[n:, n:], grid.subgrid(slice(n, None), slice(n, None)))
    assert quadrant == pytest.approx(0.25 * oracle, rel=2e-3)


def test_total_intensity_needs_grid_and_real_density(grid):
    with pytest.raises(ValidationError):
        total_intensity(np.ones(grid.shape))
    with pytest.raises(ValidationError):
        total_intensity(np.ones(grid.shape, dtype=complex), grid)


def test_lower_bound_independent_of_pitch(smooth_model, grid):
    fine = SpectralGrid(grid.axis1_start, 0.005, 281, grid.axis2_start, 0.0014, 1001)
    coarse = k_min(assemble_jsa(smooth_model, grid))
    assert abs(k_min(assemble_jsa(smooth_model, fine)) - coarse) < 1e-3


@pytest.mark.parametrize("bx, by", [(2, 7), (3, 10), (1, 5)])
def test_lower_bound_stable_under_binning(smooth_model, grid, bx, by):
    assert bx * grid.axis1_pitch <= 0.030 + 1e-12 and by * grid.axis2_pitch <= 0.030 + 1e-12
    jsd = assemble_jsa(smooth_model, grid).jsd()
    assert abs(k_min(np.sqrt(bin_matrix(jsd, bx, by))) - k_min(np.sqrt(jsd))) < 1e-3


# --- record pipeline ------------------------------------------------------

def test_bin_record_sums_transmittance():
    g = _tiny_grid(4, 4)
    rec = MeasurementRecord(g, np.ones((4, 4)), np.array([0.5, 1.5, 1.0, 1.0]))
    b = bin_record(rec, 2, 2)
    np.testing.assert_allclose(b.transmittance, [2.0, 2.0])
    np.testing.assert_allclose(measurement_to_amplitude(b).values, math.sqrt(2.0))


def test_crop_record_trims_vectors(amp):
    rec = simulate_dfg(amp, InstrumentConfig(noise_floor=0.0))
    c = crop_record(rec, 0.14)
    assert c.intensity.shape == (113, 401)
    np.testing.assert_array_equal(c.transmittance, rec.transmittance[14:127])


def test_parse_pipeline():
    steps = parse_pipeline([{"crop": 0.14}, {"bin": [2, 7]}])
    assert [s.describe() for s in steps] == [
        {"step": "crop", "frame_nm": 0.14}, {"step": "bin", "bx": 2, "by": 7}]
    for bad in ([{"crop": -1}], [{"bin": [0, 1]}], [{"smooth": 1}], ["crop"]):
        with pytest.raises(ValidationError):
            parse_pipeline(bad)


def test_coverage_estimate_limits():
    assert coverage_estimate(np.ones((10, 10))) == pytest.approx(0.0)
    peak = np.zeros((11, 11))
    peak[5, 5] = 1.0
    assert coverage_estimate(peak) == pytest.approx(1.0)
    assert coverage_estimate(np.zeros((4, 4))) == 0.0


def test_analyze_noiseless_record(amp):
    rec = simulate_dfg(amp, InstrumentConfig(noise_floor=0.0))
    with pytest.warns(CoverageWarning):
        report = analyze_record(rec, [{"crop": 0.14}, {"bin": [2, 7]}])
    assert report.grid.shape == (56, 57)
    assert report.K_min == pytest.approx(k_min(np.sqrt(bin_matrix(crop_frame(
        rec.intensity / rec.transmittance[:, None], rec.grid, 0.14)[0], 2, 7))), rel=0.05)
    assert 1.0 <= report.K_min < 1.1
    assert report.to_dict()["pipeline"][1] == {"step": "bin", "bx": 2, "by": 7}


def test_analyze_noise_only_record_is_coverage_failure(amp):
    rec = simulate_dfg(amp, InstrumentConfig(seed_power=0.0))
    with pytest.raises(CoverageError):
        analyze_record(rec)
    empty = replace(rec, intensity=np.zeros(rec.grid.shape))
    with pytest.raises(CoverageError):
        analyze_record(empty)


def test_condition_record_order(amp):
    rec = simulate_dfg(amp, InstrumentConfig(noise_floor=0.0))
    assert condition_record(rec, [{"bin": [2, 7]}, {"crop": 0.14}]).grid.shape != \
        condition_record(rec, [{"crop": 0.14}, {"bin": [2, 7]}]).grid.shape
