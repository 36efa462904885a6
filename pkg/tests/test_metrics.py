import math

import numpy as np
import pytest

from sage_bsm.acoustics.metrics import (
    band_summary,
    compare,
    nmse,
    octave_bands,
    verdict,
    write_comparison_csv,
    write_report_csv,
)
from sage_bsm.exceptions import (
    DimensionMismatchError,
    EmptyBandError,
    EvaluationError,
    SceneMismatchError,
)
from sage_bsm.helpers import BinauralSpectrogram, NmseReport, Provenance

FREQUENCIES = np.arange(33) * 250.0


def _report(error, reference=None, flags=None, frame_range=(2, 8), digest="scene"):
    error = np.asarray(error, dtype=float)
    error = np.broadcast_to(error, (2, FREQUENCIES.size)).copy()
    if reference is None:
        reference = np.ones_like(error)
    if flags is None:
        flags = np.zeros(error.shape, dtype=bool)
    linear = np.where(flags, np.nan, error / reference)
    return NmseReport(
        FREQUENCIES,
        linear,
        reference,
        error,
        flags,
        frame_range,
        "estimate",
        "reference",
        digest,
    )


def _spectrogram(data, config, provenance=Provenance.REFERENCE):
    return BinauralSpectrogram.from_array(data, config, provenance, 400)


@pytest.fixture
def reference(rng, stft_config):
    shape = (2, 10, stft_config.bins)
    data = rng.standard_normal(shape) + 1j * rng.standard_normal(shape)
    return _spectrogram(data, stft_config)


def test_exact_estimate_has_no_error(reference):
    report = nmse(reference, reference)
    np.testing.assert_array_equal(report.linear, 0.0)
    assert np.all(np.isneginf(report.db))


def test_silent_estimate_scores_zero_db(reference, stft_config):
    silent = _spectrogram(
        np.zeros_like(reference.data), stft_config, Provenance.BSM_STANDARD
    )
    report = nmse(silent, reference)
    np.testing.assert_allclose(report.db, 0.0, atol=1e-12)
    assert report.estimate_tag == "bsm-standard"
    assert report.reference_tag == "reference"


def test_scaled_estimate(reference, stft_config):
    report = nmse(_spectrogram(1.1 * reference.data, stft_config), reference)
    np.testing.assert_allclose(report.linear, 0.01, rtol=1e-9)
    np.testing.assert_allclose(report.db, -20.0, atol=1e-9)


@pytest.mark.parametrize("factor", [3.0, -0.25j, 2.0 * np.exp(1j * 0.7)])
def test_common_scale_leaves_nmse_unchanged(rng, reference, stft_config, factor):
    estimate = _spectrogram(
        reference.data + 0.3 * rng.standard_normal(reference.data.shape), stft_config
    )
    report = nmse(estimate, reference)
    scaled = nmse(estimate.scaled(factor), reference.scaled(factor))
    np.testing.assert_allclose(scaled.linear, report.linear, rtol=1e-12)


def test_shared_frame_permutation_leaves_nmse_unchanged(rng, reference, stft_config):
    estimate = _spectrogram(
        reference.data + 0.3 * rng.standard_normal(reference.data.shape), stft_config
    )
    order = rng.permutation(reference.shape[0])
    shuffled = nmse(
        _spectrogram(estimate.data[:, order], stft_config),
        _spectrogram(reference.data[:, order], stft_config),
        trim=0,
    )
    report = nmse(estimate, reference, trim=0)
    np.testing.assert_allclose(shuffled.linear, report.linear, rtol=1e-12)


def test_nmse_matches_a_per_bin_loop(rng, reference, stft_config):
    estimate = _spectrogram(
        reference.data + 0.3 * rng.standard_normal(reference.data.shape), stft_config
    )
    report = nmse(estimate, reference)
    start, stop = report.frame_range
    for ear in range(2):
        for index in range(reference.shape[1]):
            error = 0.0
            energy = 0.0
            for frame in range(start, stop):
                value = reference.data[ear, frame, index]
                error += abs(estimate.data[ear, frame, index] - value) ** 2
                energy += abs(value) ** 2
            assert report.linear[ear, index] == pytest.approx(error / energy, rel=1e-12)


def test_default_frames_skip_the_edges(reference):
    assert nmse(reference, reference).frame_range == (2, 8)
    assert nmse(reference, reference, trim=0).frame_range == (0, 10)
    assert nmse(reference, reference, frame_range=(1, 4)).frame_range == (1, 4)
    with pytest.raises(EvaluationError):
        nmse(reference, reference, frame_range=(5, 5))
    with pytest.raises(EvaluationError):
        nmse(reference, reference, frame_range=(0, 11))


def test_low_energy_bins_are_flagged(rng, reference, stft_config):
    data = reference.data.copy()
    data[:, :, 3] = 0.0
    data[:, :, 4] *= 1e-7
    quiet = _spectrogram(data, stft_config)
    report = nmse(_spectrogram(rng.standard_normal(data.shape), stft_config), quiet)
    assert report.flags[:, 3].all() and report.flags[:, 4].all()
    assert not report.flags[:, 5].any()
    assert np.isnan(report.linear[:, 3]).all()
    assert np.all(np.isfinite(report.broadband()))


def test_silent_reference(reference, stft_config):
    silent = _spectrogram(np.zeros_like(reference.data), stft_config)
    with pytest.raises(EvaluationError):
        nmse(reference, silent)


def test_shapes_must_agree(reference, stft_config):
    shorter = _spectrogram(reference.data[:, :6], stft_config)
    with pytest.raises(DimensionMismatchError):
        nmse(shorter, reference)


def test_octave_bands_are_clipped_to_nyquist():
    bands = octave_bands(8000.0)
    assert len(bands) == 7
    assert bands[0] == pytest.approx((125.0 / math.sqrt(2.0), 125.0 * math.sqrt(2.0)))
    assert bands[-1][1] == 8000.0
    assert len(octave_bands(24000.0)) == 8


def test_band_summary_weights_by_reference_energy():
    error = np.zeros((2, FREQUENCIES.size))
    reference = np.ones_like(error)
    error[:, 0], reference[:, 0] = 1.0, 2.0
    error[:, 1], reference[:, 1] = 0.1, 8.0
    values = band_summary(_report(error, reference), [(0.0, 500.0), (250.0, 8000.0)])
    assert values.shape == (2, 2)
    assert values[0, 0] == pytest.approx(10.0 * math.log10(1.1 / 10.0))
    assert values[1, 1] == pytest.approx(10.0 * math.log10(0.1 / 39.0))


def test_band_summary_errors():
    report = _report(0.1)
    with pytest.raises(EvaluationError):
        band_summary(report, [(4000.0, 9000.0)])
    with pytest.raises(EmptyBandError):
        band_summary(report, [(1100.0, 1200.0)])


def test_halving_the_error_gains_three_db():
    comparison = compare(_report(0.05), _report(0.1))
    np.testing.assert_allclose(comparison.improvement_db, 10.0 * math.log10(2.0))
    np.testing.assert_allclose(
        comparison.broadband_improvement_db, 10.0 * math.log10(2.0)
    )
    np.testing.assert_array_equal(comparison.fraction_improved, 1.0)
    assert comparison.band_improvements_db
    for gain in comparison.band_improvements_db.values():
        np.testing.assert_allclose(gain, 10.0 * math.log10(2.0))


def test_flagged_bins_are_excluded_from_comparisons():
    flags = np.zeros((2, FREQUENCIES.size), dtype=bool)
    flags[0, 5] = True
    comparison = compare(_report(0.05, flags=flags), _report(0.1))
    assert np.isnan(comparison.improvement_db[0, 5])
    assert not np.isnan(comparison.improvement_db[1, 5])


def test_reports_must_share_a_scene():
    with pytest.raises(SceneMismatchError):
        compare(_report(0.1, digest="one"), _report(0.1, digest="two"))
    with pytest.raises(SceneMismatchError):
        compare(_report(0.1, frame_range=(0, 10)), _report(0.1))


def _reverberant(near_scale=1.0):
    error = np.where(
        FREQUENCIES < 1000.0, 0.01, np.where(FREQUENCIES >= 4000.0, 0.5, 0.1)
    )
    return _report(np.stack([error * near_scale, error]))


def test_verdict_passes_a_good_run():
    good = compare(_report(0.05), _report(0.2))
    result = verdict(_report(1e-3), _reverberant(0.5), good)
    assert result == {
        "direct_below_limit": True,
        "reverberant_rises_with_frequency": True,
        "near_ear_better": True,
        "decomposed_beats_standard": True,
        "near_ear_band_improvement": True,
        "pass": True,
    }


def test_verdict_failures():
    good = compare(_report(0.05), _report(0.2))
    assert not verdict(_report(0.1), _reverberant(0.5), good)["direct_below_limit"]
    assert not verdict(_report(1e-3), _reverberant(0.5), good, near_ear="right")["pass"]
    regressed = compare(_report(0.2), _report(0.05))
    worse = verdict(_report(1e-3), _reverberant(0.5), regressed)
    assert not worse["decomposed_beats_standard"]
    assert not worse["near_ear_band_improvement"]
    assert not worse["pass"]
    flat = verdict(_report(1e-3), _report(0.1), good)
    assert not flat["reverberant_rises_with_frequency"]


def test_report_csv(tmp_path):
    flags = np.zeros((2, FREQUENCIES.size), dtype=bool)
    flags[1, 2] = True
    path = tmp_path / "nmse.csv"
    write_report_csv(_report(0.01, flags=flags), path)
    lines = path.read_text().splitlines()
    assert lines[0] == "ear,freq_hz,nmse_linear,nmse_db,flag"
    assert len(lines) == 1 + 2 * FREQUENCIES.size
    assert lines[2] == "left,250,0.01,-20,ok"
    assert lines[1 + FREQUENCIES.size + 2] == "right,500,nan,nan,insufficient_energy"


def test_gnuplot_layout(tmp_path):
    path = tmp_path / "nmse.dat"
    write_report_csv(_report(0.01), path, gnuplot=True)
    lines = path.read_text().splitlines()
    assert lines[0] == "# ear freq_hz nmse_linear nmse_db flag"
    assert lines[1] == "left 0 0.01 -20 ok"


def test_comparison_csv(tmp_path):
    path = tmp_path / "comparison.csv"
    write_comparison_csv(compare(_report(0.01), _report(0.1)), path)
    lines = path.read_text().splitlines()
    assert lines[0] == "ear,freq_hz,improvement_db"
    assert lines[1] == "left,0,10"
    assert len(lines) == 1 + 2 * FREQUENCIES.size
