import numpy as np
import pytest

from sage_bsm.acoustics.render import (
    apply_filterbank,
    decompose_measurement,
    decoding_weights,
    render_decomposed,
    render_reference,
    render_standard,
)
from sage_bsm.acoustics.sph import sh_degrees
from sage_bsm.acoustics.stft import stft
from sage_bsm.exceptions import DimensionMismatchError, ProvenanceError
from sage_bsm.helpers import (
    BinauralSpectrogram,
    BsmFilterBank,
    FilterProvenance,
    FrequencyGrid,
    HrtfSHCoefficients,
    Provenance,
    ShSignal,
    SolverConfig,
    SpectrogramOrigin,
)


def _bank(rng, grid, mics=4, provenance=FilterProvenance.WHOLE_FIELD):
    shape = (2, grid.bins, mics)
    coefficients = rng.standard_normal(shape) + 1j * rng.standard_normal(shape)
    return BsmFilterBank(coefficients, grid, provenance, SolverConfig())


def _binaural(rng, config, provenance, frames=5):
    data = rng.standard_normal((2, frames, config.bins)) + 1j * rng.standard_normal(
        (2, frames, config.bins)
    )
    return BinauralSpectrogram.from_array(data, config, provenance, 200)


@pytest.fixture
def measurement(rng, stft_config):
    return stft(rng.standard_normal((4, 300)), stft_config)


def test_filter_and_sum(rng, grid, measurement):
    bank = _bank(rng, grid)
    z = apply_filterbank(bank, measurement)
    for ear in range(2):
        expected = sum(
            np.conj(bank.coefficients[ear, :, mic]) * measurement.data[mic]
            for mic in range(4)
        )
        np.testing.assert_allclose(z.data[ear], expected, atol=1e-12)
    assert z.shape == (measurement.frames, measurement.bins)
    assert z.left.origin is SpectrogramOrigin.ESTIMATE


@pytest.mark.parametrize(
    "provenance, tag",
    [
        (FilterProvenance.DIRECT, Provenance.COMPONENT_DIRECT),
        (FilterProvenance.REVERBERANT, Provenance.COMPONENT_REVERB),
        (FilterProvenance.WHOLE_FIELD, Provenance.BSM_STANDARD),
    ],
)
def test_output_tag_follows_the_bank(rng, grid, measurement, provenance, tag):
    bank = _bank(rng, grid, provenance=provenance)
    assert apply_filterbank(bank, measurement).provenance is tag


def test_bank_and_measurement_must_agree(rng, grid, measurement):
    with pytest.raises(DimensionMismatchError):
        apply_filterbank(_bank(rng, grid, mics=3), measurement)
    with pytest.raises(DimensionMismatchError):
        apply_filterbank(_bank(rng, FrequencyGrid.from_fft(16000, 128)), measurement)


def test_unit_filters_pass_one_channel_through(rng, grid, stft_config):
    signal = rng.standard_normal(640)
    coefficients = np.ones((2, grid.bins, 1))
    bank = BsmFilterBank(
        coefficients, grid, FilterProvenance.WHOLE_FIELD, SolverConfig()
    )
    z = apply_filterbank(bank, stft(signal, stft_config))
    ears = z.to_signals()
    assert ears.shape == (2, 640)
    interior = slice(stft_config.window_length, 640 - stft_config.window_length)
    np.testing.assert_allclose(ears[0, interior], signal[interior], atol=1e-10)
    np.testing.assert_allclose(ears[1, interior], signal[interior], atol=1e-10)


def test_decomposition_of_the_measurement(rng, stft_config, measurement):
    direct = stft(
        rng.standard_normal((4, 300)), stft_config, SpectrogramOrigin.MEASURED_DIRECT
    )
    reverberant = decompose_measurement(measurement, direct)
    assert reverberant.origin is SpectrogramOrigin.MEASURED_REVERB
    np.testing.assert_allclose(
        reverberant.data + direct.data, measurement.data, atol=1e-12
    )
    with pytest.raises(DimensionMismatchError):
        decompose_measurement(measurement, stft(np.ones((4, 500)), stft_config))


def test_decomposed_render_with_one_bank_equals_the_standard_render(
    rng, grid, measurement
):
    bank = _bank(rng, grid)
    direct = measurement.replace(
        0.3 * measurement.data, SpectrogramOrigin.MEASURED_DIRECT
    )
    reverberant = decompose_measurement(measurement, direct)
    decomposed = render_decomposed(direct, reverberant, bank, bank)
    standard = render_standard(measurement, bank)
    assert decomposed.provenance is Provenance.BSM_DECOMPOSED
    assert standard.provenance is Provenance.BSM_STANDARD
    np.testing.assert_allclose(decomposed.data, standard.data, atol=1e-12)


def test_render_is_linear(rng, grid, measurement):
    bank = _bank(rng, grid)
    doubled = measurement.replace(2.0 * measurement.data)
    np.testing.assert_allclose(
        apply_filterbank(bank, doubled).data,
        apply_filterbank(bank, measurement).scaled(2.0).data,
        atol=1e-12,
    )


def test_provenance_algebra(rng, stft_config):
    direct = _binaural(rng, stft_config, Provenance.REFERENCE_DIRECT)
    reverberant = _binaural(rng, stft_config, Provenance.REFERENCE_REVERB)
    reference = direct + reverberant
    assert reference.provenance is Provenance.REFERENCE
    assert (reference - direct).provenance is Provenance.REFERENCE_REVERB
    np.testing.assert_allclose((reference - direct).data, reverberant.data, atol=1e-12)
    assert (reference + reference).provenance is Provenance.REFERENCE

    standard = _binaural(rng, stft_config, Provenance.BSM_STANDARD)
    with pytest.raises(ProvenanceError):
        reference + standard
    with pytest.raises(ProvenanceError):
        direct - reference


def test_unknown_ear(rng, stft_config):
    with pytest.raises(ValueError):
        _binaural(rng, stft_config, Provenance.REFERENCE).ear("middle")


def test_decoding_weights_use_the_conjugate_partner(rng, grid):
    order = 2
    count = (order + 1) ** 2
    shape = (count, grid.bins)
    coefficients = HrtfSHCoefficients(
        order,
        rng.standard_normal(shape) + 1j * rng.standard_normal(shape),
        rng.standard_normal(shape) + 1j * rng.standard_normal(shape),
        grid,
    )
    weights = decoding_weights(coefficients, order)
    assert weights.shape == (2, count, grid.bins)
    n, m = sh_degrees(order)
    # (n, m) = (1, -1) decodes with -h_{1,1}
    index = int(np.flatnonzero((n == 1) & (m == -1))[0])
    partner = int(np.flatnonzero((n == 1) & (m == 1))[0])
    np.testing.assert_array_equal(weights[0, index], -coefficients.left[partner])
    np.testing.assert_array_equal(weights[1, 0], coefficients.right[0])
    assert decoding_weights(coefficients, 1).shape == (2, 4, grid.bins)


def test_reference_of_an_omni_signal(rng, grid, stft_config):
    source = rng.standard_normal(300)
    rir = np.zeros((3, 4), dtype=complex)
    rir[0, 0] = 1.0
    signal = ShSignal(rir, 5, source, 310, 1, 16000)
    left = np.zeros((4, grid.bins), dtype=complex)
    right = np.zeros((4, grid.bins), dtype=complex)
    left[0] = 2.0
    right[0] = np.exp(1j * grid.frequencies / 1000.0)
    reference = render_reference(
        signal, HrtfSHCoefficients(1, left, right, grid), stft_config
    )
    spectrum = stft(signal.channel(0), stft_config).data[0]
    assert reference.provenance is Provenance.REFERENCE
    assert reference.left.origin is SpectrogramOrigin.REFERENCE
    np.testing.assert_allclose(reference.left.data[0], 2.0 * spectrum, atol=1e-12)
    np.testing.assert_allclose(reference.right.data[0], right[0] * spectrum, atol=1e-12)


def test_reference_truncates_to_the_smaller_order(rng, grid, stft_config):
    source = rng.standard_normal(200)
    rir = rng.standard_normal((4, 9)) + 1j * rng.standard_normal((4, 9))
    signal = ShSignal(rir, 0, source, 210, 2, 16000)
    shape = (4, grid.bins)
    coefficients = HrtfSHCoefficients(
        1, rng.standard_normal(shape), rng.standard_normal(shape), grid
    )
    full = render_reference(signal, coefficients, stft_config)
    truncated = render_reference(signal.truncated(1), coefficients, stft_config)
    np.testing.assert_allclose(full.data, truncated.data, atol=1e-12)


def test_reference_needs_matching_bins(rng, stft_config):
    other = FrequencyGrid.from_fft(16000, 128)
    zeros = np.zeros((1, other.bins))
    signal = ShSignal(np.ones((1, 1)), 0, np.ones(100), 100, 0, 16000)
    with pytest.raises(DimensionMismatchError):
        render_reference(
            signal, HrtfSHCoefficients(0, zeros, zeros, other), stft_config
        )
