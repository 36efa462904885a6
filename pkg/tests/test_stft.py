import logging

import numpy as np
import pytest

from sage_bsm.acoustics.stft import interior_frames, istft, stft
from sage_bsm.exceptions import ColaError, DimensionMismatchError, StftError
from sage_bsm.helpers import Spectrogram, SpectrogramOrigin, StftConfig


def test_default_durations_at_48k():
    config = StftConfig.from_durations(48000)
    assert (config.window_length, config.hop, config.fft_size) == (1536, 768, 2048)
    assert config.bins == 1025
    assert config.is_cola()


def test_round_trip_is_exact_in_the_interior(rng):
    config = StftConfig.from_durations(48000)
    signal = rng.standard_normal((2, 48000))
    spec = stft(signal, config)
    restored = istft(spec)
    assert restored.shape == signal.shape
    interior = slice(config.window_length, signal.shape[1] - config.window_length)
    error = np.linalg.norm(restored[:, interior] - signal[:, interior])
    assert error / np.linalg.norm(signal[:, interior]) < 1e-10


def test_frame_count():
    config = StftConfig.from_durations(48000)
    assert config.frame_count(48000) == 62
    assert config.frame_count(100) == 1
    assert stft(np.ones(48000), config).frames == 62


def test_output_layout(stft_config, rng):
    spec = stft(
        rng.standard_normal((3, 500)), stft_config, SpectrogramOrigin.MEASURED_DIRECT
    )
    assert spec.data.shape == (3, stft_config.frame_count(500), 33)
    assert spec.origin is SpectrogramOrigin.MEASURED_DIRECT
    assert spec.length == 500


def test_complex_input_keeps_the_one_sided_bins(stft_config, rng):
    real = rng.standard_normal(400)
    imaginary = rng.standard_normal(400)
    combined = stft(real + 1j * imaginary, stft_config).data
    expected = stft(real, stft_config).data + 1j * stft(imaginary, stft_config).data
    np.testing.assert_allclose(combined, expected, atol=1e-12)


def test_non_cola_configuration_cannot_be_inverted(rng):
    config = StftConfig(48000, 1536, 1000)
    assert not config.is_cola()
    with pytest.raises(ColaError):
        istft(stft(rng.standard_normal(8000), config))


@pytest.mark.parametrize(
    "arguments",
    [
        (16000, 64, 80),
        (16000, 64, 0),
        (16000, 0, 1),
        (0, 64, 32),
        (16000, 64, 32, "hamming", 96),
    ],
)
def test_invalid_configurations(arguments):
    with pytest.raises(StftError):
        StftConfig(*arguments)


def test_empty_signal(stft_config):
    with pytest.raises(StftError):
        stft(np.zeros(0), stft_config)


def test_sample_rate_mismatch(stft_config):
    with pytest.raises(StftError):
        stft(np.ones(100), stft_config, sample_rate=48000)


def test_spectrogram_bins_must_match_the_config(stft_config):
    with pytest.raises(DimensionMismatchError):
        Spectrogram(np.zeros((1, 4, 20)), stft_config, SpectrogramOrigin.MEASURED, 100)


def test_interior_frames():
    assert interior_frames(10, 2) == (2, 8)
    assert interior_frames(10, 0) == (0, 10)
    with pytest.raises(StftError):
        interior_frames(10, -1)


def test_interior_frames_warns_when_too_short(caplog):
    with caplog.at_level(logging.WARNING, logger="sage_bsm"):
        assert interior_frames(3, 2) == (0, 3)
    assert "too few to trim" in caplog.text
