import logging
from typing import Optional, Tuple

import numpy as np
from numpy.lib.stride_tricks import sliding_window_view

from sage_bsm.exceptions import ColaError, StftError
from sage_bsm.helpers import Spectrogram, SpectrogramOrigin, StftConfig

logger = logging.getLogger(__name__)


def stft(
    signal: np.ndarray,
    config: StftConfig,
    origin: SpectrogramOrigin = SpectrogramOrigin.MEASURED,
    sample_rate: Optional[int] = None,
) -> Spectrogram:
    """
    Short-time Fourier transform of one or more channels.

    The signal is zero-padded at the end to ``1 + ceil((len − W)/H)`` frames.
    Real input uses ``rfft``; complex input (SH-domain signals) uses a full
    FFT of which the one-sided bins are kept.

    Args:
        signal (np.ndarray): Samples, shape (samples,) or (channels, samples).
        config (StftConfig): Window, hop and FFT size.
        origin (SpectrogramOrigin): Tag stored on the result.
        sample_rate (int, optional): Checked against ``config`` when given.

    Returns:
        Spectrogram: Data of shape (channels, frames, fft_size/2 + 1).

    Raises:
        StftError: If the signal is empty or the sample rates differ.

    Example:
        spec = stft(mic_signals, StftConfig.from_durations(48000))
    """
    samples = np.atleast_2d(np.asarray(signal))
    if samples.size == 0 or samples.shape[-1] == 0:
        raise StftError("cannot transform an empty signal")
    if sample_rate is not None and sample_rate != config.sample_rate:
        raise StftError(
            f"signal sampled at {sample_rate} Hz, "
            f"STFT configured for {config.sample_rate} Hz"
        )
    length = samples.shape[-1]
    frames = config.frame_count(length)
    padded_length = config.window_length + (frames - 1) * config.hop
    padded = np.zeros(samples.shape[:-1] + (padded_length,), dtype=samples.dtype)
    padded[..., :length] = samples
    windows = sliding_window_view(padded, config.window_length, axis=-1)
    windows = windows[..., :: config.hop, :]
    weighted = windows * config.window
    if np.iscomplexobj(weighted):
        data = np.fft.fft(weighted, n=config.fft_size, axis=-1)[..., : config.bins]
    else:
        data = np.fft.rfft(weighted, n=config.fft_size, axis=-1)
    return Spectrogram(data, config, origin, length)


def istft(spec: Spectrogram) -> np.ndarray:
    """
    Overlap-add inverse of :func:`stft`, normalised by the summed windows.

    Returns:
        np.ndarray: Real samples, shape (channels, spec.length).

    Raises:
        ColaError: If the window and hop do not satisfy COLA.
    """
    config = spec.config
    if not config.is_cola():
        raise ColaError(
            f"{config.window_kind} window of {config.window_length} samples with hop "
            f"{config.hop} does not satisfy COLA"
        )
    frames = np.fft.irfft(spec.data, n=config.fft_size, axis=-1)
    frames = frames[..., : config.window_length]
    padded_length = config.window_length + (spec.frames - 1) * config.hop
    output = np.zeros((spec.channels, padded_length))
    norm = np.zeros(padded_length)
    window = config.window
    for index in range(spec.frames):
        start = index * config.hop
        output[:, start : start + config.window_length] += frames[:, index]
        norm[start : start + config.window_length] += window
    nonzero = norm > np.finfo(float).tiny
    output[:, nonzero] /= norm[nonzero]
    output[:, ~nonzero] = 0.0
    return output[:, : spec.length]


def interior_frames(frames: int, trim: int = 2) -> Tuple[int, int]:
    """``(start, stop)`` of the frames left after dropping ``trim`` at each end."""
    if trim < 0:
        raise StftError("frame trim must be non-negative")
    if frames <= 2 * trim:
        logger.warning("Only %s frames, too few to trim %s at each end", frames, trim)
        return 0, frames
    return trim, frames - trim
