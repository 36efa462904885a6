import logging
from typing import Optional

import numpy as np

from sage_bsm.acoustics.sph import sh_degrees
from sage_bsm.acoustics.stft import stft
from sage_bsm.exceptions import DimensionMismatchError
from sage_bsm.helpers import (
    BinauralSpectrogram,
    BsmFilterBank,
    FilterProvenance,
    HrtfSHCoefficients,
    Provenance,
    ShSignal,
    Spectrogram,
    SpectrogramOrigin,
    StftConfig,
)

logger = logging.getLogger(__name__)

_BANK_TAGS = {
    FilterProvenance.DIRECT: Provenance.COMPONENT_DIRECT,
    FilterProvenance.REVERBERANT: Provenance.COMPONENT_REVERB,
    FilterProvenance.WHOLE_FIELD: Provenance.BSM_STANDARD,
}


def apply_filterbank(
    bank: BsmFilterBank, x: Spectrogram, provenance: Optional[Provenance] = None
) -> BinauralSpectrogram:
    """
    Filter and sum the array channels: ``z_e(n, k) = Σ_m conj(c_e,m(k)) x_m(n, k)``.

    Args:
        bank (BsmFilterBank): Filters of shape (2, K, M).
        x (Spectrogram): M-channel array spectrogram with K bins.
        provenance (Provenance, optional): Tag of the output; derived from the
            bank's provenance when omitted.

    Raises:
        DimensionMismatchError: If the bin or channel counts differ.

    Example:
        z = apply_filterbank(bank, stft(mic_signals, config))
    """
    if bank.bins != x.bins:
        raise DimensionMismatchError(
            f"filter bank has {bank.bins} bins, spectrogram has {x.bins}"
        )
    if bank.mics != x.channels:
        raise DimensionMismatchError(
            f"filter bank has {bank.mics} microphones, "
            f"spectrogram has {x.channels} channels"
        )
    data = np.einsum("ekm,mnk->enk", np.conj(bank.coefficients), x.data)
    return BinauralSpectrogram.from_array(
        data, x.config, provenance or _BANK_TAGS[bank.provenance], x.length
    )


def decompose_measurement(x: Spectrogram, x_d: Spectrogram) -> Spectrogram:
    """Reverberant part ``x_r = x − x_d``."""
    x.check_compatible(x_d)
    return x.replace(x.data - x_d.data, SpectrogramOrigin.MEASURED_REVERB)


def render_decomposed(
    x_d: Spectrogram,
    x_r: Spectrogram,
    bank_d: BsmFilterBank,
    bank_r: BsmFilterBank,
) -> BinauralSpectrogram:
    """Direct part through ``bank_d`` plus reverberant part through ``bank_r``."""
    x_d.check_compatible(x_r)
    direct = apply_filterbank(bank_d, x_d, Provenance.COMPONENT_DIRECT)
    reverberant = apply_filterbank(bank_r, x_r, Provenance.COMPONENT_REVERB)
    return direct + reverberant


def render_standard(x: Spectrogram, bank_r: BsmFilterBank) -> BinauralSpectrogram:
    return apply_filterbank(bank_r, x, Provenance.BSM_STANDARD)


def decoding_weights(hrtf_sh: HrtfSHCoefficients, order: int) -> np.ndarray:
    """
    Per-ear weights ``(−1)^m h_{n,−m}(k)`` applied to SH channel ``(n, m)``.

    Returns:
        np.ndarray: Shape (2, (order+1)², K).
    """
    n, m = sh_degrees(order)
    partner = n * n + n - m
    sign = np.where(m % 2 == 0, 1.0, -1.0)[:, np.newaxis]
    coefficients = hrtf_sh.truncated(order)
    return np.stack(
        [sign * coefficients.left[partner], sign * coefficients.right[partner]]
    )


def render_reference(
    sh_signal: ShSignal,
    hrtf_sh: HrtfSHCoefficients,
    config: StftConfig,
    provenance: Provenance = Provenance.REFERENCE,
) -> BinauralSpectrogram:
    """
    Binaural reference from an SH-domain signal.

    With SH channels ``a_nm = g·s·conj(Y_n^m(d))`` and HRTFs
    ``h(d) = Σ h_nm Y_n^m(d)`` the ear spectrogram is
    ``Σ_nm (−1)^m h_{n,−m} a_nm`` per time-frequency bin. Both inputs are
    truncated to the smaller of their orders; channels are transformed one
    at a time.

    Raises:
        DimensionMismatchError: If the HRTF grid does not match ``config``.
    """
    if (
        hrtf_sh.grid.bins != config.bins
        or hrtf_sh.grid.sample_rate != config.sample_rate
    ):
        raise DimensionMismatchError(
            f"HRTF coefficients have {hrtf_sh.grid.bins} bins at "
            f"{hrtf_sh.grid.sample_rate} Hz, STFT expects {config.bins} at "
            f"{config.sample_rate} Hz"
        )
    order = min(sh_signal.order, hrtf_sh.order)
    if order < max(sh_signal.order, hrtf_sh.order):
        logger.info("Truncating reference rendering to SH order %s", order)
    weights = decoding_weights(hrtf_sh, order)
    frames = config.frame_count(sh_signal.length)
    output = np.zeros((2, frames, config.bins), dtype=np.complex128)
    for index in range(weights.shape[1]):
        if sh_signal.rir.shape[0] == 0 or not np.any(sh_signal.rir[:, index]):
            continue
        spectrum = stft(
            sh_signal.channel(index), config, SpectrogramOrigin.REFERENCE
        ).data[0]
        output += weights[:, index, np.newaxis, :] * spectrum[np.newaxis]
    return BinauralSpectrogram.from_array(
        output, config, provenance, sh_signal.length, SpectrogramOrigin.REFERENCE
    )
