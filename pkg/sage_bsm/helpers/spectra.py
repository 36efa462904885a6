import math
from dataclasses import dataclass, field
from enum import Enum
from typing import Optional, Tuple

import numpy as np
from scipy.signal import check_COLA, get_window

from sage_bsm.exceptions import DimensionMismatchError, ProvenanceError, StftError
from sage_bsm.helpers.directions import FrequencyGrid


class SpectrogramOrigin(str, Enum):
    MEASURED = "x"
    MEASURED_DIRECT = "x_d"
    MEASURED_REVERB = "x_r"
    REFERENCE = "p"
    ESTIMATE = "z"


class Provenance(str, Enum):
    REFERENCE = "reference"
    REFERENCE_DIRECT = "reference-direct"
    REFERENCE_REVERB = "reference-reverb"
    BSM_STANDARD = "bsm-standard"
    BSM_DECOMPOSED = "bsm-decomposed"
    COMPONENT_DIRECT = "component-direct"
    COMPONENT_REVERB = "component-reverb"


_SUMS = {
    frozenset({Provenance.COMPONENT_DIRECT, Provenance.COMPONENT_REVERB}): (
        Provenance.BSM_DECOMPOSED
    ),
    frozenset({Provenance.REFERENCE_DIRECT, Provenance.REFERENCE_REVERB}): (
        Provenance.REFERENCE
    ),
}
_DIFFERENCES = {
    (Provenance.REFERENCE, Provenance.REFERENCE_DIRECT): Provenance.REFERENCE_REVERB,
}


def _next_power_of_two(value: int) -> int:
    return 1 << max(0, int(value) - 1).bit_length()


@dataclass(frozen=True)
class StftConfig:
    """
    Analysis parameters of the short-time Fourier transform.

    Args:
        sample_rate (int): Sampling rate of the transformed signals.
        window_length (int): Window length in samples.
        hop (int): Frame advance in samples.
        window_kind (str): Any window name understood by
            ``scipy.signal.get_window``; periodic variants are used.
        fft_size (int, optional): Transform length; defaults to the next power
            of two not below ``window_length``.

    Example:
        config = StftConfig.from_durations(48000)
        config.window_length, config.hop, config.fft_size  # (1536, 768, 2048)
    """

    sample_rate: int
    window_length: int
    hop: int
    window_kind: str = "hamming"
    fft_size: int = 0

    def __post_init__(self) -> None:
        if self.sample_rate <= 0:
            raise StftError("sample rate must be positive")
        if self.window_length <= 0:
            raise StftError("window length must be positive")
        if not 0 < self.hop <= self.window_length:
            raise StftError(
                f"hop must lie in (0, {self.window_length}], got {self.hop}"
            )
        fft_size = self.fft_size or _next_power_of_two(self.window_length)
        if fft_size < self.window_length or fft_size & (fft_size - 1):
            raise StftError(
                f"fft size must be a power of two >= {self.window_length}, "
                f"got {fft_size}"
            )
        object.__setattr__(self, "fft_size", int(fft_size))

    @classmethod
    def from_durations(
        cls,
        sample_rate: int,
        window_ms: float = 32.0,
        hop_ms: float = 16.0,
        window_kind: str = "hamming",
    ) -> "StftConfig":
        return cls(
            int(sample_rate),
            int(round(sample_rate * window_ms / 1000.0)),
            int(round(sample_rate * hop_ms / 1000.0)),
            window_kind,
        )

    @property
    def bins(self) -> int:
        return self.fft_size // 2 + 1

    @property
    def window(self) -> np.ndarray:
        return get_window(self.window_kind, self.window_length, fftbins=True)

    @property
    def grid(self) -> FrequencyGrid:
        return FrequencyGrid.from_fft(self.sample_rate, self.fft_size)

    def is_cola(self) -> bool:
        return bool(
            check_COLA(self.window, self.window_length, self.window_length - self.hop)
        )

    def frame_count(self, length: int) -> int:
        """Frames for ``length`` samples: ``1 + ceil((length - window) / hop)``."""
        if length <= self.window_length:
            return 1
        return 1 + math.ceil((length - self.window_length) / self.hop)


@dataclass(frozen=True, eq=False)
class Spectrogram:
    """
    Complex STFT data of shape (channels, frames, bins).

    ``length`` is the number of time samples the spectrogram was computed
    from, so the inverse transform can trim its output.
    """

    data: np.ndarray
    config: StftConfig
    origin: SpectrogramOrigin
    length: int

    def __post_init__(self) -> None:
        data = np.asarray(self.data, dtype=np.complex128)
        if data.ndim == 2:
            data = data[np.newaxis]
        if data.ndim != 3:
            raise DimensionMismatchError(
                f"spectrogram data must be (channels, frames, bins), got {data.shape}"
            )
        if data.shape[2] != self.config.bins:
            raise DimensionMismatchError(
                f"spectrogram has {data.shape[2]} bins, "
                f"config expects {self.config.bins}"
            )
        if not np.all(np.isfinite(data)):
            raise StftError("spectrogram values must be finite")
        object.__setattr__(self, "data", data)
        object.__setattr__(self, "origin", SpectrogramOrigin(self.origin))

    @property
    def channels(self) -> int:
        return int(self.data.shape[0])

    @property
    def frames(self) -> int:
        return int(self.data.shape[1])

    @property
    def bins(self) -> int:
        return int(self.data.shape[2])

    def check_compatible(self, other: "Spectrogram") -> None:
        if self.data.shape != other.data.shape or self.config != other.config:
            raise DimensionMismatchError(
                f"spectrograms differ: {self.data.shape} vs {other.data.shape}"
            )

    def replace(
        self, data: np.ndarray, origin: Optional[SpectrogramOrigin] = None
    ) -> "Spectrogram":
        return Spectrogram(data, self.config, origin or self.origin, self.length)


@dataclass(frozen=True, eq=False)
class BinauralSpectrogram:
    """
    Left and right single-channel spectrograms with a provenance tag.

    Sums and differences follow the provenance rules: equal tags keep the
    tag, the direct and reverberant component renders add up to the
    decomposed estimate, the two reference parts add up to the reference, and
    the reference minus its direct part is the reverberant reference.
    Anything else raises :class:`ProvenanceError`.

    Example:
        decomposed = direct_component + reverb_component
        decomposed.provenance  # Provenance.BSM_DECOMPOSED
    """

    left: Spectrogram
    right: Spectrogram
    provenance: Provenance
    metadata: dict = field(default_factory=dict, compare=False)

    def __post_init__(self) -> None:
        if self.left.channels != 1 or self.right.channels != 1:
            raise DimensionMismatchError("each ear must hold a single channel")
        self.left.check_compatible(self.right)
        object.__setattr__(self, "provenance", Provenance(self.provenance))

    @property
    def config(self) -> StftConfig:
        return self.left.config

    @property
    def shape(self) -> Tuple[int, int]:
        return self.left.frames, self.left.bins

    @property
    def data(self) -> np.ndarray:
        """Both ears stacked, shape (2, frames, bins)."""
        return np.concatenate([self.left.data, self.right.data], axis=0)

    @classmethod
    def from_array(
        cls,
        data: np.ndarray,
        config: StftConfig,
        provenance: Provenance,
        length: int,
        origin: SpectrogramOrigin = SpectrogramOrigin.ESTIMATE,
    ) -> "BinauralSpectrogram":
        data = np.asarray(data)
        if data.ndim != 3 or data.shape[0] != 2:
            raise DimensionMismatchError(
                f"binaural data must be (2, frames, bins), got {data.shape}"
            )
        return cls(
            Spectrogram(data[0], config, origin, length),
            Spectrogram(data[1], config, origin, length),
            provenance,
        )

    def ear(self, side: str) -> Spectrogram:
        if side == "left":
            return self.left
        if side == "right":
            return self.right
        raise ValueError(f"unknown ear {side!r}")

    def _combine(self, other: "BinauralSpectrogram", sign: float) -> np.ndarray:
        if not isinstance(other, BinauralSpectrogram):
            raise TypeError(f"cannot combine with {type(other).__name__}")
        self.left.check_compatible(other.left)
        return self.data + sign * other.data

    def __add__(self, other: "BinauralSpectrogram") -> "BinauralSpectrogram":
        if self.provenance == other.provenance:
            tag = self.provenance
        else:
            pair = frozenset({self.provenance, other.provenance})
            if pair not in _SUMS:
                raise ProvenanceError(
                    f"cannot add {self.provenance.value} and {other.provenance.value}"
                )
            tag = _SUMS[pair]
        return self.from_array(
            self._combine(other, 1.0),
            self.config,
            tag,
            self.left.length,
            self.left.origin,
        )

    def __sub__(self, other: "BinauralSpectrogram") -> "BinauralSpectrogram":
        if self.provenance == other.provenance:
            tag = self.provenance
        else:
            key = (self.provenance, other.provenance)
            if key not in _DIFFERENCES:
                raise ProvenanceError(
                    f"cannot subtract {other.provenance.value} "
                    f"from {self.provenance.value}"
                )
            tag = _DIFFERENCES[key]
        return self.from_array(
            self._combine(other, -1.0),
            self.config,
            tag,
            self.left.length,
            self.left.origin,
        )

    def scaled(self, factor: complex) -> "BinauralSpectrogram":
        return self.from_array(
            factor * self.data,
            self.config,
            self.provenance,
            self.left.length,
            self.left.origin,
        )

    def to_signals(self) -> np.ndarray:
        """Time-domain ear signals, shape (2, length); real part of the inverse STFT."""
        from sage_bsm.acoustics.stft import istft

        return np.concatenate([istft(self.left), istft(self.right)], axis=0)
