from dataclasses import dataclass
from typing import Optional, Tuple

import numpy as np

from sage_bsm.exceptions import HrtfFormatError, HrtfChannelMismatchError
from sage_bsm.helpers.directions import Direction, FrequencyGrid


@dataclass(frozen=True, eq=False)
class HrtfSet:
    """
    Left/right head-related transfer functions sampled on a set of directions.

    Args:
        directions (tuple): The measurement directions, ``D`` of them.
        left (np.ndarray): Complex responses, shape (D, K).
        right (np.ndarray): Complex responses, shape (D, K).
        grid (FrequencyGrid): Bin frequencies of the responses.
        left_ir (np.ndarray, optional): Impulse responses (D, T) the spectra
            were derived from. Kept so the set can be written back unchanged.
        right_ir (np.ndarray, optional): Same for the right ear.
    """

    directions: Tuple[Direction, ...]
    left: np.ndarray
    right: np.ndarray
    grid: FrequencyGrid
    left_ir: Optional[np.ndarray] = None
    right_ir: Optional[np.ndarray] = None

    def __post_init__(self) -> None:
        directions = tuple(self.directions)
        if not directions:
            raise HrtfFormatError("an HRTF set needs at least one direction")
        left = np.asarray(self.left, dtype=np.complex128)
        right = np.asarray(self.right, dtype=np.complex128)
        if left.shape[0] != right.shape[0]:
            raise HrtfChannelMismatchError(
                f"left ear has {left.shape[0]} directions, "
                f"right ear has {right.shape[0]}"
            )
        expected = (len(directions), self.grid.bins)
        if left.shape != expected or right.shape != expected:
            raise HrtfFormatError(
                f"HRTF responses must have shape {expected}, "
                f"got {left.shape} and {right.shape}"
            )
        if not (np.all(np.isfinite(left)) and np.all(np.isfinite(right))):
            raise HrtfFormatError("HRTF responses must be finite")
        for array in (left, right):
            array.setflags(write=False)
        object.__setattr__(self, "directions", directions)
        object.__setattr__(self, "left", left)
        object.__setattr__(self, "right", right)

    @property
    def sample_rate(self) -> float:
        return self.grid.sample_rate

    @property
    def count(self) -> int:
        return len(self.directions)

    def ear(self, side: str) -> np.ndarray:
        if side == "left":
            return self.left
        if side == "right":
            return self.right
        raise ValueError(f"unknown ear {side!r}")

    def impulse_responses(self) -> Tuple[np.ndarray, np.ndarray]:
        """Time-domain responses; synthesised with an inverse FFT when not stored."""
        if self.left_ir is not None and self.right_ir is not None:
            return self.left_ir, self.right_ir
        size = self.grid.fft_size
        return (
            np.fft.irfft(self.left, n=size, axis=1),
            np.fft.irfft(self.right, n=size, axis=1),
        )


@dataclass(frozen=True, eq=False)
class HrtfSHCoefficients:
    """
    Per-ear SH coefficients ``h_nm`` with ``h(d) = Σ h_nm Y_n^m(d)``.

    Arrays have shape ((order + 1)**2, K), rows ordered by (n, m), m = -n..n.
    """

    order: int
    left: np.ndarray
    right: np.ndarray
    grid: FrequencyGrid

    def __post_init__(self) -> None:
        count = (self.order + 1) ** 2
        expected = (count, self.grid.bins)
        left = np.asarray(self.left, dtype=np.complex128)
        right = np.asarray(self.right, dtype=np.complex128)
        if left.shape != expected or right.shape != expected:
            raise HrtfFormatError(
                f"SH coefficients of order {self.order} must have shape {expected}"
            )
        object.__setattr__(self, "left", left)
        object.__setattr__(self, "right", right)

    def truncated(self, order: int) -> "HrtfSHCoefficients":
        if order >= self.order:
            return self
        count = (order + 1) ** 2
        return HrtfSHCoefficients(
            order, self.left[:count], self.right[:count], self.grid
        )
