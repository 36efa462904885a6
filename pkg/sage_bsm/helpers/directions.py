import math
from dataclasses import dataclass, field
from typing import Sequence, Tuple

import numpy as np

from sage_bsm.exceptions import GeometryError

TWO_PI = 2.0 * math.pi


@dataclass(frozen=True)
class Direction:
    """
    A direction on the unit sphere.

    ``colatitude`` is measured from the +z axis downwards, ``azimuth`` from
    +x towards +y. The azimuth is normalised to [0, 2π).

    Example:
        doa = Direction(math.pi / 2, math.pi / 6)
    """

    colatitude: float
    azimuth: float

    def __post_init__(self) -> None:
        colatitude = float(self.colatitude)
        azimuth = float(self.azimuth)
        if not (math.isfinite(colatitude) and math.isfinite(azimuth)):
            raise GeometryError("direction angles must be finite")
        if colatitude < 0.0 or colatitude > math.pi:
            raise GeometryError(f"colatitude {colatitude} outside [0, pi]")
        azimuth = azimuth % TWO_PI
        if azimuth >= TWO_PI:
            azimuth = 0.0
        object.__setattr__(self, "colatitude", colatitude)
        object.__setattr__(self, "azimuth", azimuth)

    @classmethod
    def from_vector(cls, vector: Sequence[float]) -> "Direction":
        x, y, z = (float(v) for v in vector)
        norm = math.sqrt(x * x + y * y + z * z)
        if norm == 0.0:
            raise GeometryError("cannot take the direction of a zero vector")
        colatitude = math.acos(max(-1.0, min(1.0, z / norm)))
        return cls(colatitude, math.atan2(y, x))


@dataclass(frozen=True)
class Microphone:
    radius: float
    direction: Direction

    def __post_init__(self) -> None:
        if not self.radius > 0.0:
            raise GeometryError(
                f"microphone radius must be positive, got {self.radius}"
            )


@dataclass(frozen=True)
class ArrayGeometry:
    """
    Microphone positions relative to the array centre.

    Args:
        mics (tuple): Ordered microphones, ``M = len(mics)``.
        center_position (tuple): Array centre in room coordinates (meters).
    """

    mics: Tuple[Microphone, ...]
    center_position: Tuple[float, float, float] = (0.0, 0.0, 0.0)

    def __post_init__(self) -> None:
        mics = tuple(self.mics)
        if not mics:
            raise GeometryError("an array needs at least one microphone")
        center = tuple(float(v) for v in self.center_position)
        if len(center) != 3:
            raise GeometryError("array centre must have three coordinates")
        object.__setattr__(self, "mics", mics)
        object.__setattr__(self, "center_position", center)

    @property
    def count(self) -> int:
        return len(self.mics)

    @property
    def radii(self) -> np.ndarray:
        return np.array([mic.radius for mic in self.mics])

    @property
    def max_radius(self) -> float:
        return float(self.radii.max())

    @property
    def positions(self) -> np.ndarray:
        """Cartesian microphone positions relative to the centre, shape (M, 3)."""
        theta = np.array([mic.direction.colatitude for mic in self.mics])
        phi = np.array([mic.direction.azimuth for mic in self.mics])
        radius = self.radii
        return np.stack(
            [
                radius * np.sin(theta) * np.cos(phi),
                radius * np.sin(theta) * np.sin(phi),
                radius * np.cos(theta),
            ],
            axis=1,
        )

    @property
    def absolute_positions(self) -> np.ndarray:
        return self.positions + np.asarray(self.center_position)

    @property
    def directions(self) -> Tuple[Direction, ...]:
        return tuple(mic.direction for mic in self.mics)


@dataclass(frozen=True, eq=False)
class FrequencyGrid:
    """
    One-sided DFT bin frequencies from 0 Hz to Nyquist.

    Example:
        grid = FrequencyGrid.from_fft(48000, 2048)
        grid.wavenumbers[1]  # 2*pi*23.4375/343
    """

    sample_rate: float
    frequencies: np.ndarray
    speed_of_sound: float = 343.0

    def __post_init__(self) -> None:
        frequencies = np.asarray(self.frequencies, dtype=float)
        if frequencies.ndim != 1 or frequencies.size < 1:
            raise GeometryError("frequency grid must be a non-empty vector")
        if frequencies[0] != 0.0:
            raise GeometryError("first bin of a frequency grid must be 0 Hz")
        if frequencies.size > 1:
            if np.any(np.diff(frequencies) <= 0.0):
                raise GeometryError("bin frequencies must be strictly increasing")
            if not math.isclose(frequencies[-1], self.sample_rate / 2.0, rel_tol=1e-12):
                raise GeometryError("last bin of a frequency grid must be Nyquist")
        if not self.speed_of_sound > 0.0:
            raise GeometryError("speed of sound must be positive")
        frequencies.setflags(write=False)
        object.__setattr__(self, "frequencies", frequencies)

    @classmethod
    def from_fft(
        cls, sample_rate: float, fft_size: int, speed_of_sound: float = 343.0
    ) -> "FrequencyGrid":
        return cls(
            float(sample_rate),
            np.fft.rfftfreq(int(fft_size), d=1.0 / float(sample_rate)),
            float(speed_of_sound),
        )

    @property
    def bins(self) -> int:
        return int(self.frequencies.size)

    @property
    def fft_size(self) -> int:
        return 2 * (self.bins - 1)

    @property
    def wavenumbers(self) -> np.ndarray:
        return 2.0 * np.pi * self.frequencies / self.speed_of_sound

    def wavenumber(self, frequency: float) -> float:
        return 2.0 * math.pi * float(frequency) / self.speed_of_sound

    def same_as(self, other: "FrequencyGrid") -> bool:
        return (
            self.sample_rate == other.sample_rate
            and self.speed_of_sound == other.speed_of_sound
            and np.array_equal(self.frequencies, other.frequencies)
        )


@dataclass(frozen=True, eq=False)
class SteeringMatrix:
    """M x L steering matrix at one frequency; column ``l`` belongs to ``doas[l]``."""

    frequency: float
    matrix: np.ndarray
    doas: Tuple[Direction, ...]
    geometry: ArrayGeometry = field(repr=False)

    @property
    def shape(self) -> Tuple[int, int]:
        rows, cols = self.matrix.shape
        return int(rows), int(cols)
