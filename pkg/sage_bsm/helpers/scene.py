import math
from dataclasses import dataclass
from typing import Sequence, Tuple

import numpy as np
from scipy.signal import fftconvolve

from sage_bsm.exceptions import DimensionMismatchError, OutsideRoomError, SceneError
from sage_bsm.helpers.directions import ArrayGeometry, Direction

Vector3 = Tuple[float, float, float]


def _vector(values: Sequence[float], name: str) -> Vector3:
    vector = tuple(float(v) for v in values)
    if len(vector) != 3:
        raise SceneError(f"{name} must have three coordinates, got {len(vector)}")
    return vector  # type: ignore[return-value]


@dataclass(frozen=True)
class RoomSpec:
    """
    A shoebox room with frequency-independent wall reflection coefficients.

    Args:
        dimensions (tuple): Room size ``(Lx, Ly, Lz)`` in meters.
        reflection_coefficients (tuple): Six pressure reflection coefficients
            in the order ``(x_low, x_high, y_low, y_high, z_low, z_high)``;
            ``low`` walls pass through ``origin``.
        max_order (int): Largest total reflection order enumerated.
        speed_of_sound (float): m/s.
        origin (tuple): Room corner in world coordinates.

    Example:
        room = RoomSpec.from_t60((4.0, 3.0, 2.5), 0.3, max_order=25)
        round(room.eyring_t60(), 6)  # 0.3
    """

    dimensions: Vector3
    reflection_coefficients: Tuple[float, ...] = (0.0,) * 6
    max_order: int = 0
    speed_of_sound: float = 343.0
    origin: Vector3 = (0.0, 0.0, 0.0)

    def __post_init__(self) -> None:
        dimensions = _vector(self.dimensions, "room dimensions")
        if min(dimensions) <= 0.0:
            raise SceneError(f"room dimensions must be positive, got {dimensions}")
        coefficients = tuple(float(b) for b in self.reflection_coefficients)
        if len(coefficients) == 1:
            coefficients = coefficients * 6
        if len(coefficients) != 6:
            raise SceneError("a shoebox room needs six reflection coefficients")
        if any(not 0.0 <= b < 1.0 for b in coefficients):
            raise SceneError(
                f"reflection coefficients must lie in [0, 1), got {coefficients}"
            )
        if self.max_order < 0:
            raise SceneError("max_order must be non-negative")
        if not self.speed_of_sound > 0.0:
            raise SceneError("speed of sound must be positive")
        object.__setattr__(self, "dimensions", dimensions)
        object.__setattr__(self, "reflection_coefficients", coefficients)
        object.__setattr__(self, "origin", _vector(self.origin, "room origin"))

    @classmethod
    def from_t60(
        cls,
        dimensions: Sequence[float],
        t60: float,
        max_order: int,
        speed_of_sound: float = 343.0,
        origin: Sequence[float] = (0.0, 0.0, 0.0),
    ) -> "RoomSpec":
        """
        Uniform coefficients meeting ``t60`` under Eyring's formula.

        With ``α = 1 − β²`` Eyring's ``T60 = 24 ln10 V / (−c S ln(1 − α))``
        inverts to ``β = exp(−12 ln10 V / (c S T60))``.
        """
        if not t60 > 0.0:
            raise SceneError(f"target T60 must be positive, got {t60}")
        lx, ly, lz = (float(v) for v in dimensions)
        volume = lx * ly * lz
        surface = 2.0 * (lx * ly + lx * lz + ly * lz)
        beta = math.exp(
            -12.0 * math.log(10.0) * volume / (speed_of_sound * surface * t60)
        )
        corner = _vector(origin, "room origin")
        return cls((lx, ly, lz), (beta,) * 6, max_order, speed_of_sound, corner)

    @property
    def volume(self) -> float:
        lx, ly, lz = self.dimensions
        return lx * ly * lz

    @property
    def wall_areas(self) -> np.ndarray:
        lx, ly, lz = self.dimensions
        return np.array([ly * lz, ly * lz, lx * lz, lx * lz, lx * ly, lx * ly])

    @property
    def surface_area(self) -> float:
        return float(self.wall_areas.sum())

    def eyring_t60(self) -> float:
        areas = self.wall_areas
        absorption = 1.0 - np.asarray(self.reflection_coefficients) ** 2
        mean_absorption = float(np.dot(areas, absorption) / areas.sum())
        if mean_absorption >= 1.0:
            return 0.0
        if mean_absorption <= 0.0:
            return math.inf
        return (
            24.0
            * math.log(10.0)
            * self.volume
            / (
                -self.speed_of_sound
                * self.surface_area
                * math.log(1.0 - mean_absorption)
            )
        )

    def contains(self, point: Sequence[float]) -> bool:
        local = np.asarray(point, dtype=float) - np.asarray(self.origin)
        return bool(np.all(local > 0.0) and np.all(local < np.asarray(self.dimensions)))

    def translated(self, offset: Sequence[float]) -> "RoomSpec":
        origin = tuple(np.asarray(self.origin) + np.asarray(offset, dtype=float))
        return RoomSpec(
            self.dimensions,
            self.reflection_coefficients,
            self.max_order,
            self.speed_of_sound,
            origin,  # type: ignore[arg-type]
        )


@dataclass(frozen=True, eq=False)
class Scene:
    """
    A point source and a microphone array inside a room.

    ``source_signal`` is a 1-D float array at ``sample_rate``; ``noise_snr``
    is the linear per-channel SNR of injected sensor noise, ``math.inf``
    for none.
    """

    room: RoomSpec
    source_position: Vector3
    source_signal: np.ndarray
    sample_rate: int
    array: ArrayGeometry
    noise_snr: float = math.inf
    seed: int = 0

    def __post_init__(self) -> None:
        source = _vector(self.source_position, "source position")
        signal = np.asarray(self.source_signal, dtype=float)
        if signal.ndim != 1 or signal.size == 0:
            raise SceneError("source signal must be a non-empty 1-D array")
        if self.sample_rate <= 0:
            raise SceneError("sample rate must be positive")
        if not self.noise_snr > 0.0:
            raise SceneError("noise SNR must be positive or inf")
        if not self.room.contains(source):
            raise OutsideRoomError(f"source {source} is not inside the room")
        for index, position in enumerate(self.array.absolute_positions):
            if not self.room.contains(position):
                raise OutsideRoomError(
                    f"microphone {index} at {tuple(position)} is not inside the room"
                )
        if not self.room.contains(self.array.center_position):
            raise OutsideRoomError("array centre is not inside the room")
        object.__setattr__(self, "source_position", source)
        object.__setattr__(self, "source_signal", signal)

    @property
    def source_direction(self) -> Direction:
        """Direction of the source seen from the array centre."""
        return Direction.from_vector(
            np.asarray(self.source_position) - np.asarray(self.array.center_position)
        )

    @property
    def source_distance(self) -> float:
        return float(
            np.linalg.norm(
                np.asarray(self.source_position)
                - np.asarray(self.array.center_position)
            )
        )

    def translated(self, offset: Sequence[float]) -> "Scene":
        shift = np.asarray(offset, dtype=float)
        center = tuple(np.asarray(self.array.center_position) + shift)
        return Scene(
            self.room.translated(shift),
            tuple(np.asarray(self.source_position) + shift),  # type: ignore[arg-type]
            self.source_signal,
            self.sample_rate,
            ArrayGeometry(self.array.mics, center),  # type: ignore[arg-type]
            self.noise_snr,
            self.seed,
        )


@dataclass(frozen=True, eq=False)
class ImageSourceList:
    """
    Image sources of a shoebox room as seen from one receiver point.

    Row 0 is always the true source (reflection order 0). ``directions`` are
    the arrival directions, pointing from the receiver towards each image.
    """

    positions: np.ndarray
    gains: np.ndarray
    delays: np.ndarray
    orders: np.ndarray
    receiver: Vector3

    def __len__(self) -> int:
        return int(self.gains.size)

    @property
    def distances(self) -> np.ndarray:
        return np.linalg.norm(self.positions - np.asarray(self.receiver), axis=1)

    @property
    def unit_vectors(self) -> np.ndarray:
        offsets = self.positions - np.asarray(self.receiver)
        return offsets / np.linalg.norm(offsets, axis=1, keepdims=True)

    @property
    def colatitudes(self) -> np.ndarray:
        return np.arccos(np.clip(self.unit_vectors[:, 2], -1.0, 1.0))

    @property
    def azimuths(self) -> np.ndarray:
        units = self.unit_vectors
        return np.mod(np.arctan2(units[:, 1], units[:, 0]), 2.0 * np.pi)

    @property
    def directions(self) -> Tuple[Direction, ...]:
        return tuple(
            Direction(theta, phi) for theta, phi in zip(self.colatitudes, self.azimuths)
        )

    def direct(self) -> "ImageSourceList":
        return self.select(self.orders == 0)

    def reflections(self) -> "ImageSourceList":
        return self.select(self.orders > 0)

    def select(self, mask: np.ndarray) -> "ImageSourceList":
        return ImageSourceList(
            self.positions[mask],
            self.gains[mask],
            self.delays[mask],
            self.orders[mask],
            self.receiver,
        )


@dataclass(frozen=True, eq=False)
class MicSignals:
    """
    Simulated array measurements, every part shaped (M, samples).

    ``full`` equals ``direct + reverberant + noise`` sample for sample.
    """

    direct: np.ndarray
    reverberant: np.ndarray
    noise: np.ndarray
    sample_rate: int

    def __post_init__(self) -> None:
        shapes = {self.direct.shape, self.reverberant.shape, self.noise.shape}
        if len(shapes) != 1:
            raise DimensionMismatchError(
                f"signal parts differ in shape: {sorted(shapes)}"
            )

    @property
    def full(self) -> np.ndarray:
        return self.direct + self.reverberant + self.noise

    @property
    def channels(self) -> int:
        return int(self.direct.shape[0])

    @property
    def length(self) -> int:
        return int(self.direct.shape[1])


@dataclass(frozen=True, eq=False)
class ShSignal:
    """
    A complex SH-domain signal kept as SH impulse responses plus the source.

    Channel ``i`` is ``source * rir[:, i]`` shifted by ``offset`` samples and
    cut to ``length`` samples. Channels are ordered by (n, m), m = -n..n.

    Example:
        reference.channel(0)  # omnidirectional channel
    """

    rir: np.ndarray
    offset: int
    source: np.ndarray
    length: int
    order: int
    sample_rate: int

    def __post_init__(self) -> None:
        rir = np.asarray(self.rir, dtype=np.complex128)
        if rir.ndim != 2 or rir.shape[1] != (self.order + 1) ** 2:
            raise DimensionMismatchError(
                f"SH impulse responses of order {self.order} need "
                f"{(self.order + 1) ** 2} columns, got {rir.shape}"
            )
        object.__setattr__(self, "rir", rir)
        object.__setattr__(self, "source", np.asarray(self.source, dtype=float))

    @property
    def channels(self) -> int:
        return int(self.rir.shape[1])

    def channel(self, index: int) -> np.ndarray:
        out = np.zeros(self.length, dtype=np.complex128)
        if self.rir.shape[0] == 0 or self.offset >= self.length:
            return out
        response = self.rir[:, index]
        if not np.any(response):
            return out
        convolved = fftconvolve(self.source, response)
        stop = min(self.length, self.offset + convolved.size)
        out[self.offset : stop] = convolved[: stop - self.offset]
        return out

    def samples(self) -> np.ndarray:
        """All channels, shape (channels, length)."""
        return np.stack([self.channel(index) for index in range(self.channels)])

    def truncated(self, order: int) -> "ShSignal":
        if order >= self.order:
            return self
        return ShSignal(
            self.rir[:, : (order + 1) ** 2],
            self.offset,
            self.source,
            self.length,
            order,
            self.sample_rate,
        )

    def _aligned(self, other: "ShSignal") -> Tuple[np.ndarray, np.ndarray, int]:
        if (
            other.order != self.order
            or other.length != self.length
            or not np.array_equal(other.source, self.source)
        ):
            raise DimensionMismatchError("SH signals differ in order, length or source")
        start = min(self.offset, other.offset)
        stop = max(self.offset + self.rir.shape[0], other.offset + other.rir.shape[0])
        mine = np.zeros((stop - start, self.channels), dtype=np.complex128)
        theirs = np.zeros_like(mine)
        mine[self.offset - start : self.offset - start + self.rir.shape[0]] = self.rir
        theirs_start = other.offset - start
        theirs[theirs_start : theirs_start + other.rir.shape[0]] = other.rir
        return mine, theirs, start

    def __add__(self, other: "ShSignal") -> "ShSignal":
        mine, theirs, start = self._aligned(other)
        return ShSignal(
            mine + theirs, start, self.source, self.length, self.order, self.sample_rate
        )

    def __sub__(self, other: "ShSignal") -> "ShSignal":
        mine, theirs, start = self._aligned(other)
        return ShSignal(
            mine - theirs, start, self.source, self.length, self.order, self.sample_rate
        )

    @classmethod
    def silent(
        cls, order: int, source: np.ndarray, length: int, sample_rate: int
    ) -> "ShSignal":
        return cls(
            np.zeros((0, (order + 1) ** 2), dtype=np.complex128),
            0,
            source,
            length,
            order,
            sample_rate,
        )
