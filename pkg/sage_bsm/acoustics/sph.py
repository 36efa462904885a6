"""
Spherical coordinates, complex spherical harmonics, sphere sampling and
free-field plane-wave steering.

Conventions used throughout the package:

* colatitude ``θ`` from +z downwards, azimuth ``φ`` from +x towards +y;
* complex spherical harmonics ``Y_n^m`` with the Condon–Shortley phase,
  ordered by ``(n, m)`` with ``m = -n..n``;
* a unit plane wave arriving from ``û`` is observed at ``r`` as
  ``exp(+i k r·û)``, whose expansion is
  ``4π Σ iⁿ jₙ(k|r|) conj(Y_n^m(r̂)) Y_n^m(û)``.
"""
import logging
import math
from typing import Optional, Sequence, Tuple

import numpy as np
from scipy import special

from sage_bsm.exceptions import GeometryError
from sage_bsm.helpers import ArrayGeometry, Direction, FrequencyGrid, SteeringMatrix
from sage_bsm.helpers.directions import Microphone

logger = logging.getLogger(__name__)

GOLDEN_ANGLE = math.pi * (3.0 - math.sqrt(5.0))

try:
    _sph_harm_y = special.sph_harm_y

    def _ynm(
        n: np.ndarray, m: np.ndarray, theta: np.ndarray, phi: np.ndarray
    ) -> np.ndarray:
        return _sph_harm_y(n, m, theta, phi)

except AttributeError:  # scipy < 1.15

    def _ynm(
        n: np.ndarray, m: np.ndarray, theta: np.ndarray, phi: np.ndarray
    ) -> np.ndarray:
        return special.sph_harm(m, n, phi, theta)


def sph_to_cart(r: float, d: Direction) -> Tuple[float, float, float]:
    """
    Cartesian coordinates of the point at distance ``r`` along ``d``.

    Example:
        sph_to_cart(2.0, Direction(math.pi / 2, math.pi / 2))  # (0.0, 2.0, 0.0)
    """
    sin_theta = math.sin(d.colatitude)
    return (
        r * sin_theta * math.cos(d.azimuth),
        r * sin_theta * math.sin(d.azimuth),
        r * math.cos(d.colatitude),
    )


def directions_to_angles(
    directions: Sequence[Direction],
) -> Tuple[np.ndarray, np.ndarray]:
    colatitudes = np.array([d.colatitude for d in directions], dtype=float)
    azimuths = np.array([d.azimuth for d in directions], dtype=float)
    return colatitudes, azimuths


def directions_to_unit_vectors(directions: Sequence[Direction]) -> np.ndarray:
    """Unit vectors of ``directions``, shape (D, 3)."""
    theta, phi = directions_to_angles(directions)
    return angles_to_unit_vectors(theta, phi)


def angles_to_unit_vectors(colatitudes: np.ndarray, azimuths: np.ndarray) -> np.ndarray:
    sin_theta = np.sin(colatitudes)
    return np.stack(
        [
            sin_theta * np.cos(azimuths),
            sin_theta * np.sin(azimuths),
            np.cos(colatitudes),
        ],
        axis=-1,
    )


def sh_degrees(order: int) -> Tuple[np.ndarray, np.ndarray]:
    """
    Degree ``n`` and order ``m`` of every coefficient up to ``order``.

    Example:
        sh_degrees(1)  # (array([0, 1, 1, 1]), array([ 0, -1,  0,  1]))
    """
    if order < 0:
        raise GeometryError(f"SH order must be non-negative, got {order}")
    n = np.concatenate([np.full(2 * degree + 1, degree) for degree in range(order + 1)])
    m = np.concatenate([np.arange(-degree, degree + 1) for degree in range(order + 1)])
    return n, m


def sh_matrix(order: int, colatitudes: np.ndarray, azimuths: np.ndarray) -> np.ndarray:
    """
    Complex spherical harmonics evaluated on many directions.

    Args:
        order (int): Maximum SH order ``N``.
        colatitudes (np.ndarray): ``θ`` of the ``Q`` directions.
        azimuths (np.ndarray): ``φ`` of the ``Q`` directions.

    Returns:
        np.ndarray: Matrix of shape (Q, (N+1)²); row ``q`` holds
        ``Y_n^m(θ_q, φ_q)`` in (n, m) order.
    """
    n, m = sh_degrees(order)
    theta = np.atleast_1d(np.asarray(colatitudes, dtype=float))[:, np.newaxis]
    phi = np.atleast_1d(np.asarray(azimuths, dtype=float))[:, np.newaxis]
    return np.asarray(
        _ynm(n[np.newaxis, :], m[np.newaxis, :], theta, phi), dtype=np.complex128
    )


def sh_matrix_for(order: int, directions: Sequence[Direction]) -> np.ndarray:
    theta, phi = directions_to_angles(directions)
    return sh_matrix(order, theta, phi)


def sh_basis(order: int, d: Direction) -> np.ndarray:
    """
    Spherical harmonics up to ``order`` at a single direction.

    Example:
        sh_basis(0, Direction(1.0, 2.0))  # array([0.28209479+0.j])
    """
    return sh_matrix(order, np.array([d.colatitude]), np.array([d.azimuth]))[0]


def spiral_grid(count: int) -> Tuple[Direction, ...]:
    """
    Nearly uniform golden-angle spiral over the sphere.

    Point ``i`` sits at ``z = 1 − (2i + 1)/count`` and azimuth
    ``i·golden_angle mod 2π``; a single point lands on the equator.

    Raises:
        GeometryError: If ``count`` is smaller than one.
    """
    if count < 1:
        raise GeometryError(f"a spiral grid needs at least one point, got {count}")
    index = np.arange(count, dtype=float)
    z = 1.0 - (2.0 * index + 1.0) / count
    colatitudes = np.arccos(np.clip(z, -1.0, 1.0))
    azimuths = np.mod(index * GOLDEN_ANGLE, 2.0 * math.pi)
    return tuple(Direction(theta, phi) for theta, phi in zip(colatitudes, azimuths))


def semicircle_array(
    count: int,
    radius: float,
    center: Sequence[float] = (0.0, 0.0, 0.0),
) -> ArrayGeometry:
    """
    Omni microphones on a horizontal semicircle.

    Microphone ``m`` (1-based) sits at azimuth ``π − π(m − 1)/(count − 1)``, so
    the arc runs from the -x side over +y to the +x side. A single
    microphone is placed at ``φ = π/2``.
    """
    if count < 1:
        raise GeometryError("an array needs at least one microphone")
    if count == 1:
        azimuths = [math.pi / 2.0]
    else:
        azimuths = [math.pi - math.pi * m / (count - 1) for m in range(count)]
    mics = tuple(Microphone(radius, Direction(math.pi / 2.0, phi)) for phi in azimuths)
    return ArrayGeometry(mics, tuple(center))  # type: ignore[arg-type]


def plane_wave_sh_coefficients(
    k: float, positions: np.ndarray, order: int
) -> np.ndarray:
    """
    SH coefficients of ``u ↦ exp(+i k r·u)`` for observation points ``r``.

    Args:
        k (float): Wavenumber in rad/m.
        positions (np.ndarray): Points, shape (3,) or (P, 3).
        order (int): Truncation order.

    Returns:
        np.ndarray: ``4π iⁿ jₙ(k|r|) conj(Y_n^m(r̂))``, shape ((N+1)²,) or
        (P, (N+1)²).
    """
    points = np.asarray(positions, dtype=float)
    single = points.ndim == 1
    points = np.atleast_2d(points)
    radius = np.linalg.norm(points, axis=1)
    safe = np.where(radius[:, np.newaxis] > 0.0, points, np.array([0.0, 0.0, 1.0]))
    theta = np.arccos(np.clip(safe[:, 2] / np.linalg.norm(safe, axis=1), -1.0, 1.0))
    phi = np.arctan2(safe[:, 1], safe[:, 0])
    n, _ = sh_degrees(order)
    radial = 4.0 * np.pi * (1j ** n)[np.newaxis, :] * special.spherical_jn(
        n[np.newaxis, :], k * radius[:, np.newaxis]
    )
    coefficients = radial * np.conj(sh_matrix(order, theta, phi))
    return coefficients[0] if single else coefficients


def truncation_order(k: float, max_radius: float, padding: int) -> int:
    return int(math.ceil(k * max_radius)) + int(padding)


class PreparedSteering:
    """Steering evaluator bound to one geometry and DOA list."""

    def __init__(self, geometry: ArrayGeometry, doas: Sequence[Direction]) -> None:
        self.geometry = geometry
        self.doas = tuple(doas)
        self.positions = geometry.positions
        self.units = directions_to_unit_vectors(self.doas)

    def matrix(self, k: float) -> np.ndarray:
        return np.exp(1j * k * (self.positions @ self.units.T))


class PreparedShSteering(PreparedSteering):
    def __init__(
        self,
        geometry: ArrayGeometry,
        doas: Sequence[Direction],
        max_order: int,
        padding: int,
    ) -> None:
        super().__init__(geometry, doas)
        self.padding = padding
        self.max_order = max_order
        mic_theta, mic_phi = directions_to_angles(geometry.directions)
        doa_theta, doa_phi = directions_to_angles(self.doas)
        self.mic_basis = np.conj(sh_matrix(max_order, mic_theta, mic_phi))
        self.doa_basis = sh_matrix(max_order, doa_theta, doa_phi)
        self.degrees, _ = sh_degrees(max_order)
        self.radii = geometry.radii

    def matrix(self, k: float) -> np.ndarray:
        order = truncation_order(k, float(self.radii.max()), self.padding)
        if order > self.max_order:
            raise GeometryError(
                f"wavenumber {k:.3f} needs SH order {order}, "
                f"prepared for {self.max_order}"
            )
        count = (order + 1) ** 2
        n = self.degrees[:count]
        radial = 4.0 * np.pi * (1j ** n)[np.newaxis, :] * special.spherical_jn(
            n[np.newaxis, :], k * self.radii[:, np.newaxis]
        )
        return (radial * self.mic_basis[:, :count]) @ self.doa_basis[:, :count].T


class SteeringStrategy:
    """
    Abstract base class for steering-matrix evaluation.

    Example:
        class CustomSteering(SteeringStrategy):
            def prepare(self, geometry, doas, max_wavenumber):
                return PreparedSteering(geometry, doas)
    """

    name = "abstract"

    def prepare(
        self, geometry: ArrayGeometry, doas: Sequence[Direction], max_wavenumber: float
    ) -> PreparedSteering:
        raise NotImplementedError(
            "SteeringStrategy.prepare() must be overridden in subclasses"
        )


class ClosedFormSteering(SteeringStrategy):
    """Evaluates ``exp(+i k r_m·û_l)`` directly."""

    name = "closed"

    def prepare(
        self, geometry: ArrayGeometry, doas: Sequence[Direction], max_wavenumber: float
    ) -> PreparedSteering:
        return PreparedSteering(geometry, doas)


class SphericalHarmonicSteering(SteeringStrategy):
    """
    Evaluates the steering matrix through its SH expansion truncated at
    ``N = ceil(k r_max) + padding``.

    The basis matrices are computed once, at the order needed for the
    largest wavenumber, and sliced per bin.
    """

    name = "sh"

    def __init__(self, padding: int = 10) -> None:
        if padding < 0:
            raise GeometryError("SH padding must be non-negative")
        self.padding = padding

    def prepare(
        self, geometry: ArrayGeometry, doas: Sequence[Direction], max_wavenumber: float
    ) -> PreparedSteering:
        order = truncation_order(max_wavenumber, geometry.max_radius, self.padding)
        logger.debug(
            "Preparing SH steering up to order %s for %s DOAs", order, len(doas)
        )
        return PreparedShSteering(geometry, doas, order, self.padding)


def steering_strategy(name: str, padding: int = 10) -> SteeringStrategy:
    if name == "closed":
        return ClosedFormSteering()
    if name == "sh":
        return SphericalHarmonicSteering(padding)
    raise GeometryError(f"unknown steering evaluation {name!r}")


def _wavenumber(f: float, grid: FrequencyGrid) -> float:
    if f < 0.0:
        raise GeometryError(f"frequency must be non-negative, got {f}")
    if f > grid.frequencies[-1] * (1.0 + 1e-12):
        raise GeometryError(f"frequency {f} Hz is above the grid's Nyquist")
    return grid.wavenumber(f)


def steering_vector(
    f: float,
    grid: FrequencyGrid,
    geom: ArrayGeometry,
    doa: Direction,
    strategy: Optional[SteeringStrategy] = None,
) -> np.ndarray:
    """
    Free-field response of every microphone to a unit plane wave from ``doa``.

    Raises:
        GeometryError: If ``f`` is negative or above Nyquist.

    Example:
        v = steering_vector(1000.0, grid, geometry, Direction(math.pi / 2, 0.0))
        np.abs(v)  # all ones
    """
    return steering_matrix(f, grid, geom, [doa], strategy).matrix[:, 0]


def steering_matrix(
    f: float,
    grid: FrequencyGrid,
    geom: ArrayGeometry,
    doas: Sequence[Direction],
    strategy: Optional[SteeringStrategy] = None,
) -> SteeringMatrix:
    doas = tuple(doas)
    if not doas:
        raise GeometryError("a steering matrix needs at least one DOA")
    k = _wavenumber(f, grid)
    prepared = (strategy or ClosedFormSteering()).prepare(geom, doas, k)
    return SteeringMatrix(float(f), prepared.matrix(k), doas, geom)
