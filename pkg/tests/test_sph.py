import math

import numpy as np
import pytest

from sage_bsm.acoustics.sph import (
    ClosedFormSteering,
    SphericalHarmonicSteering,
    directions_to_unit_vectors,
    plane_wave_sh_coefficients,
    semicircle_array,
    sh_basis,
    sh_degrees,
    sh_matrix,
    sh_matrix_for,
    sph_to_cart,
    spiral_grid,
    steering_matrix,
    steering_strategy,
    steering_vector,
)
from sage_bsm.exceptions import GeometryError
from sage_bsm.helpers import Direction, FrequencyGrid

OFF_AXIS_DOAS = (
    Direction(math.pi / 2, math.pi / 6),
    Direction(math.pi / 4, 1.0),
    Direction(3 * math.pi / 4, 2.5),
    Direction(math.pi / 2, math.pi / 2),
)


def test_sh_degrees_order_one():
    n, m = sh_degrees(1)
    assert n.tolist() == [0, 1, 1, 1]
    assert m.tolist() == [0, -1, 0, 1]


def test_sh_degrees_rejects_negative_order():
    with pytest.raises(GeometryError):
        sh_degrees(-1)


def test_low_order_harmonics_have_known_values():
    basis = sh_basis(1, Direction(math.pi / 2, 0.0))
    assert basis[0] == pytest.approx(1.0 / math.sqrt(4.0 * math.pi))
    assert basis[2] == pytest.approx(0.0, abs=1e-15)
    # Condon-Shortley phase
    assert basis[3].real == pytest.approx(-math.sqrt(3.0 / (8.0 * math.pi)))
    assert basis[1].real == pytest.approx(math.sqrt(3.0 / (8.0 * math.pi)))


def test_negative_orders_are_conjugate_partners():
    order = 4
    n, m = sh_degrees(order)
    Y = sh_matrix(order, np.array([0.3, 1.7]), np.array([2.0, 5.1]))
    partner = n * n + n - m
    sign = np.where(m % 2 == 0, 1.0, -1.0)
    np.testing.assert_allclose(Y[:, partner], sign * np.conj(Y), atol=1e-14)


def test_sh_matrix_is_orthonormal_on_dense_spiral():
    directions = spiral_grid(4000)
    Y = sh_matrix_for(3, directions)
    gram = 4.0 * np.pi / len(directions) * (Y.conj().T @ Y)
    np.testing.assert_allclose(gram, np.eye(16), atol=1e-2)


def test_spiral_grid_layout():
    grid = spiral_grid(240)
    assert len(grid) == 240
    assert math.cos(grid[0].colatitude) == pytest.approx(1.0 - 1.0 / 240)
    assert math.cos(grid[-1].colatitude) == pytest.approx(-1.0 + 1.0 / 240)
    assert len({(d.colatitude, d.azimuth) for d in grid}) == 240
    centroid = directions_to_unit_vectors(grid).mean(axis=0)
    assert np.linalg.norm(centroid) < 0.05


def test_spiral_grid_is_deterministic():
    assert spiral_grid(240) == spiral_grid(240)


def test_single_point_spiral_sits_on_equator():
    (point,) = spiral_grid(1)
    assert point.colatitude == pytest.approx(math.pi / 2)


def test_spiral_grid_rejects_empty():
    with pytest.raises(GeometryError):
        spiral_grid(0)


def test_semicircle_array_layout():
    geometry = semicircle_array(6, 0.1, (1.0, 2.0, 3.0))
    azimuths = [mic.direction.azimuth for mic in geometry.mics]
    assert azimuths[0] == pytest.approx(math.pi)
    assert azimuths[-1] == pytest.approx(0.0)
    assert np.all(np.diff(azimuths) < 0.0)
    np.testing.assert_allclose(np.linalg.norm(geometry.positions, axis=1), 0.1)
    np.testing.assert_allclose(geometry.positions[:, 2], 0.0, atol=1e-15)
    np.testing.assert_allclose(
        geometry.absolute_positions[0], [0.9, 2.0, 3.0], atol=1e-15
    )


def test_single_mic_semicircle_faces_left():
    geometry = semicircle_array(1, 0.05)
    np.testing.assert_allclose(geometry.positions[0], [0.0, 0.05, 0.0], atol=1e-15)


def test_sph_to_cart():
    np.testing.assert_allclose(
        sph_to_cart(2.0, Direction(math.pi / 2, math.pi / 2)),
        (0.0, 2.0, 0.0),
        atol=1e-15,
    )


def test_plane_wave_expansion_matches_exponential():
    k = 2.0 * math.pi * 3000.0 / 343.0
    position = np.array([0.05, -0.04, 0.06])
    coefficients = plane_wave_sh_coefficients(k, position, 25)
    Y = sh_matrix_for(25, OFF_AXIS_DOAS)
    expected = np.exp(1j * k * directions_to_unit_vectors(OFF_AXIS_DOAS) @ position)
    np.testing.assert_allclose(Y @ coefficients, expected, atol=1e-10)


def test_closed_form_steering_has_unit_magnitude(semicircle):
    grid = FrequencyGrid.from_fft(16000, 512)
    v = steering_vector(1000.0, grid, semicircle, Direction(math.pi / 2, 0.3))
    np.testing.assert_allclose(np.abs(v), 1.0)


def test_closed_form_steering_phase_of_aligned_mic(semicircle):
    grid = FrequencyGrid.from_fft(16000, 512)
    doa = semicircle.mics[2].direction
    v = steering_vector(1000.0, grid, semicircle, doa)
    assert v[2] == pytest.approx(np.exp(1j * grid.wavenumber(1000.0) * 0.1))


def test_steering_matrix_stacks_vectors(semicircle):
    grid = FrequencyGrid.from_fft(16000, 512)
    V = steering_matrix(2000.0, grid, semicircle, OFF_AXIS_DOAS)
    assert V.shape == (6, len(OFF_AXIS_DOAS))
    for column, doa in enumerate(OFF_AXIS_DOAS):
        np.testing.assert_allclose(
            V.matrix[:, column], steering_vector(2000.0, grid, semicircle, doa)
        )


def test_sh_steering_matches_closed_form(semicircle):
    grid = FrequencyGrid.from_fft(16000, 512)
    closed = steering_matrix(
        4000.0, grid, semicircle, OFF_AXIS_DOAS, ClosedFormSteering()
    )
    expanded = steering_matrix(
        4000.0, grid, semicircle, OFF_AXIS_DOAS, SphericalHarmonicSteering(10)
    )
    np.testing.assert_allclose(expanded.matrix, closed.matrix, atol=1e-4)


def test_sh_steering_improves_with_padding(semicircle):
    grid = FrequencyGrid.from_fft(16000, 512)
    closed = steering_matrix(4000.0, grid, semicircle, OFF_AXIS_DOAS).matrix

    def error(padding: int) -> float:
        V = steering_matrix(
            4000.0, grid, semicircle, OFF_AXIS_DOAS, SphericalHarmonicSteering(padding)
        ).matrix
        return float(np.max(np.abs(V - closed)))

    assert error(10) < error(0)


def test_prepared_sh_steering_refuses_higher_wavenumbers(semicircle):
    prepared = SphericalHarmonicSteering(2).prepare(semicircle, OFF_AXIS_DOAS, 10.0)
    with pytest.raises(GeometryError):
        prepared.matrix(200.0)


def test_steering_strategy_names():
    assert isinstance(steering_strategy("closed"), ClosedFormSteering)
    assert steering_strategy("sh", 4).padding == 4
    with pytest.raises(GeometryError):
        steering_strategy("fourier")
    with pytest.raises(GeometryError):
        SphericalHarmonicSteering(-1)


@pytest.mark.parametrize("frequency", [-1.0, 8000.5])
def test_steering_rejects_frequencies_outside_grid(semicircle, frequency):
    grid = FrequencyGrid.from_fft(16000, 512)
    with pytest.raises(GeometryError):
        steering_vector(frequency, grid, semicircle, Direction(math.pi / 2, 0.0))


def test_steering_matrix_needs_a_doa(semicircle, grid):
    with pytest.raises(GeometryError):
        steering_matrix(1000.0, grid, semicircle, [])
