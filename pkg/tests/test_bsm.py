import dataclasses
import math

import numpy as np
import pytest

from sage_bsm.acoustics.bsm import (
    binaural_error,
    design_filterbank,
    load_filterbank,
    regularizer,
    save_filterbank,
    solve_general,
    solve_ls,
    solve_magls,
)
from sage_bsm.acoustics.hrtf import point_receiver_hrtf
from sage_bsm.acoustics.sph import (
    SphericalHarmonicSteering,
    semicircle_array,
    spiral_grid,
    steering_matrix,
)
from sage_bsm.exceptions import (
    DimensionMismatchError,
    FilterBankFormatError,
    IllConditionedError,
    MissingArtifactError,
    NonFiniteInputError,
    SolverError,
)
from sage_bsm.helpers import (
    CovarianceModel,
    Direction,
    FilterProvenance,
    FrequencyGrid,
    SolverConfig,
)

DIGEST = "ab" * 32
SEPARATED_DOAS = (
    Direction(math.pi / 2, 0.3),
    Direction(math.pi / 2, 2.0),
    Direction(math.pi / 4, 4.0),
)


def _complex(rng, shape):
    return rng.standard_normal(shape) + 1j * rng.standard_normal(shape)


def _magnitude_error(V, c, h):
    return float(np.linalg.norm(np.abs(V.conj().T @ c) - np.abs(h)))


def test_single_channel_example():
    np.testing.assert_allclose(
        solve_ls(np.ones((1, 1)), np.array([2j]), math.inf), [-2j]
    )


def test_regularizer():
    V = np.ones((4, 3))
    assert regularizer(V, 100.0, 1e-12) == pytest.approx(0.01)
    assert regularizer(V, math.inf, 1e-3) == pytest.approx(1e-3 * 12 / 4)


def test_uncorrelated_covariances_reduce_to_ls(rng):
    for _ in range(200):
        mics = int(rng.integers(1, 9))
        sources = int(rng.integers(1, 13))
        snr = float(10.0 ** rng.uniform(0.0, 2.0))
        V = np.exp(1j * rng.uniform(0.0, 2.0 * np.pi, (mics, sources)))
        h = _complex(rng, sources)
        cov = CovarianceModel.uncorrelated(sources, mics, 1.0, 1.0 / snr)
        expected = solve_ls(V, h, snr)
        difference = np.linalg.norm(solve_general(V, cov, h) - expected)
        assert difference <= 1e-12 * np.linalg.norm(expected)


def test_filter_norm_shrinks_with_regularisation(rng):
    V = _complex(rng, (6, 12))
    h = _complex(rng, 12)
    norms = [
        np.linalg.norm(solve_ls(V, h, snr)) for snr in (1e4, 1e3, 1e2, 10.0, 1.0, 0.1)
    ]
    for previous, current in zip(norms, norms[1:]):
        assert current <= previous * (1.0 + 1e-12)


def test_ls_minimises_the_binaural_error(rng):
    V = _complex(rng, (5, 9))
    h = _complex(rng, 9)
    c = solve_ls(V, h, 50.0)
    best = binaural_error(V, c, h, 50.0)
    for _ in range(20):
        assert binaural_error(V, c + 1e-3 * _complex(rng, 5), h, 50.0) > best


@pytest.mark.parametrize("sources", [1, 2, 3])
def test_exact_matching_when_overdetermined(sources):
    grid = FrequencyGrid.from_fft(16000, 64)
    geometry = semicircle_array(6, 0.1)
    doas = SEPARATED_DOAS[:sources]
    hrtf = point_receiver_hrtf(0.0875, grid, doas)
    for index in range(4, grid.bins):
        V = steering_matrix(grid.frequencies[index], grid, geometry, doas).matrix
        h = hrtf.left[:, index]
        c = solve_ls(V, h, math.inf)
        residual = np.linalg.norm(V.conj().T @ c - np.conj(h)) / np.linalg.norm(h)
        assert residual < 1e-6


def test_magls_matches_magnitudes_at_least_as_well_as_ls(rng):
    geometry = semicircle_array(6, 0.1)
    grid = FrequencyGrid.from_fft(16000, 64)
    doas = spiral_grid(240)
    draws, wins = 0, 0
    for frequency in (2000.0, 4000.0, 8000.0):
        V = steering_matrix(frequency, grid, geometry, doas).matrix
        for _ in range(100):
            h = _complex(rng, len(doas))
            ls = solve_ls(V, h, math.inf)
            magls = solve_magls(V, h, math.inf)
            draws += 1
            wins += _magnitude_error(V, magls, h) <= _magnitude_error(V, ls, h) + 1e-9
    assert wins >= 0.95 * draws


def test_magls_accepts_a_phase_seed(rng):
    V = _complex(rng, (4, 10))
    h = _complex(rng, 10)
    seed = solve_ls(V, h, 100.0)
    first = solve_magls(V, h, 100.0, phase_init=seed)
    second = solve_magls(V, h, 100.0, phase_init=seed)
    np.testing.assert_array_equal(first, second)
    with pytest.raises(DimensionMismatchError):
        solve_magls(V, h, 100.0, phase_init=np.ones(3))


def test_general_solver_rejects_singular_systems():
    cov = CovarianceModel(np.eye(2), np.zeros((3, 3)))
    with pytest.raises(IllConditionedError) as caught:
        solve_general(np.zeros((3, 2)), cov, np.ones(2), bin_index=7)
    assert caught.value.bin_index == 7
    assert "bin 7" in str(caught.value)


def test_general_solver_checks_covariance_shapes():
    cov = CovarianceModel.uncorrelated(3, 3, 1.0, 0.1)
    with pytest.raises(DimensionMismatchError):
        solve_general(np.ones((3, 2)), cov, np.ones(2))


def test_covariances_must_be_hermitian_psd():
    with pytest.raises(SolverError):
        CovarianceModel(np.array([[1.0, 2.0], [0.0, 1.0]]), np.eye(2))
    with pytest.raises(SolverError):
        CovarianceModel(np.eye(2), -np.eye(2))


def test_non_finite_inputs_are_rejected():
    V = np.ones((2, 2), dtype=complex)
    V[0, 1] = np.nan
    with pytest.raises(NonFiniteInputError):
        solve_ls(V, np.ones(2), 10.0, bin_index=3)


def test_hrtf_length_must_match_the_doas():
    with pytest.raises(DimensionMismatchError):
        solve_ls(np.ones((2, 3)), np.ones(2), 10.0)


def test_snr_must_be_positive():
    with pytest.raises(SolverError):
        solve_ls(np.ones((2, 2)), np.ones(2), 0.0)


@pytest.fixture
def reverberant_bank(grid):
    geometry = semicircle_array(6, 0.1)
    doas = spiral_grid(24)
    hrtf = point_receiver_hrtf(0.0875, grid, doas)
    config = SolverConfig(snr=100.0, magls_cutoff_hz=1500.0, magls_enabled=True)
    return design_filterbank(
        geometry,
        grid,
        doas,
        hrtf,
        config,
        FilterProvenance.REVERBERANT,
        SphericalHarmonicSteering(10),
        DIGEST,
    )


def test_filterbank_layout(reverberant_bank, grid):
    assert reverberant_bank.coefficients.shape == (2, grid.bins, 6)
    assert reverberant_bank.describe() == "reverberant/ls+magls>=1500Hz"
    assert reverberant_bank.digest == DIGEST


def test_filter_norm_is_bounded_by_the_snr(reverberant_bank, grid):
    doas = spiral_grid(24)
    hrtf = point_receiver_hrtf(0.0875, grid, doas)
    bound = math.sqrt(100.0) / 2.0
    for ear, responses in enumerate((hrtf.left, hrtf.right)):
        norms = np.linalg.norm(reverberant_bank.coefficients[ear], axis=1)
        limits = bound * np.linalg.norm(responses, axis=0)
        assert np.all(norms <= limits * (1.0 + 1e-9))


def test_bins_below_the_cutoff_use_ls(reverberant_bank, grid):
    geometry = semicircle_array(6, 0.1)
    doas = spiral_grid(24)
    hrtf = point_receiver_hrtf(0.0875, grid, doas)
    for index in (0, 1, 5):
        assert grid.frequencies[index] < 1500.0
        V = steering_matrix(grid.frequencies[index], grid, geometry, doas).matrix
        np.testing.assert_allclose(
            reverberant_bank.left[index],
            solve_ls(V, hrtf.left[:, index], 100.0),
            atol=1e-5,
        )


def test_direct_design_without_magls(grid):
    geometry = semicircle_array(6, 0.1)
    doa = Direction(math.pi / 2, math.pi / 6)
    bank = design_filterbank(
        geometry,
        grid,
        [doa],
        point_receiver_hrtf(0.0875, grid, [doa]),
        SolverConfig(),
        FilterProvenance.DIRECT,
    )
    assert bank.describe() == "direct/ls"
    assert bank.provenance is FilterProvenance.DIRECT


def test_design_requires_hrtfs_at_the_doas(grid):
    geometry = semicircle_array(6, 0.1)
    hrtf = point_receiver_hrtf(0.0875, grid, spiral_grid(4))
    with pytest.raises(DimensionMismatchError):
        design_filterbank(geometry, grid, spiral_grid(5)[:4], hrtf, SolverConfig())


def test_design_rejects_a_cutoff_above_nyquist(grid):
    geometry = semicircle_array(6, 0.1)
    doas = spiral_grid(4)
    config = SolverConfig(snr=10.0, magls_cutoff_hz=9000.0, magls_enabled=True)
    with pytest.raises(SolverError):
        design_filterbank(
            geometry, grid, doas, point_receiver_hrtf(0.0875, grid, doas), config
        )


def test_container_round_trip(tmp_path, reverberant_bank):
    path = tmp_path / "bank.bsmf"
    save_filterbank(reverberant_bank, path)
    loaded = load_filterbank(path)
    np.testing.assert_array_equal(loaded.coefficients, reverberant_bank.coefficients)
    assert loaded.grid.same_as(reverberant_bank.grid)
    assert loaded.config == reverberant_bank.config
    assert loaded.provenance is FilterProvenance.REVERBERANT
    assert loaded.digest == DIGEST


def test_container_keeps_every_solver_setting(tmp_path, reverberant_bank):
    config = SolverConfig(
        snr=40.0,
        magls_cutoff_hz=2000.0,
        magls_enabled=True,
        tikhonov_floor=1e-9,
        condition_ceiling=1e8,
        magls_iterations=17,
        magls_tolerance=1e-4,
    )
    bank = dataclasses.replace(reverberant_bank, config=config)
    path = tmp_path / "bank.bsmf"
    save_filterbank(bank, path)
    loaded = load_filterbank(path).config
    assert loaded == config
    assert loaded.magls_iterations == 17
    assert loaded.magls_tolerance == 1e-4
    assert loaded.condition_ceiling == 1e8

    payload = bytearray(path.read_bytes())
    payload[4:8] = (1).to_bytes(4, "little")
    path.write_bytes(bytes(payload))
    with pytest.raises(FilterBankFormatError):
        load_filterbank(path)


def test_container_errors(tmp_path, reverberant_bank):
    with pytest.raises(MissingArtifactError):
        load_filterbank(tmp_path / "absent.bsmf")

    path = tmp_path / "bank.bsmf"
    save_filterbank(reverberant_bank, path)
    payload = path.read_bytes()

    path.write_bytes(b"NOPE" + payload[4:])
    with pytest.raises(FilterBankFormatError):
        load_filterbank(path)

    path.write_bytes(payload[:-16])
    with pytest.raises(FilterBankFormatError):
        load_filterbank(path)

    path.write_bytes(payload[:10])
    with pytest.raises(FilterBankFormatError):
        load_filterbank(path)
