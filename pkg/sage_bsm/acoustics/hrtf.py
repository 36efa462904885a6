import logging
import struct
from pathlib import Path
from typing import Optional, Sequence, Tuple, Union

import numpy as np
from scipy import linalg, special

from sage_bsm.acoustics.sph import (
    directions_to_angles,
    directions_to_unit_vectors,
    sh_degrees,
    sh_matrix,
    sh_matrix_for,
)
from sage_bsm.exceptions import (
    GeometryError,
    HrtfChannelMismatchError,
    HrtfFormatError,
    MissingHrtfError,
    ShFitError,
)
from sage_bsm.helpers import Direction, FrequencyGrid, HrtfSet, HrtfSHCoefficients

logger = logging.getLogger(__name__)

HRTF_MAGIC = b"BSMH"
HRTF_VERSION = 1
_HEADER = struct.Struct("<4sIIII")

PathLike = Union[str, Path]


def _even(size: int) -> int:
    return size + (size % 2)


def _spectra(
    impulse_responses: np.ndarray, sample_rate: float, fft_size: Optional[int]
) -> Tuple[np.ndarray, FrequencyGrid]:
    length = impulse_responses.shape[1]
    size = int(fft_size) if fft_size else _even(length)
    if size < length:
        logger.warning(
            "HRIRs of %s taps are truncated to the FFT size %s", length, size
        )
    grid = FrequencyGrid.from_fft(sample_rate, size)
    return np.fft.rfft(impulse_responses.astype(float), n=size, axis=1), grid


def load_hrtf(path: PathLike, fft_size: Optional[int] = None) -> HrtfSet:
    """
    Read an HRTF set from a BSMH container.

    Layout (little endian): magic ``b"BSMH"``, version u32, sample rate u32,
    direction count u32, IR length u32, then ``(colatitude, azimuth)`` as f64
    pairs, then all left IRs as f32, then all right IRs as f32.

    Args:
        path (str | Path): Container file.
        fft_size (int, optional): Transform length of the spectra; defaults to
            the IR length rounded up to an even number.

    Returns:
        HrtfSet: Spectra plus the stored impulse responses.

    Raises:
        MissingHrtfError: If the file does not exist.
        HrtfFormatError: If the header or the left-ear block is malformed.
        HrtfChannelMismatchError: If the right-ear block does not hold as
            many responses as the left one.

    Example:
        hrtf = load_hrtf("subject.bsmh", fft_size=2048)
        hrtf.left.shape  # (directions, 1025)
    """
    path = Path(path)
    if not path.is_file():
        raise MissingHrtfError(f"HRTF file not found: {path}")
    payload = path.read_bytes()
    if len(payload) < _HEADER.size:
        raise HrtfFormatError(f"{path}: file too short for an HRTF header")
    magic, version, sample_rate, count, length = _HEADER.unpack_from(payload)
    if magic != HRTF_MAGIC:
        raise HrtfFormatError(f"{path}: bad magic {magic!r}")
    if version != HRTF_VERSION:
        raise HrtfFormatError(f"{path}: unsupported version {version}")
    if count == 0 or length == 0 or sample_rate == 0:
        raise HrtfFormatError(f"{path}: empty HRTF set")

    offset = _HEADER.size
    table_bytes = 16 * count
    block = 4 * count * length
    if len(payload) < offset + table_bytes + block:
        raise HrtfFormatError(f"{path}: direction table or left-ear block truncated")
    table = np.frombuffer(payload, dtype="<f8", count=2 * count, offset=offset)
    offset += table_bytes
    left_ir = np.frombuffer(payload, dtype="<f4", count=count * length, offset=offset)
    offset += block
    remaining = len(payload) - offset
    if remaining != block:
        raise HrtfChannelMismatchError(
            f"{path}: right ear holds {remaining / (4 * length):g} responses, "
            f"left ear holds {count}"
        )
    right_ir = np.frombuffer(payload, dtype="<f4", count=count * length, offset=offset)

    try:
        directions = tuple(
            Direction(float(theta), float(phi))
            for theta, phi in table.reshape(count, 2)
        )
    except GeometryError as error:
        raise HrtfFormatError(f"{path}: {error}") from error
    left_ir = left_ir.reshape(count, length).astype(np.float32)
    right_ir = right_ir.reshape(count, length).astype(np.float32)
    left, grid = _spectra(left_ir, float(sample_rate), fft_size)
    right, _ = _spectra(right_ir, float(sample_rate), fft_size)
    logger.info("Loaded %s HRTF directions of %s taps from %s", count, length, path)
    return HrtfSet(directions, left, right, grid, left_ir, right_ir)


def save_hrtf(hrtf: HrtfSet, path: PathLike) -> None:
    """Write ``hrtf`` as a BSMH container; loading it back yields the same bytes."""
    left_ir, right_ir = hrtf.impulse_responses()
    left_ir = np.asarray(left_ir, dtype="<f4")
    right_ir = np.asarray(right_ir, dtype="<f4")
    theta, phi = directions_to_angles(hrtf.directions)
    table = np.stack([theta, phi], axis=1).astype("<f8")
    header = _HEADER.pack(
        HRTF_MAGIC,
        HRTF_VERSION,
        int(round(hrtf.sample_rate)),
        hrtf.count,
        left_ir.shape[1],
    )
    Path(path).write_bytes(
        header + table.tobytes() + left_ir.tobytes() + right_ir.tobytes()
    )


def on_grid(hrtf: HrtfSet, grid: FrequencyGrid) -> HrtfSet:
    """
    Re-evaluate the spectra of ``hrtf`` on another FFT grid.

    Raises:
        HrtfFormatError: If the sample rates differ.
    """
    if grid.same_as(hrtf.grid):
        return hrtf
    if grid.sample_rate != hrtf.sample_rate:
        raise HrtfFormatError(
            f"HRTF sampled at {hrtf.sample_rate} Hz cannot be used at "
            f"{grid.sample_rate} Hz"
        )
    left_ir, right_ir = hrtf.impulse_responses()
    left, _ = _spectra(np.asarray(left_ir), grid.sample_rate, grid.fft_size)
    right, _ = _spectra(np.asarray(right_ir), grid.sample_rate, grid.fft_size)
    return HrtfSet(hrtf.directions, left, right, grid, hrtf.left_ir, hrtf.right_ir)


def ear_positions(ear_offset: float) -> np.ndarray:
    """Left ear at ``+y``, right ear at ``−y``; the head faces ``+x``."""
    return np.array([[0.0, ear_offset, 0.0], [0.0, -ear_offset, 0.0]])


def point_receiver_hrtf(
    ear_offset: float, grid: FrequencyGrid, directions: Sequence[Direction]
) -> HrtfSet:
    """
    Analytic HRTFs of two omni receivers on the interaural axis.

    ``h(f, d) = exp(+i k r_ear·û(d))``, unit magnitude everywhere.

    Example:
        hrtf = point_receiver_hrtf(0.0875, grid, spiral_grid(240))
    """
    if not ear_offset > 0.0:
        raise GeometryError(f"ear offset must be positive, got {ear_offset}")
    directions = tuple(directions)
    units = directions_to_unit_vectors(directions)
    projections = units @ ear_positions(ear_offset).T
    k = grid.wavenumbers
    left = np.exp(1j * projections[:, 0:1] * k[np.newaxis, :])
    right = np.exp(1j * projections[:, 1:2] * k[np.newaxis, :])
    return HrtfSet(directions, left, right, grid)


def point_receiver_sh(
    ear_offset: float, grid: FrequencyGrid, order: int
) -> HrtfSHCoefficients:
    """
    Exact SH coefficients of :func:`point_receiver_hrtf` up to ``order``.

    ``h_nm(k) = 4π iⁿ jₙ(k d) conj(Y_n^m(r̂_ear))``.
    """
    if not ear_offset > 0.0:
        raise GeometryError(f"ear offset must be positive, got {ear_offset}")
    n, _ = sh_degrees(order)
    ears = ear_positions(ear_offset)
    theta = np.arccos(ears[:, 2] / ear_offset)
    phi = np.arctan2(ears[:, 1], ears[:, 0])
    basis = np.conj(sh_matrix(order, theta, phi))
    radial = (
        4.0
        * np.pi
        * (1j ** n)[:, np.newaxis]
        * special.spherical_jn(
            n[:, np.newaxis], grid.wavenumbers[np.newaxis, :] * ear_offset
        )
    )
    return HrtfSHCoefficients(
        order,
        radial * basis[0][:, np.newaxis],
        radial * basis[1][:, np.newaxis],
        grid,
    )


def sh_fit(hrtf: HrtfSet, order: int) -> HrtfSHCoefficients:
    """
    Per-bin least-squares SH fit of both ears.

    Raises:
        ShFitError: If there are fewer directions than coefficients.
    """
    count = (order + 1) ** 2
    if hrtf.count < count:
        raise ShFitError(order, hrtf.count)
    basis = sh_matrix_for(order, hrtf.directions)
    stacked = np.concatenate([hrtf.left, hrtf.right], axis=1)
    coefficients, _, rank, _ = linalg.lstsq(basis, stacked)
    if rank < count:
        logger.warning(
            "SH basis of order %s on %s directions has rank %s", order, hrtf.count, rank
        )
    bins = hrtf.grid.bins
    return HrtfSHCoefficients(
        order, coefficients[:, :bins], coefficients[:, bins:], hrtf.grid
    )


def sh_evaluate(
    coefficients: HrtfSHCoefficients, targets: Sequence[Direction]
) -> Tuple[np.ndarray, np.ndarray]:
    basis = sh_matrix_for(coefficients.order, tuple(targets))
    return basis @ coefficients.left, basis @ coefficients.right


def sh_interpolate(hrtf: HrtfSet, order: int, targets: Sequence[Direction]) -> HrtfSet:
    """
    HRTFs at ``targets`` from an order-``order`` SH fit of ``hrtf``.

    Raises:
        ShFitError: If the fit would be underdetermined.

    Example:
        at_doas = sh_interpolate(measured, 30, spiral_grid(240))
    """
    targets = tuple(targets)
    if not targets:
        raise GeometryError("no target directions to interpolate to")
    logger.info(
        "Interpolating %s HRTF directions to %s targets at SH order %s",
        hrtf.count,
        len(targets),
        order,
    )
    left, right = sh_evaluate(sh_fit(hrtf, order), targets)
    return HrtfSet(targets, left, right, hrtf.grid)
