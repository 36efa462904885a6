"""
BSM filter design.

For array measurements ``x = V s + n`` and ear signal ``p = hᵀ s`` the
filter ``c`` renders ``z = cᴴ x``. Minimising ``E|z − p|²`` gives the
covariance-aware solution ``(V R_s Vᴴ + R_n)⁻¹ V R_s h*``; for white
sources and noise this reduces to ``(V Vᴴ + I/snr)⁻¹ V h*``.
"""
import logging
import math
import struct
from pathlib import Path
from typing import Optional, Sequence, Union

import numpy as np
from scipy import linalg

from sage_bsm.acoustics.sph import ClosedFormSteering, SteeringStrategy
from sage_bsm.exceptions import (
    DimensionMismatchError,
    FilterBankFormatError,
    IllConditionedError,
    MissingArtifactError,
    NonFiniteInputError,
    SolverError,
)
from sage_bsm.helpers import (
    ArrayGeometry,
    BsmFilterBank,
    CovarianceModel,
    Direction,
    FilterProvenance,
    FrequencyGrid,
    HrtfSet,
    SolverConfig,
)

logger = logging.getLogger(__name__)

FILTERBANK_MAGIC = b"BSMF"
FILTERBANK_VERSION = 2
_HEADER = struct.Struct("<4sIIIBBIddddddd32s")
_PROVENANCE_CODES = {
    FilterProvenance.DIRECT: 0,
    FilterProvenance.REVERBERANT: 1,
    FilterProvenance.WHOLE_FIELD: 2,
}

PathLike = Union[str, Path]


def _check_inputs(V: np.ndarray, h: np.ndarray, bin_index: Optional[int]) -> None:
    if V.ndim != 2:
        raise DimensionMismatchError(f"V must be a matrix, got shape {V.shape}")
    if h.shape != (V.shape[1],):
        raise DimensionMismatchError(
            f"h must have {V.shape[1]} entries to match V, got shape {h.shape}"
        )
    if not (np.all(np.isfinite(V)) and np.all(np.isfinite(h))):
        raise NonFiniteInputError("V and h must be finite", bin_index)


def regularizer(V: np.ndarray, snr: float, tikhonov_floor: float) -> float:
    """``1/snr``, or ``tikhonov_floor·trace(VVᴴ)/M`` when ``snr`` is infinite."""
    if math.isinf(snr):
        return tikhonov_floor * float(np.sum(np.abs(V) ** 2)) / V.shape[0]
    return 1.0 / snr


class _RegularizedSolver:
    """
    Factorised ``(VVᴴ + λI)`` for repeated right-hand sides at one bin.

    When ``L < M`` the equivalent ``V (VᴴV + λI)⁻¹`` form is used, which
    factorises the smaller matrix.
    """

    def __init__(
        self, V: np.ndarray, snr: float, tikhonov_floor: float, bin_index: Optional[int]
    ) -> None:
        self.V = V
        self.bin_index = bin_index
        self.lam = regularizer(V, snr, tikhonov_floor)
        mics, sources = V.shape
        self.push_through = sources < mics
        gram = V.conj().T @ V if self.push_through else V @ V.conj().T
        self.gram = gram + self.lam * np.eye(gram.shape[0])
        self.factor = None
        if self.lam > 0.0:
            try:
                self.factor = linalg.cho_factor(
                    self.gram, lower=False, check_finite=False
                )
            except linalg.LinAlgError:
                logger.debug("Cholesky failed at bin %s, using LU", bin_index)

    def _solve(self, rhs: np.ndarray) -> np.ndarray:
        if self.factor is not None:
            return linalg.cho_solve(self.factor, rhs, check_finite=False)
        try:
            return linalg.solve(self.gram, rhs, check_finite=False)
        except linalg.LinAlgError as error:
            raise SolverError(
                f"regularised system is singular: {error}", self.bin_index
            )

    def solve(self, h: np.ndarray) -> np.ndarray:
        target = np.conj(h)
        if self.lam == 0.0:
            solution, *_ = linalg.lstsq(self.V.conj().T, target)
            return solution
        if self.push_through:
            return self.V @ self._solve(target)
        return self._solve(self.V @ target)


def solve_general(
    V: np.ndarray,
    cov: CovarianceModel,
    h: np.ndarray,
    condition_ceiling: float = 1e12,
    bin_index: Optional[int] = None,
) -> np.ndarray:
    """
    Covariance-aware BSM filter ``(V R_s Vᴴ + R_n)⁻¹ V R_s h*``.

    Args:
        V (np.ndarray): Steering matrix, shape (M, L).
        cov (CovarianceModel): Source (L x L) and noise (M x M) covariances.
        h (np.ndarray): HRTFs at the L DOAs.
        condition_ceiling (float): Largest accepted condition number.
        bin_index (int, optional): Reported in errors.

    Returns:
        np.ndarray: Filter of length M.

    Raises:
        IllConditionedError: If the system matrix is singular or its
            condition number exceeds ``condition_ceiling``.
        DimensionMismatchError: If the shapes disagree.
    """
    V = np.asarray(V, dtype=np.complex128)
    h = np.asarray(h, dtype=np.complex128)
    _check_inputs(V, h, bin_index)
    mics, sources = V.shape
    if cov.source.shape != (sources, sources) or cov.noise.shape != (mics, mics):
        raise DimensionMismatchError(
            f"covariances {cov.source.shape} and {cov.noise.shape} "
            f"do not fit V {V.shape}"
        )
    weighted = V @ cov.source
    system = weighted @ V.conj().T + cov.noise
    condition = float(np.linalg.cond(system))
    if not math.isfinite(condition) or condition > condition_ceiling:
        raise IllConditionedError(condition, condition_ceiling, bin_index)
    return linalg.solve(system, weighted @ np.conj(h), assume_a="her")


def solve_ls(
    V: np.ndarray,
    h: np.ndarray,
    snr: float,
    tikhonov_floor: float = 1e-12,
    bin_index: Optional[int] = None,
) -> np.ndarray:
    """
    SNR-regularised BSM filter ``(VVᴴ + I/snr)⁻¹ V h*``.

    With ``snr = inf`` the regulariser is ``tikhonov_floor·trace(VVᴴ)/M``.

    Raises:
        NonFiniteInputError: If ``V`` or ``h`` contain NaN or inf.

    Example:
        solve_ls(np.ones((1, 1)), np.array([2j]), math.inf)  # array([-2j])
    """
    V = np.asarray(V, dtype=np.complex128)
    h = np.asarray(h, dtype=np.complex128)
    _check_inputs(V, h, bin_index)
    if not snr > 0.0:
        raise SolverError(f"snr must be positive, got {snr}", bin_index)
    return _RegularizedSolver(V, snr, tikhonov_floor, bin_index).solve(h)


def _magls(
    solver: _RegularizedSolver,
    h: np.ndarray,
    phase_init: Optional[np.ndarray],
    iterations: int,
    tolerance: float,
) -> np.ndarray:
    V = solver.V
    magnitude = np.abs(h)
    if phase_init is None:
        c = solver.solve(h)
    else:
        c = np.asarray(phase_init, dtype=np.complex128)
    phase = np.angle(V.conj().T @ c)
    for iteration in range(iterations):
        # V^H c is matched to conj(h_iter) = |h| exp(i phase)
        c = solver.solve(magnitude * np.exp(-1j * phase))
        updated = np.angle(V.conj().T @ c)
        change = float(np.max(np.abs(np.angle(np.exp(1j * (updated - phase))))))
        phase = updated
        if change < tolerance:
            logger.debug(
                "MagLS converged after %s iterations at bin %s",
                iteration + 1,
                solver.bin_index,
            )
            break
    return c


def solve_magls(
    V: np.ndarray,
    h: np.ndarray,
    snr: float,
    phase_init: Optional[np.ndarray] = None,
    tikhonov_floor: float = 1e-12,
    iterations: int = 50,
    tolerance: float = 1e-6,
    bin_index: Optional[int] = None,
) -> np.ndarray:
    """
    Magnitude-least-squares BSM filter.

    Iterates phase substitution: the target of ``Vᴴc`` is ``|h|`` with the
    phase of the previous ``Vᴴc``, solved with :func:`solve_ls`, until the
    largest phase change is below ``tolerance`` or ``iterations`` is reached.

    Args:
        V (np.ndarray): Steering matrix, shape (M, L).
        h (np.ndarray): HRTFs at the L DOAs.
        snr (float): Linear SNR, ``math.inf`` allowed.
        phase_init (np.ndarray, optional): Filter whose output phase seeds the
            iteration, usually the previous bin's solution; the plain LS
            solution is used when omitted.
        tikhonov_floor (float): Relative regulariser for ``snr = inf``.
        iterations (int): Maximum number of substitutions.
        tolerance (float): Convergence threshold in radians.
        bin_index (int, optional): Reported in errors.

    Returns:
        np.ndarray: Filter of length M.
    """
    V = np.asarray(V, dtype=np.complex128)
    h = np.asarray(h, dtype=np.complex128)
    _check_inputs(V, h, bin_index)
    if phase_init is not None and np.shape(phase_init) != (V.shape[0],):
        raise DimensionMismatchError(f"phase_init must have {V.shape[0]} entries")
    solver = _RegularizedSolver(V, snr, tikhonov_floor, bin_index)
    return _magls(solver, h, phase_init, iterations, tolerance)


def binaural_error(
    V: np.ndarray,
    c: np.ndarray,
    h: np.ndarray,
    snr: float = math.inf,
    cov: Optional[CovarianceModel] = None,
) -> float:
    """
    Expected squared ear-signal error of filter ``c``.

    ``(Vᴴc − h*)ᴴ R_s (Vᴴc − h*) + cᴴ R_n c``; without ``cov`` the sources
    are white with unit power and the noise power is ``1/snr``.
    """
    V = np.asarray(V, dtype=np.complex128)
    c = np.asarray(c, dtype=np.complex128)
    residual = V.conj().T @ c - np.conj(np.asarray(h, dtype=np.complex128))
    if cov is None:
        noise = 0.0 if math.isinf(snr) else float(np.vdot(c, c).real) / snr
        return float(np.vdot(residual, residual).real) + noise
    return float(
        np.vdot(residual, cov.source @ residual).real + np.vdot(c, cov.noise @ c).real
    )


def _check_hrtf(hrtf: HrtfSet, doas: Sequence[Direction], grid: FrequencyGrid) -> None:
    if hrtf.count != len(doas):
        raise DimensionMismatchError(
            f"HRTF set has {hrtf.count} directions, design uses {len(doas)} DOAs"
        )
    for index, (given, wanted) in enumerate(zip(hrtf.directions, doas)):
        if not (
            math.isclose(given.colatitude, wanted.colatitude, abs_tol=1e-9)
            and math.isclose(
                math.cos(given.azimuth - wanted.azimuth), 1.0, abs_tol=1e-12
            )
        ):
            raise DimensionMismatchError(
                f"HRTF direction {index} does not match its DOA"
            )
    if not hrtf.grid.same_as(grid):
        raise DimensionMismatchError("HRTF and design use different frequency grids")


def design_filterbank(
    geom: ArrayGeometry,
    grid: FrequencyGrid,
    doas: Sequence[Direction],
    hrtf: HrtfSet,
    config: SolverConfig,
    provenance: FilterProvenance = FilterProvenance.WHOLE_FIELD,
    strategy: Optional[SteeringStrategy] = None,
    digest: str = "",
) -> BsmFilterBank:
    """
    Design left and right BSM filters at every bin of ``grid``.

    Bins at or above ``config.magls_cutoff_hz`` use MagLS when it is enabled,
    seeded by the previous bin's filter of the same ear; all other bins,
    and bin 0 always, use the regularised LS solution.

    Args:
        geom (ArrayGeometry): Microphone array.
        grid (FrequencyGrid): Design frequencies.
        doas (list): The L directions of the design.
        hrtf (HrtfSet): HRTFs at exactly ``doas`` on ``grid``.
        config (SolverConfig): Solver settings.
        provenance (FilterProvenance): Tag stored with the bank.
        strategy (SteeringStrategy, optional): Steering evaluation; closed
            form by default.
        digest (str): Scene digest stored with the bank.

    Returns:
        BsmFilterBank: Coefficients of shape (2, K, M).

    Raises:
        SolverError: With the offending bin index.

    Example:
        bank = design_filterbank(
            geometry, grid, spiral_grid(240), hrtf_at_doas,
            SolverConfig(snr=100.0, magls_enabled=True),
            FilterProvenance.REVERBERANT,
        )
    """
    doas = tuple(doas)
    if not doas:
        raise SolverError("a filter design needs at least one DOA")
    _check_hrtf(hrtf, doas, grid)
    config.validate_for(grid)
    strategy = strategy or ClosedFormSteering()
    prepared = strategy.prepare(geom, doas, float(grid.wavenumbers[-1]))
    logger.info(
        "Designing %s bank for %s bins, %s mics, %s DOAs",
        provenance.value,
        grid.bins,
        geom.count,
        len(doas),
    )

    coefficients = np.zeros((2, grid.bins, geom.count), dtype=np.complex128)
    ears = (hrtf.left, hrtf.right)
    magls_bins = 0
    for index, (frequency, k) in enumerate(zip(grid.frequencies, grid.wavenumbers)):
        V = prepared.matrix(float(k))
        for ear in range(2):
            h = ears[ear][:, index]
            _check_inputs(V, h, index)
            solver = _RegularizedSolver(V, config.snr, config.tikhonov_floor, index)
            use_magls = (
                config.magls_enabled
                and index > 0
                and frequency >= config.magls_cutoff_hz
            )
            if use_magls:
                seed = coefficients[ear, index - 1]
                c = _magls(
                    solver, h, seed, config.magls_iterations, config.magls_tolerance
                )
            else:
                c = solver.solve(h)
            if not np.all(np.isfinite(c)):
                raise SolverError("filter is not finite", index)
            coefficients[ear, index] = c
        if config.magls_enabled and index > 0 and frequency >= config.magls_cutoff_hz:
            magls_bins += 1
    logger.info("Designed %s bank, MagLS on %s bins", provenance.value, magls_bins)
    return BsmFilterBank(coefficients, grid, provenance, config, digest)


def save_filterbank(bank: BsmFilterBank, path: PathLike) -> None:
    """
    Write ``bank`` as a BSMF container.

    Layout (little endian): magic ``b"BSMF"``, version u32, M u32, K u32,
    provenance u8, MagLS flag u8, MagLS iteration limit u32, then snr, MagLS
    cutoff, MagLS tolerance, Tikhonov floor, condition ceiling, sample rate
    and speed of sound as f64, the 32-byte scene digest, the K bin
    frequencies as f64, then the coefficients as complex128 in
    (ear, bin, mic) order.
    """
    digest = bytes.fromhex(bank.digest) if bank.digest else b""
    header = _HEADER.pack(
        FILTERBANK_MAGIC,
        FILTERBANK_VERSION,
        bank.mics,
        bank.bins,
        _PROVENANCE_CODES[bank.provenance],
        int(bank.config.magls_enabled),
        bank.config.magls_iterations,
        bank.config.snr,
        bank.config.magls_cutoff_hz,
        bank.config.magls_tolerance,
        bank.config.tikhonov_floor,
        bank.config.condition_ceiling,
        bank.grid.sample_rate,
        bank.grid.speed_of_sound,
        digest.ljust(32, b"\0")[:32],
    )
    body = (
        np.asarray(bank.grid.frequencies, dtype="<f8").tobytes()
        + np.ascontiguousarray(bank.coefficients, dtype="<c16").tobytes()
    )
    Path(path).write_bytes(header + body)


def load_filterbank(path: PathLike) -> BsmFilterBank:
    """
    Read a BSMF container written by :func:`save_filterbank`.

    Raises:
        MissingArtifactError: If the file does not exist.
        FilterBankFormatError: If the header or payload is malformed.
    """
    path = Path(path)
    if not path.is_file():
        raise MissingArtifactError(f"filter bank not found: {path}")
    payload = path.read_bytes()
    if len(payload) < _HEADER.size:
        raise FilterBankFormatError(f"{path}: file too short for a filter-bank header")
    (
        magic,
        version,
        mics,
        bins,
        provenance_code,
        magls_enabled,
        iterations,
        snr,
        cutoff,
        tolerance,
        floor,
        ceiling,
        sample_rate,
        speed_of_sound,
        digest,
    ) = _HEADER.unpack_from(payload)
    if magic != FILTERBANK_MAGIC:
        raise FilterBankFormatError(f"{path}: bad magic {magic!r}")
    if version != FILTERBANK_VERSION:
        raise FilterBankFormatError(f"{path}: unsupported version {version}")
    expected = _HEADER.size + 8 * bins + 16 * 2 * bins * mics
    if len(payload) != expected:
        raise FilterBankFormatError(
            f"{path}: expected {expected} bytes for M={mics}, K={bins}, "
            f"got {len(payload)}"
        )
    codes = {code: tag for tag, code in _PROVENANCE_CODES.items()}
    if provenance_code not in codes:
        raise FilterBankFormatError(
            f"{path}: unknown provenance code {provenance_code}"
        )
    frequencies = np.frombuffer(payload, dtype="<f8", count=bins, offset=_HEADER.size)
    coefficients = np.frombuffer(
        payload, dtype="<c16", count=2 * bins * mics, offset=_HEADER.size + 8 * bins
    ).reshape(2, bins, mics)
    try:
        grid = FrequencyGrid(sample_rate, frequencies.copy(), speed_of_sound)
        config = SolverConfig(
            snr=snr,
            magls_cutoff_hz=cutoff,
            magls_enabled=bool(magls_enabled),
            tikhonov_floor=floor,
            condition_ceiling=ceiling,
            magls_iterations=iterations,
            magls_tolerance=tolerance,
        )
    except (ValueError, SolverError) as error:
        raise FilterBankFormatError(f"{path}: {error}") from error
    digest_hex = "" if not any(digest) else digest.hex()
    return BsmFilterBank(
        coefficients.copy(), grid, codes[provenance_code], config, digest_hex
    )
