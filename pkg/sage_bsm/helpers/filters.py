import math
from dataclasses import dataclass
from enum import Enum

import numpy as np

from sage_bsm.exceptions import DimensionMismatchError, SolverError
from sage_bsm.helpers.directions import FrequencyGrid


class FilterProvenance(str, Enum):
    DIRECT = "direct"
    REVERBERANT = "reverberant"
    WHOLE_FIELD = "whole-field"


@dataclass(frozen=True)
class SolverConfig:
    """
    Settings of one BSM filter design.

    Args:
        snr (float): Linear signal-to-noise ratio ``σ_s²/σ_n²``; ``math.inf``
            for a noiseless design.
        magls_cutoff_hz (float): MagLS is used at and above this frequency.
        magls_enabled (bool): Whether MagLS is used at all.
        tikhonov_floor (float): Relative regulariser used when ``snr`` is
            infinite, scaled by ``trace(VV^H)/M``.
        condition_ceiling (float): Largest condition estimate accepted by the
            covariance-aware solver.
        magls_iterations (int): Maximum number of phase substitutions.
        magls_tolerance (float): Largest phase change (radians) that counts as
            converged.

    Example:
        reverb = SolverConfig(snr=100.0, magls_cutoff_hz=1500.0, magls_enabled=True)
    """

    snr: float = math.inf
    magls_cutoff_hz: float = 1500.0
    magls_enabled: bool = False
    tikhonov_floor: float = 1e-12
    condition_ceiling: float = 1e12
    magls_iterations: int = 50
    magls_tolerance: float = 1e-6

    def __post_init__(self) -> None:
        if not (self.snr > 0.0):
            raise SolverError(f"snr must be positive, got {self.snr}")
        if self.tikhonov_floor < 0.0:
            raise SolverError("tikhonov_floor must be non-negative")
        if self.magls_enabled and not self.magls_cutoff_hz > 0.0:
            raise SolverError("magls_cutoff_hz must be positive when MagLS is enabled")
        if self.magls_iterations < 1:
            raise SolverError("magls_iterations must be at least 1")

    @classmethod
    def from_db(cls, snr_db: float, **kwargs: object) -> "SolverConfig":
        snr = math.inf if math.isinf(snr_db) and snr_db > 0 else 10.0 ** (snr_db / 10.0)
        return cls(snr=snr, **kwargs)  # type: ignore[arg-type]

    def validate_for(self, grid: FrequencyGrid) -> None:
        if self.magls_enabled and self.magls_cutoff_hz > grid.sample_rate / 2.0:
            raise SolverError(
                f"MagLS cutoff {self.magls_cutoff_hz} Hz is above Nyquist "
                f"{grid.sample_rate / 2.0} Hz"
            )


@dataclass(frozen=True, eq=False)
class CovarianceModel:
    """Source covariance ``R_s`` (L x L) and noise covariance ``R_n`` (M x M)."""

    source: np.ndarray
    noise: np.ndarray

    def __post_init__(self) -> None:
        source = np.atleast_2d(np.asarray(self.source, dtype=np.complex128))
        noise = np.atleast_2d(np.asarray(self.noise, dtype=np.complex128))
        for name, matrix in (("source", source), ("noise", noise)):
            _check_hermitian_psd(name, matrix)
        object.__setattr__(self, "source", source)
        object.__setattr__(self, "noise", noise)

    @classmethod
    def uncorrelated(
        cls, sources: int, mics: int, source_power: float, noise_power: float
    ) -> "CovarianceModel":
        return cls(
            source_power * np.eye(sources, dtype=np.complex128),
            noise_power * np.eye(mics, dtype=np.complex128),
        )


def _check_hermitian_psd(name: str, matrix: np.ndarray) -> None:
    if matrix.shape[0] != matrix.shape[1]:
        raise DimensionMismatchError(f"{name} covariance must be square")
    if not np.all(np.isfinite(matrix)):
        raise SolverError(f"{name} covariance must be finite")
    if np.max(np.abs(matrix - matrix.conj().T), initial=0.0) > 1e-12:
        raise SolverError(f"{name} covariance is not Hermitian")
    eigenvalues = np.linalg.eigvalsh(matrix)
    scale = max(float(np.max(np.abs(eigenvalues))), 1.0)
    if eigenvalues[0] < -1e-10 * scale:
        raise SolverError(
            f"{name} covariance is not positive semi-definite "
            f"(smallest eigenvalue {eigenvalues[0]:.3e})"
        )


@dataclass(frozen=True, eq=False)
class BsmFilterBank:
    """
    Per-bin BSM filters for both ears.

    ``coefficients`` has shape (2, K, M): ear (left, right), bin, microphone.
    """

    coefficients: np.ndarray
    grid: FrequencyGrid
    provenance: FilterProvenance
    config: SolverConfig
    digest: str = ""

    def __post_init__(self) -> None:
        coefficients = np.asarray(self.coefficients, dtype=np.complex128)
        if coefficients.ndim != 3 or coefficients.shape[0] != 2:
            raise DimensionMismatchError(
                "filter coefficients must have shape (2, K, M), "
                f"got {coefficients.shape}"
            )
        if coefficients.shape[1] != self.grid.bins:
            raise DimensionMismatchError(
                f"filter bank has {coefficients.shape[1]} bins, "
                f"grid has {self.grid.bins}"
            )
        if not np.all(np.isfinite(coefficients)):
            raise SolverError("filter coefficients must be finite")
        coefficients.setflags(write=False)
        object.__setattr__(self, "coefficients", coefficients)
        object.__setattr__(self, "provenance", FilterProvenance(self.provenance))

    @property
    def mics(self) -> int:
        return int(self.coefficients.shape[2])

    @property
    def bins(self) -> int:
        return int(self.coefficients.shape[1])

    @property
    def left(self) -> np.ndarray:
        return self.coefficients[0]

    @property
    def right(self) -> np.ndarray:
        return self.coefficients[1]

    def describe(self) -> str:
        """
        Short tag of how the bank was designed.

        Example:
            bank.describe()  # Output: "reverberant/ls+magls>=1500Hz"
        """
        if self.config.magls_enabled:
            cutoff = self.config.magls_cutoff_hz
            return f"{self.provenance.value}/ls+magls>={cutoff:g}Hz"
        return f"{self.provenance.value}/ls"
