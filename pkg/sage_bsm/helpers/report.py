from dataclasses import dataclass, field
from typing import Dict, Tuple

import numpy as np

from sage_bsm.exceptions import EvaluationError

EARS: Tuple[str, str] = ("left", "right")


def to_db(linear: np.ndarray) -> np.ndarray:
    with np.errstate(divide="ignore"):
        return 10.0 * np.log10(linear)


@dataclass(frozen=True, eq=False)
class NmseReport:
    """
    Per-bin, per-ear NMSE of an estimate against a reference.

    Arrays are shaped (2, K) with rows (left, right). ``flags`` marks bins
    whose reference energy is below the floor; their ``linear`` entry is NaN.

    Args:
        frequencies (np.ndarray): Bin frequencies in Hz.
        linear (np.ndarray): Linear NMSE.
        reference_energy (np.ndarray): Frame-mean reference energy per bin.
        error_energy (np.ndarray): Frame-mean error energy per bin.
        flags (np.ndarray): ``True`` where the reference energy is insufficient.
        frame_range (tuple): ``(start, stop)`` frames averaged over.
        estimate_tag (str): Provenance of the estimate.
        reference_tag (str): Provenance of the reference.
        scene_digest (str): Digest of the scene both came from.
    """

    frequencies: np.ndarray
    linear: np.ndarray
    reference_energy: np.ndarray
    error_energy: np.ndarray
    flags: np.ndarray
    frame_range: Tuple[int, int]
    estimate_tag: str = ""
    reference_tag: str = ""
    scene_digest: str = ""

    def __post_init__(self) -> None:
        expected = (2, np.asarray(self.frequencies).size)
        for name in ("linear", "reference_energy", "error_energy", "flags"):
            if np.shape(getattr(self, name)) != expected:
                raise EvaluationError(f"{name} must have shape {expected}")
        valid = self.linear[~self.flags]
        if np.any(valid < 0.0):
            raise EvaluationError("NMSE values must be non-negative")

    @property
    def db(self) -> np.ndarray:
        return to_db(self.linear)

    @property
    def bins(self) -> int:
        return int(self.frequencies.size)

    def ear_index(self, ear: str) -> int:
        try:
            return EARS.index(ear)
        except ValueError:
            raise EvaluationError(f"unknown ear {ear!r}") from None

    def broadband(self) -> np.ndarray:
        """Energy-weighted NMSE over all valid bins, one value per ear."""
        values = []
        for row in range(2):
            mask = ~self.flags[row]
            reference = self.reference_energy[row, mask].sum()
            values.append(self.error_energy[row, mask].sum() / reference)
        return np.asarray(values)


@dataclass(frozen=True, eq=False)
class Comparison:
    """
    Improvement of a candidate report over a baseline, in dB.

    Positive values mean the candidate has the lower NMSE.
    """

    frequencies: np.ndarray
    improvement_db: np.ndarray
    broadband_improvement_db: np.ndarray
    fraction_improved: np.ndarray
    band_improvements_db: Dict[str, np.ndarray] = field(default_factory=dict)
    candidate_tag: str = ""
    baseline_tag: str = ""
    scene_digest: str = ""
