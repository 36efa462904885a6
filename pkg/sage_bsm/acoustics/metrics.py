import csv
import logging
import math
from pathlib import Path
from typing import Dict, Optional, Sequence, Tuple, Union

import numpy as np

from sage_bsm.acoustics.stft import interior_frames
from sage_bsm.exceptions import (
    DimensionMismatchError,
    EmptyBandError,
    EvaluationError,
    SceneMismatchError,
)
from sage_bsm.helpers import BinauralSpectrogram, Comparison, NmseReport
from sage_bsm.helpers.report import EARS, to_db

logger = logging.getLogger(__name__)

ENERGY_FLOOR = 1e-12
OCTAVE_CENTRES = (125.0, 250.0, 500.0, 1000.0, 2000.0, 4000.0, 8000.0, 16000.0)

Band = Tuple[float, float]
PathLike = Union[str, Path]


def nmse(
    est: BinauralSpectrogram,
    ref: BinauralSpectrogram,
    frame_range: Optional[Tuple[int, int]] = None,
    trim: int = 2,
    scene_digest: str = "",
) -> NmseReport:
    """
    Per-bin, per-ear normalised mean-squared error.

    ``NMSE(k) = mean_n |est − ref|² / mean_n |ref|²`` over the frames in
    ``frame_range`` (by default all but ``trim`` frames at each end). Bins
    whose reference energy is below ``1e-12`` times the ear's largest bin
    energy are flagged and get NaN.

    Raises:
        DimensionMismatchError: If the spectrograms differ in shape or config.
        EvaluationError: If the reference is silent.

    Example:
        report = nmse(decomposed, reference)
        report.db[0, 100]  # left ear, bin 100, in dB
    """
    if est.shape != ref.shape or est.config != ref.config:
        raise DimensionMismatchError(
            f"estimate {est.shape} and reference {ref.shape} are not comparable"
        )
    if frame_range is None:
        frame_range = interior_frames(est.shape[0], trim)
    start, stop = frame_range
    if not 0 <= start < stop <= est.shape[0]:
        raise EvaluationError(
            f"frame range ({start}, {stop}) is empty or out of bounds"
        )
    estimate = est.data[:, start:stop]
    reference = ref.data[:, start:stop]
    reference_energy = np.mean(np.abs(reference) ** 2, axis=1)
    error_energy = np.mean(np.abs(estimate - reference) ** 2, axis=1)
    if not np.any(reference_energy > 0.0):
        raise EvaluationError("reference has no energy in the evaluated frames")
    floor = ENERGY_FLOOR * reference_energy.max(axis=1, keepdims=True)
    flags = (reference_energy <= floor) | (reference_energy == 0.0)
    with np.errstate(divide="ignore", invalid="ignore"):
        linear = np.where(flags, np.nan, error_energy / reference_energy)
    if flags.any():
        logger.debug(
            "%s bins flagged for insufficient reference energy", int(flags.sum())
        )
    return NmseReport(
        ref.config.grid.frequencies,
        linear,
        reference_energy,
        error_energy,
        flags,
        (int(start), int(stop)),
        est.provenance.value,
        ref.provenance.value,
        scene_digest,
    )


def octave_bands(nyquist: float) -> Tuple[Band, ...]:
    """
    Octave bands with centres 125 Hz to 16 kHz, clipped to ``nyquist``.

    Example:
        octave_bands(24000.0)[0]  # (88.388..., 176.776...)
    """
    bands = []
    for centre in OCTAVE_CENTRES:
        low, high = centre / math.sqrt(2.0), min(centre * math.sqrt(2.0), nyquist)
        if low < nyquist:
            bands.append((low, high))
    return tuple(bands)


def _band_mask(frequencies: np.ndarray, band: Band, nyquist: float) -> np.ndarray:
    low, high = band
    if high >= nyquist:
        return (frequencies >= low) & (frequencies <= high)
    return (frequencies >= low) & (frequencies < high)


def band_summary(report: NmseReport, bands: Sequence[Band]) -> np.ndarray:
    """
    Energy-weighted band NMSE in dB.

    Within each ``[low, high)`` band the linear NMSE is averaged with the
    reference energy as weight, i.e. ``Σ error / Σ reference``.

    Returns:
        np.ndarray: Shape (2, len(bands)).

    Raises:
        EvaluationError: If a band reaches beyond Nyquist.
        EmptyBandError: If a band holds no evaluable bin.
    """
    nyquist = float(report.frequencies[-1])
    values = np.empty((2, len(bands)))
    for column, band in enumerate(bands):
        low, high = band
        if not 0.0 <= low < high or high > nyquist * (1.0 + 1e-12):
            raise EvaluationError(f"band {band} is not within 0..{nyquist} Hz")
        mask = _band_mask(report.frequencies, band, nyquist)
        for row in range(2):
            selected = mask & ~report.flags[row]
            if not selected.any():
                raise EmptyBandError(
                    f"band {band} holds no evaluable bins for the {EARS[row]} ear"
                )
            values[row, column] = to_db(
                report.error_energy[row, selected].sum()
                / report.reference_energy[row, selected].sum()
            )
    return values


def _check_comparable(report_a: NmseReport, report_b: NmseReport) -> None:
    if report_a.scene_digest and report_b.scene_digest:
        if report_a.scene_digest != report_b.scene_digest:
            raise SceneMismatchError("reports come from different scenes")
    if not np.array_equal(report_a.frequencies, report_b.frequencies):
        raise SceneMismatchError("reports use different frequency grids")
    if report_a.frame_range != report_b.frame_range:
        raise SceneMismatchError("reports average over different frames")


def compare(
    report_a: NmseReport,
    report_b: NmseReport,
    bands: Optional[Sequence[Band]] = None,
) -> Comparison:
    """
    Improvement of candidate ``report_a`` over baseline ``report_b``.

    ``improvement = dB(b) − dB(a)``, positive when ``a`` has the lower
    NMSE: halving the NMSE reads +3.01 dB.

    Raises:
        SceneMismatchError: If the reports come from different scenes or
            evaluation settings.
    """
    _check_comparable(report_a, report_b)
    flags = report_a.flags | report_b.flags
    with np.errstate(invalid="ignore"):
        improvement = np.where(flags, np.nan, report_b.db - report_a.db)
    broadband = to_db(report_b.broadband()) - to_db(report_a.broadband())
    fraction = np.array(
        [
            (
                float(np.mean(improvement[row, ~flags[row]] > 0.0))
                if (~flags[row]).any()
                else 0.0
            )
            for row in range(2)
        ]
    )
    band_values: Dict[str, np.ndarray] = {}
    if bands is None:
        bands = octave_bands(float(report_a.frequencies[-1]))
    for band in bands:
        try:
            gain = (
                band_summary(report_b, [band])[:, 0]
                - band_summary(report_a, [band])[:, 0]
            )
        except EmptyBandError:
            continue
        band_values[f"{band[0]:.1f}-{band[1]:.1f}"] = gain
    return Comparison(
        report_a.frequencies,
        improvement,
        broadband,
        fraction,
        band_values,
        report_a.estimate_tag,
        report_b.estimate_tag,
        report_a.scene_digest,
    )


def verdict(
    direct: NmseReport,
    reverberant: NmseReport,
    comparison: Comparison,
    near_ear: str = "left",
    direct_limit_db: float = -15.0,
    direct_band_hz: float = 4000.0,
) -> Dict[str, bool]:
    """
    Acceptance predicates of a decomposed-versus-standard run.

    Args:
        direct (NmseReport): Direct component render against the direct
            reference.
        reverberant (NmseReport): Reverberant component render against the
            reverberant reference.
        comparison (Comparison): Decomposed (candidate) against standard
            (baseline) BSM, both scored against the full reference.
        near_ear (str): Ear on the source side.

    Returns:
        dict: Named booleans plus ``"pass"`` when all of them hold.
    """
    near = EARS.index(near_ear)
    far = 1 - near
    low = (direct.frequencies < direct_band_hz) & ~direct.flags.any(axis=0)
    direct_ok = bool(np.all(direct.db[:, low] < direct_limit_db))

    nyquist = float(reverberant.frequencies[-1])
    rises = False
    if nyquist > 4000.0:
        try:
            below = band_summary(reverberant, [(0.0, 1000.0)])[:, 0]
            above = band_summary(reverberant, [(4000.0, nyquist)])[:, 0]
            rises = bool(np.all(above > below))
        except EmptyBandError:
            rises = False
    broadband = to_db(reverberant.broadband())
    near_better = bool(broadband[near] <= broadband[far])

    beats = bool(np.all(comparison.broadband_improvement_db > 0.0))
    band_gains = [gain[near] for gain in comparison.band_improvements_db.values()]
    band_ok = (
        bool(band_gains)
        and sum(g >= 1.0 for g in band_gains) >= len(band_gains) / 2.0
    )

    result = {
        "direct_below_limit": direct_ok,
        "reverberant_rises_with_frequency": rises,
        "near_ear_better": near_better,
        "decomposed_beats_standard": beats,
        "near_ear_band_improvement": band_ok,
    }
    result["pass"] = all(result.values())
    return result


def _format(value: float) -> str:
    return "nan" if math.isnan(value) else f"{value:.12g}"


def write_report_csv(report: NmseReport, path: PathLike, gnuplot: bool = False) -> None:
    """
    One row per (ear, bin): ``ear, freq_hz, nmse_linear, nmse_db, flag``.

    Rows are ordered by ear, then bin. With ``gnuplot`` the columns are
    whitespace separated and the header is a comment.
    """
    header = ["ear", "freq_hz", "nmse_linear", "nmse_db", "flag"]
    rows = []
    db = report.db
    for row, ear in enumerate(EARS):
        for index, frequency in enumerate(report.frequencies):
            flagged = bool(report.flags[row, index])
            rows.append(
                [
                    ear,
                    _format(float(frequency)),
                    _format(float(report.linear[row, index])),
                    _format(float(db[row, index])),
                    "insufficient_energy" if flagged else "ok",
                ]
            )
    _write_rows(Path(path), header, rows, gnuplot)


def write_comparison_csv(
    comparison: Comparison, path: PathLike, gnuplot: bool = False
) -> None:
    header = ["ear", "freq_hz", "improvement_db"]
    rows = [
        [
            ear,
            _format(float(frequency)),
            _format(float(comparison.improvement_db[row, index])),
        ]
        for row, ear in enumerate(EARS)
        for index, frequency in enumerate(comparison.frequencies)
    ]
    _write_rows(Path(path), header, rows, gnuplot)


def _write_rows(
    path: Path, header: Sequence[str], rows: Sequence[Sequence[str]], gnuplot: bool
) -> None:
    with path.open("w", newline="", encoding="utf-8") as handle:
        if gnuplot:
            handle.write("# " + " ".join(header) + "\n")
            for row in rows:
                handle.write(" ".join(row) + "\n")
            return
        writer = csv.writer(handle, lineterminator="\n")
        writer.writerow(header)
        writer.writerows(rows)
