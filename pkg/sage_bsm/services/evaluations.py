import logging
from pathlib import Path
from typing import Any, Dict, List, Sequence, Tuple

import numpy as np

from sage_bsm.acoustics.metrics import (
    band_summary,
    compare,
    nmse,
    octave_bands,
    verdict,
    write_comparison_csv,
    write_report_csv,
)
from sage_bsm.acoustics.stft import interior_frames
from sage_bsm.exceptions import EmptyBandError
from sage_bsm.helpers import NmseReport, Provenance
from sage_bsm.helpers.report import to_db
from sage_bsm.services.base import StageService

logger = logging.getLogger(__name__)

VERDICT_JSON = "verdict.json"


class Evaluations(StageService):
    """
    This class scores the rendered estimates against the references.

    Artifacts (under ``<output>/evaluate``): one ``nmse_<estimate>.csv`` per
    report, ``comparison.csv`` (decomposed over standard) and
    ``verdict.json`` with the acceptance predicates. With ``gnuplot`` on,
    whitespace-separated ``.dat`` twins are written as well.

    Example:
        result = client.evaluations.run()
        result["decomposed_beats_standard"]  # True
    """

    stage = "evaluate"
    requires = ("render",)

    def bands(self, nyquist: float) -> Sequence[Tuple[float, float]]:
        configured = self.config.eval.bands
        if configured:
            return tuple((low, min(high, nyquist)) for low, high in configured)
        return octave_bands(nyquist)

    def near_ear(self) -> str:
        """The ear on the source side; the left ear faces ``+y``."""
        scene = self.config.scene
        offset = np.asarray(scene.source_position) - np.asarray(scene.array_center)
        return "left" if offset[1] >= 0.0 else "right"

    def _write(self, name: str, report: Any, files: List[Path], writer: Any) -> None:
        path = self.path(f"{name}.csv")
        writer(report, path)
        files.append(path)
        if self.config.eval.gnuplot:
            dat = self.path(f"{name}.dat")
            writer(report, dat, gnuplot=True)
            files.append(dat)

    @staticmethod
    def _band_table(
        report: NmseReport, bands: Sequence[Tuple[float, float]]
    ) -> Dict[str, Any]:
        table = {}
        for low, high in bands:
            try:
                values = band_summary(report, [(low, high)])[:, 0]
            except EmptyBandError:
                continue
            table[f"{low:.1f}-{high:.1f}"] = {"left": values[0], "right": values[1]}
        return table

    def execute(self) -> Dict[str, Any]:
        self.inputs()
        outputs = self.client.renders.load_outputs()
        reference = outputs[Provenance.REFERENCE]
        frame_range = interior_frames(reference.shape[0], self.config.eval.frame_trim)
        digest = self.client.digest
        nyquist = self.config.scene.sample_rate / 2.0
        bands = self.bands(nyquist)

        reports = {
            "bsm_standard": nmse(
                outputs[Provenance.BSM_STANDARD],
                reference,
                frame_range,
                scene_digest=digest,
            )
        }
        decomposed = Provenance.BSM_DECOMPOSED in outputs
        if decomposed:
            reference_direct = outputs[Provenance.REFERENCE_DIRECT]
            reports["bsm_decomposed"] = nmse(
                outputs[Provenance.BSM_DECOMPOSED],
                reference,
                frame_range,
                scene_digest=digest,
            )
            reports["component_direct"] = nmse(
                outputs[Provenance.COMPONENT_DIRECT],
                reference_direct,
                frame_range,
                scene_digest=digest,
            )
            reports["component_reverb"] = nmse(
                outputs[Provenance.COMPONENT_REVERB],
                reference - reference_direct,
                frame_range,
                scene_digest=digest,
            )

        files: List[Path] = []
        for name, report in reports.items():
            self._write(f"nmse_{name}", report, files, write_report_csv)

        result: Dict[str, Any] = {
            "decomposition": decomposed,
            "frame_range": list(frame_range),
            "broadband_nmse_db": {
                name: dict(zip(("left", "right"), to_db(report.broadband())))
                for name, report in reports.items()
            },
            "band_nmse_db": {
                name: self._band_table(report, bands)
                for name, report in reports.items()
            },
        }
        if decomposed:
            comparison = compare(
                reports["bsm_decomposed"], reports["bsm_standard"], bands
            )
            self._write("comparison", comparison, files, write_comparison_csv)
            near = self.near_ear()
            predicates = verdict(
                reports["component_direct"],
                reports["component_reverb"],
                comparison,
                near_ear=near,
            )
            result.update(predicates)
            result["near_ear"] = near
            result["broadband_improvement_db"] = dict(
                zip(("left", "right"), comparison.broadband_improvement_db)
            )
            result["fraction_improved"] = dict(
                zip(("left", "right"), comparison.fraction_improved)
            )
            result["band_improvement_db"] = {
                band: {"left": gain[0], "right": gain[1]}
                for band, gain in comparison.band_improvements_db.items()
            }
            logger.info(
                "Decomposed over standard: %s dB broadband, verdict %s",
                np.round(comparison.broadband_improvement_db, 2).tolist(),
                "pass" if predicates["pass"] else "fail",
            )

        verdict_path = self.path(VERDICT_JSON)
        self.client.artifacts.write_json(verdict_path, result)
        files.append(verdict_path)
        self.client.artifacts.write_manifest(self.stage, files)
        return result

    def cached(self) -> Dict[str, Any]:
        return self.client.artifacts.read_json(self.path(VERDICT_JSON))

