import logging
from pathlib import Path
from typing import Dict, Sequence

from sage_bsm.acoustics.bsm import design_filterbank, load_filterbank, save_filterbank
from sage_bsm.acoustics.hrtf import load_hrtf, point_receiver_hrtf, sh_interpolate
from sage_bsm.acoustics.sph import spiral_grid
from sage_bsm.exceptions import StaleArtifactError
from sage_bsm.helpers import (
    BsmFilterBank,
    Direction,
    FilterProvenance,
    FrequencyGrid,
    HrtfSet,
)
from sage_bsm.services.base import StageService
from sage_bsm.services.factory import DesignFactory, SceneFactory

logger = logging.getLogger(__name__)

BANK_FILES = {
    FilterProvenance.DIRECT: "bank_direct.bsmf",
    FilterProvenance.REVERBERANT: "bank_reverberant.bsmf",
}
DESIGN_JSON = "design.json"


class Designs(StageService):
    """
    This class designs the direct and reverberant BSM filter banks.

    The direct bank uses the single configured DOA; the reverberant bank a
    spiral grid of ``reverb_grid_size`` directions. With ``decomposition``
    off only the reverberant bank is designed, which then serves the
    standard pipeline.

    Example:
        banks = client.designs.run()
        banks[FilterProvenance.REVERBERANT].describe()  # 'reverberant/ls+magls>=1500Hz'
    """

    stage = "design"

    def hrtf_at(self, grid: FrequencyGrid, doas: Sequence[Direction]) -> HrtfSet:
        """
        HRTFs at ``doas`` on ``grid``: analytic point receivers, or an SH
        interpolation of the configured HRTF file.
        """
        design = self.config.design
        if design.analytic_hrtf:
            return point_receiver_hrtf(design.ear_offset, grid, doas)
        measured = load_hrtf(design.hrtf, grid.fft_size)
        interpolated = sh_interpolate(measured, design.hrtf_sh_order, doas)
        return HrtfSet(tuple(doas), interpolated.left, interpolated.right, grid)

    def provenances(self) -> Sequence[FilterProvenance]:
        if self.config.design.decomposition:
            return (FilterProvenance.DIRECT, FilterProvenance.REVERBERANT)
        return (FilterProvenance.REVERBERANT,)

    def execute(self) -> Dict[FilterProvenance, BsmFilterBank]:
        design = self.config.design
        grid = DesignFactory.create_grid(self.config)
        geometry = SceneFactory.create_array(self.config.scene)
        strategy = DesignFactory.create_steering(design)
        banks: Dict[FilterProvenance, BsmFilterBank] = {}
        files = []
        for provenance in self.provenances():
            if provenance is FilterProvenance.DIRECT:
                doas: Sequence[Direction] = (DesignFactory.create_direct_doa(design),)
            else:
                doas = spiral_grid(design.reverb_grid_size)
            bank = design_filterbank(
                geometry,
                grid,
                doas,
                self.hrtf_at(grid, doas),
                DesignFactory.create_solver_config(design, provenance),
                provenance,
                strategy,
                self.client.digest,
            )
            path = self.path(BANK_FILES[provenance])
            save_filterbank(bank, path)
            banks[provenance] = bank
            files.append(path)

        summary = {
            "banks": {
                provenance.value: {
                    "file": BANK_FILES[provenance],
                    "description": bank.describe(),
                    "snr": bank.config.snr,
                    "magls_cutoff_hz": bank.config.magls_cutoff_hz,
                    "mics": bank.mics,
                    "bins": bank.bins,
                }
                for provenance, bank in banks.items()
            },
            "design": self.config.to_dict()["design"],
        }
        summary_path = self.path(DESIGN_JSON)
        self.client.artifacts.write_json(summary_path, summary)
        files.append(summary_path)
        self.client.artifacts.write_manifest(self.stage, files)
        return banks

    def cached(self) -> Dict[FilterProvenance, BsmFilterBank]:
        return self.load_banks()

    def load_banks(self) -> Dict[FilterProvenance, BsmFilterBank]:
        """
        Loads the verified banks of this scene.

        Raises:
            StaleArtifactError: If a bank carries another scene's digest.
        """
        self.client.artifacts.verify(self.stage)
        banks = {}
        for provenance in self.provenances():
            path: Path = self.path(BANK_FILES[provenance])
            bank = load_filterbank(path)
            if bank.digest != self.client.digest:
                raise StaleArtifactError(
                    f"filter bank {path} was designed for another scene"
                )
            banks[provenance] = bank
        return banks
