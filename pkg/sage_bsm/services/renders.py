import logging
from typing import Dict

from sage_bsm.acoustics.hrtf import load_hrtf, point_receiver_sh, sh_fit
from sage_bsm.acoustics.render import (
    apply_filterbank,
    decompose_measurement,
    render_reference,
    render_standard,
)
from sage_bsm.acoustics.stft import stft
from sage_bsm.exceptions import DimensionMismatchError, MissingArtifactError
from sage_bsm.helpers import (
    BinauralSpectrogram,
    FilterProvenance,
    FrequencyGrid,
    HrtfSHCoefficients,
    Provenance,
    SpectrogramOrigin,
)
from sage_bsm.services.base import StageService
from sage_bsm.services.factory import DesignFactory
from sage_bsm.services.simulations import DIRECT_WAV, MICS_WAV

logger = logging.getLogger(__name__)

OUTPUTS = {
    Provenance.BSM_STANDARD: "bsm_standard",
    Provenance.BSM_DECOMPOSED: "bsm_decomposed",
    Provenance.COMPONENT_DIRECT: "component_direct",
    Provenance.COMPONENT_REVERB: "component_reverb",
    Provenance.REFERENCE: "reference",
    Provenance.REFERENCE_DIRECT: "reference_direct",
}
WAV_OUTPUTS = (
    Provenance.BSM_STANDARD,
    Provenance.BSM_DECOMPOSED,
    Provenance.REFERENCE,
    Provenance.REFERENCE_DIRECT,
)


class Renders(StageService):
    """
    This class renders the binaural estimates and the binaural references.

    For every output ``<name>`` it writes ``<name>.npy`` (complex
    spectrogram, shape (2, frames, bins)); the standard, decomposed,
    reference and direct-reference outputs are also written as stereo
    ``<name>.wav``.

    Example:
        spectrograms = client.renders.run()
        spectrograms[Provenance.BSM_DECOMPOSED].shape  # (frames, bins)
    """

    stage = "render"
    requires = ("simulate", "design")

    def hrtf_coefficients(self, grid: FrequencyGrid) -> HrtfSHCoefficients:
        design = self.config.design
        if design.analytic_hrtf:
            return point_receiver_sh(design.ear_offset, grid, design.hrtf_sh_order)
        return sh_fit(load_hrtf(design.hrtf, grid.fft_size), design.hrtf_sh_order)

    def execute(self) -> Dict[Provenance, BinauralSpectrogram]:
        self.inputs()
        artifacts = self.client.artifacts
        stft_config = DesignFactory.create_stft_config(self.config)
        sample_rate = self.config.scene.sample_rate
        paths = self.client.paths
        full = artifacts.read_wav(paths.build_path("simulate", MICS_WAV))
        direct = artifacts.read_wav(paths.build_path("simulate", DIRECT_WAV))
        banks = self.client.designs.load_banks()
        bank_r = banks[FilterProvenance.REVERBERANT]
        if bank_r.bins != stft_config.bins:
            raise DimensionMismatchError(
                f"filter banks have {bank_r.bins} bins, the STFT {stft_config.bins}"
            )

        x = stft(full, stft_config, SpectrogramOrigin.MEASURED)
        outputs: Dict[Provenance, BinauralSpectrogram] = {
            Provenance.BSM_STANDARD: render_standard(x, bank_r)
        }
        bank_d = banks.get(FilterProvenance.DIRECT)
        if bank_d is not None:
            x_d = stft(direct, stft_config, SpectrogramOrigin.MEASURED_DIRECT)
            x_r = decompose_measurement(x, x_d)
            component_direct = apply_filterbank(
                bank_d, x_d, Provenance.COMPONENT_DIRECT
            )
            component_reverb = apply_filterbank(
                bank_r, x_r, Provenance.COMPONENT_REVERB
            )
            outputs[Provenance.COMPONENT_DIRECT] = component_direct
            outputs[Provenance.COMPONENT_REVERB] = component_reverb
            outputs[Provenance.BSM_DECOMPOSED] = component_direct + component_reverb

        hrtf_sh = self.hrtf_coefficients(DesignFactory.create_grid(self.config))
        simulations = self.client.simulations
        outputs[Provenance.REFERENCE] = render_reference(
            simulations.load_reference(), hrtf_sh, stft_config
        )
        outputs[Provenance.REFERENCE_DIRECT] = render_reference(
            simulations.load_reference(direct=True),
            hrtf_sh,
            stft_config,
            Provenance.REFERENCE_DIRECT,
        )

        files = []
        for provenance, spectrogram in outputs.items():
            name = OUTPUTS[provenance]
            path = self.path(f"{name}.npy")
            artifacts.write_array(path, spectrogram.data)
            files.append(path)
            if provenance in WAV_OUTPUTS:
                wav_path = self.path(f"{name}.wav")
                artifacts.write_wav(wav_path, spectrogram.to_signals(), sample_rate)
                files.append(wav_path)
        artifacts.write_manifest(
            self.stage,
            files,
            {
                "length": int(full.shape[-1]),
                "outputs": sorted(provenance.value for provenance in outputs),
            },
        )
        logger.info("Rendered %s binaural outputs", len(outputs))
        return outputs

    def cached(self) -> Dict[Provenance, BinauralSpectrogram]:
        return self.load_outputs()

    def load_outputs(self) -> Dict[Provenance, BinauralSpectrogram]:
        """
        Loads the verified spectrograms of this scene.

        Raises:
            MissingArtifactError: If the render stage has not run.
        """
        manifest = self.client.artifacts.verify(self.stage)
        metadata = manifest.get("metadata", {})
        if "length" not in metadata:
            raise MissingArtifactError("render manifest has no signal length")
        stft_config = DesignFactory.create_stft_config(self.config)
        outputs = {}
        for value in metadata.get("outputs", []):
            provenance = Provenance(value)
            data = self.client.artifacts.read_array(
                self.path(f"{OUTPUTS[provenance]}.npy")
            )
            origin = (
                SpectrogramOrigin.REFERENCE
                if provenance in (Provenance.REFERENCE, Provenance.REFERENCE_DIRECT)
                else SpectrogramOrigin.ESTIMATE
            )
            outputs[provenance] = BinauralSpectrogram.from_array(
                data, stft_config, provenance, int(metadata["length"]), origin
            )
        return outputs
