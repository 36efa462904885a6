import logging
import math
from typing import Any, Dict

import numpy as np

from sage_bsm.acoustics.room import (
    compute_drr,
    estimate_t60,
    render_mic_signals,
    render_reference_plane_waves,
    room_impulse_response,
)
from sage_bsm.exceptions import InsufficientDecayError, MissingArtifactError
from sage_bsm.helpers import Scene, ShSignal
from sage_bsm.services.base import StageService
from sage_bsm.services.factory import SceneFactory

logger = logging.getLogger(__name__)

MICS_WAV = "mics.wav"
DIRECT_WAV = "direct.wav"
SOURCE_ARRAY = "source.npy"
REFERENCE_SH = "reference_sh.npy"
REFERENCE_DIRECT_SH = "reference_direct_sh.npy"
STATS_JSON = "stats.json"


class Simulations(StageService):
    """
    This class simulates the microphone signals, the SH-domain reference and
    the scene statistics.

    Artifacts (under ``<output>/simulate``):
        ``mics.wav`` (M channels), ``direct.wav`` (direct path only),
        ``source.npy``, ``reference_sh.npy`` and ``reference_direct_sh.npy``
        (SH impulse responses) and ``stats.json`` (DRR, T60).

    Example:
        client = BsmClient.from_file(profile="desk")
        stats = client.simulations.run()
        print(stats["drr_db"])
    """

    stage = "simulate"

    def scene_statistics(self, scene: Scene) -> Dict[str, Any]:
        """
        DRR and T60 of the omni RIR at the array centre.

        T60 is ``None`` when the RIR does not decay far enough, e.g. in an
        anechoic room.
        """
        center = scene.array.center_position
        full = room_impulse_response(
            scene.room, scene.source_position, center, scene.sample_rate
        )
        direct = room_impulse_response(
            scene.room,
            scene.source_position,
            center,
            scene.sample_rate,
            direct_only=True,
            length=full.size,
        )
        try:
            t60 = estimate_t60(full, scene.sample_rate)
        except InsufficientDecayError as error:
            logger.warning("No T60 estimate: %s", error)
            t60 = None
        direction = scene.source_direction
        return {
            "drr_db": compute_drr(full, direct),
            "t60_s": t60,
            "eyring_t60_s": scene.room.eyring_t60(),
            "reflection_coefficients": list(scene.room.reflection_coefficients),
            "source_distance_m": scene.source_distance,
            "direct_delay_samples": scene.source_distance
            / scene.room.speed_of_sound
            * scene.sample_rate,
            "source_colatitude": direction.colatitude,
            "source_azimuth": direction.azimuth,
            "rir_length": int(full.size),
        }

    def execute(self) -> Dict[str, Any]:
        settings = self.config.scene
        scene = SceneFactory.create_scene(settings)
        order = self.config.design.reference_sh_order
        logger.info(
            "Simulating %s mics in a %s room, image order %s",
            scene.array.count,
            "x".join(f"{v:g}" for v in scene.room.dimensions),
            scene.room.max_order,
        )
        signals = render_mic_signals(scene)
        reference = render_reference_plane_waves(scene, order)
        reference_direct = render_reference_plane_waves(scene, order, part="direct")
        stats = self.scene_statistics(scene)
        if math.isinf(stats["drr_db"]):
            logger.info("Anechoic scene, direct and full signals coincide")

        files = [
            self.path(MICS_WAV),
            self.path(DIRECT_WAV),
            self.path(SOURCE_ARRAY),
            self.path(REFERENCE_SH),
            self.path(REFERENCE_DIRECT_SH),
            self.path(STATS_JSON),
        ]
        artifacts = self.client.artifacts
        artifacts.write_wav(files[0], signals.full, scene.sample_rate)
        artifacts.write_wav(files[1], signals.direct, scene.sample_rate)
        artifacts.write_array(files[2], scene.source_signal)
        artifacts.write_array(files[3], reference.rir)
        artifacts.write_array(files[4], reference_direct.rir)
        artifacts.write_json(files[5], stats)
        artifacts.write_manifest(
            self.stage,
            files,
            {
                "sample_rate": scene.sample_rate,
                "length": signals.length,
                "sh_order": order,
                "reference_offset": reference.offset,
                "reference_direct_offset": reference_direct.offset,
            },
        )
        logger.info("Scene DRR %.2f dB, T60 %s", stats["drr_db"], stats["t60_s"])
        return stats

    def cached(self) -> Dict[str, Any]:
        return self.client.artifacts.read_json(self.path(STATS_JSON))

    def load_reference(self, direct: bool = False) -> ShSignal:
        """
        Rebuilds the SH reference signal from verified artifacts.

        Raises:
            MissingArtifactError: If the simulation has not run.
        """
        manifest = self.client.artifacts.verify(self.stage)
        metadata = manifest.get("metadata", {})
        if "sh_order" not in metadata:
            raise MissingArtifactError("simulation manifest has no reference metadata")
        artifacts = self.client.artifacts
        name = REFERENCE_DIRECT_SH if direct else REFERENCE_SH
        rir = artifacts.read_array(self.path(name))
        offset = metadata["reference_direct_offset" if direct else "reference_offset"]
        return ShSignal(
            rir,
            int(offset),
            np.asarray(artifacts.read_array(self.path(SOURCE_ARRAY)), dtype=float),
            int(metadata["length"]),
            int(metadata["sh_order"]),
            int(metadata["sample_rate"]),
        )
