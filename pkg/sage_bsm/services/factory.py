import logging
import math
from typing import Optional

import numpy as np
from scipy.io import wavfile

from sage_bsm.acoustics.room import synthesize_source
from sage_bsm.acoustics.sph import SteeringStrategy, semicircle_array, steering_strategy
from sage_bsm.exceptions import ConfigurationError
from sage_bsm.helpers import (
    ArrayGeometry,
    DesignConfig,
    Direction,
    FilterProvenance,
    FrequencyGrid,
    Microphone,
    RoomSpec,
    RunConfig,
    Scene,
    SceneConfig,
    SolverConfig,
    StftConfig,
)

logger = logging.getLogger(__name__)


class SceneFactory:
    @staticmethod
    def create_room(scene: SceneConfig) -> RoomSpec:
        """
        Creates the room of a scene section.

        Explicit reflection coefficients win; an empty list derives uniform
        coefficients from ``target_t60``.

        Example:
            room = SceneFactory.create_room(config.scene)
            room.eyring_t60()  # 0.3 for the desk profile
        """
        if scene.reflection_coefficients:
            return RoomSpec(
                scene.room_dimensions,
                scene.reflection_coefficients,
                scene.max_order,
                scene.speed_of_sound,
            )
        return RoomSpec.from_t60(
            scene.room_dimensions,
            scene.target_t60,
            scene.max_order,
            scene.speed_of_sound,
        )

    @staticmethod
    def create_array(scene: SceneConfig) -> ArrayGeometry:
        if scene.array_layout == "semicircle":
            return semicircle_array(
                scene.mic_count, scene.mic_radius, scene.array_center
            )
        mics = tuple(
            Microphone(radius, Direction(colatitude, azimuth))
            for radius, colatitude, azimuth in scene.mic_positions
        )
        return ArrayGeometry(mics, scene.array_center)

    @staticmethod
    def load_source(scene: SceneConfig) -> np.ndarray:
        """
        Reads the source WAV (first channel) or synthesizes speech-shaped noise.

        Raises:
            ConfigurationError: If the WAV is unreadable or its rate differs
                from ``sample_rate``.
        """
        if not scene.source_wav:
            return synthesize_source(
                scene.source_duration, scene.sample_rate, scene.seed
            )
        try:
            rate, samples = wavfile.read(scene.source_wav)
        except (OSError, ValueError) as error:
            raise ConfigurationError(
                f"cannot read source {scene.source_wav}: {error}"
            ) from error
        if rate != scene.sample_rate:
            raise ConfigurationError(
                f"source {scene.source_wav} is sampled at {rate} Hz, "
                f"the scene at {scene.sample_rate} Hz"
            )
        samples = np.asarray(samples)
        if np.issubdtype(samples.dtype, np.integer):
            samples = samples / float(np.iinfo(samples.dtype).max)
        if samples.ndim > 1:
            samples = samples[:, 0]
        logger.info("Read %s source samples from %s", samples.size, scene.source_wav)
        return samples.astype(float)

    @staticmethod
    def create_scene(
        scene: SceneConfig, source_signal: Optional[np.ndarray] = None
    ) -> Scene:
        """
        Creates the scene of a scene section.

        The noise draw uses ``seed + 1`` so it does not repeat the source's
        white-noise sequence.
        """
        signal = source_signal
        if signal is None:
            signal = SceneFactory.load_source(scene)
        noise_snr = (
            10.0 ** (scene.noise_snr_db / 10.0)
            if scene.noise_enabled and not math.isinf(scene.noise_snr_db)
            else math.inf
        )
        return Scene(
            SceneFactory.create_room(scene),
            scene.source_position,
            signal,
            scene.sample_rate,
            SceneFactory.create_array(scene),
            noise_snr,
            scene.seed + 1,
        )


class DesignFactory:
    @staticmethod
    def create_stft_config(config: RunConfig) -> StftConfig:
        return StftConfig.from_durations(
            config.scene.sample_rate,
            config.stft.window_ms,
            config.stft.hop_ms,
            config.stft.window,
        )

    @staticmethod
    def create_grid(config: RunConfig) -> FrequencyGrid:
        stft = DesignFactory.create_stft_config(config)
        return FrequencyGrid.from_fft(
            config.scene.sample_rate, stft.fft_size, config.scene.speed_of_sound
        )

    @staticmethod
    def create_solver_config(
        design: DesignConfig, provenance: FilterProvenance
    ) -> SolverConfig:
        """
        Solver settings of one filter bank.

        The direct bank is a plain LS design at ``direct_snr_db``; the
        reverberant and whole-field banks use ``reverb_snr_db`` and MagLS as
        configured.

        Example:
            DesignFactory.create_solver_config(
                config.design, FilterProvenance.REVERBERANT
            )
        """
        if provenance is FilterProvenance.DIRECT:
            return SolverConfig.from_db(
                design.direct_snr_db,
                magls_cutoff_hz=design.magls_cutoff_hz,
                magls_enabled=False,
                tikhonov_floor=design.tikhonov_floor,
            )
        return SolverConfig.from_db(
            design.reverb_snr_db,
            magls_cutoff_hz=design.magls_cutoff_hz,
            magls_enabled=design.magls_enabled,
            tikhonov_floor=design.tikhonov_floor,
        )

    @staticmethod
    def create_steering(design: DesignConfig) -> SteeringStrategy:
        return steering_strategy(design.steering, design.sh_padding)

    @staticmethod
    def create_direct_doa(design: DesignConfig) -> Direction:
        colatitude, azimuth = design.direct_doa
        return Direction(colatitude, azimuth)
