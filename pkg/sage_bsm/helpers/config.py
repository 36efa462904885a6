import math
from dataclasses import asdict, dataclass
from typing import Any, Dict, Optional, Tuple


@dataclass(frozen=True)
class SceneConfig:
    """
    The ``[scene]`` section of a run configuration.

    Either ``reflection_coefficients`` (one or six values) or ``target_t60``
    defines the walls; an empty coefficient list means ``target_t60`` is used.
    ``array_layout`` is ``"semicircle"`` (``mic_count`` microphones of radius
    ``mic_radius`` on the horizontal plane) or ``"custom"`` (``mic_positions``
    as ``[radius, colatitude, azimuth]`` rows).
    """

    room_dimensions: Tuple[float, float, float]
    reflection_coefficients: Tuple[float, ...]
    target_t60: float
    max_order: int
    speed_of_sound: float
    sample_rate: int
    source_position: Tuple[float, float, float]
    source_wav: Optional[str]
    source_duration: float
    array_center: Tuple[float, float, float]
    array_layout: str
    mic_count: int
    mic_radius: float
    mic_positions: Tuple[Tuple[float, float, float], ...]
    noise_enabled: bool
    noise_snr_db: float
    seed: int


@dataclass(frozen=True)
class DesignConfig:
    direct_doa: Tuple[float, float]
    reverb_grid_size: int
    direct_snr_db: float
    reverb_snr_db: float
    magls_cutoff_hz: float
    magls_enabled: bool
    hrtf: str
    ear_offset: float
    hrtf_sh_order: int
    reference_sh_order: int
    steering: str
    sh_padding: int
    tikhonov_floor: float
    decomposition: bool

    @property
    def analytic_hrtf(self) -> bool:
        return self.hrtf == "analytic"


@dataclass(frozen=True)
class StftSection:
    window_ms: float
    hop_ms: float
    window: str


@dataclass(frozen=True)
class EvalConfig:
    """``bands`` is a tuple of ``(low, high)`` Hz pairs; empty means octave bands."""

    bands: Tuple[Tuple[float, float], ...]
    frame_trim: int
    gnuplot: bool


@dataclass(frozen=True)
class RunConfig:
    """
    A validated run configuration.

    Example:
        config = Configurations().load("run.toml", profile="desk")
        config.scene.room_dimensions  # (4.0, 3.0, 2.5)
    """

    profile: str
    scene: SceneConfig
    design: DesignConfig
    stft: StftSection
    eval: EvalConfig
    output_directory: str

    def to_dict(self) -> Dict[str, Any]:
        """Nested plain-data form; ``inf`` is written as the string ``"inf"``."""
        return {
            "profile": self.profile,
            "scene": _plain(asdict(self.scene)),
            "design": _plain(asdict(self.design)),
            "stft": _plain(asdict(self.stft)),
            "eval": _plain(asdict(self.eval)),
            "output": {"directory": self.output_directory},
        }


def _plain(value: Any) -> Any:
    if isinstance(value, dict):
        return {key: _plain(item) for key, item in value.items()}
    if isinstance(value, (list, tuple)):
        return [_plain(item) for item in value]
    if isinstance(value, float) and math.isinf(value):
        return "inf" if value > 0 else "-inf"
    return value
