import copy
import logging
import math
import sys
from pathlib import Path
from typing import Any, Callable, Dict, List, Optional, Tuple, Union

from sage_bsm.exceptions import ConfigurationError
from sage_bsm.helpers import (
    DesignConfig,
    EvalConfig,
    RunConfig,
    SceneConfig,
    StftSection,
)
from sage_bsm.utils import DefaultDigestStrategy, DigestStrategy

if sys.version_info >= (3, 11):
    import tomllib
else:
    import tomli as tomllib

logger = logging.getLogger(__name__)

PathLike = Union[str, Path]

PROFILES: Dict[str, Dict[str, Dict[str, Any]]] = {
    "desk": {
        "scene": {
            "room_dimensions": [4.0, 3.0, 2.5],
            "reflection_coefficients": [],
            "target_t60": 0.3,
            "max_order": 25,
            "speed_of_sound": 343.0,
            "sample_rate": 48000,
            "source_position": [2.1258330249197703, 1.85, 1.3],
            "source_wav": "",
            "source_duration": 2.0,
            "array_center": [1.0, 1.2, 1.3],
            "array_layout": "semicircle",
            "mic_count": 6,
            "mic_radius": 0.1,
            "mic_positions": [],
            "noise_enabled": False,
            "noise_snr_db": 20.0,
            "seed": 0,
        },
        "design": {
            "direct_doa": [math.pi / 2.0, math.pi / 6.0],
            "reverb_grid_size": 240,
            "direct_snr_db": math.inf,
            "reverb_snr_db": 20.0,
            "magls_cutoff_hz": 1500.0,
            "magls_enabled": True,
            "hrtf": "analytic",
            "ear_offset": 0.0875,
            "hrtf_sh_order": 30,
            "reference_sh_order": 14,
            "steering": "sh",
            "sh_padding": 10,
            "tikhonov_floor": 1e-12,
            "decomposition": True,
        },
        "stft": {"window_ms": 32.0, "hop_ms": 16.0, "window": "hamming"},
        "eval": {"bands": [], "frame_trim": 2, "gnuplot": False},
        "output": {"directory": "out"},
    },
}

PROFILES["paper"] = copy.deepcopy(PROFILES["desk"])
PROFILES["paper"]["scene"].update(
    {
        "room_dimensions": [8.0, 5.0, 3.0],
        "target_t60": 0.68,
        "max_order": 50,
        "source_position": [2.47, 2.27, 1.7],
        "source_duration": 5.0,
        "array_center": [2.0, 2.0, 1.7],
    }
)

SECTIONS = ("scene", "design", "stft", "eval", "output")

Converter = Callable[[str, Any, Path], Any]


def _fail(key: str, message: str) -> ConfigurationError:
    return ConfigurationError(f"{key}: {message}")


def _number(key: str, value: Any) -> float:
    if isinstance(value, str) and value.strip().lower() in ("inf", "+inf"):
        return math.inf
    if isinstance(value, bool) or not isinstance(value, (int, float)):
        raise _fail(key, f"expected a number, got {value!r}")
    if math.isnan(value):
        raise _fail(key, "NaN is not allowed")
    return float(value)


def _positive(key: str, value: Any, _: Path) -> float:
    number = _number(key, value)
    if not number > 0.0 or math.isinf(number):
        raise _fail(key, f"expected a positive finite number, got {value!r}")
    return number


def _non_negative(key: str, value: Any, _: Path) -> float:
    number = _number(key, value)
    if number < 0.0 or math.isinf(number):
        raise _fail(key, f"expected a non-negative finite number, got {value!r}")
    return number


def _decibels(key: str, value: Any, _: Path) -> float:
    number = _number(key, value)
    if number == -math.inf:
        raise _fail(key, "an SNR of -inf dB is not allowed")
    return number


def _integer(minimum: int) -> Converter:
    def convert(key: str, value: Any, _: Path) -> int:
        if isinstance(value, bool) or not isinstance(value, int):
            raise _fail(key, f"expected an integer, got {value!r}")
        if value < minimum:
            raise _fail(key, f"expected at least {minimum}, got {value}")
        return int(value)

    return convert


def _boolean(key: str, value: Any, _: Path) -> bool:
    if not isinstance(value, bool):
        raise _fail(key, f"expected true or false, got {value!r}")
    return value


def _choice(*options: str) -> Converter:
    def convert(key: str, value: Any, _: Path) -> str:
        if value not in options:
            raise _fail(key, f"expected one of {', '.join(options)}, got {value!r}")
        return str(value)

    return convert


def _text(key: str, value: Any, _: Path) -> str:
    if not isinstance(value, str):
        raise _fail(key, f"expected a string, got {value!r}")
    return value


def _vector(size: int) -> Converter:
    def convert(key: str, value: Any, _: Path) -> Tuple[float, ...]:
        if not isinstance(value, (list, tuple)) or len(value) != size:
            raise _fail(key, f"expected {size} numbers, got {value!r}")
        return tuple(_number(key, item) for item in value)

    return convert


def _coefficients(key: str, value: Any, _: Path) -> Tuple[float, ...]:
    if not isinstance(value, (list, tuple)) or len(value) not in (0, 1, 6):
        raise _fail(key, "expected an empty list, one value or six values")
    values = tuple(_number(key, item) for item in value)
    if any(not 0.0 <= item < 1.0 for item in values):
        raise _fail(key, f"reflection coefficients must lie in [0, 1), got {values}")
    return values


def _mic_positions(key: str, value: Any, base: Path) -> Tuple[Tuple[float, ...], ...]:
    if not isinstance(value, (list, tuple)):
        raise _fail(key, "expected a list of [radius, colatitude, azimuth] rows")
    return tuple(_vector(3)(key, row, base) for row in value)


def _bands(key: str, value: Any, base: Path) -> Tuple[Tuple[float, ...], ...]:
    if not isinstance(value, (list, tuple)):
        raise _fail(key, "expected a list of [low, high] pairs")
    bands = tuple(_vector(2)(key, row, base) for row in value)
    for low, high in bands:
        if not 0.0 <= low < high:
            raise _fail(key, f"band [{low}, {high}] is empty")
    return bands


def _input_file(allow: Tuple[str, ...]) -> Converter:
    def convert(key: str, value: Any, base: Path) -> str:
        text = _text(key, value, base)
        if text in allow:
            return text
        path = Path(text)
        if not path.is_absolute():
            path = base / path
        if not path.is_file():
            raise _fail(key, f"file not found: {path}")
        return str(path)

    return convert


SCHEMA: Dict[str, Dict[str, Converter]] = {
    "scene": {
        "room_dimensions": _vector(3),
        "reflection_coefficients": _coefficients,
        "target_t60": _positive,
        "max_order": _integer(0),
        "speed_of_sound": _positive,
        "sample_rate": _integer(1),
        "source_position": _vector(3),
        "source_wav": _input_file(("",)),
        "source_duration": _positive,
        "array_center": _vector(3),
        "array_layout": _choice("semicircle", "custom"),
        "mic_count": _integer(1),
        "mic_radius": _positive,
        "mic_positions": _mic_positions,
        "noise_enabled": _boolean,
        "noise_snr_db": _decibels,
        "seed": _integer(0),
    },
    "design": {
        "direct_doa": _vector(2),
        "reverb_grid_size": _integer(1),
        "direct_snr_db": _decibels,
        "reverb_snr_db": _decibels,
        "magls_cutoff_hz": _positive,
        "magls_enabled": _boolean,
        "hrtf": _input_file(("analytic",)),
        "ear_offset": _positive,
        "hrtf_sh_order": _integer(0),
        "reference_sh_order": _integer(0),
        "steering": _choice("sh", "closed"),
        "sh_padding": _integer(0),
        "tikhonov_floor": _non_negative,
        "decomposition": _boolean,
    },
    "stft": {"window_ms": _positive, "hop_ms": _positive, "window": _text},
    "eval": {"bands": _bands, "frame_trim": _integer(0), "gnuplot": _boolean},
    "output": {"directory": _text},
}


class Configurations:
    """
    This class loads and validates run configurations.

    A configuration starts from a built-in profile (``desk`` or ``paper``);
    a TOML file overrides keys of that profile section by section. Unknown
    sections and keys are errors.

    Args:
        digest_strategy (DigestStrategy, optional): The strategy for the
            scene digest.

    Example:
        configurations = Configurations()
        config = configurations.load("run.toml", profile="desk", seed=7)
        digest = configurations.digest(config)
    """

    def __init__(self, digest_strategy: Optional[DigestStrategy] = None) -> None:
        self.digest_strategy = digest_strategy or DefaultDigestStrategy()

    @staticmethod
    def profile(name: str) -> Dict[str, Dict[str, Any]]:
        """
        Returns a deep copy of a built-in profile.

        Raises:
            ConfigurationError: If the profile does not exist.
        """
        if name not in PROFILES:
            raise ConfigurationError(
                f"unknown profile {name!r}, "
                f"expected one of {', '.join(sorted(PROFILES))}"
            )
        return copy.deepcopy(PROFILES[name])

    def read(self, path: PathLike) -> Dict[str, Any]:
        """
        Reads a TOML configuration file.

        Raises:
            ConfigurationError: If the file is missing or not valid TOML.
        """
        path = Path(path)
        logger.info("Reading configuration from %s", path)
        try:
            with path.open("rb") as handle:
                return tomllib.load(handle)
        except FileNotFoundError as error:
            raise ConfigurationError(f"configuration file not found: {path}") from error
        except tomllib.TOMLDecodeError as error:
            raise ConfigurationError(f"{path}: {error}") from error

    def load(
        self,
        path: Optional[PathLike] = None,
        profile: str = "desk",
        output_directory: Optional[str] = None,
        seed: Optional[int] = None,
    ) -> RunConfig:
        """
        Builds a validated configuration from a profile, a file and overrides.

        Args:
            path (str, optional): TOML file overriding profile keys.
            profile (str): ``"desk"`` or ``"paper"``.
            output_directory (str, optional): Overrides ``[output] directory``.
            seed (int, optional): Overrides ``[scene] seed``.

        Returns:
            RunConfig: The validated configuration.

        Raises:
            ConfigurationError: On unknown keys or invalid values.
        """
        values = self.profile(profile)
        base = Path.cwd()
        if path is not None:
            overrides = self.read(path)
            base = Path(path).resolve().parent
            self.merge(values, overrides)
        if output_directory is not None:
            values["output"]["directory"] = output_directory
        if seed is not None:
            values["scene"]["seed"] = seed
        config = self.validate(values, profile, base)
        logger.info("Loaded %s profile configuration", profile)
        return config

    @staticmethod
    def merge(values: Dict[str, Dict[str, Any]], overrides: Dict[str, Any]) -> None:
        for section, entries in overrides.items():
            if section not in SECTIONS:
                raise ConfigurationError(f"unknown section [{section}]")
            if not isinstance(entries, dict):
                raise ConfigurationError(f"[{section}] must be a table")
            for key, value in entries.items():
                if key not in SCHEMA[section]:
                    raise ConfigurationError(f"unknown key {section}.{key}")
                values[section][key] = value

    def validate(
        self, values: Dict[str, Dict[str, Any]], profile: str, base: Path
    ) -> RunConfig:
        """
        Converts plain values into a :class:`RunConfig`.

        Relative file paths are resolved against ``base``.
        """
        converted: Dict[str, Dict[str, Any]] = {}
        for section in SECTIONS:
            entries = values.get(section, {})
            unknown = set(entries) - set(SCHEMA[section])
            if unknown:
                raise ConfigurationError(f"unknown key {section}.{sorted(unknown)[0]}")
            converted[section] = {
                key: convert(f"{section}.{key}", entries[key], base)
                for key, convert in SCHEMA[section].items()
                if key in entries
            }
            missing = set(SCHEMA[section]) - set(entries)
            if missing:
                raise ConfigurationError(f"missing key {section}.{sorted(missing)[0]}")

        scene = converted["scene"]
        if scene["source_wav"] == "":
            scene["source_wav"] = None
        if scene["array_layout"] == "custom" and not scene["mic_positions"]:
            raise ConfigurationError(
                "scene.mic_positions: a custom array needs at least one row"
            )
        design = converted["design"]
        colatitude, azimuth = design["direct_doa"]
        if not 0.0 <= colatitude <= math.pi:
            raise ConfigurationError(
                f"design.direct_doa: colatitude must lie in [0, pi], got {colatitude}"
            )
        design["direct_doa"] = (colatitude, azimuth % (2.0 * math.pi))
        stft = converted["stft"]
        if stft["hop_ms"] > stft["window_ms"]:
            raise ConfigurationError("stft.hop_ms must not exceed stft.window_ms")
        return RunConfig(
            profile,
            SceneConfig(**scene),
            DesignConfig(**design),
            StftSection(**stft),
            EvalConfig(**converted["eval"]),
            converted["output"]["directory"],
        )

    def input_files(self, config: RunConfig) -> List[str]:
        files = []
        if config.scene.source_wav:
            files.append(config.scene.source_wav)
        if not config.design.analytic_hrtf:
            files.append(config.design.hrtf)
        return files

    def digest(self, config: RunConfig) -> str:
        """
        Scene digest: configuration (output directory excluded) plus the
        contents of every input file.

        Example:
            Configurations().digest(config)  # '3f2a...'
        """
        params = config.to_dict()
        params.pop("output")
        params["scene"].pop("source_wav")
        if not config.design.analytic_hrtf:
            params["design"]["hrtf"] = "file"
        return self.digest_strategy.generate(params, self.input_files(config))
