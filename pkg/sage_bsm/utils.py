import hashlib
import json
from pathlib import Path
from typing import Any, Dict, Optional, Sequence, Union

PathLike = Union[str, Path]

STAGES = ("simulate", "design", "render", "evaluate")


def file_sha256(path: PathLike, chunk_size: int = 1 << 20) -> str:
    """SHA-256 of a file's bytes, read in chunks."""
    digest = hashlib.sha256()
    with Path(path).open("rb") as handle:
        for block in iter(lambda: handle.read(chunk_size), b""):
            digest.update(block)
    return digest.hexdigest()


class DigestStrategy:
    """
    Abstract base class for scene digest strategies.

    Example:
        class FixedDigestStrategy(DigestStrategy):
            def generate(self, params, files):
                return "0" * 64
    """

    def generate(self, params: Dict[str, Any], files: Sequence[PathLike] = ()) -> str:
        """
        Generates a digest identifying a run configuration and its inputs.

        Args:
            params (dict): Plain-data configuration.
            files (list): Input files whose contents are part of the scene.

        Returns:
            str: A 64-character hex digest.
        """
        raise NotImplementedError(
            "DigestStrategy.generate() must be overridden in subclasses"
        )


class DefaultDigestStrategy(DigestStrategy):
    """
    SHA-256 over the canonical JSON of the parameters followed by the
    SHA-256 of every input file, in the order given.

    Example:
        strategy = DefaultDigestStrategy()
        strategy.generate({"scene": {"seed": 0}})
    """

    def generate(self, params: Dict[str, Any], files: Sequence[PathLike] = ()) -> str:
        digest = hashlib.sha256(self.canonical(params).encode("utf-8"))
        for path in files:
            digest.update(file_sha256(path).encode("ascii"))
        return digest.hexdigest()

    @staticmethod
    def canonical(params: Dict[str, Any]) -> str:
        """
        Canonical JSON text: sorted keys, no whitespace, NaN rejected.

        Example:
            DefaultDigestStrategy.canonical({"b": 1, "a": [1.5]})
            # '{"a":[1.5],"b":1}'
        """
        return json.dumps(
            params, sort_keys=True, separators=(",", ":"), allow_nan=False
        )


class ArtifactPathBuilder:
    """
    Builds artifact paths below an output directory, one directory per stage.

    Args:
        output_directory (str): Root of the artifact tree.

    Example:
        paths = ArtifactPathBuilder("out")
        paths.build_path("design", "bank_direct.bsmf")  # out/design/bank_direct.bsmf
    """

    MANIFEST = "manifest.json"

    def __init__(self, output_directory: PathLike) -> None:
        self.output_directory = Path(output_directory)

    def stage_directory(self, stage: str, create: bool = False) -> Path:
        if stage not in STAGES:
            raise ValueError(f"unknown stage {stage!r}")
        directory = self.output_directory / stage
        if create:
            directory.mkdir(parents=True, exist_ok=True)
        return directory

    def build_path(self, stage: str, name: str, create: bool = False) -> Path:
        return self.stage_directory(stage, create) / name

    def manifest_path(self, stage: str, create: bool = False) -> Path:
        return self.build_path(stage, self.MANIFEST, create)

    def relative(self, path: PathLike, stage: Optional[str] = None) -> str:
        base = self.stage_directory(stage) if stage else self.output_directory
        return Path(path).relative_to(base).as_posix()
