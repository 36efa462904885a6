import json
import logging
import math
from pathlib import Path
from typing import TYPE_CHECKING, Any, Dict, Optional, Sequence

import numpy as np
from scipy.io import wavfile

from sage_bsm.exceptions import (
    CorruptArtifactError,
    MissingArtifactError,
    StaleArtifactError,
)
from sage_bsm.utils import PathLike, file_sha256

if TYPE_CHECKING:
    from sage_bsm.services.client import BsmClient

logger = logging.getLogger(__name__)


def _plain(value: Any) -> Any:
    if isinstance(value, dict):
        return {str(key): _plain(item) for key, item in value.items()}
    if isinstance(value, (list, tuple)):
        return [_plain(item) for item in value]
    if isinstance(value, np.ndarray):
        return _plain(value.tolist())
    if isinstance(value, (np.bool_, bool)):
        return bool(value)
    if isinstance(value, np.integer):
        return int(value)
    if isinstance(value, (np.floating, float)):
        value = float(value)
        if math.isnan(value):
            return None
        if math.isinf(value):
            return "inf" if value > 0 else "-inf"
        return value
    return value


class Artifacts:
    """
    This class reads and writes the files exchanged between pipeline stages.

    Every stage directory carries a ``manifest.json`` with the scene digest
    and the SHA-256 of each file the stage wrote. Downstream stages call
    :meth:`verify` before reading anything.

    Args:
        client: The client owning the output directory and scene digest.

    Example:
        artifacts = Artifacts(bsm_client)
        manifest = artifacts.verify("simulate")
    """

    def __init__(self, client: "BsmClient") -> None:
        self.client = client

    def write_wav(self, path: PathLike, signals: np.ndarray, sample_rate: int) -> None:
        """Writes (channels, samples) as a float32 RIFF file."""
        data = np.atleast_2d(np.asarray(signals, dtype=np.float32)).T
        if data.shape[1] == 1:
            data = data[:, 0]
        wavfile.write(str(path), int(sample_rate), data)

    def read_wav(self, path: PathLike) -> np.ndarray:
        """
        Reads a WAV file as (channels, samples) float64.

        Raises:
            MissingArtifactError: If the file does not exist.
        """
        path = Path(path)
        if not path.is_file():
            raise MissingArtifactError(f"missing artifact {path}")
        _, data = wavfile.read(str(path))
        return np.atleast_2d(np.asarray(data, dtype=float).T)

    def write_array(self, path: PathLike, array: np.ndarray) -> None:
        with Path(path).open("wb") as handle:
            np.save(handle, np.ascontiguousarray(array), allow_pickle=False)

    def read_array(self, path: PathLike) -> np.ndarray:
        path = Path(path)
        if not path.is_file():
            raise MissingArtifactError(f"missing artifact {path}")
        try:
            return np.load(path, allow_pickle=False)
        except ValueError as error:
            raise CorruptArtifactError(f"{path}: {error}") from error

    def write_json(self, path: PathLike, data: Dict[str, Any]) -> None:
        """JSON with sorted keys; NaN becomes ``null`` and infinities ``"inf"``."""
        text = json.dumps(_plain(data), sort_keys=True, indent=2, allow_nan=False)
        Path(path).write_text(text + "\n", encoding="utf-8")

    def read_json(self, path: PathLike) -> Dict[str, Any]:
        path = Path(path)
        if not path.is_file():
            raise MissingArtifactError(f"missing artifact {path}")
        try:
            return json.loads(path.read_text(encoding="utf-8"))
        except json.JSONDecodeError as error:
            raise CorruptArtifactError(f"{path}: {error}") from error

    def write_manifest(
        self,
        stage: str,
        files: Sequence[PathLike],
        metadata: Optional[Dict[str, Any]] = None,
    ) -> Path:
        """
        Records the scene digest and a SHA-256 per file of ``stage``.

        Returns:
            Path: The manifest path.
        """
        paths = self.client.paths
        hashes = {paths.relative(path, stage): file_sha256(path) for path in files}
        manifest = {
            "stage": stage,
            "digest": self.client.digest,
            "files": hashes,
            "metadata": metadata or {},
        }
        path = self.client.paths.manifest_path(stage)
        self.write_json(path, manifest)
        logger.info("Wrote %s manifest with %s files", stage, len(hashes))
        return path

    def verify(self, stage: str) -> Dict[str, Any]:
        """
        Checks the artifacts of ``stage`` against its manifest.

        Returns:
            dict: The manifest.

        Raises:
            MissingArtifactError: If the manifest or a listed file is missing.
            StaleArtifactError: If the stage ran for a different scene.
            CorruptArtifactError: If a file no longer matches its hash.
        """
        path = self.client.paths.manifest_path(stage)
        if not path.is_file():
            raise MissingArtifactError(
                f"no {stage} artifacts in {path.parent}; run {stage} first"
            )
        manifest = self.read_json(path)
        if manifest.get("digest") != self.client.digest:
            raise StaleArtifactError(
                f"{stage} artifacts belong to scene "
                f"{str(manifest.get('digest'))[:12]}, "
                f"expected {self.client.digest[:12]}"
            )
        directory = self.client.paths.stage_directory(stage)
        for name, expected in sorted(manifest.get("files", {}).items()):
            target = directory / name
            if not target.is_file():
                raise MissingArtifactError(f"missing artifact {target}")
            if file_sha256(target) != expected:
                raise CorruptArtifactError(
                    f"artifact {target} does not match its manifest"
                )
        logger.debug("Verified %s artifacts", stage)
        return manifest
