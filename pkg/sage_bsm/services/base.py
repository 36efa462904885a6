import logging
from pathlib import Path
from typing import TYPE_CHECKING, Any, Dict, Tuple

from sage_bsm.exceptions import ArtifactError, SageBsmError, StageError
from sage_bsm.helpers import RunConfig

if TYPE_CHECKING:
    from sage_bsm.services.client import BsmClient

logger = logging.getLogger(__name__)


class StageService:
    """
    Base class of the pipeline stages.

    Subclasses implement :meth:`execute`; :meth:`run` skips the work when the
    stage's artifacts are current and turns every failure into a
    :class:`StageError` carrying the stage name.

    Args:
        client: The client used for configuration, paths and artifacts.
    """

    stage = ""
    requires: Tuple[str, ...] = ()

    def __init__(self, client: "BsmClient") -> None:
        self.client = client

    @property
    def config(self) -> RunConfig:
        return self.client.config

    def path(self, name: str) -> Path:
        return self.client.paths.build_path(self.stage, name, create=True)

    def is_current(self) -> bool:
        """Whether the upstream and own manifests verify for this scene."""
        try:
            for stage in self.requires + (self.stage,):
                self.client.artifacts.verify(stage)
        except ArtifactError as error:
            logger.info("%s artifacts are not current: %s", self.stage, error)
            return False
        return True

    def run(self, force: bool = False) -> Any:
        """
        Runs the stage unless its artifacts are already current.

        Args:
            force (bool): Recompute even when the artifacts are current.

        Raises:
            StageError: Wrapping any domain or file-system error.
        """
        try:
            if not force and self.is_current():
                logger.info("%s artifacts are current, skipping", self.stage)
                return self.cached()
            logger.info("Running %s stage", self.stage)
            self.client.paths.manifest_path(self.stage).unlink(missing_ok=True)
            return self.execute()
        except StageError:
            raise
        except (SageBsmError, OSError) as error:
            logger.error("%s stage failed: %s", self.stage, error)
            raise StageError(self.stage, error) from error

    def inputs(self) -> Dict[str, Dict[str, Any]]:
        """Verified manifests of the upstream stages."""
        return {stage: self.client.artifacts.verify(stage) for stage in self.requires}

    def execute(self) -> Any:
        raise NotImplementedError(
            "StageService.execute() must be overridden in subclasses"
        )

    def cached(self) -> Any:
        return None
