import logging
from typing import Dict, Optional

from sage_bsm.helpers import RunConfig
from sage_bsm.services.artifacts import Artifacts
from sage_bsm.services.configurations import Configurations
from sage_bsm.services.designs import Designs
from sage_bsm.services.evaluations import Evaluations
from sage_bsm.services.renders import Renders
from sage_bsm.services.simulations import Simulations
from sage_bsm.utils import ArtifactPathBuilder, PathLike

logger = logging.getLogger(__name__)


class BsmClient:
    """
    This class runs the simulate, design, render and evaluate stages of one
    configuration against one output directory.

    Args:
        config (RunConfig): The validated run configuration.
        configurations (Configurations, optional): Used for the scene digest.

    Attributes:
        simulations: Simulation stage (microphone signals, reference, stats).
        designs: Filter design stage (direct and reverberant banks).
        renders: Rendering stage (binaural estimates and references).
        evaluations: Evaluation stage (NMSE reports, comparison, verdict).
        artifacts: Artifact I/O and manifest verification.

    Example:
        client = BsmClient.from_file("run.toml", profile="desk", seed=3)
        verdict = client.run_pipeline()
        print(verdict["pass"])
    """

    def __init__(
        self, config: RunConfig, configurations: Optional[Configurations] = None
    ) -> None:
        self.config = config
        self.configurations = configurations or Configurations()
        self.digest = self.configurations.digest(config)
        self.paths = ArtifactPathBuilder(config.output_directory)
        self.artifacts = Artifacts(self)
        self.simulations = Simulations(self)
        self.designs = Designs(self)
        self.renders = Renders(self)
        self.evaluations = Evaluations(self)

    @classmethod
    def from_file(
        cls,
        path: Optional[PathLike] = None,
        profile: str = "desk",
        output_directory: Optional[str] = None,
        seed: Optional[int] = None,
    ) -> "BsmClient":
        """
        Loads a configuration and builds a client for it.

        Raises:
            ConfigurationError: If the configuration is invalid.
        """
        configurations = Configurations()
        config = configurations.load(path, profile, output_directory, seed)
        return cls(config, configurations)

    def run_pipeline(self, force: bool = False) -> Dict[str, bool]:
        """
        Runs all four stages in order, stopping at the first failure.

        Args:
            force (bool): Recompute stages whose artifacts are current.

        Returns:
            dict: The evaluation verdict.

        Raises:
            StageError: Tagged with the failing stage.
        """
        logger.info("Running pipeline for scene %s", self.digest[:12])
        self.simulations.run(force)
        self.designs.run(force)
        self.renders.run(force)
        return self.evaluations.run(force)
