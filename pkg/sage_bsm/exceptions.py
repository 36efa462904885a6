from typing import Optional


class SageBsmError(Exception):
    """Base class for every error raised by ``sage_bsm``."""


class GeometryError(SageBsmError, ValueError):
    pass


class HrtfError(SageBsmError):
    pass


class MissingHrtfError(HrtfError, FileNotFoundError):
    pass


class HrtfFormatError(HrtfError, ValueError):
    pass


class HrtfChannelMismatchError(HrtfFormatError):
    pass


class ShFitError(HrtfError, ValueError):
    """
    Raised when a spherical-harmonic fit has fewer directions than coefficients.

    Args:
        order (int): The requested SH order.
        direction_count (int): Directions available for the fit.
    """

    def __init__(self, order: int, direction_count: int) -> None:
        self.order = order
        self.direction_count = direction_count
        super().__init__(
            f"SH fit of order {order} needs at least {(order + 1) ** 2} "
            f"directions, got {direction_count}"
        )


class SolverError(SageBsmError):
    """
    Raised when a BSM filter cannot be computed.

    Args:
        message (str): What went wrong.
        bin_index (int, optional): Frequency bin being solved, when known.
    """

    def __init__(self, message: str, bin_index: Optional[int] = None) -> None:
        self.bin_index = bin_index
        if bin_index is not None:
            message = f"bin {bin_index}: {message}"
        super().__init__(message)


class IllConditionedError(SolverError):
    def __init__(
        self, condition: float, ceiling: float, bin_index: Optional[int] = None
    ) -> None:
        self.condition = condition
        self.ceiling = ceiling
        super().__init__(
            f"system is ill-conditioned (condition estimate {condition:.3e} "
            f"exceeds ceiling {ceiling:.1e})",
            bin_index,
        )


class NonFiniteInputError(SolverError, ValueError):
    pass


class StftError(SageBsmError, ValueError):
    pass


class ColaError(StftError):
    pass


class SceneError(SageBsmError, ValueError):
    pass


class OutsideRoomError(SceneError):
    pass


class InsufficientDecayError(SceneError):
    pass


class DimensionMismatchError(SageBsmError, ValueError):
    pass


class ProvenanceError(SageBsmError, ValueError):
    pass


class EvaluationError(SageBsmError, ValueError):
    pass


class EmptyBandError(EvaluationError):
    pass


class SceneMismatchError(EvaluationError):
    pass


class ConfigurationError(SageBsmError, ValueError):
    pass


class ArtifactError(SageBsmError):
    pass


class MissingArtifactError(ArtifactError, FileNotFoundError):
    pass


class StaleArtifactError(ArtifactError):
    pass


class CorruptArtifactError(ArtifactError):
    pass


class FilterBankFormatError(ArtifactError, ValueError):
    pass


class StageError(SageBsmError):
    """
    Wraps a failure with the name of the pipeline stage it happened in.

    Args:
        stage (str): Stage name (``simulate``, ``design``, ``render``,
            ``evaluate``).
        cause (Exception): The underlying error.

    Example:
        try:
            client.renders.run()
        except StageError as error:
            print(error)  # Output: "[render] stale artifact ..."
    """

    def __init__(self, stage: str, cause: Exception) -> None:
        self.stage = stage
        self.cause = cause
        super().__init__(f"[{stage}] {cause}")
