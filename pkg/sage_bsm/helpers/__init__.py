from .config import DesignConfig, EvalConfig, RunConfig, SceneConfig, StftSection
from .directions import (
    ArrayGeometry,
    Direction,
    FrequencyGrid,
    Microphone,
    SteeringMatrix,
)
from .filters import BsmFilterBank, CovarianceModel, FilterProvenance, SolverConfig
from .report import Comparison, NmseReport
from .scene import ImageSourceList, MicSignals, RoomSpec, Scene, ShSignal
from .spectra import (
    BinauralSpectrogram,
    Provenance,
    Spectrogram,
    SpectrogramOrigin,
    StftConfig,
)
from .transfer import HrtfSet, HrtfSHCoefficients
