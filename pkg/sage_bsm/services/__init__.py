from .artifacts import Artifacts
from .configurations import Configurations
from .designs import Designs
from .evaluations import Evaluations
from .renders import Renders
from .simulations import Simulations
