try:
    from importlib.metadata import PackageNotFoundError, version
except ImportError:
    from importlib_metadata import PackageNotFoundError, version

try:
    __version__ = version(__name__)
except PackageNotFoundError:
    # package is not installed
    __version__ = "unknown"

from ._internals import (
    Component,
    Framework,
    cached_quantity,
    get_base_component,
    get_base_components,
    get_mdl,
    parameter,
)
from .data import VideoSource, generate_synthetic
from .helpers import get_experiments, parse_config, run_ablation
from .recognizer import RecognitionModel, Recognizer
from .training import Experiment, evaluate_run, load_run, train_run
