"""
The hierarchical recognizer: spatial encoders, locators, integrators and the
framework class that assembles them.
"""
from . import integration, spatial, temporal
from .batch import BatchEpisode, run_batch
from .integration import (
    Classifier,
    Integrator,
    classify,
    integrate,
    intermediate_predict,
    predict_proba,
)
from .locator import (
    ActionSpace,
    Episode,
    LocatorState,
    LocatorStoppedError,
    StepLog,
    TrajectoryRow,
    apply_action,
    baseline_frames,
    decide,
    global_snapshot,
    init_locators,
    mark_observed,
    observe,
    parse_mode,
    policy_observation,
    run_episode,
)
from .model import RecognitionModel
from .recognizer import Recognizer
from .spatial import (
    MlpEmbedder,
    Passthrough,
    SpatialEncoder,
    declared_cost,
    encode_frame,
    encode_frames,
)
from .temporal import LSTM, TemporalNet, TemporalState, select_state
