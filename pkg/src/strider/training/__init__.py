"""The three-stage training pipeline, evaluation and run directories."""
from . import stages
from .experiment import Experiment
from .rundir import RunDirError, evaluate_run, is_complete, load_run, train_run
from .stages import (
    STAGES,
    FreezeViolation,
    StageConfig,
    collect_episode,
    evaluate,
    frozen,
    stage1_warmup,
    stage2_policy,
    stage3_finetune,
)
