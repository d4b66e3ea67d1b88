"""Synthetic unit-structured videos, VIMF feature files and batching."""
from .io import (
    FeatureFileError,
    batch_iter,
    load_feature_dir,
    load_feature_file,
    write_feature_dir,
    write_feature_file,
)
from .source import VideoSource
from .synthetic import (
    DatasetSplit,
    UnitSpec,
    VideoSample,
    class_counts,
    generate_synthetic,
    latent_oracle,
)
