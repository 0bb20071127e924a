"""Sliding-window normalisation of surface EMG for elbow-movement classification."""
from .errors import (ConfigurationError, DataError, DesignError, DomainError,
                     NotReadyError, TrainingError)
from .normalization import SlidingWindowBuffer, swn, zscore
from .pipeline import FeatureConfig, FeatureMatrix, feature_stream, preprocess_emg

__version__ = "0.1.0"

__all__ = [
    "ConfigurationError", "DataError", "DesignError", "DomainError", "NotReadyError",
    "TrainingError", "SlidingWindowBuffer", "swn", "zscore", "FeatureConfig",
    "FeatureMatrix", "feature_stream", "preprocess_emg", "__version__",
]
