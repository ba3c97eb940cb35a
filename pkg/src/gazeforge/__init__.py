"""gazeforge: eye-trajectory dataset generation and evaluation toolkit."""

__version__ = "0.1.0"

from .model import (
    ClassLabel,
    ConfigError,
    EyeLandmarks,
    LandmarkRecord,
    NormalizedSample,
    PipelineConfig,
    Space,
    SpaceMismatchError,
    StageError,
    Trajectory,
    validate_config,
)

__all__ = [
    "ClassLabel",
    "ConfigError",
    "EyeLandmarks",
    "LandmarkRecord",
    "NormalizedSample",
    "PipelineConfig",
    "Space",
    "SpaceMismatchError",
    "StageError",
    "Trajectory",
    "validate_config",
    "__version__",
]
