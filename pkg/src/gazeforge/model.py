"""Core data types, units, and invariants shared by every pipeline stage.

Everything here is immutable value data: trajectories wrap read-only float64
arrays, and every stage is a pure function of (input, config). Coordinate
spaces are tagged explicitly because normalized iris space and canvas pixel
space look identical in memory and silent mixing is the likeliest bug.
"""
from __future__ import annotations

from dataclasses import dataclass, fields
from enum import Enum

import numpy as np


class Space(Enum):
    """Coordinate space a trajectory lives in."""

    NORMALIZED = "normalized"  # dimensionless iris-aperture fractions, nominally [0, 1]
    CANVAS = "canvas"          # simulator canvas pixels


class ClassLabel(Enum):
    """Behavior class. Integer encoding is fixed: 1 = reading, 0 = conversation."""

    READING = 1
    CONVERSATION = 0

    @property
    def short_name(self) -> str:
        return self.name.lower()


class ConfigError(ValueError):
    """Raised by validate_config with the complete list of violations."""

    def __init__(self, violations: list[str]):
        self.violations = list(violations)
        super().__init__("; ".join(self.violations))


class SpaceMismatchError(ValueError):
    """An operation received a trajectory in the wrong coordinate space."""


class StageError(RuntimeError):
    """A pipeline stage failed; message carries the stage tag and input id."""

    def __init__(self, stage: str, source: str, cause: Exception):
        self.stage = stage
        self.source = source
        self.cause = cause
        super().__init__(f"stage={stage} input={source}: {cause}")


@dataclass(frozen=True)
class EyeLandmarks:
    """Raw per-eye landmark coordinates for one frame, in source-video pixels."""

    iris_x: float
    iris_y: float
    inner_corner_x: float
    outer_corner_x: float
    eyelid_top_y: float
    eyelid_bottom_y: float
    valid: bool = True


@dataclass(frozen=True)
class LandmarkRecord:
    """One frame of upstream landmark-extractor output (both eyes)."""

    frame_index: int
    left: EyeLandmarks
    right: EyeLandmarks
    timestamp_s: float | None = None

    def __post_init__(self):
        if self.frame_index < 0:
            raise ValueError(f"frame_index must be non-negative, got {self.frame_index}")


@dataclass(frozen=True)
class NormalizedSample:
    """Iris position as fractions of the eye aperture.

    Values may fall outside [0, 1] before blink filtering; those are artifacts
    and are removed downstream. An invalid sample carries placeholder
    coordinates (never NaN) and valid=False.
    """

    n_x: float
    n_y: float
    frame_index: int
    valid: bool = True

    @classmethod
    def invalid(cls, frame_index: int) -> "NormalizedSample":
        return cls(n_x=0.0, n_y=0.0, frame_index=frame_index, valid=False)


@dataclass(frozen=True, eq=False)
class Trajectory:
    """Ordered 2D samples in a declared coordinate space, at a fixed frame rate.

    The sample array is copied on construction and marked read-only, so
    trajectories are safe to share across concurrent readers.
    """

    samples: np.ndarray  # shape (n, 2), float64, read-only
    fps: float
    space: Space
    source_id: str = ""

    def __post_init__(self):
        arr = np.array(self.samples, dtype=np.float64)
        if arr.ndim != 2 or arr.shape[1] != 2:
            raise ValueError(f"samples must have shape (n, 2), got {arr.shape}")
        if arr.shape[0] == 0:
            raise ValueError("trajectory must contain at least one sample")
        if not np.all(np.isfinite(arr)):
            raise ValueError("trajectory samples must be finite")
        if not self.fps > 0:
            raise ValueError(f"fps must be positive, got {self.fps}")
        arr.setflags(write=False)
        object.__setattr__(self, "samples", arr)
        object.__setattr__(self, "fps", float(self.fps))

    def __len__(self) -> int:
        return self.samples.shape[0]

    @property
    def xs(self) -> np.ndarray:
        return self.samples[:, 0]

    @property
    def ys(self) -> np.ndarray:
        return self.samples[:, 1]

    @property
    def duration_s(self) -> float:
        return (len(self) - 1) / self.fps

    def with_samples(self, samples, space: Space | None = None) -> "Trajectory":
        """New trajectory with replaced samples, same fps/source (optionally retagged)."""
        return Trajectory(
            samples=samples,
            fps=self.fps,
            space=self.space if space is None else space,
            source_id=self.source_id,
        )


def require_space(traj: Trajectory, space: Space, op: str) -> None:
    """Stage-boundary space check; raises SpaceMismatchError on mismatch."""
    if traj.space is not space:
        raise SpaceMismatchError(
            f"{op} requires {space.value}-space input, got {traj.space.value} "
            f"(source_id={traj.source_id!r})"
        )


# Largest integer exactly representable in float64; session_count * session_frames
# beyond this would silently lose precision in downstream float arithmetic.
_MAX_EXACT_INT = 2**53


@dataclass(frozen=True)
class PipelineConfig:
    """All generation and evaluation parameters, with paper defaults."""

    canvas_width_px: int = 1280
    canvas_height_px: int = 720
    target_fps: float = 25.0
    session_count: int = 72
    session_frames: int = 7500
    ivt_fixation_threshold_px_per_frame: float = 5.0
    ivt_saccade_threshold_px_per_frame: float = 15.0
    speed_scale_reading: float = 1.05
    speed_scale_conversation: float = 1.0
    auto_scale_percentiles: tuple[float, float] = (5.0, 95.0)
    auto_scale_canvas_fraction: float = 0.8
    blink_iqr_multiplier: float = 3.0
    edgegauss_enabled: bool = False
    edgegauss_sigma_frames: float = 4.0
    edgegauss_restore_threshold_px: float = 15.0
    global_center_mode: str = "empirical"  # "empirical" | "canvas"
    random_seed: int = 0

    @property
    def canvas_center(self) -> tuple[float, float]:
        return (self.canvas_width_px / 2.0, self.canvas_height_px / 2.0)

    @property
    def canvas_extent(self) -> tuple[float, float]:
        return (float(self.canvas_width_px), float(self.canvas_height_px))

    def speed_scale_for(self, label: ClassLabel) -> float:
        if label is ClassLabel.READING:
            return self.speed_scale_reading
        return self.speed_scale_conversation

    def to_dict(self) -> dict:
        out = {}
        for f in fields(self):
            v = getattr(self, f.name)
            out[f.name] = list(v) if isinstance(v, tuple) else v
        return out


def config_violations(config: PipelineConfig) -> list[str]:
    """Every invariant violation in the config, one message per field."""
    v: list[str] = []

    positive = [
        "canvas_width_px",
        "canvas_height_px",
        "target_fps",
        "session_count",
        "session_frames",
        "ivt_fixation_threshold_px_per_frame",
        "ivt_saccade_threshold_px_per_frame",
        "speed_scale_reading",
        "speed_scale_conversation",
        "auto_scale_canvas_fraction",
        "blink_iqr_multiplier",
        "edgegauss_sigma_frames",
        "edgegauss_restore_threshold_px",
    ]
    for name in positive:
        val = getattr(config, name)
        if not val > 0:
            v.append(f"{name} must be strictly positive, got {val}")

    if config.session_count > 0 and config.session_frames > 0:
        total = config.session_count * config.session_frames
        if total > _MAX_EXACT_INT:
            v.append(
                "session_count * session_frames must stay exactly representable "
                f"(<= 2**53), got {total}"
            )

    p = config.auto_scale_percentiles
    if len(p) != 2:
        v.append(f"auto_scale_percentiles must be a (low, high) pair, got {p}")
    else:
        lo, hi = p
        if not (0.0 < lo < 100.0 and 0.0 < hi < 100.0):
            v.append(f"auto_scale_percentiles must lie within (0, 100), got {p}")
        elif not lo < hi:
            v.append(f"auto_scale_percentiles must be ordered low < high, got {p}")

    if (
        config.ivt_fixation_threshold_px_per_frame > 0
        and config.ivt_saccade_threshold_px_per_frame > 0
        and not config.ivt_fixation_threshold_px_per_frame
        < config.ivt_saccade_threshold_px_per_frame
    ):
        v.append(
            "ivt_fixation_threshold_px_per_frame must be below "
            "ivt_saccade_threshold_px_per_frame, got "
            f"{config.ivt_fixation_threshold_px_per_frame} >= "
            f"{config.ivt_saccade_threshold_px_per_frame}"
        )

    if config.global_center_mode not in ("empirical", "canvas"):
        v.append(
            f"global_center_mode must be 'empirical' or 'canvas', got "
            f"{config.global_center_mode!r}"
        )

    return v


def validate_config(config: PipelineConfig) -> PipelineConfig:
    """Return the config unchanged if valid, else raise ConfigError listing
    every violation."""
    violations = config_violations(config)
    if violations:
        raise ConfigError(violations)
    return config
