"""Stages 3-4: resampling, speed correction, smoothing, per-subject centering,
and per-class concatenation."""
from __future__ import annotations

import math
from dataclasses import dataclass
from fractions import Fraction

import numpy as np

from .model import ClassLabel, PipelineConfig, Space, Trajectory, require_space

SOURCE_FPS_MIN = 1.0
SOURCE_FPS_MAX = 120.0


def path_length(samples: np.ndarray) -> float:
    """Euclidean polyline length over consecutive samples."""
    if len(samples) < 2:
        return 0.0
    return float(np.sum(np.linalg.norm(np.diff(samples, axis=0), axis=1)))


def scale_about_point(samples: np.ndarray, alpha: float, center: np.ndarray) -> np.ndarray:
    return center + alpha * (samples - center)


def resample(traj: Trajectory, target_fps: float) -> Trajectory:
    """Per-frame linear interpolation onto the target frame grid.

    Output sample k sits at source time k / target_fps; output length is
    floor(duration * target_fps) + 1, computed in exact rational arithmetic so
    float rounding can never change the frame count.
    """
    if not SOURCE_FPS_MIN <= traj.fps <= SOURCE_FPS_MAX:
        raise ValueError(
            f"source fps {traj.fps} outside supported range "
            f"[{SOURCE_FPS_MIN}, {SOURCE_FPS_MAX}]"
        )
    if not target_fps > 0:
        raise ValueError(f"target_fps must be positive, got {target_fps}")
    if len(traj) < 2:
        raise ValueError("cannot interpolate a single-sample trajectory")

    n = len(traj)
    k_max = math.floor(Fraction(n - 1) * Fraction(target_fps) / Fraction(traj.fps))
    t_out = np.arange(k_max + 1, dtype=np.float64) / target_fps
    t_src = np.arange(n, dtype=np.float64) / traj.fps
    out = np.column_stack(
        [np.interp(t_out, t_src, traj.samples[:, a]) for a in range(2)]
    )
    return Trajectory(samples=out, fps=target_fps, space=traj.space, source_id=traj.source_id)


def speed_correct(resampled: Trajectory, original: Trajectory) -> tuple[Trajectory, float]:
    """Amplify the resampled trajectory about its centroid so its path length
    matches the original's.

    Returns (corrected trajectory, alpha); alpha = 1 when the original is
    constant (nothing to restore).
    """
    if resampled.space is not original.space:
        raise ValueError(
            f"space mismatch: resampled is {resampled.space.value}, "
            f"original is {original.space.value}"
        )
    l_orig = path_length(original.samples)
    l_resamp = path_length(resampled.samples)
    if l_orig == 0.0:
        return resampled, 1.0
    if l_resamp == 0.0:
        raise ValueError("degenerate resampled path: zero length but original moved")
    alpha = l_orig / l_resamp
    centroid = resampled.samples.mean(axis=0)
    return resampled.with_samples(scale_about_point(resampled.samples, alpha, centroid)), alpha


def edgegauss_smooth(
    traj: Trajectory, sigma_frames: float, restore_threshold_px: float
) -> Trajectory:
    """Gaussian low-pass with saccade restoration.

    Each axis is convolved with a truncated Gaussian (radius 3*sigma,
    renormalized at the boundaries so the ends do not droop). Frames touched
    by a raw per-frame displacement above the threshold form saccade runs;
    each run, expanded by one frame on each side, is restored to the raw
    values so sharp gaze jumps survive the filtering.
    """
    if not sigma_frames > 0:
        raise ValueError(f"sigma_frames must be positive, got {sigma_frames}")
    if not restore_threshold_px > 0:
        raise ValueError(f"restore_threshold_px must be positive, got {restore_threshold_px}")
    xy = traj.samples
    n = len(traj)
    if n == 1:
        return traj

    radius = max(1, math.ceil(3.0 * sigma_frames))
    offsets = np.arange(-radius, radius + 1, dtype=np.float64)
    kernel = np.exp(-0.5 * (offsets / sigma_frames) ** 2)

    smoothed = np.empty_like(xy)
    weight = np.convolve(np.ones(n), kernel, mode="full")[radius : radius + n]
    for axis in range(2):
        num = np.convolve(xy[:, axis], kernel, mode="full")[radius : radius + n]
        smoothed[:, axis] = num / weight

    step = np.linalg.norm(np.diff(xy, axis=0), axis=1)
    jump = step > restore_threshold_px
    frame_hit = np.zeros(n, dtype=bool)
    frame_hit[:-1] |= jump
    frame_hit[1:] |= jump
    # expand each run by one frame per side
    restore = frame_hit.copy()
    restore[:-1] |= frame_hit[1:]
    restore[1:] |= frame_hit[:-1]

    smoothed[restore] = xy[restore]
    return traj.with_samples(smoothed)


def normalize_subject(traj: Trajectory, global_mean: tuple[float, float]) -> Trajectory:
    """Translate the trajectory so its mean lands on the global mean."""
    shift = np.asarray(global_mean, dtype=np.float64) - traj.samples.mean(axis=0)
    return traj.with_samples(traj.samples + shift)


@dataclass(frozen=True)
class Segment:
    """Provenance of one source inside a concatenated class trajectory."""

    source_id: str
    start_frame: int
    length: int


@dataclass(frozen=True, eq=False)
class ConcatenatedClassTrajectory:
    """All recentered source trajectories of one class, appended in order."""

    trajectory: Trajectory
    segments: tuple[Segment, ...]
    label: ClassLabel

    def __post_init__(self):
        expected = 0
        for seg in self.segments:
            if seg.start_frame != expected:
                raise ValueError(
                    f"segments not contiguous: {seg.source_id} starts at "
                    f"{seg.start_frame}, expected {expected}"
                )
            expected += seg.length
        if expected != len(self.trajectory):
            raise ValueError(
                f"segment lengths sum to {expected}, trajectory has {len(self.trajectory)}"
            )

    @property
    def total_frames(self) -> int:
        return len(self.trajectory)


def concatenate_class(
    trajs: list[Trajectory], label: ClassLabel, config: PipelineConfig
) -> ConcatenatedClassTrajectory:
    """Recenter every source on the class global mean and append in input order.

    The global mean is the mean over all samples of all inputs (pooled, not a
    mean of means), or the canvas center when config.global_center_mode says so.
    """
    if not trajs:
        raise ValueError(f"no trajectories to concatenate for class {label.short_name}")
    for t in trajs:
        require_space(t, Space.CANVAS, "concatenate_class")
        if abs(t.fps - config.target_fps) > 1e-9:
            raise ValueError(
                f"{t.source_id!r}: fps {t.fps} != target fps {config.target_fps}; "
                "resample before concatenation"
            )

    if config.global_center_mode == "canvas":
        global_mean = config.canvas_center
    else:
        pooled = np.vstack([t.samples for t in trajs])
        global_mean = tuple(pooled.mean(axis=0))

    recentered = [normalize_subject(t, global_mean) for t in trajs]
    segments = []
    start = 0
    for t in recentered:
        segments.append(Segment(source_id=t.source_id, start_frame=start, length=len(t)))
        start += len(t)

    combined = Trajectory(
        samples=np.vstack([t.samples for t in recentered]),
        fps=config.target_fps,
        space=Space.CANVAS,
        source_id=f"concat[{label.short_name}]",
    )
    return ConcatenatedClassTrajectory(
        trajectory=combined, segments=tuple(segments), label=label
    )
