"""Stages 1-2: landmark ingestion, iris normalization, blink filtering, calibration.

Input is the upstream landmark extractor's CSV (one row per frame, both eyes).
Output is a blink-filtered trajectory mapped onto the simulator canvas.
"""
from __future__ import annotations

import csv
from dataclasses import dataclass

import numpy as np

from .model import (
    EyeLandmarks,
    LandmarkRecord,
    NormalizedSample,
    PipelineConfig,
    Space,
    Trajectory,
    require_space,
)

LANDMARK_CSV_COLUMNS = [
    "frame", "ts",
    "leye_iris_x", "leye_iris_y", "leye_inner_x", "leye_outer_x",
    "leye_top_y", "leye_bottom_y", "leye_valid",
    "reye_iris_x", "reye_iris_y", "reye_inner_x", "reye_outer_x",
    "reye_top_y", "reye_bottom_y", "reye_valid",
]


@dataclass(frozen=True)
class CalibrationModel:
    """Affine normalized-to-canvas map: c = s * (n - 0.5) + mu, per axis."""

    s_x: float
    s_y: float
    mu_x: float
    mu_y: float

    def __post_init__(self):
        if not (self.s_x > 0 and self.s_y > 0):
            raise ValueError(f"scale factors must be positive, got ({self.s_x}, {self.s_y})")


def normalize_iris(record: LandmarkRecord) -> tuple[NormalizedSample, NormalizedSample]:
    """Per-eye normalized iris position within the eye aperture.

    A degenerate aperture (zero-width denominator) or an eye flagged invalid
    yields an invalid sample with placeholder coordinates, never NaN.
    """
    return (
        _normalize_eye(record.left, record.frame_index),
        _normalize_eye(record.right, record.frame_index),
    )


def _normalize_eye(eye: EyeLandmarks, frame_index: int) -> NormalizedSample:
    if not eye.valid:
        return NormalizedSample.invalid(frame_index)
    dx = eye.outer_corner_x - eye.inner_corner_x
    dy = eye.eyelid_bottom_y - eye.eyelid_top_y
    if dx == 0.0 or dy == 0.0:
        return NormalizedSample.invalid(frame_index)
    return NormalizedSample(
        n_x=(eye.iris_x - eye.inner_corner_x) / dx,
        n_y=(eye.iris_y - eye.eyelid_top_y) / dy,
        frame_index=frame_index,
    )


def average_eyes(left: NormalizedSample, right: NormalizedSample) -> NormalizedSample:
    """Per-frame mean of the valid eyes; single-eye fallback; invalid if neither."""
    if left.frame_index != right.frame_index:
        raise ValueError(
            f"eye samples from different frames: {left.frame_index} vs {right.frame_index}"
        )
    if left.valid and right.valid:
        return NormalizedSample(
            n_x=(left.n_x + right.n_x) / 2.0,
            n_y=(left.n_y + right.n_y) / 2.0,
            frame_index=left.frame_index,
        )
    if left.valid:
        return left
    if right.valid:
        return right
    return NormalizedSample.invalid(left.frame_index)


def records_to_samples(records: list[LandmarkRecord]) -> list[NormalizedSample]:
    """Stage-1 composite: normalize both eyes and average, one sample per record."""
    return [average_eyes(*normalize_iris(r)) for r in records]


def samples_to_trajectory(
    samples: list[NormalizedSample], fps: float, source_id: str = ""
) -> tuple[Trajectory, np.ndarray]:
    """Pack samples into a normalized-space trajectory plus a validity mask.

    Invalid samples keep their placeholder coordinates in the array; the mask
    is what filter_blinks uses to exclude them from fences and to fill them.
    """
    if not samples:
        raise ValueError("no samples to build a trajectory from")
    xy = np.array([(s.n_x, s.n_y) for s in samples], dtype=np.float64)
    valid = np.array([s.valid for s in samples], dtype=bool)
    return Trajectory(samples=xy, fps=fps, space=Space.NORMALIZED, source_id=source_id), valid


def filter_blinks(
    traj: Trajectory, multiplier: float, valid: np.ndarray | None = None
) -> Trajectory:
    """Replace blink artifacts by the last preceding good sample.

    Fences are computed once per axis over the raw series (Q1/Q3 by linear
    interpolation, excluding samples flagged invalid) and all bad samples are
    filled in a single pass; recomputing fences after each replacement would
    make the result order-dependent. Bad means: flagged invalid, outside the
    multiplier*IQR fence on either axis, or outside the unit square (values
    beyond [0, 1] are aperture artifacts by construction). Leading bad samples
    are back-filled from the first good one.
    """
    require_space(traj, Space.NORMALIZED, "filter_blinks")
    if not multiplier > 0:
        raise ValueError(f"multiplier must be positive, got {multiplier}")
    xy = traj.samples
    n = len(traj)
    if valid is None:
        valid = np.ones(n, dtype=bool)
    else:
        valid = np.asarray(valid, dtype=bool)
        if valid.shape != (n,):
            raise ValueError(f"valid mask length {valid.shape} != sample count {n}")
    if not valid.any():
        raise ValueError("no valid anchor sample")

    good = valid.copy()
    for axis in range(2):
        vals = xy[valid, axis]
        q1, q3 = np.percentile(vals, [25.0, 75.0], method="linear")
        iqr = q3 - q1
        lo, hi = q1 - multiplier * iqr, q3 + multiplier * iqr
        good &= (xy[:, axis] >= lo) & (xy[:, axis] <= hi)
        good &= (xy[:, axis] >= 0.0) & (xy[:, axis] <= 1.0)

    if not good.any():
        raise ValueError("no valid anchor sample")

    fill_from = np.where(good, np.arange(n), -1)
    np.maximum.accumulate(fill_from, out=fill_from)
    first_good = int(np.argmax(good))
    fill_from[fill_from < 0] = first_good
    return traj.with_samples(xy[fill_from])


def fit_auto_calibration(traj: Trajectory, config: PipelineConfig) -> CalibrationModel:
    """Auto-scale fit: percentile range of the observed signal maps to a fixed
    fraction of the canvas, with the range midpoint landing on canvas center."""
    require_space(traj, Space.NORMALIZED, "fit_auto_calibration")
    p_lo, p_hi = config.auto_scale_percentiles
    frac = config.auto_scale_canvas_fraction
    extents = config.canvas_extent

    scales = []
    centers = []
    for axis, name in ((0, "x"), (1, "y")):
        lo, hi = np.percentile(traj.samples[:, axis], [p_lo, p_hi], method="linear")
        spread = hi - lo
        if spread == 0.0:
            raise ValueError(
                f"degenerate axis {name}: percentile range "
                f"[{p_lo}, {p_hi}] of a constant signal is zero"
            )
        s = frac * extents[axis] / spread
        mid = (lo + hi) / 2.0
        scales.append(s)
        centers.append(extents[axis] / 2.0 - s * (mid - 0.5))
    return CalibrationModel(s_x=scales[0], s_y=scales[1], mu_x=centers[0], mu_y=centers[1])


def apply_calibration(
    traj: Trajectory,
    model: CalibrationModel,
    config: PipelineConfig,
    clamp: bool = True,
) -> Trajectory:
    """Map normalized iris coordinates to canvas pixels (clamped by default)."""
    require_space(traj, Space.NORMALIZED, "apply_calibration")
    xy = traj.samples
    out = np.empty_like(xy)
    out[:, 0] = model.s_x * (xy[:, 0] - 0.5) + model.mu_x
    out[:, 1] = model.s_y * (xy[:, 1] - 0.5) + model.mu_y
    if clamp:
        np.clip(out[:, 0], 0.0, config.canvas_width_px, out=out[:, 0])
        np.clip(out[:, 1], 0.0, config.canvas_height_px, out=out[:, 1])
    return traj.with_samples(out, space=Space.CANVAS)


def clamp_to_canvas(traj: Trajectory, config: PipelineConfig) -> Trajectory:
    """Clamp a canvas-space trajectory to the canvas rectangle."""
    require_space(traj, Space.CANVAS, "clamp_to_canvas")
    out = traj.samples.copy()
    np.clip(out[:, 0], 0.0, config.canvas_width_px, out=out[:, 0])
    np.clip(out[:, 1], 0.0, config.canvas_height_px, out=out[:, 1])
    return traj.with_samples(out)


def load_landmark_csv(path) -> list[LandmarkRecord]:
    """Parse a landmark CSV (see LANDMARK_CSV_COLUMNS for the header contract).

    Empty numeric cells are accepted only on rows where the owning eye is
    flagged invalid; frame indices must be strictly increasing.
    """
    records: list[LandmarkRecord] = []
    with open(path, newline="") as fh:
        reader = csv.reader(fh)
        header = next(reader, None)
        if header is None:
            raise ValueError(f"{path}: empty file")
        if [h.strip() for h in header] != LANDMARK_CSV_COLUMNS:
            raise ValueError(
                f"{path}: unexpected header {header!r}; expected {LANDMARK_CSV_COLUMNS!r}"
            )
        prev_frame = -1
        for line_no, row in enumerate(reader, start=2):
            if not row:
                continue
            if len(row) != len(LANDMARK_CSV_COLUMNS):
                raise ValueError(
                    f"{path}:{line_no}: expected {len(LANDMARK_CSV_COLUMNS)} cells, got {len(row)}"
                )
            frame = int(row[0])
            if frame < 0:
                raise ValueError(f"{path}:{line_no}: negative frame index {frame}")
            if frame <= prev_frame:
                raise ValueError(
                    f"{path}:{line_no}: frame index {frame} not strictly increasing "
                    f"(previous {prev_frame})"
                )
            prev_frame = frame
            ts = float(row[1]) if row[1].strip() else None
            left = _parse_eye(row[2:9], path, line_no, "leye")
            right = _parse_eye(row[9:16], path, line_no, "reye")
            records.append(
                LandmarkRecord(frame_index=frame, left=left, right=right, timestamp_s=ts)
            )
    if not records:
        raise ValueError(f"{path}: no data rows")
    return records


def _parse_eye(cells: list[str], path, line_no: int, prefix: str) -> EyeLandmarks:
    flag = cells[6].strip()
    if flag not in ("0", "1"):
        raise ValueError(f"{path}:{line_no}: {prefix}_valid must be 0 or 1, got {flag!r}")
    valid = flag == "1"
    values = []
    for cell in cells[:6]:
        if cell.strip() == "":
            if valid:
                raise ValueError(
                    f"{path}:{line_no}: empty {prefix} cell on a row flagged valid"
                )
            values.append(0.0)
        else:
            values.append(float(cell))
    return EyeLandmarks(
        iris_x=values[0],
        iris_y=values[1],
        inner_corner_x=values[2],
        outer_corner_x=values[3],
        eyelid_top_y=values[4],
        eyelid_bottom_y=values[5],
        valid=valid,
    )


def derive_fps(records: list[LandmarkRecord]) -> float | None:
    """Native frame rate from the timestamp column, or None if unavailable."""
    if len(records) < 2:
        return None
    t0, t1 = records[0].timestamp_s, records[-1].timestamp_s
    if t0 is None or t1 is None or not t1 > t0:
        return None
    return (len(records) - 1) / (t1 - t0)
