"""Stage 5 and emission: per-class speed scaling, circular slicing into fixed
sessions, dataset export (CSVs, labels, metadata), and replay schedules."""
from __future__ import annotations

import json
import logging
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from .model import ClassLabel, PipelineConfig, Space, Trajectory, require_space
from .temporal import ConcatenatedClassTrajectory, Segment, scale_about_point

logger = logging.getLogger(__name__)

METADATA_SCHEMA_VERSION = 1
CSV_DECIMALS = 3


@dataclass(frozen=True)
class SessionSpec:
    """Slicing parameters that produced one session."""

    label: ClassLabel
    index: int
    stride: int
    frame_count: int
    speed_scale: float


@dataclass(frozen=True, eq=False)
class Session:
    """One exported fixed-length canvas trajectory with provenance."""

    session_id: str
    trajectory: Trajectory
    label: ClassLabel
    spec: SessionSpec
    sources_touched: tuple[str, ...]
    wrapped: bool

    def __post_init__(self):
        if len(self.trajectory) != self.spec.frame_count:
            raise ValueError(
                f"{self.session_id}: {len(self.trajectory)} frames, "
                f"spec requires {self.spec.frame_count}"
            )


def apply_class_speed_scale(
    concat: ConcatenatedClassTrajectory, alpha_class: float
) -> ConcatenatedClassTrajectory:
    """Amplify all movement about the concatenated-trajectory mean; the path
    length scales by exactly alpha_class."""
    if not alpha_class > 0:
        raise ValueError(f"alpha_class must be positive, got {alpha_class}")
    traj = concat.trajectory
    center = traj.samples.mean(axis=0)
    scaled = traj.with_samples(scale_about_point(traj.samples, alpha_class, center))
    return ConcatenatedClassTrajectory(
        trajectory=scaled, segments=concat.segments, label=concat.label
    )


def slice_sessions(
    concat: ConcatenatedClassTrajectory,
    n_sessions: int,
    frame_count: int,
    config: PipelineConfig,
    speed_scale: float = 1.0,
) -> list[Session]:
    """Extract n_sessions of frame_count frames at uniform stride floor(T/N),
    with modular indexing for circular wrap-around.

    Requires every coordinate to already sit inside the canvas (the pipeline
    clamps before slicing); session frames are exact copies of the
    concatenated array, so an independent index-materialization oracle must
    agree bit for bit.
    """
    if n_sessions < 1 or frame_count < 1:
        raise ValueError(
            f"need n_sessions >= 1 and frame_count >= 1, got {n_sessions}, {frame_count}"
        )
    traj = concat.trajectory
    require_space(traj, Space.CANVAS, "slice_sessions")
    total = len(traj)
    if (
        traj.samples[:, 0].min() < 0.0
        or traj.samples[:, 0].max() > config.canvas_width_px
        or traj.samples[:, 1].min() < 0.0
        or traj.samples[:, 1].max() > config.canvas_height_px
    ):
        raise ValueError(
            "concatenated trajectory leaves the canvas; clamp before slicing"
        )
    stride = total // n_sessions
    if stride == 0:
        logger.warning(
            "class %s: %d frames for %d sessions gives stride 0; sessions will be identical",
            concat.label.short_name, total, n_sessions,
        )

    sessions = []
    offsets = np.arange(frame_count, dtype=np.int64)
    for i in range(n_sessions):
        start = i * stride
        indices = (start + offsets) % total
        wrapped = bool(start + frame_count > total)
        spec = SessionSpec(
            label=concat.label,
            index=i,
            stride=stride,
            frame_count=frame_count,
            speed_scale=speed_scale,
        )
        session_traj = Trajectory(
            samples=traj.samples[indices],
            fps=traj.fps,
            space=Space.CANVAS,
            source_id=f"{concat.label.short_name}_{i:03d}",
        )
        sessions.append(
            Session(
                session_id=f"{concat.label.short_name}_{i:03d}",
                trajectory=session_traj,
                label=concat.label,
                spec=spec,
                sources_touched=_sources_touched(
                    concat.segments, start % total, frame_count, total
                ),
                wrapped=wrapped,
            )
        )
    return sessions


def _sources_touched(
    segments: tuple[Segment, ...], start: int, frame_count: int, total: int
) -> tuple[str, ...]:
    """Source ids whose segment overlaps the (possibly wrapping) index window."""
    if frame_count >= total:
        return tuple(s.source_id for s in segments)
    end = (start + frame_count - 1) % total
    if start <= end:
        windows = [(start, end)]
    else:
        windows = [(start, total - 1), (0, end)]
    touched = []
    for seg in segments:
        seg_end = seg.start_frame + seg.length - 1
        if any(seg.start_frame <= w_end and seg_end >= w_start for w_start, w_end in windows):
            touched.append(seg.source_id)
    return tuple(touched)


# --- dataset export -------------------------------------------------------


def export_dataset(
    sessions_reading: list[Session],
    sessions_conversation: list[Session],
    config: PipelineConfig,
    out_dir,
    source_alphas: dict[str, float] | None = None,
    class_stats: dict | None = None,
) -> dict:
    """Write per-session trajectory CSVs, labels.csv, and metadata.json.

    Returns a manifest listing every written path with its data row count.
    All output is byte-deterministic for identical inputs: fixed float
    formatting, explicit newlines, sorted JSON keys.
    """
    if not sessions_reading or not sessions_conversation:
        raise ValueError(
            "both classes must have sessions: got "
            f"{len(sessions_reading)} reading, {len(sessions_conversation)} conversation"
        )
    all_sessions = list(sessions_reading) + list(sessions_conversation)
    ids = [s.session_id for s in all_sessions]
    if len(set(ids)) != len(ids):
        dupes = sorted({i for i in ids if ids.count(i) > 1})
        raise ValueError(f"session id collision: {dupes}")

    out = Path(out_dir)
    (out / "sessions").mkdir(parents=True, exist_ok=True)

    entries = []
    for session in all_sessions:
        sess_dir = out / "sessions" / session.session_id
        sess_dir.mkdir(parents=True, exist_ok=True)
        csv_path = sess_dir / "trajectory.csv"
        rows = write_trajectory_csv(session.trajectory, csv_path)
        entries.append({"path": str(csv_path.relative_to(out)), "rows": rows})

    labels_path = out / "labels.csv"
    with open(labels_path, "w", newline="") as fh:
        fh.write("session_id,label\n")
        for session in all_sessions:
            fh.write(f"{session.session_id},{session.label.value}\n")
    entries.append({"path": "labels.csv", "rows": len(all_sessions)})

    metadata = {
        "schema_version": METADATA_SCHEMA_VERSION,
        "config": config.to_dict(),
        "csv_decimals": CSV_DECIMALS,
        "source_alphas": dict(sorted((source_alphas or {}).items())),
        "class_speed_scales": {
            "reading": config.speed_scale_reading,
            "conversation": config.speed_scale_conversation,
        },
        "classes": class_stats or {},
        "sessions": {
            s.session_id: {
                "label": s.label.value,
                "wrapped": s.wrapped,
                "stride": s.spec.stride,
                "frames": s.spec.frame_count,
                "speed_scale": s.spec.speed_scale,
                "sources_touched": list(s.sources_touched),
            }
            for s in all_sessions
        },
    }
    metadata_path = out / "metadata.json"
    with open(metadata_path, "w", newline="") as fh:
        json.dump(metadata, fh, indent=2, sort_keys=True)
        fh.write("\n")
    entries.append({"path": "metadata.json", "rows": None})

    return {"out_dir": str(out), "files": entries}


def write_trajectory_csv(traj: Trajectory, path) -> int:
    """Write header frame,x,y plus one row per frame; returns the row count."""
    with open(path, "w", newline="") as fh:
        fh.write("frame,x,y\n")
        for i, (x, y) in enumerate(traj.samples):
            fh.write(f"{i},{x:.{CSV_DECIMALS}f},{y:.{CSV_DECIMALS}f}\n")
    return len(traj)


def read_trajectory_csv(path, fps: float, space: Space = Space.CANVAS) -> Trajectory:
    """Parse a frame,x,y CSV back into a trajectory."""
    xs = []
    with open(path, newline="") as fh:
        header = fh.readline().strip()
        if header != "frame,x,y":
            raise ValueError(f"{path}: unexpected header {header!r}")
        for line_no, line in enumerate(fh, start=2):
            line = line.strip()
            if not line:
                continue
            cells = line.split(",")
            if len(cells) != 3:
                raise ValueError(f"{path}:{line_no}: expected 3 cells, got {len(cells)}")
            xs.append((float(cells[1]), float(cells[2])))
    if not xs:
        raise ValueError(f"{path}: no data rows")
    return Trajectory(
        samples=np.array(xs), fps=fps, space=space, source_id=str(path)
    )


# --- replay schedules ------------------------------------------------------


@dataclass(frozen=True)
class ReplayEvent:
    frame: int
    x_px: int
    y_px: int
    delay_ms: float


@dataclass(frozen=True, eq=False)
class ReplaySchedule:
    """Timed cursor events for the browser replay driver, one per frame."""

    events: tuple[ReplayEvent, ...]
    viewport: tuple[int, int]
    fps: float

    def __post_init__(self):
        if not self.fps > 0:
            raise ValueError(f"fps must be positive, got {self.fps}")


def build_replay_schedule(
    session: Session, fps: float, viewport: tuple[int, int]
) -> ReplaySchedule:
    """One event per frame, coordinates rounded to device pixels, delay 1000/fps."""
    if not fps > 0:
        raise ValueError(f"fps must be positive, got {fps}")
    delay = 1000.0 / fps
    events = tuple(
        ReplayEvent(frame=i, x_px=int(round(x)), y_px=int(round(y)), delay_ms=delay)
        for i, (x, y) in enumerate(session.trajectory.samples)
    )
    return ReplaySchedule(events=events, viewport=viewport, fps=fps)


def serialize_schedule(schedule: ReplaySchedule) -> str:
    """Line-oriented .moves text: viewport line, fps line, one move per event."""
    lines = [
        f"viewport {schedule.viewport[0]} {schedule.viewport[1]}",
        f"fps {schedule.fps:g}",
    ]
    lines.extend(f"move {e.frame} {e.x_px} {e.y_px}" for e in schedule.events)
    return "\n".join(lines) + "\n"


def emit_replay_schedule(
    session: Session, fps: float, out_path, viewport: tuple[int, int] = (1280, 720)
) -> ReplaySchedule:
    """Build, serialize, and write the session's .moves schedule."""
    schedule = build_replay_schedule(session, fps, viewport)
    with open(out_path, "w", newline="") as fh:
        fh.write(serialize_schedule(schedule))
    return schedule
