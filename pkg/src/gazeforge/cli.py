"""Command-line orchestration: configuration loading, the six-stage generation
pipeline, dataset export, evaluation, and schedule emission.

Exit codes: 0 success, 1 input/config error, 2 pipeline failure, 3 I/O failure.
"""
from __future__ import annotations

import argparse
import dataclasses
import json
import logging
import os
import sys
import time
from pathlib import Path

from . import __version__
from .evaluation import evaluate_dataset, matched_fidelity, write_eval_report
from .extraction import (
    apply_calibration,
    clamp_to_canvas,
    derive_fps,
    filter_blinks,
    fit_auto_calibration,
    load_landmark_csv,
    records_to_samples,
    samples_to_trajectory,
)
from .model import (
    ClassLabel,
    ConfigError,
    PipelineConfig,
    Space,
    StageError,
    Trajectory,
    validate_config,
)
from .sessions import (
    Session,
    SessionSpec,
    apply_class_speed_scale,
    emit_replay_schedule,
    export_dataset,
    read_trajectory_csv,
    slice_sessions,
)
from .temporal import concatenate_class, edgegauss_smooth, resample, speed_correct

logger = logging.getLogger("gazeforge")

EXIT_OK = 0
EXIT_INPUT = 1
EXIT_PIPELINE = 2
EXIT_IO = 3

# Typical alpha band reported for real data; values outside (1, 2) are suspicious.
ALPHA_WARN_LOW = 1.0
ALPHA_WARN_HIGH = 2.0


def load_config_file(path: str | None) -> PipelineConfig:
    """JSON config with every field optional; unknown keys are rejected."""
    if path is None:
        return PipelineConfig()
    with open(path) as fh:
        raw = json.load(fh)
    if not isinstance(raw, dict):
        raise ConfigError([f"config file {path} must contain a JSON object"])
    known = {f.name for f in dataclasses.fields(PipelineConfig)}
    unknown = sorted(set(raw) - known)
    if unknown:
        raise ConfigError([f"unknown config key {k!r}" for k in unknown])
    if "auto_scale_percentiles" in raw:
        raw["auto_scale_percentiles"] = tuple(raw["auto_scale_percentiles"])
    return PipelineConfig(**raw)


def resolve_config(args) -> PipelineConfig:
    """Merge precedence: env seed > CLI flag > config file > default."""
    config = load_config_file(getattr(args, "config", None))
    overrides = {}
    for flag, field in (
        ("seed", "random_seed"),
        ("num_sessions", "session_count"),
        ("session_frames", "session_frames"),
        ("target_fps", "target_fps"),
        ("edgegauss", "edgegauss_enabled"),
        ("global_center", "global_center_mode"),
    ):
        value = getattr(args, flag, None)
        if value is not None:
            overrides[field] = value
    env_seed = os.environ.get("GAZEFORGE_SEED")
    if env_seed is not None:
        try:
            overrides["random_seed"] = int(env_seed)
        except ValueError:
            raise ConfigError([f"GAZEFORGE_SEED must be an integer, got {env_seed!r}"])
    if overrides:
        config = dataclasses.replace(config, **overrides)
    return validate_config(config)


class _StageClock:
    """Accumulates wall time per pipeline stage (one entry per stage)."""

    def __init__(self):
        self.seconds: dict[str, float] = {}

    def add(self, stage: str, dt: float) -> None:
        self.seconds[stage] = self.seconds.get(stage, 0.0) + dt


def _run_stage(clock: _StageClock, stage: str, source: str, fn):
    t0 = time.perf_counter()
    try:
        result = fn()
    except (ValueError, ArithmeticError) as exc:
        raise StageError(stage, source, exc) from exc
    clock.add(stage, time.perf_counter() - t0)
    return result


def discover_sources(sources_dir) -> dict[ClassLabel, list[Path]]:
    """Landmark CSVs grouped by class: <sources>/reading/*.csv and
    <sources>/conversation/*.csv, sorted by filename."""
    root = Path(sources_dir)
    out = {}
    for label in (ClassLabel.READING, ClassLabel.CONVERSATION):
        class_dir = root / label.short_name
        files = sorted(class_dir.glob("*.csv")) if class_dir.is_dir() else []
        if not files:
            raise FileNotFoundError(
                f"no landmark CSVs for class {label.short_name!r} under {class_dir}"
            )
        out[label] = files
    return out


def process_source(
    path: Path,
    config: PipelineConfig,
    clock: _StageClock,
    source_fps_fallback: float | None = None,
) -> tuple[Trajectory, float]:
    """Stages 1-3 for one landmark CSV: normalized samples, blink filtering,
    calibration, resampling, speed correction, optional smoothing.

    Returns the canvas-space trajectory at target fps plus the logged alpha.
    """
    sid = path.stem

    def stage1():
        records = load_landmark_csv(path)
        fps = derive_fps(records)
        if fps is None:
            if source_fps_fallback is None:
                raise ValueError(
                    f"{path}: no usable timestamps; pass --source-fps to set the native rate"
                )
            fps = source_fps_fallback
        samples = records_to_samples(records)
        return samples_to_trajectory(samples, fps=fps, source_id=sid)

    normalized, valid = _run_stage(clock, "stage1_extract", sid, stage1)
    logger.info(
        "stage1[%s]: %d frames at %.3f fps, %d invalid",
        sid, len(normalized), normalized.fps, int((~valid).sum()),
    )

    def stage2():
        filtered = filter_blinks(normalized, config.blink_iqr_multiplier, valid)
        model = fit_auto_calibration(filtered, config)
        return apply_calibration(filtered, model, config), model

    canvas, model = _run_stage(clock, "stage2_calibrate", sid, stage2)
    logger.info(
        "stage2[%s]: calibration s=(%.1f, %.1f) mu=(%.1f, %.1f)",
        sid, model.s_x, model.s_y, model.mu_x, model.mu_y,
    )

    def stage3():
        resampled = resample(canvas, config.target_fps)
        corrected, alpha = speed_correct(resampled, canvas)
        if config.edgegauss_enabled:
            corrected = edgegauss_smooth(
                corrected,
                config.edgegauss_sigma_frames,
                config.edgegauss_restore_threshold_px,
            )
        return corrected, alpha

    corrected, alpha = _run_stage(clock, "stage3_resample", sid, stage3)
    logger.info(
        "stage3[%s]: %.3f -> %.3f fps, %d -> %d frames, alpha=%.4f",
        sid, canvas.fps, config.target_fps, len(canvas), len(corrected), alpha,
    )
    if not ALPHA_WARN_LOW < alpha < ALPHA_WARN_HIGH and alpha != 1.0:
        logger.warning(
            "stage3[%s]: alpha=%.4f outside the expected (%.0f, %.0f) band",
            sid, alpha, ALPHA_WARN_LOW, ALPHA_WARN_HIGH,
        )
    return corrected, alpha


def generate_class_sessions(
    label: ClassLabel,
    paths: list[Path],
    config: PipelineConfig,
    clock: _StageClock,
    source_fps_fallback: float | None = None,
) -> tuple[list[Session], dict[str, float], dict]:
    """Stages 1-5 for one class; returns sessions, per-source alphas, stats."""
    trajs = []
    alphas = {}
    for path in paths:
        traj, alpha = process_source(path, config, clock, source_fps_fallback)
        trajs.append(traj)
        alphas[traj.source_id] = alpha

    concat = _run_stage(
        clock, "stage4_concatenate", label.short_name,
        lambda: concatenate_class(trajs, label, config),
    )
    logger.info(
        "stage4[%s]: %d sources concatenated to %d frames",
        label.short_name, len(trajs), concat.total_frames,
    )

    def stage5():
        scaled = apply_class_speed_scale(concat, config.speed_scale_for(label))
        clamped = dataclasses.replace(
            scaled, trajectory=clamp_to_canvas(scaled.trajectory, config)
        )
        return slice_sessions(
            clamped,
            config.session_count,
            config.session_frames,
            config,
            speed_scale=config.speed_scale_for(label),
        )

    sessions = _run_stage(clock, "stage5_slice", label.short_name, stage5)
    total = concat.total_frames
    stats = {
        "total_frames": total,
        "sources": [dataclasses.asdict(s) for s in concat.segments],
        "reuse_ratio": (config.session_count * config.session_frames) / total,
        "wrapped_sessions": sum(1 for s in sessions if s.wrapped),
        "speed_scale": config.speed_scale_for(label),
    }
    logger.info(
        "stage5[%s]: %d sessions of %d frames (stride %d, reuse %.2f, %d wrapped)",
        label.short_name, len(sessions), config.session_frames,
        sessions[0].spec.stride, stats["reuse_ratio"], stats["wrapped_sessions"],
    )
    return sessions, alphas, stats


def cmd_generate(args) -> int:
    config = resolve_config(args)
    sources = discover_sources(args.sources)
    out_dir = Path(args.out)
    clock = _StageClock()

    by_label = {}
    alphas = {}
    class_stats = {}
    for label, paths in sources.items():
        sessions, class_alphas, stats = generate_class_sessions(
            label, paths, config, clock, args.source_fps
        )
        by_label[label] = sessions
        alphas.update(class_alphas)
        class_stats[label.short_name] = stats

    def stage6():
        manifest = export_dataset(
            by_label[ClassLabel.READING],
            by_label[ClassLabel.CONVERSATION],
            config,
            out_dir,
            source_alphas=alphas,
            class_stats=class_stats,
        )
        schedules_dir = out_dir / "schedules"
        schedules_dir.mkdir(parents=True, exist_ok=True)
        viewport = (config.canvas_width_px, config.canvas_height_px)
        for sessions in by_label.values():
            for session in sessions:
                path = schedules_dir / f"{session.session_id}.moves"
                emit_replay_schedule(session, config.target_fps, path, viewport)
                manifest["files"].append(
                    {
                        "path": str(path.relative_to(out_dir)),
                        "rows": len(session.trajectory),
                    }
                )
        return manifest

    t0 = time.perf_counter()
    manifest = stage6()
    clock.add("stage6_export", time.perf_counter() - t0)
    logger.info("stage6: wrote %d files under %s", len(manifest["files"]), out_dir)

    run_manifest = {
        "tool_version": __version__,
        "seed": config.random_seed,
        "config": config.to_dict(),
        "source_alphas": dict(sorted(alphas.items())),
        "stage_seconds": {k: round(v, 6) for k, v in sorted(clock.seconds.items())},
        "outputs": sorted(e["path"] for e in manifest["files"]),
    }
    with open(out_dir / "run_manifest.json", "w", newline="") as fh:
        json.dump(run_manifest, fh, indent=2, sort_keys=True)
        fh.write("\n")
    n_sessions = sum(len(s) for s in by_label.values())
    print(f"generated {n_sessions} sessions under {out_dir}")
    return EXIT_OK


def load_dataset_sessions(dataset_dir, config: PipelineConfig) -> dict[ClassLabel, list[Trajectory]]:
    """Read generated session trajectories grouped by label via labels.csv."""
    root = Path(dataset_dir)
    labels_path = root / "labels.csv"
    if not labels_path.is_file():
        raise FileNotFoundError(f"missing labels.csv under {root}")
    by_label: dict[ClassLabel, list[Trajectory]] = {
        ClassLabel.READING: [],
        ClassLabel.CONVERSATION: [],
    }
    with open(labels_path, newline="") as fh:
        header = fh.readline().strip()
        if header != "session_id,label":
            raise ValueError(f"{labels_path}: unexpected header {header!r}")
        for line in fh:
            line = line.strip()
            if not line:
                continue
            sid, label_str = line.split(",")
            label = ClassLabel(int(label_str))
            csv_path = root / "sessions" / sid / "trajectory.csv"
            if not csv_path.is_file():
                raise FileNotFoundError(f"missing session file {csv_path}")
            by_label[label].append(
                read_trajectory_csv(csv_path, fps=config.target_fps, space=Space.CANVAS)
            )
    return by_label


def cmd_eval(args) -> int:
    config = resolve_config(args)
    generated = load_dataset_sessions(args.dataset, config)
    sources = discover_sources(args.sources)
    clock = _StageClock()
    source_trajs = {
        label: [process_source(p, config, clock, args.source_fps)[0] for p in paths]
        for label, paths in sources.items()
    }
    report = evaluate_dataset(source_trajs, generated, config, qq_points=args.qq_points)
    written = write_eval_report(report, args.out)
    for class_name, metrics in report["classes"].items():
        for metric, block in metrics.items():
            d = block.get("d")
            d_text = "undefined" if d is None else f"{d:.4f}"
            logger.info("eval[%s/%s]: D=%s n=%d m=%d", class_name, metric, d_text,
                        block.get("n", 0), block.get("m", 0))
    print(f"wrote {written[0]} (+{len(written) - 1} Q-Q panels)")
    return EXIT_OK


def cmd_matched(args) -> int:
    real = read_trajectory_csv(args.real, fps=args.fps, space=Space.NORMALIZED)
    sim = read_trajectory_csv(args.sim, fps=args.fps, space=Space.NORMALIZED)
    n = min(len(real), len(sim))
    if len(real) != len(sim):
        logger.info(
            "aligning by truncation: real %d frames, sim %d frames -> %d",
            len(real), len(sim), n,
        )
        real = real.with_samples(real.samples[:n])
        sim = sim.with_samples(sim.samples[:n])
    report = matched_fidelity(real, sim)
    out = Path(args.out)
    out.parent.mkdir(parents=True, exist_ok=True)
    with open(out, "w", newline="") as fh:
        json.dump(report.to_json_dict(), fh, indent=2, sort_keys=True)
        fh.write("\n")
    print(f"wrote {out}")
    return EXIT_OK


def cmd_emit_schedule(args) -> int:
    traj = read_trajectory_csv(args.session, fps=args.fps, space=Space.CANVAS)
    spec = SessionSpec(
        label=ClassLabel.READING, index=0, stride=0,
        frame_count=len(traj), speed_scale=1.0,
    )
    session = Session(
        session_id=Path(args.session).stem,
        trajectory=traj,
        label=ClassLabel.READING,
        spec=spec,
        sources_touched=(),
        wrapped=False,
    )
    emit_replay_schedule(session, args.fps, args.out, (args.width, args.height))
    print(f"wrote {args.out} ({len(traj)} events)")
    return EXIT_OK


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="gazeforge",
        description="Eye-trajectory dataset generation and evaluation toolkit",
    )
    parser.add_argument("--version", action="version", version=f"gazeforge {__version__}")
    parser.add_argument("-v", "--verbose", action="store_true", help="debug logging")
    sub = parser.add_subparsers(dest="command", required=True)

    def add_config_flags(p):
        p.add_argument("--config", help="JSON config file (all fields optional)")
        p.add_argument("--seed", type=int, help="override random seed")
        p.add_argument("--num-sessions", type=int, dest="num_sessions",
                       help="sessions per class")
        p.add_argument("--session-frames", type=int, dest="session_frames",
                       help="frames per session")
        p.add_argument("--target-fps", type=float, dest="target_fps",
                       help="output frame rate")
        p.add_argument("--edgegauss", action=argparse.BooleanOptionalAction,
                       help="enable/disable smoothing stage")
        p.add_argument("--global-center", dest="global_center",
                       choices=["empirical", "canvas"],
                       help="per-class recentering target")
        p.add_argument("--source-fps", type=float, dest="source_fps",
                       help="native fps fallback for CSVs without timestamps")

    p_gen = sub.add_parser("generate", help="run stages 1-6 and export the dataset")
    add_config_flags(p_gen)
    p_gen.add_argument("--sources", required=True,
                       help="directory with reading/ and conversation/ landmark CSVs")
    p_gen.add_argument("--out", required=True, help="dataset output directory")
    p_gen.set_defaults(func=cmd_generate)

    p_eval = sub.add_parser("eval", help="distributional fidelity report")
    add_config_flags(p_eval)
    p_eval.add_argument("--dataset", required=True, help="generated dataset directory")
    p_eval.add_argument("--sources", required=True, help="source landmark CSV directory")
    p_eval.add_argument("--out", required=True, help="report JSON path")
    p_eval.add_argument("--qq-points", type=int, default=99, dest="qq_points",
                        help="quantile pairs per Q-Q panel")
    p_eval.set_defaults(func=cmd_eval)

    p_matched = sub.add_parser("matched", help="matched sim-vs-real fidelity report")
    p_matched.add_argument("--real", required=True, help="real iris trajectory CSV")
    p_matched.add_argument("--sim", required=True, help="simulator iris trajectory CSV")
    p_matched.add_argument("--out", required=True, help="fidelity JSON path")
    p_matched.add_argument("--fps", type=float, default=25.0, help="frame rate of both CSVs")
    p_matched.set_defaults(func=cmd_matched)

    p_emit = sub.add_parser("emit-schedule", help="serialize a session CSV as a .moves file")
    p_emit.add_argument("--session", required=True, help="session trajectory CSV")
    p_emit.add_argument("--fps", type=float, default=25.0, help="replay frame rate")
    p_emit.add_argument("--out", required=True, help=".moves output path")
    p_emit.add_argument("--width", type=int, default=1280, help="viewport width")
    p_emit.add_argument("--height", type=int, default=720, help="viewport height")
    p_emit.set_defaults(func=cmd_emit_schedule)

    return parser


def main(argv: list[str] | None = None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(
        level=logging.DEBUG if args.verbose else logging.INFO,
        format="%(levelname)s %(name)s: %(message)s",
        stream=sys.stderr,
    )
    try:
        return args.func(args)
    except ConfigError as exc:
        for violation in exc.violations:
            logger.error("config: %s", violation)
        return EXIT_INPUT
    except StageError as exc:
        logger.error("%s", exc)
        return EXIT_PIPELINE
    except (FileNotFoundError, NotADirectoryError) as exc:
        logger.error("%s", exc)
        return EXIT_INPUT
    except ValueError as exc:
        logger.error("%s", exc)
        return EXIT_INPUT
    except OSError as exc:
        logger.error("I/O failure: %s", exc)
        return EXIT_IO


if __name__ == "__main__":
    sys.exit(main())
