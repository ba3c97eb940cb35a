"""Evaluation suite: speed/fixation/saccade distributions with an I-VT
detector, exact two-sample KS statistics, Q-Q quantile pairs, and the matched
sim-vs-real fidelity metrics, plus a synthetic gain-model oracle for
closed-loop testing."""
from __future__ import annotations

import json
from dataclasses import dataclass
from pathlib import Path
from typing import NamedTuple

import numpy as np

from .model import ClassLabel, PipelineConfig, Space, Trajectory, require_space

EVAL_SCHEMA_VERSION = 1
METRIC_NAMES = ("speed", "fixation_duration", "saccade_amplitude")


class Fixation(NamedTuple):
    start: int   # index of the run's first transition
    length: int  # run length, in transitions


class Saccade(NamedTuple):
    start: int
    length: int
    amplitude_px: float  # summed displacement over the run


@dataclass(frozen=True, eq=False)
class IvtEvents:
    """Disjoint, ordered fixation and saccade runs over frame transitions."""

    fixations: tuple[Fixation, ...]
    saccades: tuple[Saccade, ...]


@dataclass(frozen=True)
class KsResult:
    d_statistic: float
    n: int
    m: int
    p_value: float | None = None

    def __post_init__(self):
        if not 0.0 <= self.d_statistic <= 1.0:
            raise ValueError(f"D must lie in [0, 1], got {self.d_statistic}")


@dataclass(frozen=True)
class MatchedFidelityReport:
    """Frame-by-frame sim-vs-real comparison of normalized iris trajectories."""

    mean_error: float
    median_error: float
    p95_error: float
    r_x: float
    r_y: float
    amplitude_ratio_x: float
    amplitude_ratio_y: float
    std_ratio_x: float
    std_ratio_y: float
    sample_count: int

    def to_json_dict(self) -> dict:
        return {
            "mean_iris_error_norm": self.mean_error,
            "median_iris_error": self.median_error,
            "p95_iris_error": self.p95_error,
            "correlation_x": self.r_x,
            "correlation_y": self.r_y,
            "amplitude_ratio_x": self.amplitude_ratio_x,
            "amplitude_ratio_y": self.amplitude_ratio_y,
            "std_ratio_x": self.std_ratio_x,
            "std_ratio_y": self.std_ratio_y,
            "sample_count": self.sample_count,
            "amplitude_definition": "p95 minus p5 of the centered signal, per axis",
        }


def compute_speeds(traj: Trajectory) -> np.ndarray:
    """Frame-to-frame Euclidean displacement, px/frame; length n-1."""
    if len(traj) < 2:
        raise ValueError("need at least 2 samples to compute speeds")
    return np.linalg.norm(np.diff(traj.samples, axis=0), axis=1)


def detect_ivt(
    traj: Trajectory, fixation_threshold: float, saccade_threshold: float
) -> IvtEvents:
    """Velocity-threshold event detection over frame transitions.

    Fixations are maximal runs with speed strictly below the fixation
    threshold; saccades are maximal runs strictly above the saccade threshold;
    transitions in between belong to neither. Durations count transitions, and
    saccade amplitude is the summed displacement within the run.
    """
    if not (fixation_threshold > 0 and saccade_threshold > 0):
        raise ValueError("thresholds must be positive")
    if not fixation_threshold < saccade_threshold:
        raise ValueError(
            f"fixation threshold {fixation_threshold} must be below "
            f"saccade threshold {saccade_threshold}"
        )
    speeds = compute_speeds(traj)
    labels = np.zeros(len(speeds), dtype=np.int8)
    labels[speeds < fixation_threshold] = 1
    labels[speeds > saccade_threshold] = 2

    fixations = []
    saccades = []
    run_start = 0
    for i in range(1, len(labels) + 1):
        if i < len(labels) and labels[i] == labels[run_start]:
            continue
        length = i - run_start
        if labels[run_start] == 1:
            fixations.append(Fixation(start=run_start, length=length))
        elif labels[run_start] == 2:
            saccades.append(
                Saccade(
                    start=run_start,
                    length=length,
                    amplitude_px=float(np.sum(speeds[run_start:i])),
                )
            )
        run_start = i
    return IvtEvents(fixations=tuple(fixations), saccades=tuple(saccades))


def ks_two_sample(a, b) -> KsResult:
    """Two-sample Kolmogorov-Smirnov D, computed exactly by a merge over the
    sorted samples, with the asymptotic p-value from the alternating series.

    The p-value is reported for completeness only; it saturates for large
    samples and is never used in acceptance logic.
    """
    a = np.sort(np.asarray(a, dtype=np.float64))
    b = np.sort(np.asarray(b, dtype=np.float64))
    if a.size == 0 or b.size == 0:
        raise ValueError(f"both samples must be non-empty, got sizes {a.size}, {b.size}")
    pooled = np.concatenate([a, b])
    cdf_a = np.searchsorted(a, pooled, side="right") / a.size
    cdf_b = np.searchsorted(b, pooled, side="right") / b.size
    d = float(np.max(np.abs(cdf_a - cdf_b)))
    return KsResult(d_statistic=d, n=int(a.size), m=int(b.size), p_value=_ks_p_value(d, a.size, b.size))


def _ks_p_value(d: float, n: int, m: int) -> float:
    """Asymptotic two-sample p-value: 2 * sum_k (-1)^(k-1) exp(-2 k^2 lambda^2)."""
    if d <= 0.0:
        return 1.0
    lam = d * np.sqrt(n * m / (n + m))
    k = np.arange(1, 201, dtype=np.float64)
    terms = 2.0 * (-1.0) ** (k - 1) * np.exp(-2.0 * (k * lam) ** 2)
    return float(min(1.0, max(0.0, terms.sum())))


def qq_pairs(a, b, k_points: int) -> np.ndarray:
    """K quantile pairs at probability levels k/(K+1), linear interpolation.

    Returns an array of shape (K, 2): first column quantiles of a, second of b.
    """
    a = np.asarray(a, dtype=np.float64)
    b = np.asarray(b, dtype=np.float64)
    if a.size == 0 or b.size == 0:
        raise ValueError("both samples must be non-empty")
    if k_points < 1:
        raise ValueError(f"k_points must be >= 1, got {k_points}")
    levels = np.arange(1, k_points + 1, dtype=np.float64) / (k_points + 1)
    return np.column_stack(
        [
            np.quantile(a, levels, method="linear"),
            np.quantile(b, levels, method="linear"),
        ]
    )


def matched_fidelity(real_iris: Trajectory, sim_iris: Trajectory) -> MatchedFidelityReport:
    """Frame-locked comparison of two equal-length normalized iris trajectories.

    Alignment is the caller's job (truncate to the common length); replayed
    trajectories are frame-locked so index alignment is exact by construction.
    """
    require_space(real_iris, Space.NORMALIZED, "matched_fidelity")
    require_space(sim_iris, Space.NORMALIZED, "matched_fidelity")
    if len(real_iris) != len(sim_iris):
        raise ValueError(
            f"length mismatch: real has {len(real_iris)} frames, sim has {len(sim_iris)}"
        )
    real = real_iris.samples
    sim = sim_iris.samples

    err = np.linalg.norm(real - sim, axis=1)
    p95_err = float(np.percentile(err, 95.0, method="linear"))

    ratios = []
    stds = []
    corrs = []
    for axis, name in ((0, "x"), (1, "y")):
        r_vals = real[:, axis]
        s_vals = sim[:, axis]
        amp_real = _trimmed_amplitude(r_vals)
        amp_sim = _trimmed_amplitude(s_vals)
        if amp_real == 0.0:
            raise ValueError(f"zero real amplitude on axis {name}: ratio undefined")
        ratios.append(amp_sim / amp_real)
        std_real = float(np.std(r_vals))
        std_sim = float(np.std(s_vals))
        if std_real == 0.0 or std_sim == 0.0:
            raise ValueError(f"zero variance on axis {name}: correlation undefined")
        stds.append(std_sim / std_real)
        rc = (r_vals - r_vals.mean()) / std_real
        sc = (s_vals - s_vals.mean()) / std_sim
        corrs.append(float(np.mean(rc * sc)))

    return MatchedFidelityReport(
        mean_error=float(err.mean()),
        median_error=float(np.median(err)),
        p95_error=p95_err,
        r_x=corrs[0],
        r_y=corrs[1],
        amplitude_ratio_x=ratios[0],
        amplitude_ratio_y=ratios[1],
        std_ratio_x=stds[0],
        std_ratio_y=stds[1],
        sample_count=len(real_iris),
    )


def _trimmed_amplitude(values: np.ndarray) -> float:
    centered = values - values.mean()
    lo, hi = np.percentile(centered, [5.0, 95.0], method="linear")
    return float(hi - lo)


def simulate_gain_oracle(
    cursor: Trajectory,
    gain: tuple[float, float],
    noise_std: float,
    seed: int,
    config: PipelineConfig | None = None,
) -> Trajectory:
    """Test double for the external simulator: a per-axis gain from canvas
    cursor position to normalized iris position, plus optional Gaussian noise.

    iris = 0.5 + gain * (cursor - canvas_center) / canvas_extent + noise.
    Deterministic given the seed; output is not clamped to the unit square.
    """
    require_space(cursor, Space.CANVAS, "simulate_gain_oracle")
    if gain[0] < 0 or gain[1] < 0:
        raise ValueError(f"gains must be non-negative, got {gain}")
    cfg = config or PipelineConfig()
    center = np.array(cfg.canvas_center)
    extent = np.array(cfg.canvas_extent)
    g = np.array(gain, dtype=np.float64)
    iris = 0.5 + g * (cursor.samples - center) / extent
    if noise_std > 0:
        rng = np.random.default_rng(seed)
        iris = iris + rng.normal(0.0, noise_std, size=iris.shape)
    return Trajectory(
        samples=iris,
        fps=cursor.fps,
        space=Space.NORMALIZED,
        source_id=f"gain_oracle[{cursor.source_id}]",
    )


# --- dataset-level evaluation ----------------------------------------------


def _pool_metrics(trajs: list[Trajectory], config: PipelineConfig) -> dict[str, np.ndarray]:
    """Pool per-trajectory metric samples across a class: all frames form one
    sample per metric."""
    speeds = []
    fix_durations = []
    sac_amplitudes = []
    for t in trajs:
        if len(t) < 2:
            continue
        speeds.append(compute_speeds(t))
        events = detect_ivt(
            t,
            config.ivt_fixation_threshold_px_per_frame,
            config.ivt_saccade_threshold_px_per_frame,
        )
        fix_durations.extend(f.length for f in events.fixations)
        sac_amplitudes.extend(s.amplitude_px for s in events.saccades)
    return {
        "speed": np.concatenate(speeds) if speeds else np.array([]),
        "fixation_duration": np.array(fix_durations, dtype=np.float64),
        "saccade_amplitude": np.array(sac_amplitudes, dtype=np.float64),
    }


def evaluate_dataset(
    source_trajs: dict[ClassLabel, list[Trajectory]],
    generated_trajs: dict[ClassLabel, list[Trajectory]],
    config: PipelineConfig,
    qq_points: int = 99,
) -> dict:
    """Per class and per metric, KS D plus Q-Q pairs of pooled source vs
    pooled generated samples.

    A metric with an empty pool on either side (e.g. zero saccades detected)
    is marked undefined rather than aborting the report.
    """
    classes = {}
    for label in sorted(source_trajs, key=lambda l: l.short_name):
        if label not in generated_trajs:
            raise ValueError(f"no generated trajectories for class {label.short_name}")
        if not source_trajs[label] or not generated_trajs[label]:
            raise ValueError(
                f"class {label.short_name} needs at least one trajectory on each side"
            )
        src_pool = _pool_metrics(source_trajs[label], config)
        gen_pool = _pool_metrics(generated_trajs[label], config)
        metrics = {}
        for name in METRIC_NAMES:
            src = src_pool[name]
            gen = gen_pool[name]
            if src.size == 0 or gen.size == 0:
                metrics[name] = {
                    "undefined": True,
                    "reason": f"empty pool (source={src.size}, generated={gen.size})",
                    "d": None,
                    "n": int(src.size),
                    "m": int(gen.size),
                }
                continue
            ks = ks_two_sample(src, gen)
            pairs = qq_pairs(src, gen, qq_points)
            metrics[name] = {
                "d": ks.d_statistic,
                "n": ks.n,
                "m": ks.m,
                "p_value": ks.p_value,
                "qq": [[float(s), float(g)] for s, g in pairs],
            }
        classes[label.short_name] = metrics
    return {
        "schema_version": EVAL_SCHEMA_VERSION,
        "ivt_thresholds_px_per_frame": {
            "fixation": config.ivt_fixation_threshold_px_per_frame,
            "saccade": config.ivt_saccade_threshold_px_per_frame,
        },
        "classes": classes,
    }


def write_eval_report(report: dict, out_path) -> list[str]:
    """Write the report JSON plus one Q-Q CSV per (class, metric) panel for
    external plotting; returns the written paths."""
    out_path = Path(out_path)
    out_path.parent.mkdir(parents=True, exist_ok=True)
    written = []
    with open(out_path, "w", newline="") as fh:
        json.dump(report, fh, indent=2, sort_keys=True)
        fh.write("\n")
    written.append(str(out_path))
    for class_name, metrics in report.get("classes", {}).items():
        for metric_name, block in metrics.items():
            if block.get("undefined") or "qq" not in block:
                continue
            panel = out_path.with_name(f"{out_path.stem}_qq_{class_name}_{metric_name}.csv")
            with open(panel, "w", newline="") as fh:
                fh.write("q_source,q_generated\n")
                for q_src, q_gen in block["qq"]:
                    fh.write(f"{q_src:.6f},{q_gen:.6f}\n")
            written.append(str(panel))
    return written
