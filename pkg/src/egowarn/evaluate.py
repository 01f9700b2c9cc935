"""Metrics and the equivalence harness.

ADE/FDE for predictions, precision/recall for alert events, order-statistic
latency percentiles, and the harness that measures how far predicting in the
ego-centered frame is from the two-global-predictions-minus-each-other
pipeline. All metrics work on the 2.5 Hz downsampled timeline.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from . import kalman, preprocess
from .collision import EVENT_ALERT
from .formats import GroundTruth, PredDump
from .geometry import SemiLocalPoint
from .predict import Predictor
from .preprocess import STEP, SmootherConfig


@dataclass
class EvalConfig:
    match_tolerance: float = 0.4  # seconds added to the alert matching window
    match_gate: float = 1.0  # meters; track-to-pedestrian association gate


def percentile_nearest_rank(values, p: float) -> float:
    """Exclusive nearest-rank order statistic: element floor(p/100*n) + 1.

    This is the spike-sensitive variant: with 99 fast frames and 1 slow one,
    p99 reports the slow frame.
    """
    if len(values) == 0:
        raise ValueError("percentile of empty sequence")
    ordered = sorted(values)
    rank = min(int(math.floor(p / 100.0 * len(ordered))) + 1, len(ordered))
    return ordered[rank - 1]


def latency_stats(wall_times_ms) -> tuple[float, float]:
    """(p50, p99) of per-frame processing times, exact order statistics."""
    return (
        percentile_nearest_rank(wall_times_ms, 50.0),
        percentile_nearest_rank(wall_times_ms, 99.0),
    )


def ade_fde(predictions: np.ndarray, gt_future: np.ndarray) -> tuple[float | None, float | None]:
    """ADE/FDE over aligned (m, horizon, 2) prediction and truth stacks."""
    predictions = np.asarray(predictions, dtype=float)
    gt_future = np.asarray(gt_future, dtype=float)
    if predictions.size == 0:
        return None, None
    if predictions.shape != gt_future.shape:
        raise ValueError(f"misaligned horizons: {predictions.shape} vs {gt_future.shape}")
    err = np.linalg.norm(predictions - gt_future, axis=-1)  # (m, horizon)
    return float(err.mean()), float(err[:, -1].mean())


def alert_pr(
    alert_times: list[float],
    interval_starts: list[float],
    window: float,
) -> tuple[float | None, float | None, float | None]:
    """Greedy time-ordered matching of alert events to collision intervals.

    An alert at t is a true positive if some yet-unmatched interval begins
    within [t, t + window]; each interval can be claimed once. Undefined
    metrics (no alerts / no intervals) come back as None.
    """
    alerts = sorted(alert_times)
    starts = sorted(interval_starts)
    taken = [False] * len(starts)
    tp = 0
    for t in alerts:
        for j, s in enumerate(starts):
            if taken[j] or s < t:
                continue
            if s <= t + window:
                taken[j] = True
                tp += 1
            break
    fp = len(alerts) - tp
    fn = len(starts) - tp
    precision = tp / (tp + fp) if alerts else None
    recall = tp / (tp + fn) if starts else None
    if precision is None or recall is None:
        f1 = None
    elif precision + recall == 0:
        f1 = 0.0
    else:
        f1 = 2 * precision * recall / (precision + recall)
    return precision, recall, f1


class TruthInterp:
    """Linear interpolation over the 30 Hz ground-truth trajectories."""

    def __init__(self, truth: GroundTruth):
        self.truth = truth
        self.t = truth.t

    def ego_xy(self, t: float) -> np.ndarray | None:
        if len(self.t) == 0 or t < self.t[0] - 1e-9 or t > self.t[-1] + 1e-9:
            return None
        return np.array(
            [np.interp(t, self.t, self.truth.ego[:, 0]), np.interp(t, self.t, self.truth.ego[:, 1])]
        )

    def ped_xy(self, ped_id: int, t: float) -> np.ndarray | None:
        ped = self.truth.peds.get(ped_id)
        if ped is None or len(ped.positions) == 0:
            return None
        ts = self.t[ped.spawn_frame : ped.spawn_frame + len(ped.positions)]
        if t < ts[0] - 1e-9 or t > ts[-1] + 1e-9:
            return None
        return np.array(
            [np.interp(t, ts, ped.positions[:, 0]), np.interp(t, ts, ped.positions[:, 1])]
        )

    def semilocal_xy(self, ped_id: int, t: float) -> np.ndarray | None:
        ped = self.ped_xy(ped_id, t)
        ego = self.ego_xy(t)
        if ped is None or ego is None:
            return None
        return ped - ego

    def nearest_ped(self, point: np.ndarray, t: float, gate: float) -> int | None:
        best, best_d = None, gate
        for ped_id in self.truth.peds:
            s = self.semilocal_xy(ped_id, t)
            if s is None:
                continue
            d = float(np.hypot(*(s - point)))
            if d < best_d:
                best, best_d = ped_id, d
        return best


# ---------------------------------------------------------------------------
# the semi-local vs two-global-predictions equivalence harness


@dataclass
class EquivalenceStats:
    residual_max: float | None
    residual_mean: float | None
    count: int


def _downsampled_xy(ts: np.ndarray, xy: np.ndarray, native_fps: int) -> np.ndarray:
    """Window-mean via the production downsampler; (n, 2) with NaN gaps."""
    samples = [
        (float(t), SemiLocalPoint(float(x), float(y), 0.0)) for t, (x, y) in zip(ts, xy)
    ]
    track = preprocess.downsample(0, samples, native_fps)
    return track.horizontal()


def equivalence(
    truth: GroundTruth,
    predictor: Predictor,
    smoother: SmootherConfig | None = None,
) -> EquivalenceStats:
    """Residual of f(ped - ego) vs f(ped) - f(ego) over every window.

    All three series go through the identical downsample (and optional
    smoothing) chain, mirroring the live pipeline. For a linear predictor the
    residual is floating-point noise; for a nonlinear one it is reported and
    never asserted.
    """
    window = predictor.contract.observe_window
    residuals: list[float] = []
    for ped_id in sorted(truth.peds):
        ped = truth.peds[ped_id]
        n = len(ped.positions)
        if n == 0:
            continue
        lo = ped.spawn_frame
        ts = truth.t[lo : lo + n]
        ped_xy = ped.positions[:, :2]
        ego_xy = truth.ego[lo : lo + n, :2]
        series = {
            "ped": _downsampled_xy(ts, ped_xy, truth.native_fps),
            "ego": _downsampled_xy(ts, ego_xy, truth.native_fps),
            "semi": _downsampled_xy(ts, ped_xy - ego_xy, truth.native_fps),
        }
        if smoother is not None and smoother.enabled:
            for key, xy in series.items():
                res = kalman.forward_filter(xy, STEP, smoother.sigma_a, smoother.sigma_m)
                if smoother.mode == "batch":
                    xy_s, _ = kalman.rts_smooth(res, STEP, smoother.sigma_a)
                else:
                    xy_s = res.positions
                series[key] = xy_s
        m = len(series["ped"])
        for k in range(window - 1, m):
            windows = {key: xy[k - window + 1 : k + 1] for key, xy in series.items()}
            if any(np.isnan(w).any() for w in windows.values()):
                continue
            f_ped = predictor.predict_window(windows["ped"])
            f_ego = predictor.predict_window(windows["ego"])
            f_semi = predictor.predict_window(windows["semi"])
            residuals.append(float(np.linalg.norm(f_semi - (f_ped - f_ego), axis=1).max()))
    if not residuals:
        return EquivalenceStats(None, None, 0)
    return EquivalenceStats(max(residuals), float(np.mean(residuals)), len(residuals))


# ---------------------------------------------------------------------------
# run-level report


def track_errors(
    dump: PredDump, truth: GroundTruth, gate: float = 1.0
) -> tuple[list[float], list[float]]:
    """Per-sample distance to the nearest ground-truth pedestrian.

    Returns (raw_errors, smoothed_errors) over the samples that carry both a
    raw measurement and a smoothed estimate, so the two are comparable.
    """
    interp = TruthInterp(truth)
    raw_errors: list[float] = []
    smoothed_errors: list[float] = []
    for s in dump.samples:
        if s.raw is None or s.smoothed is None:
            continue
        raw = np.asarray(s.raw)
        ped_id = interp.nearest_ped(raw, s.t, gate)
        if ped_id is None:
            continue
        gt = interp.semilocal_xy(ped_id, s.t)
        raw_errors.append(float(np.hypot(*(raw - gt))))
        smoothed_errors.append(float(np.hypot(*(np.asarray(s.smoothed) - gt))))
    return raw_errors, smoothed_errors


def report_from_run(
    truth: GroundTruth,
    events,
    dump: PredDump,
    horizon_steps: int,
    cfg: EvalConfig | None = None,
) -> dict:
    """Build the full metrics document for one run's outputs."""
    cfg = cfg or EvalConfig()
    interp = TruthInterp(truth)
    horizon_s = horizon_steps * STEP

    observed: dict[tuple[float, int], np.ndarray] = {}
    for s in dump.samples:
        point = s.smoothed if s.smoothed is not None else s.raw
        if point is not None:
            observed[(s.t, s.track_id)] = np.asarray(point)

    preds, gts = [], []
    for p in dump.predictions:
        obs = observed.get((p.t, p.track_id))
        if obs is None:
            continue
        ped_id = interp.nearest_ped(obs, p.t, cfg.match_gate)
        if ped_id is None:
            continue
        future = [interp.semilocal_xy(ped_id, p.t + (i + 1) * STEP) for i in range(len(p.points))]
        if any(f is None for f in future):
            continue
        preds.append(np.asarray(p.points, dtype=float))
        gts.append(np.stack(future))
    ade, fde = (None, None)
    if preds:
        ade, fde = ade_fde(np.stack(preds), np.stack(gts))

    alert_times = [e.t for e in events if e.kind == EVENT_ALERT]
    precision, recall, f1 = alert_pr(
        alert_times,
        [iv.t_start for iv in truth.intervals],
        window=horizon_s + cfg.match_tolerance,
    )

    report: dict = {
        "ade": ade,
        "fde": fde,
        "precision": precision,
        "recall": recall,
        "f1": f1,
        "equivalence_residual_max": None,
        "equivalence_residual_mean": None,
        "latency_p50_ms": None,
        "latency_p99_ms": None,
        "counts": {
            "tracks": len({s.track_id for s in dump.samples}),
            "predictions": len(dump.predictions),
            "alerts": len(alert_times),
            "gt_intervals": len(truth.intervals),
        },
    }
    if dump.summary is not None:
        report["latency_p50_ms"] = dump.summary.latency_p50_ms
        report["latency_p99_ms"] = dump.summary.latency_p99_ms
    return report


def merge_reports(reports: list[dict]) -> dict:
    """Count-weighted merge of per-scenario reports.

    ade/fde weighted by prediction counts, precision by alert counts, recall
    by gt-interval counts, latency percentiles by frame counts (an
    approximation; exact percentiles need the raw samples), residual max by
    max, residual mean by prediction counts.
    """

    def weighted(key: str, weight_key: str) -> float | None:
        pairs = [
            (r[key], r["counts"].get(weight_key) or 0)
            for r in reports
            if r.get(key) is not None
        ]
        total = sum(w for _, w in pairs)
        if not pairs or total == 0:
            return None
        return sum(v * w for v, w in pairs) / total

    merged = {
        "ade": weighted("ade", "predictions"),
        "fde": weighted("fde", "predictions"),
        "precision": weighted("precision", "alerts"),
        "recall": weighted("recall", "gt_intervals"),
        "equivalence_residual_mean": weighted("equivalence_residual_mean", "predictions"),
        "equivalence_residual_max": max(
            (r["equivalence_residual_max"] for r in reports if r.get("equivalence_residual_max") is not None),
            default=None,
        ),
        "latency_p50_ms": weighted("latency_p50_ms", "predictions"),
        "latency_p99_ms": weighted("latency_p99_ms", "predictions"),
        "counts": {
            key: sum(r["counts"].get(key) or 0 for r in reports)
            for key in ("tracks", "predictions", "alerts", "gt_intervals")
        },
    }
    p, r = merged["precision"], merged["recall"]
    merged["f1"] = None if p is None or r is None else (0.0 if p + r == 0 else 2 * p * r / (p + r))
    return merged
