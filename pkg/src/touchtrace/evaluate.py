"""Accuracy metrics, per-cell aggregation and one-way ANOVA.

The device reports only relative position, so predicted trajectories
are aligned to ground truth by translating the first sample onto it;
no rotation or scale correction is ever applied. Position error is
then the per-sample 3D Euclidean distance, orientation error the angle
between the finger-forward axes.

Per-trial statistics use the population sigma; the ANOVA uses the
classical between/within mean squares with the p-value taken from the
F survival function (a regularized incomplete beta).
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass
from pathlib import Path

import numpy as np
from scipy.special import betainc

from .simulate import SHAPE_NAMES, SIZES_MM, TEXTURE_NAMES, REPS, TrialSpec
from .trajectory import Trajectory, quat_forward_axes


class TrajectoryMismatchError(ValueError):
    pass


def align(pred: Trajectory, truth: Trajectory) -> Trajectory:
    """Translate pred so its first sample coincides with truth's first."""
    if len(pred) != len(truth):
        raise TrajectoryMismatchError(
            f"sample count mismatch: pred has {len(pred)}, truth has {len(truth)}"
        )
    if len(pred) == 0:
        raise TrajectoryMismatchError("cannot align empty trajectories")
    if not np.array_equal(pred.t_ms, truth.t_ms):
        k = int(np.argmax(pred.t_ms != truth.t_ms))
        raise TrajectoryMismatchError(
            f"timestamp mismatch at sample {k}: pred {pred.t_ms[k]} ms vs truth {truth.t_ms[k]} ms"
        )
    offset = truth.pos_mm[0] - pred.pos_mm[0]
    return Trajectory(pred.t_ms.copy(), pred.pos_mm + offset, pred.quat.copy())


def position_error(pred: Trajectory, truth: Trajectory) -> tuple[float, float, np.ndarray]:
    """(mean mm, population sigma mm, per-sample series)."""
    if len(pred) != len(truth):
        raise TrajectoryMismatchError(
            f"sample count mismatch: pred has {len(pred)}, truth has {len(truth)}"
        )
    series = np.linalg.norm(pred.pos_mm - truth.pos_mm, axis=1)
    return float(series.mean()), float(series.std()), series


def orientation_error(pred: Trajectory, truth: Trajectory) -> tuple[float, float, np.ndarray]:
    """(mean deg, population sigma deg, per-sample series) of forward axes."""
    if len(pred) != len(truth):
        raise TrajectoryMismatchError(
            f"sample count mismatch: pred has {len(pred)}, truth has {len(truth)}"
        )
    fa = quat_forward_axes(pred.quat)
    fb = quat_forward_axes(truth.quat)
    dots = np.clip(np.einsum("ni,ni->n", fa, fb), -1.0, 1.0)
    series = np.degrees(np.arccos(dots))
    return float(series.mean()), float(series.std()), series


@dataclass(frozen=True)
class TrialResult:
    spec: TrialSpec
    mean_pos_err_mm: float
    pos_err_sigma: float
    mean_ori_err_deg: float
    ori_err_sigma: float
    n_samples: int

    def metrics_json(self) -> str:
        return json.dumps(
            {
                "mean_pos_err_mm": self.mean_pos_err_mm,
                "pos_sigma": self.pos_err_sigma,
                "mean_ori_err_deg": self.mean_ori_err_deg,
                "ori_sigma": self.ori_err_sigma,
                "n": self.n_samples,
            }
        )


def trial_metrics(pred: Trajectory, truth: Trajectory) -> dict:
    """Aligned error metrics for a pred/truth pair, as the metrics.json payload."""
    aligned = align(pred, truth)
    pos_mean, pos_sigma, _ = position_error(aligned, truth)
    ori_mean, ori_sigma, _ = orientation_error(aligned, truth)
    return {
        "mean_pos_err_mm": pos_mean,
        "pos_sigma": pos_sigma,
        "mean_ori_err_deg": ori_mean,
        "ori_sigma": ori_sigma,
        "n": len(truth),
    }


def evaluate_trial(spec: TrialSpec, pred: Trajectory, truth: Trajectory) -> TrialResult:
    aligned = align(pred, truth)
    pos_mean, pos_sigma, _ = position_error(aligned, truth)
    ori_mean, ori_sigma, _ = orientation_error(aligned, truth)
    return TrialResult(
        spec=spec,
        mean_pos_err_mm=pos_mean,
        pos_err_sigma=pos_sigma,
        mean_ori_err_deg=ori_mean,
        ori_err_sigma=ori_sigma,
        n_samples=len(truth),
    )


@dataclass(frozen=True)
class AnovaResult:
    F: float
    df_between: int
    df_within: int
    p: float


def one_way_anova(groups) -> AnovaResult:
    """Classical one-way F test over two or more groups of observations.

    F = MSB / MSW; p = survival of F(df_between, df_within), computed via
    the regularized incomplete beta. Completely degenerate input (every
    observation identical) yields F = 0, p = 1.
    """
    groups = [np.asarray(g, dtype=float) for g in groups]
    if len(groups) < 2 or any(len(g) < 2 for g in groups):
        raise ValueError("one_way_anova needs >= 2 groups with >= 2 values each")
    n_total = sum(len(g) for g in groups)
    grand = sum(float(g.sum()) for g in groups) / n_total
    ssb = sum(len(g) * (float(g.mean()) - grand) ** 2 for g in groups)
    ssw = sum(float(((g - g.mean()) ** 2).sum()) for g in groups)
    df_b = len(groups) - 1
    df_w = n_total - len(groups)
    msb = ssb / df_b
    msw = ssw / df_w
    if msw == 0.0:
        if msb == 0.0:
            return AnovaResult(F=0.0, df_between=df_b, df_within=df_w, p=1.0)
        return AnovaResult(F=math.inf, df_between=df_b, df_within=df_w, p=0.0)
    f = msb / msw
    p = float(betainc(df_w / 2.0, df_b / 2.0, df_w / (df_w + df_b * f)))
    return AnovaResult(F=f, df_between=df_b, df_within=df_w, p=p)


@dataclass(frozen=True)
class CampaignSummary:
    per_size: dict
    per_texture: dict
    per_shape: dict
    grand: dict
    anova: AnovaResult

    def to_json(self) -> str:
        payload = {
            "per_size": self.per_size,
            "per_texture": self.per_texture,
            "per_shape": self.per_shape,
            "grand": self.grand,
            "anova": {
                "F": self.anova.F,
                "df": [self.anova.df_between, self.anova.df_within],
                "p": self.anova.p,
            },
        }
        return json.dumps(payload, indent=2)


def _cell_stats(results) -> dict:
    """Sample-weighted mean and sigma reconstructed from per-trial moments."""
    n = sum(r.n_samples for r in results)
    pos_sum = math.fsum(r.mean_pos_err_mm * r.n_samples for r in results)
    ori_sum = math.fsum(r.mean_ori_err_deg * r.n_samples for r in results)
    pos_sq = math.fsum((r.pos_err_sigma**2 + r.mean_pos_err_mm**2) * r.n_samples for r in results)
    ori_sq = math.fsum((r.ori_err_sigma**2 + r.mean_ori_err_deg**2) * r.n_samples for r in results)
    pos_mean = pos_sum / n
    ori_mean = ori_sum / n
    return {
        "n": n,
        "trials": len(results),
        "mean_pos_err_mm": pos_mean,
        "pos_sigma": math.sqrt(max(0.0, pos_sq / n - pos_mean**2)),
        "mean_ori_err_deg": ori_mean,
        "ori_sigma": math.sqrt(max(0.0, ori_sq / n - ori_mean**2)),
    }


def summarize_campaign(results) -> CampaignSummary:
    """Aggregate the full 360-trial grid; missing cells are an error."""
    results = list(results)
    seen = {}
    for r in results:
        key = (r.spec.texture, r.spec.size_mm, r.spec.shape, r.spec.rep)
        seen[key] = r
    missing = [
        f"{tex}/{size}/{shape}/rep{rep}"
        for tex in TEXTURE_NAMES
        for size in SIZES_MM
        for shape in SHAPE_NAMES
        for rep in range(1, REPS + 1)
        if (tex, size, shape, rep) not in seen
    ]
    if missing:
        preview = ", ".join(missing[:6]) + ("..." if len(missing) > 6 else "")
        raise ValueError(f"campaign is missing {len(missing)} cells: {preview}")

    per_size = {
        str(size): _cell_stats([r for r in results if r.spec.size_mm == size])
        for size in SIZES_MM
    }
    per_texture = {
        tex: _cell_stats([r for r in results if r.spec.texture == tex]) for tex in TEXTURE_NAMES
    }
    per_shape = {
        shape: _cell_stats([r for r in results if r.spec.shape == shape]) for shape in SHAPE_NAMES
    }
    grand = _cell_stats(results)
    anova = one_way_anova(
        [
            [r.mean_pos_err_mm for r in results if r.spec.texture == tex]
            for tex in TEXTURE_NAMES
        ]
    )
    return CampaignSummary(
        per_size=per_size,
        per_texture=per_texture,
        per_shape=per_shape,
        grand=grand,
        anova=anova,
    )


def write_summary(summary: CampaignSummary, path) -> None:
    Path(path).write_text(summary.to_json() + "\n", encoding="utf-8")
