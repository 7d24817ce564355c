import json
import math

import numpy as np
import pytest

from touchtrace.evaluate import (
    AnovaResult,
    TrajectoryMismatchError,
    TrialResult,
    align,
    evaluate_trial,
    one_way_anova,
    orientation_error,
    position_error,
    summarize_campaign,
)
from touchtrace.simulate import campaign_specs, gen_trajectory
from touchtrace.trajectory import Trajectory, read_csv


def traj(n=10, offset=(0.0, 0.0, 0.0), yaw_deg=0.0):
    t = np.arange(n) * 20
    pos = np.zeros((n, 3))
    pos[:, 0] = np.linspace(0, 9, n)
    pos += np.asarray(offset)
    half = math.radians(yaw_deg) / 2
    quat = np.tile([math.cos(half), 0.0, 0.0, math.sin(half)], (n, 1))
    return Trajectory(t, pos, quat)


def test_align_identity():
    a = traj()
    out = align(a, a)
    assert np.allclose(out.pos_mm, a.pos_mm)


def test_align_removes_constant_offset():
    truth = traj()
    pred = traj(offset=(1.0, 0.0, 0.0))
    aligned = align(pred, truth)
    assert np.allclose(aligned.pos_mm, truth.pos_mm)


def test_align_keeps_drift():
    truth = traj()
    pred = traj()
    pred.pos_mm[5:, 1] += 2.0  # drift after t0 must survive alignment
    aligned = align(pred, truth)
    assert np.allclose(aligned.pos_mm[:5], truth.pos_mm[:5])
    assert np.allclose(aligned.pos_mm[5:, 1] - truth.pos_mm[5:, 1], 2.0)


def test_align_timestamp_mismatch_raises():
    truth = traj()
    pred = traj()
    pred.t_ms[3] += 1
    with pytest.raises(TrajectoryMismatchError, match="sample 3"):
        align(pred, truth)


def test_position_error_identical():
    a = traj()
    mean, sigma, series = position_error(a, a)
    assert mean == 0.0 and sigma == 0.0
    assert np.all(series == 0)


def test_position_error_offset_after_alignment():
    n = 10
    truth = traj(n)
    pred = traj(n)
    pred.pos_mm[1:, 0] += 1.0
    aligned = align(pred, truth)
    mean, _, _ = position_error(aligned, truth)
    assert mean == pytest.approx((n - 1) / n)


def test_position_error_symmetric():
    a = traj()
    b = traj()
    b.pos_mm[:, 1] += np.linspace(0, 2, len(b))
    assert position_error(a, b)[0] == pytest.approx(position_error(b, a)[0])


def test_orientation_error_identical_and_offset():
    a = traj()
    assert orientation_error(a, a)[0] == 0.0
    b = traj(yaw_deg=90.0)
    mean, sigma, _ = orientation_error(a, b)
    assert mean == pytest.approx(90.0, abs=1e-9)
    assert sigma == pytest.approx(0.0, abs=1e-9)


def test_length_mismatch_raises():
    with pytest.raises(TrajectoryMismatchError):
        position_error(traj(5), traj(6))


def test_anova_hand_computed_fixture():
    res = one_way_anova([[1, 2, 3], [2, 3, 4], [3, 4, 5]])
    assert res.F == pytest.approx(3.0, abs=1e-12)
    assert (res.df_between, res.df_within) == (2, 6)
    # closed form: I_{0.5}(3, 1) = 0.5^3
    assert res.p == pytest.approx(0.125, abs=1e-9)


def test_anova_identical_groups_degenerate():
    res = one_way_anova([[2, 2], [2, 2], [2, 2]])
    assert res.F == 0.0
    assert res.p == 1.0


def test_anova_translation_and_scale_invariance():
    base = [[1.0, 2, 3], [2, 3, 4], [3, 4, 5]]
    shifted = [[x + 17.5 for x in g] for g in base]
    scaled = [[x * 3.25 for x in g] for g in base]
    f0 = one_way_anova(base).F
    assert one_way_anova(shifted).F == pytest.approx(f0, abs=1e-9)
    assert one_way_anova(scaled).F == pytest.approx(f0, abs=1e-9)


def test_anova_p_monotone_in_f():
    """p must fall as F rises for fixed dfs."""
    from scipy.special import betainc

    ps = [float(betainc(3.0, 1.0, 6.0 / (6.0 + 2.0 * f))) for f in (0.5, 1.0, 2.0, 4.0, 8.0)]
    assert all(a > b for a, b in zip(ps, ps[1:]))


def test_anova_validates_input():
    with pytest.raises(ValueError):
        one_way_anova([[1, 2]])
    with pytest.raises(ValueError):
        one_way_anova([[1], [2]])


def _fake_results(campaign_seed=1):
    results = []
    for spec in campaign_specs(campaign_seed):
        n = 100 + spec.size_mm
        results.append(
            TrialResult(
                spec=spec,
                mean_pos_err_mm=0.01 * spec.size_mm,
                pos_err_sigma=0.005 * spec.size_mm,
                mean_ori_err_deg=0.02 * spec.size_mm,
                ori_err_sigma=0.01,
                n_samples=n,
            )
        )
    return results


def test_summarize_campaign_structure_and_weighting():
    results = _fake_results()
    summary = summarize_campaign(results)
    assert set(summary.per_size) == {"12", "21", "42", "84"}
    assert set(summary.per_texture) == {"mousepad", "wood", "jeans"}
    assert len(summary.per_shape) == 6
    # grand mean equals the sample-weighted mean of per-trial means
    n_total = sum(r.n_samples for r in results)
    expected = sum(r.mean_pos_err_mm * r.n_samples for r in results) / n_total
    assert summary.grand["mean_pos_err_mm"] == pytest.approx(expected, abs=1e-9)
    assert summary.grand["n"] == n_total
    # identical per-texture populations: no significance
    assert summary.anova.p > 0.05
    assert summary.anova.df_between == 2
    assert summary.anova.df_within == 357


def test_summarize_campaign_missing_cells():
    results = _fake_results()[:-3]
    with pytest.raises(ValueError, match="missing 3 cells"):
        summarize_campaign(results)


def test_summary_json_schema():
    summary = summarize_campaign(_fake_results())
    payload = json.loads(summary.to_json())
    assert set(payload) == {"per_size", "per_texture", "per_shape", "grand", "anova"}
    assert set(payload["anova"]) == {"F", "df", "p"}
    assert payload["anova"]["df"] == [2, 357]


def test_metrics_json_schema():
    r = _fake_results()[0]
    payload = json.loads(r.metrics_json())
    assert set(payload) == {"mean_pos_err_mm", "pos_sigma", "mean_ori_err_deg", "ori_sigma", "n"}


def test_evaluate_trial_perfect_prediction():
    spec = campaign_specs(3)[0]
    truth = gen_trajectory(spec)
    pred = Trajectory(truth.t_ms.copy(), truth.pos_mm + 5.0, truth.quat.copy())
    result = evaluate_trial(spec, pred, truth)
    assert result.mean_pos_err_mm == pytest.approx(0.0, abs=1e-9)
    assert result.mean_ori_err_deg == pytest.approx(0.0, abs=1e-5)
    assert result.n_samples == len(truth)


def test_trajectory_csv_round_trip(tmp_path):
    t = traj(7, offset=(0.25, -1.5, 3.0), yaw_deg=33.0)
    path = tmp_path / "truth.csv"
    t.write_csv(path)
    back = read_csv(path)
    assert np.array_equal(back.t_ms, t.t_ms)
    assert np.allclose(back.pos_mm, t.pos_mm, atol=1e-9)
    assert np.allclose(back.quat, t.quat, atol=1e-9)
