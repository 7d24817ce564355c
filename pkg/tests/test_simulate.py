import math

import numpy as np
import pytest

from touchtrace.geom import Vec3
from touchtrace.protocol import ScaleConfig, encode_frames
from touchtrace.simulate import (
    CYLINDER_SHAPE,
    REPS,
    SHAPE_NAMES,
    SIZES_MM,
    TEXTURE_NAMES,
    TEXTURES,
    NoiseModel,
    TrialSpec,
    campaign_specs,
    gen_trajectory,
    noise_for_preset,
    read_manifest,
    shape_path_length,
    simulate_trial,
    synthesize_sensors,
    script_gesture_trace,
    trial_streams,
    truth_samples,
    write_manifest,
)
from touchtrace.trajectory import Trajectory

MM_PER_COUNT = ScaleConfig().mm_per_count


def spec_for(shape="hline", size=12, tilt=0.0, seed=9, texture="mousepad"):
    return TrialSpec(texture=texture, size_mm=size, shape=shape, rep=1, tilt_deg=tilt, seed=seed)


def test_circle_sample_count_matches_perimeter_arithmetic():
    truth = gen_trajectory(spec_for("circle", 42))
    expected_duration = math.pi * 42 / 30.0
    assert len(truth) == pytest.approx(expected_duration * 50, abs=2)
    assert len(truth) == 221  # ceil(pi*42/0.6) + 1


def test_hline_flat_is_straight_horizontal_segment():
    truth = gen_trajectory(spec_for("hline", 12, tilt=0.0))
    assert truth.pos_mm[0] == pytest.approx([0, 0, 0])
    assert truth.pos_mm[-1] == pytest.approx([12, 0, 0], abs=1e-9)
    assert np.all(np.abs(truth.pos_mm[:, 2]) < 1e-12)


def test_constant_speed_and_continuity():
    spec = spec_for("square", 42, tilt=35.0)
    truth = gen_trajectory(spec)
    steps = np.linalg.norm(np.diff(truth.pos_mm, axis=0), axis=1)
    assert np.all(steps <= spec.speed_mm_s * (1.0 / spec.rate_hz) * 1.5)
    assert np.all(steps[:-1] > 0)


def test_shape_lengths():
    assert shape_path_length("hline", 12) == 12
    assert shape_path_length("diag", 12) == pytest.approx(12)
    assert shape_path_length("triangle", 10) == pytest.approx(30)
    assert shape_path_length("square", 10) == pytest.approx(40)
    assert shape_path_length("circle", 10) == pytest.approx(math.pi * 10)


def test_orientation_equals_plane_attitude_and_tilt():
    spec = spec_for("circle", 21, tilt=30.0)
    truth = gen_trajectory(spec)
    assert np.allclose(truth.quat, truth.quat[0])
    # plane normal makes the tilt angle with world up
    from touchtrace.geom import EZ, UnitQuat, angle_between, rotate_vector

    n = rotate_vector(UnitQuat(*truth.quat[0]), EZ)
    assert angle_between(n, EZ) == pytest.approx(30.0, abs=1e-9)


def test_zero_noise_line_count_conservation():
    # straight 10 mm along plane u, at 400 cpi: total counts = round(10/0.0635)
    n = 31
    t_ms = np.arange(n) * 20
    pos = np.zeros((n, 3))
    pos[:, 0] = np.linspace(0.0, 10.0, n)
    quat = np.tile([1.0, 0, 0, 0], (n, 1))
    truth = Trajectory(t_ms, pos, quat)
    _, rng = trial_streams(1)
    frames = synthesize_sensors(truth, TEXTURES["mousepad"], NoiseModel.zero(), rng)
    assert sum(f.dx for f in frames) == round(10.0 / MM_PER_COUNT) == 157
    assert sum(f.dy for f in frames) == 0


def test_zero_noise_static_trial_is_quiet():
    n = 50
    truth = Trajectory(
        np.arange(n) * 20, np.zeros((n, 3)), np.tile([1.0, 0, 0, 0], (n, 1))
    )
    _, rng = trial_streams(2)
    frames = synthesize_sensors(truth, TEXTURES["wood"], NoiseModel.zero(), rng)
    for f in frames:
        assert f.dx == 0 and f.dy == 0
        assert f.gyro_raw == (0, 0, 0)
        assert f.accel_raw == (0, 0, -16384)


def test_zero_noise_count_conservation_all_shapes():
    for shape in SHAPE_NAMES:
        spec = spec_for(shape, 42, tilt=25.0, seed=3)
        truth, frames = simulate_trial(spec, NoiseModel.zero())
        cum = np.array([sum(f.dx for f in frames), sum(f.dy for f in frames)])
        # project the true displacement into the (constant) plane basis
        from touchtrace.trajectory import quat_matrices

        rot = quat_matrices(truth.quat[:1])[0]
        dp = truth.pos_mm[-1] - truth.pos_mm[0]
        expected = np.array([dp @ rot[:, 0], dp @ rot[:, 1]]) / MM_PER_COUNT
        assert np.all(np.abs(cum - expected) <= 1.0)


def test_contact_squal_range():
    for name in TEXTURE_NAMES:
        spec = spec_for("square", 84, tilt=10.0, seed=5, texture=name)
        _, frames = simulate_trial(spec, noise_for_preset("default", TEXTURES[name]))
        squals = [f.squal for f in frames]
        assert min(squals) >= 50 and max(squals) <= 90


def test_lift_segment_reports_near_zero_squal():
    n = 60
    truth = Trajectory(
        np.arange(n) * 20, np.zeros((n, 3)), np.tile([1.0, 0, 0, 0], (n, 1))
    )
    contact = np.ones(n, dtype=bool)
    contact[20:40] = False
    _, rng = trial_streams(8)
    frames = synthesize_sensors(
        truth, TEXTURES["mousepad"], NoiseModel.zero(), rng, contact=contact
    )
    for f in frames[20:40]:
        assert f.squal < 5
    for f in frames[:20]:
        assert f.squal >= 50


def test_off_plane_truth_rejected():
    n = 10
    pos = np.zeros((n, 3))
    pos[:, 0] = np.arange(n) * 0.5
    pos[5, 2] = 1.0  # hop off the plane
    truth = Trajectory(np.arange(n) * 20, pos, np.tile([1.0, 0, 0, 0], (n, 1)))
    _, rng = trial_streams(4)
    with pytest.raises(ValueError, match="plane"):
        synthesize_sensors(truth, TEXTURES["mousepad"], NoiseModel.zero(), rng)


def test_same_seed_same_bytes():
    spec = spec_for("circle", 21, tilt=55.0, seed=77)
    noise = noise_for_preset("default", TEXTURES["mousepad"])
    _, frames_a = simulate_trial(spec, noise)
    _, frames_b = simulate_trial(spec, noise)
    assert encode_frames(frames_a) == encode_frames(frames_b)


def test_different_seed_different_bytes():
    noise = noise_for_preset("default", TEXTURES["mousepad"])
    _, frames_a = simulate_trial(spec_for("circle", 21, tilt=55.0, seed=77), noise)
    _, frames_b = simulate_trial(spec_for("circle", 21, tilt=55.0, seed=78), noise)
    assert encode_frames(frames_a) != encode_frames(frames_b)


def test_campaign_grid():
    specs = campaign_specs(42)
    assert len(specs) == 360
    assert len(specs) == len(TEXTURE_NAMES) * len(SIZES_MM) * len(SHAPE_NAMES) * REPS
    assert len({s.seed for s in specs}) == 360
    assert all(0.0 <= s.tilt_deg < 90.0 for s in specs)
    # regenerating gives the identical grid
    assert campaign_specs(42) == specs
    assert campaign_specs(43) != specs


def test_manifest_round_trip(tmp_path):
    specs = campaign_specs(7)[:5]
    path = tmp_path / "manifest.json"
    write_manifest(path, 7, "zero", specs)
    seed, preset, loaded, dirs = read_manifest(path)
    assert (seed, preset) == (7, "zero")
    assert loaded == specs
    assert len(dirs) == 5 and dirs[0].startswith("trial_000_")


def test_cylinder_trajectory_geometry():
    spec = spec_for(CYLINDER_SHAPE, 42, tilt=0.0)
    truth = gen_trajectory(spec)
    # closed loop of diameter = size in the XZ plane
    assert np.linalg.norm(truth.pos_mm[-1] - truth.pos_mm[0]) <= 0.7  # one step
    assert truth.pos_mm[:, 1] == pytest.approx(0.0)
    span_x = truth.pos_mm[:, 0].max() - truth.pos_mm[:, 0].min()
    span_z = truth.pos_mm[:, 2].max() - truth.pos_mm[:, 2].min()
    assert span_x == pytest.approx(42.0, rel=0.01)
    assert span_z == pytest.approx(42.0, rel=0.01)


def test_cylinder_synthesis_is_on_plane():
    spec = spec_for(CYLINDER_SHAPE, 30, tilt=0.0, seed=12)
    truth = gen_trajectory(spec)
    _, rng = trial_streams(spec.seed)
    frames = synthesize_sensors(truth, TEXTURES["mousepad"], NoiseModel.zero(), rng)
    assert len(frames) == len(truth)
    assert sum(abs(f.dy) for f in frames) == 0  # wrap direction is pure u


def test_truth_samples_view():
    truth = gen_trajectory(spec_for("hline", 12))
    samples = truth_samples(truth)
    assert len(samples) == len(truth)
    assert samples[0].t_ms == 0
    assert isinstance(samples[0].position, Vec3)
    assert samples[1].t_ms - samples[0].t_ms == 20


def test_trial_spec_validation():
    with pytest.raises(ValueError, match="size"):
        spec_for(size=13)
    with pytest.raises(ValueError, match="shape"):
        spec_for(shape="star")
    with pytest.raises(ValueError, match="texture"):
        spec_for(texture="glass")


def test_gesture_trace_kind_validation():
    with pytest.raises(ValueError, match="unknown gesture kind"):
        script_gesture_trace("flick")
