"""Host-side replay pipeline and the evaluation campaign runner.

Replay mirrors what the tethered host does with a live device: decode
the byte stream, scale the channels, fuse orientation, detect gestures,
and integrate optical deltas along the derived touch plane into a 3D
pointer track (one row per frame).

The campaign runner pushes every synthesized trial through this exact
pipeline (bytes included) and scores it against the ground truth, so
its numbers measure the whole stack, not a shortcut.
"""

from __future__ import annotations

from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field

import numpy as np

from .evaluate import CampaignSummary, TrialResult, evaluate_trial, summarize_campaign
from .gestures import GestureConfig, GestureDetector, GestureEvent
from .interaction import MountMode, derive_plane
from .orientation import FilterConfig, FilterDiagnostics, OrientationFilter
from .protocol import (
    DecoderDiagnostics,
    ScaleConfig,
    SensorFrame,
    apply_scales,
    decode_stream,
    encode_frames,
)
from .simulate import (
    CYLINDER_SHAPE,
    NoiseModel,
    TEXTURES,
    TrialSpec,
    campaign_specs,
    noise_for_preset,
    simulate_trial,
)
from .trajectory import Trajectory


@dataclass(frozen=True)
class ReplayConfig:
    scales: ScaleConfig = field(default_factory=ScaleConfig)
    filter_config: FilterConfig = field(default_factory=FilterConfig)
    gesture_config: GestureConfig = field(default_factory=GestureConfig)
    mount: MountMode = MountMode.FINGERPAD
    with_gestures: bool = True


@dataclass
class ReplayResult:
    pointer: Trajectory
    events: list[GestureEvent]
    filter_diagnostics: FilterDiagnostics


def replay_frames(frames: list[SensorFrame], config: ReplayConfig | None = None) -> ReplayResult:
    """Run decoded frames through filter, gestures and pointer projection."""
    config = config or ReplayConfig()
    if not frames:
        raise ValueError("replay needs at least one frame")
    filt = OrientationFilter(config.filter_config)
    detector = GestureDetector(config.gesture_config) if config.with_gestures else None
    mm = config.scales.mm_per_count

    n = len(frames)
    t_ms = np.empty(n, dtype=np.int64)
    pos = np.empty((n, 3))
    quat = np.empty((n, 4))
    px = py = pz = 0.0
    events: list[GestureEvent] = []

    for i, frame in enumerate(frames):
        sample = apply_scales(frame, config.scales)
        estimate = filt.process(sample)
        plane = derive_plane(estimate.q, config.mount)
        sx = frame.dx * mm
        sy = frame.dy * mm
        px += plane.u.x * sx + plane.v.x * sy
        py += plane.u.y * sx + plane.v.y * sy
        pz += plane.u.z * sx + plane.v.z * sy
        t_ms[i] = frame.timestamp_ms
        pos[i, 0] = px
        pos[i, 1] = py
        pos[i, 2] = pz
        q = estimate.q
        quat[i, 0] = q.w
        quat[i, 1] = q.x
        quat[i, 2] = q.y
        quat[i, 3] = q.z
        if detector is not None:
            events.extend(detector.step(frame))
    if detector is not None:
        events.extend(detector.finish())

    return ReplayResult(
        pointer=Trajectory(t_ms, pos, quat),
        events=events,
        filter_diagnostics=filt.diagnostics,
    )


def replay_bytes(
    data: bytes, config: ReplayConfig | None = None
) -> tuple[ReplayResult | None, DecoderDiagnostics]:
    """Decode then replay; None result when nothing decodes."""
    frames, diagnostics = decode_stream(data)
    if not frames:
        return None, diagnostics
    return replay_frames(frames, config), diagnostics


# -- campaign -----------------------------------------------------------------


def run_trial(
    spec: TrialSpec,
    noise: NoiseModel,
    config: ReplayConfig | None = None,
) -> TrialResult:
    """Synthesize one trial, replay it through the wire, score it."""
    config = config or ReplayConfig(with_gestures=False)
    truth, frames = simulate_trial(spec, noise, config.scales)
    result, _ = replay_bytes(encode_frames(frames), config)
    assert result is not None
    return evaluate_trial(spec, result.pointer, truth)


def _campaign_worker(args: tuple[TrialSpec, str]) -> TrialResult:
    spec, preset = args
    noise = noise_for_preset(preset, TEXTURES[spec.texture])
    return run_trial(spec, noise)


def run_campaign(
    campaign_seed: int,
    noise_preset: str = "default",
    jobs: int = 1,
) -> tuple[list[TrialResult], CampaignSummary]:
    """All 360 trials of the grid; identical results for any job count."""
    specs = campaign_specs(campaign_seed)
    work = [(spec, noise_preset) for spec in specs]
    if jobs > 1:
        with ProcessPoolExecutor(max_workers=jobs) as pool:
            results = list(pool.map(_campaign_worker, work, chunksize=8))
    else:
        results = [_campaign_worker(item) for item in work]
    return results, summarize_campaign(results)


def replay_cylinder_demo(
    diameter_mm: float = 30.0, seed: int = 7, config: ReplayConfig | None = None
) -> tuple[Trajectory, ReplayResult]:
    """Zero-noise wrap around a cylinder (the curved-surface scenario)."""
    spec = TrialSpec(
        texture="mousepad",
        size_mm=int(diameter_mm),
        shape=CYLINDER_SHAPE,
        rep=1,
        tilt_deg=0.0,
        seed=seed,
    )
    truth, frames = simulate_trial(spec, NoiseModel.zero())
    config = config or ReplayConfig(with_gestures=False)
    result, _ = replay_bytes(encode_frames(frames), config)
    assert result is not None
    return truth, result
