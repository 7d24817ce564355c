"""Ground-truth trajectory generation and sensor synthesis.

This is the independent oracle for the rest of the pipeline: it writes
down where the finger really was, then fabricates the byte-for-byte
sensor stream a device would have produced while drawing that path.

The evaluation campaign covers a 3 texture x 4 size x 6 shape grid with
five repetitions per cell (360 trials), each drawn on a plane tilted at
a per-trial random angle in [0, 90) degrees, traced at constant speed
and sampled at 50 Hz.
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from .geom import EY, Vec3, axis_angle_quat
from .gestures import GestureConfig
from .orientation import FilterConfig
from .protocol import ScaleConfig, SensorFrame
from .trajectory import Trajectory, quat_matrices, quat_midpoints, quat_relative_rotvec

TEXTURE_NAMES = ("mousepad", "wood", "jeans")
SIZES_MM = (12, 21, 42, 84)
SHAPE_NAMES = ("hline", "vline", "diag", "triangle", "square", "circle")
REPS = 5
CYLINDER_SHAPE = "cylinder"  # curved-surface wrap demo; not in the campaign grid

_DEG = math.pi / 180.0


@dataclass(frozen=True)
class TextureModel:
    """Statistical stand-in for one drawing surface."""

    squal_mean: float
    squal_jitter: float = 6.0
    slip_sigma_counts: float = 0.3
    dropout_prob: float = 0.0

    def __post_init__(self) -> None:
        if not 50.0 <= self.squal_mean <= 90.0:
            raise ValueError("squal_mean must lie in [50, 90]")
        if self.squal_jitter < 0 or self.slip_sigma_counts < 0:
            raise ValueError("noise magnitudes must be >= 0")
        if not 0.0 <= self.dropout_prob < 1.0:
            raise ValueError("dropout_prob must be in [0, 1)")


TEXTURES: dict[str, TextureModel] = {
    "mousepad": TextureModel(squal_mean=70.0),
    "wood": TextureModel(squal_mean=60.0),
    "jeans": TextureModel(squal_mean=55.0),
}


@dataclass(frozen=True)
class NoiseModel:
    """Per-sample sensor noise; one per-trial gyro bias draw.

    All draws are Gaussian from the trial's seeded generator, so a given
    (spec, seed) pair always produces the identical byte stream. The
    default magnitudes are calibrated so the seeded campaign lands in the
    harness's target accuracy bands; they are an operating point, not a
    datasheet claim.
    """

    slip_sigma_counts: float = 0.3
    gyro_sigma_dps: float = 3.0
    gyro_bias_sigma_dps: float = 1.05
    accel_sigma_g: float = 0.045
    mag_sigma_gauss: float = 0.011

    def __post_init__(self) -> None:
        for name in self.__dataclass_fields__:
            if getattr(self, name) < 0:
                raise ValueError(f"{name} must be >= 0")

    @staticmethod
    def zero() -> "NoiseModel":
        return NoiseModel(0.0, 0.0, 0.0, 0.0, 0.0)

    @staticmethod
    def default_for(texture: TextureModel) -> "NoiseModel":
        return NoiseModel(slip_sigma_counts=texture.slip_sigma_counts)


NOISE_PRESETS = ("zero", "default")


def noise_for_preset(preset: str, texture: TextureModel) -> NoiseModel:
    if preset == "zero":
        return NoiseModel.zero()
    if preset == "default":
        return NoiseModel.default_for(texture)
    raise ValueError(f"unknown noise preset {preset!r}; expected one of {NOISE_PRESETS}")


@dataclass(frozen=True)
class TrialSpec:
    texture: str
    size_mm: int
    shape: str
    rep: int
    tilt_deg: float
    seed: int
    rate_hz: float = 50.0
    speed_mm_s: float = 30.0

    def __post_init__(self) -> None:
        if self.texture not in TEXTURE_NAMES:
            raise ValueError(f"texture must be one of {','.join(TEXTURE_NAMES)}")
        if self.shape not in SHAPE_NAMES + (CYLINDER_SHAPE,):
            raise ValueError(f"shape must be one of {','.join(SHAPE_NAMES + (CYLINDER_SHAPE,))}")
        if self.shape == CYLINDER_SHAPE:
            # wrap demos take any positive diameter; only the grid is fixed
            if self.size_mm <= 0:
                raise ValueError("cylinder diameter must be > 0")
        elif self.size_mm not in SIZES_MM:
            raise ValueError(f"size must be one of {','.join(map(str, SIZES_MM))}")
        if not 1 <= self.rep <= REPS:
            raise ValueError(f"rep must be in 1..{REPS}")
        if not 0.0 <= self.tilt_deg <= 90.0:
            raise ValueError("tilt_deg must be in [0, 90]")
        if self.rate_hz <= 0 or self.speed_mm_s <= 0:
            raise ValueError("rate_hz and speed_mm_s must be > 0")


@dataclass(frozen=True)
class GroundTruthSample:
    t_ms: int
    position: Vec3
    orientation: tuple[float, float, float, float]  # (w, x, y, z)


def truth_samples(truth: Trajectory) -> list[GroundTruthSample]:
    """Per-sample view of a ground-truth trajectory."""
    return [
        GroundTruthSample(
            t_ms=int(truth.t_ms[i]),
            position=Vec3(*truth.pos_mm[i]),
            orientation=tuple(truth.quat[i]),
        )
        for i in range(len(truth))
    ]


def _shape_vertices(shape: str, s: float) -> np.ndarray | None:
    """Polyline vertices in plane coordinates; None for the circle."""
    r2 = 1.0 / math.sqrt(2.0)
    if shape == "hline":
        pts = [(0, 0), (s, 0)]
    elif shape == "vline":
        pts = [(0, 0), (0, s)]
    elif shape == "diag":
        pts = [(0, 0), (s * r2, s * r2)]
    elif shape == "triangle":
        pts = [(0, 0), (s, 0), (s / 2, s * math.sqrt(3) / 2), (0, 0)]
    elif shape == "square":
        pts = [(0, 0), (s, 0), (s, s), (0, s), (0, 0)]
    elif shape == "circle":
        return None
    else:
        raise ValueError(f"unknown shape {shape!r}")
    return np.array(pts, dtype=float)


def shape_path_length(shape: str, size_mm: float) -> float:
    if shape == "circle":
        return math.pi * size_mm
    if shape == CYLINDER_SHAPE:
        return math.pi * size_mm
    verts = _shape_vertices(shape, size_mm)
    return float(np.sum(np.linalg.norm(np.diff(verts, axis=0), axis=1)))


def _local_coords(shape: str, size_mm: float, arcs: np.ndarray) -> np.ndarray:
    """Plane-frame (x, y) at the given arc lengths, (N,2)."""
    if shape == "circle":
        r = size_mm / 2.0
        theta = math.pi + arcs / r  # start at (0, 0), sweep the full circle
        return np.stack([size_mm / 2.0 + r * np.cos(theta), r * np.sin(theta)], axis=1)
    verts = _shape_vertices(shape, size_mm)
    seg = np.linalg.norm(np.diff(verts, axis=0), axis=1)
    cum = np.concatenate([[0.0], np.cumsum(seg)])
    x = np.interp(arcs, cum, verts[:, 0])
    y = np.interp(arcs, cum, verts[:, 1])
    return np.stack([x, y], axis=1)


def gen_trajectory(spec: TrialSpec) -> Trajectory:
    """Trace the trial's shape at constant speed on the tilted plane.

    The device orientation equals the plane attitude throughout; the
    cylinder shape instead rolls the attitude along the wrap.
    """
    dt = 1.0 / spec.rate_hz
    step = spec.speed_mm_s * dt
    length = shape_path_length(spec.shape, spec.size_mm)
    n_steps = int(math.ceil(length / step - 1e-9))
    arcs = np.minimum(np.arange(n_steps + 1) * step, length)
    t_ms = np.round(np.arange(n_steps + 1) * (1000.0 * dt)).astype(np.int64)

    if spec.shape == CYLINDER_SHAPE:
        return _cylinder_trajectory(spec, arcs, t_ms)

    q = axis_angle_quat(EY, spec.tilt_deg)
    rot = np.array(
        [
            [1 - 2 * (q.y**2 + q.z**2), 2 * (q.x * q.y - q.w * q.z), 2 * (q.x * q.z + q.w * q.y)],
            [2 * (q.x * q.y + q.w * q.z), 1 - 2 * (q.x**2 + q.z**2), 2 * (q.y * q.z - q.w * q.x)],
            [2 * (q.x * q.z - q.w * q.y), 2 * (q.y * q.z + q.w * q.x), 1 - 2 * (q.x**2 + q.y**2)],
        ]
    )
    local = _local_coords(spec.shape, float(spec.size_mm), arcs)
    pos = local[:, 0:1] * rot[:, 0] + local[:, 1:2] * rot[:, 1]
    quat = np.tile([q.w, q.x, q.y, q.z], (len(arcs), 1))
    return Trajectory(t_ms, pos, quat)


def _cylinder_trajectory(spec: TrialSpec, arcs: np.ndarray, t_ms: np.ndarray) -> Trajectory:
    """Wrap once around a horizontal cylinder of diameter size_mm.

    The finger stays on the outer surface: position follows the cross
    section circle while the touch plane stays tangent, so the attitude
    rolls continuously along the path.
    """
    radius = spec.size_mm / 2.0
    phi = arcs / radius
    sin, cos = np.sin(phi), np.cos(phi)
    # body axes in world coordinates: x = travel tangent, y = cylinder
    # axis (world Y), z = outward normal
    pos = np.stack([radius * sin, np.zeros_like(phi), radius * cos], axis=1)
    n = len(phi)
    quat = np.empty((n, 4))
    half = 0.5 * phi
    # rotation about world Y by +phi applied to the identity tangent frame
    quat[:, 0] = np.cos(half)
    quat[:, 1] = 0.0
    quat[:, 2] = np.sin(half)
    quat[:, 3] = 0.0
    pos[:, 0] -= pos[0, 0]
    pos[:, 2] -= pos[0, 2]
    return Trajectory(t_ms, pos, quat)


def synthesize_sensors(
    truth: Trajectory,
    texture: TextureModel,
    noise: NoiseModel,
    rng: np.random.Generator,
    scales: ScaleConfig | None = None,
    contact: np.ndarray | None = None,
    mag_reference: Vec3 | None = None,
) -> list[SensorFrame]:
    """Fabricate the wire frames a device tracing ``truth`` would emit.

    Per step the in-plane displacement (taken against the step-midpoint
    plane) becomes fractional counts, quantized through a running
    accumulator so the emitted integers always sum back to the true
    path. IMU channels carry the exact body-frame gravity, rate and
    field, then noise. Draw order from ``rng`` is fixed: slip, dropout,
    contact squal, lift squal, gyro bias, gyro, accel, mag.
    """
    scales = scales or ScaleConfig()
    mag_ref = mag_reference or FilterConfig().mag_reference
    n = len(truth)
    if n == 0:
        return []
    if contact is None:
        contact = np.ones(n, dtype=bool)

    rot = quat_matrices(truth.quat)
    dp = np.diff(truth.pos_mm, axis=0)
    mid = quat_matrices(quat_midpoints(truth.quat)) if n > 1 else np.empty((0, 3, 3))
    if n > 1:
        off_plane = np.abs(np.einsum("ni,ni->n", dp, mid[:, :, 2]))
        tol = 1e-6 * np.maximum(1.0, np.linalg.norm(dp, axis=1))
        if np.any(off_plane > tol):
            k = int(np.argmax(off_plane - tol))
            raise ValueError(
                f"truth leaves the touch plane at step {k}: {off_plane[k]:.3g} mm off-plane"
            )
        counts = np.stack(
            [
                np.einsum("ni,ni->n", dp, mid[:, :, 0]),
                np.einsum("ni,ni->n", dp, mid[:, :, 1]),
            ],
            axis=1,
        ) / scales.mm_per_count
    else:
        counts = np.empty((0, 2))

    counts = counts + rng.normal(0.0, noise.slip_sigma_counts, counts.shape)
    drop = rng.random(len(counts)) < texture.dropout_prob
    counts[drop] = 0.0
    cum = np.cumsum(counts, axis=0)
    emitted = np.rint(cum)
    dxdy = np.diff(emitted, axis=0, prepend=np.zeros((1, 2))).astype(np.int64)
    dxdy = np.clip(dxdy, -32768, 32767)
    dxdy = np.concatenate([np.zeros((1, 2), dtype=np.int64), dxdy])

    squal_contact = np.rint(np.clip(rng.normal(texture.squal_mean, texture.squal_jitter, n), 50, 90))
    squal_lift = np.rint(rng.uniform(0.0, 3.0, n))
    squal = np.where(contact, squal_contact, squal_lift).astype(np.int64)

    gravity = np.array([0.0, 0.0, -1.0])
    mag_world = np.array(mag_ref.as_tuple())
    accel = np.einsum("nij,i->nj", rot, gravity)
    mag = np.einsum("nij,i->nj", rot, mag_world)

    gyro = np.zeros((n, 3))
    if n > 1:
        dt_s = np.diff(truth.t_ms) / 1000.0
        dt_s[dt_s <= 0] = 1.0 / 50.0
        gyro[1:] = quat_relative_rotvec(truth.quat) / dt_s[:, None] / _DEG

    bias = rng.normal(0.0, noise.gyro_bias_sigma_dps, 3)
    gyro = gyro + bias + rng.normal(0.0, noise.gyro_sigma_dps, (n, 3))
    accel = accel + rng.normal(0.0, noise.accel_sigma_g, (n, 3))
    mag = mag + rng.normal(0.0, noise.mag_sigma_gauss, (n, 3))

    accel_raw = np.clip(np.rint(accel / scales.accel_g_per_lsb), -32768, 32767).astype(int)
    gyro_raw = np.clip(np.rint(gyro / scales.gyro_dps_per_lsb), -32768, 32767).astype(int)
    mag_raw = np.clip(np.rint(mag / scales.mag_gauss_per_lsb), -32768, 32767).astype(int)

    frames = []
    t_ms = truth.t_ms
    for k in range(n):
        frames.append(
            SensorFrame(
                timestamp_ms=int(t_ms[k]),
                dx=int(dxdy[k, 0]),
                dy=int(dxdy[k, 1]),
                squal=int(squal[k]),
                accel_raw=tuple(accel_raw[k]),
                gyro_raw=tuple(gyro_raw[k]),
                mag_raw=tuple(mag_raw[k]),
            )
        )
    return frames


# -- trial and campaign plumbing -------------------------------------------


def trial_streams(seed: int) -> tuple[np.random.Generator, np.random.Generator]:
    """(trial-level, synthesis) generators; both fully determined by seed."""
    children = np.random.SeedSequence(seed).spawn(2)
    return np.random.default_rng(children[0]), np.random.default_rng(children[1])


def draw_tilt(seed: int) -> float:
    trial_rng, _ = trial_streams(seed)
    return float(trial_rng.uniform(0.0, 90.0))


def simulate_trial(
    spec: TrialSpec,
    noise: NoiseModel,
    scales: ScaleConfig | None = None,
) -> tuple[Trajectory, list[SensorFrame]]:
    """Ground truth plus the synthesized wire frames for one trial."""
    _, synth_rng = trial_streams(spec.seed)
    truth = gen_trajectory(spec)
    frames = synthesize_sensors(truth, TEXTURES[spec.texture], noise, synth_rng, scales)
    return truth, frames


def trial_seed(campaign_seed: int, index: int) -> int:
    return int(np.random.SeedSequence((campaign_seed, index)).generate_state(1, np.uint64)[0])


def campaign_specs(campaign_seed: int) -> list[TrialSpec]:
    """The full 3 x 4 x 6 x 5 grid with per-trial seeds and tilts."""
    specs = []
    index = 0
    for texture in TEXTURE_NAMES:
        for size in SIZES_MM:
            for shape in SHAPE_NAMES:
                for rep in range(1, REPS + 1):
                    seed = trial_seed(campaign_seed, index)
                    specs.append(
                        TrialSpec(
                            texture=texture,
                            size_mm=size,
                            shape=shape,
                            rep=rep,
                            tilt_deg=draw_tilt(seed),
                            seed=seed,
                        )
                    )
                    index += 1
    return specs


def trial_dirname(index: int, spec: TrialSpec) -> str:
    return f"trial_{index:03d}_{spec.texture}_{spec.size_mm}_{spec.shape}_r{spec.rep}"


def write_manifest(path, campaign_seed: int, noise_preset: str, specs: list[TrialSpec]) -> None:
    payload = {
        "campaign_seed": campaign_seed,
        "noise": noise_preset,
        "trials": [
            {
                "index": i,
                "texture": s.texture,
                "size_mm": s.size_mm,
                "shape": s.shape,
                "rep": s.rep,
                "tilt_deg": s.tilt_deg,
                "seed": s.seed,
                "rate_hz": s.rate_hz,
                "speed_mm_s": s.speed_mm_s,
                "dir": trial_dirname(i, s),
            }
            for i, s in enumerate(specs)
        ],
    }
    Path(path).write_text(json.dumps(payload, indent=2) + "\n", encoding="utf-8")


def read_manifest(path) -> tuple[int, str, list[TrialSpec], list[str]]:
    payload = json.loads(Path(path).read_text(encoding="utf-8"))
    specs = []
    dirs = []
    for entry in payload["trials"]:
        specs.append(
            TrialSpec(
                texture=entry["texture"],
                size_mm=entry["size_mm"],
                shape=entry["shape"],
                rep=entry["rep"],
                tilt_deg=entry["tilt_deg"],
                seed=entry["seed"],
                rate_hz=entry.get("rate_hz", 50.0),
                speed_mm_s=entry.get("speed_mm_s", 30.0),
            )
        )
        dirs.append(entry["dir"])
    return payload["campaign_seed"], payload["noise"], specs, dirs


# -- scripted gesture fixtures ----------------------------------------------

GESTURE_KINDS = ("tap", "doubletap", "press", "moving-tap-reject")


def _static_frame(t_ms: int, squal: int, dx: int = 0, dy: int = 0) -> SensorFrame:
    """Frame with level-device IMU channels so the filter stays happy."""
    scales = ScaleConfig()
    ref = FilterConfig().mag_reference
    mag_raw = tuple(int(round(c / scales.mag_gauss_per_lsb)) for c in ref.as_tuple())
    return SensorFrame(
        timestamp_ms=t_ms,
        dx=dx,
        dy=dy,
        squal=squal,
        accel_raw=(0, 0, -16384),
        gyro_raw=(0, 0, 0),
        mag_raw=mag_raw,
    )


def script_gesture_trace(kind: str, cfg: GestureConfig | None = None) -> list[SensorFrame]:
    """A frame sequence the gesture detector must classify as ``kind``.

    moving-tap-reject carries the tap squal signature but exceeds the
    movement limit, so it must produce contact events only.
    """
    cfg = cfg or GestureConfig()
    hi = min(cfg.tap_squal + 5, 169)
    frames: list[SensorFrame] = []

    def run(segments):
        t = 0
        for duration_ms, squal, dx in segments:
            for _ in range(duration_ms // 20):
                frames.append(_static_frame(t, squal, dx=dx))
                t += 20

    if kind == "tap":
        run([(40, 0, 0), (80, hi, 0), (cfg.doubletap_max_gap_ms + 200, 0, 0)])
    elif kind == "doubletap":
        gap = (cfg.doubletap_min_gap_ms + cfg.doubletap_max_gap_ms) // 2
        gap -= gap % 20
        tap_len = 80
        offset = min(cfg.doubletap_offset_counts - 5, 10)
        run(
            [
                (40, 0, 0),
                (tap_len, hi, 0),
                (20, 0, offset),  # slide a little while lifted
                (gap - tap_len - 20, 0, 0),
                (tap_len, hi, 0),
                (cfg.doubletap_max_gap_ms + 200, 0, 0),
            ]
        )
    elif kind == "press":
        hold = cfg.press_hold_ms + 100
        hold -= hold % 20
        run([(hold + 20, hi, 0), (100, 0, 0)])
    elif kind == "moving-tap-reject":
        over = cfg.tap_move_limit_counts * 4
        run(
            [
                (40, 0, 0),
                (40, hi, 0),
                (80, hi, over // 4),
                (cfg.doubletap_max_gap_ms + 200, 0, 0),
            ]
        )
    else:
        raise ValueError(f"unknown gesture kind {kind!r}; expected one of {GESTURE_KINDS}")
    return frames
