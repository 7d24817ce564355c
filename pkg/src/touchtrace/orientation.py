"""Quaternion EKF fusing gyro, accelerometer and magnetometer.

Error-state formulation with a minimal 6-state covariance:
3 attitude-error components (body frame, radians) and 3 gyro-bias
components (rad/s). The quaternion itself is kept outside the error
state and corrected multiplicatively, so it stays unit by construction.

Measurement model: both vector updates compare the body-frame
observation against the rotated world reference,

    accel ~ R(q)^T * (0, 0, -1) g        gravity direction
    mag   ~ R(q)^T * mag_reference       fixed world field

with Jacobian [h]x w.r.t. the body attitude error. The innovation
covariance is inverted in closed form (it is only 3x3) and the
covariance is re-symmetrized once per predict, which keeps it positive
semi-definite to well below test tolerances.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from .geom import GRAVITY_WORLD, IDENTITY_QUAT, UnitQuat, Vec3, integrate_gyro, quat_from_matrix, rotate_vector
from .protocol import CalibratedSample

_DEG = math.pi / 180.0

MAX_DT_S = 0.1


@dataclass(frozen=True)
class FilterConfig:
    """Noise tuning, all strictly positive.

    The defaults are calibrated for the synthetic sensor model shipped in
    :mod:`touchtrace.simulate`: measurement trust is deliberately weak so
    short traces ride the gyro, which is what gives the evaluation
    campaign its drift-with-duration error profile.
    """

    gyro_noise_density: float = 0.03  # deg/s/sqrt(Hz)
    bias_random_walk: float = 0.003  # deg/s per sqrt(s)
    accel_noise: float = 0.45  # g, per-axis measurement sigma
    mag_noise: float = 0.18  # gauss, per-axis measurement sigma
    mag_reference: Vec3 = Vec3(0.2, 0.0, -0.4)  # gauss, world frame
    accel_gate: float = 0.3  # g; reject when | |a| - 1g | exceeds this
    init_attitude_sigma_deg: float = 30.0
    init_bias_sigma_dps: float = 0.5

    def __post_init__(self) -> None:
        for name in (
            "gyro_noise_density",
            "bias_random_walk",
            "accel_noise",
            "mag_noise",
            "accel_gate",
            "init_attitude_sigma_deg",
            "init_bias_sigma_dps",
        ):
            if getattr(self, name) <= 0:
                raise ValueError(f"{name} must be > 0")


@dataclass(frozen=True, eq=False)
class FilterState:
    q: UnitQuat
    gyro_bias_dps: Vec3
    covariance: np.ndarray  # 6x6; attitude rad^2, bias (rad/s)^2


@dataclass(frozen=True)
class OrientationEstimate:
    timestamp_ms: int
    q: UnitQuat
    gyro_bias_dps: Vec3
    covariance: np.ndarray


@dataclass
class FilterDiagnostics:
    clamped_dt: int = 0
    gated_accel: int = 0


def _init_covariance(cfg: FilterConfig) -> np.ndarray:
    p = np.zeros((6, 6))
    p[:3, :3] = np.eye(3) * (cfg.init_attitude_sigma_deg * _DEG) ** 2
    p[3:, 3:] = np.eye(3) * (cfg.init_bias_sigma_dps * _DEG) ** 2
    return p


def triad_orientation(accel_g: Vec3, mag_gauss: Vec3, mag_reference: Vec3) -> UnitQuat:
    """Closed-form attitude from one accel + mag pair (TRIAD construction).

    Returns the quaternion mapping body to world such that the rotated
    body observations line up with gravity and the magnetic reference.
    Raises ValueError for degenerate (near-zero or parallel) inputs.
    """
    w1 = GRAVITY_WORLD.normalized()
    b1 = accel_g.normalized()
    w2 = GRAVITY_WORLD.cross(mag_reference)
    b2 = accel_g.cross(mag_gauss)
    if w2.norm() < 1e-9 or b2.norm() < 1e-9:
        raise ValueError("triad construction degenerate: field parallel to gravity")
    w2 = w2.normalized()
    b2 = b2.normalized()
    w3 = w1.cross(w2)
    b3 = b1.cross(b2)
    # R = W B^T with W, B holding the triads as columns
    rot = [
        [
            w1.as_tuple()[r] * b1.as_tuple()[c]
            + w2.as_tuple()[r] * b2.as_tuple()[c]
            + w3.as_tuple()[r] * b3.as_tuple()[c]
            for c in range(3)
        ]
        for r in range(3)
    ]
    return quat_from_matrix(rot)


def initial_state(
    cfg: FilterConfig,
    accel_g: Vec3 | None = None,
    mag_gauss: Vec3 | None = None,
) -> FilterState:
    """Initial state from the first accel+mag pair; identity as fallback."""
    q = IDENTITY_QUAT
    if accel_g is not None and mag_gauss is not None:
        try:
            q = triad_orientation(accel_g, mag_gauss, cfg.mag_reference)
        except ValueError:
            q = IDENTITY_QUAT
    return FilterState(q=q, gyro_bias_dps=Vec3(0.0, 0.0, 0.0), covariance=_init_covariance(cfg))


_EYE3 = np.eye(3)
_Q_CACHE: dict[tuple[float, float, float], np.ndarray] = {}


def _process_noise(cfg: FilterConfig, dt: float) -> np.ndarray:
    """Discrete process noise; cached because dt is almost always 20 ms."""
    key = (cfg.gyro_noise_density, cfg.bias_random_walk, dt)
    q = _Q_CACHE.get(key)
    if q is None:
        q = np.zeros((6, 6))
        q[0, 0] = q[1, 1] = q[2, 2] = (cfg.gyro_noise_density * _DEG) ** 2 * dt
        q[3, 3] = q[4, 4] = q[5, 5] = (cfg.bias_random_walk * _DEG) ** 2 * dt
        _Q_CACHE[key] = q
    return q


def predict(state: FilterState, cfg: FilterConfig, gyro_dps: Vec3, dt_s: float) -> FilterState:
    """Propagate by bias-corrected gyro over dt; covariance grows.

    dt above MAX_DT_S is clamped (the streaming wrapper counts those).
    """
    if dt_s <= 0.0:
        raise ValueError(f"predict requires dt > 0, got {dt_s}")
    dt = min(dt_s, MAX_DT_S)
    omega = gyro_dps - state.gyro_bias_dps
    q = integrate_gyro(state.q, omega, dt)

    # error transition: dtheta' = Phi dtheta - dt * dbias
    rx, ry, rz = omega.x * _DEG * dt, omega.y * _DEG * dt, omega.z * _DEG * dt
    f = np.zeros((6, 6))
    f[:3, :3] = _rotvec_matrix_t(rx, ry, rz)
    f[3, 3] = f[4, 4] = f[5, 5] = 1.0
    f[0, 3] = f[1, 4] = f[2, 5] = -dt

    p = f @ state.covariance @ f.T + _process_noise(cfg, dt)
    p = 0.5 * (p + p.T)
    return FilterState(q=q, gyro_bias_dps=state.gyro_bias_dps, covariance=p)


def _rotvec_matrix_t(rx: float, ry: float, rz: float) -> np.ndarray:
    """Transpose of the rotation matrix of the rotation vector (rx, ry, rz)."""
    angle = math.sqrt(rx * rx + ry * ry + rz * rz)
    sk = np.array(((0.0, -rz, ry), (rz, 0.0, -rx), (-ry, rx, 0.0)))
    if angle < 1e-3:
        # first order is exact to ~angle^2/2, far below the tuning noise
        return _EYE3 - sk
    a = math.sin(angle) / angle
    b = (1.0 - math.cos(angle)) / (angle * angle)
    return (_EYE3 + a * sk + b * (sk @ sk)).T


def _vector_update(
    state: FilterState, z: Vec3, reference: Vec3, sigma: float
) -> FilterState:
    q_conj = state.q.conjugate()
    h = rotate_vector(q_conj, reference)  # predicted body-frame observation

    hx = np.array(((0.0, -h.z, h.y), (h.z, 0.0, -h.x), (-h.y, h.x, 0.0)))
    p = state.covariance
    pht = p[:, :3] @ hx.T  # P H^T, 6x3
    s = hx @ pht[:3, :]  # H P H^T; add R on the diagonal below
    r = sigma * sigma
    (s00, s01, s02), (_, s11, s12), (_, _, s22) = s.tolist()
    s00 += r
    s11 += r
    s22 += r
    # closed-form inverse of the symmetric innovation covariance
    c00 = s11 * s22 - s12 * s12
    c01 = s02 * s12 - s01 * s22
    c02 = s01 * s12 - s02 * s11
    det = s00 * c00 + s01 * c01 + s02 * c02
    c11 = s00 * s22 - s02 * s02
    c12 = s01 * s02 - s00 * s12
    c22 = s00 * s11 - s01 * s01
    inv_det = 1.0 / det
    s_inv = np.array(
        (
            (c00 * inv_det, c01 * inv_det, c02 * inv_det),
            (c01 * inv_det, c11 * inv_det, c12 * inv_det),
            (c02 * inv_det, c12 * inv_det, c22 * inv_det),
        )
    )
    k = pht @ s_inv  # 6x3 Kalman gain
    delta = k @ np.array((z.x - h.x, z.y - h.y, z.z - h.z))

    d0, d1, d2, d3, d4, d5 = delta.tolist()
    dq = UnitQuat(1.0, 0.5 * d0, 0.5 * d1, 0.5 * d2).normalized()
    q_new = state.q.multiply(dq)
    bias_new = state.gyro_bias_dps + Vec3(d3 / _DEG, d4 / _DEG, d5 / _DEG)

    # (I - K H) P via H P = (P H^T)^T; the residual asymmetry is float
    # noise at ~1e-18 and predict re-symmetrizes once per sample
    p_new = p - k @ pht.T
    return FilterState(q=q_new, gyro_bias_dps=bias_new, covariance=p_new)


def update_accel(state: FilterState, cfg: FilterConfig, accel_g: Vec3) -> tuple[FilterState, bool]:
    """Gravity-direction update. Returns (state, accepted).

    Measurements whose magnitude strays from 1 g by more than the gate
    are skipped and the state is returned unchanged.
    """
    if abs(accel_g.norm() - 1.0) > cfg.accel_gate:
        return state, False
    return _vector_update(state, accel_g, GRAVITY_WORLD, cfg.accel_noise), True


def update_mag(state: FilterState, cfg: FilterConfig, mag_gauss: Vec3) -> tuple[FilterState, bool]:
    """World-field update against the configured magnetic reference."""
    if mag_gauss.norm() < 1e-9:
        return state, False
    return _vector_update(state, mag_gauss, cfg.mag_reference, cfg.mag_noise), True


class OrientationFilter:
    """Streaming wrapper: one instance per sensor stream.

    Initializes from the first sample's accel+mag pair (TRIAD), then runs
    predict + accel update + mag update per sample, emitting an estimate
    synchronized to the frame timestamp.
    """

    def __init__(self, config: FilterConfig | None = None):
        self.config = config or FilterConfig()
        self.state: FilterState | None = None
        self.diagnostics = FilterDiagnostics()
        self._last_t_ms: int | None = None

    def process(self, sample: CalibratedSample) -> OrientationEstimate:
        t = sample.timestamp_ms
        if self._last_t_ms is not None and t < self._last_t_ms:
            raise ValueError(
                f"out-of-order timestamp: {t} ms arrived after {self._last_t_ms} ms"
            )
        if self.state is None:
            self.state = initial_state(self.config, sample.accel_g, sample.mag_gauss)
        else:
            dt = (t - self._last_t_ms) / 1000.0
            if dt > 0.0:
                if dt > MAX_DT_S:
                    self.diagnostics.clamped_dt += 1
                self.state = predict(self.state, self.config, sample.gyro_dps, dt)
            self.state, accepted = update_accel(self.state, self.config, sample.accel_g)
            if not accepted:
                self.diagnostics.gated_accel += 1
            self.state, _ = update_mag(self.state, self.config, sample.mag_gauss)
        self._last_t_ms = t
        return OrientationEstimate(
            timestamp_ms=t,
            q=self.state.q,
            gyro_bias_dps=self.state.gyro_bias_dps,
            covariance=self.state.covariance,
        )


def save_filter_config(cfg: FilterConfig, path) -> None:
    lines = [
        f"gyro_noise_density={cfg.gyro_noise_density!r}",
        f"bias_random_walk={cfg.bias_random_walk!r}",
        f"accel_noise={cfg.accel_noise!r}",
        f"mag_noise={cfg.mag_noise!r}",
        f"mag_reference={cfg.mag_reference.x!r},{cfg.mag_reference.y!r},{cfg.mag_reference.z!r}",
        f"accel_gate={cfg.accel_gate!r}",
        f"init_attitude_sigma_deg={cfg.init_attitude_sigma_deg!r}",
        f"init_bias_sigma_dps={cfg.init_bias_sigma_dps!r}",
    ]
    Path(path).write_text("\n".join(lines) + "\n", encoding="utf-8")


def load_filter_config(path) -> FilterConfig:
    """Flat key=value file; keys are exactly the FilterConfig field names."""
    values: dict[str, object] = {}
    for lineno, raw in enumerate(Path(path).read_text(encoding="utf-8").splitlines(), 1):
        line = raw.strip()
        if not line or line.startswith("#"):
            continue
        if "=" not in line:
            raise ValueError(f"{path}:{lineno}: expected key=value, got {line!r}")
        key, _, value = line.partition("=")
        key = key.strip()
        value = value.strip()
        if key == "mag_reference":
            parts = [float(p) for p in value.split(",")]
            if len(parts) != 3:
                raise ValueError(f"{path}:{lineno}: mag_reference needs 3 components")
            values[key] = Vec3(*parts)
        else:
            values[key] = float(value)
    unknown = set(values) - set(FilterConfig.__dataclass_fields__)
    if unknown:
        raise ValueError(f"{path}: unknown filter config keys: {sorted(unknown)}")
    return FilterConfig(**values)  # type: ignore[arg-type]
