"""Dataset loaders, the synthetic IMU generator, window building and splits.

CSV schemas (documented; loaders validate and fail loudly):

* OxIOD-style IMU file, 16 columns, header optional:
    time, attitude_roll, attitude_pitch, attitude_yaw,
    rotation_rate_x/y/z [rad/s], gravity_x/y/z [g], user_acc_x/y/z [g],
    magnetic_x/y/z [uT]
  Specific force is (gravity + user_acc) * 9.80665 in the reaction
  convention (a level, static sensor reads gravity ~ (0, 0, +1)).
* OxIOD-style ground-truth (vicon) file, 8 columns, header optional:
    time, translation_x/y/z [m], rotation_w/x/y/z (unit quaternion)
* UCS-style file, 13 columns, header optional:
    time, gyro_x/y/z [rad/s], accel_x/y/z [m/s^2], mag_x/y/z,
    orientation_roll/pitch/yaw [rad]
  The orientation columns are the onboard AHRS output and double as the
  ground truth; its yaw is flagged unreliable in the returned metadata.
* Canonical angle-series file: t, roll, pitch, yaw (radians, 17
  significant digits).
* Canonical IMU file (synthetic output): t, gyro_x/y/z, accel_x/y/z,
  mag_x/y/z.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, replace
from pathlib import Path

import numpy as np

from .errors import ConfigError, DataError, InvalidInputError, ShapeError
from .series import ANGLE_NAMES, AngleSeries, EulerAngles, ImuSeries, angle_index, wrap_angle

__all__ = [
    "ImuSeries",
    "AngleSeries",
    "WindowSet",
    "SynthConfig",
    "FractionSplit",
    "SessionHoldout",
    "quat_to_euler",
    "euler_to_quat",
    "load_oxiod",
    "load_ucs",
    "synth_trajectory",
    "make_windows",
    "split",
    "read_table",
    "read_angle_csv",
    "write_angle_csv",
    "read_imu_csv",
    "write_imu_csv",
    "read_config_file",
]

STANDARD_GRAVITY = 9.80665

# Fixed world magnetic field: unit vector pointing north with a 52 deg
# downward dip, a mid-latitude value.
WORLD_MAG_FIELD = np.array([math.cos(math.radians(52.0)), 0.0, math.sin(math.radians(52.0))])

OXIOD_IMU_COLUMNS = 16
OXIOD_VICON_COLUMNS = 8
UCS_COLUMNS = 13


# ---------------------------------------------------------------------------
# quaternion <-> Euler

def quat_to_euler(q) -> EulerAngles:
    """Euler angles (intrinsic Z-Y-X) of a unit quaternion (w, x, y, z)."""
    q = np.asarray(q, dtype=float).reshape(4)
    norm = np.linalg.norm(q)
    if norm < 1e-12:
        raise InvalidInputError("zero quaternion has no orientation")
    if abs(norm - 1.0) > 1e-6:
        q = q / norm
    w, x, y, z = q
    roll = math.atan2(2.0 * (w * x + y * z), 1.0 - 2.0 * (x * x + y * y))
    s = 2.0 * (w * y - z * x)
    pitch = math.asin(max(-1.0, min(1.0, s)))
    yaw = math.atan2(2.0 * (w * z + x * y), 1.0 - 2.0 * (y * y + z * z))
    return EulerAngles(float(wrap_angle(roll)), pitch, float(wrap_angle(yaw)))


def euler_to_quat(angles: EulerAngles) -> np.ndarray:
    """Unit quaternion (w, x, y, z) composed as qz(yaw) * qy(pitch) * qx(roll)."""
    hr, hp, hy = angles.roll / 2.0, angles.pitch / 2.0, angles.yaw / 2.0
    cr, sr = math.cos(hr), math.sin(hr)
    cp, sp = math.cos(hp), math.sin(hp)
    cy, sy = math.cos(hy), math.sin(hy)
    return np.array([
        cy * cp * cr + sy * sp * sr,
        cy * cp * sr - sy * sp * cr,
        cy * sp * cr + sy * cp * sr,
        sy * cp * cr - cy * sp * sr,
    ])


# ---------------------------------------------------------------------------
# CSV plumbing

def _format_row(values) -> str:
    return ",".join(f"{v:.17g}" for v in values)


def read_table(path, expected_columns: int | None = None) -> np.ndarray:
    """Read a numeric CSV (header row optional) into a 2-D float array."""
    path = Path(path)
    rows = []
    with open(path, "r", encoding="utf-8") as fh:
        lines = fh.readlines()
    start = 0
    if lines:
        first = lines[0].strip()
        if first:
            try:
                [float(c) for c in first.split(",")]
            except ValueError:
                start = 1  # header row
    for lineno, line in enumerate(lines[start:], start=start + 1):
        text = line.strip()
        if not text:
            continue
        cells = text.split(",")
        if expected_columns is not None and len(cells) != expected_columns:
            raise DataError(
                f"{path}:{lineno}: expected {expected_columns} columns, got {len(cells)}"
            )
        try:
            rows.append([float(c) for c in cells])
        except ValueError as err:
            raise DataError(f"{path}:{lineno}: {err}") from None
    if not rows:
        raise DataError(f"{path}: no data rows")
    widths = {len(r) for r in rows}
    if len(widths) != 1:
        raise DataError(f"{path}: ragged rows with widths {sorted(widths)}")
    return np.array(rows)


def _check_monotonic(path, t):
    bad = np.flatnonzero(np.diff(t) <= 0)
    if bad.size:
        raise DataError(
            f"{path}: timestamps not strictly increasing at data row {bad[0] + 2}"
        )


def write_angle_csv(path, series: AngleSeries) -> None:
    with open(path, "w", encoding="utf-8") as fh:
        fh.write("t,roll,pitch,yaw\n")
        for i in range(len(series)):
            fh.write(_format_row([series.t[i], *series.angles[i]]) + "\n")


def read_angle_csv(path) -> AngleSeries:
    data = read_table(path, expected_columns=4)
    _check_monotonic(path, data[:, 0])
    return AngleSeries(data[:, 0], data[:, 1:4])


def write_imu_csv(path, series: ImuSeries) -> None:
    with open(path, "w", encoding="utf-8") as fh:
        fh.write("t,gyro_x,gyro_y,gyro_z,accel_x,accel_y,accel_z,mag_x,mag_y,mag_z\n")
        for i in range(len(series)):
            fh.write(_format_row([series.t[i], *series.gyro[i],
                                  *series.accel[i], *series.mag[i]]) + "\n")


def read_imu_csv(path) -> ImuSeries:
    data = read_table(path, expected_columns=10)
    _check_monotonic(path, data[:, 0])
    return ImuSeries(data[:, 0], data[:, 1:4], data[:, 4:7], data[:, 7:10],
                     source="synthetic")


def _normalized_rows(m):
    norms = np.linalg.norm(m, axis=1, keepdims=True)
    safe = np.where(norms > 0, norms, 1.0)
    return m / safe


def _nearest_indices(src_t, dst_t):
    """For each dst time, the index of the nearest src time."""
    pos = np.searchsorted(src_t, dst_t)
    pos = np.clip(pos, 1, len(src_t) - 1)
    left = src_t[pos - 1]
    right = src_t[pos]
    choose_left = (dst_t - left) <= (right - dst_t)
    return np.where(choose_left, pos - 1, pos)


# ---------------------------------------------------------------------------
# dataset loaders

def load_oxiod(imu_path, vicon_path) -> tuple[ImuSeries, AngleSeries]:
    """Load an OxIOD-style IMU/vicon file pair.

    Ground-truth quaternions are converted to Euler angles and resampled to
    the IMU timestamps by nearest neighbor.
    """
    imu = read_table(imu_path, expected_columns=OXIOD_IMU_COLUMNS)
    _check_monotonic(imu_path, imu[:, 0])
    vicon = read_table(vicon_path, expected_columns=OXIOD_VICON_COLUMNS)
    _check_monotonic(vicon_path, vicon[:, 0])

    t = imu[:, 0]
    gyro = imu[:, 4:7]
    accel = (imu[:, 7:10] + imu[:, 10:13]) * STANDARD_GRAVITY
    mag = _normalized_rows(imu[:, 13:16])
    series = ImuSeries(t, gyro, accel, mag, source="oxiod")

    quats = vicon[:, 4:8]
    gt = np.empty((len(vicon), 3))
    for i, q in enumerate(quats):
        try:
            e = quat_to_euler(q)
        except InvalidInputError as err:
            raise DataError(f"{vicon_path}: data row {i + 1}: {err}") from None
        gt[i] = (e.roll, e.pitch, e.yaw)
    idx = _nearest_indices(vicon[:, 0], t)
    truth = AngleSeries(t, gt[idx], {"source": "oxiod"})
    return series, truth


def load_ucs(path) -> tuple[ImuSeries, AngleSeries]:
    """Load a UCS-style file; the AHRS orientation columns serve as ground truth."""
    data = read_table(path, expected_columns=UCS_COLUMNS)
    _check_monotonic(path, data[:, 0])
    t = data[:, 0]
    series = ImuSeries(t, data[:, 1:4], data[:, 4:7],
                       _normalized_rows(data[:, 7:10]), source="ucs")
    truth = AngleSeries(t, data[:, 10:13],
                        {"source": "ucs", "yaw_reliable": False})
    return series, truth


# ---------------------------------------------------------------------------
# synthetic trajectories

@dataclass(frozen=True)
class SynthConfig:
    """Synthetic-scenario knobs: sinusoidal attitude plus sensor noise.

    Defaults describe the standard desk-scale benchmark trajectory: two
    minutes at 100 Hz with moderate sensor noise and a constant gyro bias.
    """

    duration: float = 120.0
    rate: float = 100.0
    roll_amp: float = 0.5
    roll_freq: float = 0.10
    pitch_amp: float = 0.35
    pitch_freq: float = 0.17
    yaw_amp: float = 0.8
    yaw_freq: float = 0.05
    gyro_noise: float = 0.02
    gyro_bias: float = 0.01
    accel_noise: float = 0.5
    mag_noise: float = 0.05
    seed: int = 42

    def validate(self) -> None:
        if not self.duration > 0:
            raise ConfigError("duration must be positive")
        if not self.rate > 0:
            raise ConfigError("rate must be positive")
        for name in ("gyro_noise", "accel_noise", "mag_noise"):
            if getattr(self, name) < 0:
                raise ConfigError(f"{name} must be non-negative")
        # keep pitch well clear of +-pi/2 so the rate kinematics stay regular
        if abs(self.pitch_amp) >= 1.2:
            raise ConfigError("pitch amplitude must stay below 1.2 rad")


# phase offsets keep the three sinusoids out of lockstep
_SYNTH_PHASES = np.array([0.0, 1.0, 2.0])


def _body_rate_matrix(roll, pitch):
    """Inverse Euler-rate kinematics: maps Euler-angle rates to body rates."""
    sr, cr = math.sin(roll), math.cos(roll)
    sp, cp = math.sin(pitch), math.cos(pitch)
    return np.array([
        [1.0, 0.0, -sp],
        [0.0, cr, sr * cp],
        [0.0, -sr, cr * cp],
    ])


def _world_to_body(angles):
    """Rows of R^T for a batch of (N, 3) Euler angles (vectorized)."""
    sr, cr = np.sin(angles[:, 0]), np.cos(angles[:, 0])
    sp, cp = np.sin(angles[:, 1]), np.cos(angles[:, 1])
    sy, cy = np.sin(angles[:, 2]), np.cos(angles[:, 2])
    # body->world, row-major entries of R = Rz(yaw) Ry(pitch) Rx(roll)
    R = np.empty((len(angles), 3, 3))
    R[:, 0, 0] = cy * cp
    R[:, 0, 1] = cy * sp * sr - sy * cr
    R[:, 0, 2] = cy * sp * cr + sy * sr
    R[:, 1, 0] = sy * cp
    R[:, 1, 1] = sy * sp * sr + cy * cr
    R[:, 1, 2] = sy * sp * cr - cy * sr
    R[:, 2, 0] = -sp
    R[:, 2, 1] = cp * sr
    R[:, 2, 2] = cp * cr
    return np.transpose(R, (0, 2, 1))


def synth_trajectory(cfg: SynthConfig) -> tuple[ImuSeries, AngleSeries]:
    """Generate an IMU series with exact sinusoidal attitude ground truth.

    The noiseless gyro is the exact discrete inverse of the filter's rate
    kinematics: integrating it with gyro_delta reproduces the ground truth
    to machine precision. Accelerometer samples are the gravity reaction
    rotated into the body frame (zero linear acceleration by construction)
    and magnetometer samples are a fixed dipping world field, both plus
    white noise; the gyro additionally carries a constant bias on each axis.
    """
    cfg.validate()
    n = int(round(cfg.duration * cfg.rate))
    if n < 2:
        raise ConfigError("duration * rate must give at least 2 samples")
    t = np.arange(n) / cfg.rate
    amps = np.array([cfg.roll_amp, cfg.pitch_amp, cfg.yaw_amp])
    freqs = np.array([cfg.roll_freq, cfg.pitch_freq, cfg.yaw_freq])
    angles = amps * np.sin(2.0 * np.pi * freqs * t[:, None] + _SYNTH_PHASES)

    gyro = np.zeros((n, 3))
    rates0 = amps * 2.0 * np.pi * freqs * np.cos(_SYNTH_PHASES)
    gyro[0] = _body_rate_matrix(angles[0, 0], angles[0, 1]) @ rates0
    dt = np.diff(t)[:, None]
    euler_rates = (angles[1:] - angles[:-1]) / dt
    for i in range(1, n):
        gyro[i] = _body_rate_matrix(angles[i - 1, 0], angles[i - 1, 1]) @ euler_rates[i - 1]

    Rt = _world_to_body(angles)
    accel = Rt @ np.array([0.0, 0.0, STANDARD_GRAVITY])
    mag = Rt @ WORLD_MAG_FIELD

    # the draw order is fixed so one seed pins the whole scenario
    rng = np.random.default_rng(cfg.seed)
    gyro = gyro + cfg.gyro_bias + rng.normal(0.0, cfg.gyro_noise, (n, 3))
    accel = accel + rng.normal(0.0, cfg.accel_noise, (n, 3))
    mag = mag + rng.normal(0.0, cfg.mag_noise, (n, 3))

    series = ImuSeries(t, gyro, accel, mag, source="synthetic")
    truth = AngleSeries(t, angles, {"source": "synthetic", "seed": cfg.seed})
    return series, truth


# ---------------------------------------------------------------------------
# windows and splits

@dataclass
class WindowSet:
    """Aligned (estimate, truth) training windows for one angle."""

    inputs: np.ndarray   # (M, window_length)
    targets: np.ndarray  # (M, window_length)
    angle_id: str

    def __post_init__(self):
        self.inputs = np.asarray(self.inputs, dtype=float)
        self.targets = np.asarray(self.targets, dtype=float)
        if self.inputs.shape != self.targets.shape:
            raise ShapeError("inputs and targets must have identical shapes")

    def __len__(self) -> int:
        return len(self.inputs)

    @property
    def window_length(self) -> int:
        return self.inputs.shape[1]


def _sliding(track: np.ndarray, length: int, stride: int) -> np.ndarray:
    count = (len(track) - length) // stride + 1
    starts = np.arange(count) * stride
    return track[starts[:, None] + np.arange(length)]


def make_windows(estimates: AngleSeries, truth: AngleSeries, angle_id,
                 stride: int = 1, window_length: int = 20) -> WindowSet:
    """Cut one angle track into aligned fixed-length windows."""
    if len(estimates) != len(truth):
        raise ShapeError("estimate and truth series lengths disagree")
    if len(estimates) < window_length:
        raise InvalidInputError(
            f"need at least {window_length} samples, got {len(estimates)}"
        )
    if stride < 1:
        raise InvalidInputError("stride must be >= 1")
    name = ANGLE_NAMES[angle_index(angle_id)]
    return WindowSet(
        _sliding(estimates.angle(angle_id), window_length, stride),
        _sliding(truth.angle(angle_id), window_length, stride),
        name,
    )


@dataclass(frozen=True)
class FractionSplit:
    """Temporal head/tail split at floor(fraction * N)."""

    fraction: float = 0.8


@dataclass(frozen=True)
class SessionHoldout:
    """Hold one session out of a list of sessions as the test set."""

    test_session: int = 0


def split(dataset, policy):
    """Partition a dataset into (train, test) without reordering anything.

    FractionSplit slices any sequence-like dataset at floor(fraction * N).
    SessionHoldout takes a list of sessions and returns (others, [held-out]).
    """
    if isinstance(policy, FractionSplit):
        if not 0.0 < policy.fraction < 1.0:
            raise InvalidInputError("fraction must be in (0, 1)")
        cut = int(math.floor(policy.fraction * len(dataset)))
        return dataset[:cut], dataset[cut:]
    if isinstance(policy, SessionHoldout):
        sessions = list(dataset)
        if len(sessions) < 2:
            raise InvalidInputError("session holdout needs at least 2 sessions")
        k = policy.test_session
        if not 0 <= k < len(sessions):
            raise InvalidInputError(f"no session {k} in a list of {len(sessions)}")
        return sessions[:k] + sessions[k + 1:], [sessions[k]]
    raise ConfigError(f"unknown split policy: {policy!r}")


# ---------------------------------------------------------------------------
# key=value config files

def read_config_file(path) -> dict[str, str]:
    """Parse a plain key=value file; '#' starts a comment, blank lines ignored."""
    out: dict[str, str] = {}
    with open(path, "r", encoding="utf-8") as fh:
        for lineno, line in enumerate(fh, start=1):
            text = line.split("#", 1)[0].strip()
            if not text:
                continue
            if "=" not in text:
                raise ConfigError(f"{path}:{lineno}: expected key=value, got {text!r}")
            key, value = text.split("=", 1)
            out[key.strip()] = value.strip()
    return out


def synth_config_from_mapping(mapping, base: SynthConfig | None = None) -> SynthConfig:
    """Build a SynthConfig from string key=value pairs, over a base config."""
    base = base or SynthConfig()
    fields = {f: type(getattr(base, f)) for f in base.__dataclass_fields__}
    updates = {}
    for key, value in mapping.items():
        if key not in fields:
            raise ConfigError(f"unknown synth config key {key!r}")
        updates[key] = fields[key](value)
    return replace(base, **updates)
