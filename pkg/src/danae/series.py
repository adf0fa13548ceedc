"""Core value types: IMU samples and time-aligned series of them or of angles.

Angle convention used package-wide: intrinsic Z-Y-X Euler angles
(roll phi about x, pitch theta about y, yaw psi about z), radians.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import InvalidInputError, ShapeError

ANGLE_NAMES = ("roll", "pitch", "yaw")


def wrap_angle(x):
    """Wrap an angle (scalar or array) to the half-open interval (-pi, pi]."""
    return np.pi - np.mod(np.pi - np.asarray(x, dtype=float), 2.0 * np.pi)


def angle_index(angle_id) -> int:
    """Resolve 'roll'/'pitch'/'yaw' (or an index 0..2) to a column index."""
    if isinstance(angle_id, str):
        try:
            return ANGLE_NAMES.index(angle_id)
        except ValueError:
            raise InvalidInputError(f"unknown angle id {angle_id!r}") from None
    i = int(angle_id)
    if i not in (0, 1, 2):
        raise InvalidInputError(f"angle index out of range: {angle_id!r}")
    return i


@dataclass(frozen=True)
class ImuSample:
    """One timestamped IMU reading: gyro in rad/s, accel in m/s^2, mag unitless."""

    t: float
    gyro: np.ndarray
    accel: np.ndarray
    mag: np.ndarray


@dataclass(frozen=True)
class EulerAngles:
    """One attitude as roll/pitch/yaw in radians."""

    roll: float
    pitch: float
    yaw: float

    def as_array(self) -> np.ndarray:
        return np.array([self.roll, self.pitch, self.yaw])

    def wrapped(self) -> "EulerAngles":
        r, p, y = wrap_angle(self.as_array())
        return EulerAngles(r, p, y)


def _as_matrix(name, values, cols):
    a = np.asarray(values, dtype=float)
    if a.ndim != 2 or a.shape[1] != cols:
        raise ShapeError(f"{name} must be (N, {cols}), got {a.shape}")
    return a


class ImuSeries:
    """A time-ordered IMU log held as (N,) / (N,3) arrays.

    Timestamps must be strictly increasing and the series must contain at
    least two samples.
    """

    def __init__(self, t, gyro, accel, mag, source: str = "synthetic"):
        self.t = np.asarray(t, dtype=float).reshape(-1)
        self.gyro = _as_matrix("gyro", gyro, 3)
        self.accel = _as_matrix("accel", accel, 3)
        self.mag = _as_matrix("mag", mag, 3)
        self.source = source
        n = len(self.t)
        if not (n == len(self.gyro) == len(self.accel) == len(self.mag)):
            raise ShapeError("imu channel lengths disagree")
        if n < 2:
            raise InvalidInputError("an IMU series needs at least 2 samples")
        bad = np.flatnonzero(np.diff(self.t) <= 0)
        if bad.size:
            raise InvalidInputError(
                f"timestamps must be strictly increasing (first violation at sample {bad[0] + 1})"
            )

    def __len__(self) -> int:
        return len(self.t)

    def __getitem__(self, key):
        if isinstance(key, slice):
            return ImuSeries(self.t[key], self.gyro[key], self.accel[key],
                             self.mag[key], self.source)
        return ImuSample(float(self.t[key]), self.gyro[key].copy(),
                         self.accel[key].copy(), self.mag[key].copy())

    def __iter__(self):
        return (self[i] for i in range(len(self)))

    @property
    def samples(self) -> list[ImuSample]:
        return list(self)

    @classmethod
    def from_samples(cls, samples, source: str = "synthetic") -> "ImuSeries":
        samples = list(samples)
        return cls(
            [s.t for s in samples],
            [s.gyro for s in samples],
            [s.accel for s in samples],
            [s.mag for s in samples],
            source,
        )


class AngleSeries:
    """Euler angles over time: t (N,) and angles (N, 3) = [roll, pitch, yaw]."""

    def __init__(self, t, angles, meta: dict | None = None):
        self.t = np.asarray(t, dtype=float).reshape(-1)
        self.angles = _as_matrix("angles", angles, 3)
        if len(self.t) != len(self.angles):
            raise ShapeError("t and angles lengths disagree")
        if not np.all(np.isfinite(self.angles)):
            raise InvalidInputError("angle series contains non-finite values")
        self.meta = dict(meta) if meta else {}

    def __len__(self) -> int:
        return len(self.t)

    def __getitem__(self, key):
        if isinstance(key, slice):
            return AngleSeries(self.t[key], self.angles[key], self.meta)
        r, p, y = self.angles[key]
        return EulerAngles(float(r), float(p), float(y))

    def angle(self, angle_id) -> np.ndarray:
        """The 1-D track of one angle, selected by name or index."""
        return self.angles[:, angle_index(angle_id)]

    @property
    def roll(self) -> np.ndarray:
        return self.angles[:, 0]

    @property
    def pitch(self) -> np.ndarray:
        return self.angles[:, 1]

    @property
    def yaw(self) -> np.ndarray:
        return self.angles[:, 2]

    def with_angle(self, angle_id, values) -> "AngleSeries":
        """A copy of the series with one angle track replaced."""
        values = np.asarray(values, dtype=float).reshape(-1)
        if len(values) != len(self):
            raise ShapeError("replacement track length disagrees with series")
        angles = self.angles.copy()
        angles[:, angle_index(angle_id)] = values
        return AngleSeries(self.t, angles, self.meta)
