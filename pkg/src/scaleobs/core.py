"""Shared domain types, rotation math and the gravity model.

World frame is z-up; gravity defaults to ``(0, 0, -9.81)`` m/s^2. Rotations are
stored as 3x3 matrices mapping body (IMU) coordinates to world coordinates.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np
from numpy.typing import ArrayLike, NDArray

ORTHO_TOL = 1e-9
DEFAULT_GRAVITY = (0.0, 0.0, -9.81)


def as_vec3(v: ArrayLike, name: str = "vector") -> NDArray[np.float64]:
    """Return ``v`` as a read-only finite float array of shape (3,)."""
    arr = np.array(v, dtype=float).reshape(-1)
    if arr.shape != (3,):
        raise ValueError(f"{name} must have 3 components, got shape {arr.shape}")
    if not np.all(np.isfinite(arr)):
        raise ValueError(f"{name} must be finite, got {arr}")
    arr.setflags(write=False)
    return arr


def check_rotation(R: ArrayLike, tol: float = ORTHO_TOL) -> NDArray[np.float64]:
    """Validate a rotation matrix (orthonormal, det +1) and return it read-only."""
    R = np.array(R, dtype=float)
    if R.shape != (3, 3):
        raise ValueError(f"rotation must be 3x3, got shape {R.shape}")
    if not np.all(np.isfinite(R)):
        raise ValueError("rotation must be finite")
    if np.max(np.abs(R.T @ R - np.eye(3))) > tol:
        raise ValueError("rotation is not orthonormal")
    if abs(np.linalg.det(R) - 1.0) > tol:
        raise ValueError("rotation determinant is not +1")
    R.setflags(write=False)
    return R


def skew(v: ArrayLike) -> NDArray[np.float64]:
    """Skew-symmetric matrix ``[v]x`` such that ``skew(v) @ w == cross(v, w)``."""
    x, y, z = np.asarray(v, dtype=float).reshape(3)
    return np.array([[0.0, -z, y], [z, 0.0, -x], [-y, x, 0.0]])


def so3_exp(axis_angle: ArrayLike) -> NDArray[np.float64]:
    """Rodrigues exponential map from an axis-angle vector to a rotation matrix."""
    theta = np.asarray(axis_angle, dtype=float).reshape(3)
    angle = float(np.linalg.norm(theta))
    K = skew(theta)
    if angle < 1e-8:
        # second-order Taylor expansion; the closed form loses precision here
        return np.eye(3) + K + 0.5 * (K @ K)
    a = np.sin(angle) / angle
    b = (1.0 - np.cos(angle)) / angle**2
    return np.eye(3) + a * K + b * (K @ K)


def so3_log(R: ArrayLike) -> NDArray[np.float64]:
    """Inverse of :func:`so3_exp` for rotation angles below pi."""
    R = np.asarray(R, dtype=float)
    cos_angle = np.clip(0.5 * (np.trace(R) - 1.0), -1.0, 1.0)
    angle = np.arccos(cos_angle)
    w = 0.5 * np.array([R[2, 1] - R[1, 2], R[0, 2] - R[2, 0], R[1, 0] - R[0, 1]])
    if angle < 1e-8:
        return w
    return w * (angle / np.sin(angle))


def orthonormalize(R: ArrayLike) -> NDArray[np.float64]:
    """Project a nearly orthonormal matrix back onto SO(3) (polar decomposition)."""
    U, _, Vt = np.linalg.svd(np.asarray(R, dtype=float))
    Q = U @ Vt
    if np.linalg.det(Q) < 0:
        U[:, -1] *= -1.0
        Q = U @ Vt
    return Q


def rot_z(yaw: float) -> NDArray[np.float64]:
    c, s = np.cos(yaw), np.sin(yaw)
    return np.array([[c, -s, 0.0], [s, c, 0.0], [0.0, 0.0, 1.0]])


def rot_z_batch(yaw: ArrayLike) -> NDArray[np.float64]:
    """Stack of yaw rotations, shape (N, 3, 3)."""
    yaw = np.asarray(yaw, dtype=float)
    c, s = np.cos(yaw), np.sin(yaw)
    out = np.zeros(yaw.shape + (3, 3))
    out[..., 0, 0] = c
    out[..., 0, 1] = -s
    out[..., 1, 0] = s
    out[..., 1, 1] = c
    out[..., 2, 2] = 1.0
    return out


@dataclass(frozen=True)
class GravityModel:
    """Constant world-frame gravity vector.

    The magnitude must lie in [9.7, 9.9] m/s^2 unless ``allow_override`` is set.
    """

    gravity_world: NDArray[np.float64] = field(
        default_factory=lambda: np.array(DEFAULT_GRAVITY)
    )
    allow_override: bool = False

    def __post_init__(self) -> None:
        g = as_vec3(self.gravity_world, "gravity_world")
        object.__setattr__(self, "gravity_world", g)
        norm = float(np.linalg.norm(g))
        if not self.allow_override and not 9.7 <= norm <= 9.9:
            raise ValueError(
                f"gravity magnitude {norm:.4f} outside [9.7, 9.9]; "
                "pass allow_override=True to use it anyway"
            )

    @property
    def magnitude(self) -> float:
        return float(np.linalg.norm(self.gravity_world))

    @property
    def direction(self) -> NDArray[np.float64]:
        """Unit vector along gravity (pointing down for the default model)."""
        return self.gravity_world / self.magnitude


@dataclass(frozen=True)
class NoiseModel:
    """Continuous-time IMU noise description.

    Attributes
    ----------
    accel_noise_density : float
        Accelerometer white noise, m/s^2/sqrt(Hz).
    gyro_noise_density : float
        Gyroscope white noise, rad/s/sqrt(Hz).
    accel_random_walk : float
        Accelerometer bias random walk, m/s^3/sqrt(Hz).
    gyro_random_walk : float
        Gyroscope bias random walk, rad/s^2/sqrt(Hz).
    sample_rate : float
        IMU output rate, Hz.
    """

    accel_noise_density: float = 0.0
    gyro_noise_density: float = 0.0
    accel_random_walk: float = 0.0
    gyro_random_walk: float = 0.0
    sample_rate: float = 33.0

    def __post_init__(self) -> None:
        for name in (
            "accel_noise_density",
            "gyro_noise_density",
            "accel_random_walk",
            "gyro_random_walk",
        ):
            value = float(getattr(self, name))
            if not np.isfinite(value) or value < 0:
                raise ValueError(f"{name} must be finite and nonnegative, got {value}")
            object.__setattr__(self, name, value)
        rate = float(self.sample_rate)
        if not np.isfinite(rate) or rate <= 0:
            raise ValueError(f"sample_rate must be positive, got {rate}")
        object.__setattr__(self, "sample_rate", rate)

    @classmethod
    def bno055(cls, sample_rate: float = 33.0) -> "NoiseModel":
        """Allan-variance parameters of the BNO055 used as the reference sensor."""
        return cls(
            accel_noise_density=3.31e-3,
            gyro_noise_density=2.22e-2,
            accel_random_walk=7.23e-5,
            gyro_random_walk=8.83e-5,
            sample_rate=sample_rate,
        )

    @classmethod
    def noiseless(cls, sample_rate: float = 33.0) -> "NoiseModel":
        return cls(sample_rate=sample_rate)

    def to_dict(self) -> dict[str, float]:
        return {
            "accel_noise_density": self.accel_noise_density,
            "gyro_noise_density": self.gyro_noise_density,
            "accel_random_walk": self.accel_random_walk,
            "gyro_random_walk": self.gyro_random_walk,
            "sample_rate": self.sample_rate,
        }


def per_sample_noise_std(model: NoiseModel) -> tuple[float, float]:
    """Discrete white-noise standard deviations ``(sigma_a, sigma_g)``.

    Uses the Nyquist-bandwidth convention ``sigma = density * sqrt(rate / 2)``.
    """
    root = np.sqrt(model.sample_rate / 2.0)
    return model.accel_noise_density * root, model.gyro_noise_density * root


@dataclass(frozen=True)
class NavState:
    """Inertial navigation state: attitude, velocity, position and IMU biases."""

    rotation: NDArray[np.float64] = field(default_factory=lambda: np.eye(3))
    velocity_world: NDArray[np.float64] = field(default_factory=lambda: np.zeros(3))
    position_world: NDArray[np.float64] = field(default_factory=lambda: np.zeros(3))
    gyro_bias: NDArray[np.float64] = field(default_factory=lambda: np.zeros(3))
    accel_bias: NDArray[np.float64] = field(default_factory=lambda: np.zeros(3))
    timestamp: float = 0.0

    def __post_init__(self) -> None:
        object.__setattr__(self, "rotation", check_rotation(self.rotation))
        for name in ("velocity_world", "position_world", "gyro_bias", "accel_bias"):
            object.__setattr__(self, name, as_vec3(getattr(self, name), name))
        t = float(self.timestamp)
        if not np.isfinite(t):
            raise ValueError("timestamp must be finite")
        object.__setattr__(self, "timestamp", t)


def so3_exp_batch(axis_angles: ArrayLike) -> NDArray[np.float64]:
    """Vectorized :func:`so3_exp` over an (B, 3) array."""
    theta = np.asarray(axis_angles, dtype=float)
    angle = np.linalg.norm(theta, axis=-1)
    K = np.zeros(theta.shape[:-1] + (3, 3))
    K[..., 0, 1] = -theta[..., 2]
    K[..., 0, 2] = theta[..., 1]
    K[..., 1, 0] = theta[..., 2]
    K[..., 1, 2] = -theta[..., 0]
    K[..., 2, 0] = -theta[..., 1]
    K[..., 2, 1] = theta[..., 0]
    small = angle < 1e-8
    safe = np.where(small, 1.0, angle)
    a = np.where(small, 1.0, np.sin(safe) / safe)
    b = np.where(small, 0.5, (1.0 - np.cos(safe)) / safe**2)
    KK = K @ K
    return np.eye(3) + a[..., None, None] * K + b[..., None, None] * KK


def orthonormalize_batch(R: ArrayLike) -> NDArray[np.float64]:
    U, _, Vt = np.linalg.svd(np.asarray(R, dtype=float))
    Q = U @ Vt
    flip = np.linalg.det(Q) < 0
    if np.any(flip):
        U = U.copy()
        U[flip, :, -1] *= -1.0
        Q = U @ Vt
    return Q
