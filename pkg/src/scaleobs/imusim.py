"""IMU measurement synthesis and strapdown integration.

The body frame is the IMU frame. Synthesis inverts the strapdown dynamics:

    a_m = R^T (a_world - g) + b_a + n_a
    w_m = w_body + b_g + n_g

and :func:`integrate` runs them forward again with a second-order scheme.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Iterator, Sequence

import numpy as np
from numpy.typing import ArrayLike, NDArray

from .core import (
    GravityModel,
    NavState,
    NoiseModel,
    as_vec3,
    orthonormalize_batch,
    per_sample_noise_std,
    so3_exp_batch,
)
from .trajgen import Trajectory


@dataclass(frozen=True)
class ImuSample:
    timestamp: float
    angular_velocity_body: NDArray[np.float64]
    specific_force_body: NDArray[np.float64]


@dataclass(frozen=True)
class ImuSeries(Sequence[ImuSample]):
    """Time series of gyroscope (rad/s) and accelerometer (m/s^2) readings."""

    timestamps: NDArray[np.float64]
    gyro: NDArray[np.float64]
    accel: NDArray[np.float64]

    def __post_init__(self) -> None:
        t = np.asarray(self.timestamps, dtype=float).reshape(-1)
        gyro = np.asarray(self.gyro, dtype=float)
        accel = np.asarray(self.accel, dtype=float)
        if gyro.shape != (len(t), 3) or accel.shape != (len(t), 3):
            raise ValueError(
                f"gyro/accel must have shape ({len(t)}, 3), got {gyro.shape} and {accel.shape}"
            )
        if not (np.all(np.isfinite(t)) and np.all(np.isfinite(gyro)) and np.all(np.isfinite(accel))):
            raise ValueError("IMU samples must be finite")
        object.__setattr__(self, "timestamps", t)
        object.__setattr__(self, "gyro", gyro)
        object.__setattr__(self, "accel", accel)

    def __len__(self) -> int:
        return len(self.timestamps)

    def __getitem__(self, index):  # type: ignore[override]
        if isinstance(index, slice):
            return ImuSeries(self.timestamps[index], self.gyro[index], self.accel[index])
        i = int(index)
        return ImuSample(float(self.timestamps[i]), self.gyro[i].copy(), self.accel[i].copy())

    def __iter__(self) -> Iterator[ImuSample]:
        for i in range(len(self)):
            yield self[i]

    @property
    def sample_rate(self) -> float:
        return 1.0 / float(np.median(np.diff(self.timestamps)))

    def as_array(self) -> NDArray[np.float64]:
        """(N, 7) array with columns ``t, wx, wy, wz, ax, ay, az``."""
        return np.column_stack([self.timestamps, self.gyro, self.accel])

    @classmethod
    def from_array(cls, data: ArrayLike) -> "ImuSeries":
        data = np.asarray(data, dtype=float)
        return cls(data[:, 0], data[:, 1:4], data[:, 4:7])


@dataclass(frozen=True)
class BiasTrajectory:
    gyro_bias: NDArray[np.float64]
    accel_bias: NDArray[np.float64]

    def __len__(self) -> int:
        return len(self.gyro_bias)


def _random_walk(initial, step_std, n, draws):
    steps = draws * step_std[:, None]
    out = np.empty((n, 3))
    out[0] = initial
    if n > 1:
        out[1:] = initial + np.cumsum(steps, axis=0)
    return out


def synthesize(
    kinematics: Trajectory,
    noise: NoiseModel | None = None,
    gravity: GravityModel | None = None,
    initial_bias: tuple[ArrayLike, ArrayLike] | None = None,
    seed: int | np.random.Generator | None = None,
) -> tuple[ImuSeries, BiasTrajectory]:
    """Synthesize IMU readings along ground-truth kinematics.

    Parameters
    ----------
    kinematics : Trajectory
        Ground truth; its rotations map body to world.
    noise : NoiseModel, optional
        Continuous densities; discretized with :func:`per_sample_noise_std`.
        Defaults to a noiseless model.
    gravity : GravityModel, optional
    initial_bias : (gyro_bias, accel_bias), optional
        Bias values at the first sample, zero by default.
    seed : int or Generator, optional
        Random source; identical seeds give bitwise-identical output.

    Returns
    -------
    imu : ImuSeries
    biases : BiasTrajectory
        The bias values actually added at each sample.
    """
    n = len(kinematics)
    if n == 0:
        raise ValueError("cannot synthesize IMU data from empty kinematics")
    noise = noise if noise is not None else NoiseModel.noiseless()
    gravity = gravity if gravity is not None else GravityModel()
    if initial_bias is None:
        bg0, ba0 = np.zeros(3), np.zeros(3)
    else:
        bg0, ba0 = as_vec3(initial_bias[0], "gyro bias"), as_vec3(initial_bias[1], "accel bias")
    rng = seed if isinstance(seed, np.random.Generator) else np.random.default_rng(seed)

    R = kinematics.rotations
    specific_force = np.einsum("nji,nj->ni", R, kinematics.accelerations - gravity.gravity_world)
    omega = np.zeros((n, 3))
    omega[:, 2] = kinematics.yaw_rates

    # fixed draw order keeps the stream layout independent of the noise values
    white_a = rng.standard_normal((n, 3))
    white_g = rng.standard_normal((n, 3))
    walk_a = rng.standard_normal((n - 1, 3))
    walk_g = rng.standard_normal((n - 1, 3))

    sigma_a, sigma_g = per_sample_noise_std(noise)
    sqrt_dt = np.sqrt(np.diff(kinematics.timestamps))
    accel_bias = _random_walk(ba0, noise.accel_random_walk * sqrt_dt, n, walk_a)
    gyro_bias = _random_walk(bg0, noise.gyro_random_walk * sqrt_dt, n, walk_g)

    accel = specific_force + accel_bias + sigma_a * white_a
    gyro = omega + gyro_bias + sigma_g * white_g
    imu = ImuSeries(kinematics.timestamps.copy(), gyro, accel)
    return imu, BiasTrajectory(gyro_bias, accel_bias)


def apply_scale(kinematics: Trajectory, s: float) -> Trajectory:
    """Rescale a trajectory by ``s``: the similarity a monocular camera cannot see.

    Positions, velocities and accelerations scale by ``s``; curvature scales by
    ``1/s``; rotations, yaw rates and timestamps are unchanged.
    """
    s = float(s)
    if not np.isfinite(s) or s <= 0:
        raise ValueError(f"scale must be positive, got {s}")
    return Trajectory(
        timestamps=kinematics.timestamps.copy(),
        positions=kinematics.positions * s,
        velocities=kinematics.velocities * s,
        accelerations=kinematics.accelerations * s,
        rotations=kinematics.rotations.copy(),
        yaw_rates=kinematics.yaw_rates.copy(),
        curvatures=kinematics.curvatures / s,
    )


def propagate(
    timestamps: NDArray[np.float64],
    gyro: NDArray[np.float64],
    accel: NDArray[np.float64],
    rotation0: NDArray[np.float64],
    velocity0: NDArray[np.float64],
    position0: NDArray[np.float64],
    gyro_bias: NDArray[np.float64],
    accel_bias: NDArray[np.float64],
    gravity_world: NDArray[np.float64],
):
    """Batched strapdown propagation.

    Initial-state arrays carry a leading batch axis ``B`` (shapes (B, 3, 3) and
    (B, 3)). Returns rotations (N, B, 3, 3), velocities (N, B, 3) and positions
    (N, B, 3).

    Rotation uses the trapezoidal mean rate of each interval; velocity is
    trapezoidal in world-frame acceleration and position integrates that
    piecewise-linear acceleration exactly.
    """
    n = len(timestamps)
    B = rotation0.shape[0]
    Rs = np.empty((n, B, 3, 3))
    vs = np.empty((n, B, 3))
    ps = np.empty((n, B, 3))
    Rs[0], vs[0], ps[0] = rotation0, velocity0, position0
    R, v, p = rotation0, velocity0, position0
    acc_w = np.einsum("bij,bj->bi", R, accel[0] - accel_bias) + gravity_world
    for k in range(n - 1):
        h = timestamps[k + 1] - timestamps[k]
        w_mean = 0.5 * (gyro[k] + gyro[k + 1]) - gyro_bias
        R_next = orthonormalize_batch(R @ so3_exp_batch(w_mean * h))
        acc_next = np.einsum("bij,bj->bi", R_next, accel[k + 1] - accel_bias) + gravity_world
        v_next = v + 0.5 * h * (acc_w + acc_next)
        p = p + h * v + (h * h / 6.0) * (2.0 * acc_w + acc_next)
        R, v, acc_w = R_next, v_next, acc_next
        Rs[k + 1], vs[k + 1], ps[k + 1] = R, v, p
    return Rs, vs, ps


def integrate(
    samples: ImuSeries,
    initial: NavState,
    gravity: GravityModel | None = None,
) -> list[NavState]:
    """Strapdown-integrate IMU samples from ``initial``.

    Biases are held at the initial state's values. The first output state is
    ``initial`` re-stamped at the first sample time.
    """
    if len(samples) == 0:
        raise ValueError("no IMU samples to integrate")
    t = samples.timestamps
    if np.any(np.diff(t) <= 0):
        bad = int(np.argmax(np.diff(t) <= 0)) + 1
        raise ValueError(f"timestamps must be strictly increasing (sample {bad})")
    gravity = gravity if gravity is not None else GravityModel()
    Rs, vs, ps = propagate(
        t,
        samples.gyro,
        samples.accel,
        initial.rotation[None],
        initial.velocity_world[None],
        initial.position_world[None],
        initial.gyro_bias[None],
        initial.accel_bias[None],
        gravity.gravity_world,
    )
    return [
        NavState(
            rotation=Rs[k, 0],
            velocity_world=vs[k, 0],
            position_world=ps[k, 0],
            gyro_bias=initial.gyro_bias,
            accel_bias=initial.accel_bias,
            timestamp=float(t[k]),
        )
        for k in range(len(t))
    ]


def initial_state(kinematics: Trajectory) -> NavState:
    """Ground-truth state at the first sample with zero biases."""
    return NavState(
        rotation=kinematics.rotations[0],
        velocity_world=kinematics.velocities[0],
        position_world=kinematics.positions[0],
        timestamp=float(kinematics.timestamps[0]),
    )
