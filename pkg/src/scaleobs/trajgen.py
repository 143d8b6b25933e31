"""Analytic planar trajectories with exact velocity, acceleration and curvature.

All generators start at the origin, move at constant speed in the z = 0 plane,
and align the body x-axis with the velocity (z-up). Samples are spaced at
``1 / sample_rate`` and include both endpoints, so a 30 s run at 33 Hz has
991 samples and 990 intervals.
"""

from __future__ import annotations

import enum
import functools
from dataclasses import dataclass
from typing import Iterator, Sequence, Union

import numpy as np
from numpy.typing import ArrayLike, NDArray
from scipy.integrate import quad, solve_ivp

from .core import rot_z_batch


class InvalidSpecError(ValueError):
    """Raised when a :class:`TrajectorySpec` violates its invariants."""


class UndefinedCurvatureError(ValueError):
    """Raised when curvature is requested at a zero-speed sample."""


class TrajectoryKind(str, enum.Enum):
    STRAIGHT = "straight"
    CIRCLE = "circle"
    FIGURE_EIGHT = "figure_eight"

    @classmethod
    def parse(cls, value: Union[str, "TrajectoryKind"]) -> "TrajectoryKind":
        if isinstance(value, cls):
            return value
        key = str(value).strip().lower().replace("-", "_")
        aliases = {"figure8": "figure_eight", "fig8": "figure_eight", "line": "straight"}
        key = aliases.get(key, key)
        try:
            return cls(key)
        except ValueError:
            choices = ", ".join(k.value for k in cls)
            raise InvalidSpecError(f"unknown trajectory kind {value!r} (choose {choices})") from None


@dataclass(frozen=True)
class TrajectorySpec:
    """Parameters of one commanded trajectory.

    ``shape`` is the circle radius or the figure-eight half-width in metres. When
    omitted it is chosen so that exactly one circuit covers ``path_length``.
    ``path_length`` defaults to ``speed * duration``.
    """

    kind: TrajectoryKind = TrajectoryKind.STRAIGHT
    speed: float = 0.1
    duration: float = 30.0
    path_length: float | None = None
    sample_rate: float = 33.0
    shape: float | None = None

    def __post_init__(self) -> None:
        object.__setattr__(self, "kind", TrajectoryKind.parse(self.kind))
        for name in ("speed", "duration", "sample_rate"):
            value = float(getattr(self, name))
            if not np.isfinite(value) or value <= 0:
                raise InvalidSpecError(f"{name} must be positive, got {value}")
            object.__setattr__(self, name, value)
        expected = self.speed * self.duration
        if self.path_length is None:
            object.__setattr__(self, "path_length", expected)
        else:
            length = float(self.path_length)
            if abs(length - expected) > 1e-9 * max(1.0, expected):
                raise InvalidSpecError(
                    f"speed*duration = {expected} does not match path_length = {length}"
                )
            object.__setattr__(self, "path_length", length)
        if self.shape is not None:
            shape = float(self.shape)
            if not np.isfinite(shape) or shape <= 0:
                raise InvalidSpecError(f"shape must be positive, got {shape}")
            object.__setattr__(self, "shape", shape)

    @property
    def n_samples(self) -> int:
        return int(np.floor(self.duration * self.sample_rate + 1e-9)) + 1

    def resolved_shape(self) -> float:
        """Circle radius or lemniscate half-width actually used (0 for straight)."""
        if self.shape is not None:
            return self.shape
        if self.kind is TrajectoryKind.CIRCLE:
            return self.path_length / (2.0 * np.pi)
        if self.kind is TrajectoryKind.FIGURE_EIGHT:
            return self.path_length / gerono_unit_length()
        return 0.0


@dataclass(frozen=True)
class KinematicSample:
    timestamp: float
    position_world: NDArray[np.float64]
    velocity_world: NDArray[np.float64]
    acceleration_world: NDArray[np.float64]
    rotation: NDArray[np.float64]
    yaw_rate: float
    curvature: float


@dataclass(frozen=True)
class Trajectory(Sequence[KinematicSample]):
    """Column-oriented ground-truth kinematics; indexes like a sequence of samples."""

    timestamps: NDArray[np.float64]
    positions: NDArray[np.float64]
    velocities: NDArray[np.float64]
    accelerations: NDArray[np.float64]
    rotations: NDArray[np.float64]
    yaw_rates: NDArray[np.float64]
    curvatures: NDArray[np.float64]

    def __post_init__(self) -> None:
        n = len(self.timestamps)
        shapes = {
            "positions": (n, 3),
            "velocities": (n, 3),
            "accelerations": (n, 3),
            "rotations": (n, 3, 3),
            "yaw_rates": (n,),
            "curvatures": (n,),
        }
        for name, shape in shapes.items():
            arr = np.asarray(getattr(self, name), dtype=float)
            if arr.shape != shape:
                raise ValueError(f"{name} has shape {arr.shape}, expected {shape}")
            object.__setattr__(self, name, arr)
        object.__setattr__(self, "timestamps", np.asarray(self.timestamps, dtype=float))
        if n > 1 and np.any(np.diff(self.timestamps) <= 0):
            raise ValueError("timestamps must be strictly increasing")

    def __len__(self) -> int:
        return len(self.timestamps)

    def __getitem__(self, index):  # type: ignore[override]
        if isinstance(index, slice):
            return Trajectory(
                self.timestamps[index],
                self.positions[index],
                self.velocities[index],
                self.accelerations[index],
                self.rotations[index],
                self.yaw_rates[index],
                self.curvatures[index],
            )
        i = int(index)
        return KinematicSample(
            timestamp=float(self.timestamps[i]),
            position_world=self.positions[i].copy(),
            velocity_world=self.velocities[i].copy(),
            acceleration_world=self.accelerations[i].copy(),
            rotation=self.rotations[i].copy(),
            yaw_rate=float(self.yaw_rates[i]),
            curvature=float(self.curvatures[i]),
        )

    def __iter__(self) -> Iterator[KinematicSample]:
        for i in range(len(self)):
            yield self[i]

    @property
    def dt(self) -> float:
        """Median sample spacing."""
        return float(np.median(np.diff(self.timestamps)))

    @property
    def speeds(self) -> NDArray[np.float64]:
        return np.linalg.norm(self.velocities, axis=1)


def _gerono_speed_factor(u: ArrayLike) -> NDArray[np.float64]:
    # |dc/du| for the unit-amplitude lemniscate; never zero
    u = np.asarray(u, dtype=float)
    return np.hypot(np.cos(u), np.cos(2.0 * u))


@functools.lru_cache(maxsize=None)
def gerono_unit_length() -> float:
    """Arc length of one circuit of ``x = sin u, y = sin u cos u``."""
    # |c'| is symmetric under u -> pi - u and u -> u + pi
    quarter, _ = quad(
        lambda u: float(_gerono_speed_factor(u)), 0.0, np.pi / 2, epsabs=0, epsrel=1e-13, limit=200
    )
    return 4.0 * quarter


def _assemble(t, pos, vel, acc, curvature) -> Trajectory:
    heading = np.arctan2(vel[:, 1], vel[:, 0])
    speed = np.linalg.norm(vel, axis=1)
    return Trajectory(
        timestamps=t,
        positions=pos,
        velocities=vel,
        accelerations=acc,
        rotations=rot_z_batch(heading),
        yaw_rates=curvature * speed,
        curvatures=curvature,
    )


def _straight(spec: TrajectorySpec, t):
    n = len(t)
    pos = np.zeros((n, 3))
    pos[:, 0] = spec.speed * t
    vel = np.zeros((n, 3))
    vel[:, 0] = spec.speed
    return _assemble(t, pos, vel, np.zeros((n, 3)), np.zeros(n))


def _circle(spec: TrajectorySpec, t):
    radius = spec.resolved_shape()
    v = spec.speed
    phi = v * t / radius
    n = len(t)
    pos = np.zeros((n, 3))
    vel = np.zeros((n, 3))
    acc = np.zeros((n, 3))
    # counter-clockwise about (0, radius), starting at the origin heading +x
    pos[:, 0] = radius * np.sin(phi)
    pos[:, 1] = radius * (1.0 - np.cos(phi))
    vel[:, 0] = v * np.cos(phi)
    vel[:, 1] = v * np.sin(phi)
    acc[:, 0] = -(v**2 / radius) * np.sin(phi)
    acc[:, 1] = (v**2 / radius) * np.cos(phi)
    return _assemble(t, pos, vel, acc, np.full(n, 1.0 / radius))


def _figure_eight(spec: TrajectorySpec, t):
    A = spec.resolved_shape()
    v = spec.speed

    # arc-length reparametrization: du/dt = v / |c'(u)|
    sol = solve_ivp(
        lambda _t, u: v / (A * _gerono_speed_factor(u)),
        (0.0, float(t[-1])),
        [0.0],
        method="DOP853",
        t_eval=t,
        rtol=1e-13,
        atol=1e-14,
    )
    if not sol.success:
        raise RuntimeError(f"figure-eight reparametrization failed: {sol.message}")
    u = sol.y[0]

    su, cu = np.sin(u), np.cos(u)
    s2u, c2u = np.sin(2 * u), np.cos(2 * u)
    d1 = np.stack([A * cu, A * c2u], axis=1)
    d2 = np.stack([-A * su, -2.0 * A * s2u], axis=1)
    norm_d1 = np.linalg.norm(d1, axis=1)
    tangent = d1 / norm_d1[:, None]
    kappa = (d1[:, 0] * d2[:, 1] - d1[:, 1] * d2[:, 0]) / norm_d1**3
    normal = np.stack([-tangent[:, 1], tangent[:, 0]], axis=1)

    n = len(t)
    pos = np.zeros((n, 3))
    vel = np.zeros((n, 3))
    acc = np.zeros((n, 3))
    pos[:, 0] = A * su
    pos[:, 1] = A * su * cu
    vel[:, :2] = v * tangent
    acc[:, :2] = (v**2 * kappa)[:, None] * normal
    return _assemble(t, pos, vel, acc, kappa)


_GENERATORS = {
    TrajectoryKind.STRAIGHT: _straight,
    TrajectoryKind.CIRCLE: _circle,
    TrajectoryKind.FIGURE_EIGHT: _figure_eight,
}


def generate(spec: TrajectorySpec) -> Trajectory:
    """Sample the trajectory described by ``spec``."""
    t = np.arange(spec.n_samples) / spec.sample_rate
    return _GENERATORS[spec.kind](spec, t)


def arc_length(samples: Trajectory | ArrayLike) -> float:
    """Piecewise-linear path length of a trajectory or an (N, 3) position array."""
    positions = samples.positions if isinstance(samples, Trajectory) else np.asarray(samples, dtype=float)
    if positions.ndim != 2 or len(positions) < 2:
        raise ValueError("arc length needs at least 2 samples")
    return float(np.sum(np.linalg.norm(np.diff(positions, axis=0), axis=1)))


def cumulative_arc_length(samples: Trajectory | ArrayLike) -> NDArray[np.float64]:
    positions = samples.positions if isinstance(samples, Trajectory) else np.asarray(samples, dtype=float)
    steps = np.linalg.norm(np.diff(positions, axis=0), axis=1)
    return np.concatenate([[0.0], np.cumsum(steps)])


def curvature_profile(samples: Trajectory) -> tuple[NDArray[np.float64], NDArray[np.float64]]:
    """Signed curvature ``|v x a| / |v|^3`` at each sample.

    The sign follows the z-component of ``v x a`` (positive when turning left).
    """
    v = samples.velocities
    a = samples.accelerations
    speed = np.linalg.norm(v, axis=1)
    if np.any(speed <= 0):
        idx = int(np.argmax(speed <= 0))
        raise UndefinedCurvatureError(f"zero speed at sample {idx} (t={samples.timestamps[idx]})")
    cross = np.cross(v, a)
    magnitude = np.linalg.norm(cross, axis=1) / speed**3
    sign = np.where(cross[:, 2] < 0, -1.0, 1.0)
    return samples.timestamps.copy(), sign * magnitude
