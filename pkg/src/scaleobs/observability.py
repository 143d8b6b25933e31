"""Numerical local observability of the visual-inertial state.

The augmented state is ``[dtheta, dv, dp, db_g, db_a, dl_1 .. dl_L]`` (15 + 3L).
Attitude perturbations act on the left (world frame): ``R -> exp(dtheta) R``.
The Gramian ``G = J^T J`` stacks Jacobians of unit landmark bearings, seen from
the body frame, with respect to the initial state, obtained by central finite
differences of the strapdown flow driven by the segment's true IMU signals.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field

import numpy as np
from numpy.typing import ArrayLike, NDArray

from .core import GravityModel, NavState, so3_exp_batch
from .imusim import initial_state, propagate, synthesize
from .trajgen import Trajectory

BASE_DIM = 15
THETA, VEL, POS, BG, BA = (slice(0, 3), slice(3, 6), slice(6, 9), slice(9, 12), slice(12, 15))


def default_landmarks(count: int = 6, radius: float = 2.0) -> NDArray[np.float64]:
    """Landmarks on a horizontal ring around the origin at staggered heights."""
    angles = 2.0 * np.pi * np.arange(count) / count
    heights = np.linspace(0.3, 1.8, count)
    return np.column_stack([radius * np.cos(angles), radius * np.sin(angles), heights])


def _check_landmarks(landmarks: NDArray[np.float64]) -> None:
    if landmarks.ndim != 2 or landmarks.shape[1] != 3:
        raise ValueError(f"landmarks must have shape (L, 3), got {landmarks.shape}")
    if len(landmarks) < 3:
        raise ValueError("at least 3 landmarks are required")
    centered = landmarks - landmarks.mean(axis=0)
    sv = np.linalg.svd(centered, compute_uv=False)
    if sv.size < 2 or sv[1] <= 1e-9 * max(sv[0], 1.0):
        raise ValueError("landmarks are collinear")


@dataclass(frozen=True)
class ObservabilityConfig:
    landmark_positions: NDArray[np.float64] = field(default_factory=default_landmarks)
    window_samples: int = 331
    fd_step: float = 1e-6
    rank_tolerance: float = 1e-8

    def __post_init__(self) -> None:
        lm = np.array(self.landmark_positions, dtype=float)
        _check_landmarks(lm)
        object.__setattr__(self, "landmark_positions", lm)
        if int(self.window_samples) < 2:
            raise ValueError("window_samples must be at least 2")
        object.__setattr__(self, "window_samples", int(self.window_samples))
        if not self.fd_step > 0:
            raise ValueError("fd_step must be positive")
        if not 0 < self.rank_tolerance < 1:
            raise ValueError("rank_tolerance must lie in (0, 1)")

    @property
    def state_dimension(self) -> int:
        return BASE_DIM + 3 * len(self.landmark_positions)


@dataclass(frozen=True)
class RankReport:
    state_dimension: int
    numerical_rank: int
    nullspace_dimension: int
    nullspace_basis: NDArray[np.float64]
    singular_values: NDArray[np.float64]
    scale_direction_residual: float | None = None

    def to_dict(self) -> dict:
        return {
            "state_dimension": self.state_dimension,
            "numerical_rank": self.numerical_rank,
            "nullspace_dimension": self.nullspace_dimension,
            "singular_values": [float(x) for x in self.singular_values],
            "scale_direction_residual": self.scale_direction_residual,
            "nullspace_basis": self.nullspace_basis.tolist(),
        }

    def to_json(self) -> str:
        # repr-based float formatting keeps full precision
        return json.dumps(self.to_dict(), indent=2)


def _bearings(Rs, ps, landmarks):
    """Body-frame unit bearings, shape (N, B, L, 3)."""
    d = landmarks[None, None, :, :] - ps[:, :, None, :]
    d = d / np.linalg.norm(d, axis=-1, keepdims=True)
    return np.einsum("nbji,nblj->nbli", Rs, d)


def build_gramian(
    kinematics: Trajectory,
    config: ObservabilityConfig | None = None,
    gravity: GravityModel | None = None,
) -> NDArray[np.float64]:
    """Observability Gramian of the first ``config.window_samples`` samples."""
    config = config if config is not None else ObservabilityConfig()
    gravity = gravity if gravity is not None else GravityModel()
    if len(kinematics) == 0:
        raise ValueError("empty trajectory segment")
    segment = kinematics[: config.window_samples]
    if len(segment) < 2:
        raise ValueError("segment must contain at least 2 samples")
    imu, _ = synthesize(segment, gravity=gravity)
    x0 = initial_state(segment)
    landmarks = config.landmark_positions
    L = len(landmarks)
    n = config.state_dimension
    h = config.fd_step

    # +h and -h perturbations of the 15 inertial coordinates, as one batch
    delta = np.zeros((2 * BASE_DIM, BASE_DIM))
    for j in range(BASE_DIM):
        delta[2 * j, j] = h
        delta[2 * j + 1, j] = -h
    R0 = so3_exp_batch(delta[:, THETA]) @ x0.rotation
    v0 = x0.velocity_world + delta[:, VEL]
    p0 = x0.position_world + delta[:, POS]
    Rs, _, ps = propagate(
        imu.timestamps, imu.gyro, imu.accel, R0, v0, p0, delta[:, BG], delta[:, BA], gravity.gravity_world
    )
    z = _bearings(Rs, ps, landmarks)  # (N, 30, L, 3)
    n_meas = len(segment) * L * 3
    J = np.empty((n_meas, n))
    for j in range(BASE_DIM):
        J[:, j] = ((z[:, 2 * j] - z[:, 2 * j + 1]) / (2 * h)).reshape(-1)

    Rn, _, pn = propagate(
        imu.timestamps,
        imu.gyro,
        imu.accel,
        x0.rotation[None],
        x0.velocity_world[None],
        x0.position_world[None],
        np.zeros((1, 3)),
        np.zeros((1, 3)),
        gravity.gravity_world,
    )
    for i in range(L):
        for c in range(3):
            lp = landmarks.copy()
            lm = landmarks.copy()
            lp[i, c] += h
            lm[i, c] -= h
            col = (_bearings(Rn, pn, lp) - _bearings(Rn, pn, lm))[:, 0] / (2 * h)
            J[:, BASE_DIM + 3 * i + c] = col.reshape(-1)

    G = J.T @ J
    return 0.5 * (G + G.T)


def scale_direction(initial: NavState, landmarks: ArrayLike) -> NDArray[np.float64]:
    """Unit tangent of a similarity rescaling: ``[0; v; p; 0; 0; l_1; ...]``."""
    landmarks = np.asarray(landmarks, dtype=float).reshape(-1, 3)
    d = np.concatenate(
        [np.zeros(3), initial.velocity_world, initial.position_world, np.zeros(6), landmarks.reshape(-1)]
    )
    norm = np.linalg.norm(d)
    if norm == 0:
        raise ValueError("scale direction is zero (state and landmarks at the origin)")
    return d / norm


def scale_bias_direction(
    initial: NavState, acceleration_world: ArrayLike, landmarks: ArrayLike
) -> NDArray[np.float64]:
    """Rescaling compensated by an accelerometer bias change.

    ``[0; v; p; 0; -R^T a; l_1; ...]``: unobservable whenever the body-frame
    acceleration is constant over the window, as on a constant-speed circle.
    """
    landmarks = np.asarray(landmarks, dtype=float).reshape(-1, 3)
    a = np.asarray(acceleration_world, dtype=float).reshape(3)
    d = np.concatenate(
        [
            np.zeros(3),
            initial.velocity_world,
            initial.position_world,
            np.zeros(3),
            -initial.rotation.T @ a,
            landmarks.reshape(-1),
        ]
    )
    return d / np.linalg.norm(d)


def yaw_direction(
    initial: NavState, landmarks: ArrayLike, gravity: GravityModel | None = None
) -> NDArray[np.float64]:
    """Unit tangent of a rotation of the whole scene about the gravity axis."""
    gravity = gravity if gravity is not None else GravityModel()
    g = gravity.direction
    landmarks = np.asarray(landmarks, dtype=float).reshape(-1, 3)
    d = np.concatenate(
        [
            g,
            np.cross(g, initial.velocity_world),
            np.cross(g, initial.position_world),
            np.zeros(6),
            np.cross(g, landmarks).reshape(-1),
        ]
    )
    return d / np.linalg.norm(d)


def translation_directions(n_landmarks: int) -> NDArray[np.float64]:
    """Unit tangents of rigid translations, shape (3, 15 + 3L)."""
    out = np.zeros((3, BASE_DIM + 3 * n_landmarks))
    for axis in range(3):
        out[axis, POS.start + axis] = 1.0
        out[axis, BASE_DIM + axis :: 3] = 1.0
    return out / np.linalg.norm(out, axis=1, keepdims=True)


def equilibrate(gramian: ArrayLike) -> tuple[NDArray[np.float64], NDArray[np.float64]]:
    """Symmetric Jacobi scaling ``D G D`` with ``D = diag(G)^(-1/2)``.

    State coordinates mix radians, metres and biases whose bearing sensitivities
    differ by many orders of magnitude; the congruence preserves rank exactly
    while making the relative singular-value cutoff unit independent.
    Zero diagonal entries (coordinates with no sensitivity at all) keep weight 1.
    """
    G = np.asarray(gramian, dtype=float)
    diag = np.diag(G)
    if np.any(diag < 0):
        raise ValueError("gramian has a negative diagonal entry; not PSD")
    D = np.where(diag > 0, 1.0 / np.sqrt(np.where(diag > 0, diag, 1.0)), 1.0)
    return G * D[:, None] * D[None, :], D


def rank_report(
    gramian: ArrayLike,
    config: ObservabilityConfig | None = None,
    scale_dir: ArrayLike | None = None,
) -> RankReport:
    """Numerical rank and nullspace of a Gramian.

    The Gramian is first equilibrated (:func:`equilibrate`). Singular values of
    the equilibrated matrix below ``rank_tolerance`` times the largest count as
    zero; the nullspace basis is mapped back to the original coordinates and
    orthonormalized. When ``scale_dir`` is given the report includes
    ``|G d| / sigma_max`` evaluated in equilibrated coordinates.
    """
    config = config if config is not None else ObservabilityConfig()
    G = np.asarray(gramian, dtype=float)
    if G.ndim != 2 or G.shape[0] != G.shape[1]:
        raise ValueError("gramian must be square")
    if not np.all(np.isfinite(G)):
        raise ValueError("gramian must be finite")
    if not np.allclose(G, G.T, rtol=1e-10, atol=1e-12 * max(np.max(np.abs(G)), 1e-300)):
        raise ValueError("gramian must be symmetric")
    if not np.any(G):
        raise ValueError("gramian is identically zero")
    Ge, D = equilibrate(G)
    _, s, Vt = np.linalg.svd(Ge)
    rank = int(np.sum(s >= config.rank_tolerance * s[0]))
    basis = D[:, None] * Vt[rank:].T
    if basis.shape[1]:
        basis, _ = np.linalg.qr(basis)
    residual = None
    if scale_dir is not None:
        d = np.asarray(scale_dir, dtype=float) / D
        d = d / np.linalg.norm(d)
        residual = float(np.linalg.norm(Ge @ d) / s[0])
    return RankReport(
        state_dimension=G.shape[0],
        numerical_rank=rank,
        nullspace_dimension=G.shape[0] - rank,
        nullspace_basis=basis,
        singular_values=s,
        scale_direction_residual=residual,
    )


def subspace_residual(basis: ArrayLike, direction: ArrayLike) -> float:
    """Norm of the part of a unit ``direction`` outside ``span(basis)``."""
    Q = np.asarray(basis, dtype=float)
    d = np.asarray(direction, dtype=float)
    d = d / np.linalg.norm(d)
    if Q.size == 0:
        return float(np.linalg.norm(d))
    Q, _ = np.linalg.qr(Q)
    return float(np.linalg.norm(d - Q @ (Q.T @ d)))


def analyze(
    kinematics: Trajectory,
    config: ObservabilityConfig | None = None,
    gravity: GravityModel | None = None,
) -> RankReport:
    """Gramian, rank and scale-direction residual for the leading window."""
    config = config if config is not None else ObservabilityConfig()
    G = build_gramian(kinematics, config, gravity)
    d = scale_direction(initial_state(kinematics), config.landmark_positions)
    return rank_report(G, config, d)
