"""Excitation index and Fisher information for the metric scale.

The excitation index is ``E = std(w_z) * std(a_y)`` over body-frame yaw rate and
lateral specific force. The Fisher information one accelerometer sample carries
about the scale is ``|a_world|^2 / sigma_a^2``; it is rotation invariant and
vanishes exactly when the translational acceleration does.
"""

from __future__ import annotations

import enum
import math
from dataclasses import dataclass

import numpy as np
from numpy.lib.stride_tricks import sliding_window_view
from numpy.typing import ArrayLike, NDArray

from .core import GravityModel, NoiseModel, per_sample_noise_std
from .imusim import ImuSeries
from .trajgen import KinematicSample, Trajectory

WEAK_THRESHOLD = 1e-4
STRONG_THRESHOLD = 1e-2
DEFAULT_WINDOW_SECONDS = 5.0
UNOBSERVABLE = "unobservable"


class ExcitationLevel(str, enum.Enum):
    WEAK = "weak"
    MODERATE = "moderate"
    STRONG = "strong"


def classify(excitation_index: float) -> ExcitationLevel:
    if excitation_index < WEAK_THRESHOLD:
        return ExcitationLevel.WEAK
    if excitation_index > STRONG_THRESHOLD:
        return ExcitationLevel.STRONG
    return ExcitationLevel.MODERATE


@dataclass(frozen=True)
class ExcitationReport:
    sigma_yaw_rate: float
    sigma_lateral_accel: float
    excitation_index: float
    classification: ExcitationLevel

    def to_dict(self, information: "ScaleInformation | None" = None) -> dict:
        out = {
            "sigma_yaw_rate": self.sigma_yaw_rate,
            "sigma_lateral_accel": self.sigma_lateral_accel,
            "excitation_index": self.excitation_index,
            "classification": self.classification.value,
        }
        if information is not None:
            out["fisher_total"] = information.total
            out["crlb_std"] = information.crlb_json()
        return out


@dataclass(frozen=True)
class ScaleInformation:
    """Per-sample and time-integrated scale information of a trajectory."""

    timestamps: NDArray[np.float64]
    per_sample: NDArray[np.float64]
    total: float
    crlb_std: float

    @property
    def observable(self) -> bool:
        return self.total > 0

    def crlb_json(self) -> float | str:
        return self.crlb_std if math.isfinite(self.crlb_std) else UNOBSERVABLE


def _check_imu(imu: ImuSeries) -> None:
    if len(imu) < 2:
        raise ValueError("excitation index needs at least 2 IMU samples")


def excitation_index(imu: ImuSeries) -> ExcitationReport:
    """Excitation index over the whole series (population standard deviations)."""
    _check_imu(imu)
    sigma_w = float(np.std(imu.gyro[:, 2]))
    sigma_a = float(np.std(imu.accel[:, 1]))
    e = sigma_w * sigma_a
    return ExcitationReport(sigma_w, sigma_a, e, classify(e))


def excitation_windowed(
    imu: ImuSeries, window_seconds: float = DEFAULT_WINDOW_SECONDS
) -> tuple[NDArray[np.float64], NDArray[np.float64]]:
    """Trailing-window excitation index.

    A window of ``window_seconds`` holds ``round(window_seconds * rate) + 1``
    samples, so a window equal to the series duration yields one value equal
    to :func:`excitation_index`.

    Returns
    -------
    timestamps, values : ndarray
        One entry per sample once the first full window is available.
    """
    _check_imu(imu)
    rate = imu.sample_rate
    if window_seconds < 2.0 / rate:
        raise ValueError(f"window of {window_seconds} s is shorter than 2 samples at {rate:.3g} Hz")
    m = int(round(window_seconds * rate)) + 1
    if m > len(imu):
        raise ValueError(f"window of {m} samples exceeds the series length {len(imu)}")
    sw = np.std(sliding_window_view(imu.gyro[:, 2], m), axis=1)
    sa = np.std(sliding_window_view(imu.accel[:, 1], m), axis=1)
    return imu.timestamps[m - 1 :].copy(), sw * sa


def fisher_per_sample(accel_world: ArrayLike, sigma_a: float) -> float:
    """Scale information carried by one accelerometer sample."""
    if not sigma_a > 0:
        raise ValueError(f"sigma_a must be positive, got {sigma_a}")
    a = np.asarray(accel_world, dtype=float)
    return float(a @ a) / sigma_a**2


def fisher_total(kinematics: Trajectory, sigma_a: float) -> ScaleInformation:
    """Trapezoidal time integral of the per-sample information.

    ``crlb_std`` is ``1/sqrt(total)``, or ``inf`` when the trajectory carries no
    scale information.
    """
    if len(kinematics) == 0:
        raise ValueError("fisher_total needs at least one sample")
    if not sigma_a > 0:
        raise ValueError(f"sigma_a must be positive, got {sigma_a}")
    acc = kinematics.accelerations
    per_sample = np.einsum("ni,ni->n", acc, acc) / sigma_a**2
    if len(kinematics) > 1:
        total = float(np.trapezoid(per_sample, kinematics.timestamps))
    else:
        total = 0.0
    crlb = 1.0 / math.sqrt(total) if total > 0 else math.inf
    return ScaleInformation(kinematics.timestamps.copy(), per_sample, total, crlb)


def _log_likelihood(s, accel_meas, R, accel_mono, gravity_world, accel_bias, sigma_a):
    # one-sample Gaussian log-likelihood of the scaled accelerometer model, up to a constant
    predicted = R.T @ (s * accel_mono - gravity_world) + accel_bias
    r = accel_meas - predicted
    return -0.5 * np.einsum("...i,...i->...", r, r) / sigma_a**2


def verify_fisher_against_likelihood(
    sample: KinematicSample,
    noise: NoiseModel | float,
    trials: int = 100_000,
    seed: int | None = 0,
    gravity: GravityModel | None = None,
    accel_bias: ArrayLike = (0.0, 0.0, 0.0),
) -> float:
    """Monte Carlo check of the analytic per-sample information.

    Draws noisy accelerometer readings at the true scale ``s = 1``, evaluates
    the score by central differences of the log-likelihood in ``s`` and
    compares its empirical second moment with :func:`fisher_per_sample`.

    Returns the relative error ``|empirical - analytic| / analytic`` (0 when
    both vanish).
    """
    if trials < 1000:
        raise ValueError("at least 1000 trials are required")
    sigma_a = noise if isinstance(noise, (int, float)) else per_sample_noise_std(noise)[0]
    gravity = gravity if gravity is not None else GravityModel()
    b = np.asarray(accel_bias, dtype=float)
    R = np.asarray(sample.rotation, dtype=float)
    a_true = np.asarray(sample.acceleration_world, dtype=float)
    analytic = fisher_per_sample(a_true, sigma_a)

    rng = np.random.default_rng(seed)
    clean = R.T @ (a_true - gravity.gravity_world) + b
    meas = clean + sigma_a * rng.standard_normal((trials, 3))
    h = 1e-3
    score = (
        _log_likelihood(1.0 + h, meas, R, a_true, gravity.gravity_world, b, sigma_a)
        - _log_likelihood(1.0 - h, meas, R, a_true, gravity.gravity_world, b, sigma_a)
    ) / (2 * h)
    empirical = float(np.mean(score**2))
    if analytic == 0.0:
        return 0.0 if empirical == 0.0 else math.inf
    return abs(empirical - analytic) / analytic
