"""Overlapping Allan deviation and white-noise / random-walk extraction.

Noise densities follow the discretization ``sigma = density * sqrt(rate / 2)``
used by :mod:`scaleobs.imusim`, so a white-noise Allan variance reads
``density**2 / (2 tau)`` and a bias random walk ``K**2 tau / 3``.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np
from numpy.typing import ArrayLike, NDArray
from scipy.optimize import nnls

from .core import GravityModel, NoiseModel
from .imusim import ImuSeries, synthesize
from .trajgen import Trajectory

POINTS_PER_DECADE = 20
SLOPE_TOLERANCE = 0.1
SLOPE_WINDOW = 6
WHITE_READOFF_TAU = 1.0
WALK_READOFF_TAU = 3.0
MIN_STATIC_SAMPLES = 10_000
_IRLS_ITERATIONS = 30


class MissingRegionError(ValueError):
    """No part of the curve matches a target slope.

    Attributes
    ----------
    region : str
        ``"white_noise"`` or ``"random_walk"``.
    partial : NoiseFit or None
        Whatever could be fitted, with the missing coefficient set to NaN.
    """

    def __init__(self, region: str, message: str, partial: "NoiseFit | None" = None):
        super().__init__(message)
        self.region = region
        self.partial = partial


@dataclass(frozen=True)
class AllanCurve:
    taus: NDArray[np.float64]
    deviations: NDArray[np.float64]
    axis: str = ""

    def __post_init__(self) -> None:
        taus = np.asarray(self.taus, dtype=float).reshape(-1)
        dev = np.asarray(self.deviations, dtype=float).reshape(-1)
        if taus.shape != dev.shape:
            raise ValueError(f"taus and deviations differ in length ({len(taus)} vs {len(dev)})")
        if len(taus) and (np.any(taus <= 0) or np.any(np.diff(taus) <= 0)):
            raise ValueError("taus must be positive and strictly increasing")
        if np.any(~np.isfinite(dev)) or np.any(dev < 0):
            raise ValueError("deviations must be finite and nonnegative")
        object.__setattr__(self, "taus", taus)
        object.__setattr__(self, "deviations", dev)

    def __len__(self) -> int:
        return len(self.taus)


@dataclass(frozen=True)
class NoiseFit:
    noise_density: float
    random_walk: float
    fit_quality: float
    white_region: tuple[float, float] | None = None
    random_walk_region: tuple[float, float] | None = None
    bias_instability: float | None = None

    def to_dict(self) -> dict:
        return {
            "noise_density": self.noise_density,
            "random_walk": None if math.isnan(self.random_walk) else self.random_walk,
            "fit_quality": self.fit_quality,
            "white_region": list(self.white_region) if self.white_region else None,
            "random_walk_region": list(self.random_walk_region) if self.random_walk_region else None,
            "bias_instability": self.bias_instability,
        }


@dataclass(frozen=True)
class SensorNoiseFit:
    """Per-axis fits of one sensor and their mean."""

    axes: dict[str, NoiseFit] = field(default_factory=dict)

    @property
    def noise_density(self) -> float:
        return float(np.mean([f.noise_density for f in self.axes.values()]))

    @property
    def random_walk(self) -> float:
        values = [f.random_walk for f in self.axes.values() if not math.isnan(f.random_walk)]
        return float(np.mean(values)) if values else math.nan

    def to_dict(self) -> dict:
        return {
            "axes": {k: v.to_dict() for k, v in self.axes.items()},
            "mean": {
                "noise_density": self.noise_density,
                "random_walk": None if math.isnan(self.random_walk) else self.random_walk,
            },
        }


def default_cluster_sizes(n_samples: int) -> NDArray[np.int64]:
    """Cluster lengths for a log-spaced grid from 2 samples to ``n_samples / 5``."""
    hi = n_samples / 5.0
    if hi < 2:
        raise ValueError(f"{n_samples} samples are too few for an Allan curve")
    count = int(math.ceil(POINTS_PER_DECADE * math.log10(hi / 2.0))) + 1
    grid = np.logspace(math.log10(2.0), math.log10(hi), max(count, 2))
    return np.unique(np.round(grid).astype(np.int64))


def allan_deviation(
    samples: ArrayLike, rate: float, taus: ArrayLike | None = None, axis: str = ""
) -> AllanCurve:
    """Overlapping Allan deviation.

    Parameters
    ----------
    samples : array_like
        One-dimensional rate or acceleration series.
    rate : float
        Sample rate in Hz.
    taus : array_like, optional
        Cluster times in seconds, rounded to whole samples (duplicates dropped).
        Defaults to 20 points per decade from ``2/rate`` to ``N/(5 rate)``.

    Returns
    -------
    AllanCurve
        Deviations at the realized cluster times ``m / rate``.

    Notes
    -----
    ``sigma^2(m) = mean_k (ybar_{k+m} - ybar_k)^2 / 2`` over all ``N - 2m + 1``
    overlapping pairs of length-``m`` cluster averages.
    """
    x = np.asarray(samples, dtype=float).reshape(-1)
    if not rate > 0:
        raise ValueError(f"rate must be positive, got {rate}")
    if not np.all(np.isfinite(x)):
        raise ValueError("samples must be finite")
    n = len(x)
    if taus is None:
        ms = default_cluster_sizes(n)
    else:
        ms = np.unique(np.round(np.asarray(taus, dtype=float) * rate).astype(np.int64))
        if len(ms) == 0 or ms[0] < 1:
            raise ValueError("every tau must cover at least one sample")
    max_m = n // 2
    if ms[-1] > max_m:
        raise ValueError(
            f"tau = {ms[-1] / rate:g} s needs {2 * ms[-1]} samples but only {n} are available; "
            f"max feasible tau is {max_m / rate:g} s"
        )
    # subtracting the first sample keeps the running sum small; AVAR ignores offsets
    c = np.concatenate([[0.0], np.cumsum(x - x[0])])
    dev = np.empty(len(ms))
    for i, m in enumerate(ms):
        avg = (c[m:] - c[:-m]) / m
        d = avg[m:] - avg[:-m]
        dev[i] = math.sqrt(0.5 * float(np.mean(d * d)))
    return AllanCurve(ms / float(rate), dev, axis)


def _window_slopes(log_tau, log_y, width):
    """Least-squares slope over each run of ``width`` consecutive points (NaN if any is missing)."""
    n = len(log_tau) - width + 1
    out = np.full(max(n, 0), np.nan)
    for i in range(n):
        yy = log_y[i : i + width]
        if np.all(np.isfinite(yy)):
            out[i] = np.polyfit(log_tau[i : i + width], yy, 1)[0]
    return out


def _region(slopes, target, width, taus):
    hits = np.flatnonzero(np.abs(slopes - target) < SLOPE_TOLERANCE)
    if hits.size == 0:
        return None, np.zeros(len(taus), dtype=bool)
    mask = np.zeros(len(taus), dtype=bool)
    for i in hits:
        mask[i : i + width] = True
    idx = np.flatnonzero(mask)
    return (float(taus[idx[0]]), float(taus[idx[-1]])), mask


def _irls(taus, v):
    # avar = a / tau + b tau with a, b >= 0, weighted by the inverse relative
    # std of each point (~ sqrt(edf) / model, edf ~ 1 / tau)
    basis = np.stack([1.0 / taus, taus], axis=1)
    scale = float(np.max(v))
    coef, _ = nnls(basis, v / scale)
    edf_weight = 1.0 / np.sqrt(taus)
    for _ in range(_IRLS_ITERATIONS):
        model = basis @ coef
        if np.any(model <= 0):
            break
        w = edf_weight / model
        w = w / np.max(w)
        coef, _ = nnls(basis * w[:, None], (v / scale) * w)
    return float(coef[0] * scale), float(coef[1] * scale)


def fit_noise_params(curve: AllanCurve) -> NoiseFit:
    """Extract white-noise density and bias random walk from an Allan curve.

    Slope regions are located with a sliding log-log regression over
    ``SLOPE_WINDOW`` points, accepting ``|slope - target| < 0.1``. The white
    region (-1/2) is searched on the raw curve; the random-walk region (+1/2)
    on the curve with the fitted white component removed, where the walk
    dominates. Both coefficients come from one weighted fit of
    ``a / tau + b tau`` and are read off the -1/2 line at 1 s and the
    +1/2 line at 3 s.

    Raises
    ------
    MissingRegionError
        When a target slope is absent; ``partial`` carries the other value.
    """
    taus, dev = curve.taus, curve.deviations
    if len(taus) < 2 or taus[-1] / taus[0] < 100.0 * (1 - 1e-9):
        raise ValueError("curve must span at least two decades of tau")
    if np.any(dev <= 0):
        raise MissingRegionError("white_noise", "curve has zero deviations; no noise to fit")
    width = min(SLOPE_WINDOW, max(3, len(taus) // 4))
    lt, ls = np.log(taus), np.log(dev)
    white_range, white_mask = _region(_window_slopes(lt, ls, width), -0.5, width, taus)
    if white_range is None:
        raise MissingRegionError("white_noise", "no slope -1/2 region found")

    v = dev**2
    a, b = _irls(taus, v)
    if a <= 0:
        raise MissingRegionError("white_noise", "fitted white-noise level is not positive")
    # -1/2 line at 1 s gives density / sqrt(2) under the Nyquist discretization
    density = math.sqrt(2.0) * math.sqrt(a / WHITE_READOFF_TAU)

    walk_part = v - a / taus
    dominated = walk_part > 0.5 * v
    log_walk = np.where(dominated, 0.5 * np.log(np.where(dominated, walk_part, 1.0)), np.nan)
    walk_range, walk_mask = _region(_window_slopes(lt, log_walk, width), 0.5, width, taus)

    flat = np.abs(_window_slopes(lt, ls, width)) < SLOPE_TOLERANCE
    bias_instability = None
    if np.any(flat):
        # flat-bottom convention: sigma_min = sqrt(2 ln 2 / pi) * B
        bias_instability = float(np.min(dev)) / math.sqrt(2.0 * math.log(2.0) / math.pi)

    if walk_range is None or b <= 0:
        model = np.sqrt(a / taus)
        quality = float(np.sqrt(np.mean((ls[white_mask] - np.log(model[white_mask])) ** 2)))
        partial = NoiseFit(density, math.nan, quality, white_range, None, bias_instability)
        raise MissingRegionError("random_walk", "no slope +1/2 region found", partial)

    # +1/2 line K sqrt(tau / 3) crosses K at 3 s
    walk = math.sqrt(b * WALK_READOFF_TAU)
    model = np.sqrt(a / taus + b * taus)
    mask = white_mask | walk_mask
    quality = float(np.sqrt(np.mean((ls[mask] - np.log(model[mask])) ** 2)))
    return NoiseFit(density, walk, quality, white_range, walk_range, bias_instability)


def generate_static_log(
    noise: NoiseModel,
    duration: float,
    seed: int | np.random.Generator | None = None,
    gravity: GravityModel | None = None,
) -> ImuSeries:
    """Simulated stationary recording: level, motionless, gravity-only specific force."""
    rate = noise.sample_rate
    n = int(math.floor(duration * rate + 1e-9)) + 1
    if not duration > 0 or n < MIN_STATIC_SAMPLES:
        raise ValueError(
            f"static log of {duration} s at {rate:g} Hz has {max(n, 0)} samples; "
            f"at least {MIN_STATIC_SAMPLES} are required"
        )
    t = np.arange(n) / rate
    zeros = np.zeros((n, 3))
    still = Trajectory(
        timestamps=t,
        positions=zeros,
        velocities=zeros,
        accelerations=zeros,
        rotations=np.broadcast_to(np.eye(3), (n, 3, 3)),
        yaw_rates=np.zeros(n),
        curvatures=np.zeros(n),
    )
    imu, _ = synthesize(still, noise=noise, gravity=gravity, seed=seed)
    return imu


def allan_from_imu(imu: ImuSeries, rate: float | None = None) -> dict[str, AllanCurve]:
    """Allan curves for the six IMU channels, keyed ``wx .. az``."""
    rate = rate if rate is not None else imu.sample_rate
    out = {}
    for j, name in enumerate(("wx", "wy", "wz")):
        out[name] = allan_deviation(imu.gyro[:, j], rate, axis=name)
    for j, name in enumerate(("ax", "ay", "az")):
        out[name] = allan_deviation(imu.accel[:, j], rate, axis=name)
    return out


def fit_sensor(curves: dict[str, AllanCurve], prefix: str) -> SensorNoiseFit:
    """Fit every axis whose key starts with ``prefix`` (``"w"`` gyro, ``"a"`` accel).

    An axis without a random-walk region keeps its partial fit (walk = NaN);
    the sensor means skip such axes. Raises :class:`MissingRegionError` only
    when no axis yields a value.
    """
    axes: dict[str, NoiseFit] = {}
    missing = None
    for key, curve in curves.items():
        if not key.startswith(prefix):
            continue
        try:
            axes[key] = fit_noise_params(curve)
        except MissingRegionError as exc:
            if exc.partial is None:
                raise
            axes[key] = exc.partial
            missing = exc
    if not axes:
        raise ValueError(f"no curves with prefix {prefix!r}")
    if missing is not None and all(math.isnan(f.random_walk) for f in axes.values()):
        raise MissingRegionError(missing.region, f"no axis of {prefix!r} shows a +1/2 region", SensorNoiseFit(axes))
    return SensorNoiseFit(axes)
