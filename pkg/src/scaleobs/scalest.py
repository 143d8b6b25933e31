"""Metric-scale estimation from up-to-scale kinematics and from distance logs.

The monocular input is simulated as ground truth shrunk by ``1 / s_true``, so
the accelerometer model reads ``a_m = R^T (s * a_mono - g) + b_a + n`` and the
maximum-likelihood scale solves a small linear least-squares problem.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import NamedTuple, Sequence

import numpy as np
from numpy.typing import ArrayLike, NDArray

from .core import GravityModel, NoiseModel, per_sample_noise_std
from .excitation import ExcitationReport, excitation_index, fisher_total
from .imusim import ImuSample, ImuSeries, apply_scale, synthesize
from .trajgen import Trajectory, TrajectoryKind, TrajectorySpec, cumulative_arc_length, generate

MAX_ITERATIONS = 100
STEP_TOLERANCE = 1e-10
MIN_INFORMATION = 1.0
MIN_RUNNING_POINTS = 4
DISTANCE_LOG_RATE = 2.0


class ScaleUnobservableError(RuntimeError):
    """The trajectory carries (almost) no information about the metric scale."""

    def __init__(self, message: str, information: float = 0.0):
        super().__init__(message)
        self.information = information


class DegenerateRegressionError(ValueError):
    """Distance regression with constant ground truth."""


@dataclass(frozen=True)
class ScaleEstimate:
    scale: float
    scale_error_percent: float
    residual_std: float
    crlb_std: float
    converged: bool
    iterations: int
    true_scale: float = 1.0
    accel_bias: tuple[float, float, float] | None = None

    def to_dict(self) -> dict:
        return {
            "scale": self.scale,
            "scale_error_percent": self.scale_error_percent,
            "residual_std": self.residual_std,
            "crlb_std": self.crlb_std,
            "converged": self.converged,
            "iterations": self.iterations,
            "true_scale": self.true_scale,
            "accel_bias": list(self.accel_bias) if self.accel_bias is not None else None,
        }


class DistanceRegression(NamedTuple):
    scale: float
    sigma_d: float


@dataclass(frozen=True)
class RunningScaleSeries:
    distance_traveled: NDArray[np.float64]
    scale: NDArray[np.float64]

    def __post_init__(self) -> None:
        d = np.asarray(self.distance_traveled, dtype=float)
        s = np.asarray(self.scale, dtype=float)
        if d.shape != s.shape:
            raise ValueError("distance and scale series differ in length")
        if np.any(np.diff(d) < 0):
            raise ValueError("distance_traveled must be nondecreasing")
        object.__setattr__(self, "distance_traveled", d)
        object.__setattr__(self, "scale", s)

    def __len__(self) -> int:
        return len(self.scale)

    def settling_distance(self, reference: float, band: float = 0.01) -> float:
        """First distance after which the series stays within ``reference * (1 +/- band)``.

        ``inf`` when the last value is outside the band.
        """
        inside = np.abs(self.scale - reference) <= band * abs(reference)
        if len(inside) == 0 or not inside[-1]:
            return math.inf
        outside = np.flatnonzero(~inside)
        first = 0 if outside.size == 0 else int(outside[-1]) + 1
        return float(self.distance_traveled[first])


def _as_series(imu: ImuSeries | Sequence[ImuSample]) -> ImuSeries:
    if isinstance(imu, ImuSeries):
        return imu
    samples = list(imu)
    if not samples:
        raise ValueError("no IMU samples")
    return ImuSeries(
        np.array([s.timestamp for s in samples]),
        np.array([s.angular_velocity_body for s in samples]),
        np.array([s.specific_force_body for s in samples]),
    )


def estimate_scale_ml(
    mono_kinematics: Trajectory,
    imu: ImuSeries | Sequence[ImuSample],
    noise: NoiseModel,
    gravity: GravityModel | None = None,
    estimate_accel_bias: bool = False,
    true_scale: float = 1.0,
) -> ScaleEstimate:
    """Maximum-likelihood scale from accelerometer readings.

    Minimizes ``sum |a_m - R^T (s a_mono - g) - b_a|^2`` over ``s`` (and the
    constant bias ``b_a`` when ``estimate_accel_bias``) by Gauss-Newton from
    ``s = 1, b_a = 0``.

    Raises
    ------
    ScaleUnobservableError
        When the integrated information ``sum |a_mono|^2 dt / sigma_a^2`` is
        below one. With a zero noise density the measurements are exact and
        only a vanishing acceleration is unobservable.
    """
    imu = _as_series(imu)
    gravity = gravity if gravity is not None else GravityModel()
    n = len(mono_kinematics)
    if n < 2 or len(imu) != n:
        raise ValueError(f"need matching kinematics and IMU series of >= 2 samples ({n} vs {len(imu)})")
    if not np.allclose(mono_kinematics.timestamps, imu.timestamps, rtol=0, atol=1e-9):
        raise ValueError("kinematics and IMU timestamps are not aligned")
    if not true_scale > 0:
        raise ValueError("true_scale must be positive")

    sigma_a = per_sample_noise_std(noise)[0]
    dt = mono_kinematics.dt
    if sigma_a > 0:
        integrated = fisher_total(mono_kinematics, sigma_a).total
        if integrated < MIN_INFORMATION:
            raise ScaleUnobservableError(
                f"scale is unobservable: information {integrated:.3g} is below {MIN_INFORMATION}", integrated
            )
        # density sigma_a sqrt(dt) turns the time integral into the per-sample sum
        info = fisher_total(mono_kinematics, sigma_a * math.sqrt(dt))
    elif not np.any(mono_kinematics.accelerations):
        raise ScaleUnobservableError("trajectory has zero acceleration; scale is unobservable")

    R = mono_kinematics.rotations
    u_body = np.einsum("nji,nj->ni", R, mono_kinematics.accelerations)
    g_body = np.einsum("nji,j->ni", R, gravity.gravity_world)
    target = imu.accel + g_body  # a_m + R^T g = s R^T a_mono + b_a

    dim = 4 if estimate_accel_bias else 1
    theta = np.zeros(dim)
    theta[0] = 1.0
    # stacked Jacobian of the prediction; constant because the model is linear
    J = np.zeros((n, 3, dim))
    J[:, :, 0] = u_body
    if estimate_accel_bias:
        J[:, :, 1:] = np.eye(3)
    Jf = J.reshape(-1, dim)
    H = Jf.T @ Jf
    if np.linalg.cond(H) > 1e14:
        raise ScaleUnobservableError("normal equations are singular; scale and bias are not separable")

    converged = False
    iterations = 0
    for iterations in range(1, MAX_ITERATIONS + 1):
        resid = (target - np.einsum("nid,d->ni", J, theta)).reshape(-1)
        step = np.linalg.solve(H, Jf.T @ resid)
        theta = theta + step
        if not np.all(np.isfinite(theta)) or theta[0] <= 0:
            break
        if abs(step[0]) < STEP_TOLERANCE and np.max(np.abs(step)) < STEP_TOLERANCE:
            converged = True
            break

    resid = target - np.einsum("nid,d->ni", J, theta)
    residual_std = float(np.sqrt(np.mean(resid**2)))
    if sigma_a > 0:
        if estimate_accel_bias:
            crlb = float(math.sqrt(np.linalg.inv(H / sigma_a**2)[0, 0]))
        else:
            crlb = info.crlb_std
    else:
        crlb = 0.0
    s = float(theta[0])
    return ScaleEstimate(
        scale=s,
        scale_error_percent=100.0 * (s - true_scale) / true_scale,
        residual_std=residual_std,
        crlb_std=crlb,
        converged=converged,
        iterations=iterations,
        true_scale=float(true_scale),
        accel_bias=tuple(float(x) for x in theta[1:]) if estimate_accel_bias else None,
    )


def _check_pairs(estimated, truth):
    e = np.asarray(estimated, dtype=float).reshape(-1)
    t = np.asarray(truth, dtype=float).reshape(-1)
    if e.shape != t.shape:
        raise ValueError(f"distance series differ in length ({len(e)} vs {len(t)})")
    if len(e) < 2:
        raise ValueError("regression needs at least 2 distance pairs")
    if not (np.all(np.isfinite(e)) and np.all(np.isfinite(t))):
        raise ValueError("distances must be finite")
    return e, t


def estimate_scale_regression(estimated_distances: ArrayLike, truth_distances: ArrayLike) -> DistanceRegression:
    """Affine least-squares fit ``estimated = scale * truth + c``.

    Returns the slope and the population standard deviation of the fit
    residuals (metres).
    """
    e, t = _check_pairs(estimated_distances, truth_distances)
    return _regress(e, t)


def _regress(e, t):
    tc = t - t.mean()
    sxx = float(tc @ tc)
    if sxx <= 1e-24 * max(1.0, float(t @ t)):
        raise DegenerateRegressionError("ground-truth distances are constant")
    ec = e - e.mean()
    slope = float(tc @ ec) / sxx
    resid = ec - slope * tc
    return DistanceRegression(slope, float(np.sqrt(np.mean(resid**2))))


def running_scale(
    estimated_distances: ArrayLike, truth_distances: ArrayLike, min_points: int = MIN_RUNNING_POINTS
) -> RunningScaleSeries:
    """Regression slope over every prefix of at least ``min_points`` pairs.

    Prefixes whose ground truth is still constant are skipped; the last entry
    is always the full-series :func:`estimate_scale_regression` slope.
    """
    e, t = _check_pairs(estimated_distances, truth_distances)
    if len(e) < min_points:
        raise ValueError(f"running scale needs at least {min_points} pairs, got {len(e)}")
    full = _regress(e, t)
    dist, scale = [], []
    for k in range(min_points, len(e)):
        try:
            fit = _regress(e[:k], t[:k])
        except DegenerateRegressionError:
            continue
        dist.append(t[k - 1])
        scale.append(fit.scale)
    dist.append(t[-1])
    scale.append(full.scale)
    return RunningScaleSeries(np.array(dist), np.array(scale))


def log_indices(timestamps: NDArray[np.float64], log_rate: float = DISTANCE_LOG_RATE) -> NDArray[np.int64]:
    """Sample indices nearest to a ``log_rate`` clock starting at the first sample."""
    t = np.asarray(timestamps, dtype=float)
    ticks = t[0] + np.arange(int(math.floor((t[-1] - t[0]) * log_rate + 1e-9)) + 1) / log_rate
    idx = np.searchsorted(t, ticks - 1e-9)
    return np.minimum(idx, len(t) - 1)


def simulate_distance_log(
    truth: Trajectory,
    imu: ImuSeries,
    noise: NoiseModel,
    true_scale: float,
    gravity: GravityModel | None = None,
    log_rate: float = DISTANCE_LOG_RATE,
) -> tuple[NDArray[np.float64], NDArray[np.float64]]:
    """Estimated versus true cumulative distance, logged at ``log_rate``.

    The estimator starts from the monocular scale (1) and, at each log tick,
    re-solves the maximum-likelihood scale on the data seen so far, holding the
    previous value while the scale is still unobservable. The estimated
    distance is that scale times the monocular path length.
    """
    mono = apply_scale(truth, 1.0 / true_scale)
    d_mono = cumulative_arc_length(mono)
    d_true = cumulative_arc_length(truth)
    idx = log_indices(truth.timestamps, log_rate)
    current = 1.0
    est = np.empty(len(idx))
    for j, k in enumerate(idx):
        if k >= 1:
            try:
                current = estimate_scale_ml(mono[: k + 1], imu[: k + 1], noise, gravity).scale
            except ScaleUnobservableError:
                pass
        est[j] = current * d_mono[k]
    return est, d_true[idx]


# ---------------------------------------------------------------------------
# Monte Carlo experiment

ALL_KINDS = tuple(TrajectoryKind)


class ConfigError(ValueError):
    """Invalid experiment configuration; ``path`` names the offending field."""

    def __init__(self, path: str, message: str):
        super().__init__(f"{path}: {message}")
        self.path = path


@dataclass(frozen=True)
class ExperimentConfig:
    kinds: tuple[TrajectoryKind, ...] = ALL_KINDS
    shapes: dict[str, float] = field(default_factory=dict)
    speed: float = 0.1
    path_length: float = 3.0
    duration: float = 30.0
    sample_rate: float = 33.0
    noise: NoiseModel = field(default_factory=NoiseModel.bno055)
    gravity: tuple[float, float, float] = (0.0, 0.0, -9.81)
    allow_gravity_override: bool = False
    true_scale: float = 1.0
    trials: int = 200
    seed: int = 42
    estimate_accel_bias: bool = False
    log_rate: float = DISTANCE_LOG_RATE
    output_dir: str = "."

    _FIELDS = (
        "kinds", "shapes", "speed", "path_length", "duration", "sample_rate", "noise", "gravity",
        "allow_gravity_override", "true_scale", "trials", "seed", "estimate_accel_bias",
        "log_rate", "output_dir",
    )

    @classmethod
    def from_dict(cls, data: dict) -> "ExperimentConfig":
        """Build and validate a config, reporting errors with dotted field paths."""
        if not isinstance(data, dict):
            raise ConfigError("$", "config must be a JSON object")
        unknown = sorted(set(data) - set(cls._FIELDS))
        if unknown:
            raise ConfigError(unknown[0], "unknown field")
        kw: dict = {}
        if "kinds" in data:
            if not isinstance(data["kinds"], list) or not data["kinds"]:
                raise ConfigError("kinds", "must be a non-empty list")
            kinds = []
            for i, k in enumerate(data["kinds"]):
                try:
                    kinds.append(TrajectoryKind.parse(k))
                except ValueError as exc:
                    raise ConfigError(f"kinds[{i}]", str(exc)) from None
            if len(set(kinds)) != len(kinds):
                raise ConfigError("kinds", "duplicate trajectory kind")
            kw["kinds"] = tuple(kinds)
        if "shapes" in data:
            if not isinstance(data["shapes"], dict):
                raise ConfigError("shapes", "must be an object")
            shapes = {}
            for k, v in data["shapes"].items():
                try:
                    key = TrajectoryKind.parse(k).value
                except ValueError as exc:
                    raise ConfigError(f"shapes.{k}", str(exc)) from None
                shapes[key] = _positive(v, f"shapes.{k}")
            kw["shapes"] = shapes
        for name in ("speed", "path_length", "duration", "sample_rate", "true_scale", "log_rate"):
            if name in data:
                kw[name] = _positive(data[name], name)
        if "noise" in data:
            noise = data["noise"]
            if not isinstance(noise, dict):
                raise ConfigError("noise", "must be an object")
            bad = sorted(set(noise) - set(NoiseModel().to_dict()))
            if bad:
                raise ConfigError(f"noise.{bad[0]}", "unknown field")
            for k, v in noise.items():
                if not _is_number(v) or v < 0:
                    raise ConfigError(f"noise.{k}", "must be a nonnegative number")
            merged = {**NoiseModel.bno055().to_dict(), **noise}
            if "sample_rate" not in noise:
                merged["sample_rate"] = kw.get("sample_rate", data.get("sample_rate", 33.0))
            kw["noise"] = NoiseModel(**merged)
        if "gravity" in data:
            g = data["gravity"]
            if not isinstance(g, list) or len(g) != 3 or not all(_is_number(x) for x in g):
                raise ConfigError("gravity", "must be a list of 3 numbers")
            kw["gravity"] = tuple(float(x) for x in g)
        for name in ("allow_gravity_override", "estimate_accel_bias"):
            if name in data:
                if not isinstance(data[name], bool):
                    raise ConfigError(name, "must be true or false")
                kw[name] = data[name]
        if "trials" in data:
            t = data["trials"]
            if isinstance(t, bool) or not isinstance(t, int) or t < 1:
                raise ConfigError("trials", "must be a positive integer")
            kw["trials"] = t
        if "seed" in data:
            s = data["seed"]
            if isinstance(s, bool) or not isinstance(s, int) or s < 0:
                raise ConfigError("seed", "must be a nonnegative integer")
            kw["seed"] = s
        if "output_dir" in data:
            if not isinstance(data["output_dir"], str):
                raise ConfigError("output_dir", "must be a string")
            kw["output_dir"] = data["output_dir"]
        if "noise" not in kw and "sample_rate" in kw:
            kw["noise"] = NoiseModel.bno055(kw["sample_rate"])
        cfg = cls(**kw)
        cfg.validate()
        return cfg

    def validate(self) -> None:
        if self.noise.sample_rate != self.sample_rate:
            raise ConfigError("noise.sample_rate", "must equal sample_rate")
        try:
            self.gravity_model()
        except ValueError as exc:
            raise ConfigError("gravity", str(exc)) from None
        for kind in self.kinds:
            try:
                self.spec(kind)
            except ValueError as exc:
                raise ConfigError("path_length", str(exc)) from None

    def gravity_model(self) -> GravityModel:
        return GravityModel(np.array(self.gravity), allow_override=self.allow_gravity_override)

    def spec(self, kind: TrajectoryKind) -> TrajectorySpec:
        return TrajectorySpec(
            kind=kind,
            speed=self.speed,
            duration=self.duration,
            path_length=self.path_length,
            sample_rate=self.sample_rate,
            shape=self.shapes.get(kind.value),
        )

    def to_dict(self) -> dict:
        return {
            "kinds": [k.value for k in self.kinds],
            "shapes": dict(sorted(self.shapes.items())),
            "speed": self.speed,
            "path_length": self.path_length,
            "duration": self.duration,
            "sample_rate": self.sample_rate,
            "noise": self.noise.to_dict(),
            "gravity": list(self.gravity),
            "allow_gravity_override": self.allow_gravity_override,
            "true_scale": self.true_scale,
            "trials": self.trials,
            "seed": self.seed,
            "estimate_accel_bias": self.estimate_accel_bias,
            "log_rate": self.log_rate,
            "output_dir": self.output_dir,
        }


def _is_number(v) -> bool:
    return isinstance(v, (int, float)) and not isinstance(v, bool) and math.isfinite(v)


def _positive(v, path: str) -> float:
    if not _is_number(v) or v <= 0:
        raise ConfigError(path, "must be a positive number")
    return float(v)


@dataclass(frozen=True)
class TrialResult:
    kind: TrajectoryKind
    trial: int
    excitation: ExcitationReport
    estimate: ScaleEstimate | None
    distance_scale: float
    sigma_d: float

    @property
    def observable(self) -> bool:
        return self.estimate is not None


@dataclass(frozen=True)
class KindSummary:
    kind: TrajectoryKind
    trials: int
    unobservable_trials: int
    sigma_yaw_rate: float
    sigma_lateral_accel: float
    excitation_index: float
    excitation_index_std: float
    fisher_total: float
    crlb_std: float
    scale_mean: float
    scale_std: float
    mean_abs_error: float
    error_percent: float
    distance_scale: float
    sigma_d_cm: float

    @property
    def observable(self) -> bool:
        return self.unobservable_trials == 0

    def to_dict(self) -> dict:
        def num(x):
            return x if math.isfinite(x) else None

        return {
            "kind": self.kind.value,
            "trials": self.trials,
            "unobservable_trials": self.unobservable_trials,
            "observable": self.observable,
            "sigma_yaw_rate": self.sigma_yaw_rate,
            "sigma_lateral_accel": self.sigma_lateral_accel,
            "excitation_index": self.excitation_index,
            "excitation_index_std": self.excitation_index_std,
            "fisher_total": self.fisher_total,
            "crlb_std": num(self.crlb_std),
            "scale_mean": num(self.scale_mean),
            "scale_std": num(self.scale_std),
            "mean_abs_error": num(self.mean_abs_error),
            "error_percent": num(self.error_percent),
            "distance_scale": self.distance_scale,
            "sigma_d_cm": self.sigma_d_cm,
        }


@dataclass(frozen=True)
class ExperimentReport:
    config: ExperimentConfig
    summaries: tuple[KindSummary, ...]
    trials: tuple[TrialResult, ...] = ()

    def summary(self, kind: TrajectoryKind | str) -> KindSummary:
        kind = TrajectoryKind.parse(kind)
        for s in self.summaries:
            if s.kind is kind:
                return s
        raise KeyError(kind.value)

    def _ordered(self):
        return sorted(self.summaries, key=lambda s: s.excitation_index)

    @property
    def excitation_order(self) -> list[str]:
        return [s.kind.value for s in self._ordered()]

    @property
    def error_order(self) -> list[str]:
        """Kinds by decreasing mean absolute error (unobservable first)."""
        return [s.kind.value for s in sorted(self.summaries, key=lambda s: -s.mean_abs_error)]

    @property
    def ordering_matches(self) -> bool:
        """Mean error strictly decreases as mean excitation increases."""
        errors = [s.mean_abs_error for s in self._ordered()]
        return all(a > b for a, b in zip(errors, errors[1:]))

    def to_dict(self) -> dict:
        config = self.config.to_dict()
        # the output location is not part of the result
        config.pop("output_dir")
        return {
            "config": config,
            "summaries": [s.to_dict() for s in self.summaries],
            "excitation_order": self.excitation_order,
            "error_order": self.error_order,
            "ordering_matches": self.ordering_matches,
        }


def trial_seed(seed: int, kind: TrajectoryKind, trial: int) -> np.random.SeedSequence:
    """Independent stream per (kind, trial); stable under reordering or parallel dispatch."""
    return np.random.SeedSequence(seed, spawn_key=(ALL_KINDS.index(kind), trial))


def run_trial(config: ExperimentConfig, kind: TrajectoryKind, trial: int, truth: Trajectory | None = None) -> TrialResult:
    truth = truth if truth is not None else generate(config.spec(kind))
    gravity = config.gravity_model()
    rng = np.random.default_rng(trial_seed(config.seed, kind, trial))
    imu, _ = synthesize(truth, noise=config.noise, gravity=gravity, seed=rng)
    excitation = excitation_index(imu)
    mono = apply_scale(truth, 1.0 / config.true_scale)
    try:
        estimate = estimate_scale_ml(
            mono, imu, config.noise, gravity, config.estimate_accel_bias, config.true_scale
        )
    except ScaleUnobservableError:
        estimate = None
    est_d, true_d = simulate_distance_log(truth, imu, config.noise, config.true_scale, gravity, config.log_rate)
    fit = estimate_scale_regression(est_d, true_d)
    return TrialResult(kind, trial, excitation, estimate, fit.scale, fit.sigma_d)


def _summarize(config: ExperimentConfig, kind: TrajectoryKind, truth: Trajectory, results: list[TrialResult]) -> KindSummary:
    sigma_a = per_sample_noise_std(config.noise)[0]
    mono = apply_scale(truth, 1.0 / config.true_scale)
    if sigma_a > 0:
        info = fisher_total(mono, sigma_a * math.sqrt(mono.dt))
        fisher, crlb = info.total, info.crlb_std
    else:
        exact = bool(np.any(mono.accelerations))
        fisher, crlb = (math.inf, 0.0) if exact else (0.0, math.inf)
    observable = [r for r in results if r.observable]
    n_unobs = len(results) - len(observable)
    if n_unobs:
        mean_s = std_s = err_pct = math.nan
        mean_abs = math.inf
    else:
        s = np.array([r.estimate.scale for r in observable])
        mean_s = float(np.mean(s))
        std_s = float(np.std(s, ddof=1)) if len(s) > 1 else 0.0
        mean_abs = float(np.mean(np.abs(s - config.true_scale)))
        err_pct = 100.0 * (mean_s - config.true_scale) / config.true_scale
    E = np.array([r.excitation.excitation_index for r in results])
    return KindSummary(
        kind=kind,
        trials=len(results),
        unobservable_trials=n_unobs,
        sigma_yaw_rate=float(np.mean([r.excitation.sigma_yaw_rate for r in results])),
        sigma_lateral_accel=float(np.mean([r.excitation.sigma_lateral_accel for r in results])),
        excitation_index=float(np.mean(E)),
        excitation_index_std=float(np.std(E, ddof=1)) if len(E) > 1 else 0.0,
        fisher_total=float(fisher),
        crlb_std=float(crlb),
        scale_mean=mean_s,
        scale_std=std_s,
        mean_abs_error=mean_abs,
        error_percent=err_pct,
        distance_scale=float(np.mean([r.distance_scale for r in results])),
        sigma_d_cm=100.0 * float(np.mean([r.sigma_d for r in results])),
    )


def run_experiment(config: ExperimentConfig, keep_trials: bool = False) -> ExperimentReport:
    """Monte Carlo comparison of trajectory kinds (serial; see :func:`trial_seed`)."""
    summaries = []
    all_trials: list[TrialResult] = []
    for kind in config.kinds:
        truth = generate(config.spec(kind))
        results = [run_trial(config, kind, i, truth) for i in range(config.trials)]
        summaries.append(_summarize(config, kind, truth, results))
        if keep_trials:
            all_trials.extend(results)
    return ExperimentReport(config, tuple(summaries), tuple(all_trials))
