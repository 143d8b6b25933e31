"""scikit-learn style wrappers around the functional API.

Trajectory generation and observability analysis stay functional; these
classes cover the fit/transform/predict shaped parts so they compose with
``clone``, ``get_params`` and pipelines.
"""

from __future__ import annotations

import numpy as np
from sklearn.base import BaseEstimator, RegressorMixin, TransformerMixin
from sklearn.utils.validation import check_is_fitted

from . import allan
from ._validation import check_channels, check_distances, check_imu_matrix, check_scale_design
from .core import GravityModel, NoiseModel
from .excitation import excitation_index, excitation_windowed
from .imusim import ImuSeries
from .scalest import estimate_scale_ml, estimate_scale_regression
from .trajgen import Trajectory


class ExcitationIndex(TransformerMixin, BaseEstimator):
    """Excitation index of IMU matrices ``t, wx, wy, wz, ax, ay, az``.

    ``transform`` returns ``[[sigma_wz, sigma_ay, E]]`` for the whole series,
    or ``[t, E]`` rows for a trailing window when ``window_seconds`` is set.
    """

    def __init__(self, window_seconds: float | None = None):
        self.window_seconds = window_seconds

    def fit(self, X, y=None):
        X = check_imu_matrix(X)
        self.n_features_in_ = X.shape[1]
        self.sample_rate_ = ImuSeries.from_array(X).sample_rate
        return self

    def transform(self, X):
        check_is_fitted(self, "sample_rate_")
        imu = ImuSeries.from_array(check_imu_matrix(X))
        if self.window_seconds is None:
            r = excitation_index(imu)
            return np.array([[r.sigma_yaw_rate, r.sigma_lateral_accel, r.excitation_index]])
        t, e = excitation_windowed(imu, self.window_seconds)
        return np.column_stack([t, e])


class AllanNoiseFit(BaseEstimator):
    """Per-channel white-noise density and random walk from a static log."""

    def __init__(self, sample_rate: float = 33.0):
        self.sample_rate = sample_rate

    def fit(self, X, y=None):
        X = check_channels(X, min_samples=allan.MIN_STATIC_SAMPLES)
        if not self.sample_rate > 0:
            raise ValueError("sample_rate must be positive")
        curves, fits = [], []
        for j in range(X.shape[1]):
            curve = allan.allan_deviation(X[:, j], self.sample_rate, axis=str(j))
            try:
                fit = allan.fit_noise_params(curve)
            except allan.MissingRegionError as exc:
                if exc.partial is None:
                    raise
                fit = exc.partial
            curves.append(curve)
            fits.append(fit)
        self.n_features_in_ = X.shape[1]
        self.curves_ = curves
        self.fits_ = fits
        self.noise_density_ = np.array([f.noise_density for f in fits])
        self.random_walk_ = np.array([f.random_walk for f in fits])
        return self


class MLScaleEstimator(RegressorMixin, BaseEstimator):
    """Maximum-likelihood metric scale.

    ``X`` rows are ``[a_mono (3), R (9, row-major)]``: up-to-scale world
    acceleration and body-to-world attitude. ``y`` rows are accelerometer
    readings. ``predict`` returns the fitted specific force.
    """

    def __init__(
        self,
        sample_rate: float = 33.0,
        accel_noise_density: float = 3.31e-3,
        gravity: tuple[float, float, float] = (0.0, 0.0, -9.81),
        estimate_accel_bias: bool = False,
    ):
        self.sample_rate = sample_rate
        self.accel_noise_density = accel_noise_density
        self.gravity = gravity
        self.estimate_accel_bias = estimate_accel_bias

    def _gravity(self) -> GravityModel:
        return GravityModel(np.asarray(self.gravity, dtype=float))

    def fit(self, X, y):
        X, R, y = check_scale_design(X, y)
        n = len(X)
        t = np.arange(n) / float(self.sample_rate)
        zeros = np.zeros((n, 3))
        mono = Trajectory(t, zeros, zeros, X[:, :3], R, np.zeros(n), np.zeros(n))
        imu = ImuSeries(t, zeros, y)
        noise = NoiseModel(accel_noise_density=self.accel_noise_density, sample_rate=self.sample_rate)
        est = estimate_scale_ml(mono, imu, noise, self._gravity(), self.estimate_accel_bias)
        self.n_features_in_ = X.shape[1]
        self.estimate_ = est
        self.scale_ = est.scale
        self.crlb_std_ = est.crlb_std
        self.accel_bias_ = np.array(est.accel_bias) if est.accel_bias is not None else np.zeros(3)
        return self

    def predict(self, X):
        check_is_fitted(self, "scale_")
        X, R = check_scale_design(X)
        g = self._gravity().gravity_world
        return np.einsum("nji,nj->ni", R, self.scale_ * X[:, :3] - g) + self.accel_bias_


class DistanceScaleRegressor(RegressorMixin, BaseEstimator):
    """Affine fit of estimated (``y``) against ground-truth (``X``) cumulative distance."""

    def fit(self, X, y):
        truth, est = check_distances(X, y)
        fit = estimate_scale_regression(est, truth)
        self.n_features_in_ = 1
        self.scale_ = fit.scale
        self.sigma_d_ = fit.sigma_d
        self.intercept_ = float(np.mean(est) - fit.scale * np.mean(truth))
        return self

    def predict(self, X):
        check_is_fitted(self, "scale_")
        X = check_channels(X, min_samples=1)
        if X.shape[1] != 1:
            raise ValueError("X must hold a single distance column")
        return self.scale_ * X[:, 0] + self.intercept_


__all__ = ["ExcitationIndex", "AllanNoiseFit", "MLScaleEstimator", "DistanceScaleRegressor"]
