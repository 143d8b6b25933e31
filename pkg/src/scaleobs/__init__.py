"""Simulation and analysis toolkit for metric-scale observability in monocular visual-inertial odometry."""

from .core import GravityModel, NavState, NoiseModel, per_sample_noise_std, skew, so3_exp, so3_log
from .excitation import ExcitationReport, ScaleInformation, excitation_index, fisher_total
from .imusim import ImuSample, ImuSeries, apply_scale, integrate, synthesize
from .observability import ObservabilityConfig, RankReport, build_gramian, rank_report
from .scalest import (
    ExperimentConfig,
    ScaleEstimate,
    ScaleUnobservableError,
    estimate_scale_ml,
    estimate_scale_regression,
    run_experiment,
    running_scale,
)
from .trajgen import KinematicSample, Trajectory, TrajectoryKind, TrajectorySpec, generate

__version__ = "0.1.0"

__all__ = [
    "ExcitationReport",
    "ExperimentConfig",
    "GravityModel",
    "ImuSample",
    "ImuSeries",
    "KinematicSample",
    "NavState",
    "NoiseModel",
    "ObservabilityConfig",
    "RankReport",
    "ScaleEstimate",
    "ScaleInformation",
    "ScaleUnobservableError",
    "Trajectory",
    "TrajectoryKind",
    "TrajectorySpec",
    "apply_scale",
    "build_gramian",
    "estimate_scale_ml",
    "estimate_scale_regression",
    "excitation_index",
    "fisher_total",
    "generate",
    "integrate",
    "per_sample_noise_std",
    "rank_report",
    "run_experiment",
    "running_scale",
    "skew",
    "so3_exp",
    "so3_log",
    "synthesize",
]
