"""Command-line interface: ``scaleobs <subcommand> ...``.

Exit codes: 0 success, 1 runtime or estimation failure (including an
unobservable scale), 2 usage or validation error.

For ``experiment``, values come from the built-in defaults, then the
``--config`` JSON document, then explicit flags (highest precedence).
"""

from __future__ import annotations

import argparse
import json
import os
import sys
from pathlib import Path

import numpy as np

from . import allan, excitation, io, observability, scalest, trajgen
from .core import GravityModel, NoiseModel
from .imusim import synthesize

SEED_ENV = "SCALEOBS_SEED"


class UsageError(ValueError):
    """Invalid flag combination detected after parsing."""


def _seed(value: int | None) -> int:
    if value is not None:
        return value
    env = os.environ.get(SEED_ENV)
    if env is None:
        return 0
    try:
        seed = int(env)
    except ValueError:
        raise UsageError(f"{SEED_ENV}={env!r} is not an integer") from None
    if seed < 0:
        raise UsageError(f"{SEED_ENV} must be nonnegative")
    return seed


def _emit_text(text: str, out: str | None) -> None:
    if out is None or out == "-":
        sys.stdout.write(text)
    else:
        Path(out).write_text(text)


def _add_noise_flags(p: argparse.ArgumentParser) -> None:
    ref = NoiseModel.bno055()
    g = p.add_argument_group("noise model (defaults: BNO055 values)")
    g.add_argument("--accel-density", type=float, default=ref.accel_noise_density, help="m/s^2/sqrt(Hz)")
    g.add_argument("--gyro-density", type=float, default=ref.gyro_noise_density, help="rad/s/sqrt(Hz)")
    g.add_argument("--accel-rw", type=float, default=ref.accel_random_walk, help="m/s^3/sqrt(Hz)")
    g.add_argument("--gyro-rw", type=float, default=ref.gyro_random_walk, help="rad/s^2/sqrt(Hz)")
    g.add_argument("--noiseless", action="store_true", help="zero all noise terms")


def _add_gravity_flags(p: argparse.ArgumentParser) -> None:
    p.add_argument("--gravity", type=float, nargs=3, metavar=("GX", "GY", "GZ"), default=[0.0, 0.0, -9.81])
    p.add_argument("--allow-gravity-override", action="store_true")


def _noise(args, rate: float) -> NoiseModel:
    if args.noiseless:
        return NoiseModel.noiseless(rate)
    return NoiseModel(args.accel_density, args.gyro_density, args.accel_rw, args.gyro_rw, rate)


def _gravity(args) -> GravityModel:
    return GravityModel(np.array(args.gravity), allow_override=args.allow_gravity_override)


def cmd_generate(args) -> int:
    spec = trajgen.TrajectorySpec(
        kind=args.kind,
        speed=args.speed,
        duration=args.duration,
        path_length=args.length,
        sample_rate=args.rate,
        shape=args.shape,
    )
    traj = trajgen.generate(spec)
    if args.out in (None, "-"):
        io.write_trajectory_csv(traj, sys.stdout)
    else:
        io.write_trajectory_csv(traj, args.out)
    return 0


def cmd_simulate(args) -> int:
    traj = io.read_trajectory_csv(args.trajectory)
    rate = 1.0 / traj.dt if len(traj) > 1 else 33.0
    imu, _ = synthesize(traj, noise=_noise(args, rate), gravity=_gravity(args), seed=_seed(args.seed))
    if args.out in (None, "-"):
        io.write_imu_csv(imu, sys.stdout)
    else:
        io.write_imu_csv(imu, args.out)
    return 0


def cmd_excite(args) -> int:
    imu = io.read_imu_csv(args.imu)
    if args.window is not None:
        t, e = excitation.excitation_windowed(imu, args.window)
        target = sys.stdout if args.out in (None, "-") else args.out
        io.write_columns(target, ("t", "excitation_index"), np.column_stack([t, e]))
        return 0
    report = excitation.excitation_index(imu)
    info = None
    if args.trajectory:
        traj = io.read_trajectory_csv(args.trajectory)
        sigma_a = args.accel_density * np.sqrt(imu.sample_rate / 2.0)
        info = excitation.fisher_total(traj, sigma_a)
    _emit_text(io.dumps_json(report.to_dict(info)), args.out)
    return 0


def cmd_observe(args) -> int:
    traj = io.read_trajectory_csv(args.trajectory)
    if args.landmarks:
        landmarks = np.array(json.loads(Path(args.landmarks).read_text()), dtype=float)
    else:
        landmarks = observability.default_landmarks(args.n_landmarks)
    config = observability.ObservabilityConfig(
        landmark_positions=landmarks,
        window_samples=args.window_samples,
        fd_step=args.fd_step,
        rank_tolerance=args.rank_tolerance,
    )
    report = observability.analyze(traj, config, _gravity(args))
    _emit_text(io.dumps_json(report.to_dict()), args.out)
    return 0


def cmd_estimate(args) -> int:
    if args.distances:
        est, truth = io.read_distance_csv(args.distances)
        fit = scalest.estimate_scale_regression(est, truth)
        out = {"scale": fit.scale, "sigma_d_cm": 100.0 * fit.sigma_d}
        if args.running:
            series = scalest.running_scale(est, truth)
            io.write_columns(args.running, ("distance", "scale"), np.column_stack([series.distance_traveled, series.scale]))
        _emit_text(io.dumps_json(out), args.out)
        return 0
    if not (args.trajectory and args.imu):
        raise UsageError("estimate needs --trajectory and --imu, or --distances")
    mono = io.read_trajectory_csv(args.trajectory)
    imu = io.read_imu_csv(args.imu)
    noise = _noise(args, imu.sample_rate)
    est = scalest.estimate_scale_ml(mono, imu, noise, _gravity(args), args.estimate_accel_bias, args.true_scale)
    _emit_text(io.dumps_json(est.to_dict()), args.out)
    return 0


def cmd_allan(args) -> int:
    if (args.imu is None) == (args.static is None):
        raise UsageError("allan needs exactly one of --imu or --static")
    if args.imu:
        imu = io.read_imu_csv(args.imu)
        rate = imu.sample_rate
    else:
        rate = args.rate
        imu = allan.generate_static_log(_noise(args, rate), args.static, seed=_seed(args.seed))
    out_dir = Path(args.out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    curves = allan.allan_from_imu(imu, rate)
    for name, curve in curves.items():
        io.write_allan_csv(curve, out_dir / f"allan_{name}.csv")
    result = {}
    for sensor, prefix in (("gyro", "w"), ("accel", "a")):
        try:
            result[sensor] = allan.fit_sensor(curves, prefix).to_dict()
        except allan.MissingRegionError as exc:
            partial = exc.partial.to_dict() if exc.partial is not None else None
            result[sensor] = {"error": f"missing {exc.region} region", "partial": partial}
    io.write_json(result, out_dir / "noise_fit.json")
    sys.stdout.write(io.dumps_json(result))
    return 0


def _experiment_config(args) -> scalest.ExperimentConfig:
    data: dict = {}
    if args.config:
        try:
            data = json.loads(Path(args.config).read_text())
        except json.JSONDecodeError as exc:
            raise scalest.ConfigError("$", f"invalid JSON ({exc})") from None
        if not isinstance(data, dict):
            raise scalest.ConfigError("$", "config must be a JSON object")
    if args.trials is not None:
        data["trials"] = args.trials
    if args.seed is not None:
        data["seed"] = args.seed
    elif "seed" not in data and os.environ.get(SEED_ENV) is not None:
        data["seed"] = _seed(None)
    if args.out_dir is not None:
        data["output_dir"] = args.out_dir
    return scalest.ExperimentConfig.from_dict(data)


def write_experiment(report: scalest.ExperimentReport, out_dir: Path) -> list[Path]:
    """Write the four experiment artifacts; returns their paths."""
    out_dir.mkdir(parents=True, exist_ok=True)
    paths = [out_dir / n for n in ("excitation_table.csv", "scale_table.csv", "excitation_vs_error.csv", "summary.json")]
    io.write_table_csv(
        paths[0],
        ("trajectory", "sigma_wz", "sigma_ay", "E"),
        [(s.kind.value, s.sigma_yaw_rate, s.sigma_lateral_accel, s.excitation_index) for s in report.summaries],
    )
    rows = []
    for s in report.summaries:
        if s.observable:
            rows.append((s.kind.value, s.scale_mean / report.config.true_scale, s.error_percent, s.sigma_d_cm))
        else:
            rows.append((s.kind.value, excitation.UNOBSERVABLE, excitation.UNOBSERVABLE, s.sigma_d_cm))
    io.write_table_csv(paths[1], ("trajectory", "scale", "error_percent", "sigma_d_cm"), rows)
    io.write_table_csv(
        paths[2],
        ("trajectory", "E", "mean_abs_error", "scale_std", "crlb_std"),
        [
            (
                s.kind.value,
                s.excitation_index,
                s.mean_abs_error if s.observable else excitation.UNOBSERVABLE,
                s.scale_std if s.observable else excitation.UNOBSERVABLE,
                s.crlb_std if s.observable else excitation.UNOBSERVABLE,
            )
            for s in report.summaries
        ],
    )
    io.write_json(report.to_dict(), paths[3])
    return paths


def cmd_experiment(args) -> int:
    config = _experiment_config(args)
    report = scalest.run_experiment(config)
    paths = write_experiment(report, Path(config.output_dir))
    for p in paths:
        sys.stdout.write(f"{p}\n")
    return 0


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="scaleobs", description="Metric-scale observability toolkit")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("generate", help="sample a trajectory to CSV")
    p.add_argument("--kind", required=True, choices=["straight", "circle", "figure8", "figure_eight"])
    p.add_argument("--speed", type=float, default=0.1)
    p.add_argument("--length", type=float, default=None, help="path length (m); must equal speed*duration")
    p.add_argument("--duration", type=float, default=30.0)
    p.add_argument("--rate", type=float, default=33.0)
    p.add_argument("--shape", type=float, default=None, help="circle radius or figure-eight half-width (m)")
    p.add_argument("--out", default=None)
    p.set_defaults(func=cmd_generate)

    p = sub.add_parser("simulate", help="synthesize IMU CSV from a trajectory CSV")
    p.add_argument("--trajectory", required=True)
    p.add_argument("--seed", type=int, default=None, help=f"defaults to ${SEED_ENV}, then 0")
    p.add_argument("--out", default=None)
    _add_noise_flags(p)
    _add_gravity_flags(p)
    p.set_defaults(func=cmd_simulate)

    p = sub.add_parser("excite", help="excitation index of an IMU CSV")
    p.add_argument("--imu", required=True)
    p.add_argument("--window", type=float, default=None, help="trailing window (s); emits a CSV series")
    p.add_argument("--trajectory", default=None, help="add Fisher information of this trajectory")
    p.add_argument("--accel-density", type=float, default=NoiseModel.bno055().accel_noise_density)
    p.add_argument("--out", default=None)
    p.set_defaults(func=cmd_excite)

    p = sub.add_parser("observe", help="observability Gramian rank report")
    p.add_argument("--trajectory", required=True)
    p.add_argument("--landmarks", default=None, help="JSON list of [x, y, z]")
    p.add_argument("--n-landmarks", type=int, default=6)
    p.add_argument("--window-samples", type=int, default=331)
    p.add_argument("--fd-step", type=float, default=1e-6)
    p.add_argument("--rank-tolerance", type=float, default=1e-8)
    p.add_argument("--out", default=None)
    _add_gravity_flags(p)
    p.set_defaults(func=cmd_observe)

    p = sub.add_parser("estimate", help="maximum-likelihood or distance-regression scale")
    p.add_argument("--trajectory", default=None, help="up-to-scale trajectory CSV")
    p.add_argument("--imu", default=None)
    p.add_argument("--distances", default=None, help="CSV estimated,truth for the regression mode")
    p.add_argument("--running", default=None, help="write the running-scale series here")
    p.add_argument("--estimate-accel-bias", action="store_true")
    p.add_argument("--true-scale", type=float, default=1.0)
    p.add_argument("--out", default=None)
    _add_noise_flags(p)
    _add_gravity_flags(p)
    p.set_defaults(func=cmd_estimate)

    p = sub.add_parser("allan", help="Allan deviation curves and noise fit")
    p.add_argument("--imu", default=None, help="static IMU CSV")
    p.add_argument("--static", type=float, default=None, metavar="SECONDS", help="simulate a static log")
    p.add_argument("--rate", type=float, default=33.0)
    p.add_argument("--seed", type=int, default=None)
    p.add_argument("--out-dir", default=".")
    _add_noise_flags(p)
    p.set_defaults(func=cmd_allan)

    p = sub.add_parser("experiment", help="Monte Carlo excitation vs scale-error experiment")
    p.add_argument("--config", default=None, help="JSON config; flags override its fields")
    p.add_argument("--trials", type=int, default=None)
    p.add_argument("--seed", type=int, default=None)
    p.add_argument("--out-dir", default=None)
    p.set_defaults(func=cmd_experiment)
    return parser


def main(argv: list[str] | None = None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        return args.func(args)
    except (scalest.ScaleUnobservableError, allan.MissingRegionError) as exc:
        print(f"scaleobs: error: {exc}", file=sys.stderr)
        return 1
    except (UsageError, ValueError) as exc:
        print(f"scaleobs {args.command}: error: {exc}", file=sys.stderr)
        return 2
    except (OSError, RuntimeError, np.linalg.LinAlgError) as exc:
        print(f"scaleobs: error: {exc}", file=sys.stderr)
        return 1


if __name__ == "__main__":  # pragma: no cover
    sys.exit(main())
