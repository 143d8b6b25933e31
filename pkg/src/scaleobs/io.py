"""CSV and JSON file formats.

Floats are written with ``repr`` so every file round-trips bit for bit.
"""

from __future__ import annotations

import csv
import io
import json
import math
from pathlib import Path
from typing import Iterable, TextIO

import numpy as np

from .allan import AllanCurve
from .core import rot_z_batch
from .imusim import ImuSeries
from .trajgen import Trajectory

TRAJECTORY_HEADER = ("t", "px", "py", "pz", "vx", "vy", "vz", "ax", "ay", "az", "yaw_rate", "curvature")
IMU_HEADER = ("t", "wx", "wy", "wz", "ax", "ay", "az")
ALLAN_HEADER = ("tau", "sigma")
DISTANCE_HEADER = ("estimated", "truth")


class CsvParseError(ValueError):
    """Malformed CSV content; ``line`` is the 1-based line number."""

    def __init__(self, line: int, message: str, source: str = "<csv>"):
        super().__init__(f"{source}:{line}: {message}")
        self.line = line
        self.source = source


def _fmt(x: float) -> str:
    return repr(float(x))


def write_columns(target: str | Path | TextIO, header: Iterable[str], rows: np.ndarray) -> None:
    buf = io.StringIO()
    writer = csv.writer(buf, lineterminator="\n")
    writer.writerow(header)
    for row in rows:
        writer.writerow([_fmt(x) for x in row])
    text = buf.getvalue()
    if isinstance(target, (str, Path)):
        Path(target).write_text(text)
    else:
        target.write(text)


def _read_rows(source: str | Path | TextIO, header: tuple[str, ...]) -> np.ndarray:
    if isinstance(source, (str, Path)):
        name = str(source)
        text = Path(source).read_text()
    else:
        name = getattr(source, "name", "<stream>")
        text = source.read()
    reader = csv.reader(io.StringIO(text))
    try:
        first = next(reader)
    except StopIteration:
        raise CsvParseError(1, "empty file; expected a header", name) from None
    if tuple(c.strip() for c in first) != header:
        raise CsvParseError(1, f"expected header {','.join(header)}, got {','.join(first)}", name)
    rows = []
    for row in reader:
        line = reader.line_num
        if not row or all(not c.strip() for c in row):
            continue
        if len(row) != len(header):
            raise CsvParseError(line, f"expected {len(header)} fields, got {len(row)}", name)
        try:
            values = [float(c) for c in row]
        except ValueError:
            raise CsvParseError(line, f"non-numeric field in {row!r}", name) from None
        if not all(math.isfinite(v) for v in values):
            raise CsvParseError(line, "non-finite value", name)
        rows.append(values)
    if not rows:
        raise CsvParseError(max(reader.line_num, 1), "no data rows", name)
    return np.array(rows, dtype=float)


def write_trajectory_csv(traj: Trajectory, target: str | Path | TextIO) -> None:
    rows = np.column_stack(
        [traj.timestamps, traj.positions, traj.velocities, traj.accelerations, traj.yaw_rates, traj.curvatures]
    )
    write_columns(target, TRAJECTORY_HEADER, rows)


def read_trajectory_csv(source: str | Path | TextIO) -> Trajectory:
    """Parse a trajectory CSV; attitude is rebuilt from the velocity heading."""
    data = _read_rows(source, TRAJECTORY_HEADER)
    vel = data[:, 4:7]
    try:
        return Trajectory(
            timestamps=data[:, 0],
            positions=data[:, 1:4],
            velocities=vel,
            accelerations=data[:, 7:10],
            rotations=rot_z_batch(np.arctan2(vel[:, 1], vel[:, 0])),
            yaw_rates=data[:, 10],
            curvatures=data[:, 11],
        )
    except ValueError as exc:
        raise CsvParseError(2, str(exc), str(source)) from None


def write_imu_csv(imu: ImuSeries, target: str | Path | TextIO) -> None:
    write_columns(target, IMU_HEADER, imu.as_array())


def read_imu_csv(source: str | Path | TextIO) -> ImuSeries:
    data = _read_rows(source, IMU_HEADER)
    if len(data) > 1 and np.any(np.diff(data[:, 0]) <= 0):
        bad = int(np.argmax(np.diff(data[:, 0]) <= 0)) + 3  # header + 1-based + diff offset
        raise CsvParseError(bad, "timestamps must be strictly increasing", str(source))
    return ImuSeries.from_array(data)


def write_allan_csv(curve: AllanCurve, target: str | Path | TextIO) -> None:
    write_columns(target, ALLAN_HEADER, np.column_stack([curve.taus, curve.deviations]))


def read_allan_csv(source: str | Path | TextIO, axis: str = "") -> AllanCurve:
    data = _read_rows(source, ALLAN_HEADER)
    try:
        return AllanCurve(data[:, 0], data[:, 1], axis)
    except ValueError as exc:
        raise CsvParseError(2, str(exc), str(source)) from None


def write_distance_csv(estimated, truth, target: str | Path | TextIO) -> None:
    write_columns(target, DISTANCE_HEADER, np.column_stack([estimated, truth]))


def read_distance_csv(source: str | Path | TextIO) -> tuple[np.ndarray, np.ndarray]:
    data = _read_rows(source, DISTANCE_HEADER)
    return data[:, 0], data[:, 1]


def write_table_csv(target: str | Path, header: Iterable[str], rows: Iterable[Iterable]) -> None:
    """Mixed text/number table; floats use ``repr``."""
    buf = io.StringIO()
    writer = csv.writer(buf, lineterminator="\n")
    writer.writerow(header)
    for row in rows:
        writer.writerow([_fmt(x) if isinstance(x, float) else x for x in row])
    Path(target).write_text(buf.getvalue())


def dumps_json(obj) -> str:
    return json.dumps(obj, indent=2, allow_nan=False) + "\n"


def write_json(obj, target: str | Path | TextIO) -> None:
    text = dumps_json(obj)
    if isinstance(target, (str, Path)):
        Path(target).write_text(text)
    else:
        target.write(text)
