"""File formats: detection logs (CSV / JSON lines), ego poses, sensor
mounts, and per-window cluster assignments.

Floats are written with repr(), which round-trips float64 exactly.
Parse errors always carry file and line context.
"""

from __future__ import annotations

import csv
import json
from pathlib import Path

import numpy as np

from .types import ClusterAssignment, Detection, EgoPose, SensorMount

DETECTION_FIELDS = [
    "time",
    "sensor_id",
    "range",
    "azimuth",
    "radial_velocity",
    "amplitude",
    "x",
    "y",
    "gt_label",
]

POSE_FIELDS = ["time", "x", "y", "heading", "speed", "yaw_rate"]
MOUNT_FIELDS = ["sensor_id", "x", "y", "yaw"]
ASSIGNMENT_FIELDS = ["window_start", "window_end", "detection_index", "label"]


class ParseError(ValueError):
    def __init__(self, path, line_no: int, message: str):
        super().__init__(f"{path}:{line_no}: {message}")
        self.path = str(path)
        self.line_no = line_no


def _fmt(x: float) -> str:
    return repr(float(x))


def write_detections_csv(path, detections) -> None:
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(DETECTION_FIELDS)
        for d in detections:
            w.writerow(
                [
                    _fmt(d.time),
                    d.sensor_id,
                    _fmt(d.r),
                    _fmt(d.azimuth),
                    _fmt(d.radial_velocity),
                    _fmt(d.amplitude),
                    _fmt(d.x),
                    _fmt(d.y),
                    "" if d.gt_label is None else d.gt_label,
                ]
            )


def read_detections_csv(path) -> list[Detection]:
    out = []
    with open(path, newline="") as fh:
        reader = csv.reader(fh)
        try:
            header = next(reader)
        except StopIteration:
            raise ParseError(path, 1, "empty file") from None
        if header != DETECTION_FIELDS:
            raise ParseError(path, 1, f"bad header {header!r}")
        for line_no, row in enumerate(reader, start=2):
            if not row:
                continue
            if len(row) != len(DETECTION_FIELDS):
                raise ParseError(path, line_no, f"expected {len(DETECTION_FIELDS)} fields, got {len(row)}")
            try:
                out.append(
                    Detection(
                        time=float(row[0]),
                        sensor_id=int(row[1]),
                        r=float(row[2]),
                        azimuth=float(row[3]),
                        radial_velocity=float(row[4]),
                        amplitude=float(row[5]),
                        x=float(row[6]),
                        y=float(row[7]),
                        gt_label=None if row[8] == "" else int(row[8]),
                    )
                )
            except ValueError as exc:
                raise ParseError(path, line_no, str(exc)) from None
    return out


def write_detections_jsonl(path, detections) -> None:
    with open(path, "w") as fh:
        for d in detections:
            rec = {
                "time": d.time,
                "sensor_id": d.sensor_id,
                "range": d.r,
                "azimuth": d.azimuth,
                "radial_velocity": d.radial_velocity,
                "amplitude": d.amplitude,
                "x": d.x,
                "y": d.y,
            }
            if d.gt_label is not None:
                rec["gt_label"] = d.gt_label
            fh.write(json.dumps(rec) + "\n")


def read_detections_jsonl(path) -> list[Detection]:
    out = []
    with open(path) as fh:
        for line_no, line in enumerate(fh, start=1):
            line = line.strip()
            if not line:
                continue
            try:
                rec = json.loads(line)
                out.append(
                    Detection(
                        time=float(rec["time"]),
                        sensor_id=int(rec["sensor_id"]),
                        r=float(rec["range"]),
                        azimuth=float(rec["azimuth"]),
                        radial_velocity=float(rec["radial_velocity"]),
                        amplitude=float(rec.get("amplitude", 0.0)),
                        x=float(rec["x"]),
                        y=float(rec["y"]),
                        gt_label=None if rec.get("gt_label") is None else int(rec["gt_label"]),
                    )
                )
            except (ValueError, KeyError, json.JSONDecodeError) as exc:
                raise ParseError(path, line_no, str(exc)) from None
    return out


def read_detections(path) -> list[Detection]:
    """Dispatch on extension: .jsonl/.ndjson -> JSON lines, else CSV."""
    if str(path).endswith((".jsonl", ".ndjson")):
        return read_detections_jsonl(path)
    return read_detections_csv(path)


def write_poses_csv(path, poses) -> None:
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(POSE_FIELDS)
        for p in poses:
            w.writerow([_fmt(p.time), _fmt(p.x), _fmt(p.y), _fmt(p.heading), _fmt(p.speed), _fmt(p.yaw_rate)])


def read_poses_csv(path) -> list[EgoPose]:
    out = []
    with open(path, newline="") as fh:
        reader = csv.reader(fh)
        try:
            header = next(reader)
        except StopIteration:
            raise ParseError(path, 1, "empty file") from None
        if header != POSE_FIELDS:
            raise ParseError(path, 1, f"bad header {header!r}")
        for line_no, row in enumerate(reader, start=2):
            if not row:
                continue
            try:
                out.append(
                    EgoPose(
                        time=float(row[0]),
                        x=float(row[1]),
                        y=float(row[2]),
                        heading=float(row[3]),
                        speed=float(row[4]),
                        yaw_rate=float(row[5]),
                    )
                )
            except (ValueError, IndexError) as exc:
                raise ParseError(path, line_no, str(exc)) from None
    return out


def write_mounts_csv(path, mounts) -> None:
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(MOUNT_FIELDS)
        for m in mounts:
            w.writerow([m.sensor_id, _fmt(m.x), _fmt(m.y), _fmt(m.yaw)])


def read_mounts_csv(path) -> list[SensorMount]:
    out = []
    with open(path, newline="") as fh:
        reader = csv.reader(fh)
        try:
            header = next(reader)
        except StopIteration:
            raise ParseError(path, 1, "empty file") from None
        if header != MOUNT_FIELDS:
            raise ParseError(path, 1, f"bad header {header!r}")
        for line_no, row in enumerate(reader, start=2):
            if not row:
                continue
            try:
                out.append(SensorMount(sensor_id=int(row[0]), x=float(row[1]), y=float(row[2]), yaw=float(row[3])))
            except (ValueError, IndexError) as exc:
                raise ParseError(path, line_no, str(exc)) from None
    return out


def write_assignments_csv(path, assignments) -> None:
    """One row per (window, detection): window_start,window_end,detection_index,label."""
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(ASSIGNMENT_FIELDS)
        for a in assignments:
            t0, t1 = a.window
            for idx, lab in zip(a.indices, a.labels):
                w.writerow([_fmt(t0), _fmt(t1), int(idx), int(lab)])


def read_assignments_csv(path) -> list[ClusterAssignment]:
    rows_by_window: dict[tuple[float, float], list[tuple[int, int]]] = {}
    order: list[tuple[float, float]] = []
    with open(path, newline="") as fh:
        reader = csv.reader(fh)
        try:
            header = next(reader)
        except StopIteration:
            raise ParseError(path, 1, "empty file") from None
        if header != ASSIGNMENT_FIELDS:
            raise ParseError(path, 1, f"bad header {header!r}")
        for line_no, row in enumerate(reader, start=2):
            if not row:
                continue
            try:
                key = (float(row[0]), float(row[1]))
                if key not in rows_by_window:
                    rows_by_window[key] = []
                    order.append(key)
                rows_by_window[key].append((int(row[2]), int(row[3])))
            except (ValueError, IndexError) as exc:
                raise ParseError(path, line_no, str(exc)) from None
    out = []
    for key in order:
        rows = rows_by_window[key]
        out.append(
            ClusterAssignment(
                labels=np.array([lab for _, lab in rows], dtype=np.int64),
                window=key,
                indices=np.array([idx for idx, _ in rows], dtype=np.int64),
            )
        )
    return out


def ensure_dir(path) -> Path:
    p = Path(path)
    p.mkdir(parents=True, exist_ok=True)
    return p
