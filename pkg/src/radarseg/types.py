"""Core domain types shared across the toolkit.

Conventions fixed here and relied on everywhere else:

* Radial velocity sign: positive = target moving AWAY from the sensor.
  All gating thresholds compare the magnitude |v_r|.
* Label value -1 means "noise" in predicted labels and "background"
  (no annotated road user) in ground-truth labels.
* Amplitude is carried through the pipeline but never used by any
  filtering or clustering criterion.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

NOISE = -1
BACKGROUND = -1


@dataclass(frozen=True)
class Detection:
    """A single radar reflection point.

    ``x``/``y`` are coordinates in whatever frame the detection currently
    lives in (sensor-polar inputs have them filled by the coordinate
    transforms). ``r``/``azimuth`` always keep the original sensor-frame
    measurement; ``r`` is also what range-adaptive clustering rules use.
    ``gt_label`` is the annotated object id, or None for background.
    """

    time: float
    sensor_id: int
    r: float
    azimuth: float
    radial_velocity: float
    amplitude: float = 0.0
    x: float = 0.0
    y: float = 0.0
    gt_label: int | None = None


@dataclass(frozen=True)
class EgoPose:
    """One sample of the ego vehicle trajectory in a fixed world frame."""

    time: float
    x: float
    y: float
    heading: float
    speed: float = 0.0
    yaw_rate: float = 0.0


@dataclass(frozen=True)
class SensorMount:
    """Installation pose of one sensor relative to the vehicle frame."""

    sensor_id: int
    x: float
    y: float
    yaw: float


@dataclass
class ClusterAssignment:
    """Per-detection labels for one time window.

    ``labels[k]`` is the cluster id (or NOISE) of the detection at
    ``indices[k]`` in the source log. Cluster ids are dense 0..max and
    assigned in order of first core-point discovery.
    """

    labels: np.ndarray
    window: tuple[float, float]
    indices: np.ndarray | None = None

    def __post_init__(self):
        self.labels = np.asarray(self.labels, dtype=np.int64)
        if self.indices is None:
            self.indices = np.arange(len(self.labels), dtype=np.int64)
        else:
            self.indices = np.asarray(self.indices, dtype=np.int64)
        if len(self.indices) != len(self.labels):
            raise ValueError("labels and indices must have equal length")

    @property
    def n_clusters(self) -> int:
        if len(self.labels) == 0:
            return 0
        m = int(np.max(self.labels))
        return m + 1 if m >= 0 else 0


@dataclass(frozen=True)
class ParamSpace:
    """Axis-aligned search box: name -> (lower, upper), plus integer axes."""

    bounds: dict[str, tuple[float, float]]
    integral: frozenset[str] = frozenset()

    def __post_init__(self):
        for name, (lo, hi) in self.bounds.items():
            if not (lo <= hi):
                raise ValueError(f"bad bounds for {name!r}: ({lo}, {hi})")
        unknown = set(self.integral) - set(self.bounds)
        if unknown:
            raise ValueError(f"integral names not in bounds: {sorted(unknown)}")

    @property
    def names(self) -> list[str]:
        return list(self.bounds)

    @property
    def dim(self) -> int:
        return len(self.bounds)

    def volume_degenerate(self) -> bool:
        return all(lo == hi for lo, hi in self.bounds.values())

    def contains(self, params: dict[str, float]) -> bool:
        for name, (lo, hi) in self.bounds.items():
            v = params.get(name)
            if v is None or not (lo - 1e-12 <= v <= hi + 1e-12):
                return False
        return True

    def clip(self, params: dict[str, float]) -> dict[str, float]:
        out = {}
        for name, (lo, hi) in self.bounds.items():
            v = min(max(params[name], lo), hi)
            if name in self.integral:
                v = float(round(v))
            out[name] = v
        return out


# A ParamSet is a plain name -> value dict; key() gives a hashable cache key.
ParamSet = dict


def param_key(params: dict[str, float]) -> tuple:
    return tuple(sorted(params.items()))


@dataclass
class ValidationReport:
    """Outcome of validate_log: a list of (detection index, message) pairs."""

    violations: list[tuple[int, str]] = field(default_factory=list)

    @property
    def ok(self) -> bool:
        return not self.violations

    def add(self, index: int, message: str) -> None:
        self.violations.append((index, message))


def validate_log(detections) -> ValidationReport:
    """Check a detection log for malformed records.

    Reports non-finite fields, negative ranges, and per-sensor time
    regressions. Valid logs produce an empty report; nothing raises.
    """
    report = ValidationReport()
    last_time: dict[int, float] = {}
    for i, d in enumerate(detections):
        for name in ("time", "r", "azimuth", "radial_velocity", "amplitude", "x", "y"):
            if not math.isfinite(getattr(d, name)):
                report.add(i, f"non-finite {name}")
        if d.r < 0:
            report.add(i, "negative range")
        if math.isfinite(d.time):
            prev = last_time.get(d.sensor_id)
            if prev is not None and d.time < prev:
                report.add(i, "time regression")
            last_time[d.sensor_id] = max(d.time, prev) if prev is not None else d.time
    return report


def detection_columns(detections) -> dict[str, np.ndarray]:
    """Columnar view of a detection sequence (copies into float64/int64 arrays)."""
    n = len(detections)
    cols = {
        "time": np.empty(n, dtype=np.float64),
        "sensor_id": np.empty(n, dtype=np.int64),
        "r": np.empty(n, dtype=np.float64),
        "azimuth": np.empty(n, dtype=np.float64),
        "radial_velocity": np.empty(n, dtype=np.float64),
        "amplitude": np.empty(n, dtype=np.float64),
        "x": np.empty(n, dtype=np.float64),
        "y": np.empty(n, dtype=np.float64),
        "gt_label": np.empty(n, dtype=np.int64),
    }
    for i, d in enumerate(detections):
        cols["time"][i] = d.time
        cols["sensor_id"][i] = d.sensor_id
        cols["r"][i] = d.r
        cols["azimuth"][i] = d.azimuth
        cols["radial_velocity"][i] = d.radial_velocity
        cols["amplitude"][i] = d.amplitude
        cols["x"][i] = d.x
        cols["y"][i] = d.y
        cols["gt_label"][i] = BACKGROUND if d.gt_label is None else d.gt_label
    return cols
