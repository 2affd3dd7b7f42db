"""Coordinate transforms for detection logs.

Two frames are supported: the vehicle-fixed car frame (CCS, origin at the
rear-axle center) and an ego-motion compensated frame (FCS) anchored at a
single reference pose. For a batch run the natural anchor is the newest
pose, so the most recent detections stay untransformed.

Radial velocity is left untouched by all transforms: it is a sensor-relative
measurement. An optional helper removes the ego-motion component for
callers that want compensated Doppler values.
"""

from __future__ import annotations

import math
from bisect import bisect_left
from dataclasses import dataclass, replace

import numpy as np

from .types import Detection, EgoPose, SensorMount

CCS = "ccs"
FCS = "fcs"


@dataclass(frozen=True)
class FrameSpec:
    """Target frame for a transform run.

    ``reference_time`` anchors the FCS; None means "newest pose time".
    Ignored for CCS.
    """

    mode: str = FCS
    reference_time: float | None = None

    def __post_init__(self):
        if self.mode not in (CCS, FCS):
            raise ValueError(f"mode must be '{CCS}' or '{FCS}'")


def wrap_angle(a: float) -> float:
    """Wrap to (-pi, pi]; exact identity for already-wrapped values."""
    if -math.pi < a <= math.pi:
        return a
    w = math.fmod(a + math.pi, 2.0 * math.pi)
    if w <= 0.0:
        w += 2.0 * math.pi
    return w - math.pi


def sensor_to_ccs(d: Detection, mount: SensorMount) -> Detection:
    """Fill x/y from the sensor-polar measurement and the mount pose."""
    if mount.sensor_id != d.sensor_id:
        raise ValueError(f"mount is for sensor {mount.sensor_id}, detection from {d.sensor_id}")
    ang = d.azimuth + mount.yaw
    return replace(d, x=mount.x + d.r * math.cos(ang), y=mount.y + d.r * math.sin(ang))


def interpolate_pose(poses: list[EgoPose], t: float) -> EgoPose:
    """Pose at time t: linear in position/speed/yaw rate, shortest-arc in
    heading. t must lie within the pose log span."""
    if not poses:
        raise ValueError("empty pose log")
    times = [p.time for p in poses]
    if not (times[0] <= t <= times[-1]):
        raise ValueError(f"time {t} outside pose log span [{times[0]}, {times[-1]}]")
    k = bisect_left(times, t)
    if k < len(times) and times[k] == t:
        return poses[k]
    p0, p1 = poses[k - 1], poses[k]
    f = (t - p0.time) / (p1.time - p0.time)
    heading = wrap_angle(p0.heading + f * wrap_angle(p1.heading - p0.heading))
    return EgoPose(
        time=t,
        x=p0.x + f * (p1.x - p0.x),
        y=p0.y + f * (p1.y - p0.y),
        heading=heading,
        speed=p0.speed + f * (p1.speed - p0.speed),
        yaw_rate=p0.yaw_rate + f * (p1.yaw_rate - p0.yaw_rate),
    )


def ccs_to_fcs(d: Detection, poses: list[EgoPose], spec: FrameSpec) -> Detection:
    """Move a CCS detection into the compensated frame anchored at
    spec.reference_time. Radial velocity is preserved."""
    ref_t = spec.reference_time if spec.reference_time is not None else poses[-1].time
    pose = interpolate_pose(poses, d.time)
    ref = interpolate_pose(poses, ref_t)
    if (pose.x, pose.y, pose.heading) == (ref.x, ref.y, ref.heading):
        return d  # no ego motion between the two times: exact identity
    # world position of the detection at measurement time
    c, s = math.cos(pose.heading), math.sin(pose.heading)
    wx = pose.x + c * d.x - s * d.y
    wy = pose.y + s * d.x + c * d.y
    # express in the reference pose frame
    cr, sr = math.cos(ref.heading), math.sin(ref.heading)
    rx, ry = wx - ref.x, wy - ref.y
    return replace(d, x=cr * rx + sr * ry, y=-sr * rx + cr * ry)


def transform_log(
    detections: list[Detection],
    mounts: dict[int, SensorMount] | list[SensorMount] | None,
    poses: list[EgoPose] | None,
    spec: FrameSpec,
    from_polar: bool = False,
) -> list[Detection]:
    """Transform a whole log into the requested frame.

    With from_polar=True, x/y are first derived from (r, azimuth) and the
    mount pose; otherwise the stored CCS x/y are taken as-is. FCS requires
    a pose log covering every detection time.
    """
    if isinstance(mounts, list):
        mounts = {m.sensor_id: m for m in mounts}
    if not detections:
        return []
    out = detections
    if from_polar:
        if not mounts:
            raise ValueError("from_polar requires sensor mounts")
        out = [sensor_to_ccs(d, mounts[d.sensor_id]) for d in out]
    if spec.mode == FCS:
        if not poses:
            raise ValueError("FCS requires an ego pose log")
        out = [ccs_to_fcs(d, poses, spec) for d in out]
    return out


def sensor_positions(
    detections: list[Detection],
    mounts: dict[int, SensorMount] | list[SensorMount] | None,
    poses: list[EgoPose] | None,
    spec: FrameSpec,
) -> np.ndarray:
    """(n, 2) position of each detection's sensor in the active frame at the
    detection's time. Unknown mounts default to the frame origin."""
    if isinstance(mounts, list):
        mounts = {m.sensor_id: m for m in mounts}
    mounts = mounts or {}
    ref = None
    if spec.mode == FCS:
        if not poses:
            raise ValueError("FCS requires an ego pose log")
        ref_t = spec.reference_time if spec.reference_time is not None else poses[-1].time
        ref = interpolate_pose(poses, ref_t)
    out = np.zeros((len(detections), 2))
    for i, d in enumerate(detections):
        m = mounts.get(d.sensor_id)
        mx, my = (m.x, m.y) if m is not None else (0.0, 0.0)
        if ref is None:
            out[i] = (mx, my)
            continue
        pose = interpolate_pose(poses, d.time)
        c, s = math.cos(pose.heading), math.sin(pose.heading)
        wx = pose.x + c * mx - s * my
        wy = pose.y + s * mx + c * my
        cr, sr = math.cos(ref.heading), math.sin(ref.heading)
        rx, ry = wx - ref.x, wy - ref.y
        out[i] = (cr * rx + sr * ry, -sr * rx + cr * ry)
    return out


def detection_bearings(
    detections: list[Detection],
    mounts=None,
    poses: list[EgoPose] | None = None,
    spec: FrameSpec = FrameSpec(mode=CCS),
) -> np.ndarray:
    """Angle of the sensor-to-detection ray per detection, in the active
    frame. This is the direction the radial velocity is measured along."""
    sensors = sensor_positions(detections, mounts, poses, spec)
    out = np.empty(len(detections))
    for i, d in enumerate(detections):
        out[i] = math.atan2(d.y - sensors[i, 1], d.x - sensors[i, 0])
    return out


def compensate_doppler(
    detections: list[Detection],
    mounts,
    poses: list[EgoPose],
) -> list[Detection]:
    """Remove the ego-motion component from each radial velocity.

    The measured value for a static target equals minus the projection of
    the sensor velocity onto the sensor->target ray; adding that projection
    back makes static background read ~0 m/s. Sensor velocity includes the
    yaw-rate lever arm of the mount offset.
    """
    if isinstance(mounts, list):
        mounts = {m.sensor_id: m for m in mounts}
    mounts = mounts or {}
    out = []
    for d in detections:
        pose = interpolate_pose(poses, d.time)
        m = mounts.get(d.sensor_id)
        mx, my = (m.x, m.y) if m is not None else (0.0, 0.0)
        c, s = math.cos(pose.heading), math.sin(pose.heading)
        # sensor velocity in the world frame
        vx = pose.speed * c - pose.yaw_rate * (s * mx + c * my)
        vy = pose.speed * s + pose.yaw_rate * (c * mx - s * my)
        # ray direction in the world frame (heading + mount yaw + azimuth)
        ang = pose.heading + (m.yaw if m is not None else 0.0) + d.azimuth
        proj = vx * math.cos(ang) + vy * math.sin(ang)
        out.append(replace(d, radial_velocity=d.radial_velocity + proj))
    return out
