"""Deterministic synthetic radar scenes with exact ground truth.

Objects are rectangles moving along piecewise-linear waypoint paths;
each sensor cycle they emit a Poisson number of detections sampled on
the sensor-facing boundary, with the count scaled down at long range
(range-independent angular resolution makes remote objects sparser).
Radial velocities are exact ray projections of the relative velocity
plus optional Gaussian noise. Clutter is uniform over each sensor's
field of view with near-zero Doppler.

Everything is reproducible: the per-cycle random streams are spawned
from one seed, so cycles could even be generated concurrently.
"""

from __future__ import annotations

import json
import math
from dataclasses import asdict, dataclass, field

import numpy as np

from .types import Detection, EgoPose, SensorMount


@dataclass(frozen=True)
class ObjectSpec:
    """One reflector: a moving road user or a static structure.

    ``reflectivity`` is the expected detections per sensor per cycle at
    50 m range; the actual rate scales with max(0.2, 50/r). ``absent``
    intervals suppress detections (occlusions). The object exists from
    start_time until its path is exhausted. Static structures (walls,
    parked vehicles) use speed 0, an explicit ``heading`` and
    ``labeled=False`` so they stay ground-truth background.
    """

    kind: str
    length: float
    width: float
    waypoints: tuple[tuple[float, float], ...]
    speed: float
    reflectivity: float
    start_time: float = 0.0
    absent: tuple[tuple[float, float], ...] = ()
    heading: float | None = None
    labeled: bool = True

    def __post_init__(self):
        if self.length <= 0 or self.width <= 0:
            raise ValueError("object extent must be > 0")
        if self.speed < 0:
            raise ValueError("speed must be >= 0")
        if len(self.waypoints) < 2 and self.speed > 0:
            raise ValueError("moving objects need >= 2 waypoints")

    def _segments(self):
        pts = np.asarray(self.waypoints, dtype=float)
        seg = np.diff(pts, axis=0)
        lengths = np.hypot(seg[:, 0], seg[:, 1])
        return pts, seg, lengths

    @property
    def path_duration(self) -> float:
        if self.speed == 0:
            return math.inf
        _, _, lengths = self._segments()
        return float(lengths.sum() / self.speed)

    def present(self, t: float) -> bool:
        if t < self.start_time or t > self.start_time + self.path_duration:
            return False
        return not any(lo <= t <= hi for lo, hi in self.absent)

    def state(self, t: float) -> tuple[np.ndarray, np.ndarray]:
        """(position, velocity) at time t (world frame)."""
        pts, seg, lengths = self._segments()
        if self.speed == 0:
            return pts[0].copy(), np.zeros(2)
        s = (t - self.start_time) * self.speed
        cum = np.concatenate([[0.0], np.cumsum(lengths)])
        k = int(np.searchsorted(cum[1:], s, side="right"))
        k = min(k, len(seg) - 1)
        f = (s - cum[k]) / lengths[k] if lengths[k] > 0 else 0.0
        pos = pts[k] + f * seg[k]
        vel = self.speed * seg[k] / lengths[k] if lengths[k] > 0 else np.zeros(2)
        return pos, vel


@dataclass(frozen=True)
class EgoSpec:
    """Ego trajectory: stationary, straight line, or constant-rate turn."""

    mode: str = "stationary"
    speed: float = 0.0
    heading: float = 0.0
    yaw_rate: float = 0.0

    def __post_init__(self):
        if self.mode not in ("stationary", "straight", "turn"):
            raise ValueError(f"unknown ego mode {self.mode!r}")

    def pose(self, t: float) -> EgoPose:
        if self.mode == "stationary":
            return EgoPose(time=t, x=0.0, y=0.0, heading=self.heading, speed=0.0, yaw_rate=0.0)
        if self.mode == "straight":
            return EgoPose(
                time=t,
                x=self.speed * t * math.cos(self.heading),
                y=self.speed * t * math.sin(self.heading),
                heading=self.heading,
                speed=self.speed,
                yaw_rate=0.0,
            )
        # constant-rate turn starting at the origin with the given heading
        w, v, h0 = self.yaw_rate, self.speed, self.heading
        if abs(w) < 1e-12:
            return EgoSpec(mode="straight", speed=v, heading=h0).pose(t)
        x = (v / w) * (math.sin(h0 + w * t) - math.sin(h0))
        y = -(v / w) * (math.cos(h0 + w * t) - math.cos(h0))
        return EgoPose(time=t, x=x, y=y, heading=h0 + w * t, speed=v, yaw_rate=w)


@dataclass(frozen=True)
class SceneSpec:
    name: str
    duration: float
    cycle: float = 0.05
    mounts: tuple[SensorMount, ...] = (SensorMount(0, 0.0, 0.0, 0.0),)
    ego: EgoSpec = EgoSpec()
    objects: tuple[ObjectSpec, ...] = ()
    clutter_density: float = 0.0  # detections per second per 100 m^2
    clutter_vr_sigma: float = 0.15
    sigma_xy: float = 0.0
    sigma_vr: float = 0.0
    fov_deg: float = 150.0
    r_min: float = 1.0
    r_max: float = 100.0
    amplitude: float = 10.0
    seed: int = 0

    def __post_init__(self):
        if self.duration <= 0 or self.cycle <= 0:
            raise ValueError("duration and cycle must be > 0")
        if not self.mounts:
            raise ValueError("need at least one sensor mount")


def _visible_boundary(center: np.ndarray, heading: float, length: float, width: float, sensor: np.ndarray):
    """Sensor-facing edges of the object rectangle as ((p0, p1), ...)."""
    c, s = math.cos(heading), math.sin(heading)
    rot = np.array([[c, -s], [s, c]])
    half = np.array(
        [[length / 2, width / 2], [-length / 2, width / 2], [-length / 2, -width / 2], [length / 2, -width / 2]]
    )
    corners = center + half @ rot.T
    edges = []
    for k in range(4):
        p0, p1 = corners[k], corners[(k + 1) % 4]
        mid = 0.5 * (p0 + p1)
        d = p1 - p0
        normal = np.array([d[1], -d[0]])  # outward for clockwise corner order
        if np.dot(normal, sensor - mid) > 0:
            edges.append((p0, p1))
    return edges


def _sample_boundary(edges, rng: np.random.Generator, n: int) -> np.ndarray:
    lengths = np.array([np.hypot(*(p1 - p0)) for p0, p1 in edges])
    total = lengths.sum()
    u = rng.uniform(0, total, size=n)
    out = np.empty((n, 2))
    cum = np.concatenate([[0.0], np.cumsum(lengths)])
    for i, ui in enumerate(u):
        k = min(int(np.searchsorted(cum[1:], ui, side="right")), len(edges) - 1)
        f = (ui - cum[k]) / lengths[k]
        p0, p1 = edges[k]
        out[i] = p0 + f * (p1 - p0)
    return out


def generate(spec: SceneSpec) -> tuple[list[Detection], list[EgoPose]]:
    """Simulate the scene; returns (time-sorted detections, pose log).

    Detection x/y are in the vehicle frame of their own cycle (CCS);
    r/azimuth are the matching sensor-polar measurements.
    """
    n_cycles = int(math.floor(spec.duration / spec.cycle + 1e-9)) + 1
    streams = np.random.SeedSequence(spec.seed).spawn(n_cycles)
    fov = math.radians(spec.fov_deg)
    sector_area = 0.5 * fov * (spec.r_max**2 - spec.r_min**2)
    clutter_mean = spec.clutter_density * spec.cycle * sector_area / 100.0

    detections: list[Detection] = []
    poses: list[EgoPose] = []
    for k in range(n_cycles):
        t = k * spec.cycle
        rng = np.random.Generator(np.random.PCG64(streams[k]))
        pose = spec.ego.pose(t)
        poses.append(pose)
        ch, sh = math.cos(pose.heading), math.sin(pose.heading)
        ego_xy = np.array([pose.x, pose.y])
        ego_v = pose.speed * np.array([ch, sh])

        for mount in spec.mounts:
            sensor_xy = ego_xy + np.array([ch * mount.x - sh * mount.y, sh * mount.x + ch * mount.y])
            # yaw-rate lever arm of the mount offset
            arm = np.array([ch * mount.x - sh * mount.y, sh * mount.x + ch * mount.y])
            sensor_v = ego_v + pose.yaw_rate * np.array([-arm[1], arm[0]])
            sensor_yaw = pose.heading + mount.yaw

            for oi, obj in enumerate(spec.objects):
                if not obj.present(t):
                    continue
                pos, vel = obj.state(t)
                rel_c = pos - sensor_xy
                r_c = float(np.hypot(*rel_c))
                az_c = math.atan2(rel_c[1], rel_c[0]) - sensor_yaw
                az_c = math.atan2(math.sin(az_c), math.cos(az_c))
                if r_c < spec.r_min or r_c > spec.r_max or abs(az_c) > fov / 2:
                    continue
                lam = obj.reflectivity * max(0.2, 50.0 / max(r_c, 1.0))
                n = int(rng.poisson(lam))
                if n == 0:
                    continue
                if obj.heading is not None:
                    heading = obj.heading
                else:
                    heading = math.atan2(vel[1], vel[0]) if np.hypot(*vel) > 0 else 0.0
                edges = _visible_boundary(pos, heading, obj.length, obj.width, sensor_xy)
                if not edges:
                    continue
                pts = _sample_boundary(edges, rng, n)
                if spec.sigma_xy > 0:
                    pts = pts + rng.normal(0.0, spec.sigma_xy, size=pts.shape)
                for p in pts:
                    rel = p - sensor_xy
                    rr = float(np.hypot(*rel))
                    if rr < 1e-9:
                        continue
                    u = rel / rr
                    vr = float(np.dot(vel - sensor_v, u))
                    if spec.sigma_vr > 0:
                        vr += float(rng.normal(0.0, spec.sigma_vr))
                    az = math.atan2(rel[1], rel[0]) - sensor_yaw
                    az = math.atan2(math.sin(az), math.cos(az))
                    # vehicle-frame coordinates of the point
                    px, py = p - ego_xy
                    cx = ch * px + sh * py
                    cy = -sh * px + ch * py
                    detections.append(
                        Detection(
                            time=t,
                            sensor_id=mount.sensor_id,
                            r=rr,
                            azimuth=az,
                            radial_velocity=vr,
                            amplitude=spec.amplitude,
                            x=cx,
                            y=cy,
                            gt_label=oi if obj.labeled else None,
                        )
                    )

            if clutter_mean > 0:
                nc = int(rng.poisson(clutter_mean))
                for _ in range(nc):
                    rr = math.sqrt(rng.uniform(spec.r_min**2, spec.r_max**2))
                    az = rng.uniform(-fov / 2, fov / 2)
                    vr = float(rng.normal(0.0, spec.clutter_vr_sigma))
                    ang = sensor_yaw + az
                    p = sensor_xy + rr * np.array([math.cos(ang), math.sin(ang)])
                    px, py = p - ego_xy
                    cx = ch * px + sh * py
                    cy = -sh * px + ch * py
                    detections.append(
                        Detection(
                            time=t,
                            sensor_id=mount.sensor_id,
                            r=rr,
                            azimuth=az,
                            radial_velocity=vr,
                            amplitude=spec.amplitude,
                            x=cx,
                            y=cy,
                            gt_label=None,
                        )
                    )
    return detections, poses


def standard_suite() -> dict[str, SceneSpec]:
    """Canned verification scenes, all with a stationary ego vehicle.

    Static structures (fences, parked cars) are unlabeled background that
    survives density filtering, the way real static surroundings do.
    """
    mounts2 = (SensorMount(0, 3.5, 0.9, 0.0), SensorMount(1, 3.5, -0.9, 0.0))
    suite = {}

    suite["crossing_pedestrian"] = SceneSpec(
        name="crossing_pedestrian",
        duration=10.0,
        mounts=(SensorMount(0, 0.0, 0.0, 0.0),),
        objects=(
            ObjectSpec(
                kind="pedestrian",
                length=0.6,
                width=0.6,
                waypoints=((22.0, -7.0), (22.0, 7.0)),
                speed=1.5,
                reflectivity=2.0,
            ),
            ObjectSpec(
                kind="wall",
                length=18.0,
                width=0.4,
                waypoints=((26.0, 0.0),),
                speed=0.0,
                reflectivity=3.0,
                heading=math.pi / 2,
                labeled=False,
            ),
        ),
        clutter_density=0.15,
        sigma_xy=0.08,
        sigma_vr=0.08,
        r_max=60.0,
        seed=11,
    )

    suite["car_and_pedestrian"] = SceneSpec(
        name="car_and_pedestrian",
        duration=14.0,
        mounts=mounts2,
        objects=(
            ObjectSpec(
                kind="car",
                length=4.5,
                width=1.8,
                waypoints=((78.0, 14.0), (12.0, 10.0)),
                speed=9.0,
                reflectivity=6.0,
                start_time=0.0,
            ),
            ObjectSpec(
                kind="pedestrian",
                length=0.6,
                width=0.6,
                waypoints=((24.0, -8.0), (24.0, 8.0)),
                speed=1.4,
                reflectivity=2.0,
                start_time=1.0,
            ),
            # fence line just behind the crossing corridor
            ObjectSpec(
                kind="fence",
                length=17.0,
                width=0.3,
                waypoints=((25.05, 0.0),),
                speed=0.0,
                reflectivity=4.0,
                heading=math.pi / 2,
                labeled=False,
            ),
            # roadside wall along the car lane
            ObjectSpec(
                kind="wall",
                length=24.0,
                width=0.4,
                waypoints=((45.0, 17.0),),
                speed=0.0,
                reflectivity=4.0,
                heading=0.0,
                labeled=False,
            ),
        ),
        clutter_density=0.12,
        sigma_xy=0.08,
        sigma_vr=0.08,
        r_max=90.0,
        seed=12,
    )

    suite["cluttered_walker"] = SceneSpec(
        name="cluttered_walker",
        duration=10.0,
        mounts=(SensorMount(0, 0.0, 0.0, 0.0),),
        objects=(
            ObjectSpec(
                kind="pedestrian",
                length=0.6,
                width=0.6,
                waypoints=((12.0, -4.0), (12.0, 4.0)),
                speed=1.0,
                reflectivity=3.0,
            ),
        ),
        clutter_density=160.0,
        sigma_xy=0.06,
        sigma_vr=0.07,
        fov_deg=60.0,
        r_min=3.0,
        r_max=15.0,
        seed=13,
    )

    suite["remote_car"] = SceneSpec(
        name="remote_car",
        duration=12.0,
        mounts=mounts2,
        objects=(
            ObjectSpec(
                kind="car",
                length=4.5,
                width=1.8,
                waypoints=((102.0, -22.0), (124.0, 22.0)),
                speed=4.5,
                reflectivity=20.0,
            ),
        ),
        clutter_density=0.05,
        sigma_xy=0.10,
        sigma_vr=0.08,
        r_max=140.0,
        seed=14,
    )

    suite["occluded_track"] = SceneSpec(
        name="occluded_track",
        duration=14.0,
        mounts=mounts2,
        objects=(
            ObjectSpec(
                kind="car",
                length=4.5,
                width=1.8,
                waypoints=((60.0, -10.0), (20.0, 8.0)),
                speed=3.5,
                reflectivity=6.0,
                absent=((6.2, 7.4),),
            ),
        ),
        clutter_density=0.06,
        sigma_xy=0.08,
        sigma_vr=0.07,
        r_max=80.0,
        seed=15,
    )
    return suite


def tuner_probe_log() -> list[Detection]:
    """Hand-built labeled log for exercising the filter tuner.

    Exactly one tuning grid cell (velocity threshold 0.35, radius 0.8)
    removes the object's detections: the object appears as pairs 0.1 m
    apart with |v_r| = 0.32 whose only sub-0.9 m neighbor is the partner,
    while a background guard ring 0.9 m out lifts the neighbor count past
    the whole cascade at radii >= 1.0. Extra slow background pairs create
    a removal-rate gradient across the remaining cells.
    """

    def det(t, x, y, vr, gt=None):
        return Detection(
            time=t,
            sensor_id=0,
            r=float(np.hypot(x, y)),
            azimuth=math.atan2(y, x),
            radial_velocity=vr,
            amplitude=10.0,
            x=x,
            y=y,
            gt_label=gt,
        )

    out: list[Detection] = []
    for g in range(4):
        t = 0.3 * g
        bx = 30.0 + 2.0 * g  # keep groups apart spatially as well
        # the object: a pair 0.1 m apart, |v_r| = 0.32
        out.append(det(t, bx, 0.0, 0.32, gt=0))
        out.append(det(t, bx + 0.1, 0.0, -0.32, gt=0))
        # guard ring radius 0.9 around the pair midpoint, fast background
        for j in range(12):
            ang = 2 * math.pi * j / 12
            out.append(det(t, bx + 0.05 + 0.9 * math.cos(ang), 0.9 * math.sin(ang), 2.0))
        # isolated background: removed at every cell
        for j in range(3):
            out.append(det(t, bx + 10.0 + 4.0 * j, 8.0, 0.0))
        # slow pair 0.9 m apart: isolated below radius 0.9, slow above
        out.append(det(t, bx - 10.0, -8.0, 0.12))
        out.append(det(t, bx - 10.0 + 0.9, -8.0, -0.12))
        # close slow pair 0.3 m apart: removed once the threshold passes 0.12
        out.append(det(t, bx - 10.0, 8.0, 0.12))
        out.append(det(t, bx - 10.0 + 0.3, 8.0, -0.12))
    return out


def spec_to_json(spec: SceneSpec) -> str:
    return json.dumps(asdict(spec), indent=2, sort_keys=True)


def spec_from_json(text: str) -> SceneSpec:
    raw = json.loads(text)
    raw["mounts"] = tuple(SensorMount(**m) for m in raw.get("mounts", []))
    raw["ego"] = EgoSpec(**raw.get("ego", {}))
    objects = []
    for o in raw.get("objects", []):
        o["waypoints"] = tuple(tuple(w) for w in o["waypoints"])
        o["absent"] = tuple(tuple(a) for a in o.get("absent", []))
        objects.append(ObjectSpec(**o))
    raw["objects"] = tuple(objects)
    return SceneSpec(**raw)
