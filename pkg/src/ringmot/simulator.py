"""Deterministic scan simulator with point-level ground truth.

Scenes combine an infinite ground plane, static primitives (axis-aligned
boxes and vertical cylinders, all object id 0), and moving cylindrical
targets (ids > 0) following piecewise-linear waypoint paths with per-leg
speeds sampled from a configured band and occasional pauses. The sensor is
either fixed or rides a figure-8 path. Rays are cast per grid cell with
per-column time interpolation, so both sensor and targets move within one
rotation (a flag freezes everything at the scan start time instead).

All randomness derives from the scene seed; identical scenes produce
bit-identical scan, pose, and label files.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from . import kernels
from .geometry import RigidTransform
from .scan_model import DEFAULT_SENTINEL, OrganizedScan, PointLabel

_SCHEDULE_SALT = 104729
_NOISE_SALT = 15485863


class SceneError(ValueError):
    """Scene description is invalid."""


@dataclass
class TargetSpec:
    id: int
    radius: float = 0.25
    height: float = 1.8
    waypoints: np.ndarray = field(default_factory=lambda: np.zeros((1, 2)))
    speed_min: float = 0.97    # 3.5 km/h
    speed_max: float = 3.47    # 12.5 km/h
    pause_prob: float = 0.0
    pause_duration: float = 0.0


@dataclass
class SensorPath:
    kind: str = "static"                  # "static" | "figure8"
    position: tuple = (0.0, 0.0, 2.5)
    radius: float = 4.0
    period: float = 40.0

    def positions_at(self, times) -> np.ndarray:
        times = np.atleast_1d(np.asarray(times, dtype=float))
        out = np.empty((times.shape[0], 3))
        cx, cy, cz = self.position
        if self.kind == "static":
            out[:] = (cx, cy, cz)
        elif self.kind == "figure8":
            u = 2.0 * np.pi * times / self.period
            out[:, 0] = cx + self.radius * np.sin(u)
            out[:, 1] = cy + 0.5 * self.radius * np.sin(2.0 * u)
            out[:, 2] = cz
        else:
            raise SceneError(f"unknown sensor path kind {self.kind!r}")
        return out

    def pose_at(self, time: float) -> RigidTransform:
        return RigidTransform.from_translation(self.positions_at(time)[0])


@dataclass
class Scene:
    ground: bool = True
    boxes: np.ndarray = field(default_factory=lambda: np.zeros((0, 6)))
    cylinders: np.ndarray = field(default_factory=lambda: np.zeros((0, 4)))
    targets: list = field(default_factory=list)
    sensor: SensorPath = field(default_factory=SensorPath)
    noise_std: float = 0.03
    max_range: float = 100.0
    seed: int = 0
    per_column_motion: bool = True

    def validate(self) -> None:
        ids = [t.id for t in self.targets]
        if any(i <= 0 for i in ids):
            raise SceneError("target ids must be positive")
        if len(set(ids)) != len(ids):
            raise SceneError("target ids must be unique")
        for t in self.targets:
            if t.speed_min <= 0 or t.speed_max < t.speed_min:
                raise SceneError(f"target {t.id}: invalid speed schedule")
            if t.pause_prob < 0 or t.pause_prob > 1 or t.pause_duration < 0:
                raise SceneError(f"target {t.id}: invalid pause schedule")
            if t.radius <= 0 or t.height <= 0:
                raise SceneError(f"target {t.id}: degenerate shape")
        if self.noise_std < 0 or self.max_range <= 0:
            raise SceneError("invalid sensor parameters")


class TargetSchedule:
    """Time-to-position map of one target, fixed by the scene seed."""

    def __init__(self, spec: TargetSpec, seed: int):
        rng = np.random.default_rng([seed, _SCHEDULE_SALT, spec.id])
        waypoints = np.asarray(spec.waypoints, dtype=float).reshape(-1, 2)
        t = 0.0
        t0s, t1s, p0s, p1s = [], [], [], []
        for i in range(len(waypoints) - 1):
            speed = rng.uniform(spec.speed_min, spec.speed_max)
            dist = float(np.linalg.norm(waypoints[i + 1] - waypoints[i]))
            duration = dist / speed
            if duration > 0:
                t0s.append(t)
                t1s.append(t + duration)
                p0s.append(waypoints[i])
                p1s.append(waypoints[i + 1])
                t += duration
            if spec.pause_duration > 0 and rng.random() < spec.pause_prob:
                t0s.append(t)
                t1s.append(t + spec.pause_duration)
                p0s.append(waypoints[i + 1])
                p1s.append(waypoints[i + 1])
                t += spec.pause_duration
        self._start = waypoints[0]
        self._t0 = np.array(t0s)
        self._t1 = np.array(t1s)
        self._p0 = np.array(p0s).reshape(-1, 2)
        self._p1 = np.array(p1s).reshape(-1, 2)

    def positions_at(self, times) -> np.ndarray:
        times = np.atleast_1d(np.asarray(times, dtype=float))
        if self._t0.size == 0:
            return np.tile(self._start, (times.shape[0], 1))
        leg = np.clip(np.searchsorted(self._t1, times, side="left"), 0,
                      self._t0.size - 1)
        span = self._t1[leg] - self._t0[leg]
        alpha = np.clip(
            np.divide(times - self._t0[leg], span, out=np.zeros_like(times),
                      where=span > 0),
            0.0, 1.0,
        )
        return self._p0[leg] + alpha[:, None] * (self._p1[leg] - self._p0[leg])


def _schedules(scene: Scene) -> list[TargetSchedule]:
    return [TargetSchedule(t, scene.seed) for t in scene.targets]


def raycast(scene: Scene, origin, direction, time: float):
    """Nearest intersection of one ray with the scene at the given time.

    Returns (range, object_id) or None on a miss. Intended as the slow,
    trustworthy oracle; scan generation uses the batched kernel.
    """
    scene.validate()
    schedules = _schedules(scene)
    origin = np.asarray(origin, dtype=float).reshape(1, 3)
    direction = np.asarray(direction, dtype=float).reshape(1, 1, 3)
    centers = np.stack([s.positions_at([time]) for s in schedules], axis=0) \
        if schedules else np.zeros((0, 1, 2))
    rh = np.array([[t.radius, t.height] for t in scene.targets]).reshape(-1, 2)
    ids = np.array([t.id for t in scene.targets], dtype=np.int64)
    ranges, hit_ids = kernels.render_rays(
        origin, direction, scene.boxes, scene.cylinders, centers, rh, ids,
        scene.ground, scene.max_range,
    )
    if hit_ids[0, 0] < 0:
        return None
    return float(ranges[0, 0]), int(hit_ids[0, 0])


def _ray_directions(elevations: np.ndarray, azimuths: np.ndarray) -> np.ndarray:
    cos_e = np.cos(elevations)[:, None]
    sin_e = np.sin(elevations)[:, None]
    dirs = np.empty((elevations.shape[0], azimuths.shape[0], 3))
    dirs[:, :, 0] = cos_e * np.cos(azimuths)[None, :]
    dirs[:, :, 1] = cos_e * np.sin(azimuths)[None, :]
    dirs[:, :, 2] = sin_e * np.ones_like(azimuths)[None, :]
    return dirs


def simulate_sequence(scene: Scene, duration: float, rate: float,
                      rows: int = 16, cols: int = 900,
                      sentinel: float = DEFAULT_SENTINEL):
    """Generate a full sequence: scans, pose entries, point labels.

    rows emulate the sensor's ring fan (default 16 rings, -15..+15 degrees
    in 2-degree steps); cols azimuth steps cover one rotation. Misses and
    beyond-range returns become invalid cells carrying the sentinel. Range
    noise is Gaussian, seeded per scan. Ranges are quantized to float32 so
    in-memory scans round-trip the container format bit-exactly.
    """
    if rate <= 0 or duration <= 0:
        raise SceneError("duration and rate must be positive")
    scene.validate()
    schedules = _schedules(scene)

    n_scans = int(round(duration * rate))
    elevations = np.radians(np.linspace(-15.0, 15.0, rows))
    azimuths = 2.0 * np.pi * np.arange(cols) / cols
    dirs = _ray_directions(elevations, azimuths)
    rh = np.array([[t.radius, t.height] for t in scene.targets]).reshape(-1, 2)
    ids = np.array([t.id for t in scene.targets], dtype=np.int64)

    scans, pose_entries, labels = [], [], []
    for k in range(n_scans):
        t0 = k / rate
        if scene.per_column_motion:
            col_times = t0 + (np.arange(cols) / cols) / rate
        else:
            col_times = np.full(cols, t0)
        origins = scene.sensor.positions_at(col_times)
        centers = np.stack([s.positions_at(col_times) for s in schedules], axis=0) \
            if schedules else np.zeros((0, cols, 2))

        ranges, hit_ids = kernels.render_rays(
            origins, dirs, scene.boxes, scene.cylinders, centers, rh, ids,
            scene.ground, scene.max_range,
        )
        valid = hit_ids >= 0
        if scene.noise_std > 0:
            rng = np.random.default_rng([scene.seed, _NOISE_SALT, k])
            noise = rng.normal(0.0, scene.noise_std, size=ranges.shape)
            ranges = np.where(valid, ranges + noise, ranges)
        ranges = np.where(valid, ranges, sentinel)
        ranges = ranges.astype(np.float32).astype(np.float64)

        pose = scene.sensor.pose_at(t0)
        scans.append(OrganizedScan(
            rows=rows, cols=cols, ranges=ranges,
            elevations=elevations.copy(),
            azimuths=azimuths.copy(), valid=valid,
            sensor_pose=pose, timestamp=t0,
        ))
        pose_entries.append((t0, pose))
        for r, c in zip(*np.nonzero(hit_ids > 0)):
            labels.append(PointLabel(k, int(r), int(c), int(hit_ids[r, c])))
    return scans, pose_entries, labels


# ---------------------------------------------------------------------------
# scene description files: whitespace-separated key and values, one per line


def read_scene(path) -> Scene:
    scene = Scene()
    defaults = dict(speed_min=0.97, speed_max=3.47, pause_prob=0.0,
                    pause_duration=0.0)
    loops = 0
    boxes, cylinders, targets = [], [], []
    with open(path) as fh:
        for lineno, raw in enumerate(fh, 1):
            line = raw.split("#", 1)[0].strip()
            if not line:
                continue
            key, *vals = line.split()
            try:
                if key == "seed":
                    scene.seed = int(vals[0])
                elif key == "noise_std":
                    scene.noise_std = float(vals[0])
                elif key == "max_range":
                    scene.max_range = float(vals[0])
                elif key == "ground":
                    scene.ground = _parse_switch(vals[0])
                elif key == "column_motion":
                    scene.per_column_motion = _parse_switch(vals[0])
                elif key == "sensor":
                    scene.sensor = _parse_sensor(vals)
                elif key == "box":
                    if len(vals) != 6:
                        raise ValueError("box needs 6 values")
                    boxes.append([float(v) for v in vals])
                elif key == "cylinder":
                    if len(vals) != 4:
                        raise ValueError("cylinder needs 4 values")
                    cylinders.append([float(v) for v in vals])
                elif key in defaults:
                    defaults[key] = float(vals[0])
                elif key == "loops":
                    loops = int(vals[0])
                    if loops < 0:
                        raise ValueError("loops must be >= 0")
                elif key == "target":
                    targets.append(_parse_target(vals, defaults, loops))
                else:
                    raise ValueError(f"unknown key {key!r}")
            except (ValueError, IndexError) as exc:
                raise SceneError(f"{path}:{lineno}: {exc}") from exc
    scene.boxes = np.array(boxes, dtype=float).reshape(-1, 6)
    scene.cylinders = np.array(cylinders, dtype=float).reshape(-1, 4)
    scene.targets = targets
    scene.validate()
    return scene


def _parse_switch(value: str) -> bool:
    if value in ("on", "true", "1"):
        return True
    if value in ("off", "false", "0"):
        return False
    raise ValueError(f"expected on/off, got {value!r}")


def _parse_sensor(vals) -> SensorPath:
    kind = vals[0]
    if kind == "static":
        if len(vals) != 4:
            raise ValueError("sensor static needs x y z")
        return SensorPath("static", tuple(float(v) for v in vals[1:4]))
    if kind == "figure8":
        if len(vals) != 6:
            raise ValueError("sensor figure8 needs cx cy z radius period")
        return SensorPath("figure8", tuple(float(v) for v in vals[1:4]),
                          radius=float(vals[4]), period=float(vals[5]))
    raise ValueError(f"unknown sensor kind {kind!r}")


def _parse_target(vals, defaults, loops: int = 0) -> TargetSpec:
    if len(vals) < 5 or (len(vals) - 3) % 2 != 0:
        raise ValueError("target needs id radius height then x y waypoint pairs")
    coords = [float(v) for v in vals[3:]]
    waypoints = np.array(coords, dtype=float).reshape(-1, 2)
    if loops > 0:
        # closed circuit traversed `loops` times
        waypoints = np.concatenate([np.tile(waypoints, (loops, 1)), waypoints[:1]])
    return TargetSpec(
        id=int(vals[0]), radius=float(vals[1]), height=float(vals[2]),
        waypoints=waypoints, **defaults,
    )
