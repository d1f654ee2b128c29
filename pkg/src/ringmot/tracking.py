"""Multi-object tracking with per-hypothesis constant-velocity Kalman filters.

Each hypothesis carries a 6D state (position, velocity), a covariance, and
bounding boxes. Detections are assigned by the Hungarian method on a
Bhattacharyya-distance cost matrix with gated entries. Corrected velocities
are truncated: speeds up to v_zero collapse to zero (sensor noise and
partial-occlusion jitter must not look like motion), speeds above v_max are
rescaled (volatile detections on sparse, alternating object parts).

Lifecycle: unmatched plain detections spawn hypotheses, relaxed ones never
do; hypotheses are deleted once a position-covariance eigenvalue exceeds a
bound (lost objects), then younger hypotheses within the prune radius of
older ones are removed (oversegmentation, misassignment). A hypothesis
starts static and becomes dynamic, irrevocably, when its current box no
longer intersects its initial box.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np
from scipy.optimize import linear_sum_assignment

from .detection import Detection
from .geometry import Box3

_JITTER = 1e-12


@dataclass
class TrackerConfig:
    process_noise_accel: float = 2.0   # m/s^2 white-acceleration std
    measurement_noise: float = 0.05    # meters std
    assign_gate: float = 4.0           # Bhattacharyya bound
    cov_eigen_max: float = 1.0         # m^2, position block
    prune_radius: float = 0.5          # meters
    v_zero: float = 1.0 / 3.6          # 1 km/h
    v_max: float = 10.0 / 3.6          # 10 km/h
    init_pos_std: float = 0.1          # new-hypothesis position std
    init_vel_std: float = 1.0          # new-hypothesis velocity std

    def validate(self) -> None:
        # noise stds may be zero (exact-measurement scenarios); bounds must not
        if self.process_noise_accel < 0 or self.measurement_noise < 0:
            raise ValueError("noise parameters must be non-negative")
        for name in ("assign_gate", "cov_eigen_max", "prune_radius",
                     "v_zero", "v_max", "init_pos_std", "init_vel_std"):
            if getattr(self, name) <= 0:
                raise ValueError(f"{name} must be positive")
        if self.v_zero >= self.v_max:
            raise ValueError("need v_zero < v_max")


@dataclass
class Hypothesis:
    id: int
    state: np.ndarray              # (6,) x y z vx vy vz
    covariance: np.ndarray         # (6, 6)
    current_bbox: Box3
    initial_bbox: Box3
    bbox_history: list = field(default_factory=list)  # (scan_index, Box3, was_predicted)
    born_at: int = 0
    last_assigned: int = 0
    dynamic: bool = False

    @property
    def position(self) -> np.ndarray:
        return self.state[:3]

    @property
    def velocity(self) -> np.ndarray:
        return self.state[3:]


def _transition(dt: float) -> np.ndarray:
    f = np.eye(6)
    f[:3, 3:] = dt * np.eye(3)
    return f


def _process_noise(dt: float, accel_std: float) -> np.ndarray:
    q = accel_std * accel_std
    i3 = np.eye(3)
    top = np.hstack([dt ** 4 / 4.0 * i3, dt ** 3 / 2.0 * i3])
    bottom = np.hstack([dt ** 3 / 2.0 * i3, dt ** 2 * i3])
    return q * np.vstack([top, bottom])


def _symmetrize(p: np.ndarray) -> np.ndarray:
    return (p + p.T) / 2.0


def predict(hypotheses, dt: float, cfg: TrackerConfig):
    """Advance every hypothesis by dt under the constant-velocity model."""
    f = _transition(dt)
    q = _process_noise(dt, cfg.process_noise_accel)
    for h in hypotheses:
        h.state = f @ h.state
        h.covariance = _symmetrize(f @ h.covariance @ f.T + q)
        h.current_bbox = h.current_bbox.translated(h.velocity * dt)
    return hypotheses


def bhattacharyya(mean1, cov1, mean2, cov2) -> float:
    """Bhattacharyya distance between two Gaussians.

    Raises numpy.linalg.LinAlgError when a covariance is not positive
    definite.
    """
    cov1 = np.asarray(cov1, dtype=float)
    cov2 = np.asarray(cov2, dtype=float)
    logdet1 = 2.0 * np.sum(np.log(np.diag(np.linalg.cholesky(cov1))))
    logdet2 = 2.0 * np.sum(np.log(np.diag(np.linalg.cholesky(cov2))))
    sigma = (cov1 + cov2) / 2.0
    chol = np.linalg.cholesky(sigma)
    logdet_sigma = 2.0 * np.sum(np.log(np.diag(chol)))
    diff = np.asarray(mean1, dtype=float) - np.asarray(mean2, dtype=float)
    solved = np.linalg.solve(sigma, diff)
    return float(diff @ solved / 8.0 + 0.5 * (logdet_sigma - 0.5 * (logdet1 + logdet2)))


def hungarian(cost: np.ndarray) -> dict[int, int]:
    """Minimum-cost one-to-one assignment; np.inf marks forbidden entries.

    Among assignments that avoid every forbidden entry, the returned map
    covers as many pairs as possible at minimum total cost. Rows and columns
    reachable only through forbidden entries stay unassigned.
    """
    cost = np.asarray(cost, dtype=float)
    if cost.size == 0:
        return {}
    finite = np.isfinite(cost)
    if not finite.any():
        return {}
    penalty = 2.0 * np.abs(cost[finite]).sum() + 1.0
    padded = np.where(finite, cost, penalty)
    rows, cols = linear_sum_assignment(padded)
    return {int(r): int(c) for r, c in zip(rows, cols) if finite[r, c]}


def _floored(emp: np.ndarray, floor: float) -> np.ndarray:
    w, v = np.linalg.eigh(_symmetrize(emp))
    return _symmetrize(v @ np.diag(np.maximum(w, floor)) @ v.T)


def detection_covariance(detection: Detection, cfg: TrackerConfig) -> np.ndarray:
    """Empirical covariance of the detection's points (its spatial extent).

    Sparse clusters can be rank deficient, so eigenvalues are floored at the
    measurement noise variance (degenerate clusters fall back to an
    isotropic matrix). Used on both sides of the assignment distance, which
    keeps the scales of the two Gaussians comparable and the gate roomy at
    object-extent scale.
    """
    points = detection.cluster.points
    centered = points - points.mean(axis=0)
    emp = centered.T @ centered / points.shape[0]
    return _floored(emp, max(cfg.measurement_noise ** 2, _JITTER))


def centroid_covariance(detection: Detection, cfg: TrackerConfig) -> np.ndarray:
    """Measurement covariance of the detection centroid: point scatter over N.

    The centroid of N points is far more certain than any single point;
    correcting with the raw extent matrix would lag the filter behind moving
    targets. Floored at the measurement noise variance.
    """
    points = detection.cluster.points
    n = points.shape[0]
    centered = points - points.mean(axis=0)
    emp = centered.T @ centered / (n * n)
    return _floored(emp, max(cfg.measurement_noise ** 2, _JITTER))


def associate(hypotheses, detections, cfg: TrackerConfig):
    """Gate + Hungarian assignment of detections to predicted hypotheses.

    Returns (assignment: hyp index -> det index, unmatched hypothesis
    indices, unmatched detection indices).
    """
    n, m = len(hypotheses), len(detections)
    cost = np.full((n, m), np.inf)
    if n and m:
        det_covs = [detection_covariance(d, cfg) for d in detections]
        for i, h in enumerate(hypotheses):
            pos_cov = h.covariance[:3, :3]
            for j, d in enumerate(detections):
                dist = bhattacharyya(h.position, pos_cov + det_covs[j],
                                     d.cluster.centroid, det_covs[j])
                if dist <= cfg.assign_gate:
                    cost[i, j] = dist
    assignment = hungarian(cost)
    unmatched_h = [i for i in range(n) if i not in assignment]
    matched_d = set(assignment.values())
    unmatched_d = [j for j in range(m) if j not in matched_d]
    return assignment, unmatched_h, unmatched_d


def truncate_velocity(velocity, cfg: TrackerConfig) -> np.ndarray:
    """Zero speeds up to v_zero, rescale speeds above v_max, keep heading."""
    v = np.asarray(velocity, dtype=float)
    speed = float(np.linalg.norm(v))
    if speed <= cfg.v_zero:
        return np.zeros(3)
    if speed > cfg.v_max:
        return v * (cfg.v_max / speed)
    return v.copy()


def _correct(h: Hypothesis, measurement: np.ndarray, r_meas: np.ndarray) -> None:
    # Joseph-form update keeps the covariance symmetric PSD
    s = h.covariance[:3, :3] + r_meas + _JITTER * np.eye(3)
    gain = np.linalg.solve(s.T, h.covariance[:, :3].T).T
    h.state = h.state + gain @ (measurement - h.state[:3])
    ikh = np.eye(6)
    ikh[:, :3] -= gain
    h.covariance = _symmetrize(ikh @ h.covariance @ ikh.T + gain @ r_meas @ gain.T)


def _spawn(detection: Detection, scan_index: int, new_id: int,
           cfg: TrackerConfig) -> Hypothesis:
    state = np.zeros(6)
    state[:3] = detection.cluster.centroid
    cov = np.diag([cfg.init_pos_std ** 2] * 3 + [cfg.init_vel_std ** 2] * 3)
    bbox = detection.cluster.bbox.copy()
    return Hypothesis(
        id=new_id,
        state=state,
        covariance=cov,
        current_bbox=bbox,
        initial_bbox=bbox.copy(),
        bbox_history=[(scan_index, bbox.copy(), False)],
        born_at=scan_index,
        last_assigned=scan_index,
    )


def update_tracks(hypotheses, detections, assignment, scan_index: int,
                  cfg: TrackerConfig, id_counter) -> list[Hypothesis]:
    """Apply one scan's assignment: correct, spawn, record, delete, classify.

    id_counter: iterator yielding fresh hypothesis ids (never reused).
    Order of operations: corrections and history, creation, covariance
    deletion, vicinity pruning, static/dynamic classification.
    """
    for i, j in assignment.items():
        h = hypotheses[i]
        d = detections[j]
        _correct(h, d.cluster.centroid, centroid_covariance(d, cfg))
        h.state[3:] = truncate_velocity(h.state[3:], cfg)
        h.current_bbox = d.cluster.bbox.copy()
        h.bbox_history.append((scan_index, h.current_bbox.copy(), False))
        h.last_assigned = scan_index

    for i, h in enumerate(hypotheses):
        if i not in assignment:
            h.bbox_history.append((scan_index, h.current_bbox.copy(), True))

    matched_d = set(assignment.values())
    spawned = [
        _spawn(d, scan_index, next(id_counter), cfg)
        for j, d in enumerate(detections)
        if j not in matched_d and not d.relaxed
    ]
    pool = list(hypotheses) + spawned

    surviving = [
        h for h in pool
        if np.linalg.eigvalsh(h.covariance[:3, :3]).max() <= cfg.cov_eigen_max
    ]

    kept: list[Hypothesis] = []
    for h in sorted(surviving, key=lambda h: (h.born_at, h.id)):
        if all(np.linalg.norm(h.position - k.position) > cfg.prune_radius for k in kept):
            kept.append(h)
    kept.sort(key=lambda h: h.id)

    for h in kept:
        if not h.dynamic and not h.current_bbox.intersects(h.initial_bbox):
            h.dynamic = True
    return kept


@dataclass
class TrackRecord:
    """One track-file row: a hypothesis' state at one scan."""

    scan_index: int
    id: int
    dynamic: bool
    position: np.ndarray
    velocity: np.ndarray
    bbox: Box3
    was_predicted: bool


def write_track_file(path, records) -> None:
    """One line per (scan_index, id):
    scan_index id dynamic x y z vx vy vz minx miny minz maxx maxy maxz was_predicted
    """
    with open(path, "w") as fh:
        for r in records:
            p, v = r.position, r.velocity
            lo, hi = r.bbox.min_corner, r.bbox.max_corner
            fh.write(
                f"{r.scan_index} {r.id} {int(r.dynamic)} "
                f"{p[0]:.6f} {p[1]:.6f} {p[2]:.6f} "
                f"{v[0]:.6f} {v[1]:.6f} {v[2]:.6f} "
                f"{lo[0]:.6f} {lo[1]:.6f} {lo[2]:.6f} "
                f"{hi[0]:.6f} {hi[1]:.6f} {hi[2]:.6f} {int(r.was_predicted)}\n"
            )


def read_track_file(path) -> list[TrackRecord]:
    from .scan_model import FormatError

    records = []
    with open(path) as fh:
        for lineno, line in enumerate(fh, 1):
            parts = line.split()
            if not parts:
                continue
            if len(parts) != 16:
                raise FormatError(f"{path}:{lineno}: expected 16 fields, got {len(parts)}")
            try:
                vals = [float(v) for v in parts]
            except ValueError as exc:
                raise FormatError(f"{path}:{lineno}: {exc}") from exc
            records.append(TrackRecord(
                scan_index=int(vals[0]),
                id=int(vals[1]),
                dynamic=bool(int(vals[2])),
                position=np.array(vals[3:6]),
                velocity=np.array(vals[6:9]),
                bbox=Box3(np.array(vals[9:12]), np.array(vals[12:15])),
                was_predicted=bool(int(vals[15])),
            ))
    return records


class Tracker:
    """Owns the hypothesis set; one update per scan, ordered by scan index."""

    def __init__(self, cfg: TrackerConfig | None = None, fallback_dt: float = 0.1):
        self.cfg = cfg or TrackerConfig()
        self.cfg.validate()
        self.fallback_dt = fallback_dt
        self.hypotheses: list[Hypothesis] = []
        self._next_id = 0
        self._last_timestamp: float | None = None

    def _ids(self):
        while True:
            value = self._next_id
            self._next_id += 1
            yield value

    def active_boxes(self):
        """(id, current box) feedback for the detector's relaxed model."""
        return [(h.id, h.current_bbox) for h in self.hypotheses]

    def step(self, detections, scan_index: int,
             timestamp: float | None = None) -> dict[int, int]:
        """Process one scan's detections; returns {hypothesis id: det index}."""
        if timestamp is not None and self._last_timestamp is not None:
            dt = timestamp - self._last_timestamp
            if dt <= 0:
                dt = self.fallback_dt
        else:
            dt = self.fallback_dt
        if timestamp is not None:
            self._last_timestamp = timestamp

        predict(self.hypotheses, dt, self.cfg)
        assignment, _, _ = associate(self.hypotheses, detections, self.cfg)
        by_id = {self.hypotheses[i].id: j for i, j in assignment.items()}
        self.hypotheses = update_tracks(
            self.hypotheses, detections, assignment, scan_index, self.cfg, self._ids()
        )
        live = {h.id for h in self.hypotheses}
        return {hid: j for hid, j in by_id.items() if hid in live}
