"""Static-world cloud log: removes dynamic objects' points, retroactively.

Each processed scan contributes its valid points minus the points of
detections assigned to dynamic hypotheses. When a hypothesis turns dynamic,
its whole bounding-box history (from the time it was still classified
static, and predicted boxes bridging lost-track gaps) is replayed against
the logged clouds, removing the points it left behind. Applications are
indexed per (hypothesis, scan) so replaying is idempotent and incremental.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .scan_model import OrganizedScan, scan_points_world


class LogConsistencyError(ValueError):
    """A hypothesis history references a scan the log never saw."""


@dataclass
class LogEntry:
    scan_index: int
    points: np.ndarray   # (N, 3) world frame, shrinks as boxes are applied
    cells: np.ndarray    # (N, 2) source grid cells, parallel to points


@dataclass
class CloudLog:
    entries: dict = field(default_factory=dict)       # scan_index -> LogEntry
    applied: dict = field(default_factory=dict)       # hyp id -> set of scan_index
    _dirty: set = field(default_factory=set)

    def append(self, scan_index: int, points: np.ndarray, cells: np.ndarray) -> LogEntry:
        if self.entries and scan_index <= max(self.entries):
            raise LogConsistencyError(f"scan {scan_index} appended out of order")
        entry = LogEntry(scan_index, points, cells)
        self.entries[scan_index] = entry
        self._dirty.add(scan_index)
        return entry

    def apply_box(self, hyp_id: int, scan_index: int, box, margin: float) -> int:
        """Remove logged points of one scan inside the inflated box.

        Returns the number of points removed; repeated application for the
        same (hyp_id, scan_index) is a no-op.
        """
        seen = self.applied.setdefault(hyp_id, set())
        if scan_index in seen:
            return 0
        if scan_index not in self.entries:
            raise LogConsistencyError(
                f"hypothesis {hyp_id} references scan {scan_index} missing from the log"
            )
        seen.add(scan_index)
        entry = self.entries[scan_index]
        inside = box.inflated(margin).contains(entry.points)
        removed = int(inside.sum())
        if removed:
            entry.points = entry.points[~inside]
            entry.cells = entry.cells[~inside]
            self._dirty.add(scan_index)
        return removed

    def flush(self, out_dir) -> None:
        """Write entries changed since the last flush as static_<i>.xyz files."""
        import os

        os.makedirs(out_dir, exist_ok=True)
        for scan_index in sorted(self._dirty):
            entry = self.entries[scan_index]
            path = os.path.join(out_dir, f"static_{scan_index}.xyz")
            with open(path, "w") as fh:
                for x, y, z in entry.points:
                    fh.write(f"{x:.4f} {y:.4f} {z:.4f}\n")
        self._dirty.clear()

    def write_manifest(self, path) -> None:
        """List retro-filter applications: hypothesis id and scan range."""
        with open(path, "w") as fh:
            for hyp_id in sorted(self.applied):
                scans = self.applied[hyp_id]
                if scans:
                    fh.write(f"{hyp_id} {min(scans)} {max(scans)} {len(scans)}\n")


def filter_current(log: CloudLog, scan: OrganizedScan, scan_index: int,
                   detections, hypotheses, assignment,
                   points: np.ndarray | None = None) -> LogEntry:
    """Log one scan's valid points, minus detections of dynamic hypotheses.

    assignment: {hypothesis id: detection index} from this scan's tracker
    update. Points of detections assigned to static hypotheses are kept.
    """
    if points is None:
        points = scan_points_world(scan)
    keep = scan.valid.copy()
    by_id = {h.id: h for h in hypotheses}
    for hyp_id, det_index in assignment.items():
        hyp = by_id.get(hyp_id)
        if hyp is None or not hyp.dynamic:
            continue
        cells = detections[det_index].cluster.cells
        keep[cells[:, 0], cells[:, 1]] = False
    rows, cols = np.nonzero(keep)
    retained = points[rows, cols]
    cells = np.column_stack([rows, cols])
    return log.append(scan_index, retained, cells)


def retro_filter(log: CloudLog, hypothesis, margin: float = 0.1) -> int:
    """Replay a hypothesis' box history against the log; returns points removed.

    Covers boxes recorded while the hypothesis was still classified static
    and predicted boxes from lost-track gaps. Already-applied (hypothesis,
    scan) pairs are skipped, so calling this every scan is cheap and a
    second call with the same history is a no-op.
    """
    removed = 0
    for scan_index, box, _was_predicted in hypothesis.bbox_history:
        applied = log.applied.get(hypothesis.id)
        if applied is not None and scan_index in applied:
            continue
        removed += log.apply_box(hypothesis.id, scan_index, box, margin)
    return removed
