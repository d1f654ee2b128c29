"""CLEAR MOT evaluation: MOTA/MOTP, MT/PT/ML coverage, Pearson correlation.

Hypotheses are matched to ground-truth labels per scan by the Hungarian
method on Euclidean distance, with matches above the threshold forbidden.
Pairs matched in the previous step are kept as long as both survive and
stay within the threshold, so momentary near-misses do not churn
identities. A mismatch is counted each time a label's matched hypothesis
id changes relative to its last known correspondence.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .tracking import hungarian


class UndefinedMetricError(ValueError):
    """Metric has no defined value for the given input."""


@dataclass
class GtTrack:
    """One ground-truth object: per-scan centroid of its labeled points."""

    object_id: int
    centroids: dict = field(default_factory=dict)   # scan_index -> (3,) world

    @property
    def presence(self):
        return set(self.centroids)


@dataclass
class MotReport:
    motp: float
    mota: float
    misses: int
    false_positives: int
    mismatches: int
    total_labels: int
    matches: int
    distance_sum: float
    mt: float
    pt: float
    ml: float


def gt_tracks_from_labels(labels, scans) -> list[GtTrack]:
    """Build per-object centroid tracks from point labels and their scans.

    Labels with object_id 0 (background) are ignored.
    """
    from .scan_model import scan_points_world

    by_scan: dict[int, list] = {}
    for lab in labels:
        if lab.object_id > 0:
            by_scan.setdefault(lab.scan_index, []).append(lab)
    tracks: dict[int, GtTrack] = {}
    for scan_index, scan_labels in by_scan.items():
        if scan_index >= len(scans):
            raise UndefinedMetricError(
                f"label references scan {scan_index} beyond the sequence"
            )
        points = scan_points_world(scans[scan_index])
        per_object: dict[int, list] = {}
        for lab in scan_labels:
            per_object.setdefault(lab.object_id, []).append(points[lab.row, lab.col])
        for object_id, pts in per_object.items():
            track = tracks.setdefault(object_id, GtTrack(object_id))
            track.centroids[scan_index] = np.mean(pts, axis=0)
    return [tracks[k] for k in sorted(tracks)]


def _evaluate(gt_tracks, hyps_by_scan, match_threshold):
    """Shared matching engine for clear_mot and coverage."""
    gt_by_scan: dict[int, list] = {}
    for track in gt_tracks:
        for scan_index, centroid in track.centroids.items():
            gt_by_scan.setdefault(scan_index, []).append((track.object_id, centroid))

    scan_indices = sorted(set(gt_by_scan) | set(hyps_by_scan))
    current: dict[int, int] = {}     # label id -> hyp id while the pair persists
    last_ever: dict[int, int] = {}   # label id -> most recent matched hyp id
    matched_scans: dict[int, int] = {t.object_id: 0 for t in gt_tracks}

    misses = false_positives = mismatches = total_labels = matches = 0
    distance_sum = 0.0

    for t in scan_indices:
        labels = gt_by_scan.get(t, [])
        hyps = hyps_by_scan.get(t, [])
        total_labels += len(labels)
        label_pos = {gid: pos for gid, pos in labels}
        hyp_pos = {hid: pos for hid, pos in hyps}

        pairs = []
        for gid, hid in current.items():
            if gid in label_pos and hid in hyp_pos:
                dist = float(np.linalg.norm(label_pos[gid] - hyp_pos[hid]))
                if dist <= match_threshold:
                    pairs.append((gid, hid, dist))

        taken_g = {gid for gid, _, _ in pairs}
        taken_h = {hid for _, hid, _ in pairs}
        free_g = [gid for gid, _ in labels if gid not in taken_g]
        free_h = [hid for hid, _ in hyps if hid not in taken_h]
        if free_g and free_h:
            cost = np.full((len(free_g), len(free_h)), np.inf)
            for a, gid in enumerate(free_g):
                for b, hid in enumerate(free_h):
                    dist = float(np.linalg.norm(label_pos[gid] - hyp_pos[hid]))
                    if dist <= match_threshold:
                        cost[a, b] = dist
            for a, b in hungarian(cost).items():
                pairs.append((free_g[a], free_h[b], cost[a, b]))

        current = {}
        for gid, hid, dist in pairs:
            if gid in last_ever and last_ever[gid] != hid:
                mismatches += 1
            last_ever[gid] = hid
            current[gid] = hid
            matches += 1
            distance_sum += dist
            matched_scans[gid] += 1

        misses += len(labels) - len(pairs)
        false_positives += len(hyps) - len(pairs)

    if total_labels == 0:
        raise UndefinedMetricError("no ground-truth labels: MOTA undefined")

    mt = pt = ml = 0
    for track in gt_tracks:
        ratio = matched_scans[track.object_id] / len(track.presence)
        if ratio >= 0.8:
            mt += 1
        elif ratio < 0.2:
            ml += 1
        else:
            pt += 1
    n_tracks = len(gt_tracks)

    return MotReport(
        motp=distance_sum / matches if matches else 0.0,
        mota=1.0 - (misses + false_positives + mismatches) / total_labels,
        misses=misses,
        false_positives=false_positives,
        mismatches=mismatches,
        total_labels=total_labels,
        matches=matches,
        distance_sum=distance_sum,
        mt=mt / n_tracks,
        pt=pt / n_tracks,
        ml=ml / n_tracks,
    )


def clear_mot(gt_tracks, hyps_by_scan, match_threshold: float = 0.5) -> MotReport:
    """CLEAR MOT report.

    hyps_by_scan: {scan_index: [(hyp_id, position (3,)), ...]}.
    Raises UndefinedMetricError when there are no ground-truth labels.
    """
    if match_threshold <= 0:
        raise ValueError("match_threshold must be positive")
    return _evaluate(gt_tracks, hyps_by_scan, match_threshold)


def coverage(gt_tracks, hyps_by_scan, match_threshold: float = 0.5):
    """(MT, PT, ML) ratios under the same matching constraints as clear_mot."""
    if not gt_tracks:
        raise UndefinedMetricError("no ground-truth tracks: coverage undefined")
    report = _evaluate(gt_tracks, hyps_by_scan, match_threshold)
    return report.mt, report.pt, report.ml


def pearson(xs, ys) -> float:
    """Pearson correlation coefficient of two equally long sequences."""
    xs = np.asarray(xs, dtype=float)
    ys = np.asarray(ys, dtype=float)
    if xs.shape != ys.shape or xs.ndim != 1:
        raise ValueError("inputs must be equally long 1D sequences")
    if xs.size < 2:
        raise UndefinedMetricError("need at least two samples")
    dx = xs - xs.mean()
    dy = ys - ys.mean()
    denom = np.sqrt(np.sum(dx * dx)) * np.sqrt(np.sum(dy * dy))
    if denom == 0.0:
        raise UndefinedMetricError("zero variance input")
    return float(np.sum(dx * dy) / denom)


def cost(mota: float) -> float:
    """Optimization cost of a tracking result: zero at perfect accuracy."""
    return 1.0 - mota


def hypotheses_by_scan(records, dynamic_only: bool = True):
    """Group track records for evaluation.

    With dynamic_only, only hypotheses classified dynamic at least once in
    their lifetime count (the rest are scene structure, not tracked
    objects); their full trajectories are kept.
    """
    if dynamic_only:
        ever_dynamic = {r.id for r in records if r.dynamic}
        records = [r for r in records if r.id in ever_dynamic]
    out: dict[int, list] = {}
    for r in records:
        out.setdefault(r.scan_index, []).append((r.id, r.position))
    return out


def format_report(report: MotReport) -> str:
    lines = [
        f"mota={report.mota:.6f}",
        f"motp={report.motp:.6f}",
        f"misses={report.misses}",
        f"false_positives={report.false_positives}",
        f"mismatches={report.mismatches}",
        f"total_labels={report.total_labels}",
        f"matches={report.matches}",
        f"distance_sum={report.distance_sum:.6f}",
        f"mt={report.mt:.6f}",
        f"pt={report.pt:.6f}",
        f"ml={report.ml:.6f}",
    ]
    return "\n".join(lines) + "\n"


def report_table_row(report: MotReport) -> str:
    """One results-table row: MOTA, MOTP, MT, PT, ML."""
    return (
        f"{report.mota:.3f} {report.motp:.3f}m {report.mt:.2f} "
        f"{report.pt:.2f} {report.ml:.2f}"
    )
