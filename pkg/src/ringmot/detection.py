"""Detection generation: region growing on the scan grid plus model filtering.

Segmented cells are clustered by growing regions over the grid neighborhood
(columns wrap, the scan being circular), gated by the 3D distance between
neighboring points so partially occluding objects stay separate. Clusters
near the rotation seam are fused when they belong to one world object.
Surviving clusters are tested against a simple size model; the test relaxes
near already-tracked objects, and the minimum height is waived for clusters
spanning the full vertical field of view.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from scipy.spatial.distance import cdist

from . import kernels
from .geometry import Box3
from .scan_model import OrganizedScan, scan_points_world
from .segmentation import SegmentMask


@dataclass
class ClusterConfig:
    search_radius: int = 2        # grid cells, L1
    distance_threshold: float = 0.5   # meters, point-to-point gate
    min_cluster_size: int = 3

    def validate(self) -> None:
        if self.search_radius < 1:
            raise ValueError("search_radius must be >= 1")
        if self.distance_threshold <= 0:
            raise ValueError("distance_threshold must be positive")
        if self.min_cluster_size < 1:
            raise ValueError("min_cluster_size must be >= 1")


@dataclass
class ObjectModel:
    min_height: float = 0.5
    max_height: float = 2.2
    max_diagonal: float = 0.9
    relaxed_max_diagonal: float = 1.8
    vicinity_radius: float = 1.0

    def validate(self) -> None:
        if not 0 < self.min_height < self.max_height:
            raise ValueError("need 0 < min_height < max_height")
        if not 0 < self.max_diagonal < self.relaxed_max_diagonal:
            raise ValueError("need 0 < max_diagonal < relaxed_max_diagonal")
        if self.vicinity_radius <= 0:
            raise ValueError("vicinity_radius must be positive")


@dataclass
class Cluster:
    cells: np.ndarray      # (N, 2) int, (row, col)
    points: np.ndarray     # (N, 3) world frame
    centroid: np.ndarray
    bbox: Box3
    touches_top: bool
    touches_bottom: bool


@dataclass
class Detection:
    cluster: Cluster
    relaxed: bool = False
    relaxed_by: int | None = None   # id of the track that triggered relaxation


def _make_cluster(cells, points, n_rows) -> Cluster:
    return Cluster(
        cells=cells,
        points=points,
        centroid=points.mean(axis=0),
        bbox=Box3.from_points(points),
        touches_top=bool(np.any(cells[:, 0] == n_rows - 1)),
        touches_bottom=bool(np.any(cells[:, 0] == 0)),
    )


def region_grow(scan: OrganizedScan, mask: SegmentMask, cfg: ClusterConfig,
                points: np.ndarray | None = None) -> list[Cluster]:
    """Grow clusters over foreground cells of the grid.

    A neighbor joins a cluster iff it is foreground, within grid L1 radius
    of the current point (columns wrapping), and closer than the distance
    threshold in 3D. Clusters smaller than min_cluster_size are dropped.
    """
    if points is None:
        points = scan_points_world(scan)
    labels = kernels.label_regions(
        mask.foreground, points, cfg.search_radius, cfg.distance_threshold, True
    )
    flat_labels = labels.ravel()
    member = np.nonzero(flat_labels >= 0)[0]
    if member.size == 0:
        return []
    groups = flat_labels[member]
    order = np.argsort(groups, kind="stable")
    member = member[order]
    groups = groups[order]
    boundaries = np.nonzero(np.diff(groups))[0] + 1
    clusters = []
    flat_points = points.reshape(-1, 3)
    for chunk in np.split(member, boundaries):
        if chunk.size < cfg.min_cluster_size:
            continue
        cells = np.column_stack(np.divmod(chunk, scan.cols)).astype(np.int64)
        clusters.append(_make_cluster(cells, flat_points[chunk], scan.rows))
    return clusters


def fuse_wraparound(clusters: list[Cluster], scan: OrganizedScan, theta: float,
                    seam_cols: int = 4) -> list[Cluster]:
    """Fuse clusters near the rotation seam that belong to one world object.

    Candidates are clusters with cells in the first or last `seam_cols`
    columns or in the azimuth overlap region (columns whose unwrapped
    azimuth re-enters the starting azimuth). Candidate pairs with any two
    points closer than theta are merged.
    """
    if len(clusters) < 2:
        return list(clusters)

    steps = np.mod(np.diff(scan.azimuths), 2.0 * np.pi)
    unwrapped = scan.azimuths[0] + np.concatenate([[0.0], np.cumsum(steps)])
    overlap = unwrapped >= scan.azimuths[0] + 2.0 * np.pi - 1e-9

    def near_seam(cluster: Cluster) -> bool:
        cols = cluster.cells[:, 1]
        if np.any(cols < seam_cols) or np.any(cols >= scan.cols - seam_cols):
            return True
        return bool(np.any(overlap[cols]))

    candidates = [i for i, c in enumerate(clusters) if near_seam(c)]
    parent = list(range(len(clusters)))

    def find(i):
        while parent[i] != i:
            parent[i] = parent[parent[i]]
            i = parent[i]
        return i

    for a_pos, i in enumerate(candidates):
        for j in candidates[a_pos + 1:]:
            if find(i) == find(j):
                continue
            if cdist(clusters[i].points, clusters[j].points).min() < theta:
                parent[find(j)] = find(i)

    merged: dict[int, list[int]] = {}
    for i in range(len(clusters)):
        merged.setdefault(find(i), []).append(i)

    out = []
    for root in sorted(merged):
        members = merged[root]
        if len(members) == 1:
            out.append(clusters[members[0]])
            continue
        cells = np.concatenate([clusters[m].cells for m in members])
        points = np.concatenate([clusters[m].points for m in members])
        out.append(_make_cluster(cells, points, scan.rows))
    return out


def filter_clusters(clusters: list[Cluster], model: ObjectModel,
                    active_tracks) -> list[Detection]:
    """Keep clusters matching the object size model.

    active_tracks: iterable of (track_id, Box3) for currently tracked
    objects. Clusters whose centroid lies within vicinity_radius of a track
    box centroid are judged by the relaxed rule (no minimum height, wider
    diagonal bound) and flagged relaxed. The minimum height is also waived
    for clusters touching both the top and bottom scan rings, which may be
    scanned only partially.
    """
    active_tracks = list(active_tracks)
    detections = []
    for cluster in clusters:
        height = cluster.bbox.height
        diagonal = cluster.bbox.horizontal_diagonal
        if height > model.max_height:
            continue
        near_id = None
        for track_id, box in active_tracks:
            if np.linalg.norm(cluster.centroid - box.centroid) <= model.vicinity_radius:
                near_id = track_id
                break
        if near_id is not None:
            if diagonal <= model.relaxed_max_diagonal:
                detections.append(Detection(cluster, relaxed=True, relaxed_by=near_id))
            continue
        if diagonal > model.max_diagonal:
            continue
        if height < model.min_height and not (cluster.touches_top and cluster.touches_bottom):
            continue
        detections.append(Detection(cluster, relaxed=False))
    return detections


def detect_scan(scan: OrganizedScan, mask: SegmentMask, cfg: ClusterConfig,
                model: ObjectModel, active_tracks,
                points: np.ndarray | None = None) -> list[Detection]:
    """Full detection stage: grow, fuse at the seam, filter by model."""
    clusters = region_grow(scan, mask, cfg, points=points)
    clusters = fuse_wraparound(clusters, scan, cfg.distance_threshold,
                               seam_cols=2 * cfg.search_radius)
    return filter_clusters(clusters, model, active_tracks)
