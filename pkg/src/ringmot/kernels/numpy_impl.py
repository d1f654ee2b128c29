"""Pure-numpy kernel implementations (fallback backend).

Array contracts shared with the numba backend:

sliding_median_circular(values (n,) f64, kernels (n,) int) -> (n,) f64
label_regions(foreground (R,C) bool, points (R,C,3) f64, radius, theta,
              wrap_cols) -> (R,C) int32, -1 for background
render_rays(origins (C,3), dirs (R,C,3) unit vectors,
            boxes (B,6) [minx miny minz maxx maxy maxz],
            cylinders (S,4) [cx cy radius height] standing on z=0,
            target_centers (T,C,2) per-column xy, target_rh (T,2) [radius height],
            target_ids (T,) int, has_ground, max_range)
    -> ranges (R,C) f64 (inf on miss), ids (R,C) int32 (-1 miss, 0 static, >0 target)
"""

from __future__ import annotations

import numpy as np
from numpy.lib.stride_tricks import sliding_window_view
from scipy.sparse import coo_matrix
from scipy.sparse.csgraph import connected_components

_EPS = 1e-12


def sliding_median_circular(values, kernels):
    values = np.asarray(values, dtype=float)
    kernels = np.asarray(kernels)
    n = values.shape[0]
    out = np.empty(n)
    for k in np.unique(kernels):
        k = int(k)
        if k > n:
            raise ValueError(f"kernel {k} exceeds ring length {n}")
        sel = kernels == k
        half = k // 2
        if half:
            padded = np.concatenate([values[n - half:], values, values[:half]])
        else:
            padded = values
        windows = sliding_window_view(padded, k)
        out[sel] = np.median(windows[sel], axis=1)
    return out


def _neighbor_offsets(radius):
    offs = []
    for dr in range(-radius, radius + 1):
        span = radius - abs(dr)
        for dc in range(-span, span + 1):
            # half the symmetric set; edges are undirected
            if dr > 0 or (dr == 0 and dc > 0):
                offs.append((dr, dc))
    return offs


def label_regions(foreground, points, radius, theta, wrap_cols=True):
    fg = np.asarray(foreground, dtype=bool)
    pts = np.asarray(points, dtype=float)
    rows, cols = fg.shape
    n = rows * cols
    theta2 = theta * theta

    edges_i = []
    edges_j = []
    for dr, dc in _neighbor_offsets(int(radius)):
        r0, r1 = max(0, -dr), min(rows, rows - dr)
        if r0 >= r1:
            continue
        a_fg = fg[r0:r1]
        a_pts = pts[r0:r1]
        if wrap_cols:
            b_fg = np.roll(fg[r0 + dr:r1 + dr], -dc, axis=1)
            b_pts = np.roll(pts[r0 + dr:r1 + dr], -dc, axis=1)
            diff = a_pts - b_pts
            pair = a_fg & b_fg & (np.einsum("rck,rck->rc", diff, diff) < theta2)
            rr, cc = np.nonzero(pair)
            src = (rr + r0) * cols + cc
            dst = (rr + r0 + dr) * cols + (cc + dc) % cols
        else:
            c0, c1 = max(0, -dc), min(cols, cols - dc)
            if c0 >= c1:
                continue
            b_fg = fg[r0 + dr:r1 + dr, c0 + dc:c1 + dc]
            diff = a_pts[:, c0:c1] - pts[r0 + dr:r1 + dr, c0 + dc:c1 + dc]
            pair = a_fg[:, c0:c1] & b_fg & (np.einsum("rck,rck->rc", diff, diff) < theta2)
            rr, cc = np.nonzero(pair)
            src = (rr + r0) * cols + (cc + c0)
            dst = (rr + r0 + dr) * cols + (cc + c0 + dc)
        edges_i.append(src)
        edges_j.append(dst)

    labels = np.full(n, -1, dtype=np.int32)
    fg_idx = np.nonzero(fg.ravel())[0]
    if fg_idx.size == 0:
        return labels.reshape(rows, cols)

    if edges_i:
        src = np.concatenate(edges_i)
        dst = np.concatenate(edges_j)
    else:
        src = dst = np.empty(0, dtype=np.int64)
    graph = coo_matrix((np.ones(src.shape[0], dtype=np.int8), (src, dst)), shape=(n, n))
    _, comp = connected_components(graph, directed=False)

    # renumber components by first row-major foreground cell
    comps = comp[fg_idx]
    uniq, first = np.unique(comps, return_index=True)
    order = np.argsort(first)
    remap = np.empty(uniq.shape[0], dtype=np.int32)
    remap[order] = np.arange(uniq.shape[0], dtype=np.int32)
    lookup = dict(zip(uniq.tolist(), remap.tolist()))
    labels[fg_idx] = np.array([lookup[c] for c in comps.tolist()], dtype=np.int32)
    return labels.reshape(rows, cols)


def render_rays(origins, dirs, boxes, cylinders, target_centers, target_rh,
                target_ids, has_ground, max_range):
    origins = np.asarray(origins, dtype=float)
    dirs = np.asarray(dirs, dtype=float)
    rows, cols, _ = dirs.shape
    ox = origins[None, :, 0]
    oy = origins[None, :, 1]
    oz = origins[None, :, 2]
    dx = dirs[:, :, 0]
    dy = dirs[:, :, 1]
    dz = dirs[:, :, 2]

    best = np.full((rows, cols), np.inf)
    ids = np.full((rows, cols), -1, dtype=np.int32)

    def consider(t, valid, oid):
        hit = valid & (t > _EPS) & (t < best)
        best[hit] = t[hit]
        ids[hit] = oid

    if has_ground:
        down = dz < -_EPS
        with np.errstate(divide="ignore", invalid="ignore"):
            t = np.where(down, -oz / dz, np.inf)
        consider(t, down, 0)

    for b in range(boxes.shape[0]):
        consider(_ray_box(ox, oy, oz, dx, dy, dz, boxes[b]), np.True_, 0)

    for s in range(cylinders.shape[0]):
        cx, cy, rad, height = cylinders[s]
        t = _ray_cylinder(ox, oy, oz, dx, dy, dz, cx, cy, rad, height)
        consider(t, np.True_, 0)

    for k in range(target_centers.shape[0]):
        rad, height = target_rh[k]
        cx = target_centers[k, :, 0][None, :]
        cy = target_centers[k, :, 1][None, :]
        t = _ray_cylinder(ox, oy, oz, dx, dy, dz, cx, cy, rad, height)
        consider(t, np.True_, int(target_ids[k]))

    miss = best > max_range
    ranges = np.where(miss, np.inf, best)
    ids = np.where(miss, np.int32(-1), ids)
    return ranges, ids


def _ray_box(ox, oy, oz, dx, dy, dz, box):
    tmin = np.full(np.broadcast_shapes(ox.shape, dx.shape), -np.inf)
    tmax = np.full_like(tmin, np.inf)
    alive = np.ones(tmin.shape, dtype=bool)
    for o, d, lo, hi in ((ox, dx, box[0], box[3]),
                         (oy, dy, box[1], box[4]),
                         (oz, dz, box[2], box[5])):
        o = np.broadcast_to(o, tmin.shape)
        d = np.broadcast_to(d, tmin.shape)
        parallel = np.abs(d) < _EPS
        alive &= ~(parallel & ((o < lo) | (o > hi)))
        with np.errstate(divide="ignore", invalid="ignore"):
            t1 = (lo - o) / d
            t2 = (hi - o) / d
        swap = t1 > t2
        t1, t2 = np.where(swap, t2, t1), np.where(swap, t1, t2)
        tmin = np.where(parallel, tmin, np.maximum(tmin, t1))
        tmax = np.where(parallel, tmax, np.minimum(tmax, t2))
    alive &= (tmax >= tmin) & (tmin > _EPS)
    return np.where(alive, tmin, np.inf)


def _ray_cylinder(ox, oy, oz, dx, dy, dz, cx, cy, rad, height):
    """Vertical cylinder standing on z=0: side surface plus top cap."""
    rx = ox - cx
    ry = oy - cy
    a = dx * dx + dy * dy
    b = 2.0 * (rx * dx + ry * dy)
    c = rx * rx + ry * ry - rad * rad
    disc = b * b - 4.0 * a * c
    ok = (disc >= 0.0) & (a > _EPS)
    sq = np.sqrt(np.where(ok, disc, 0.0))
    with np.errstate(divide="ignore", invalid="ignore"):
        t_side = np.where(ok, (-b - sq) / (2.0 * a), np.inf)
    z = oz + t_side * dz
    side_ok = ok & (t_side > _EPS) & (z >= 0.0) & (z <= height)
    t_side = np.where(side_ok, t_side, np.inf)

    moving_z = np.abs(np.broadcast_to(dz, t_side.shape)) > _EPS
    with np.errstate(divide="ignore", invalid="ignore"):
        t_cap = np.where(moving_z, (height - oz) / dz, np.inf)
    px = rx + t_cap * dx
    py = ry + t_cap * dy
    cap_ok = moving_z & (t_cap > _EPS) & (px * px + py * py <= rad * rad)
    t_cap = np.where(cap_ok, t_cap, np.inf)
    return np.minimum(t_side, t_cap)
