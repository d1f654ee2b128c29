"""Numba @njit kernel implementations (default backend).

Same array contracts as numpy_impl; arithmetic mirrors it so both backends
agree to floating-point roundoff.
"""

from __future__ import annotations

import numpy as np
from numba import njit

_EPS = 1e-12


@njit(cache=True)
def _median_loop(values, kernels, out):
    n = values.shape[0]
    kmax = 1
    for i in range(n):
        if kernels[i] > kmax:
            kmax = kernels[i]
    if kmax > n:
        return -1
    buf = np.empty(kmax)
    for i in range(n):
        k = int(kernels[i])
        half = k // 2
        start = i - half
        for j in range(k):
            idx = start + j
            if idx < 0:
                idx += n
            elif idx >= n:
                idx -= n
            buf[j] = values[idx]
        window = np.sort(buf[:k])
        out[i] = window[half]
    return 0


def sliding_median_circular(values, kernels):
    values = np.ascontiguousarray(values, dtype=np.float64)
    kernels = np.ascontiguousarray(kernels, dtype=np.int64)
    out = np.empty(values.shape[0])
    if _median_loop(values, kernels, out) != 0:
        raise ValueError(f"kernel exceeds ring length {values.shape[0]}")
    return out


@njit(cache=True)
def _label_loop(fg, pts, radius, theta, wrap_cols):
    rows, cols = fg.shape
    labels = np.full((rows, cols), -1, np.int32)
    visited = np.zeros((rows, cols), np.bool_)
    queue_r = np.empty(rows * cols, np.int32)
    queue_c = np.empty(rows * cols, np.int32)
    theta2 = theta * theta
    next_label = 0
    for seed_r in range(rows):
        for seed_c in range(cols):
            if not fg[seed_r, seed_c] or visited[seed_r, seed_c]:
                continue
            head = 0
            tail = 0
            queue_r[tail] = seed_r
            queue_c[tail] = seed_c
            tail += 1
            visited[seed_r, seed_c] = True
            labels[seed_r, seed_c] = next_label
            while head < tail:
                jr = queue_r[head]
                jc = queue_c[head]
                head += 1
                xj = pts[jr, jc, 0]
                yj = pts[jr, jc, 1]
                zj = pts[jr, jc, 2]
                for dr in range(-radius, radius + 1):
                    nr = jr + dr
                    if nr < 0 or nr >= rows:
                        continue
                    span = radius - abs(dr)
                    for dc in range(-span, span + 1):
                        if dr == 0 and dc == 0:
                            continue
                        nc = jc + dc
                        if wrap_cols:
                            nc = nc % cols
                        elif nc < 0 or nc >= cols:
                            continue
                        if not fg[nr, nc] or visited[nr, nc]:
                            continue
                        dx = pts[nr, nc, 0] - xj
                        dy = pts[nr, nc, 1] - yj
                        dz = pts[nr, nc, 2] - zj
                        if dx * dx + dy * dy + dz * dz < theta2:
                            visited[nr, nc] = True
                            labels[nr, nc] = next_label
                            queue_r[tail] = nr
                            queue_c[tail] = nc
                            tail += 1
            next_label += 1
    return labels


def label_regions(foreground, points, radius, theta, wrap_cols=True):
    fg = np.ascontiguousarray(foreground, dtype=np.bool_)
    pts = np.ascontiguousarray(points, dtype=np.float64)
    return _label_loop(fg, pts, int(radius), float(theta), bool(wrap_cols))


@njit(cache=True, inline="always")
def _ray_box_t(ox, oy, oz, dx, dy, dz, box):
    tmin = -np.inf
    tmax = np.inf
    for axis in range(3):
        if axis == 0:
            o, d = ox, dx
        elif axis == 1:
            o, d = oy, dy
        else:
            o, d = oz, dz
        lo = box[axis]
        hi = box[axis + 3]
        if abs(d) < _EPS:
            if o < lo or o > hi:
                return np.inf
        else:
            t1 = (lo - o) / d
            t2 = (hi - o) / d
            if t1 > t2:
                t1, t2 = t2, t1
            if t1 > tmin:
                tmin = t1
            if t2 < tmax:
                tmax = t2
    if tmax >= tmin and tmin > _EPS:
        return tmin
    return np.inf


@njit(cache=True, inline="always")
def _ray_cylinder_t(ox, oy, oz, dx, dy, dz, cx, cy, rad, height):
    rx = ox - cx
    ry = oy - cy
    best = np.inf
    a = dx * dx + dy * dy
    if a > _EPS:
        b = 2.0 * (rx * dx + ry * dy)
        c = rx * rx + ry * ry - rad * rad
        disc = b * b - 4.0 * a * c
        if disc >= 0.0:
            t = (-b - np.sqrt(disc)) / (2.0 * a)
            if t > _EPS:
                z = oz + t * dz
                if 0.0 <= z <= height:
                    best = t
    if abs(dz) > _EPS:
        t = (height - oz) / dz
        if t > _EPS:
            px = rx + t * dx
            py = ry + t * dy
            if px * px + py * py <= rad * rad:
                if t < best:
                    best = t
    return best


@njit(cache=True)
def _render_loop(origins, dirs, boxes, cylinders, target_centers, target_rh,
                 target_ids, has_ground, max_range):
    rows, cols = dirs.shape[0], dirs.shape[1]
    ranges = np.full((rows, cols), np.inf)
    ids = np.full((rows, cols), -1, np.int32)
    for c in range(cols):
        ox = origins[c, 0]
        oy = origins[c, 1]
        oz = origins[c, 2]
        for r in range(rows):
            dx = dirs[r, c, 0]
            dy = dirs[r, c, 1]
            dz = dirs[r, c, 2]
            best = np.inf
            best_id = -1
            if has_ground and dz < -_EPS:
                t = -oz / dz
                if t > _EPS and t < best:
                    best = t
                    best_id = 0
            for b in range(boxes.shape[0]):
                t = _ray_box_t(ox, oy, oz, dx, dy, dz, boxes[b])
                if t < best:
                    best = t
                    best_id = 0
            for s in range(cylinders.shape[0]):
                t = _ray_cylinder_t(ox, oy, oz, dx, dy, dz,
                                    cylinders[s, 0], cylinders[s, 1],
                                    cylinders[s, 2], cylinders[s, 3])
                if t < best:
                    best = t
                    best_id = 0
            for k in range(target_centers.shape[0]):
                t = _ray_cylinder_t(ox, oy, oz, dx, dy, dz,
                                    target_centers[k, c, 0],
                                    target_centers[k, c, 1],
                                    target_rh[k, 0], target_rh[k, 1])
                if t < best:
                    best = t
                    best_id = int(target_ids[k])
            if best <= max_range:
                ranges[r, c] = best
                ids[r, c] = best_id
    return ranges, ids


def render_rays(origins, dirs, boxes, cylinders, target_centers, target_rh,
                target_ids, has_ground, max_range):
    return _render_loop(
        np.ascontiguousarray(origins, dtype=np.float64),
        np.ascontiguousarray(dirs, dtype=np.float64),
        np.ascontiguousarray(boxes, dtype=np.float64).reshape(-1, 6),
        np.ascontiguousarray(cylinders, dtype=np.float64).reshape(-1, 4),
        np.ascontiguousarray(target_centers, dtype=np.float64),
        np.ascontiguousarray(target_rh, dtype=np.float64).reshape(-1, 2),
        np.ascontiguousarray(target_ids, dtype=np.int64),
        bool(has_ground),
        float(max_range),
    )
