"""Hot numeric kernels: circular sliding median, grid region labeling, raycasting.

Two interchangeable implementations exist: a numba @njit backend (default)
and a pure-numpy fallback. Selection order: the RINGMOT_BACKEND environment
variable ("numba" or "numpy") if set, else numba when importable, else numpy.
`set_backend` switches at runtime; the `bench --compare-backends` CLI uses it
to time both paths on identical inputs.
"""

from __future__ import annotations

import os
import warnings

from . import numpy_impl

_IMPLS = {"numpy": numpy_impl}
try:
    from . import numba_impl

    _IMPLS["numba"] = numba_impl
    _DEFAULT = "numba"
except ImportError:  # pragma: no cover - numba is a declared dependency
    _DEFAULT = "numpy"

_requested = os.environ.get("RINGMOT_BACKEND", "").strip().lower()
if _requested:
    if _requested not in _IMPLS:
        warnings.warn(
            f"RINGMOT_BACKEND={_requested!r} unavailable, using {_DEFAULT!r}",
            stacklevel=1,
        )
        _requested = _DEFAULT
else:
    _requested = _DEFAULT

_active = _IMPLS[_requested]


def available_backends():
    return sorted(_IMPLS)


def get_backend() -> str:
    return "numba" if _active is _IMPLS.get("numba") else "numpy"


def set_backend(name: str) -> None:
    global _active
    if name not in _IMPLS:
        raise ValueError(f"unknown backend {name!r}; available: {available_backends()}")
    _active = _IMPLS[name]


def sliding_median_circular(values, kernels):
    """Per-point circular-window median; kernels[i] is the odd window size at i."""
    return _active.sliding_median_circular(values, kernels)


def label_regions(foreground, points, radius, theta, wrap_cols=True):
    """Connected-component labels over the grid adjacency predicate.

    Cells a, b are adjacent iff both are foreground, their grid L1 distance
    (columns wrapping when wrap_cols) is <= radius, and their 3D Euclidean
    distance is < theta. Background cells get label -1; components are
    numbered by first row-major cell.
    """
    return _active.label_regions(foreground, points, radius, theta, wrap_cols)


def render_rays(origins, dirs, boxes, cylinders, target_centers, target_rh,
                target_ids, has_ground, max_range):
    """Nearest-hit ranges and object ids for a grid of rays (see numpy_impl)."""
    return _active.render_rays(
        origins, dirs, boxes, cylinders, target_centers, target_rh,
        target_ids, has_ground, max_range,
    )


def warmup() -> None:
    """Run every kernel once on tiny inputs (triggers numba compilation)."""
    import numpy as np

    sliding_median_circular(np.ones(8), np.full(8, 3, dtype=np.int64))
    label_regions(
        np.ones((2, 4), dtype=bool), np.zeros((2, 4, 3)), 1, 0.5, True
    )
    render_rays(
        np.zeros((2, 3)) + np.array([0.0, 0.0, 1.0]),
        np.tile(np.array([1.0, 0.0, -0.1]), (2, 2, 1)),
        np.zeros((0, 6)),
        np.zeros((0, 4)),
        np.zeros((1, 2, 2)),
        np.array([[0.3, 1.8]]),
        np.array([1], dtype=np.int64),
        True,
        100.0,
    )
