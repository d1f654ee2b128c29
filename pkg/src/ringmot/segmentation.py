"""Foreground segmentation of scan rings with paired median filters.

Objects deform a scan ring into groups of measurements closer than their
background neighborhood. Two circular median filters with different kernel
sizes run over each ring's distance readings: a small "noise" kernel sized
from the minimal target width erases narrower groups, a larger "background"
kernel sized from the maximal target width erases target-width groups as
well. Where the two filters disagree by more than a margin, the point is
classified foreground.

Invalid cells (sanitized to the sentinel range) are always background but
still feed their neighbors' medians, so objects against empty sky remain
segmentable.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from . import kernels
from .scan_model import OrganizedScan, angular_step


@dataclass
class SegmentationConfig:
    min_width: float = 0.1
    max_width: float = 1.2
    delta_seg: float = 0.2
    min_kernel: int = 3
    max_kernel: int = 201

    def validate(self) -> None:
        if not 0 < self.min_width < self.max_width:
            raise ValueError("need 0 < min_width < max_width")
        if self.delta_seg <= 0:
            raise ValueError("delta_seg must be positive")
        if self.min_kernel % 2 == 0 or self.max_kernel % 2 == 0:
            raise ValueError("kernel bounds must be odd")
        if not 3 <= self.min_kernel <= self.max_kernel:
            raise ValueError("need 3 <= min_kernel <= max_kernel")


@dataclass
class SegmentMask:
    """Per-cell foreground flags aligned to a scan grid."""

    rows: int
    cols: int
    foreground: np.ndarray


def kernel_size_for(width: float, range_m: float, step: float,
                    config: SegmentationConfig) -> int:
    """Smallest odd kernel covering `width` meters of arc at `range_m`.

    Clamped to [min_kernel, max_kernel]; sentinel ranges land on the
    minimum via the clamp.
    """
    raw = int(np.ceil(width / (max(range_m, 1e-9) * step)))
    if raw % 2 == 0:
        raw += 1
    return int(np.clip(raw, config.min_kernel, config.max_kernel))


def _kernel_sizes(width, ranges, step, config, cap):
    raw = np.ceil(width / (np.maximum(ranges, 1e-9) * step)).astype(np.int64)
    raw += 1 - (raw % 2)
    return np.clip(raw, config.min_kernel, min(config.max_kernel, cap))


def sliding_median(ring, window_sizes) -> np.ndarray:
    """Circular median of `ring` with a per-point odd window size.

    Windows wrap around the ring ends; a full-rotation scan has no natural
    boundary.
    """
    return kernels.sliding_median_circular(
        np.asarray(ring, dtype=float), np.asarray(window_sizes, dtype=np.int64)
    )


def segment_ring(ring, valid, config: SegmentationConfig, step: float) -> np.ndarray:
    """Foreground flags for one sanitized ring of distance readings.

    The noise kernel is sized from min_width at the raw range; the background
    kernel is sized from max_width at the noise-filtered range (robust to
    the point's own spike) and widened by two so groups of exactly the
    maximal width are still erased by the background filter.
    """
    ring = np.asarray(ring, dtype=float)
    valid = np.asarray(valid, dtype=bool)
    n = ring.shape[0]
    cap = n if n % 2 == 1 else n - 1

    noise_k = _kernel_sizes(config.min_width, ring, step, config, cap)
    noise_med = sliding_median(ring, noise_k)

    bg_k = _kernel_sizes(config.max_width, noise_med, step, config, cap)
    bg_k = np.minimum(bg_k + 2, min(config.max_kernel, cap))
    bg_med = sliding_median(ring, bg_k)

    return valid & (bg_med - noise_med > config.delta_seg)


def segment_scan(scan: OrganizedScan, config: SegmentationConfig) -> SegmentMask:
    """Apply per-ring segmentation to every ring of a sanitized scan."""
    step = angular_step(scan)
    fg = np.zeros((scan.rows, scan.cols), dtype=bool)
    for r in range(scan.rows):
        fg[r] = segment_ring(scan.ranges[r], scan.valid[r], config, step)
    return SegmentMask(rows=scan.rows, cols=scan.cols, foreground=fg)
