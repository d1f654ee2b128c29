"""Organized scan representation, geometry, and scan/pose/label file I/O.

A scan is a rows x cols grid of range measurements: one row per laser ring,
one column per azimuth step of a full rotation. Cells without a usable
return (sky, absorbing surfaces, out of range) are flagged invalid and carry
a sentinel range exceeding the sensor's maximum measuring range, so they can
still take part in neighborhood computations.

Scan file layout (one binary container per sequence):

    OSCN1
    rows <int>
    cols <int>
    elevations <float> * rows
    sentinel <float>

followed by one binary record per scan: timestamp (float64), azimuths
(cols x float32), ranges (rows*cols x float32, row-major), valid flags
(rows*cols x uint8). Ranges are stored as float32; writing quantizes
accordingly (sub-micrometre at 100 m-class ranges).

Pose files are text, one line per scan: "timestamp tx ty tz qx qy qz qw".
Label files are text, one line per labeled point: "scan_index row col object_id".
"""

from __future__ import annotations

import io
from dataclasses import dataclass, replace

import numpy as np

from .geometry import RigidTransform

DEFAULT_SENTINEL = 200.0
_MAGIC = "OSCN1"
_TWO_PI = 2.0 * np.pi


class FormatError(ValueError):
    """Malformed scan, pose, or label file."""


class HeaderError(FormatError):
    """Scan file header is missing or malformed."""


class DimensionError(FormatError):
    """Scan file declares degenerate or inconsistent dimensions."""


class AzimuthOrderError(FormatError):
    """Azimuths are not strictly monotone modulo a full rotation."""


class TruncationError(FormatError):
    """Scan file ends in the middle of a record."""


class InvalidCellError(ValueError):
    """A geometric query hit an invalid (no-return) cell."""


@dataclass
class OrganizedScan:
    """One full-rotation scan kept in its rows x cols grid layout.

    rows/cols: grid shape (rows = number of scan rings).
    ranges: measured distances in meters, float64 (rows, cols).
    elevations: per-row beam elevation in radians, ordered low to high
        (row 0 is the lowest ring, row rows-1 the highest).
    azimuths: per-column beam azimuth in radians, shared by all rows,
        strictly monotone modulo 2*pi and spanning at most one rotation.
    valid: boolean grid; False where the sensor had no usable return.
    sensor_pose: rigid transform sensor -> world.
    timestamp: scan start time in seconds.
    """

    rows: int
    cols: int
    ranges: np.ndarray
    elevations: np.ndarray
    azimuths: np.ndarray
    valid: np.ndarray
    sensor_pose: RigidTransform
    timestamp: float


@dataclass(frozen=True)
class PointLabel:
    """Ground-truth label of a single grid cell (object_id 0 = background)."""

    scan_index: int
    row: int
    col: int
    object_id: int


class SensorPoseTrack:
    """Timestamped sensor poses; lookup is by nearest timestamp."""

    def __init__(self, entries):
        entries = list(entries)
        times = np.array([t for t, _ in entries], dtype=float)
        if len(times) > 1 and not np.all(np.diff(times) > 0):
            raise FormatError("pose timestamps must be strictly increasing")
        self._times = times
        self._poses = [p for _, p in entries]

    def __len__(self) -> int:
        return len(self._poses)

    def pose_at(self, timestamp: float) -> RigidTransform:
        if len(self._poses) == 0:
            return RigidTransform.identity()
        idx = int(np.argmin(np.abs(self._times - timestamp)))
        return self._poses[idx]


def sanitize_invalid(scan: OrganizedScan, sentinel: float = DEFAULT_SENTINEL) -> OrganizedScan:
    """Replace every invalid cell's range by the sentinel distance.

    Valid cells are untouched; valid flags are preserved, except that cells
    carrying a non-finite range are coerced to invalid (a non-finite reading
    is no measurement). Idempotent.
    """
    valid = scan.valid & np.isfinite(scan.ranges)
    ranges = np.where(valid, scan.ranges, sentinel)
    return replace(scan, ranges=ranges, valid=valid)


def point_position(scan: OrganizedScan, row: int, col: int) -> np.ndarray:
    """World-frame position of cell (row, col). Raises on invalid cells."""
    if not (0 <= row < scan.rows and 0 <= col < scan.cols):
        raise IndexError(f"cell ({row}, {col}) outside {scan.rows}x{scan.cols} grid")
    if not scan.valid[row, col]:
        raise InvalidCellError(f"cell ({row}, {col}) has no valid return")
    r = scan.ranges[row, col]
    elev = scan.elevations[row]
    azim = scan.azimuths[col]
    local = np.array(
        [
            r * np.cos(elev) * np.cos(azim),
            r * np.cos(elev) * np.sin(azim),
            r * np.sin(elev),
        ]
    )
    return scan.sensor_pose.apply(local)


def scan_points_world(scan: OrganizedScan) -> np.ndarray:
    """World positions of all cells as an (rows, cols, 3) array.

    Invalid cells produce sentinel-range points; mask with scan.valid before
    using them.
    """
    cos_e = np.cos(scan.elevations)[:, None]
    sin_e = np.sin(scan.elevations)[:, None]
    cos_a = np.cos(scan.azimuths)[None, :]
    sin_a = np.sin(scan.azimuths)[None, :]
    local = np.empty((scan.rows, scan.cols, 3))
    local[:, :, 0] = scan.ranges * cos_e * cos_a
    local[:, :, 1] = scan.ranges * cos_e * sin_a
    local[:, :, 2] = scan.ranges * sin_e
    return scan.sensor_pose.apply(local)


def angular_step(scan: OrganizedScan) -> float:
    """Median azimuth increment of the rotation (radians per column)."""
    steps = np.mod(np.diff(scan.azimuths), _TWO_PI)
    if steps.size == 0:
        return _TWO_PI
    return float(np.median(steps))


def check_azimuths(azimuths: np.ndarray) -> None:
    steps = np.mod(np.diff(np.asarray(azimuths, dtype=float)), _TWO_PI)
    if np.any(steps <= 0):
        raise AzimuthOrderError("azimuths not strictly monotone modulo 2*pi")
    if steps.sum() > _TWO_PI * (1 + 1e-9):
        raise AzimuthOrderError("azimuths span more than one rotation")


# ---------------------------------------------------------------------------
# scan container I/O


def write_scans(path, scans, sentinel: float = DEFAULT_SENTINEL) -> None:
    """Write a sequence of scans sharing geometry into one container file."""
    if not scans:
        raise DimensionError("refusing to write an empty scan container")
    first = scans[0]
    if first.rows <= 0 or first.cols <= 0:
        raise DimensionError(f"degenerate grid {first.rows}x{first.cols}")
    with open(path, "wb") as fh:
        header = io.StringIO()
        header.write(f"{_MAGIC}\n")
        header.write(f"rows {first.rows}\n")
        header.write(f"cols {first.cols}\n")
        header.write("elevations " + " ".join(repr(float(e)) for e in first.elevations) + "\n")
        header.write(f"sentinel {sentinel!r}\n")
        fh.write(header.getvalue().encode("ascii"))
        for scan in scans:
            if scan.rows != first.rows or scan.cols != first.cols:
                raise DimensionError("all scans in a container must share the grid shape")
            fh.write(np.float64(scan.timestamp).tobytes())
            fh.write(np.ascontiguousarray(scan.azimuths, dtype=np.float32).tobytes())
            fh.write(np.ascontiguousarray(scan.ranges, dtype=np.float32).tobytes())
            fh.write(np.ascontiguousarray(scan.valid, dtype=np.uint8).tobytes())


def _read_header_line(fh, what):
    line = fh.readline()
    if not line:
        raise HeaderError(f"unexpected end of file in header ({what})")
    try:
        return line.decode("ascii").strip()
    except UnicodeDecodeError as exc:
        raise HeaderError(f"non-ascii bytes in header ({what})") from exc


def read_scans(path, pose_track: SensorPoseTrack | None = None):
    """Read all scans from a container file.

    Poses are looked up in pose_track by nearest timestamp; identity when no
    track is supplied. Returns (scans, sentinel).
    """
    with open(path, "rb") as fh:
        magic = _read_header_line(fh, "magic")
        if magic != _MAGIC:
            raise HeaderError(f"bad magic {magic!r}, expected {_MAGIC!r}")
        fields = {}
        for key in ("rows", "cols", "elevations", "sentinel"):
            parts = _read_header_line(fh, key).split()
            if not parts or parts[0] != key:
                raise HeaderError(f"expected header field {key!r}, got {parts[:1]}")
            fields[key] = parts[1:]
        try:
            rows = int(fields["rows"][0])
            cols = int(fields["cols"][0])
            elevations = np.array([float(v) for v in fields["elevations"]], dtype=float)
            sentinel = float(fields["sentinel"][0])
        except (ValueError, IndexError) as exc:
            raise HeaderError(f"unparseable header field: {exc}") from exc
        if rows <= 0 or cols <= 0:
            raise DimensionError(f"degenerate grid {rows}x{cols}")
        if elevations.shape[0] != rows:
            raise DimensionError(
                f"header has {elevations.shape[0]} elevations for {rows} rows"
            )

        record = 8 + cols * 4 + rows * cols * 4 + rows * cols
        payload = fh.read()
    n_scans, leftover = divmod(len(payload), record)
    if leftover:
        raise TruncationError(
            f"truncated record: expected a multiple of {record} payload bytes, "
            f"found {len(payload)} ({leftover} bytes beyond {n_scans} full scans)"
        )

    scans = []
    for i in range(n_scans):
        off = i * record
        timestamp = float(np.frombuffer(payload, np.float64, 1, off)[0])
        off += 8
        azimuths = np.frombuffer(payload, np.float32, cols, off).astype(float)
        off += cols * 4
        ranges = np.frombuffer(payload, np.float32, rows * cols, off).astype(float)
        off += rows * cols * 4
        valid = np.frombuffer(payload, np.uint8, rows * cols, off).astype(bool)
        check_azimuths(azimuths)
        pose = pose_track.pose_at(timestamp) if pose_track else RigidTransform.identity()
        scans.append(
            OrganizedScan(
                rows=rows,
                cols=cols,
                ranges=ranges.reshape(rows, cols),
                elevations=elevations.copy(),
                azimuths=azimuths,
                valid=valid.reshape(rows, cols),
                sensor_pose=pose,
                timestamp=timestamp,
            )
        )
    return scans, sentinel


# ---------------------------------------------------------------------------
# pose and label files


def write_pose_track(path, entries) -> None:
    """entries: iterable of (timestamp, RigidTransform)."""
    with open(path, "w") as fh:
        for timestamp, pose in entries:
            q = pose.to_quaternion()
            t = pose.translation
            fh.write(
                f"{timestamp!r} {t[0]!r} {t[1]!r} {t[2]!r} "
                f"{q[0]!r} {q[1]!r} {q[2]!r} {q[3]!r}\n"
            )


def read_pose_track(path) -> SensorPoseTrack:
    entries = []
    with open(path) as fh:
        for lineno, line in enumerate(fh, 1):
            parts = line.split()
            if not parts:
                continue
            if len(parts) != 8:
                raise FormatError(f"{path}:{lineno}: expected 8 fields, got {len(parts)}")
            try:
                vals = [float(v) for v in parts]
            except ValueError as exc:
                raise FormatError(f"{path}:{lineno}: {exc}") from exc
            pose = RigidTransform.from_quaternion(*vals[4:8], t=vals[1:4])
            entries.append((vals[0], pose))
    return SensorPoseTrack(entries)


def write_labels(path, labels) -> None:
    with open(path, "w") as fh:
        for lab in labels:
            fh.write(f"{lab.scan_index} {lab.row} {lab.col} {lab.object_id}\n")


def read_labels(path):
    labels = []
    with open(path) as fh:
        for lineno, line in enumerate(fh, 1):
            parts = line.split()
            if not parts:
                continue
            if len(parts) != 4:
                raise FormatError(f"{path}:{lineno}: expected 4 fields, got {len(parts)}")
            try:
                scan_index, row, col, object_id = (int(v) for v in parts)
            except ValueError as exc:
                raise FormatError(f"{path}:{lineno}: {exc}") from exc
            if object_id < 0:
                raise FormatError(f"{path}:{lineno}: negative object id")
            labels.append(PointLabel(scan_index, row, col, object_id))
    return labels
