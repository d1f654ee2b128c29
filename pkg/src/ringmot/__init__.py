"""ringmot: multi-object tracking for sparse organized LiDAR scans.

Pipeline: per-ring median-filter segmentation, region-growing clustering
with an object size model, per-hypothesis constant-velocity Kalman tracking
with Hungarian assignment, and retroactive removal of dynamic objects'
points into a static-world cloud log. Ships with a deterministic scan
simulator and a CLEAR MOT evaluation harness.
"""

from .config import PipelineConfig, load_config
from .geometry import Box3, RigidTransform
from .pipeline import RunResult, run_pipeline
from .scan_model import OrganizedScan, PointLabel, SensorPoseTrack, sanitize_invalid
from .segmentation import SegmentationConfig, SegmentMask, segment_scan
from .detection import ClusterConfig, Detection, ObjectModel, detect_scan
from .tracking import Hypothesis, Tracker, TrackerConfig
from .dynamic_filter import CloudLog
from .metrics import MotReport, clear_mot, coverage, pearson
from .simulator import Scene, SensorPath, TargetSpec, simulate_sequence

__version__ = "0.1.0"

__all__ = [
    "Box3",
    "ClusterConfig",
    "CloudLog",
    "Detection",
    "Hypothesis",
    "MotReport",
    "ObjectModel",
    "OrganizedScan",
    "PipelineConfig",
    "PointLabel",
    "RigidTransform",
    "RunResult",
    "Scene",
    "SegmentMask",
    "SegmentationConfig",
    "SensorPath",
    "SensorPoseTrack",
    "TargetSpec",
    "Tracker",
    "TrackerConfig",
    "clear_mot",
    "coverage",
    "detect_scan",
    "load_config",
    "pearson",
    "run_pipeline",
    "sanitize_invalid",
    "segment_scan",
    "simulate_sequence",
]
