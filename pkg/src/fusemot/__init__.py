"""3D multi-object tracking with fused appearance-motion association,
occlusion-aware appearance memory, a full evaluation stack and a
synthetic scenario harness."""

from .geometry import Box3D, Detection, giou3d, intersection_volume, iou3d, nms, volume
from .tracker import FrameResult, Tracker, TrackerConfig, PROFILES

__all__ = [
    "Box3D", "Detection", "giou3d", "intersection_volume", "iou3d", "nms",
    "volume", "FrameResult", "Tracker", "TrackerConfig", "PROFILES",
]

__version__ = "0.1.0"
