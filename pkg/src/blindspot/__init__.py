"""Real-time blind-spot cyclist detection pipeline and evaluation toolkit."""

from .geometry import BoundingBox, Detection, filter_by_score, iou, nms

__all__ = ["BoundingBox", "Detection", "filter_by_score", "iou", "nms"]
__version__ = "0.1.0"
