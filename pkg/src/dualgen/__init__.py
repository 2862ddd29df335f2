"""Location-aware viewpoint recommendation: keyword extraction, nearest-viewpoint
retrieval, introduction generation, and multi-metric evaluation."""

from .geo import EarthModel, GeoPoint, NearestResult, ViewpointRecord, haversine_distance, nearest_viewpoints
from .scoring import CompositeWeights, ScoreComponents, composite_score

__version__ = "0.1.0"

__all__ = [
    "CompositeWeights",
    "EarthModel",
    "GeoPoint",
    "NearestResult",
    "ScoreComponents",
    "ViewpointRecord",
    "composite_score",
    "haversine_distance",
    "nearest_viewpoints",
]
