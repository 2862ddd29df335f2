"""Great-circle distance and nearest-viewpoint retrieval."""

from __future__ import annotations

import heapq
import math
from dataclasses import dataclass, field
from typing import Iterable, Sequence

from .errors import EmptyCatalogError, NotFoundError, TransportError
from .jsonfmt import Fixed, dumps

DEFAULT_K = 5
MEAN_EARTH_RADIUS_KM = 6371.0


def normalize_lon(lon: float) -> float:
    """Wrap a longitude into (-180, 180]."""
    wrapped = math.fmod(lon + 180.0, 360.0)
    if wrapped <= 0.0:
        wrapped += 360.0
    return wrapped - 180.0


@dataclass(frozen=True)
class GeoPoint:
    lat: float
    lon: float

    def __post_init__(self):
        lat, lon = float(self.lat), float(self.lon)
        if not (math.isfinite(lat) and math.isfinite(lon)):
            raise ValueError(f"non-finite coordinate ({lat}, {lon})")
        if not -90.0 <= lat <= 90.0:
            raise ValueError(f"latitude {lat} outside [-90, 90]")
        if not -180.0 < lon <= 180.0:
            lon = normalize_lon(lon)
        object.__setattr__(self, "lat", lat)
        object.__setattr__(self, "lon", lon)


@dataclass(frozen=True)
class EarthModel:
    radius_km: float = MEAN_EARTH_RADIUS_KM

    def __post_init__(self):
        if not self.radius_km > 0:
            raise ValueError("radius_km must be positive")


EARTH = EarthModel()


@dataclass(frozen=True)
class ViewpointRecord:
    name: str
    location: GeoPoint
    intro: str
    region: str | None = None

    def __post_init__(self):
        if not self.name.strip():
            raise ValueError("viewpoint name must be non-empty")
        if not self.intro.strip():
            raise ValueError(f"viewpoint {self.name!r} has an empty introduction")


@dataclass(frozen=True, order=True)
class NearestResult:
    distance_km: float
    name: str
    location: GeoPoint = field(compare=False)

    def to_dict(self) -> dict:
        return {
            "name": self.name,
            "distance_km": Fixed(self.distance_km, 3),
            "lat": Fixed(self.location.lat, 6),
            "lon": Fixed(self.location.lon, 6),
        }


def haversine_distance(p1: GeoPoint, p2: GeoPoint, earth: EarthModel = EARTH) -> float:
    """Great-circle distance in km between two points on a sphere."""
    if p1.lat == p2.lat and p1.lon == p2.lon:
        return 0.0
    phi1 = math.radians(p1.lat)
    phi2 = math.radians(p2.lat)
    dphi = phi2 - phi1
    dlam = math.radians(p2.lon - p1.lon)
    a = math.sin(dphi / 2) ** 2 + math.cos(phi1) * math.cos(phi2) * math.sin(dlam / 2) ** 2
    a = min(1.0, max(0.0, a))
    c = 2 * math.atan2(math.sqrt(a), math.sqrt(1 - a))
    return earth.radius_km * c


class Catalog:
    """An immutable, name-unique set of viewpoints."""

    def __init__(self, viewpoints: Iterable[ViewpointRecord]):
        items = tuple(viewpoints)
        seen = set()
        for vp in items:
            if vp.name in seen:
                raise ValueError(f"duplicate viewpoint name {vp.name!r}")
            seen.add(vp.name)
        self._items = items
        self._by_name = {vp.name: vp for vp in items}

    def __iter__(self):
        return iter(self._items)

    def __len__(self):
        return len(self._items)

    def __getitem__(self, name: str) -> ViewpointRecord:
        return self._by_name[name]

    def __contains__(self, name) -> bool:
        return name in self._by_name


def nearest_viewpoints(
    query: GeoPoint,
    viewpoints: Iterable[ViewpointRecord],
    k: int = DEFAULT_K,
    earth: EarthModel = EARTH,
) -> list[NearestResult]:
    """The ``k`` viewpoints closest to ``query``, ordered by (distance, name)."""
    if k < 1:
        raise ValueError("k must be a positive integer")
    candidates = [
        NearestResult(haversine_distance(query, vp.location, earth), vp.name, vp.location)
        for vp in viewpoints
    ]
    if not candidates:
        raise EmptyCatalogError("viewpoint catalog is empty")
    return heapq.nsmallest(k, candidates)


def bridge_lookup(
    keyword: str,
    viewpoints: Sequence[ViewpointRecord] | Catalog,
    geocoder,
    k: int = DEFAULT_K,
    earth: EarthModel = EARTH,
) -> str:
    """Geocode ``keyword`` and return the nearest viewpoints as a JSON document.

    Resolution failures come back as an error document rather than an
    exception: ``{"error": "not_found" | "transport", "keyword": ...}``.
    """
    try:
        point = geocoder.geocode(keyword)
    except NotFoundError:
        return dumps({"error": "not_found", "keyword": keyword})
    except TransportError as exc:
        return dumps({"error": "transport", "keyword": keyword, "detail": str(exc)})
    results = nearest_viewpoints(point, viewpoints, k, earth)
    return dumps(
        {
            "query_keyword": keyword,
            "resolved": {"lat": Fixed(point.lat, 6), "lon": Fixed(point.lon, 6)},
            "results": [r.to_dict() for r in results],
        }
    )
