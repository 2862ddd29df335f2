"""Keyword to coordinate resolution.

Three backends share one ``geocode(keyword) -> GeoPoint`` method: an offline
gazetteer read from CSV, a remote HTTP service, and a cache that wraps either.
``ChainGeocoder`` tries them in order (cache, gazetteer, remote).
"""

from __future__ import annotations

import csv
import logging
import os
import threading
from pathlib import Path
from typing import Callable, Protocol

import httpx

from .errors import DataError, NotFoundError, TransportError
from .geo import GeoPoint
from .text import name_key

log = logging.getLogger(__name__)

API_KEY_ENV = "GEOCODER_API_KEY"


class Geocoder(Protocol):
    def geocode(self, keyword: str) -> GeoPoint: ...


def _check_keyword(keyword: str) -> str:
    if not isinstance(keyword, str) or not keyword.strip():
        raise ValueError("keyword must be a non-empty string")
    return keyword.strip()


class Gazetteer:
    """Offline name -> point table, matched on the normalized name."""

    def __init__(self, entries: dict[str, GeoPoint]):
        self._table = {name_key(n): p for n, p in entries.items()}

    @classmethod
    def from_csv(cls, path) -> "Gazetteer":
        path = Path(path)
        entries: dict[str, GeoPoint] = {}
        with path.open(newline="", encoding="utf-8") as fh:
            reader = csv.DictReader(fh)
            if not reader.fieldnames or not {"name", "lat", "lon"} <= set(reader.fieldnames):
                raise DataError(f"{path}: gazetteer header must be name,lat,lon")
            for lineno, row in enumerate(reader, start=2):
                try:
                    entries[row["name"].strip()] = GeoPoint(float(row["lat"]), float(row["lon"]))
                except (TypeError, ValueError) as exc:
                    raise DataError(f"{path}:{lineno}: {exc}") from exc
        return cls(entries)

    def __len__(self):
        return len(self._table)

    def geocode(self, keyword: str) -> GeoPoint:
        keyword = _check_keyword(keyword)
        try:
            return self._table[name_key(keyword)]
        except KeyError:
            raise NotFoundError(keyword) from None


def amap_adapter(payload: dict) -> GeoPoint | None:
    """Parse an Amap-style reply: ``{"geocodes": [{"location": "lon,lat"}]}``."""
    geocodes = payload.get("geocodes") or []
    if str(payload.get("status", "1")) != "1" or not geocodes:
        return None
    lon, lat = (float(v) for v in geocodes[0]["location"].split(","))
    return GeoPoint(lat, lon)


def latlon_adapter(payload: dict) -> GeoPoint | None:
    """Parse ``{"lat": .., "lon": ..}`` or a Nominatim-style list of such dicts."""
    if isinstance(payload, list):
        payload = payload[0] if payload else {}
    if "lat" not in payload or "lon" not in payload:
        return None
    return GeoPoint(float(payload["lat"]), float(payload["lon"]))


class HttpGeocoder:
    """Remote geocoder: ``GET url?<param>=keyword`` with the API key from the environment."""

    def __init__(
        self,
        url: str,
        *,
        keyword_param: str = "address",
        key_param: str = "key",
        adapter: Callable[[dict], GeoPoint | None] = amap_adapter,
        timeout_s: float = 10.0,
        max_in_flight: int = 4,
        client: httpx.Client | None = None,
    ):
        self.url = url
        self.keyword_param = keyword_param
        self.key_param = key_param
        self.adapter = adapter
        self._client = client or httpx.Client(timeout=timeout_s)
        self._slots = threading.BoundedSemaphore(max_in_flight)

    def geocode(self, keyword: str) -> GeoPoint:
        keyword = _check_keyword(keyword)
        params = {self.keyword_param: keyword}
        api_key = os.environ.get(API_KEY_ENV)
        if api_key:
            params[self.key_param] = api_key
        with self._slots:
            try:
                resp = self._client.get(self.url, params=params)
                resp.raise_for_status()
                payload = resp.json()
            except httpx.HTTPError as exc:
                raise TransportError(f"geocoder request failed: {exc}") from exc
            except ValueError as exc:
                raise TransportError(f"geocoder returned invalid JSON: {exc}") from exc
        point = self.adapter(payload)
        if point is None:
            raise NotFoundError(keyword)
        return point


class CachedGeocoder:
    """Memoizes successful lookups of an inner geocoder. Reads are lock-free."""

    def __init__(self, inner: Geocoder):
        self.inner = inner
        self._cache: dict[str, GeoPoint] = {}
        self._write_lock = threading.Lock()

    def geocode(self, keyword: str) -> GeoPoint:
        key = name_key(_check_keyword(keyword))
        hit = self._cache.get(key)
        if hit is not None:
            return hit
        point = self.inner.geocode(keyword)
        with self._write_lock:
            self._cache.setdefault(key, point)
        return point


class ChainGeocoder:
    """Try each backend in turn; only ``NotFoundError`` falls through to the next."""

    def __init__(self, backends: list[Geocoder]):
        if not backends:
            raise ValueError("at least one geocoder backend is required")
        self.backends = backends

    def geocode(self, keyword: str) -> GeoPoint:
        keyword = _check_keyword(keyword)
        for backend in self.backends:
            try:
                return backend.geocode(keyword)
            except NotFoundError:
                continue
        raise NotFoundError(keyword)


def build_geocoder(
    gazetteer: Gazetteer | None = None,
    remote: HttpGeocoder | None = None,
    cache: bool = True,
) -> Geocoder:
    backends = [b for b in (gazetteer, remote) if b is not None]
    if not backends:
        raise ValueError("configure a gazetteer, a remote geocoder, or both")
    chain: Geocoder = backends[0] if len(backends) == 1 else ChainGeocoder(backends)
    return CachedGeocoder(chain) if cache else chain
