"""Great-circle distance and host geolocation behind a pluggable resolver.

Distances use the haversine formula on a sphere with the mean Earth radius;
good to a fraction of a percent, which is plenty for ranking data centers.
"""

from __future__ import annotations

import json
import math
import threading
from dataclasses import dataclass
from typing import Mapping, Protocol

from .errors import RegionRankError

# Mean Earth radius in kilometers.
EARTH_RADIUS_KM = 6371.0


class GeoResolutionError(RegionRankError):
    """No location is known for a host."""

    def __init__(self, host: str):
        super().__init__(f"no location known for host {host!r}")
        self.host = host


class GeoFixtureError(RegionRankError):
    """A geolocation fixture file could not be parsed."""


@dataclass(frozen=True)
class GeoPoint:
    """A point on Earth in decimal degrees."""

    lat: float
    lon: float

    def __post_init__(self):
        if not -90.0 <= self.lat <= 90.0:
            raise ValueError(f"latitude {self.lat} out of range [-90, 90]")
        if not -180.0 <= self.lon <= 180.0:
            raise ValueError(f"longitude {self.lon} out of range [-180, 180]")


def haversine_km(a: GeoPoint, b: GeoPoint) -> float:
    """Great-circle distance between two points in kilometers.

    Symmetric and non-negative; bounded by pi * EARTH_RADIUS_KM.
    """
    lat1 = math.radians(a.lat)
    lat2 = math.radians(b.lat)
    dlat = math.radians(b.lat - a.lat)
    dlon = math.radians(b.lon - a.lon)

    h = math.sin(dlat / 2) ** 2 + math.cos(lat1) * math.cos(lat2) * math.sin(dlon / 2) ** 2
    # Guard against tiny floating excursions above 1.0 near antipodes.
    return EARTH_RADIUS_KM * 2 * math.asin(min(1.0, math.sqrt(h)))


class GeoResolver(Protocol):
    """Maps a host key to its location; raises GeoResolutionError if unknown."""

    def resolve(self, host: str) -> GeoPoint: ...


class FixtureResolver:
    """Resolver backed by a static host -> coordinates mapping.

    The default fixture keeps every lookup offline and deterministic; a live
    geolocation client can be swapped in anywhere a GeoResolver is accepted.
    """

    def __init__(self, locations: Mapping[str, GeoPoint]):
        self._locations = dict(locations)

    @classmethod
    def from_json(cls, text: str) -> "FixtureResolver":
        """Parse a fixture of the form {host: {"lat": num, "lon": num}}."""
        try:
            doc = json.loads(text)
        except json.JSONDecodeError as exc:
            raise GeoFixtureError(f"malformed geolocation fixture: {exc}") from exc
        if not isinstance(doc, dict):
            raise GeoFixtureError("geolocation fixture must be a JSON object")
        locations = {}
        for host, entry in doc.items():
            try:
                locations[host] = GeoPoint(float(entry["lat"]), float(entry["lon"]))
            except (TypeError, KeyError, ValueError) as exc:
                raise GeoFixtureError(f"bad fixture entry for host {host!r}: {exc}") from exc
        return cls(locations)

    def resolve(self, host: str) -> GeoPoint:
        try:
            return self._locations[host]
        except KeyError:
            raise GeoResolutionError(host) from None


class CachingResolver:
    """Caches successful lookups of another resolver.

    get-or-insert is atomic, so concurrent lookups of the same host perform
    exactly one underlying fetch.
    """

    def __init__(self, inner: GeoResolver):
        self._inner = inner
        self._cache: dict[str, GeoPoint] = {}
        self._lock = threading.Lock()

    def resolve(self, host: str) -> GeoPoint:
        with self._lock:
            point = self._cache.get(host)
            if point is None:
                point = self._inner.resolve(host)
                self._cache[host] = point
            return point


def resolve_location(resolver: GeoResolver, host: str) -> GeoPoint:
    """Resolve a host's location. Raises GeoResolutionError when unknown."""
    if not host:
        raise GeoResolutionError(host)
    return resolver.resolve(host)
