"""Geocoding: text query -> located entities with confidence and bbox.

Two implementations share the ``geocode(query)`` surface:

* ``OfflineGeocoder`` resolves queries against a gazetteer. Canonical-name
  matches are reported with High confidence, other aliases with Medium.
* ``RemoteGeocoder`` talks to an HTTP geocoding service through a pluggable
  transport, with an LRU cache, in-flight de-duplication and a sliding
  window QPS limiter.
"""

from __future__ import annotations

import enum
import logging
import threading
import time
from collections import OrderedDict, deque
from dataclasses import dataclass
from typing import Any, Callable, Iterable, Mapping, Protocol

from localgeo import geohash
from localgeo.errors import ValidationError
from localgeo.gazetteer import CITY, COUNTRY, COUNTY, STATE, Gazetteer, normalize
from localgeo.geohash import BoundingBox, LatLon

log = logging.getLogger(__name__)


class Confidence(enum.Enum):
    LOW = "Low"
    MEDIUM = "Medium"
    HIGH = "High"

    @property
    def rank(self) -> int:
        return _RANK[self]

    def __ge__(self, other: Confidence) -> bool:
        return self.rank >= other.rank

    def __gt__(self, other: Confidence) -> bool:
        return self.rank > other.rank

    def __le__(self, other: Confidence) -> bool:
        return self.rank <= other.rank

    def __lt__(self, other: Confidence) -> bool:
        return self.rank < other.rank

    @classmethod
    def parse(cls, value: str | Confidence) -> Confidence:
        if isinstance(value, Confidence):
            return value
        for c in cls:
            if c.value.lower() == str(value).lower():
                return c
        raise ValidationError(f"unknown confidence {value!r}")


_RANK = {Confidence.LOW: 0, Confidence.MEDIUM: 1, Confidence.HIGH: 2}

ENTITY_TYPES = {CITY: "City", COUNTY: "County", STATE: "State", COUNTRY: "Country"}


@dataclass(frozen=True)
class GeocodeResult:
    matched_name: str
    entity_type: str
    confidence: Confidence
    point: LatLon
    bbox: BoundingBox
    # populated by the offline geocoder; remote services may leave these empty
    loc_id: str | None = None
    address: tuple[str, ...] = ()

    def __post_init__(self):
        if not isinstance(self.confidence, Confidence):
            raise ValidationError(f"bad confidence {self.confidence!r}")
        if not self.bbox.contains(self.point):
            raise ValidationError(f"{self.matched_name}: point outside bbox")


class Geocoder(Protocol):
    def geocode(self, query: str) -> list[GeocodeResult]: ...


def _check_query(query: str) -> None:
    if not isinstance(query, str) or not query.strip():
        raise ValidationError("geocode query must be non-empty text")


class OfflineGeocoder:
    def __init__(self, gaz: Gazetteer):
        self.gaz = gaz

    def geocode(self, query: str) -> list[GeocodeResult]:
        _check_query(query)
        best: dict[str, tuple[Confidence, int]] = {}
        for m in self.gaz.matches(query):
            for loc_id in m.loc_ids:
                rec = self.gaz.get(loc_id)
                conf = Confidence.HIGH if m.alias == normalize(rec.name) else Confidence.MEDIUM
                prev = best.get(loc_id)
                if prev is None or conf > prev[0]:
                    best[loc_id] = (conf, m.start if prev is None else prev[1])
        out = []
        for loc_id, (conf, _) in sorted(best.items(), key=lambda kv: (kv[1][1], kv[0])):
            rec = self.gaz.get(loc_id)
            out.append(
                GeocodeResult(
                    matched_name=rec.name,
                    entity_type=ENTITY_TYPES[rec.level],
                    confidence=conf,
                    point=rec.point,
                    bbox=rec.bbox,
                    loc_id=loc_id,
                    address=rec.geochain,
                )
            )
        return out


def bma_geohashes(
    results: Iterable[GeocodeResult],
    length: int = 4,
    min_confidence: Confidence = Confidence.MEDIUM,
    max_cells: int = geohash.DEFAULT_MAX_COVER_CELLS,
) -> dict[str, Confidence]:
    """Cover each sufficiently confident result's bbox; tag cells with the best confidence."""
    out: dict[str, Confidence] = {}
    for r in results:
        if r.confidence < min_confidence:
            continue
        for gh in geohash.cover(r.bbox, length, max_cells):
            prev = out.get(gh)
            if prev is None or r.confidence > prev:
                out[gh] = r.confidence
    return out


# -- remote client -----------------------------------------------------------


class GeocoderError(RuntimeError):
    pass


class GeocoderTimeout(GeocoderError):
    pass


class GeocoderRateLimited(GeocoderError):
    pass


class GeocoderAuthError(GeocoderError):
    pass


class GeocoderResponseError(GeocoderError):
    """The service answered with something that does not fit the wire format."""


@dataclass(frozen=True)
class GeocoderConfig:
    endpoint: str = ""
    api_key: str = ""
    qps_limit: float = 5.0
    timeout: float = 5.0
    cache_capacity: int = 10_000

    def __post_init__(self):
        if not self.qps_limit > 0:
            raise ValidationError("qps_limit must be positive")
        if not self.timeout > 0:
            raise ValidationError("timeout must be positive")
        if self.cache_capacity < 0:
            raise ValidationError("cache_capacity must be >= 0")


class RateLimiter:
    """Sliding-window limiter: at most ``rate`` acquisitions in any window.

    ``guard`` widens the window slightly so that jitter between acquiring a
    slot and actually issuing the request cannot squeeze an extra call into
    a one-second window as observed by the upstream.
    """

    def __init__(
        self,
        rate: float,
        window: float = 1.0,
        guard: float = 0.01,
        clock: Callable[[], float] = time.monotonic,
        sleep: Callable[[float], None] = time.sleep,
    ):
        if rate <= 0:
            raise ValidationError(f"rate must be positive, got {rate}")
        if rate >= 1:
            self.capacity = int(rate)
        else:
            # one call per 1/rate seconds keeps the long-run rate at ``rate``
            self.capacity = 1
            window = window / rate
        self.window = window + guard
        self._clock = clock
        self._sleep = sleep
        self._stamps: deque[float] = deque()
        self._lock = threading.Lock()

    def acquire(self) -> None:
        # waiting happens under the lock so slots are granted in arrival order
        with self._lock:
            while True:
                now = self._clock()
                while self._stamps and now - self._stamps[0] >= self.window:
                    self._stamps.popleft()
                if len(self._stamps) < self.capacity:
                    self._stamps.append(now)
                    return
                self._sleep(self._stamps[0] + self.window - now)


class _LRU:
    def __init__(self, capacity: int):
        self.capacity = capacity
        self._data: OrderedDict[str, list[GeocodeResult]] = OrderedDict()

    def get(self, key: str) -> list[GeocodeResult] | None:
        if key not in self._data:
            return None
        self._data.move_to_end(key)
        return self._data[key]

    def put(self, key: str, value: list[GeocodeResult]) -> None:
        if self.capacity <= 0:
            return
        self._data[key] = value
        self._data.move_to_end(key)
        while len(self._data) > self.capacity:
            self._data.popitem(last=False)

    def __len__(self) -> int:
        return len(self._data)


def parse_response(payload: Any) -> list[GeocodeResult]:
    """Map the wire format to results.

    Accepts either a bare list or an object with a ``results`` list; each item
    carries name, entityType, confidence, point{lat,lon} and
    bbox{south,west,north,east}.
    """
    if isinstance(payload, Mapping):
        payload = payload.get("results")
    if not isinstance(payload, list):
        raise GeocoderResponseError("response is not a list of results")
    out = []
    for i, item in enumerate(payload):
        try:
            pt = item["point"]
            bb = item["bbox"]
            out.append(
                GeocodeResult(
                    matched_name=str(item["name"]),
                    entity_type=str(item["entityType"]),
                    confidence=Confidence.parse(item["confidence"]),
                    point=LatLon(float(pt["lat"]), float(pt["lon"])),
                    bbox=BoundingBox(
                        south=float(bb["south"]), west=float(bb["west"]),
                        north=float(bb["north"]), east=float(bb["east"]),
                    ),
                    address=tuple(item.get("address") or ()),
                )
            )
        except (KeyError, TypeError, ValueError) as exc:
            raise GeocoderResponseError(f"result {i}: {exc}") from exc
    return out


Transport = Callable[[str], Any]


def http_transport(config: GeocoderConfig) -> Transport:
    """Blocking HTTP transport: GET endpoint?q=...&key=..., JSON body."""
    import requests

    def call(query: str) -> Any:
        try:
            resp = requests.get(
                config.endpoint,
                params={"q": query, "key": config.api_key},
                timeout=config.timeout,
            )
        except requests.Timeout as exc:
            raise GeocoderTimeout(str(exc)) from exc
        except requests.RequestException as exc:
            raise GeocoderError(str(exc)) from exc
        if resp.status_code == 429:
            raise GeocoderRateLimited("upstream returned 429")
        if resp.status_code in (401, 403):
            raise GeocoderAuthError(f"upstream returned {resp.status_code}")
        if resp.status_code >= 400:
            raise GeocoderError(f"upstream returned {resp.status_code}")
        try:
            return resp.json()
        except ValueError as exc:
            raise GeocoderResponseError("body is not JSON") from exc

    return call


class RemoteGeocoder:
    def __init__(
        self,
        config: GeocoderConfig,
        transport: Transport | None = None,
        limiter: RateLimiter | None = None,
    ):
        self.config = config
        self._transport = transport or http_transport(config)
        self._limiter = limiter or RateLimiter(config.qps_limit)
        self._cache = _LRU(config.cache_capacity)
        self._lock = threading.Lock()
        self._inflight: dict[str, tuple[threading.Event, list]] = {}
        self.upstream_calls = 0

    def geocode(self, query: str) -> list[GeocodeResult]:
        _check_query(query)
        use_cache = self.config.cache_capacity > 0
        if use_cache:
            with self._lock:
                hit = self._cache.get(query)
                if hit is not None:
                    return list(hit)
                pending = self._inflight.get(query)
                if pending is None:
                    pending = (threading.Event(), [])
                    self._inflight[query] = pending
                    leader = True
                else:
                    leader = False
            event, slot = pending
            if not leader:
                event.wait()
                if isinstance(slot[0], BaseException):
                    raise slot[0]
                return list(slot[0])
        try:
            results = self._fetch(query)
        except BaseException as exc:
            if use_cache:
                slot.append(exc)
                with self._lock:
                    del self._inflight[query]
                event.set()
            raise
        if use_cache:
            slot.append(results)
            with self._lock:
                self._cache.put(query, results)
                del self._inflight[query]
            event.set()
        return list(results)

    def _fetch(self, query: str) -> list[GeocodeResult]:
        self._limiter.acquire()
        with self._lock:
            self.upstream_calls += 1
        return parse_response(self._transport(query))

