"""Publisher-to-location affinity mining.

For a strongly local publisher, every location detected in its recent
articles is turned into length-4 geohash cells. Rarely covered areas are cut
with a gap-ratio filter, first over length-3 prefixes and then over the
counties and states of the surviving locations. What remains, generalised to
county level where the location table has the county, is the set of places
the publisher habitually covers.
"""

from __future__ import annotations

import logging
from collections import Counter, defaultdict
from dataclasses import dataclass, field
from datetime import datetime, timedelta
from typing import Hashable, Iterable, Mapping, Sequence, TypeVar

from localgeo import geohash
from localgeo.corpus import Article, build_geocode_query
from localgeo.errors import BuildError, CoverageTooLargeError, ValidationError
from localgeo.gazetteer import CITY, COUNTRY, COUNTY, STATE, CHAIN_LENGTH, Gazetteer
from localgeo.geocoder import Confidence, Geocoder, GeocoderError
from localgeo.geohash import BoundingBox

log = logging.getLogger(__name__)

K = TypeVar("K", bound=Hashable)

_LEVEL_OF_TYPE = {"city": CITY, "county": COUNTY, "state": STATE, "country": COUNTRY}


def gap_ratio_filter(counts: Mapping[K, int], tau: float) -> set[K]:
    """Keep the head of the descending count list up to the first sharp drop.

    With counts sorted c1 >= c2 >= ... (ties by key), the first i where
    c(i+1) / c(i) < tau ends the head; without such a drop every key is kept.
    """
    if not counts:
        raise ValidationError("gap_ratio_filter needs at least one count")
    if not 0.0 < tau < 1.0:
        raise ValidationError(f"tau must lie in (0, 1), got {tau}")
    if any(c <= 0 for c in counts.values()):
        raise ValidationError("counts must be positive")
    order = sorted(counts.items(), key=lambda kv: (-kv[1], kv[0]))
    kept = [order[0][0]]
    for (_, prev), (key, cur) in zip(order, order[1:]):
        if cur / prev < tau:
            break
        kept.append(key)
    return set(kept)


@dataclass(frozen=True)
class AffinityParams:
    tau_geohash3: float = 0.2
    tau_admin: float = 0.2
    min_articles: int = 20
    time_window: timedelta = timedelta(days=30)
    geohash_len: int = 4
    max_cover_cells: int = geohash.DEFAULT_MAX_COVER_CELLS
    trim_words: int = 10
    min_confidence: Confidence = Confidence.MEDIUM

    def __post_init__(self):
        for name in ("tau_geohash3", "tau_admin"):
            v = getattr(self, name)
            if not 0.0 < v < 1.0:
                raise ValidationError(f"{name} must lie in (0, 1), got {v}")
        if self.min_articles < 1:
            raise ValidationError("min_articles must be >= 1")
        if self.time_window <= timedelta(0):
            raise ValidationError("time_window must be positive")


@dataclass
class AffinityEntry:
    publisher: str
    locations: set[str]
    geohashes: set[str]
    support: dict[str, int]
    labels: dict[str, str] = field(default_factory=dict)

    def to_dict(self) -> dict:
        return {
            "publisher": self.publisher,
            "locations": sorted(self.locations),
            "geohashes": sorted(self.geohashes),
            "support": dict(sorted(self.support.items())),
            "labels": dict(sorted(self.labels.items())),
        }

    @classmethod
    def from_dict(cls, d: dict) -> AffinityEntry:
        entry = cls(
            publisher=d["publisher"],
            locations=set(d["locations"]),
            geohashes={geohash.validate(g) for g in d["geohashes"]},
            support={k: int(v) for k, v in d.get("support", {}).items()},
            labels=dict(d.get("labels", {})),
        )
        if not entry.publisher:
            raise ValidationError("affinity entry without publisher")
        return entry


@dataclass(frozen=True)
class _Loc:
    key: str
    level: str | None
    chain: tuple[str, ...]
    bbox: BoundingBox
    label: str

    def chain_at(self, level: str) -> tuple[str, ...] | None:
        k = CHAIN_LENGTH[level]
        # a chain shorter than the level, or one whose own level is coarser, has no entry
        if self.level is not None and CHAIN_LENGTH[self.level] < k:
            return None
        if len(self.chain) < k:
            return None
        return self.chain[len(self.chain) - k:]


def select_window(articles: Iterable[Article], end: datetime, window: timedelta) -> list[Article]:
    """Articles published in the half-open interval (end - window, end]."""
    start = end - window
    return [a for a in articles if start < a.published_at <= end]


def _article_locations(
    article: Article, gaz: Gazetteer, geocoder: Geocoder | None, params: AffinityParams
) -> list[_Loc]:
    locs: dict[str, _Loc] = {}
    for rec in gaz.lt_lookup(article.text):
        locs[rec.loc_id] = _Loc(rec.loc_id, rec.level, rec.geochain, rec.bbox, rec.label)
    if geocoder is not None:
        query = build_geocode_query(article, params.trim_words)
        if query:
            for r in geocoder.geocode(query):
                if r.confidence < params.min_confidence:
                    continue
                key = r.loc_id or "bma:" + r.matched_name + "|" + ">".join(r.address)
                if key in locs:
                    continue
                level = _LEVEL_OF_TYPE.get(r.entity_type.lower())
                if r.loc_id and r.loc_id in gaz:
                    rec = gaz.get(r.loc_id)
                    locs[key] = _Loc(key, rec.level, rec.geochain, rec.bbox, rec.label)
                else:
                    label = ", ".join(r.address) if r.address else r.matched_name
                    locs[key] = _Loc(key, level, tuple(r.address), r.bbox, label)
    return sorted(locs.values(), key=lambda l: l.key)


def build_affinity(
    publisher: str,
    articles: Sequence[Article],
    gaz: Gazetteer,
    geocoder: Geocoder | None,
    params: AffinityParams = AffinityParams(),
) -> AffinityEntry | None:
    """Mine one publisher's high-affinity locations; None when support is too thin."""
    for a in articles:
        if a.publisher != publisher:
            raise ValidationError(f"article {a.id} belongs to {a.publisher}, not {publisher}")
    if len(articles) < params.min_articles:
        return None

    length = params.geohash_len
    cells: dict[str, set[str]] = {}
    per_article: list[list[_Loc]] = []
    failures = 0
    for a in articles:
        try:
            found = _article_locations(a, gaz, geocoder, params)
        except (GeocoderError, ValidationError) as exc:
            failures += 1
            log.warning("affinity %s: article %s skipped: %s", publisher, a.id, exc)
            continue
        usable = []
        for loc in found:
            if loc.key not in cells:
                try:
                    cells[loc.key] = geohash.cover(loc.bbox, length, params.max_cover_cells)
                except CoverageTooLargeError:
                    # country-sized places are too coarse to say anything about coverage
                    cells[loc.key] = set()
            if cells[loc.key]:
                usable.append(loc)
        per_article.append(usable)
    if failures * 2 > len(articles):
        raise BuildError(f"{publisher}: {failures} of {len(articles)} articles failed extraction")

    # (c) article counts per length-3 prefix
    prefix_counts: Counter[str] = Counter()
    for locs in per_article:
        prefixes = {g[:3] for loc in locs for g in cells[loc.key]}
        prefix_counts.update(prefixes)
    if not prefix_counts:
        return None
    kept_prefixes = gap_ratio_filter(prefix_counts, params.tau_geohash3)

    # (d) locations with at least one cell under a surviving prefix
    def survives_prefix(loc: _Loc) -> bool:
        return any(g[:3] in kept_prefixes for g in cells[loc.key])

    per_article = [[l for l in locs if survives_prefix(l)] for locs in per_article]

    # (e) counties and states, counted once per article
    county_counts: Counter[tuple[str, ...]] = Counter()
    state_counts: Counter[tuple[str, ...]] = Counter()
    for locs in per_article:
        county_counts.update({c for l in locs if (c := l.chain_at(COUNTY)) is not None})
        state_counts.update({s for l in locs if (s := l.chain_at(STATE)) is not None})
    kept_counties = gap_ratio_filter(county_counts, params.tau_admin) if county_counts else set()
    kept_states = gap_ratio_filter(state_counts, params.tau_admin) if state_counts else set()

    def survives_admin(loc: _Loc) -> bool:
        state = loc.chain_at(STATE)
        if state is None or state not in kept_states:
            return False
        county = loc.chain_at(COUNTY)
        return county is None or county in kept_counties

    # (f) generalise to the finest admin unit the location table knows
    units: dict[str, _Loc] = {}
    support: Counter[str] = Counter()
    states_with_county = {c[1:] for c in kept_counties}
    for locs in per_article:
        hit = set()
        for loc in locs:
            if not survives_admin(loc):
                continue
            county = loc.chain_at(COUNTY)
            if county is not None:
                rec = gaz.find_admin(COUNTY, county)
                unit = (
                    _Loc(rec.loc_id, rec.level, rec.geochain, rec.bbox, rec.label)
                    if rec is not None
                    else loc
                )
            elif loc.chain_at(STATE) in states_with_county:
                # a finer unit already represents this state
                continue
            else:
                unit = loc
            units[unit.key] = unit
            hit.add(unit.key)
        support.update(hit)
    if not units:
        return None

    geohashes: set[str] = set()
    for unit in units.values():
        geohashes |= geohash.cover(unit.bbox, length, params.max_cover_cells)
    return AffinityEntry(
        publisher=publisher,
        locations=set(units),
        geohashes=geohashes,
        support=dict(support),
        labels={k: u.label for k, u in units.items()},
    )


def build_affinity_map(
    articles: Iterable[Article],
    publishers: Iterable[str],
    gaz: Gazetteer,
    geocoder: Geocoder | None,
    params: AffinityParams = AffinityParams(),
    end: datetime | None = None,
) -> dict[str, AffinityEntry]:
    """Affinity entries for the given strongly local publishers.

    Each publisher's articles are restricted to the window ending at ``end``
    (default: that publisher's most recent article).
    """
    by_pub: dict[str, list[Article]] = defaultdict(list)
    wanted = set(publishers)
    for a in articles:
        if a.publisher in wanted:
            by_pub[a.publisher].append(a)
    out = {}
    for pub in sorted(wanted):
        arts = by_pub.get(pub, [])
        if not arts:
            continue
        stop = end or max(a.published_at for a in arts)
        arts = sorted(select_window(arts, stop, params.time_window), key=lambda a: a.id)
        entry = build_affinity(pub, arts, gaz, geocoder, params)
        if entry is not None:
            out[pub] = entry
    return out
