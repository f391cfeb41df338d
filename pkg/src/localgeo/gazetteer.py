"""Location table: curated places with aliases and admin geochains.

Alias matching is token based. Text is split into ``\\w+`` runs and
casefolded, so a match always starts and ends on a word boundary and
punctuation between words is ignored ("St. Louis" matches "st louis").
"""

from __future__ import annotations

import csv
import logging
import re
from collections import defaultdict
from dataclasses import dataclass
from pathlib import Path
from typing import Iterable

from localgeo import geohash
from localgeo.errors import ValidationError
from localgeo.geohash import BoundingBox, LatLon

log = logging.getLogger(__name__)

CITY = "city"
COUNTY = "county_or_district"
STATE = "state"
COUNTRY = "country"
LEVELS = (CITY, COUNTY, STATE, COUNTRY)
CHAIN_LENGTH = {CITY: 4, COUNTY: 3, STATE: 2, COUNTRY: 1}

MIN_ALIAS_CHARS = 3
STOPWORDS = frozenset(
    "the and for but not all any are was were with from this that new old".split()
)

COLUMNS = (
    "loc_id", "name", "aliases", "level", "geochain",
    "south", "west", "north", "east", "lat", "lon",
)

_TOKEN = re.compile(r"\w+")


def normalize(text: str) -> str:
    return " ".join(text.casefold().split())


def _tokens(text: str) -> tuple[str, ...]:
    return tuple(t.casefold() for t in _TOKEN.findall(text))


@dataclass(frozen=True)
class LocationRecord:
    loc_id: str
    name: str
    aliases: frozenset[str]
    level: str
    geochain: tuple[str, ...]
    bbox: BoundingBox
    point: LatLon

    def __post_init__(self):
        if not self.loc_id:
            raise ValidationError("loc_id must be non-empty")
        if self.level not in LEVELS:
            raise ValidationError(f"{self.loc_id}: unknown level {self.level!r}")
        if len(self.geochain) != CHAIN_LENGTH[self.level]:
            raise ValidationError(
                f"{self.loc_id}: {self.level} needs a geochain of {CHAIN_LENGTH[self.level]} entries"
            )
        if self.name not in self.aliases:
            raise ValidationError(f"{self.loc_id}: canonical name must be one of its aliases")
        if not self.bbox.contains(self.point):
            raise ValidationError(f"{self.loc_id}: point lies outside bbox")

    @property
    def label(self) -> str:
        return ", ".join(self.geochain)

    def chain_at(self, level: str) -> tuple[str, ...] | None:
        """Geochain suffix starting at ``level``, or None if the record is coarser."""
        k = CHAIN_LENGTH[level]
        if k > len(self.geochain):
            return None
        return self.geochain[len(self.geochain) - k:]


@dataclass(frozen=True)
class AliasMatch:
    alias: str
    start: int
    end: int
    loc_ids: frozenset[str]


class Gazetteer:
    """Immutable snapshot of location records with an alias index."""

    def __init__(self, records: Iterable[LocationRecord]):
        self.records: dict[str, LocationRecord] = {}
        index: dict[str, set[str]] = defaultdict(set)
        for rec in records:
            if rec.loc_id in self.records:
                raise ValidationError(f"duplicate loc_id {rec.loc_id}")
            self.records[rec.loc_id] = rec
            for alias in rec.aliases:
                index[normalize(alias)].add(rec.loc_id)
        self.alias_index: dict[str, frozenset[str]] = {k: frozenset(v) for k, v in index.items()}

        # first token -> [(token tuple, normalized alias)], longest first
        self._by_first: dict[str, list[tuple[tuple[str, ...], str]]] = defaultdict(list)
        for alias in self.alias_index:
            toks = _tokens(alias)
            if toks:
                self._by_first[toks[0]].append((toks, alias))
        for entries in self._by_first.values():
            entries.sort(key=lambda e: (-len(e[0]), e[1]))

        by_chain: dict[tuple[str, tuple[str, ...]], list[str]] = defaultdict(list)
        for rec in self.records.values():
            by_chain[(rec.level, rec.geochain)].append(rec.loc_id)
        self._by_chain = {k: sorted(v) for k, v in by_chain.items()}

    def __len__(self) -> int:
        return len(self.records)

    def __contains__(self, loc_id: str) -> bool:
        return loc_id in self.records

    def get(self, loc_id: str) -> LocationRecord:
        return self.records[loc_id]

    def find_admin(self, level: str, chain: tuple[str, ...]) -> LocationRecord | None:
        """Record at ``level`` whose geochain equals ``chain`` (first by loc_id)."""
        ids = self._by_chain.get((level, tuple(chain)))
        return self.records[ids[0]] if ids else None

    def matches(self, text: str) -> list[AliasMatch]:
        """Non-overlapping alias matches, longer matches winning over shorter ones."""
        spans = [(m.start(), m.end(), m.group().casefold()) for m in _TOKEN.finditer(text)]
        toks = [t for _, _, t in spans]
        candidates = []
        for i, tok in enumerate(toks):
            for alias_toks, alias in self._by_first.get(tok, ()):
                n = len(alias_toks)
                if tuple(toks[i:i + n]) == alias_toks:
                    candidates.append((i, i + n, alias))
        candidates.sort(key=lambda c: (-(c[1] - c[0]), c[0], c[2]))
        taken = [False] * len(toks)
        chosen = []
        for i, j, alias in candidates:
            if any(taken[i:j]):
                continue
            for k in range(i, j):
                taken[k] = True
            chosen.append(AliasMatch(alias, spans[i][0], spans[j - 1][1], self.alias_index[alias]))
        chosen.sort(key=lambda m: m.start)
        return chosen

    def lt_lookup(self, text: str) -> set[LocationRecord]:
        return {self.records[i] for m in self.matches(text) for i in m.loc_ids}


def lt_lookup(text: str, gaz: Gazetteer) -> set[LocationRecord]:
    return gaz.lt_lookup(text)


def location_geohashes(
    rec: LocationRecord, length: int = 4, max_cells: int = geohash.DEFAULT_MAX_COVER_CELLS
) -> set[str]:
    return geohash.cover(rec.bbox, length, max_cells)


def check_alias(alias: str, whitelist: frozenset[str] = frozenset()) -> None:
    norm = normalize(alias)
    if norm in whitelist:
        return
    if len(norm) < MIN_ALIAS_CHARS:
        raise ValidationError(f"alias {alias!r} is shorter than {MIN_ALIAS_CHARS} characters")
    if norm in STOPWORDS:
        raise ValidationError(f"alias {alias!r} is a generic word")
    if not _tokens(norm):
        raise ValidationError(f"alias {alias!r} has no word characters")


def make_record(
    loc_id: str,
    name: str,
    level: str,
    geochain: Iterable[str],
    bbox: BoundingBox,
    point: LatLon | None = None,
    aliases: Iterable[str] = (),
    whitelist: frozenset[str] = frozenset(),
) -> LocationRecord:
    names = {name, *aliases}
    for a in names:
        check_alias(a, whitelist)
    return LocationRecord(
        loc_id=loc_id,
        name=name,
        aliases=frozenset(names),
        level=level,
        geochain=tuple(geochain),
        bbox=bbox,
        point=point or bbox.center,
    )


def _row_to_record(row: dict[str, str], whitelist: frozenset[str]) -> LocationRecord:
    aliases = [a.strip() for a in (row.get("aliases") or "").split("|") if a.strip()]
    chain = [c.strip() for c in row["geochain"].split(">") if c.strip()]
    bbox = BoundingBox(
        south=float(row["south"]), west=float(row["west"]),
        north=float(row["north"]), east=float(row["east"]),
    )
    point = LatLon(float(row["lat"]), float(row["lon"]))
    return make_record(
        row["loc_id"].strip(), row["name"].strip(), row["level"].strip(),
        chain, bbox, point, aliases, whitelist,
    )


def read_records(
    path: str | Path, whitelist: Iterable[str] = ()
) -> tuple[list[LocationRecord], list[tuple[int, str]]]:
    """Parse a tab-separated gazetteer file; returns (records, [(line, error)])."""
    wl = frozenset(normalize(w) for w in whitelist)
    records, errors = [], []
    with open(path, encoding="utf-8", newline="") as fh:
        reader = csv.DictReader(fh, delimiter="\t")
        missing = [c for c in COLUMNS if c not in (reader.fieldnames or [])]
        if missing:
            raise ValidationError(f"{path}: missing columns {missing}")
        for row in reader:
            try:
                records.append(_row_to_record(row, wl))
            except (ValueError, KeyError, TypeError) as exc:
                errors.append((reader.line_num, str(exc)))
    return records, errors


def load_gazetteer(path: str | Path, whitelist: Iterable[str] = ()) -> Gazetteer:
    records, errors = read_records(path, whitelist)
    for line, err in errors:
        log.warning("%s:%d: %s", path, line, err)
    if errors:
        raise ValidationError(f"{path}: {len(errors)} invalid gazetteer rows (first: line {errors[0][0]}: {errors[0][1]})")
    return Gazetteer(records)


def write_gazetteer(path: str | Path, records: Iterable[LocationRecord]) -> None:
    with open(path, "w", encoding="utf-8", newline="") as fh:
        writer = csv.writer(fh, delimiter="\t", lineterminator="\n")
        writer.writerow(COLUMNS)
        for r in sorted(records, key=lambda r: r.loc_id):
            others = sorted(a for a in r.aliases if a != r.name)
            writer.writerow([
                r.loc_id, r.name, "|".join(others), r.level, ">".join(r.geochain),
                repr(r.bbox.south), repr(r.bbox.west), repr(r.bbox.north), repr(r.bbox.east),
                repr(r.point.lat), repr(r.point.lon),
            ])
