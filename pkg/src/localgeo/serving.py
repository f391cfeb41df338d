"""Geohash-keyed feed index and serving with nearest-city backfill."""

from __future__ import annotations

import csv
from dataclasses import dataclass, field
from datetime import datetime, timezone
from pathlib import Path
from typing import Iterable, Mapping, Sequence

from localgeo import geohash
from localgeo.corpus import Article, format_timestamp
from localgeo.errors import BuildError, ValidationError
from localgeo.geohash import LatLon
from localgeo.metrics import haversine_km
from localgeo.stamper import StampResult

LOCAL = "local"
BACKFILL = "backfill"


@dataclass(frozen=True)
class PopularCity:
    name: str
    point: LatLon
    geohash4: str = ""

    def __post_init__(self):
        expected = geohash.encode(self.point, 4)
        if not self.geohash4:
            object.__setattr__(self, "geohash4", expected)
        elif self.geohash4 != expected:
            raise ValidationError(f"{self.name}: geohash4 {self.geohash4} != {expected}")


@dataclass(frozen=True)
class FeedIndex:
    # each posting list is sorted newest first, ties by article id
    postings: Mapping[str, tuple[tuple[str, datetime], ...]]
    built_at: datetime = field(default_factory=lambda: datetime.now(timezone.utc))

    def supply(self, gh: str) -> int:
        return len(self.postings.get(gh, ()))

    def __len__(self) -> int:
        return len(self.postings)


@dataclass(frozen=True)
class FeedResponse:
    articles: tuple[str, ...]
    source: str
    user_geohash: str
    backfill_city: str | None = None

    def __post_init__(self):
        if (self.source == BACKFILL) != (self.backfill_city is not None):
            raise ValidationError("backfill_city must be set exactly for backfill responses")

    def to_dict(self) -> dict:
        return {
            "articles": list(self.articles),
            "source": self.source,
            "user_geohash": self.user_geohash,
            "backfill_city": self.backfill_city,
        }


def build_index(
    stamps: Iterable[StampResult],
    articles: Mapping[str, Article] | Iterable[Article],
    built_at: datetime | None = None,
) -> FeedIndex:
    """Recency-ranked postings keyed by stamped length-4 geohash."""
    if not isinstance(articles, Mapping):
        articles = {a.id: a for a in articles}
    lists: dict[str, list[tuple[str, datetime]]] = {}
    for s in stamps:
        art = articles.get(s.article_id)
        if art is None:
            raise BuildError(f"stamp references unknown article {s.article_id}")
        for g in s.geohashes:
            lists.setdefault(g, []).append((s.article_id, art.published_at))
    postings = {}
    for g, items in lists.items():
        items.sort(key=lambda it: it[0])
        items.sort(key=lambda it: it[1], reverse=True)
        postings[g] = tuple(items)
    return FeedIndex(postings, built_at or datetime.now(timezone.utc))


def nearest_city(user: LatLon, cities: Sequence[PopularCity]) -> PopularCity:
    if not cities:
        raise ValidationError("no popular cities configured")
    return min(cities, key=lambda c: (haversine_km(user, c.point), c.name))


def serve(
    user: LatLon,
    count: int,
    index: FeedIndex,
    cities: Sequence[PopularCity] = (),
    min_k: int = 3,
) -> FeedResponse:
    """Feed for a user: own geohash-4 cell first, nearest popular city when thin.

    With no cities configured the local list is returned as is.
    """
    if count < 1:
        raise ValidationError("count must be >= 1")
    if min_k < 1:
        raise ValidationError("min_k must be >= 1")
    gh = geohash.encode(user, 4)
    local = [aid for aid, _ in index.postings.get(gh, ())]
    if len(local) >= min_k or not cities:
        return FeedResponse(tuple(local[:count]), LOCAL, gh)
    city = nearest_city(user, cities)
    merged = list(local)
    seen = set(local)
    for aid, _ in index.postings.get(city.geohash4, ()):
        if aid not in seen:
            seen.add(aid)
            merged.append(aid)
    return FeedResponse(tuple(merged[:count]), BACKFILL, gh, city.name)


def load_cities(path: str | Path) -> list[PopularCity]:
    """Read ``name, lat, lon`` rows (tab or comma separated, header required)."""
    with open(path, encoding="utf-8", newline="") as fh:
        head = fh.readline()
        fh.seek(0)
        delim = "\t" if "\t" in head else ","
        reader = csv.DictReader(fh, delimiter=delim)
        missing = [c for c in ("name", "lat", "lon") if c not in (reader.fieldnames or [])]
        if missing:
            raise ValidationError(f"{path}: missing columns {missing}")
        cities = [
            PopularCity(row["name"].strip(), LatLon(float(row["lat"]), float(row["lon"])))
            for row in reader
        ]
    names = [c.name for c in cities]
    if len(set(names)) != len(names):
        raise ValidationError(f"{path}: duplicate city names")
    return cities


def write_cities(path: str | Path, cities: Iterable[PopularCity]) -> None:
    with open(path, "w", encoding="utf-8", newline="") as fh:
        w = csv.writer(fh, delimiter="\t", lineterminator="\n")
        w.writerow(["name", "lat", "lon"])
        for c in cities:
            w.writerow([c.name, repr(c.point.lat), repr(c.point.lon)])


def index_summary(index: FeedIndex) -> dict:
    return {
        "cells": len(index.postings),
        "postings": sum(len(v) for v in index.postings.values()),
        "built_at": format_timestamp(index.built_at),
    }
