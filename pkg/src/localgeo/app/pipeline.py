"""Wiring of candidate extraction, stamping and file I/O."""

from __future__ import annotations

import logging
from collections import Counter
from dataclasses import dataclass, field
from pathlib import Path
from typing import Iterable, Mapping

from localgeo import geohash
from localgeo.affinity import AffinityEntry
from localgeo.app.config import AppConfig
from localgeo.corpus import Article, build_geocode_query, load_jsonl, write_jsonl
from localgeo.errors import CoverageTooLargeError, ValidationError
from localgeo.gazetteer import Gazetteer, load_gazetteer, location_geohashes
from localgeo.geocoder import (
    Confidence,
    Geocoder,
    GeocoderError,
    OfflineGeocoder,
    RemoteGeocoder,
)
from localgeo.stamper import BMA, PUB, CandidateSets, StampResult, stamp

log = logging.getLogger(__name__)

RULES = (1, 2, 3, 4, 5, 6)


@dataclass
class StampRun:
    results: list[StampResult] = field(default_factory=list)
    histogram: Counter = field(default_factory=lambda: Counter({r: 0 for r in RULES}))
    failures: int = 0
    oversized_locations: int = 0

    def summary(self) -> dict:
        return {
            "articles": len(self.results),
            "failures": self.failures,
            "oversized_locations": self.oversized_locations,
            "rules": {str(r): self.histogram[r] for r in RULES},
        }


class Pipeline:
    def __init__(
        self,
        gaz: Gazetteer,
        geocoder: Geocoder | None,
        affinity: Mapping[str, AffinityEntry],
        config: AppConfig = AppConfig(),
    ):
        self.gaz = gaz
        self.geocoder = geocoder
        self.affinity = dict(affinity)
        self.config = config
        self._oversized = 0

    @classmethod
    def from_config(cls, config: AppConfig, affinity: Mapping[str, AffinityEntry] | None = None) -> Pipeline:
        if not config.gazetteer:
            raise ValidationError("config has no gazetteer path")
        gaz = load_gazetteer(config.gazetteer, config.alias_whitelist)
        if affinity is None:
            affinity = load_affinity(config.affinity) if config.affinity else {}
        return cls(gaz, make_geocoder(config, gaz), affinity, config)

    def candidates(self, article: Article) -> tuple[CandidateSets, dict[str, set[str]]]:
        """Candidate sets plus, for BMA cells, the location ids behind them."""
        length = self.config.geohash_len
        cap = self.config.max_cover_cells
        lt = set()
        for rec in self.gaz.lt_lookup(article.text):
            try:
                cells = location_geohashes(rec, length, cap)
            except CoverageTooLargeError:
                self._oversized += 1
                continue
            lt.update((g, rec.loc_id) for g in cells)

        bma: dict[str, Confidence] = {}
        bma_locs: dict[str, set[str]] = {}
        query = build_geocode_query(article, self.config.trim_words)
        if self.geocoder is not None and query:
            for r in self.geocoder.geocode(query):
                if r.confidence < Confidence.MEDIUM:
                    continue
                try:
                    cells = geohash.cover(r.bbox, length, cap)
                except CoverageTooLargeError:
                    self._oversized += 1
                    continue
                for g in cells:
                    if g not in bma or r.confidence > bma[g]:
                        bma[g] = r.confidence
                    if r.loc_id:
                        bma_locs.setdefault(g, set()).add(r.loc_id)

        entry = self.affinity.get(article.publisher)
        pub = entry.geohashes if entry is not None else None
        return CandidateSets.build(lt=lt, bma=bma, pub=pub), bma_locs

    def stamp_article(self, article: Article) -> StampResult:
        cands, bma_locs = self.candidates(article)
        result = stamp(article.id, cands, self.config.prefix_len)
        for g, prov in result.provenance.items():
            if BMA in prov:
                result.locations |= bma_locs.get(g, set())
        if PUB in {p for prov in result.provenance.values() for p in prov}:
            result.locations |= self.affinity[article.publisher].locations
        return result

    def stamp_all(self, articles: Iterable[Article]) -> StampRun:
        run = StampRun()
        self._oversized = 0
        for a in articles:
            try:
                res = self.stamp_article(a)
            except (GeocoderError, ValidationError) as exc:
                run.failures += 1
                log.warning("article %s not stamped: %s", a.id, exc)
                continue
            run.results.append(res)
            run.histogram.update(res.rules_fired)
        run.oversized_locations = self._oversized
        return run


def make_geocoder(config: AppConfig, gaz: Gazetteer) -> Geocoder:
    if config.geocoder == "remote":
        if not config.geocoder_endpoint:
            raise ValidationError("remote geocoder needs geocoder_endpoint")
        return RemoteGeocoder(config.geocoder_config())
    if config.geocoder_gazetteer and config.geocoder_gazetteer != config.gazetteer:
        return OfflineGeocoder(load_gazetteer(config.geocoder_gazetteer, config.alias_whitelist))
    return OfflineGeocoder(gaz)


def load_affinity(path: str | Path) -> dict[str, AffinityEntry]:
    entries, _ = load_jsonl(path, AffinityEntry.from_dict)
    out = {}
    for e in entries:
        if e.publisher in out:
            raise ValidationError(f"{path}: duplicate affinity entry for {e.publisher}")
        out[e.publisher] = e
    return out


def write_affinity(path: str | Path, entries: Mapping[str, AffinityEntry]) -> int:
    return write_jsonl(path, (entries[p].to_dict() for p in sorted(entries)))


def load_stamps(path: str | Path) -> list[StampResult]:
    stamps, _ = load_jsonl(path, StampResult.from_dict)
    return stamps


def write_stamps(path: str | Path, stamps: Iterable[StampResult]) -> int:
    return write_jsonl(path, (s.to_dict() for s in sorted(stamps, key=lambda s: s.article_id)))


def read_publisher_list(path: str | Path) -> list[str]:
    with open(path, encoding="utf-8") as fh:
        return [ln.strip() for ln in fh if ln.strip() and not ln.startswith("#")]
