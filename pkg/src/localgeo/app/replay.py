"""Offline replay: serve the same feed requests under two stamping arms.

The treatment arm stamps articles with the ensemble; the baseline arm stamps
every article of a DMA-mapped publisher with all cells of its market area.
Each arm gets its own feed index and serves every request. Every served
article is then scored against its ground-truth location. It cannot be
scored against the arm's own stamps, because each arm only serves articles
whose stamp already contains the user's cell.
"""

from __future__ import annotations

import json
import logging
import time
from dataclasses import dataclass, field
from pathlib import Path
from typing import Any, Iterable, Mapping, Sequence

from localgeo import geohash
from localgeo.affinity import AffinityEntry, build_affinity_map
from localgeo.app.config import AppConfig, load_config
from localgeo.app.pipeline import Pipeline, StampRun, make_geocoder, read_publisher_list
from localgeo.corpus import Article, load_corpus, load_jsonl
from localgeo.gazetteer import Gazetteer, load_gazetteer
from localgeo.geohash import LatLon
from localgeo.metrics import DmaTable, EvalReport, Impression, evaluate
from localgeo.serving import FeedIndex, PopularCity, build_index, load_cities, serve
from localgeo.stamper import StampResult

log = logging.getLogger(__name__)


@dataclass(frozen=True)
class Request:
    request_id: str
    point: LatLon
    geochain: tuple[str, ...] | None = None

    @classmethod
    def from_dict(cls, d: Mapping[str, Any]) -> Request:
        chain = d.get("geochain")
        return cls(str(d["request_id"]), LatLon(float(d["lat"]), float(d["lon"])),
                   tuple(chain) if chain else None)


@dataclass
class ReplayResult:
    report: EvalReport
    treatment_impressions: list[Impression]
    baseline_impressions: list[Impression]
    dropped_requests: int
    stamp_run: StampRun
    affinity: dict[str, AffinityEntry]
    timings: dict[str, float] = field(default_factory=dict)

    def to_dict(self) -> dict:
        return {
            "report": self.report.to_dict(),
            "impressions": {
                "treatment": len(self.treatment_impressions),
                "baseline": len(self.baseline_impressions),
            },
            "dropped_requests": self.dropped_requests,
            "stamping": self.stamp_run.summary(),
            "affinity_publishers": len(self.affinity),
            "timings_s": {k: round(v, 3) for k, v in self.timings.items()},
        }


def dma_stamps(articles: Iterable[Article], dma: DmaTable) -> list[StampResult]:
    out = []
    for a in articles:
        cells = dma.stamp_for(a.publisher)
        if cells:
            out.append(StampResult(a.id, set(cells), {g: {"DMA"} for g in cells}, set()))
    return out


def truth_cells(truth: Mapping[str, Sequence[str]], gaz: Gazetteer, length: int = 4) -> dict[str, frozenset[str]]:
    cache: dict[str, set[str]] = {}
    out = {}
    for aid, locs in truth.items():
        cells: set[str] = set()
        for loc in locs:
            if loc not in cache:
                cache[loc] = geohash.cover(gaz.get(loc).bbox, length)
            cells |= cache[loc]
        out[aid] = frozenset(cells)
    return out


def serve_requests(
    requests: Sequence[Request],
    index: FeedIndex,
    cities: Sequence[PopularCity],
    count: int,
    min_k: int,
) -> dict[str, tuple[str, ...]]:
    return {r.request_id: serve(r.point, count, index, cities, min_k).articles for r in requests}


def replay(
    articles: Sequence[Article],
    pipeline: Pipeline,
    dma: DmaTable,
    requests: Sequence[Request],
    cities: Sequence[PopularCity],
    truth: Mapping[str, Sequence[str]],
    truth_gaz: Gazetteer,
    config: AppConfig,
    affinity: Mapping[str, AffinityEntry] | None = None,
) -> ReplayResult:
    timings = {}
    t0 = time.perf_counter()
    run = pipeline.stamp_all(articles)
    timings["stamp"] = time.perf_counter() - t0

    by_id = {a.id: a for a in articles}
    t0 = time.perf_counter()
    treatment_index = build_index((s for s in run.results if s.geohashes), by_id)
    baseline_index = build_index(dma_stamps(articles, dma), by_id)
    feeds_t = serve_requests(requests, treatment_index, cities, config.feed_count, config.min_k)
    feeds_b = serve_requests(requests, baseline_index, cities, config.feed_count, config.min_k)
    timings["serve"] = time.perf_counter() - t0

    t0 = time.perf_counter()
    cells = truth_cells(truth, truth_gaz)
    imps_t: list[Impression] = []
    imps_b: list[Impression] = []
    dropped = 0
    for r in requests:
        ft, fb = feeds_t[r.request_id], feeds_b[r.request_id]
        if not ft or not fb:
            dropped += 1
            continue
        for feed, sink in ((ft, imps_t), (fb, imps_b)):
            for aid in feed:
                sink.append(Impression(
                    user_point=r.point,
                    article_id=aid,
                    stamped=cells.get(aid, frozenset()),
                    user_geochain=r.geochain,
                    article_locations=frozenset(truth.get(aid, ())),
                    request_id=r.request_id,
                ))
    report = evaluate(imps_t, imps_b, truth_gaz)
    timings["evaluate"] = time.perf_counter() - t0
    return ReplayResult(report, imps_t, imps_b, dropped, run, dict(affinity or pipeline.affinity), timings)


def load_truth(path: str | Path) -> dict[str, list[str]]:
    rows, _ = load_jsonl(path, lambda d: (d["article_id"], list(d["locations"])))
    return dict(rows)


def replay_dir(synth_dir: str | Path, config: AppConfig | None = None) -> ReplayResult:
    """Run affinity mining, stamping and the two-arm replay on a synth output directory."""
    synth_dir = Path(synth_dir)
    if config is None:
        config = load_config(synth_dir / "config.json", env={})
    t0 = time.perf_counter()
    gaz = load_gazetteer(config.gazetteer, config.alias_whitelist)
    geocoder = make_geocoder(config, gaz)
    truth_gaz = load_gazetteer(config.geocoder_gazetteer or config.gazetteer)
    articles, _ = load_corpus(config.corpus)
    strongly_local = read_publisher_list(config.strongly_local)
    load_s = time.perf_counter() - t0

    t0 = time.perf_counter()
    affinity = build_affinity_map(articles, strongly_local, gaz, geocoder, config.affinity_params())
    affinity_s = time.perf_counter() - t0

    pipeline = Pipeline(gaz, geocoder, affinity, config)
    requests, _ = load_jsonl(synth_dir / "users.jsonl", Request.from_dict)
    result = replay(
        articles, pipeline, DmaTable.load(config.dma), requests,
        load_cities(config.cities), load_truth(synth_dir / "truth.jsonl"), truth_gaz, config,
    )
    result.timings = {"load": load_s, "affinity": affinity_s, **result.timings}
    return result


def write_impressions(path: str | Path, impressions: Iterable[Impression]) -> None:
    with open(path, "w", encoding="utf-8") as fh:
        for imp in impressions:
            fh.write(json.dumps({
                "request_id": imp.request_id,
                "lat": imp.user_point.lat,
                "lon": imp.user_point.lon,
                "geochain": list(imp.user_geochain) if imp.user_geochain else None,
                "article_id": imp.article_id,
            }, sort_keys=True))
            fh.write("\n")
