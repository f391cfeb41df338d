"""HTTP service over a swappable feed-index snapshot."""

from __future__ import annotations

import json
import logging
import threading
from dataclasses import dataclass
from typing import Iterable, Sequence

from fastapi import FastAPI, HTTPException, Query, Request
from fastapi.responses import JSONResponse

from localgeo.app.pipeline import Pipeline
from localgeo.corpus import Article
from localgeo.errors import ValidationError
from localgeo.geohash import LatLon
from localgeo.serving import FeedIndex, PopularCity, build_index, serve
from localgeo.stamper import StampResult

log = logging.getLogger(__name__)


@dataclass(frozen=True)
class Snapshot:
    index: FeedIndex
    articles: dict[str, Article]
    stamps: dict[str, StampResult]


class FeedService:
    """Readers use whatever snapshot is current; ingestion builds a new one and swaps it in."""

    def __init__(
        self,
        pipeline: Pipeline,
        cities: Sequence[PopularCity],
        articles: Iterable[Article] = (),
        stamps: Iterable[StampResult] | None = None,
        min_k: int = 3,
        default_count: int = 10,
    ):
        self.pipeline = pipeline
        self.cities = list(cities)
        self.min_k = min_k
        self.default_count = default_count
        self._write_lock = threading.Lock()
        arts = {a.id: a for a in articles}
        if stamps is None:
            stamps = self.pipeline.stamp_all(arts.values()).results
        st = {s.article_id: s for s in stamps}
        self._snapshot = Snapshot(build_index((s for s in st.values() if s.geohashes), arts), arts, st)

    @property
    def snapshot(self) -> Snapshot:
        return self._snapshot

    def feed(self, user: LatLon, count: int | None = None) -> dict:
        snap = self._snapshot
        return serve(user, count or self.default_count, snap.index, self.cities, self.min_k).to_dict()

    def ingest(self, articles: Sequence[Article]) -> dict:
        with self._write_lock:
            snap = self._snapshot
            run = self.pipeline.stamp_all(articles)
            arts = dict(snap.articles)
            arts.update({a.id: a for a in articles})
            stamps = dict(snap.stamps)
            stamps.update({s.article_id: s for s in run.results})
            index = build_index((s for s in stamps.values() if s.geohashes), arts)
            self._snapshot = Snapshot(index, arts, stamps)
        return {
            "stamped": len(run.results),
            "failures": run.failures,
            "rules": {str(k): v for k, v in sorted(run.histogram.items())},
        }


def parse_ndjson_articles(body: str) -> tuple[list[Article], list[dict]]:
    articles, errors = [], []
    for lineno, line in enumerate(body.splitlines(), start=1):
        if not line.strip():
            continue
        try:
            articles.append(Article.from_dict(json.loads(line)))
        except (ValueError, TypeError, KeyError) as exc:
            errors.append({"line": lineno, "error": str(exc)})
    return articles, errors


def create_app(service: FeedService) -> FastAPI:
    app = FastAPI(title="localgeo feed service")

    @app.get("/healthz")
    def healthz():
        return {"status": "ok"}

    @app.get("/feed")
    def feed(
        lat: float = Query(..., ge=-90, le=90),
        lon: float = Query(..., ge=-180, le=180),
        count: int = Query(None, ge=1, le=500),
    ):
        return service.feed(LatLon(lat, lon), count)

    @app.get("/articles/{article_id}/locations")
    def locations(article_id: str):
        stamp = service.snapshot.stamps.get(article_id)
        if stamp is None:
            raise HTTPException(status_code=404, detail=f"unknown article {article_id}")
        return stamp.to_dict()

    @app.post("/articles")
    async def ingest(request: Request):
        body = (await request.body()).decode("utf-8", errors="replace")
        articles, errors = parse_ndjson_articles(body)
        if not articles and errors:
            return JSONResponse(status_code=400, content={"accepted": 0, "skipped": len(errors), "errors": errors})
        counts = service.ingest(articles)
        return {"accepted": len(articles), "skipped": len(errors), "errors": errors, **counts}

    @app.exception_handler(ValidationError)
    async def validation_error(_, exc: ValidationError):
        return JSONResponse(status_code=400, content={"detail": str(exc)})

    return app
