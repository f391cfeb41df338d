"""Feed-quality metrics: user-to-article distance and its percentiles."""

from __future__ import annotations

import json
import math
from dataclasses import dataclass
from pathlib import Path
from typing import Any, Iterable, Mapping, Sequence

from localgeo import geohash
from localgeo.errors import ValidationError
from localgeo.gazetteer import CHAIN_LENGTH, CITY, COUNTY, STATE, Gazetteer
from localgeo.geohash import EARTH_RADIUS_KM, LatLon

_ZEROING_LEVELS = (CITY, COUNTY, STATE)


def haversine_km(a: LatLon, b: LatLon) -> float:
    p1, p2 = math.radians(a.lat), math.radians(b.lat)
    dp = p2 - p1
    dl = math.radians(b.lon - a.lon)
    h = math.sin(dp / 2) ** 2 + math.cos(p1) * math.cos(p2) * math.sin(dl / 2) ** 2
    return 2 * EARTH_RADIUS_KM * math.asin(min(1.0, math.sqrt(h)))


@dataclass(frozen=True)
class Impression:
    user_point: LatLon
    article_id: str
    stamped: frozenset[str]
    user_geochain: tuple[str, ...] | None = None
    article_locations: frozenset[str] | None = None
    request_id: str | None = None

    @property
    def pair_key(self) -> tuple:
        if self.request_id is not None:
            return ("request", self.request_id)
        return ("pair", self.user_point.lat, self.user_point.lon, self.article_id)

    @classmethod
    def from_dict(cls, d: Mapping[str, Any], stamped: Iterable[str] = (),
                  article_locations: Iterable[str] | None = None) -> Impression:
        if not d.get("article_id"):
            raise ValidationError("impression without article_id")
        chain = d.get("geochain") or d.get("user_geochain")
        return cls(
            user_point=LatLon(float(d["lat"]), float(d["lon"])),
            article_id=str(d["article_id"]),
            stamped=frozenset(stamped),
            user_geochain=tuple(chain) if chain else None,
            article_locations=None if article_locations is None else frozenset(article_locations),
            request_id=d.get("request_id"),
        )


def _division_match(imp: Impression, gaz: Gazetteer | None) -> bool:
    if not imp.user_geochain or not imp.article_locations or gaz is None:
        return False
    user = imp.user_geochain
    for loc_id in imp.article_locations:
        if loc_id not in gaz:
            continue
        rec = gaz.get(loc_id)
        if rec.level not in _ZEROING_LEVELS:
            continue
        k = CHAIN_LENGTH[rec.level]
        # the article place is compared at its own level: a county story
        # matches users in that county, a city story users in that city
        if len(user) >= k and tuple(user[-k:]) == rec.geochain:
            return True
    return False


def doc_distance_km(imp: Impression, gaz: Gazetteer | None = None) -> float | None:
    """Distance from the user to the article's stamped area; None if unstamped."""
    if not imp.stamped:
        return None
    if geohash.encode(imp.user_point, 4) in imp.stamped:
        return 0.0
    if _division_match(imp, gaz):
        return 0.0
    return min(haversine_km(imp.user_point, geohash.decode_center(g)) for g in imp.stamped)


def percentile_km(values: Sequence[float], p: float) -> float:
    """Nearest-rank percentile."""
    if not values:
        raise ValidationError("percentile of an empty sequence")
    if not 0 < p <= 100:
        raise ValidationError(f"percentile must be in (0, 100], got {p}")
    ordered = sorted(values)
    rank = math.ceil(p / 100.0 * len(ordered))
    return ordered[max(rank, 1) - 1]


@dataclass(frozen=True)
class DistanceReport:
    n: int
    p50_km: float | None
    p75_km: float | None
    zero_fraction: float
    excluded_unstamped: int

    def to_dict(self) -> dict:
        return {
            "n": self.n,
            "p50_km": self.p50_km,
            "p75_km": self.p75_km,
            "zero_fraction": self.zero_fraction,
            "excluded_unstamped": self.excluded_unstamped,
        }


def distance_report(impressions: Iterable[Impression], gaz: Gazetteer | None = None) -> DistanceReport:
    values = []
    excluded = 0
    for imp in impressions:
        d = doc_distance_km(imp, gaz)
        if d is None:
            excluded += 1
        else:
            values.append(d)
    if not values:
        return DistanceReport(0, None, None, 0.0, excluded)
    return DistanceReport(
        n=len(values),
        p50_km=percentile_km(values, 50),
        p75_km=percentile_km(values, 75),
        zero_fraction=sum(1 for v in values if v == 0.0) / len(values),
        excluded_unstamped=excluded,
    )


def _delta(a: float | None, b: float | None) -> float | None:
    return None if a is None or b is None else a - b


@dataclass(frozen=True)
class EvalReport:
    treatment: DistanceReport
    baseline: DistanceReport

    @property
    def delta_p50_km(self) -> float | None:
        return _delta(self.treatment.p50_km, self.baseline.p50_km)

    @property
    def delta_p75_km(self) -> float | None:
        return _delta(self.treatment.p75_km, self.baseline.p75_km)

    @property
    def delta_zero_fraction(self) -> float:
        return self.treatment.zero_fraction - self.baseline.zero_fraction

    def to_dict(self) -> dict:
        return {
            "treatment": self.treatment.to_dict(),
            "baseline": self.baseline.to_dict(),
            "delta": {
                "p50_km": self.delta_p50_km,
                "p75_km": self.delta_p75_km,
                "zero_fraction": self.delta_zero_fraction,
            },
        }

    def table(self) -> str:
        def fmt(v):
            return "-" if v is None else f"{v:.2f}"

        rows = [
            ("arm", "n", "P50 km", "P75 km", "zero frac", "unstamped"),
        ]
        for name, r in (("treatment", self.treatment), ("baseline", self.baseline)):
            rows.append((name, str(r.n), fmt(r.p50_km), fmt(r.p75_km),
                         f"{r.zero_fraction:.3f}", str(r.excluded_unstamped)))
        rows.append(("delta", "", fmt(self.delta_p50_km), fmt(self.delta_p75_km),
                     f"{self.delta_zero_fraction:+.3f}", ""))
        widths = [max(len(r[i]) for r in rows) for i in range(len(rows[0]))]
        return "\n".join("  ".join(c.ljust(w) for c, w in zip(r, widths)).rstrip() for r in rows)


def evaluate(
    treatment: Sequence[Impression],
    baseline: Sequence[Impression],
    gaz: Gazetteer | None = None,
) -> EvalReport:
    """Per-arm distance reports for two arms replaying the same requests.

    Impressions pair up by request id when one is set, otherwise by
    (user point, article id); both arms must cover the same keys.
    """
    t_keys = {imp.pair_key for imp in treatment}
    b_keys = {imp.pair_key for imp in baseline}
    if t_keys != b_keys:
        only_t = len(t_keys - b_keys)
        only_b = len(b_keys - t_keys)
        raise ValidationError(
            f"impression streams do not pair up: {only_t} keys only in treatment, "
            f"{only_b} only in baseline"
        )
    return EvalReport(distance_report(treatment, gaz), distance_report(baseline, gaz))


class DmaTable:
    """Publisher -> market area -> length-4 cells, the baseline stamping unit."""

    def __init__(self, dmas: Mapping[str, Iterable[str]], publishers: Mapping[str, str]):
        self.dmas = {k: frozenset(geohash.validate(g) for g in v) for k, v in dmas.items()}
        for g in (g for cells in self.dmas.values() for g in cells):
            if len(g) != 4:
                raise ValidationError(f"DMA cell {g!r} is not of length 4")
        unknown = sorted({d for d in publishers.values() if d not in self.dmas})
        if unknown:
            raise ValidationError(f"publishers mapped to unknown DMAs {unknown}")
        self.publishers = dict(publishers)

    def stamp_for(self, publisher: str) -> frozenset[str]:
        dma = self.publishers.get(publisher)
        return self.dmas[dma] if dma is not None else frozenset()

    def to_dict(self) -> dict:
        return {
            "dmas": {k: sorted(v) for k, v in sorted(self.dmas.items())},
            "publishers": dict(sorted(self.publishers.items())),
        }

    @classmethod
    def from_dict(cls, d: Mapping[str, Any]) -> DmaTable:
        return cls(d["dmas"], d["publishers"])

    @classmethod
    def load(cls, path: str | Path) -> DmaTable:
        with open(path, encoding="utf-8") as fh:
            return cls.from_dict(json.load(fh))

    def save(self, path: str | Path) -> None:
        with open(path, "w", encoding="utf-8") as fh:
            json.dump(self.to_dict(), fh, indent=1, sort_keys=True)
            fh.write("\n")
