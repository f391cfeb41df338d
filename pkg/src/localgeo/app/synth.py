"""Deterministic synthetic world for desk-scale experiments.

The world is a grid of states split into 1x1 degree counties, each holding a
few towns. Strongly local publishers sit in a subset of counties and mostly
write about their home county; wire publishers write about places anywhere.
Market areas (DMAs) group neighbouring counties. Everything needed to score
a run is written out as ground truth.

Output files (all inside ``out_dir``)::

    location_table.tsv     gazetteer used for location-table lookup
    geocoder_gazetteer.tsv superset used by the offline geocoder
    corpus.jsonl           articles
    strongly_local.txt     publishers eligible for affinity mining
    dma.json               publisher -> DMA -> cells
    cities.tsv             popular cities for backfill
    users.jsonl            feed requests (request_id, lat, lon, geochain)
    truth.jsonl            per-article true locations and generation kind
    truth_publishers.json  per-publisher home county, remote places, DMA
    config.json            AppConfig pointing at the files above
"""

from __future__ import annotations

import json
import random
from collections import Counter
from dataclasses import dataclass, field
from datetime import datetime, timedelta, timezone
from pathlib import Path

from localgeo import geohash
from localgeo.corpus import Article, format_timestamp, write_jsonl
from localgeo.gazetteer import CITY, COUNTRY, COUNTY, STATE, LocationRecord, make_record, write_gazetteer
from localgeo.geohash import BoundingBox, LatLon
from localgeo.metrics import DmaTable
from localgeo.serving import PopularCity, write_cities

COUNTRY_NAME = "Norland"
ORIGIN = (40.0, -124.0)
STATE_GRID = (2, 2)
COUNTIES_PER_STATE = (3, 4)
TOWNS_PER_COUNTY = 3
HAMLETS_PER_COUNTY = 2
TOWN_SIZE = (0.06, 0.08)
END_TIME = datetime(2024, 6, 30, 12, 0, tzinfo=timezone.utc)

_ONSETS = "b br c cr d dr f fl g gr h k l m n p pr r s st t tr v w".split()
_VOWELS = "a e i o u ai ea ou".split()
_CODAS = "n r l m s th rn ck ll nd".split()
_SUFFIXES = "ton ville ford dale wick moor field haven brook stead mouth bury".split()

FILLER = (
    "council school police weather traffic market festival library budget "
    "museum bridge highway residents officials teachers students parade "
    "shelter volunteers election mayor board meeting project housing park "
    "concert restaurant hospital clinic firefighters storm repairs closure "
    "community opening season downtown neighborhood report plan vote team "
    "game coach players fans evening morning weekend update announced said "
    "local new funds program event celebrate annual crews road detour water"
).split()

ARTICLE_KINDS_LOCAL = (
    ("home", 22), ("alias", 5), ("implicit", 7), ("county", 3), ("hamlet", 3),
    ("multi", 2), ("neighbor", 1), ("remote", 3),
)
ARTICLE_KINDS_WIRE = (
    ("wire_city", 5), ("wire_hamlet", 2), ("wire_hamlet_alias", 1), ("wire_buried", 1), ("wire_none", 1),
)


class _Names:
    def __init__(self, rng: random.Random):
        self.rng = rng
        self.used: set[str] = set(FILLER)

    def make(self, suffix: bool = True) -> str:
        for _ in range(1000):
            core = self.rng.choice(_ONSETS) + self.rng.choice(_VOWELS) + self.rng.choice(_CODAS)
            if suffix:
                core += self.rng.choice(_SUFFIXES)
            else:
                core += self.rng.choice(_VOWELS)
            if len(core) >= 5 and core not in self.used:
                self.used.add(core)
                return core.capitalize()
        raise RuntimeError("name space exhausted")


@dataclass
class County:
    record: LocationRecord
    state_idx: int
    row: int
    col: int
    towns: list[LocationRecord] = field(default_factory=list)
    hamlets: list[LocationRecord] = field(default_factory=list)


@dataclass
class World:
    country: LocationRecord
    states: list[LocationRecord]
    counties: list[County]
    dmas: dict[str, list[str]]  # dma id -> county loc_ids

    @property
    def lt_records(self) -> list[LocationRecord]:
        out = [self.country, *self.states]
        for c in self.counties:
            out.append(c.record)
            out.extend(c.towns)
        return out

    @property
    def geocoder_records(self) -> list[LocationRecord]:
        return self.lt_records + [h for c in self.counties for h in c.hamlets]

    def county_of(self, loc_id: str) -> County:
        for c in self.counties:
            if c.record.loc_id == loc_id or any(t.loc_id == loc_id for t in c.towns + c.hamlets):
                return c
        raise KeyError(loc_id)

    def dma_of(self, county_id: str) -> str:
        for d, members in self.dmas.items():
            if county_id in members:
                return d
        raise KeyError(county_id)


def _r(x: float) -> float:
    return round(x, 5)


def build_world(rng: random.Random) -> World:
    names = _Names(rng)
    srows, scols = STATE_GRID
    crows, ccols = COUNTIES_PER_STATE
    lat0, lon0 = ORIGIN
    country_box = BoundingBox(lat0, lon0, lat0 + srows * crows, lon0 + scols * ccols)
    country = make_record("nl", COUNTRY_NAME, COUNTRY, [COUNTRY_NAME], country_box)
    states, counties, dmas = [], [], {}
    for si in range(srows * scols):
        sr, sc = divmod(si, scols)
        s_south, s_west = lat0 + sr * crows, lon0 + sc * ccols
        sname = names.make(suffix=False)
        sid = f"nl-s{si}"
        state = make_record(
            sid, sname, STATE, [sname, COUNTRY_NAME],
            BoundingBox(s_south, s_west, s_south + crows, s_west + ccols),
        )
        states.append(state)
        for cr in range(crows):
            for cc in range(ccols):
                cname = names.make() + " County"
                cid = f"{sid}-c{cr}{cc}"
                box = BoundingBox(s_south + cr, s_west + cc, s_south + cr + 1, s_west + cc + 1)
                county = County(
                    make_record(cid, cname, COUNTY, [cname, sname, COUNTRY_NAME], box),
                    si, cr, cc,
                )
                placed: list[BoundingBox] = []
                for kind, count in (("t", TOWNS_PER_COUNTY), ("h", HAMLETS_PER_COUNTY)):
                    for k in range(count):
                        tbox = _place_box(rng, box, placed)
                        placed.append(tbox)
                        tname = names.make()
                        alias = names.make(suffix=False)
                        rec = make_record(
                            f"{cid}-{kind}{k}", tname, CITY, [tname, cname, sname, COUNTRY_NAME],
                            tbox, aliases=[alias],
                        )
                        (county.towns if kind == "t" else county.hamlets).append(rec)
                counties.append(county)
                # market areas: 2x2 blocks of counties inside a state
                did = f"dma-{si}-{cr // 2}{cc // 2}"
                dmas.setdefault(did, []).append(cid)
    return World(country, states, counties, dmas)


def _place_box(rng: random.Random, county: BoundingBox, placed: list[BoundingBox]) -> BoundingBox:
    h, w = TOWN_SIZE
    margin = 0.05
    for _ in range(200):
        s = rng.uniform(county.south + margin, county.north - margin - h)
        west = rng.uniform(county.west + margin, county.east - margin - w)
        box = BoundingBox(_r(s), _r(west), _r(s + h), _r(west + w))
        if all(_gap(box, p) > 0.05 for p in placed):
            return box
    raise RuntimeError("could not place town")


def _gap(a: BoundingBox, b: BoundingBox) -> float:
    dy = max(b.south - a.north, a.south - b.north, 0.0)
    dx = max(b.west - a.east, a.west - b.east, 0.0)
    return max(dx, dy)


def _words(rng: random.Random, n: int) -> list[str]:
    return [rng.choice(FILLER) for _ in range(n)]


def _text(rng: random.Random, n: int, mentions: list[str], where: str = "start") -> str:
    words = _words(rng, n)
    for i, m in enumerate(mentions):
        if where == "start":
            pos = min(2 + 2 * i, len(words))
        else:
            pos = len(words) // 2 + i
        words.insert(pos, m)
    return " ".join(words)


def _article(rng, aid, publisher, pub_slug, when, title_mentions, body_mentions=(), buried=None):
    title = _text(rng, 6, list(title_mentions))
    title = title[:1].upper() + title[1:]
    snippet = " ".join(_words(rng, 12))
    if buried is not None:
        body = _text(rng, 50, [buried], where="middle")
    else:
        body = _text(rng, rng.randint(30, 45), list(body_mentions))
    return Article(
        id=aid, title=title, snippet=snippet, body=body,
        url=f"https://{pub_slug}.example.com/{aid}",
        publisher=publisher, published_at=when,
    )


def _kinds(rng: random.Random, table) -> list[str]:
    out = [k for k, n in table for _ in range(n)]
    rng.shuffle(out)
    return out


@dataclass
class SynthData:
    world: World
    articles: list[Article]
    truth: dict[str, dict]
    publishers: dict[str, dict]
    users: list[dict]
    cities: list[PopularCity]
    dma: DmaTable


def generate(
    seed: int,
    n_local_publishers: int = 20,
    n_wire_publishers: int = 4,
    local_rounds: int = 1,
    wire_rounds: int = 12,
    n_users: int = 400,
) -> SynthData:
    rng = random.Random(seed)
    world = build_world(rng)
    counties = world.counties
    homes = rng.sample(counties, n_local_publishers)

    articles: list[Article] = []
    truth: dict[str, dict] = {}
    publishers: dict[str, dict] = {}
    window = timedelta(days=29)

    def when() -> datetime:
        return END_TIME - timedelta(seconds=rng.randint(0, int(window.total_seconds())))

    def add(article: Article, locs: list[str], kind: str) -> None:
        articles.append(article)
        truth[article.id] = {"article_id": article.id, "locations": sorted(locs), "kind": kind}

    for pi, home in enumerate(homes):
        pub = f"pub-{pi:02d}"
        slug = home.towns[0].name.lower()
        others = [c for c in counties if c.state_idx != home.state_idx]
        neighbours = [
            c for c in counties
            if c.state_idx == home.state_idx and abs(c.row - home.row) + abs(c.col - home.col) == 1
        ]
        remote_ids = []
        n = 0
        for kind in _kinds(rng, ARTICLE_KINDS_LOCAL) * local_rounds:
            n += 1
            aid = f"{pub}-{n:03d}"
            t = rng.choice(home.towns)
            if kind == "home":
                add(_article(rng, aid, pub, slug, when(), [t.name], [t.name]), [t.loc_id], kind)
            elif kind == "alias":
                alias = next(a for a in t.aliases if a != t.name)
                add(_article(rng, aid, pub, slug, when(), [alias]), [t.loc_id], kind)
            elif kind == "implicit":
                add(_article(rng, aid, pub, slug, when(), []), [home.record.loc_id], kind)
            elif kind == "county":
                add(_article(rng, aid, pub, slug, when(), [home.record.name]), [home.record.loc_id], kind)
            elif kind == "hamlet":
                h = rng.choice(home.hamlets)
                add(_article(rng, aid, pub, slug, when(), [h.name]), [h.loc_id], kind)
            elif kind == "multi":
                t2 = rng.choice([x for x in home.towns if x is not t])
                add(_article(rng, aid, pub, slug, when(), [t.name, t2.name]), [t.loc_id, t2.loc_id], kind)
            elif kind == "neighbor":
                c = rng.choice(neighbours)
                t2 = rng.choice(c.towns)
                add(_article(rng, aid, pub, slug, when(), [t2.name]), [t2.loc_id], kind)
            elif kind == "remote":
                used = {world.county_of(r).record.loc_id for r in remote_ids}
                c = rng.choice([x for x in others if x.record.loc_id not in used])
                t2 = rng.choice(c.towns)
                remote_ids.append(t2.loc_id)
                add(_article(rng, aid, pub, slug, when(), [t2.name]), [t2.loc_id], kind)
        publishers[pub] = {
            "publisher": pub,
            "home_county": home.record.loc_id,
            "remote_locations": sorted(remote_ids),
            "dma": world.dma_of(home.record.loc_id),
            "strongly_local": True,
        }

    for wi in range(n_wire_publishers):
        pub = f"wire-{wi}"
        publishers[pub] = {"publisher": pub, "strongly_local": False}
        n = 0
        for kind in _kinds(rng, ARTICLE_KINDS_WIRE) * wire_rounds:
            n += 1
            aid = f"{pub}-{n:03d}"
            c = rng.choice(counties)
            t = rng.choice(c.towns)
            h = rng.choice(c.hamlets)
            if kind == "wire_city":
                add(_article(rng, aid, pub, "wire", when(), [t.name]), [t.loc_id], kind)
            elif kind == "wire_hamlet":
                add(_article(rng, aid, pub, "wire", when(), [h.name]), [h.loc_id], kind)
            elif kind == "wire_hamlet_alias":
                alias = next(a for a in h.aliases if a != h.name)
                add(_article(rng, aid, pub, "wire", when(), [alias]), [h.loc_id], kind)
            elif kind == "wire_buried":
                add(_article(rng, aid, pub, "wire", when(), [], buried=t.name), [t.loc_id], kind)
            else:
                add(_article(rng, aid, pub, "wire", when(), []), [], kind)

    dma_cells = {
        d: sorted(set().union(*(geohash.cover(world.county_of(cid).record.bbox, 4) for cid in members)))
        for d, members in world.dmas.items()
    }
    dma = DmaTable(
        dma_cells,
        {p: info["dma"] for p, info in publishers.items() if info.get("strongly_local")},
    )

    # two popular cities per state: the first town of two fixed counties
    cities = []
    for si in range(len(world.states)):
        in_state = [c for c in counties if c.state_idx == si]
        for c in (in_state[0], in_state[-1]):
            t = c.towns[0]
            cities.append(PopularCity(t.name, t.point))

    users = []
    for ui in range(n_users):
        c = rng.choice(counties)
        if rng.random() < 0.8:
            t = rng.choice(c.towns)
            p = LatLon(_r(rng.uniform(t.bbox.south, t.bbox.north)), _r(rng.uniform(t.bbox.west, t.bbox.east)))
            chain = list(t.geochain)
        else:
            b = c.record.bbox
            p = LatLon(_r(rng.uniform(b.south, b.north)), _r(rng.uniform(b.west, b.east)))
            chain = list(c.record.geochain)
        users.append({"request_id": f"u{ui:04d}", "lat": p.lat, "lon": p.lon, "geochain": chain})

    articles.sort(key=lambda a: a.id)
    return SynthData(world, articles, truth, publishers, users, cities, dma)


def write(data: SynthData, out_dir: str | Path) -> dict[str, str]:
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    paths = {
        "gazetteer": "location_table.tsv",
        "geocoder_gazetteer": "geocoder_gazetteer.tsv",
        "corpus": "corpus.jsonl",
        "strongly_local": "strongly_local.txt",
        "dma": "dma.json",
        "cities": "cities.tsv",
        "users": "users.jsonl",
        "truth": "truth.jsonl",
        "truth_publishers": "truth_publishers.json",
    }
    write_gazetteer(out / paths["gazetteer"], data.world.lt_records)
    write_gazetteer(out / paths["geocoder_gazetteer"], data.world.geocoder_records)
    write_jsonl(out / paths["corpus"], (a.to_dict() for a in data.articles))
    (out / paths["strongly_local"]).write_text(
        "".join(f"{p}\n" for p, info in sorted(data.publishers.items()) if info.get("strongly_local"))
    )
    data.dma.save(out / paths["dma"])
    write_cities(out / paths["cities"], data.cities)
    write_jsonl(out / paths["users"], data.users)
    write_jsonl(out / paths["truth"], (data.truth[k] for k in sorted(data.truth)))
    with open(out / paths["truth_publishers"], "w", encoding="utf-8") as fh:
        json.dump(data.publishers, fh, indent=1, sort_keys=True)
        fh.write("\n")
    config = {k: v for k, v in paths.items() if k in (
        "gazetteer", "geocoder_gazetteer", "corpus", "strongly_local", "dma", "cities",
    )}
    config["affinity"] = "affinity.jsonl"
    with open(out / "config.json", "w", encoding="utf-8") as fh:
        json.dump(config, fh, indent=1, sort_keys=True)
        fh.write("\n")
    paths["config"] = "config.json"
    return {k: str(out / v) for k, v in paths.items()}


def kind_histogram(data: SynthData) -> dict[str, int]:
    return dict(sorted(Counter(t["kind"] for t in data.truth.values()).items()))


def describe(data: SynthData) -> str:
    lines = [
        f"states={len(data.world.states)} counties={len(data.world.counties)} "
        f"articles={len(data.articles)} users={len(data.users)} "
        f"publishers={len(data.publishers)} dmas={len(data.dma.dmas)}",
        "kinds: " + ", ".join(f"{k}={v}" for k, v in kind_histogram(data).items()),
        f"end={format_timestamp(END_TIME)}",
    ]
    return "\n".join(lines)
