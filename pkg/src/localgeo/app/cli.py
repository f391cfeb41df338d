"""Command line entry point: ``localgeo <command> --config FILE``."""

from __future__ import annotations

import argparse
import json
import logging
import sys
from collections import Counter
from pathlib import Path

from localgeo import geohash
from localgeo.affinity import build_affinity_map
from localgeo.app import replay as replay_mod
from localgeo.app import synth
from localgeo.app.config import AppConfig, load_config
from localgeo.app.pipeline import (
    Pipeline,
    load_affinity,
    load_stamps,
    read_publisher_list,
    write_affinity,
    write_stamps,
)
from localgeo.corpus import load_corpus, load_jsonl
from localgeo.errors import CorpusFormatError, ValidationError
from localgeo.gazetteer import normalize, read_records
from localgeo.metrics import DmaTable, Impression, evaluate
from localgeo.serving import load_cities

log = logging.getLogger("localgeo")


def _config(args) -> AppConfig:
    cfg = load_config(args.config)
    print("# configuration", file=sys.stderr)
    for line in cfg.describe().splitlines():
        print(f"#   {line}", file=sys.stderr)
    return cfg


def _require(value: str, what: str) -> str:
    if not value:
        raise ValidationError(f"no {what} given (flag or config)")
    if not Path(value).exists():
        raise ValidationError(f"{what} not found: {value}")
    return value


def cmd_stamp(args) -> int:
    cfg = _config(args)
    corpus_path = _require(args.corpus or cfg.corpus, "corpus")
    pipeline = Pipeline.from_config(cfg)
    articles, report = load_corpus(corpus_path)
    run = pipeline.stamp_all(articles)
    n = write_stamps(args.out, run.results)
    summary = run.summary()
    summary["skipped_lines"] = report.skipped
    summary["written"] = n
    print(json.dumps(summary, sort_keys=True))
    return 0


def cmd_affinity(args) -> int:
    cfg = _config(args)
    corpus_path = _require(args.corpus or cfg.corpus, "corpus")
    pubs_path = _require(args.publishers or cfg.strongly_local, "strongly-local publisher list")
    pipeline = Pipeline.from_config(cfg, affinity={})
    articles, _ = load_corpus(corpus_path)
    entries = build_affinity_map(
        articles, read_publisher_list(pubs_path), pipeline.gaz, pipeline.geocoder, cfg.affinity_params()
    )
    out = args.out or cfg.affinity
    if not out:
        raise ValidationError("no affinity output path (--out or config affinity)")
    write_affinity(out, entries)
    print(json.dumps({"publishers": len(entries), "out": out}))
    return 0


def cmd_serve(args) -> int:
    import uvicorn

    from localgeo.app.service import FeedService, create_app

    cfg = _config(args)
    pipeline = Pipeline.from_config(cfg)
    articles, _ = load_corpus(_require(args.corpus or cfg.corpus, "corpus"))
    stamps = load_stamps(args.stamps) if args.stamps else None
    service = FeedService(
        pipeline, load_cities(_require(cfg.cities, "cities")), articles, stamps,
        min_k=cfg.min_k, default_count=cfg.feed_count,
    )
    uvicorn.run(create_app(service), host=args.host, port=args.port)
    return 0


def cmd_eval(args) -> int:
    cfg = _config(args)
    stamps = {s.article_id: s for s in load_stamps(_require(args.stamps, "stamps"))}
    articles, _ = load_corpus(_require(args.corpus or cfg.corpus, "corpus"))
    publisher = {a.id: a.publisher for a in articles}
    dma = DmaTable.load(_require(args.dma or cfg.dma, "DMA table"))
    gaz = Pipeline.from_config(cfg, affinity={}).gaz

    def treatment(d):
        s = stamps.get(d.get("article_id"))
        if s is None:
            raise ValidationError(f"no stamp for article {d.get('article_id')}")
        return Impression.from_dict(d, s.geohashes, s.locations)

    def baseline(d):
        aid = d.get("article_id")
        if aid not in publisher:
            raise ValidationError(f"unknown article {aid}")
        return Impression.from_dict(d, dma.stamp_for(publisher[aid]))

    imps_path = _require(args.impressions, "impressions")
    t_imps, t_rep = load_jsonl(imps_path, treatment)
    b_imps, b_rep = load_jsonl(args.baseline_impressions or imps_path, baseline)
    try:
        report = evaluate(t_imps, b_imps, gaz)
    except ValidationError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2
    print(report.table())
    out = report.to_dict()
    out["skipped_lines"] = {"treatment": t_rep.skipped, "baseline": b_rep.skipped}
    print(json.dumps(out, sort_keys=True))
    return 0


def cmd_synth(args) -> int:
    data = synth.generate(args.seed)
    paths = synth.write(data, args.out)
    print(synth.describe(data))
    print(json.dumps(paths, sort_keys=True))
    return 0


def cmd_replay(args) -> int:
    cfg = load_config(args.config or Path(args.dir) / "config.json")
    result = replay_mod.replay_dir(args.dir, cfg)
    print(result.report.table())
    print(json.dumps(result.to_dict(), sort_keys=True))
    if args.out:
        out = Path(args.out)
        out.mkdir(parents=True, exist_ok=True)
        replay_mod.write_impressions(out / "treatment_impressions.jsonl", result.treatment_impressions)
        replay_mod.write_impressions(out / "baseline_impressions.jsonl", result.baseline_impressions)
        write_stamps(out / "stamps.jsonl", result.stamp_run.results)
    return 0


def cmd_gazetteer_validate(args) -> int:
    cfg = load_config(args.config) if args.config else AppConfig()
    path = _require(args.path or cfg.gazetteer, "gazetteer")
    records, errors = read_records(path, cfg.alias_whitelist)
    problems = [f"line {ln}: {msg}" for ln, msg in errors]
    ids = Counter(r.loc_id for r in records)
    problems += [f"duplicate loc_id {i}" for i, n in ids.items() if n > 1]
    alias_owners = Counter(normalize(a) for r in records for a in r.aliases)
    shared = sorted(a for a, n in alias_owners.items() if n > 1)
    oversized = []
    for r in records:
        n = geohash.cover_count(r.bbox, cfg.geohash_len)
        if n > cfg.max_cover_cells:
            oversized.append(f"{r.loc_id} ({n} cells)")
    print(json.dumps({
        "records": len(records),
        "errors": problems,
        "shared_aliases": shared,
        "oversized_at_stamp_length": oversized,
    }, indent=1))
    return 1 if problems else 0


def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="localgeo", description=__doc__)
    p.add_argument("-v", "--verbose", action="store_true")
    sub = p.add_subparsers(dest="command", required=True)

    def add(name, fn, help):
        sp = sub.add_parser(name, help=help)
        sp.add_argument("--config", help="JSON config file")
        sp.set_defaults(func=fn)
        return sp

    sp = add("stamp", cmd_stamp, "stamp every article of a corpus")
    sp.add_argument("--corpus")
    sp.add_argument("--out", required=True)

    sp = add("affinity", cmd_affinity, "mine publisher-to-location affinity")
    sp.add_argument("--corpus")
    sp.add_argument("--publishers", help="file listing strongly local publishers")
    sp.add_argument("--out")

    sp = add("serve", cmd_serve, "run the HTTP feed service")
    sp.add_argument("--corpus")
    sp.add_argument("--stamps", help="precomputed stamps; stamped at startup if omitted")
    sp.add_argument("--host", default="127.0.0.1")
    sp.add_argument("--port", type=int, default=8080)

    sp = add("eval", cmd_eval, "compare ensemble stamps with the DMA baseline")
    sp.add_argument("--stamps")
    sp.add_argument("--impressions")
    sp.add_argument("--baseline-impressions")
    sp.add_argument("--corpus")
    sp.add_argument("--dma")

    sp = add("synth", cmd_synth, "generate a synthetic world")
    sp.add_argument("--seed", type=int, required=True)
    sp.add_argument("--out", required=True)

    sp = add("replay", cmd_replay, "two-arm offline replay on a synth directory")
    sp.add_argument("dir")
    sp.add_argument("--out", help="directory for impressions and stamps")

    sp = add("gazetteer-validate", cmd_gazetteer_validate, "check a gazetteer file")
    sp.add_argument("path", nargs="?")
    return p


def main(argv: list[str] | None = None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(
        level=logging.INFO if args.verbose else logging.ERROR,
        format="%(levelname)s %(name)s: %(message)s",
    )
    try:
        return args.func(args)
    except (ValidationError, CorpusFormatError, OSError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2


if __name__ == "__main__":
    sys.exit(main())
