import filecmp
import json

import pytest

from localgeo.app import synth
from localgeo.app.config import load_config
from localgeo.app.pipeline import Pipeline
from localgeo.app.replay import load_truth, replay_dir
from localgeo.corpus import build_geocode_query
from localgeo.gazetteer import Gazetteer, load_gazetteer


@pytest.fixture(scope="module")
def data():
    return synth.generate(5)


def test_byte_identical(tmp_path):
    a, b = tmp_path / "a", tmp_path / "b"
    synth.write(synth.generate(11), a)
    synth.write(synth.generate(11), b)
    names = sorted(p.name for p in a.iterdir())
    match, mismatch, errors = filecmp.cmpfiles(a, b, names, shallow=False)
    assert mismatch == [] and errors == [] and len(match) == len(names) >= 10


def test_seeds_differ(tmp_path):
    synth.write(synth.generate(1), tmp_path / "a")
    synth.write(synth.generate(2), tmp_path / "b")
    assert (tmp_path / "a/corpus.jsonl").read_bytes() != (tmp_path / "b/corpus.jsonl").read_bytes()


def test_implicit_articles_have_no_alias(data):
    full = Gazetteer(data.world.geocoder_records)
    implicit = [a for a in data.articles if data.truth[a.id]["kind"] in ("implicit", "wire_none")]
    assert implicit
    for a in implicit:
        assert full.matches(a.text) == []


def test_alias_articles_avoid_canonical_name(data):
    full = Gazetteer(data.world.geocoder_records)
    for a in data.articles:
        if data.truth[a.id]["kind"] == "alias":
            (m,) = full.matches(a.text)
            rec = full.get(next(iter(m.loc_ids)))
            assert m.alias != rec.name.lower()


def test_buried_place_is_trimmed_away(data):
    full = Gazetteer(data.world.geocoder_records)
    for a in data.articles:
        if data.truth[a.id]["kind"] == "wire_buried":
            assert full.matches(a.text)
            assert full.matches(build_geocode_query(a)) == []


def test_hamlets_unknown_to_location_table(data):
    lt = Gazetteer(data.world.lt_records)
    for c in data.world.counties:
        for h in c.hamlets:
            assert h.loc_id not in lt


def test_every_rule_fires(synth_dir):
    cfg = load_config(synth_dir / "config.json", env={})
    result = replay_dir(synth_dir, cfg)
    hist = result.stamp_run.histogram
    assert all(hist[r] > 0 for r in range(1, 7)), hist


def test_truth_and_publishers_written(synth_dir):
    truth = load_truth(synth_dir / "truth.jsonl")
    pubs = json.loads((synth_dir / "truth_publishers.json").read_text())
    local = [p for p, info in pubs.items() if info["strongly_local"]]
    assert len(local) == 20
    assert all(len(pubs[p]["remote_locations"]) == 3 for p in local)
    assert len(truth) == len((synth_dir / "corpus.jsonl").read_text().splitlines())


def test_describe(data):
    text = synth.describe(data)
    assert "articles=" in text and "implicit=" in text
