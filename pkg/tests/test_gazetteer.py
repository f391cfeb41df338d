import pytest
from hypothesis import given, strategies as st

from localgeo import geohash
from localgeo.errors import CoverageTooLargeError, ValidationError
from localgeo.gazetteer import (
    CITY,
    COUNTY,
    Gazetteer,
    check_alias,
    load_gazetteer,
    location_geohashes,
    lt_lookup,
    make_record,
    normalize,
    read_records,
    write_gazetteer,
)

from conftest import DATA, KING_COUNTY_CELLS


def ids(records):
    return {r.loc_id for r in records}


class TestLookup:
    def test_sammamish_headline(self, gaz):
        found = lt_lookup("Person shot during home invasion in Sammamish", gaz)
        assert ids(found) == {"us-wa-king-sammamish"}

    def test_no_alias(self, gaz):
        assert lt_lookup("Quarterly earnings beat expectations", gaz) == set()

    def test_two_states_via_alias(self, gaz):
        text = "No. 4 Arizona strives for consistency against offensively challenged Cal"
        assert ids(lt_lookup(text, gaz)) == {"us-az", "us-ca"}

    def test_word_boundaries(self, gaz):
        # "Calendar" must not trigger the "Cal" alias
        assert lt_lookup("Calendar of events in Tacomaville", gaz) == set()

    def test_longest_match_wins(self, gaz):
        matches = gaz.matches("Flooding in Washington State closes roads")
        assert [m.alias for m in matches] == ["washington state"]
        assert matches[0].loc_ids == {"us-wa"}

    def test_alias_with_punctuation(self, gaz):
        assert ids(lt_lookup("Fire crews from King Co. responded", gaz)) == {"us-wa-king"}

    def test_shared_alias_returns_all(self):
        box = geohash.decode_bbox("c23n")
        a = make_record("a", "Springfield", CITY, ["Springfield", "X County", "X", "US"], box)
        b = make_record("b", "Springfield", CITY, ["Springfield", "Y County", "Y", "US"], box)
        assert ids(Gazetteer([a, b]).lt_lookup("Springfield council meets")) == {"a", "b"}

    def test_match_offsets(self, gaz):
        text = "Rain in Portland and Seattle"
        for m in gaz.matches(text):
            assert normalize(text[m.start:m.end]) == m.alias

    @given(st.sampled_from([
        "Seattle and Bellevue traffic", "PDX airport delays", "KING COUNTY council", "no place here",
    ]), st.sampled_from([str.upper, str.lower, str.title, str.swapcase]))
    def test_case_invariance(self, gaz, text, fold):
        assert lt_lookup(fold(text), gaz) == lt_lookup(text, gaz)


class TestGeohashes:
    def test_exact_cell(self):
        rec = make_record("x", "Cellton", CITY, ["Cellton", "C", "S", "US"], geohash.decode_bbox("c23n"))
        assert location_geohashes(rec) == {"c23n"}

    def test_length_two_box(self):
        rec = make_record("x", "Big", COUNTY, ["Big", "S", "US"], geohash.decode_bbox("c2"))
        cells = location_geohashes(rec)
        assert len(cells) == 1024 and all(c.startswith("c2") for c in cells)

    def test_king_county_pinned(self, gaz):
        assert location_geohashes(gaz.get("us-wa-king")) == KING_COUNTY_CELLS

    def test_country_at_length_five_too_large(self, gaz):
        with pytest.raises(CoverageTooLargeError):
            location_geohashes(gaz.get("us"), 5)

    def test_cells_cover_bbox_corners(self, gaz):
        for rec in gaz.records.values():
            if rec.level == "country":
                continue
            cells = location_geohashes(rec)
            b = rec.bbox
            for lat in (b.south, b.north):
                for lon in (b.west, b.east):
                    assert any(geohash.decode_bbox(c).contains(geohash.LatLon(lat, lon)) for c in cells)


class TestRecords:
    def test_name_is_alias(self, gaz):
        for rec in gaz.records.values():
            assert rec.name in rec.aliases

    def test_alias_index_exactly_covers_aliases(self, gaz):
        expected = {normalize(a) for r in gaz.records.values() for a in r.aliases}
        assert set(gaz.alias_index) == expected

    def test_geochain_length_checked(self):
        with pytest.raises(ValidationError):
            make_record("x", "Town", CITY, ["Town", "US"], geohash.decode_bbox("c23n"))

    def test_point_outside_bbox(self):
        with pytest.raises(ValidationError):
            make_record("x", "Town", CITY, ["Town", "C", "S", "US"], geohash.decode_bbox("c23n"),
                        point=geohash.LatLon(0, 0))

    @pytest.mark.parametrize("alias", ["of", "The", "NY", "  ", "--"])
    def test_generic_aliases_rejected(self, alias):
        with pytest.raises(ValidationError):
            check_alias(alias)

    def test_whitelist(self):
        check_alias("NY", frozenset({"ny"}))

    def test_find_admin(self, gaz):
        rec = gaz.find_admin(COUNTY, ("King County", "Washington", "United States"))
        assert rec.loc_id == "us-wa-king"
        assert gaz.find_admin(COUNTY, ("Maricopa County", "Arizona", "United States")) is None

    def test_chain_at(self, gaz):
        sam = gaz.get("us-wa-king-sammamish")
        assert sam.chain_at(COUNTY) == ("King County", "Washington", "United States")
        assert gaz.get("us-wa").chain_at(COUNTY) is None


class TestFileIO:
    def test_round_trip(self, gaz, tmp_path):
        p = tmp_path / "g.tsv"
        write_gazetteer(p, gaz.records.values())
        again = load_gazetteer(p)
        assert again.records == gaz.records

    def test_bad_rows_reported(self, tmp_path):
        src = (DATA / "gazetteer.tsv").read_text().splitlines()
        src.append("bad\tOf\t\tcity\tOf>X>Y>Z\t0\t0\t1\t1\t0.5\t0.5")
        p = tmp_path / "g.tsv"
        p.write_text("\n".join(src) + "\n")
        records, errors = read_records(p)
        assert len(records) == len(src) - 2
        assert errors and errors[0][0] == len(src)
        with pytest.raises(ValidationError):
            load_gazetteer(p)

    def test_missing_column(self, tmp_path):
        p = tmp_path / "g.tsv"
        p.write_text("loc_id\tname\n")
        with pytest.raises(ValidationError):
            read_records(p)
