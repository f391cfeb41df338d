import random
from datetime import timedelta

import pytest
from hypothesis import given, strategies as st

from localgeo.affinity import (
    AffinityEntry,
    AffinityParams,
    build_affinity,
    build_affinity_map,
    gap_ratio_filter,
    select_window,
)
from localgeo.errors import BuildError, ValidationError
from localgeo.geocoder import GeocoderTimeout, OfflineGeocoder

from conftest import KING_COUNTY_CELLS, T0, make_article
from oracles import gap_filter_bruteforce

KING_PLACES = ["Seattle", "Bellevue", "Sammamish", "King County"]
REMOTE = ["Phoenix", "Berkeley", "Portland", "Multnomah County"]


def komo_articles(n_local=36, remote=REMOTE, publisher="komo"):
    arts = []
    for i in range(n_local):
        place = KING_PLACES[i % len(KING_PLACES)]
        arts.append(make_article(f"k{i:02d}", title=f"Council vote in {place}", body="Residents spoke for hours.",
                                 publisher=publisher, when=T0 - timedelta(hours=i)))
    for j, place in enumerate(remote):
        arts.append(make_article(f"r{j}", title=f"Wire: storm hits {place}", publisher=publisher,
                                 when=T0 - timedelta(hours=50 + j)))
    return arts


counts_st = st.dictionaries(st.text("abcdef", min_size=1, max_size=3), st.integers(1, 200), min_size=1, max_size=12)


class TestGapRatio:
    def test_drop_at_tail(self):
        counts = {"c23": 120, "c22": 80, "c28": 60, "9q5": 4}
        assert gap_ratio_filter(counts, 0.2) == {"c23", "c22", "c28"}

    def test_single(self):
        assert gap_ratio_filter({"k": 10}, 0.2) == {"k"}

    def test_uniform(self):
        assert gap_ratio_filter({"a": 5, "b": 5, "c": 5}, 0.99) == {"a", "b", "c"}

    def test_cut_at_first_gap_only(self):
        # the second sharp drop is never reached
        assert gap_ratio_filter({"a": 100, "b": 10, "c": 9, "d": 1}, 0.2) == {"a"}

    def test_tie_breaks_by_key(self):
        assert gap_ratio_filter({"b": 10, "a": 10, "c": 1}, 0.2) == {"a", "b"}

    @pytest.mark.parametrize("counts,tau", [({}, 0.2), ({"a": 1}, 0.0), ({"a": 1}, 1.0), ({"a": 0}, 0.2)])
    def test_invalid(self, counts, tau):
        with pytest.raises(ValidationError):
            gap_ratio_filter(counts, tau)

    @given(counts_st, st.floats(0.01, 0.99))
    def test_matches_oracle(self, counts, tau):
        assert gap_ratio_filter(counts, tau) == gap_filter_bruteforce(counts, tau)

    @given(counts_st, st.floats(0.01, 0.99))
    def test_keeps_a_head(self, counts, tau):
        kept = gap_ratio_filter(counts, tau)
        floor = min(counts[k] for k in kept)
        assert all(counts[k] <= floor for k in counts if k not in kept)

    @given(counts_st, st.floats(0.01, 0.98), st.floats(0.0, 1.0))
    def test_monotone_in_tau(self, counts, lo, frac):
        hi = lo + (0.99 - lo) * frac
        assert gap_ratio_filter(counts, hi) <= gap_ratio_filter(counts, lo)


class TestBuildAffinity:
    def test_king_county_recovered(self, gaz):
        entry = build_affinity("komo", komo_articles(), gaz, OfflineGeocoder(gaz))
        assert entry.locations == {"us-wa-king"}
        assert entry.geohashes == KING_COUNTY_CELLS
        assert entry.labels["us-wa-king"] == "King County, Washington, United States"
        assert entry.support["us-wa-king"] == 36

    def test_lt_only(self, gaz):
        entry = build_affinity("komo", komo_articles(), gaz, None)
        assert entry.locations == {"us-wa-king"}

    def test_too_few_articles(self, gaz):
        arts = komo_articles(n_local=5, remote=[])
        assert build_affinity("komo", arts, gaz, OfflineGeocoder(gaz), AffinityParams(min_articles=20)) is None

    def test_no_locations(self, gaz):
        arts = [make_article(f"a{i}", title="Markets rally", publisher="p") for i in range(25)]
        assert build_affinity("p", arts, gaz, None) is None

    def test_foreign_article_rejected(self, gaz):
        arts = komo_articles()
        arts.append(make_article("x", title="Seattle", publisher="other"))
        with pytest.raises(ValidationError):
            build_affinity("komo", arts, gaz, None)

    def test_failures_over_half_raise(self, gaz):
        class Broken:
            def geocode(self, q):
                raise GeocoderTimeout("down")

        with pytest.raises(BuildError):
            build_affinity("komo", komo_articles(), gaz, Broken())

    def test_some_failures_tolerated(self, gaz):
        class Flaky:
            def __init__(self):
                self.inner = OfflineGeocoder(gaz)
                self.n = 0

            def geocode(self, q):
                self.n += 1
                if self.n % 5 == 0:
                    raise GeocoderTimeout("blip")
                return self.inner.geocode(q)

        entry = build_affinity("komo", komo_articles(), gaz, Flaky())
        assert entry.locations == {"us-wa-king"}

    def test_deterministic_under_shuffle(self, gaz):
        arts = komo_articles()
        a = build_affinity("komo", arts, gaz, OfflineGeocoder(gaz))
        random.Random(3).shuffle(arts)
        b = build_affinity("komo", arts, gaz, OfflineGeocoder(gaz))
        assert a.to_dict() == b.to_dict()

    def test_geohashes_are_union_of_location_covers(self, gaz):
        from localgeo.gazetteer import location_geohashes

        entry = build_affinity("komo", komo_articles(), gaz, OfflineGeocoder(gaz))
        union = set().union(*(location_geohashes(gaz.get(l)) for l in entry.locations))
        assert entry.geohashes == union
        assert all(len(g) == 4 for g in entry.geohashes)

    def test_two_home_counties(self, gaz):
        # a metro outlet covering King and Pierce about equally keeps both
        arts = komo_articles(n_local=20, remote=["Phoenix"])
        arts += [make_article(f"p{i}", title="Tacoma port news", publisher="komo") for i in range(16)]
        entry = build_affinity("komo", arts, gaz, None)
        assert entry.locations == {"us-wa-king", "us-wa-pierce"}

    def test_round_trip(self, gaz):
        entry = build_affinity("komo", komo_articles(), gaz, None)
        assert AffinityEntry.from_dict(entry.to_dict()) == entry


class TestParams:
    @pytest.mark.parametrize("kw", [{"tau_geohash3": 0}, {"tau_admin": 1.0}, {"min_articles": 0},
                                    {"time_window": timedelta(0)}])
    def test_invalid(self, kw):
        with pytest.raises(ValidationError):
            AffinityParams(**kw)


class TestWindow:
    def test_half_open(self):
        arts = [make_article(f"a{i}", when=T0 - timedelta(days=i)) for i in range(5)]
        got = select_window(arts, T0, timedelta(days=2))
        assert [a.id for a in got] == ["a0", "a1"]

    def test_map_uses_window_and_skips_unknown(self, gaz):
        arts = komo_articles()
        old = [make_article(f"o{i}", title="Phoenix heat", publisher="komo", when=T0 - timedelta(days=90))
               for i in range(100)]
        out = build_affinity_map(arts + old, ["komo", "ghost"], gaz, None)
        assert set(out) == {"komo"}
        assert out["komo"].locations == {"us-wa-king"}
