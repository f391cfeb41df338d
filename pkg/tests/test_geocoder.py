import threading
import time
from concurrent.futures import ThreadPoolExecutor

import pytest

from localgeo import geohash
from localgeo.errors import ValidationError
from localgeo.geocoder import (
    Confidence,
    GeocodeResult,
    GeocoderAuthError,
    GeocoderConfig,
    GeocoderError,
    GeocoderRateLimited,
    GeocoderResponseError,
    GeocoderTimeout,
    OfflineGeocoder,
    RateLimiter,
    RemoteGeocoder,
    bma_geohashes,
    http_transport,
    parse_response,
)
from localgeo.geohash import LatLon


def result(cell, conf, name="X"):
    box = geohash.decode_bbox(cell)
    return GeocodeResult(name, "City", conf, box.center, box)


def wire(name="Seattle", conf="High"):
    return {
        "name": name,
        "entityType": "City",
        "confidence": conf,
        "point": {"lat": 47.6, "lon": -122.3},
        "bbox": {"south": 47.5, "west": -122.4, "north": 47.7, "east": -122.2},
    }


class CountingUpstream:
    """Fake remote service that records when each call arrives."""

    def __init__(self, delay=0.0):
        self.calls = []
        self.delay = delay
        self._lock = threading.Lock()

    def __call__(self, query):
        with self._lock:
            self.calls.append((time.monotonic(), query))
        if self.delay:
            time.sleep(self.delay)
        return [wire(query)]

    def max_in_window(self, window=1.0):
        ts = sorted(t for t, _ in self.calls)
        best = 0
        for i, t in enumerate(ts):
            j = i
            while j < len(ts) and ts[j] - t < window:
                j += 1
            best = max(best, j - i)
        return best


class TestOffline:
    def test_sammamish_high(self, gaz):
        out = OfflineGeocoder(gaz).geocode("home invasion in Sammamish")
        assert len(out) == 1
        r = out[0]
        assert (r.matched_name, r.entity_type, r.confidence) == ("Sammamish", "City", Confidence.HIGH)
        assert r.bbox == gaz.get("us-wa-king-sammamish").bbox

    def test_nothing(self, gaz):
        assert OfflineGeocoder(gaz).geocode("markets rallied on Tuesday") == []

    def test_alias_is_medium(self, gaz):
        out = OfflineGeocoder(gaz).geocode("offensively challenged Cal")
        assert [(r.loc_id, r.confidence) for r in out] == [("us-ca", Confidence.MEDIUM)]

    def test_canonical_beats_alias(self, gaz):
        out = OfflineGeocoder(gaz).geocode("Portland, also called PDX")
        assert [(r.loc_id, r.confidence) for r in out] == [("us-or-multnomah-portland", Confidence.HIGH)]

    def test_results_subset_of_lt(self, gaz):
        q = "Seattle, Tacoma and King Co. leaders met in Washington State"
        got = {r.loc_id for r in OfflineGeocoder(gaz).geocode(q)}
        assert got == {r.loc_id for r in gaz.lt_lookup(q)}
        assert all(r.confidence is not Confidence.LOW for r in OfflineGeocoder(gaz).geocode(q))

    def test_empty_query(self, gaz):
        with pytest.raises(ValidationError):
            OfflineGeocoder(gaz).geocode("  ")


class TestBmaGeohashes:
    def test_empty(self):
        assert bma_geohashes([]) == {}

    def test_single_high(self):
        assert bma_geohashes([result("c23n", Confidence.HIGH)]) == {"c23n": Confidence.HIGH}

    def test_low_filtered(self):
        out = bma_geohashes([result("c23n", Confidence.HIGH), result("9q5c", Confidence.LOW)])
        assert out == {"c23n": Confidence.HIGH}

    def test_max_confidence_kept(self):
        out = bma_geohashes([result("c23n", Confidence.MEDIUM), result("c23n", Confidence.HIGH)])
        assert out == {"c23n": Confidence.HIGH}

    def test_confidence_order(self):
        assert Confidence.LOW < Confidence.MEDIUM < Confidence.HIGH
        assert Confidence.parse("medium") is Confidence.MEDIUM
        with pytest.raises(ValidationError):
            Confidence.parse("certain")


class TestParseResponse:
    def test_list_and_object(self):
        assert parse_response([wire()]) == parse_response({"results": [wire()]})

    def test_fields(self):
        (r,) = parse_response([wire(conf="Medium")])
        assert r.confidence is Confidence.MEDIUM
        assert r.point == LatLon(47.6, -122.3)

    @pytest.mark.parametrize("payload", [None, "x", {"results": "x"}, [{"name": "a"}], [dict(wire(), confidence="Sure")]])
    def test_malformed(self, payload):
        with pytest.raises(GeocoderResponseError):
            parse_response(payload)


class TestRateLimiter:
    def test_fake_clock_window(self):
        now = [0.0]
        slept = []

        def sleep(dt):
            slept.append(dt)
            now[0] += dt

        lim = RateLimiter(3, clock=lambda: now[0], sleep=sleep, guard=0.0)
        for _ in range(7):
            lim.acquire()
        # 3 in [0,1), 3 in [1,2), 1 at 2
        assert now[0] == pytest.approx(2.0)

    def test_fractional_rate(self):
        now = [0.0]
        lim = RateLimiter(0.5, clock=lambda: now[0], sleep=lambda dt: now.__setitem__(0, now[0] + dt), guard=0.0)
        lim.acquire()
        lim.acquire()
        assert now[0] == pytest.approx(2.0)

    def test_rejects_nonpositive(self):
        with pytest.raises(ValidationError):
            RateLimiter(0)


class TestRemote:
    def test_cache_hit_skips_upstream(self):
        up = CountingUpstream()
        g = RemoteGeocoder(GeocoderConfig(qps_limit=100), transport=up)
        a = g.geocode("Seattle")
        b = g.geocode("Seattle")
        assert a == b
        assert len(up.calls) == 1 == g.upstream_calls

    def test_cache_disabled(self):
        up = CountingUpstream()
        g = RemoteGeocoder(GeocoderConfig(qps_limit=100, cache_capacity=0), transport=up)
        g.geocode("Seattle")
        g.geocode("Seattle")
        assert len(up.calls) == 2

    def test_lru_eviction(self):
        up = CountingUpstream()
        g = RemoteGeocoder(GeocoderConfig(qps_limit=100, cache_capacity=2), transport=up)
        for q in ("a1", "b1", "a1", "c1", "b1"):
            g.geocode(q)
        # b1 was evicted by c1 because a1 was used more recently
        assert [q for _, q in up.calls] == ["a1", "b1", "c1", "b1"]

    def test_concurrent_identical_queries_dedupe(self):
        up = CountingUpstream(delay=0.1)
        g = RemoteGeocoder(GeocoderConfig(qps_limit=100), transport=up)
        with ThreadPoolExecutor(8) as pool:
            outs = list(pool.map(lambda _: g.geocode("Tacoma"), range(8)))
        assert len(up.calls) == 1
        assert all(o == outs[0] for o in outs)

    def test_qps_window_under_concurrency(self):
        up = CountingUpstream()
        g = RemoteGeocoder(GeocoderConfig(qps_limit=8), transport=up)
        with ThreadPoolExecutor(12) as pool:
            list(pool.map(lambda i: g.geocode(f"q{i}"), range(20)))
        assert len(up.calls) == 20
        assert up.max_in_window(1.0) <= 8

    def test_errors_propagate_and_are_not_cached(self):
        calls = []

        def flaky(q):
            calls.append(q)
            if len(calls) == 1:
                raise GeocoderTimeout("slow")
            return [wire()]

        g = RemoteGeocoder(GeocoderConfig(qps_limit=100), transport=flaky)
        with pytest.raises(GeocoderTimeout):
            g.geocode("Seattle")
        assert len(g.geocode("Seattle")) == 1
        assert len(calls) == 2

    def test_error_kinds_distinct(self):
        kinds = [GeocoderTimeout, GeocoderRateLimited, GeocoderAuthError, GeocoderResponseError]
        assert all(issubclass(k, GeocoderError) for k in kinds)
        assert len(set(kinds)) == 4

    def test_config_validation(self):
        with pytest.raises(ValidationError):
            GeocoderConfig(qps_limit=0)
        with pytest.raises(ValidationError):
            GeocoderConfig(timeout=-1)


class FakeResponse:
    def __init__(self, status, body=None, bad_json=False):
        self.status_code = status
        self._body = body
        self._bad = bad_json

    def json(self):
        if self._bad:
            raise ValueError("no json")
        return self._body


class TestHttpTransport:
    @pytest.mark.parametrize("status,exc", [
        (429, GeocoderRateLimited),
        (401, GeocoderAuthError),
        (403, GeocoderAuthError),
        (500, GeocoderError),
    ])
    def test_status_mapping(self, monkeypatch, status, exc):
        import requests

        monkeypatch.setattr(requests, "get", lambda *a, **k: FakeResponse(status))
        call = http_transport(GeocoderConfig(endpoint="http://geo.invalid"))
        with pytest.raises(exc):
            call("Seattle")

    def test_timeout(self, monkeypatch):
        import requests

        def boom(*a, **k):
            raise requests.Timeout("read timed out")

        monkeypatch.setattr(requests, "get", boom)
        with pytest.raises(GeocoderTimeout):
            http_transport(GeocoderConfig(endpoint="http://geo.invalid"))("Seattle")

    def test_bad_json(self, monkeypatch):
        import requests

        monkeypatch.setattr(requests, "get", lambda *a, **k: FakeResponse(200, bad_json=True))
        with pytest.raises(GeocoderResponseError):
            http_transport(GeocoderConfig(endpoint="http://geo.invalid"))("Seattle")

    def test_ok_passes_query_and_key(self, monkeypatch):
        import requests

        seen = {}

        def get(url, params, timeout):
            seen.update(url=url, params=params, timeout=timeout)
            return FakeResponse(200, [wire()])

        monkeypatch.setattr(requests, "get", get)
        cfg = GeocoderConfig(endpoint="http://geo.invalid", api_key="k", timeout=2)
        assert RemoteGeocoder(cfg).geocode("Seattle")[0].matched_name == "Seattle"
        assert seen == {"url": "http://geo.invalid", "params": {"q": "Seattle", "key": "k"}, "timeout": 2}
