import pytest

from preapp.detectors import SecretFinding
from preapp.errors import ConfigError
from preapp.prober import (
    ProbeSession,
    ProbeStatus,
    Sku,
    SkuCatalog,
    estimate_exposure,
    load_sku_catalog,
    probe_findings,
    probe_firebase,
    probe_gmaps_key,
)

# Costs per 1000 requests as shipped in the default catalog.
EXPECTED_COSTS = {
    "Places Photo API": 7.0,
    "Nearby Search-Places API": 32.0,
    "Text Search-Places API": 32.0,
    "Find Place From Text API": 17.0,
    "Autocomplete API": 2.83,
    "Place Details API": 17.0,
    "Staticmap API": 2.0,
    "Geocode API": 5.0,
    "Geolocation API": 5.0,
    "Timezone API": 5.0,
    "Embed (Basic) API": 0.0,
    "Elevation API": 5.0,
    "Streetview API": 7.0,
    "Embed (Advanced) API": 0.0,
    "Directions API": 5.0,
    "Distance Matrix API": 5.0,
    "Nearest Roads API": 10.0,
    "Route to Traveled API": 10.0,
}


def session(transport):
    return ProbeSession(transport, sleep=lambda _s: None)


class TestSkuCatalog:
    def test_default_catalog_has_18_skus_with_expected_costs(self):
        catalog = load_sku_catalog()
        assert len(catalog.skus) == 18
        assert {s.name: s.cost_per_1000 for s in catalog.skus} == EXPECTED_COSTS

    def test_duplicate_sku_rejected(self):
        sku = Sku("X", "GET", "https://x/{key}", 1.0)
        with pytest.raises(ConfigError):
            SkuCatalog(skus=[sku, sku])


class TestProbeFirebase:
    URL = "https://mydb.firebaseio.com"

    def test_locked(self, mock_transport):
        t = mock_transport(lambda m, u, b: (401, b'{"error":"denied"}'))
        verdict = probe_firebase(self.URL, session(t))
        assert verdict.status is ProbeStatus.LOCKED
        assert t.methods() == ["GET"]
        assert verdict.evidence.status_code == 401

    def test_readable_only(self, mock_transport):
        t = mock_transport(lambda m, u, b: (200, b"{}") if m == "GET" else (401, b"no"))
        verdict = probe_firebase(self.URL, session(t))
        assert verdict.status is ProbeStatus.WORLD_READABLE
        assert t.methods() == ["GET", "PUT"]

    def test_readable_and_writable_deletes_sentinel(self, mock_transport):
        t = mock_transport(lambda m, u, b: (200, b"{}"))
        verdict = probe_firebase(self.URL, session(t))
        assert verdict.status is ProbeStatus.WORLD_WRITABLE
        assert t.methods() == ["GET", "PUT", "DELETE"]
        put_url = t.calls[1][1]
        delete_url = t.calls[2][1]
        assert put_url == delete_url
        assert put_url.startswith(self.URL + "/preapp_probe_")
        assert put_url.endswith(".json")
        assert t.calls[1][2] is not None  # PUT carried a JSON payload

    def test_unreachable_after_retries(self, mock_transport):
        def boom(m, u, b):
            raise OSError("timeout")

        t = mock_transport(boom)
        verdict = probe_firebase(self.URL, session(t))
        assert verdict.status is ProbeStatus.UNREACHABLE
        assert len(t.calls) == 3  # initial attempt + two retries, never more

    def test_get_probe_url_shape(self, mock_transport):
        t = mock_transport(lambda m, u, b: (401, b""))
        probe_firebase("mydb.firebaseio.com", session(t))
        assert t.calls[0][1] == "https://mydb.firebaseio.com/.json"

    def test_failed_delete_noted(self, mock_transport):
        def handler(m, u, b):
            return (404, b"gone") if m == "DELETE" else (200, b"{}")

        t = mock_transport(handler)
        verdict = probe_firebase(self.URL, session(t))
        assert verdict.status is ProbeStatus.WORLD_WRITABLE
        assert "cleanup" in (verdict.evidence.note or "")


class TestProbeGmapsKey:
    KEY = "AIza" + "0" * 35

    def test_valid_for_single_sku(self, mock_transport):
        def handler(m, u, b):
            if "staticmap" in u:
                return 200, b"\x89PNG image bytes"
            return 200, b'{"status": "REQUEST_DENIED"}'

        t = mock_transport(handler)
        catalog = load_sku_catalog()
        verdicts = probe_gmaps_key(self.KEY, catalog, session(t))
        assert len(verdicts) == 18
        valid = [v for v in verdicts if v.status is ProbeStatus.KEY_VALID_FOR_SKU]
        assert [v.sku for v in valid] == ["Staticmap API"]

    def test_all_rejected(self, mock_transport):
        t = mock_transport(lambda m, u, b: (403, b"denied"))
        verdicts = probe_gmaps_key(self.KEY, load_sku_catalog(), session(t))
        assert all(v.status is ProbeStatus.KEY_RESTRICTED for v in verdicts)
        assert len(verdicts) == 18

    def test_key_substituted_and_method_honored(self, mock_transport):
        t = mock_transport(lambda m, u, b: (403, b""))
        probe_gmaps_key(self.KEY, load_sku_catalog(), session(t))
        assert all(self.KEY in u for _m, u, _b in t.calls)
        posts = [(m, b) for m, _u, b in t.calls if m == "POST"]
        assert len(posts) == 1 and posts[0][1] is not None

    def test_base_url_override(self, mock_transport):
        t = mock_transport(lambda m, u, b: (403, b""))
        probe_gmaps_key(self.KEY, load_sku_catalog(), session(t), base_url="http://127.0.0.1:9")
        assert all(u.startswith("http://127.0.0.1:9/") for _m, u, _b in t.calls)


class TestEstimateExposure:
    def verdict(self, sku, status=ProbeStatus.KEY_VALID_FOR_SKU):
        from preapp.prober import ProbeVerdict

        return ProbeVerdict("gmaps_key", "k", status, sku=sku)

    def test_places_photo_only(self):
        catalog = load_sku_catalog()
        assert estimate_exposure([self.verdict("Places Photo API")], catalog) == 7.0

    def test_no_valid_skus(self):
        assert estimate_exposure([], load_sku_catalog()) == 0.0

    def test_geocode_plus_timezone(self):
        catalog = load_sku_catalog()
        verdicts = [self.verdict("Geocode API"), self.verdict("Timezone API")]
        assert estimate_exposure(verdicts, catalog) == 10.0

    def test_monotone_in_valid_set(self):
        catalog = load_sku_catalog()
        base = [self.verdict("Geocode API")]
        bigger = base + [self.verdict("Streetview API")]
        assert estimate_exposure(bigger, catalog) >= estimate_exposure(base, catalog)

    def test_restricted_contributes_nothing(self):
        catalog = load_sku_catalog()
        verdicts = [self.verdict("Geocode API", ProbeStatus.KEY_RESTRICTED)]
        assert estimate_exposure(verdicts, catalog) == 0.0


class TestProbeFindings:
    def findings(self):
        return [
            SecretFinding("firebase_url", "https://a.firebaseio.com", "classes.dex"),
            SecretFinding("gmaps_key", "AIza" + "1" * 35, "classes.dex"),
            SecretFinding("slack_webhook", "https://hooks.slack.com/services/T1/B2/c3", "classes.dex"),
        ]

    def test_disabled_probing_makes_zero_calls(self, mock_transport):
        t = mock_transport(lambda m, u, b: (200, b""))
        verdicts = probe_findings(self.findings(), enabled=False, transport=t)
        assert len(verdicts) == 2  # slack webhooks are detection-only
        assert all(v.status is ProbeStatus.NOT_PROBED for v in verdicts)
        assert t.calls == []

    def test_allowlist_restricts_firebase_targets(self, mock_transport):
        t = mock_transport(lambda m, u, b: (401, b""))
        verdicts = probe_findings(
            [SecretFinding("firebase_url", "https://a.firebaseio.com", "e")],
            enabled=True,
            transport=t,
            allowlist={"other.firebaseio.com"},
            sleep=lambda _s: None,
        )
        assert verdicts[0].status is ProbeStatus.NOT_PROBED
        assert t.calls == []

    def test_enabled_probes_each_target(self, mock_transport):
        t = mock_transport(lambda m, u, b: (401, b"denied"))
        verdicts = probe_findings(
            self.findings(),
            enabled=True,
            transport=t,
            allowlist={"a.firebaseio.com"},
            sleep=lambda _s: None,
        )
        statuses = {v.target_kind: v.status for v in verdicts if v.sku is None}
        assert statuses["firebase_url"] is ProbeStatus.LOCKED
        assert sum(1 for v in verdicts if v.target_kind == "gmaps_key") == 18
