"""Acceptance suite: one test per shipping criterion, each printing a
PASS line when its assertions hold. Run with -s (or -rA) to see them.
"""

import json
import math
import random
import time
from pathlib import Path

import pytest
from click.testing import CliRunner

from preapp.cli import main
from preapp.detectors import load_secret_rules, scan_secrets
from preapp.dex import parse_dex
from preapp.errors import FormatError
from preapp.findings import FindingVector
from preapp.fixtures import DEFAULT_NOW_MS, encode_axml, generate_corpus, write_fixture_dex
from preapp.manifest import extract_manifest
from preapp.axml import decode_axml
from preapp.prober import ProbeSession, ProbeStatus, estimate_exposure, load_sku_catalog, probe_findings, probe_firebase
from preapp.scoring import load_coefficients, pearson, score_corpus

from conftest import MockTransport, random_manifest
from oracle_scoring import flat_scores, naive_pearson

NOW = DEFAULT_NOW_MS


def ok(num: int, name: str) -> None:
    print(f"ACCEPTANCE {num:02d} {name}: PASS")


@pytest.fixture(scope="module")
def planted(tmp_path_factory):
    """300-APK planted corpus scanned+scored twice through the CLI."""
    base = tmp_path_factory.mktemp("acceptance")
    corpus = base / "corpus"
    plant = generate_corpus(corpus, devices=12, apps_per_device=25, seed=20260101, now_ms=NOW)
    runner = CliRunner()

    def pipeline(tag: str) -> tuple[Path, float]:
        out = base / tag
        t0 = time.monotonic()
        for device in plant["devices"]:
            result = runner.invoke(
                main,
                [
                    "scan", str(corpus / device["device_id"]),
                    "--out", str(out), "--now", str(NOW), "--count-unprobed-cloud",
                ],
            )
            assert result.exit_code == 0, result.output
        reports = sorted(str(p) for p in out.glob("*.report.json"))
        result = runner.invoke(main, ["score", *reports, "--out", str(out)])
        assert result.exit_code == 0, result.output
        return out, time.monotonic() - t0

    out1, elapsed1 = pipeline("run1")
    out2, _ = pipeline("run2")
    return {"base": base, "plant": plant, "out1": out1, "out2": out2, "elapsed": elapsed1}


def test_criterion_01_axml_roundtrip():
    rng = random.Random(42)
    t0 = time.monotonic()
    for i in range(50):
        model = random_manifest(rng)
        recovered = extract_manifest(decode_axml(encode_axml(model, utf8_pool=(i % 2 == 0))))
        assert recovered == model
    elapsed = time.monotonic() - t0
    assert elapsed < 5.0, f"round trips took {elapsed:.2f}s"
    ok(1, "axml-roundtrip")


def test_criterion_02_dex_roundtrip_and_fuzz():
    rng = random.Random(43)
    alphabet = "abcXYZ0189_$/" + "\x00éğ中\U0001f600"
    for _ in range(50):
        strings = [
            "".join(rng.choices(alphabet, k=rng.randrange(0, 30)))
            for _ in range(rng.randrange(0, 10))
        ]
        descriptors = [f"Lrt/C{i};" for i in range(rng.randrange(0, 5))]
        combined = strings + descriptors
        types = list(range(len(strings), len(combined)))
        dex = parse_dex(write_fixture_dex(combined, types))
        assert dex.strings == combined
        assert dex.type_descriptors == descriptors
    for _ in range(10_000):
        blob = rng.randbytes(rng.randrange(0, 256))
        try:
            parse_dex(blob)
        except FormatError:
            pass
    ok(2, "dex-roundtrip-fuzz")


def test_criterion_03_planted_corpus_vectors(planted):
    reports = {
        json.loads(p.read_text())["device"]["device_id"]: json.loads(p.read_text())
        for p in planted["out1"].glob("*.report.json")
    }
    assert len(reports) == 12
    total_apps = 0
    for expected in planted["plant"]["devices"]:
        got = reports[expected["device_id"]]["vector"]
        assert got == expected, f"{expected['device_id']}: {got} != {expected}"
        total_apps += expected["app_total"]
    assert total_apps == 300
    ok(3, "planted-finding-corpus")


def test_criterion_04_scoring_oracle(planted):
    vectors = [FindingVector.from_dict(d) for d in planted["plant"]["devices"]]
    scores = score_corpus(vectors, load_coefficients())
    oracle = flat_scores(planted["plant"]["devices"])
    for got, expected in zip(scores, oracle):
        assert math.isclose(got.total, expected["total"], abs_tol=1e-9)
        for finding in range(1, 11):
            assert math.isclose(got.score[str(finding)], expected["score"][finding], abs_tol=1e-9)
    # The CLI-scored corpus must carry the same totals.
    cli_scores = json.loads((planted["out1"] / "scores.json").read_text())
    by_id = {d["device_id"]: d["total"] for d in cli_scores["devices"]}
    for vec, expected in zip(vectors, oracle):
        assert math.isclose(by_id[vec.device_id], expected["total"], abs_tol=1e-9)
    ok(4, "scoring-oracle")


def test_criterion_05_coefficient_conformance():
    coeff = load_coefficients()
    expected_d = (0.25, 0.25, 0.50, 0.25, 0.50, 0.25, 1.00, 1.00, 0.25, 0.25)
    expected_a = (0.50, 0.25, 0.50, 0.50, 0.50, 0.25, 1.00, 1.00, 0.25, 0.25)
    expected_i = (0.25, 0.25, 0.25, 0.10, 0.25, 0.50, 1.00, 0.25, 0.10, 0.25)
    for i in range(10):
        assert coeff.difficulty[i] == expected_d[i], f"d{i + 1}"
        assert coeff.awareness[i] == expected_a[i], f"a{i + 1}"
        assert coeff.impact[i] == expected_i[i], f"I{i + 1}"
    assert coeff.difficulty[6] == 1.00 and coeff.awareness[6] == 1.00 and coeff.impact[6] == 1.00
    assert coeff.impact[7] == 0.25 and coeff.i8_other == 1.00
    assert coeff.impact[5] == 0.50
    assert coeff.impact[3] == 0.10 and coeff.impact[8] == 0.10
    ok(5, "coefficient-conformance")


def test_criterion_06_scorer_properties():
    rng = random.Random(606)
    fields = ("n1", "n2", "n3", "n4", "n5", "n6", "n7", "n8_maps", "n8_other", "n9", "n10")

    def rand_vec(i, total=None):
        total = total or rng.randrange(51, 300)
        kw = {f: rng.randrange(0, min(total, 50) + 1) for f in fields if f != "n7"}
        kw["n7"] = rng.randrange(0, total * 2)
        return FindingVector(device_id=f"d{i}", app_total=total, **kw)

    vectors_checked = 0
    while vectors_checked < 1000:
        corpus = [rand_vec(i) for i in range(rng.randrange(2, 8))]
        scores = score_corpus(corpus)
        for s in scores:
            assert 0.0 <= s.total <= 100.0
        # Raw monotonicity: bump one count, raw never decreases.
        bumped = [FindingVector.from_dict(v.as_dict()) for v in corpus]
        field = rng.choice(fields)
        target = rng.randrange(len(bumped))
        if field == "n7":
            bumped[target].n7 += 3
        else:
            setattr(bumped[target], field, min(getattr(bumped[target], field) + 1,
                                               bumped[target].app_total))
        rescored = score_corpus(bumped)
        stream = {"n8_maps": "8a", "n8_other": "8b"}.get(field, field[1:])
        assert rescored[target].raw[stream] >= scores[target].raw[stream]
        # Rank dominance: componentwise-dominant twin never scores lower.
        base = corpus[0]
        dom_kw = {f: min(getattr(base, f) + 1, base.app_total) for f in fields if f != "n7"}
        dom_kw["n7"] = base.n7 + 1
        dominant = FindingVector(device_id="zz_dom", app_total=base.app_total, **dom_kw)
        pair_scores = {s.device_id: s for s in score_corpus(corpus + [dominant])}
        assert pair_scores["zz_dom"].total >= pair_scores[base.device_id].total - 1e-12
        vectors_checked += len(corpus) + 1

    singleton = score_corpus([rand_vec(0)])
    assert singleton[0].total == 0.0
    ok(6, "scorer-properties")


def test_criterion_07_pearson():
    assert pearson([(1, 1), (2, 2), (3, 3)]) == 1.0
    rng = random.Random(707)
    checked = 0
    while checked < 1000:
        n = rng.randrange(2, 50)
        pairs = [(rng.uniform(-1000, 1000), rng.uniform(-1000, 1000)) for _ in range(n)]
        if len({x for x, _ in pairs}) < 2 or len({y for _, y in pairs}) < 2:
            continue
        assert abs(pearson(pairs) - naive_pearson(pairs)) < 1e-12
        checked += 1
    ok(7, "pearson-oracle")


def test_criterion_08_secret_rule_vectors():
    vectors = json.loads(
        (Path(__file__).parent / "data" / "secret_vectors.json").read_text()
    )
    assert len(vectors) == 40
    rules = load_secret_rules()
    misclassified = []
    for case in vectors:
        got = {f.kind for f in scan_secrets([("case", case["text"])], rules)}
        if got != set(case["expect"]):
            misclassified.append((case["text"], sorted(got), case["expect"]))
    assert not misclassified, misclassified
    ok(8, "secret-rules")


def test_criterion_09_sku_catalog():
    catalog = load_sku_catalog()
    costs = {s.name: s.cost_per_1000 for s in catalog.skus}
    assert len(costs) == 18
    assert costs["Places Photo API"] == 7.0
    assert costs["Nearby Search-Places API"] == 32.0
    assert costs["Text Search-Places API"] == 32.0
    assert costs["Find Place From Text API"] == 17.0
    assert costs["Place Details API"] == 17.0
    assert costs["Staticmap API"] == 2.0
    for sku in ("Geocode API", "Geolocation API", "Timezone API", "Elevation API",
                "Directions API", "Distance Matrix API"):
        assert costs[sku] == 5.0, sku
    assert costs["Streetview API"] == 7.0
    assert costs["Nearest Roads API"] == 10.0
    assert costs["Route to Traveled API"] == 10.0
    assert costs["Embed (Basic) API"] == 0.0
    assert costs["Embed (Advanced) API"] == 0.0

    from preapp.prober import ProbeVerdict

    only_photo = [ProbeVerdict("gmaps_key", "k", ProbeStatus.KEY_VALID_FOR_SKU, sku="Places Photo API")]
    assert estimate_exposure(only_photo, catalog) == 7.0
    ok(9, "sku-catalog")


def test_criterion_10_firebase_probe_state_machine():
    url = "https://db.firebaseio.com"

    def session(handler):
        transport = MockTransport(handler)
        return transport, ProbeSession(transport, sleep=lambda _s: None)

    transport, sess = session(lambda m, u, b: (401, b"denied"))
    assert probe_firebase(url, sess).status is ProbeStatus.LOCKED
    assert transport.methods() == ["GET"]

    transport, sess = session(lambda m, u, b: (200, b"{}") if m == "GET" else (403, b""))
    assert probe_firebase(url, sess).status is ProbeStatus.WORLD_READABLE
    assert transport.methods() == ["GET", "PUT"]

    transport, sess = session(lambda m, u, b: (200, b"{}"))
    assert probe_firebase(url, sess).status is ProbeStatus.WORLD_WRITABLE
    assert transport.methods().count("PUT") == 1
    assert transport.methods().count("DELETE") == 1

    def unreachable(m, u, b):
        raise OSError("no route")

    transport, sess = session(unreachable)
    assert probe_firebase(url, sess).status is ProbeStatus.UNREACHABLE

    from preapp.detectors import SecretFinding

    transport = MockTransport(lambda m, u, b: (200, b"{}"))
    verdicts = probe_findings(
        [SecretFinding("firebase_url", url, "e"), SecretFinding("gmaps_key", "AIza" + "0" * 35, "e")],
        enabled=False,
        transport=transport,
    )
    assert all(v.status is ProbeStatus.NOT_PROBED for v in verdicts)
    assert transport.calls == []
    ok(10, "firebase-probe-state-machine")


def test_criterion_11_end_to_end_determinism_and_timing(planted, tmp_path):
    names = sorted(p.name for p in planted["out1"].iterdir())
    assert names == sorted(p.name for p in planted["out2"].iterdir())
    assert any(n.endswith(".report.json") for n in names)
    for name in names:
        a = (planted["out1"] / name).read_bytes()
        b = (planted["out2"] / name).read_bytes()
        assert a == b, f"{name} differs between runs"
    assert planted["elapsed"] < 60.0, f"300-APK pipeline took {planted['elapsed']:.1f}s"

    stress = tmp_path / "stress"
    generate_corpus(stress, devices=10, apps_per_device=100, seed=77, now_ms=NOW)
    runner = CliRunner()
    out = tmp_path / "stress_out"
    t0 = time.monotonic()
    for d in range(10):
        result = runner.invoke(
            main,
            ["scan", str(stress / f"device{d:02d}"), "--out", str(out),
             "--now", str(NOW), "--count-unprobed-cloud"],
        )
        assert result.exit_code == 0, result.output
    reports = sorted(str(p) for p in out.glob("*.report.json"))
    result = runner.invoke(main, ["score", *reports, "--out", str(out)])
    assert result.exit_code == 0, result.output
    elapsed = time.monotonic() - t0
    assert elapsed < 300.0, f"1000-APK pipeline took {elapsed:.1f}s"
    ok(11, "end-to-end-determinism-and-timing")
