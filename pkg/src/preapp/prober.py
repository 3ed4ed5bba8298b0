"""Optional live validation of extracted Firebase URLs and Maps API keys.

All network traffic goes through a pluggable transport so the probe logic
is fully testable against a local mock. Probing is off by default: with
``enabled=False`` every verdict is ``not_probed`` and the transport is
never touched. Live use additionally requires an explicit host allowlist.
"""

from __future__ import annotations

import hashlib
import json
import logging
import time
import uuid
from dataclasses import dataclass, field
from enum import Enum
from importlib import resources
from pathlib import Path
from typing import Callable, Iterable, Protocol
from urllib import error as urlerror
from urllib import parse as urlparse
from urllib import request as urlrequest

from .detectors import SecretFinding
from .errors import ConfigError

log = logging.getLogger(__name__)

MAX_RETRIES = 2
BACKOFF_BASE_S = 0.5

_DENIAL_MARKERS = (
    "request_denied",
    "denied",
    "restrict",
    "not authorized",
    "keyinvalid",
    "error",
)


class ProbeStatus(str, Enum):
    NOT_PROBED = "not_probed"
    WORLD_READABLE = "world_readable"
    WORLD_WRITABLE = "world_writable"
    LOCKED = "locked"
    KEY_VALID_FOR_SKU = "key_valid_for_sku"
    KEY_RESTRICTED = "key_restricted"
    UNREACHABLE = "unreachable"


@dataclass
class ProbeEvidence:
    status_code: int | None = None
    body_sha256: str | None = None
    note: str | None = None


@dataclass
class ProbeVerdict:
    target_kind: str
    target_value: str
    status: ProbeStatus
    sku: str | None = None
    evidence: ProbeEvidence = field(default_factory=ProbeEvidence)

    def as_dict(self) -> dict:
        return {
            "target_kind": self.target_kind,
            "target_value": self.target_value,
            "status": self.status.value,
            "sku": self.sku,
            "status_code": self.evidence.status_code,
            "body_sha256": self.evidence.body_sha256,
            "note": self.evidence.note,
        }


class Transport(Protocol):
    def request(self, method: str, url: str, body: bytes | None = None) -> tuple[int, bytes]:
        """Issue one HTTP request; returns (status_code, body).

        Must raise OSError (or a subclass) on transport failure.
        """


class UrllibTransport:
    """Stdlib transport used for real probing."""

    def __init__(self, timeout_s: float = 10.0):
        self.timeout_s = timeout_s

    def request(self, method: str, url: str, body: bytes | None = None) -> tuple[int, bytes]:
        req = urlrequest.Request(url, data=body, method=method)
        if body is not None:
            req.add_header("Content-Type", "application/json")
        try:
            with urlrequest.urlopen(req, timeout=self.timeout_s) as resp:
                return resp.status, resp.read()
        except urlerror.HTTPError as exc:
            return exc.code, exc.read()


@dataclass
class Sku:
    name: str
    method: str
    url_template: str
    cost_per_1000: float
    body: str | None = None


@dataclass
class SkuCatalog:
    skus: list[Sku]

    def __post_init__(self) -> None:
        names = [s.name for s in self.skus]
        if len(names) != len(set(names)):
            raise ConfigError("SKU names must be unique")

    def cost(self, name: str) -> float:
        for sku in self.skus:
            if sku.name == name:
                return sku.cost_per_1000
        raise KeyError(name)


def load_sku_catalog(path: str | Path | None = None) -> SkuCatalog:
    """Load the Maps SKU catalog (bundled 18-SKU default when no path)."""
    if path is None:
        raw = json.loads(
            resources.files("preapp.data").joinpath("sku_catalog.json").read_text(encoding="utf-8")
        )
        origin = "builtin sku_catalog.json"
    else:
        with open(path, encoding="utf-8") as fh:
            raw = json.load(fh)
        origin = str(path)
    skus = []
    for i, item in enumerate(raw):
        try:
            skus.append(
                Sku(
                    name=item["sku"],
                    method=item.get("method", "GET"),
                    url_template=item["url_template"],
                    cost_per_1000=float(item["cost_per_1000"]),
                    body=item.get("body"),
                )
            )
        except (KeyError, TypeError, ValueError) as exc:
            raise ConfigError(f"{origin}: SKU {i}: {exc}") from exc
    return SkuCatalog(skus=skus)


def _evidence(status: int | None, body: bytes | None, note: str | None = None) -> ProbeEvidence:
    digest = hashlib.sha256(body).hexdigest()[:16] if body is not None else None
    return ProbeEvidence(status_code=status, body_sha256=digest, note=note)


class ProbeSession:
    """Shared retry/backoff wrapper around a transport."""

    def __init__(
        self,
        transport: Transport,
        retries: int = MAX_RETRIES,
        backoff_base_s: float = BACKOFF_BASE_S,
        sleep: Callable[[float], None] = time.sleep,
    ):
        self.transport = transport
        self.retries = retries
        self.backoff_base_s = backoff_base_s
        self.sleep = sleep

    def request(self, method: str, url: str, body: bytes | None = None) -> tuple[int, bytes]:
        last: OSError | None = None
        for attempt in range(self.retries + 1):
            if attempt:
                self.sleep(self.backoff_base_s * (2 ** (attempt - 1)))
            try:
                return self.transport.request(method, url, body)
            except OSError as exc:
                last = exc
        raise last if last is not None else OSError("transport failed")


def normalize_firebase_url(url: str) -> str:
    if not url.startswith(("http://", "https://")):
        url = "https://" + url
    return url.rstrip("/")


def probe_firebase(url: str, session: ProbeSession, base_url: str | None = None) -> ProbeVerdict:
    """Classify a Firebase Realtime Database URL.

    GET <url>/.json returning 200 means world-readable; a subsequent PUT
    of a uniquely named sentinel key returning 200 upgrades the verdict to
    world-writable, and the sentinel is deleted again. 401/403 answers
    classify as locked, transport failure as unreachable. The verdict
    always reports the original URL even when requests are rebased.
    """
    base = _rebase(normalize_firebase_url(url), base_url)
    try:
        status, body = session.request("GET", base + "/.json")
    except OSError as exc:
        return ProbeVerdict("firebase_url", url, ProbeStatus.UNREACHABLE, evidence=_evidence(None, None, str(exc)))
    if status != 200:
        return ProbeVerdict("firebase_url", url, ProbeStatus.LOCKED, evidence=_evidence(status, body))

    sentinel = f"preapp_probe_{uuid.uuid4().hex}"
    payload = json.dumps({"probe": sentinel}).encode()
    note = None
    try:
        put_status, put_body = session.request("PUT", f"{base}/{sentinel}.json", payload)
    except OSError as exc:
        return ProbeVerdict(
            "firebase_url", url, ProbeStatus.WORLD_READABLE,
            evidence=_evidence(status, body, f"write probe unreachable: {exc}"),
        )
    if put_status != 200:
        return ProbeVerdict("firebase_url", url, ProbeStatus.WORLD_READABLE, evidence=_evidence(status, body))
    try:
        del_status, _ = session.request("DELETE", f"{base}/{sentinel}.json")
        if del_status != 200:
            note = f"sentinel cleanup returned {del_status}"
    except OSError as exc:
        note = f"sentinel cleanup failed: {exc}"
    if note:
        log.warning("firebase probe %s: %s", url, note)
    return ProbeVerdict(
        "firebase_url", url, ProbeStatus.WORLD_WRITABLE, evidence=_evidence(put_status, put_body, note)
    )


def _rebase(url: str, base_url: str | None) -> str:
    if not base_url:
        return url
    parts = urlparse.urlsplit(url)
    base = urlparse.urlsplit(base_url)
    return urlparse.urlunsplit((base.scheme, base.netloc, parts.path, parts.query, ""))


def probe_gmaps_key(
    key: str,
    catalog: SkuCatalog,
    session: ProbeSession,
    base_url: str | None = None,
) -> list[ProbeVerdict]:
    """Test a Maps API key against every SKU in the catalog.

    A 200 answer without a denial marker in the body validates the key
    for that SKU; denial markers (or any non-200 status) classify it as
    restricted there.
    """
    verdicts = []
    for sku in catalog.skus:
        url = _rebase(sku.url_template.format(key=key), base_url)
        body = sku.body.encode() if sku.body is not None else None
        try:
            status, resp = session.request(sku.method, url, body)
        except OSError as exc:
            verdicts.append(
                ProbeVerdict("gmaps_key", key, ProbeStatus.UNREACHABLE, sku=sku.name,
                             evidence=_evidence(None, None, str(exc)))
            )
            continue
        text = resp.decode("utf-8", "replace").lower()
        if status == 200 and not any(marker in text for marker in _DENIAL_MARKERS):
            verdict = ProbeStatus.KEY_VALID_FOR_SKU
        else:
            verdict = ProbeStatus.KEY_RESTRICTED
        verdicts.append(
            ProbeVerdict("gmaps_key", key, verdict, sku=sku.name, evidence=_evidence(status, resp))
        )
    return verdicts


def estimate_exposure(verdicts: Iterable[ProbeVerdict], catalog: SkuCatalog) -> float:
    """Dollar cost per 1000 requests over all SKUs the key is valid for."""
    total = 0.0
    for verdict in verdicts:
        if verdict.status is ProbeStatus.KEY_VALID_FOR_SKU and verdict.sku:
            total += catalog.cost(verdict.sku)
    return total


def load_allowlist(path: str | Path) -> set[str]:
    """Hostnames permitted for live probing, one per line ('#' comments)."""
    hosts = set()
    for line in Path(path).read_text(encoding="utf-8").splitlines():
        line = line.strip()
        if line and not line.startswith("#"):
            hosts.add(line.casefold())
    return hosts


def _host_of(url: str) -> str:
    return urlparse.urlsplit(normalize_firebase_url(url)).hostname or ""


DEFAULT_PROBE_CONCURRENCY = 4


def probe_findings(
    findings: Iterable[SecretFinding],
    enabled: bool,
    transport: Transport | None = None,
    catalog: SkuCatalog | None = None,
    allowlist: set[str] | None = None,
    base_url: str | None = None,
    sleep: Callable[[float], None] = time.sleep,
    concurrency: int = DEFAULT_PROBE_CONCURRENCY,
) -> list[ProbeVerdict]:
    """Probe the probeable findings (firebase URLs and Maps keys).

    Disabled probing short-circuits to not_probed verdicts without any
    transport construction or calls. An allowlist, when given, restricts
    firebase targets to the listed hosts. Distinct targets are probed
    concurrently up to ``concurrency`` workers; verdict order follows the
    finding order regardless.
    """
    targets = [f for f in findings if f.kind in ("firebase_url", "gmaps_key")]
    if not enabled:
        return [ProbeVerdict(f.kind, f.value, ProbeStatus.NOT_PROBED) for f in targets]

    session = ProbeSession(transport or UrllibTransport(), sleep=sleep)
    catalog = catalog or load_sku_catalog()

    def probe_one(finding: SecretFinding) -> list[ProbeVerdict]:
        if finding.kind == "firebase_url":
            if allowlist is not None and _host_of(finding.value) not in allowlist:
                return [
                    ProbeVerdict(finding.kind, finding.value, ProbeStatus.NOT_PROBED,
                                 evidence=ProbeEvidence(note="host not in allowlist"))
                ]
            return [probe_firebase(finding.value, session, base_url)]
        return probe_gmaps_key(finding.value, catalog, session, base_url)

    if concurrency > 1 and len(targets) > 1:
        from concurrent.futures import ThreadPoolExecutor

        with ThreadPoolExecutor(max_workers=concurrency) as pool:
            grouped = list(pool.map(probe_one, targets))
    else:
        grouped = [probe_one(f) for f in targets]
    return [verdict for group in grouped for verdict in group]
