"""Tracker SDK matching and embedded-credential scanning.

Tracker signatures pair a vendor identity with class-path prefixes (e.g.
``Lcom/appsflyer/``) matched byte-exactly against DEX type descriptors.
The secret rule set is a list of anchored regular expressions with an
optional Shannon-entropy floor; both ship as JSON data files so they can
be replaced without touching code (an Exodus export converts 1:1 onto the
tracker schema).
"""

from __future__ import annotations

import json
import logging
import math
import re
from collections import defaultdict
from dataclasses import dataclass
from enum import Enum
from importlib import resources
from pathlib import Path
from typing import Iterable, Mapping, Sequence

from .dex import CodeString, DexFile
from .errors import ConfigError

log = logging.getLogger(__name__)


class TrackerCategory(str, Enum):
    CRASH_REPORTER = "CrashReporter"
    ANALYTICS = "Analytics"
    PROFILING = "Profiling"
    IDENTIFICATION = "Identification"
    ADVERTISEMENT = "Advertisement"
    LOCATION = "Location"


@dataclass
class TrackerSignature:
    tracker_id: str
    display_name: str
    company: str
    country: str
    categories: frozenset[TrackerCategory]
    code_prefixes: list[str]

    def __post_init__(self) -> None:
        if not self.categories:
            raise ConfigError(f"tracker {self.tracker_id}: needs at least one category")
        if not self.code_prefixes:
            raise ConfigError(f"tracker {self.tracker_id}: needs at least one code prefix")
        for prefix in self.code_prefixes:
            if not (prefix.startswith("L") and prefix.endswith("/")):
                raise ConfigError(
                    f"tracker {self.tracker_id}: prefix {prefix!r} must start with 'L' and end with '/'"
                )

    @property
    def crash_reporter_only(self) -> bool:
        return self.categories == frozenset({TrackerCategory.CRASH_REPORTER})


@dataclass
class TrackerMatch:
    tracker_id: str
    matched_prefix: str
    evidence_descriptor: str
    app_hash: str = ""


def _data_file(name: str):
    return resources.files("preapp.data").joinpath(name)


def load_tracker_db(path: str | Path | None = None) -> list[TrackerSignature]:
    """Load and validate a tracker signature DB (bundled default when no path)."""
    if path is None:
        raw = json.loads(_data_file("trackers.json").read_text(encoding="utf-8"))
        origin = "builtin trackers.json"
    else:
        with open(path, encoding="utf-8") as fh:
            raw = json.load(fh)
        origin = str(path)
    if not isinstance(raw, list):
        raise ConfigError(f"{origin}: tracker DB must be a JSON array")
    db = []
    seen = set()
    for i, item in enumerate(raw):
        try:
            sig = TrackerSignature(
                tracker_id=item["tracker_id"],
                display_name=item["display_name"],
                company=item["company"],
                country=item["country"],
                categories=frozenset(TrackerCategory(c) for c in item["categories"]),
                code_prefixes=list(item["code_prefixes"]),
            )
        except (KeyError, TypeError, ValueError) as exc:
            raise ConfigError(f"{origin}: entry {i}: {exc}") from exc
        if sig.tracker_id in seen:
            raise ConfigError(f"{origin}: entry {i}: duplicate tracker_id {sig.tracker_id!r}")
        seen.add(sig.tracker_id)
        db.append(sig)
    return db


def index_trackers(db: Iterable[TrackerSignature]) -> dict[str, TrackerSignature]:
    return {sig.tracker_id: sig for sig in db}


def match_trackers(
    dex: DexFile, db: Sequence[TrackerSignature], app_hash: str = ""
) -> list[TrackerMatch]:
    """Match tracker code prefixes against DEX type descriptors.

    At most one match per tracker is emitted, keeping the longest hitting
    prefix (ties and multiple descriptors resolve to the lexicographically
    smallest evidence, so output is independent of descriptor order).
    """
    matches = []
    for sig in db:
        best: tuple[int, str, str] | None = None
        for prefix in sig.code_prefixes:
            for desc in dex.type_descriptors:
                if desc.startswith(prefix):
                    key = (-len(prefix), prefix, desc)
                    if best is None or key < best:
                        best = key
        if best is not None:
            matches.append(
                TrackerMatch(
                    tracker_id=sig.tracker_id,
                    matched_prefix=best[1],
                    evidence_descriptor=best[2],
                    app_hash=app_hash,
                )
            )
    return matches


def non_crash_tracker_count(
    matches: Iterable[TrackerMatch], db: Mapping[str, TrackerSignature]
) -> int:
    """Matches whose tracker does anything beyond crash reporting.

    A tracker categorized only as CrashReporter is excluded; trackers with
    any additional category still count.
    """
    count = 0
    for match in matches:
        sig = db.get(match.tracker_id)
        if sig is None:
            raise ConfigError(f"match references unknown tracker {match.tracker_id!r}")
        if not sig.crash_reporter_only:
            count += 1
    return count


@dataclass
class TrackerStats:
    """Corpus-level tracker aggregates (distinct (app, tracker) semantics)."""

    tracker_apps: dict[str, int]
    company_trackers: dict[str, int]
    country_companies: dict[str, int]
    category_trackers: dict[str, int]


def tracker_statistics(
    apps: Iterable[tuple[str, Iterable[TrackerMatch]]],
    db: Mapping[str, TrackerSignature],
) -> TrackerStats:
    """Aggregate detections over a corpus of (package, matches) pairs.

    Different versions of the same package count once: detections are
    first reduced to distinct (package, tracker) pairs.
    """
    pairs: set[tuple[str, str]] = set()
    for package, matches in apps:
        for match in matches:
            pairs.add((package, match.tracker_id))

    tracker_apps: dict[str, set[str]] = defaultdict(set)
    for package, tracker_id in pairs:
        tracker_apps[tracker_id].add(package)

    detected = sorted(tracker_apps)
    company_trackers: dict[str, int] = defaultdict(int)
    country_companies: dict[str, set[str]] = defaultdict(set)
    category_trackers = {cat.value: 0 for cat in TrackerCategory}
    for tracker_id in detected:
        sig = db.get(tracker_id)
        if sig is None:
            raise ConfigError(f"stats reference unknown tracker {tracker_id!r}")
        company_trackers[sig.company] += 1
        country_companies[sig.country].add(sig.company)
        for cat in sig.categories:
            category_trackers[cat.value] += 1

    return TrackerStats(
        tracker_apps={t: len(apps_) for t, apps_ in sorted(tracker_apps.items())},
        company_trackers=dict(sorted(company_trackers.items())),
        country_companies={c: len(s) for c, s in sorted(country_companies.items())},
        category_trackers=category_trackers,
    )


# ---------------------------------------------------------------------------
# Secret scanning
# ---------------------------------------------------------------------------

RULE_KINDS = (
    "gmaps_key",
    "aws_access_key_id",
    "aws_secret_key_candidate",
    "firebase_url",
    "slack_webhook",
    "oauth_client_secret",
)

# Synthesized when an access key id and a plausible secret share a source entry.
AWS_PAIR_KIND = "aws_key_pair"


@dataclass
class SecretRule:
    kind: str
    pattern: re.Pattern
    entropy_min: float | None = None


@dataclass
class SecretFinding:
    kind: str
    value: str
    source_entry: str
    app_hash: str = ""
    probe: dict | None = None


def shannon_entropy(token: str) -> float:
    """Shannon entropy in bits per character."""
    if not token:
        return 0.0
    counts: dict[str, int] = defaultdict(int)
    for ch in token:
        counts[ch] += 1
    n = len(token)
    return -sum((c / n) * math.log2(c / n) for c in counts.values())


def default_secret_rules() -> list[dict]:
    return json.loads(_data_file("secret_rules.json").read_text(encoding="utf-8"))


def load_secret_rules(path: str | Path | None = None) -> list[SecretRule]:
    """Load and compile the secret rule set (bundled default when no path)."""
    if path is None:
        raw = default_secret_rules()
        origin = "builtin secret_rules.json"
    else:
        with open(path, encoding="utf-8") as fh:
            raw = json.load(fh)
        origin = str(path)
    if not isinstance(raw, list):
        raise ConfigError(f"{origin}: rule set must be a JSON array")
    rules = []
    for i, item in enumerate(raw):
        kind = item.get("kind")
        if kind not in RULE_KINDS:
            raise ConfigError(f"{origin}: rule {i}: unknown kind {kind!r}")
        try:
            pattern = re.compile(item["pattern"])
        except (KeyError, re.error) as exc:
            raise ConfigError(f"{origin}: rule {i} ({kind}): bad pattern: {exc}") from exc
        entropy_min = item.get("entropy_min")
        if entropy_min is not None and not isinstance(entropy_min, (int, float)):
            raise ConfigError(f"{origin}: rule {i} ({kind}): entropy_min must be a number")
        rules.append(SecretRule(kind=kind, pattern=pattern, entropy_min=entropy_min))
    return rules


def scan_secrets(
    strings: Iterable[CodeString | tuple[str, str]],
    rules: Sequence[SecretRule],
    app_hash: str = "",
) -> list[SecretFinding]:
    """Run every rule over tagged code strings.

    Findings are deduplicated per (kind, value); the first source entry
    (in input order) is kept. When an AWS access key id and a secret
    candidate appear in the same source entry, a combined aws_key_pair
    finding is synthesized as well.
    """
    found: dict[tuple[str, str], SecretFinding] = {}
    per_entry: dict[str, dict[str, set[str]]] = defaultdict(lambda: defaultdict(set))
    for source, text in strings:
        for rule in rules:
            for m in rule.pattern.finditer(text):
                value = m.group(1) if m.groups() else m.group(0)
                if rule.entropy_min is not None and shannon_entropy(value) < rule.entropy_min:
                    continue
                key = (rule.kind, value)
                if key not in found:
                    found[key] = SecretFinding(rule.kind, value, source, app_hash)
                per_entry[source][rule.kind].add(value)

    findings = list(found.values())
    for source in sorted(per_entry):
        kinds = per_entry[source]
        for key_id in sorted(kinds.get("aws_access_key_id", ())):
            for secret in sorted(kinds.get("aws_secret_key_candidate", ())):
                pair = (AWS_PAIR_KIND, f"{key_id}:{secret}")
                if pair not in found:
                    found[pair] = SecretFinding(AWS_PAIR_KIND, pair[1], source, app_hash)
                    findings.append(found[pair])
    findings.sort(key=lambda f: (f.kind, f.value, f.source_entry))
    return findings
