"""Reduction of per-app analysis artifacts into the ten-finding vector.

Findings 1..6, 9, 10 are per-app booleans; finding 7 counts tracker
instances (so it may exceed the app count); finding 8 splits into a Maps
API part and an everything-else part because their impacts differ.
"""

from __future__ import annotations

import logging
from dataclasses import dataclass, field, fields
from importlib import resources
from pathlib import Path
from typing import Iterable, Mapping, Sequence

from .detectors import (
    AWS_PAIR_KIND,
    SecretFinding,
    TrackerMatch,
    TrackerSignature,
    non_crash_tracker_count,
)
from .identity import VendorClass
from .manifest import ManifestModel, is_effectively_exported
from .prober import ProbeStatus, ProbeVerdict

log = logging.getLogger(__name__)

FLAG_SYSTEM_UID = "system_uid"
FLAG_ALLOW_BACKUP = "allow_backup"
FLAG_NOT_VENDOR_SIGNED = "not_vendor_signed"
FLAG_STALE_2Y = "stale_2y"
FLAG_CLEARTEXT = "cleartext"
FLAG_DEBUGGABLE = "debuggable"
FLAG_EXPORTED_NOPERM = "exported_noperm"
FLAG_DANGEROUS_PERM = "dangerous_perm"

ALL_FLAGS = (
    FLAG_SYSTEM_UID,
    FLAG_ALLOW_BACKUP,
    FLAG_NOT_VENDOR_SIGNED,
    FLAG_STALE_2Y,
    FLAG_CLEARTEXT,
    FLAG_DEBUGGABLE,
    FLAG_EXPORTED_NOPERM,
    FLAG_DANGEROUS_PERM,
)

SYSTEM_SHARED_UID = "android.uid.system"
STALE_THRESHOLD_MS = 730 * 24 * 60 * 60 * 1000  # two years

# Secret kinds that count as non-Maps cloud exposure when unprobed
# findings are allowed to count (bare AWS ids/candidates are too weak
# alone and only count as a pair).
UNPROBED_OTHER_CLOUD_KINDS = frozenset(
    {"firebase_url", "slack_webhook", "oauth_client_secret", AWS_PAIR_KIND}
)

LOW_COVERAGE_APP_COUNT = 50  # devices need more apps than this to shape score pools


def load_dangerous_permissions(path: str | Path | None = None) -> frozenset[str]:
    """Dangerous (runtime) permission names, one per line, '#' comments."""
    if path is None:
        text = resources.files("preapp.data").joinpath("dangerous_permissions.txt").read_text(
            encoding="utf-8"
        )
    else:
        text = Path(path).read_text(encoding="utf-8")
    perms = set()
    for line in text.splitlines():
        line = line.strip()
        if line and not line.startswith("#"):
            perms.add(line)
    return frozenset(perms)


@dataclass
class AppFindings:
    app_hash: str
    flags: set[str] = field(default_factory=set)
    tracker_count_non_crash: int = 0
    maps_vulnerable: bool = False
    other_cloud_vulnerable: bool = False
    warnings: list[str] = field(default_factory=list)


def app_findings(
    manifest: ManifestModel | None,
    vendor_class: VendorClass,
    matches: Sequence[TrackerMatch],
    secrets: Sequence[SecretFinding],
    verdicts: Sequence[ProbeVerdict],
    now_ms: int,
    app_hash: str,
    tracker_db: Mapping[str, TrackerSignature],
    dangerous_perms: frozenset[str],
    last_update_ms: int | None = None,
    count_unprobed_cloud: bool = False,
) -> AppFindings:
    """Evaluate every per-app finding from this app's own artifacts.

    ``now_ms`` is always an explicit input so staleness is reproducible.
    An app without a decoded manifest contributes no manifest-derived
    flags (it still counts toward the device's app total).
    """
    out = AppFindings(app_hash=app_hash)

    if manifest is not None:
        if manifest.shared_user_id == SYSTEM_SHARED_UID:
            out.flags.add(FLAG_SYSTEM_UID)
        if manifest.app_flags.allow_backup is True:
            out.flags.add(FLAG_ALLOW_BACKUP)
        if manifest.app_flags.uses_cleartext_traffic is True:
            out.flags.add(FLAG_CLEARTEXT)
        if manifest.app_flags.debuggable is True:
            out.flags.add(FLAG_DEBUGGABLE)
        for component in manifest.components:
            if component.required_permission is None and is_effectively_exported(
                component, manifest.target_sdk
            ):
                out.flags.add(FLAG_EXPORTED_NOPERM)
                break
        if any(p in dangerous_perms for p in manifest.uses_permissions):
            out.flags.add(FLAG_DANGEROUS_PERM)

    if vendor_class in (VendorClass.THIRD_PARTY, VendorClass.UNKNOWN):
        out.flags.add(FLAG_NOT_VENDOR_SIGNED)

    if last_update_ms is None:
        out.warnings.append("no update metadata; staleness not evaluated")
    elif now_ms - last_update_ms > STALE_THRESHOLD_MS:
        out.flags.add(FLAG_STALE_2Y)

    out.tracker_count_non_crash = non_crash_tracker_count(matches, tracker_db)

    validated_maps = any(
        v.status is ProbeStatus.KEY_VALID_FOR_SKU for v in verdicts
    )
    validated_other = any(
        v.status in (ProbeStatus.WORLD_READABLE, ProbeStatus.WORLD_WRITABLE) for v in verdicts
    )
    if count_unprobed_cloud:
        validated_maps = validated_maps or any(s.kind == "gmaps_key" for s in secrets)
        validated_other = validated_other or any(
            s.kind in UNPROBED_OTHER_CLOUD_KINDS for s in secrets
        )
    out.maps_vulnerable = validated_maps
    out.other_cloud_vulnerable = validated_other
    return out


@dataclass
class FindingVector:
    """Per-device counts for the ten findings (finding 8 split in two)."""

    device_id: str
    app_total: int
    n1: int = 0
    n2: int = 0
    n3: int = 0
    n4: int = 0
    n5: int = 0
    n6: int = 0
    n7: int = 0
    n8_maps: int = 0
    n8_other: int = 0
    n9: int = 0
    n10: int = 0

    def __post_init__(self) -> None:
        counts = self.as_dict()
        for key, value in counts.items():
            if key == "device_id":
                continue
            if value < 0:
                raise ValueError(f"{key} must be non-negative, got {value}")
        for key in ("n1", "n2", "n3", "n4", "n5", "n6", "n8_maps", "n8_other", "n9", "n10"):
            if counts[key] > self.app_total:
                raise ValueError(f"{key}={counts[key]} exceeds app_total={self.app_total}")

    def as_dict(self) -> dict:
        return {
            "device_id": self.device_id,
            "app_total": self.app_total,
            "n1": self.n1,
            "n2": self.n2,
            "n3": self.n3,
            "n4": self.n4,
            "n5": self.n5,
            "n6": self.n6,
            "n7": self.n7,
            "n8_maps": self.n8_maps,
            "n8_other": self.n8_other,
            "n9": self.n9,
            "n10": self.n10,
        }

    @classmethod
    def from_dict(cls, raw: Mapping) -> "FindingVector":
        return cls(**{f.name: raw[f.name] for f in fields(cls)})

    @property
    def low_coverage(self) -> bool:
        return self.app_total <= LOW_COVERAGE_APP_COUNT


_FLAG_TO_FIELD = {
    FLAG_SYSTEM_UID: "n1",
    FLAG_ALLOW_BACKUP: "n2",
    FLAG_NOT_VENDOR_SIGNED: "n3",
    FLAG_STALE_2Y: "n4",
    FLAG_CLEARTEXT: "n5",
    FLAG_DEBUGGABLE: "n6",
    FLAG_EXPORTED_NOPERM: "n9",
    FLAG_DANGEROUS_PERM: "n10",
}


TRACKER_COUNT_MODES = ("pairs", "apps")


def device_vector(
    apps: Iterable[AppFindings], device_id: str, tracker_count_mode: str = "pairs"
) -> FindingVector:
    """Fold per-app findings into one device vector.

    Permutation-invariant and additive over disjoint app sets: every
    count is a plain sum. All counts tally apps except n7, which by
    default sums tracker instances ((app, tracker) pairs); mode "apps"
    counts tracker-bearing apps instead.
    """
    if tracker_count_mode not in TRACKER_COUNT_MODES:
        raise ValueError(f"tracker_count_mode must be one of {TRACKER_COUNT_MODES}")
    vec = FindingVector(device_id=device_id, app_total=0)
    for app in apps:
        vec.app_total += 1
        for flag in app.flags:
            name = _FLAG_TO_FIELD.get(flag)
            if name is None:
                raise ValueError(f"unknown finding flag {flag!r}")
            setattr(vec, name, getattr(vec, name) + 1)
        if tracker_count_mode == "pairs":
            vec.n7 += app.tracker_count_non_crash
        else:
            vec.n7 += int(app.tracker_count_non_crash > 0)
        if app.maps_vulnerable:
            vec.n8_maps += 1
        if app.other_cloud_vulnerable:
            vec.n8_other += 1
    return vec
