"""Per-APK and per-dump analysis orchestration.

One ApkRecord gathers everything known about a single APK file; a device
report folds all records of a dump into the finding vector. Work is
sharded over a thread pool per APK and results are merged in path order,
so reports are byte-stable regardless of parallelism.
"""

from __future__ import annotations

import hashlib
import logging
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from pathlib import Path

from . import prober
from .axml import decode_axml
from .container import FileEntry, FileKind, FirmwareDump, read_zip, scan_dump
from .detectors import (
    SecretFinding,
    SecretRule,
    TrackerMatch,
    TrackerSignature,
    index_trackers,
    load_secret_rules,
    load_tracker_db,
    match_trackers,
    scan_secrets,
)
from .dex import DexFile, collect_apk_code
from .errors import FormatError, IdentityError, ManifestError, UnsignedError
from .findings import AppFindings, FindingVector, app_findings, device_vector, load_dangerous_permissions
from .identity import SignerIdentity, VendorClass, VendorMap, assign_group, classify_vendor, extract_signer
from .manifest import ManifestModel, extract_manifest
from .prober import ProbeVerdict, SkuCatalog, Transport

log = logging.getLogger(__name__)

MANIFEST_ENTRY = "AndroidManifest.xml"


@dataclass
class AnalysisContext:
    """Everything a scan needs beyond the dump itself."""

    tracker_db: list[TrackerSignature] = field(default_factory=load_tracker_db)
    secret_rules: list[SecretRule] = field(default_factory=load_secret_rules)
    vendor_map: VendorMap = field(default_factory=VendorMap)
    dangerous_perms: frozenset[str] = field(default_factory=load_dangerous_permissions)
    now_ms: int = 0
    count_unprobed_cloud: bool = False
    tracker_count_mode: str = "pairs"
    probe_enabled: bool = False
    transport: Transport | None = None
    sku_catalog: SkuCatalog | None = None
    probe_allowlist: set[str] | None = None
    probe_base_url: str | None = None

    def __post_init__(self) -> None:
        self.tracker_index = index_trackers(self.tracker_db)


@dataclass
class ApkRecord:
    relative_path: str
    sha256: str
    size_bytes: int
    package: str | None = None
    manifest: ManifestModel | None = None
    signer: SignerIdentity | None = None
    signer_status: str = "unsigned"
    vendor_class: VendorClass = VendorClass.UNKNOWN
    group_label: str = "unknown"
    matches: list[TrackerMatch] = field(default_factory=list)
    secrets: list[SecretFinding] = field(default_factory=list)
    verdicts: list[ProbeVerdict] = field(default_factory=list)
    findings: AppFindings | None = None
    first_install_ms: int | None = None
    last_update_ms: int | None = None
    warnings: list[str] = field(default_factory=list)
    parse_errors: list[str] = field(default_factory=list)

    @property
    def flagged(self) -> bool:
        return bool(self.parse_errors)


def analyze_apk_bytes(
    data: bytes, relative_path: str, dump: FirmwareDump, ctx: AnalysisContext
) -> ApkRecord:
    """Analyze one APK already loaded into memory."""
    record = ApkRecord(
        relative_path=relative_path,
        sha256=hashlib.sha256(data).hexdigest(),
        size_bytes=len(data),
    )
    archive = read_zip(data)
    record.parse_errors.extend(archive.errors)
    entries = archive.entries

    manifest_blob = next((blob for name, blob in entries if name == MANIFEST_ENTRY), None)
    if manifest_blob is None:
        record.parse_errors.append("no AndroidManifest.xml entry")
    else:
        try:
            record.manifest = extract_manifest(decode_axml(manifest_blob))
            record.package = record.manifest.package
        except (FormatError, ManifestError) as exc:
            record.parse_errors.append(f"manifest: {exc}")

    code = collect_apk_code(entries)
    record.parse_errors.extend(code.errors)

    try:
        record.signer = extract_signer(entries)
        record.signer_status = "signed"
    except UnsignedError:
        record.signer_status = "unsigned"
    except IdentityError as exc:
        record.signer_status = "error"
        record.parse_errors.append(f"signer: {exc}")

    if dump.manufacturer:
        record.vendor_class = classify_vendor(record.signer, dump.manufacturer, ctx.vendor_map)
    else:
        record.vendor_class = VendorClass.UNKNOWN
        if record.signer is not None:
            record.warnings.append("no manufacturer metadata; vendor classification skipped")
    record.group_label = assign_group(record.signer, ctx.vendor_map)
    if record.signer is not None:
        record.signer.group_label = record.group_label

    record.matches = sorted(
        match_trackers(
            DexFile(version="n/a", strings=[], type_descriptors=code.type_descriptors),
            ctx.tracker_db,
            app_hash=record.sha256,
        ),
        key=lambda m: m.tracker_id,
    )
    record.secrets = scan_secrets(code.strings, ctx.secret_rules, app_hash=record.sha256)
    record.verdicts = prober.probe_findings(
        record.secrets,
        enabled=ctx.probe_enabled,
        transport=ctx.transport,
        catalog=ctx.sku_catalog,
        allowlist=ctx.probe_allowlist,
        base_url=ctx.probe_base_url,
    )

    meta = dump.apps.get(record.package) if record.package else None
    if meta is not None:
        record.first_install_ms = meta.first_install_ms
        record.last_update_ms = meta.last_update_ms

    if record.manifest is None:
        record.findings = AppFindings(app_hash=record.sha256)
        record.warnings.append("manifest missing; app counts only toward app_total")
    else:
        record.findings = app_findings(
            manifest=record.manifest,
            vendor_class=record.vendor_class,
            matches=record.matches,
            secrets=record.secrets,
            verdicts=record.verdicts,
            now_ms=ctx.now_ms,
            app_hash=record.sha256,
            tracker_db=ctx.tracker_index,
            dangerous_perms=ctx.dangerous_perms,
            last_update_ms=record.last_update_ms,
            count_unprobed_cloud=ctx.count_unprobed_cloud,
        )
        record.warnings.extend(record.findings.warnings)
    return record


def analyze_apk(path: str | Path, relative_path: str, dump: FirmwareDump, ctx: AnalysisContext) -> ApkRecord:
    return analyze_apk_bytes(Path(path).read_bytes(), relative_path, dump, ctx)


@dataclass
class DeviceReport:
    dump: FirmwareDump
    file_entries: list[FileEntry]
    records: list[ApkRecord]
    vector: FindingVector
    warnings: list[str]

    @property
    def partial(self) -> bool:
        return any(r.flagged for r in self.records)


def analyze_dump(dump: FirmwareDump, ctx: AnalysisContext, jobs: int = 1) -> DeviceReport:
    """Scan a dump and analyze every APK in it.

    ``jobs`` sizes the per-APK worker pool; output does not depend on it.
    """
    file_entries = scan_dump(dump)
    apks = [e for e in file_entries if e.kind is FileKind.APK]

    def work(entry: FileEntry) -> ApkRecord:
        try:
            return analyze_apk(dump.root_path / entry.relative_path, entry.relative_path, dump, ctx)
        except Exception as exc:  # per-app isolation: a crash must not kill the dump
            log.exception("analysis failed for %s", entry.relative_path)
            record = ApkRecord(
                relative_path=entry.relative_path,
                sha256=entry.sha256,
                size_bytes=entry.size_bytes,
            )
            record.parse_errors.append(f"analysis crashed: {exc}")
            record.findings = AppFindings(app_hash=entry.sha256)
            return record

    if jobs > 1 and len(apks) > 1:
        with ThreadPoolExecutor(max_workers=jobs) as pool:
            records = list(pool.map(work, apks))
    else:
        records = [work(entry) for entry in apks]
    records.sort(key=lambda r: r.relative_path)

    vector = device_vector(
        (r.findings for r in records if r.findings is not None),
        dump.device_id,
        tracker_count_mode=ctx.tracker_count_mode,
    )
    warnings = [
        f"{r.relative_path}: {msg}"
        for r in records
        for msg in (*r.parse_errors, *r.warnings)
    ]
    return DeviceReport(
        dump=dump, file_entries=file_entries, records=records, vector=vector, warnings=warnings
    )


# ---------------------------------------------------------------------------
# Report serialization (plain dicts; the CLI dumps them as sorted JSON)
# ---------------------------------------------------------------------------

def manifest_dict(model: ManifestModel) -> dict:
    return {
        "package": model.package,
        "shared_user_id": model.shared_user_id,
        "min_sdk": model.min_sdk,
        "target_sdk": model.target_sdk,
        "app_flags": {
            "allow_backup": model.app_flags.allow_backup,
            "debuggable": model.app_flags.debuggable,
            "uses_cleartext_traffic": model.app_flags.uses_cleartext_traffic,
        },
        "uses_permissions": list(model.uses_permissions),
        "defines_permissions": [list(p) for p in model.defines_permissions],
        "components": [
            {
                "kind": c.kind.value,
                "name": c.name,
                "exported": c.exported_attr,
                "has_intent_filter": c.has_intent_filter,
                "required_permission": c.required_permission,
            }
            for c in model.components
        ],
    }


def record_dict(record: ApkRecord) -> dict:
    signer = None
    if record.signer is not None:
        signer = {
            "issuer_dn": record.signer.issuer_dn(),
            "issuer_rdn": [list(p) for p in record.signer.issuer_rdn],
            "subject_cn": record.signer.subject_cn,
            "cert_sha256": record.signer.cert_sha256,
            "group_label": record.signer.group_label,
            "debug_certificate": record.signer.is_debug,
        }
    findings = record.findings or AppFindings(app_hash=record.sha256)
    return {
        "path": record.relative_path,
        "sha256": record.sha256,
        "size": record.size_bytes,
        "package": record.package,
        "manifest": manifest_dict(record.manifest) if record.manifest else None,
        "signer": signer,
        "signer_status": record.signer_status,
        "vendor_class": record.vendor_class.value,
        "group_label": record.group_label,
        "tracker_matches": [
            {
                "tracker_id": m.tracker_id,
                "matched_prefix": m.matched_prefix,
                "evidence_descriptor": m.evidence_descriptor,
            }
            for m in record.matches
        ],
        "secrets": [
            {
                "kind": s.kind,
                "value": s.value,
                "source_entry": s.source_entry,
            }
            for s in record.secrets
        ],
        "probe_verdicts": sorted(
            (v.as_dict() for v in record.verdicts),
            key=lambda v: (v["target_kind"], v["target_value"], v["sku"] or ""),
        ),
        "findings": {
            "flags": sorted(findings.flags),
            "tracker_count_non_crash": findings.tracker_count_non_crash,
            "maps_vulnerable": findings.maps_vulnerable,
            "other_cloud_vulnerable": findings.other_cloud_vulnerable,
        },
        "metadata": (
            {
                "first_install_ms": record.first_install_ms,
                "last_update_ms": record.last_update_ms,
            }
            if record.last_update_ms is not None or record.first_install_ms is not None
            else None
        ),
        "warnings": list(record.warnings),
        "parse_errors": list(record.parse_errors),
    }


def report_dict(report: DeviceReport, ctx: AnalysisContext) -> dict:
    return {
        "device": {
            "device_id": report.dump.device_id,
            "manufacturer": report.dump.manufacturer,
            "model": report.dump.model,
            "product": report.dump.product,
        },
        "app_total": len(report.records),
        "file_totals": {
            kind.value: sum(1 for e in report.file_entries if e.kind is kind)
            for kind in FileKind
        },
        "records": [record_dict(r) for r in report.records],
        "vector": report.vector.as_dict(),
        "low_coverage": report.vector.low_coverage,
        "config": {
            "now_ms": ctx.now_ms,
            "count_unprobed_cloud": ctx.count_unprobed_cloud,
            "probe": ctx.probe_enabled,
        },
        "warnings": list(report.warnings),
    }
