"""Command-line entry point: scan firmware dumps, score devices, report.

Subcommands:

    preapp scan DUMP...     analyze dumps into per-device report JSON
    preapp score REPORT...  corpus scores, ranking, CSV and statistics
    preapp stats            totals and histograms over the dedup store
    preapp probe REPORT     live-validate extracted cloud findings
    preapp fixtures gen     generate a synthetic planted corpus

Option values resolve as flag > environment (PREAPP_*) > --config file >
built-in default. Reports are pretty-printed JSON with sorted keys, so
repeated runs over identical input are byte-identical.
"""

from __future__ import annotations

import csv
import datetime as dt
import io
import json
import logging
import os
from pathlib import Path

import click

from . import __version__, analysis, fixtures, prober
from .container import DedupStore, FileKind, dedup_upsert, load_dump
from .detectors import (
    SecretFinding,
    TrackerMatch,
    index_trackers,
    load_secret_rules,
    load_tracker_db,
    tracker_statistics,
)
from .errors import PreappError, UndefinedCorrelation
from .findings import FindingVector, load_dangerous_permissions
from .identity import VendorMap
from .scoring import load_coefficients, pearson, rank_devices, score_corpus

log = logging.getLogger(__name__)

EXIT_OK = 0
EXIT_FATAL = 1
EXIT_PARTIAL = 2


def _parse_now(value: str | None) -> int:
    """Accept Unix milliseconds or an ISO-8601 date/datetime (UTC assumed)."""
    if value is None:
        return int(dt.datetime.now(tz=dt.timezone.utc).timestamp() * 1000)
    try:
        return int(value)
    except ValueError:
        pass
    try:
        stamp = dt.datetime.fromisoformat(value)
    except ValueError as exc:
        raise click.BadParameter(f"--now must be Unix ms or ISO-8601, got {value!r}") from exc
    if stamp.tzinfo is None:
        stamp = stamp.replace(tzinfo=dt.timezone.utc)
    return int(stamp.timestamp() * 1000)


def _write_json(path: Path, payload: dict) -> None:
    path.write_text(json.dumps(payload, indent=2, sort_keys=True) + "\n", encoding="utf-8", newline="\n")


def _load_config_map(path: str | None) -> dict:
    if not path:
        return {}
    with open(path, encoding="utf-8") as fh:
        flat = json.load(fh)
    if not isinstance(flat, dict):
        raise click.BadParameter("--config must contain a JSON object")
    return {cmd: dict(flat) for cmd in ("scan", "score", "stats", "probe")}


@click.group()
@click.version_option(__version__, prog_name="preapp")
@click.option("--config", type=click.Path(exists=True, dir_okay=False), default=None,
              help="JSON file with default option values.")
@click.option("-v", "--verbose", is_flag=True, help="Enable debug logging.")
@click.pass_context
def main(ctx: click.Context, config: str | None, verbose: bool) -> None:
    logging.basicConfig(
        level=logging.DEBUG if verbose else logging.WARNING,
        format="%(levelname)s %(name)s: %(message)s",
    )
    ctx.default_map = _load_config_map(config)


def _build_context(
    signatures: str | None,
    rules: str | None,
    vendor_map: str | None,
    dangerous_perms: str | None,
    now: str | None,
    count_unprobed_cloud: bool,
    probe: bool,
    probe_allowlist: str | None,
    probe_base_url: str | None,
) -> analysis.AnalysisContext:
    if probe and not probe_allowlist:
        raise click.UsageError("--probe requires --probe-allowlist")
    return analysis.AnalysisContext(
        tracker_db=load_tracker_db(signatures),
        secret_rules=load_secret_rules(rules),
        vendor_map=VendorMap.load(vendor_map) if vendor_map else VendorMap(),
        dangerous_perms=load_dangerous_permissions(dangerous_perms),
        now_ms=_parse_now(now),
        count_unprobed_cloud=count_unprobed_cloud,
        probe_enabled=probe,
        probe_allowlist=prober.load_allowlist(probe_allowlist) if probe_allowlist else None,
        probe_base_url=probe_base_url,
    )


@main.command()
@click.argument("dumps", nargs=-1, required=True, type=click.Path(exists=True, file_okay=False))
@click.option("--out", "-o", type=click.Path(file_okay=False), default=".", show_default=True,
              help="Directory for <device_id>.report.json files.")
@click.option("--store", envvar="PREAPP_STORE", type=click.Path(dir_okay=False), default=None,
              help="Dedup store file to update (JSON lines).")
@click.option("--device-id", default=None, help="Device id override (single dump only).")
@click.option("--signatures", type=click.Path(exists=True, dir_okay=False), default=None,
              help="Tracker signature DB (JSON).")
@click.option("--rules", type=click.Path(exists=True, dir_okay=False), default=None,
              help="Secret rule set (JSON).")
@click.option("--vendor-map", type=click.Path(exists=True, dir_okay=False), default=None,
              help="Vendor map (JSON).")
@click.option("--dangerous-perms", type=click.Path(exists=True, dir_okay=False), default=None,
              help="Dangerous permission list (one per line).")
@click.option("--jobs", envvar="PREAPP_JOBS", type=int, default=os.cpu_count() or 1,
              show_default="logical CPUs", help="Per-APK worker threads.")
@click.option("--now", default=None, help="Clock override for staleness (Unix ms or ISO date).")
@click.option("--count-unprobed-cloud", is_flag=True,
              help="Count unvalidated cloud findings toward finding 8.")
@click.option("--tracker-count-mode", type=click.Choice(["pairs", "apps"]), default="pairs",
              show_default=True, help="Count (app, tracker) pairs or tracker-bearing apps for finding 7.")
@click.option("--probe", is_flag=True, help="Live-probe extracted cloud findings.")
@click.option("--probe-allowlist", type=click.Path(exists=True, dir_okay=False), default=None,
              help="Hosts allowed for live probing (required with --probe).")
@click.option("--probe-base-url", default=None, help="Override probe hosts (testing).")
@click.pass_context
def scan(ctx: click.Context, dumps, out, store, device_id, signatures, rules, vendor_map,
         dangerous_perms, jobs, now, count_unprobed_cloud, tracker_count_mode, probe,
         probe_allowlist, probe_base_url) -> None:
    """Analyze firmware DUMPS and write one report per device."""
    if device_id and len(dumps) > 1:
        raise click.UsageError("--device-id only applies to a single dump")
    actx = _build_context(signatures, rules, vendor_map, dangerous_perms, now,
                          count_unprobed_cloud, probe, probe_allowlist, probe_base_url)
    actx.tracker_count_mode = tracker_count_mode
    out_dir = Path(out)
    out_dir.mkdir(parents=True, exist_ok=True)
    dedup = DedupStore.load(store) if store else None

    exit_code = EXIT_OK
    for dump_path in dumps:
        try:
            dump = load_dump(dump_path, device_id)
        except (PreappError, ValueError, OSError) as exc:
            raise click.ClickException(f"{dump_path}: {exc}") from exc
        report = analysis.analyze_dump(dump, actx, jobs=max(1, jobs))
        _write_json(out_dir / f"{dump.device_id}.report.json", analysis.report_dict(report, actx))
        if dedup is not None:
            _update_store(dedup, report)
        if report.partial:
            exit_code = EXIT_PARTIAL
        click.echo(
            f"{dump.device_id}: {len(report.records)} apps, "
            f"{sum(1 for r in report.records if r.flagged)} flagged"
        )
    if dedup is not None:
        dedup.save()
    ctx.exit(exit_code)


def _update_store(dedup: DedupStore, report: analysis.DeviceReport) -> None:
    by_path = {r.relative_path: r for r in report.records}
    for entry in report.file_entries:
        payload = None
        record = by_path.get(entry.relative_path)
        if record is not None:
            findings = record.findings
            payload = {
                "package": record.package,
                "group_label": record.group_label,
                "vendor_class": record.vendor_class.value,
                "allow_backup": record.manifest.app_flags.allow_backup if record.manifest else None,
                "system_uid": bool(findings and "system_uid" in findings.flags),
                "cleartext": record.manifest.app_flags.uses_cleartext_traffic if record.manifest else None,
                "debuggable": record.manifest.app_flags.debuggable if record.manifest else None,
                "stale_2y": (
                    None if record.last_update_ms is None
                    else bool(findings and "stale_2y" in findings.flags)
                ),
                "tracker_ids": sorted(m.tracker_id for m in record.matches),
                "tracker_count_non_crash": findings.tracker_count_non_crash if findings else 0,
                "secret_kinds": sorted({s.kind for s in record.secrets}),
            }
        dedup_upsert(dedup, entry, payload)


@main.command()
@click.argument("reports", nargs=-1, required=True, type=click.Path(exists=True, dir_okay=False))
@click.option("--out", "-o", type=click.Path(file_okay=False), default=".", show_default=True)
@click.option("--coefficients", type=click.Path(exists=True, dir_okay=False), default=None,
              help="Scoring coefficient overrides (JSON).")
@click.option("--signatures", type=click.Path(exists=True, dir_okay=False), default=None,
              help="Tracker signature DB for statistics (JSON).")
@click.option("--normalization", type=click.Choice(["minmax", "max"]), default="minmax",
              show_default=True, help="Corpus normalization mode.")
def score(reports, out, coefficients, signatures, normalization) -> None:
    """Score a corpus of device REPORTS and write ranking + statistics."""
    out_dir = Path(out)
    out_dir.mkdir(parents=True, exist_ok=True)
    coeff = load_coefficients(coefficients)

    vectors: list[FindingVector] = []
    corpus_apps: list[tuple[str, list[TrackerMatch]]] = []
    for path in reports:
        with open(path, encoding="utf-8") as fh:
            payload = json.load(fh)
        vectors.append(FindingVector.from_dict(payload["vector"]))
        for record in payload.get("records", []):
            package = record.get("package") or record["sha256"]
            corpus_apps.append(
                (
                    package,
                    [
                        TrackerMatch(m["tracker_id"], m["matched_prefix"], m["evidence_descriptor"])
                        for m in record.get("tracker_matches", [])
                    ],
                )
            )

    warnings = []
    pool = [v for v in vectors if not v.low_coverage] or vectors
    if len(pool) == 1 and normalization == "minmax":
        warnings.append("degenerate normalization: single-device pool scores to 0")
    ranked = rank_devices(score_corpus(vectors, coeff, normalization=normalization))

    _write_json(out_dir / "scores.json", {
        "devices": [s.as_dict() for s in ranked],
        "warnings": warnings,
    })

    csv_buf = io.StringIO()
    writer = csv.writer(csv_buf, lineterminator="\n")
    writer.writerow(["device_id", "app_total", "total"])
    for dev in ranked:
        writer.writerow([dev.device_id, dev.app_total, f"{dev.total:.6f}"])
    (out_dir / "scores.csv").write_text(csv_buf.getvalue(), encoding="utf-8", newline="\n")

    stats: dict = {
        "low_coverage": sorted(v.device_id for v in vectors if v.low_coverage),
        "pearson_r": None,
        "pearson_note": None,
    }
    try:
        stats["pearson_r"] = pearson([(s.app_total, s.total) for s in ranked])
    except UndefinedCorrelation as exc:
        stats["pearson_note"] = str(exc)
    try:
        tracker_stats = tracker_statistics(corpus_apps, index_trackers(load_tracker_db(signatures)))
        stats["trackers"] = {
            "per_tracker_apps": tracker_stats.tracker_apps,
            "per_company": tracker_stats.company_trackers,
            "per_country_companies": tracker_stats.country_companies,
            "per_category": tracker_stats.category_trackers,
        }
    except PreappError as exc:
        stats["trackers_error"] = str(exc)
    _write_json(out_dir / "stats.json", stats)

    for dev in ranked:
        note = " (low coverage)" if dev.low_coverage else ""
        click.echo(f"{dev.device_id}: {dev.total:.2f}{note}")


@main.command()
@click.option("--store", envvar="PREAPP_STORE", required=True,
              type=click.Path(exists=True, dir_okay=False), help="Dedup store file.")
@click.option("--out", "-o", type=click.Path(dir_okay=False), default=None,
              help="Write statistics JSON here instead of stdout.")
def stats(store, out) -> None:
    """Corpus statistics over a populated dedup store."""
    dedup = DedupStore.load(store)
    kinds = {kind.value: 0 for kind in FileKind}
    apks = []
    for record in dedup.records.values():
        kinds[record.get("kind", "other")] += 1
        if record.get("kind") == "apk" and record.get("apk"):
            apks.append(record["apk"])

    stale_known = [a for a in apks if a.get("stale_2y") is not None]
    stale_count = sum(1 for a in stale_known if a["stale_2y"])
    backup_by_vendor: dict[str, int] = {}
    trackers_by_package: dict[str, set[str]] = {}
    for apk in apks:
        if apk.get("allow_backup") is True:
            label = apk.get("group_label") or "unknown"
            backup_by_vendor[label] = backup_by_vendor.get(label, 0) + 1
        package = apk.get("package")
        if package:
            trackers_by_package.setdefault(package, set()).update(apk.get("tracker_ids", []))

    payload = {
        "files_total": len(dedup.records),
        "by_kind": kinds,
        "apks_with_update_metadata": len(stale_known),
        "stale_2y_count": stale_count,
        "stale_2y_fraction": (stale_count / len(apks)) if apks else 0.0,
        "allow_backup_by_vendor": dict(sorted(backup_by_vendor.items())),
        "trackers_per_app": {
            pkg: len(ids) for pkg, ids in sorted(trackers_by_package.items()) if ids
        },
    }
    text = json.dumps(payload, indent=2, sort_keys=True) + "\n"
    if out:
        Path(out).write_text(text, encoding="utf-8", newline="\n")
    else:
        click.echo(text, nl=False)


@main.command()
@click.argument("report", type=click.Path(exists=True, dir_okay=False))
@click.option("--out", "-o", type=click.Path(file_okay=False), default=".", show_default=True)
@click.option("--probe-allowlist", required=True, type=click.Path(exists=True, dir_okay=False),
              help="Hosts allowed for live probing.")
@click.option("--probe-base-url", default=None, help="Override probe hosts (testing).")
@click.option("--catalog", type=click.Path(exists=True, dir_okay=False), default=None,
              help="Maps SKU catalog (JSON).")
def probe(report, out, probe_allowlist, probe_base_url, catalog) -> None:
    """Probe the cloud findings recorded in an existing REPORT."""
    with open(report, encoding="utf-8") as fh:
        payload = json.load(fh)
    findings = [
        SecretFinding(s["kind"], s["value"], s["source_entry"], app_hash=record["sha256"])
        for record in payload.get("records", [])
        for s in record.get("secrets", [])
    ]
    sku_catalog = prober.load_sku_catalog(catalog)
    verdicts = prober.probe_findings(
        findings,
        enabled=True,
        catalog=sku_catalog,
        allowlist=prober.load_allowlist(probe_allowlist),
        base_url=probe_base_url,
    )
    exposure = prober.estimate_exposure(verdicts, sku_catalog)
    out_dir = Path(out)
    out_dir.mkdir(parents=True, exist_ok=True)
    device_id = payload.get("device", {}).get("device_id", "device")
    _write_json(out_dir / f"{device_id}.probe.json", {
        "device_id": device_id,
        "verdicts": sorted(
            (v.as_dict() for v in verdicts),
            key=lambda v: (v["target_kind"], v["target_value"], v["sku"] or ""),
        ),
        "maps_exposure_per_1000": exposure,
    })
    click.echo(f"{device_id}: {len(verdicts)} verdicts, ${exposure:g}/1000 requests exposed")


@main.group()
def fixtures_cmd() -> None:
    """Synthetic corpus helpers."""


# click derives the group name from the function name; expose it as "fixtures".
main.add_command(fixtures_cmd, name="fixtures")


@fixtures_cmd.command("gen")
@click.argument("out_dir", type=click.Path(file_okay=False))
@click.option("--devices", type=int, default=12, show_default=True)
@click.option("--apps-per-device", type=int, default=25, show_default=True)
@click.option("--seed", type=int, default=20260101, show_default=True)
@click.option("--now", default=str(fixtures.DEFAULT_NOW_MS), show_default=True,
              help="Plant clock (Unix ms or ISO date).")
def fixtures_gen(out_dir, devices, apps_per_device, seed, now) -> None:
    """Generate a planted corpus with a known ground truth (plant.json)."""
    plant = fixtures.generate_corpus(
        out_dir, devices=devices, apps_per_device=apps_per_device,
        seed=seed, now_ms=_parse_now(now),
    )
    click.echo(f"{len(plant['devices'])} devices x {apps_per_device} apps under {out_dir}")


if __name__ == "__main__":
    main()
