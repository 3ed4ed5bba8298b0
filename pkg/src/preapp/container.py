"""Firmware dump enumeration, APK container access, and the content-hash store.

A "dump" is an offline directory tree mirroring a device's partitions
(system, odm, oem, vendor, product), optionally accompanied by a
``device.json`` sidecar with device identity and per-app install/update
metadata.
"""

from __future__ import annotations

import hashlib
import json
import logging
import os
import struct
import zlib
from dataclasses import dataclass, field
from enum import Enum
from pathlib import Path

from .errors import ContainerError

log = logging.getLogger(__name__)

PARTITION_ROOTS = ("system", "odm", "oem", "vendor", "product")
DEVICE_META_NAME = "device.json"

# Sentinel digest for files that could not be read; keeps the 64-hex-char
# shape without claiming any content.
UNREADABLE_DIGEST = "0" * 64

MANIFEST_ENTRY = "AndroidManifest.xml"

_EOCD_SIG = b"PK\x05\x06"
_CDH_SIG = b"PK\x01\x02"
_LFH_SIG = b"PK\x03\x04"
_ELF_MAGIC = b"\x7fELF"
_PEM_MAGIC = b"-----BEGIN "


class FileKind(str, Enum):
    APK = "apk"
    CERTIFICATE = "certificate"
    NATIVE_LIBRARY = "native_library"
    OTHER = "other"


@dataclass
class AppMeta:
    """Install metadata for one package, from the device.json sidecar."""

    package: str
    first_install_ms: int | None = None
    last_update_ms: int | None = None


@dataclass
class FirmwareDump:
    """A firmware dump directory plus the device identity it belongs to."""

    root_path: Path
    device_id: str
    manufacturer: str = ""
    model: str = ""
    product: str = ""
    apps: dict[str, AppMeta] = field(default_factory=dict)

    def __post_init__(self) -> None:
        self.root_path = Path(self.root_path)
        if not self.device_id:
            raise ValueError("device_id must be non-empty")
        if not self.root_path.is_dir():
            raise ContainerError(f"dump root is not a readable directory: {self.root_path}")


def load_dump(root: str | Path, device_id: str | None = None) -> FirmwareDump:
    """Build a FirmwareDump from a directory, reading device.json when present.

    Without a sidecar, ``device_id`` must be supplied by the caller.
    """
    root = Path(root)
    meta_path = root / DEVICE_META_NAME
    manufacturer = model = product = ""
    apps: dict[str, AppMeta] = {}
    sidecar_id = None
    if meta_path.is_file():
        with open(meta_path, encoding="utf-8") as fh:
            raw = json.load(fh)
        sidecar_id = raw.get("device_id")
        manufacturer = raw.get("manufacturer", "")
        model = raw.get("model", "")
        product = raw.get("product", "")
        for app in raw.get("apps", []):
            meta = AppMeta(
                package=app["package"],
                first_install_ms=app.get("first_install_ms"),
                last_update_ms=app.get("last_update_ms"),
            )
            apps[meta.package] = meta
    resolved = device_id or sidecar_id
    if not resolved:
        raise ValueError(f"no device_id given and no {DEVICE_META_NAME} sidecar in {root}")
    return FirmwareDump(
        root_path=root,
        device_id=resolved,
        manufacturer=manufacturer,
        model=model,
        product=product,
        apps=apps,
    )


@dataclass
class FileEntry:
    """One regular file found in a dump."""

    relative_path: str
    size_bytes: int
    sha256: str
    kind: FileKind

    def __post_init__(self) -> None:
        if len(self.sha256) != 64:
            raise ValueError(f"sha256 must be 64 hex chars, got {self.sha256!r}")


# ---------------------------------------------------------------------------
# ZIP container
# ---------------------------------------------------------------------------

@dataclass
class ZipArchive:
    """Entries decoded from a ZIP central directory plus per-entry errors."""

    entries: list[tuple[str, bytes]]
    errors: list[str]


def _find_eocd(data: bytes) -> tuple[int, int, int]:
    """Locate the end-of-central-directory record.

    Returns (entry_count, cd_size, cd_offset). The record is searched from
    the end of the file over the maximal comment span (65535 bytes).
    """
    hi = len(data) - 22
    lo = max(0, hi - 65535)
    pos = data.rfind(_EOCD_SIG, lo, hi + 4)
    if pos < 0:
        raise ContainerError("no end-of-central-directory record")
    total_entries, cd_size, cd_offset = struct.unpack_from("<HII", data, pos + 10)
    return total_entries, cd_size, cd_offset


def read_zip(data: bytes) -> ZipArchive:
    """Decode every central-directory entry of an in-memory ZIP.

    Stored and DEFLATE entries are supported; names are decoded as UTF-8
    with invalid bytes replaced. Entries whose payload cannot be recovered
    (bad method, CRC mismatch, truncation) are reported in ``errors`` and
    skipped; the remaining entries are still returned.
    """
    if len(data) < 22:
        raise ContainerError("file too small to be a ZIP archive")
    total_entries, cd_size, cd_offset = _find_eocd(data)

    entries: list[tuple[str, bytes]] = []
    errors: list[str] = []
    off = cd_offset
    for _ in range(total_entries):
        if off + 46 > len(data) or data[off : off + 4] != _CDH_SIG:
            raise ContainerError(f"central directory corrupt at offset {off}")
        (
            method,
            crc,
            csize,
            usize,
            name_len,
            extra_len,
            comment_len,
            lfh_off,
        ) = struct.unpack_from("<10xH4xIIIHHH8xI", data, off)
        name = data[off + 46 : off + 46 + name_len].decode("utf-8", "replace")
        off += 46 + name_len + extra_len + comment_len
        try:
            entries.append((name, _read_entry_data(data, lfh_off, method, crc, csize, usize)))
        except ContainerError as exc:
            log.warning("zip entry %r unreadable: %s", name, exc)
            errors.append(f"{name}: {exc}")
    return ZipArchive(entries=entries, errors=errors)


def _read_entry_data(data: bytes, lfh_off: int, method: int, crc: int, csize: int, usize: int) -> bytes:
    if lfh_off + 30 > len(data) or data[lfh_off : lfh_off + 4] != _LFH_SIG:
        raise ContainerError(f"local header missing at offset {lfh_off}")
    name_len, extra_len = struct.unpack_from("<HH", data, lfh_off + 26)
    start = lfh_off + 30 + name_len + extra_len
    raw = data[start : start + csize]
    if len(raw) != csize:
        raise ContainerError("entry data truncated")
    if method == 0:
        out = raw
    elif method == 8:
        try:
            out = zlib.decompress(raw, -15)
        except zlib.error as exc:
            raise ContainerError(f"deflate failure: {exc}") from exc
    else:
        raise ContainerError(f"unsupported compression method {method}")
    if len(out) != usize:
        raise ContainerError(f"size mismatch: expected {usize}, got {len(out)}")
    if zlib.crc32(out) & 0xFFFFFFFF != crc:
        raise ContainerError("CRC mismatch")
    return out


def read_zip_entries(apk: str | Path | bytes) -> list[tuple[str, bytes]]:
    """Return (entry_name, raw_bytes) for every readable entry of an APK."""
    data = apk if isinstance(apk, bytes) else Path(apk).read_bytes()
    return read_zip(data).entries


def zip_entry_names(data: bytes) -> list[str]:
    """Entry names from the central directory, without touching payloads."""
    if len(data) < 22:
        raise ContainerError("file too small to be a ZIP archive")
    total_entries, _cd_size, cd_offset = _find_eocd(data)
    names = []
    off = cd_offset
    for _ in range(total_entries):
        if off + 46 > len(data) or data[off : off + 4] != _CDH_SIG:
            raise ContainerError(f"central directory corrupt at offset {off}")
        name_len, extra_len, comment_len = struct.unpack_from("<HHH", data, off + 28)
        names.append(data[off + 46 : off + 46 + name_len].decode("utf-8", "replace"))
        off += 46 + name_len + extra_len + comment_len
    return names


# ---------------------------------------------------------------------------
# Scanning and hashing
# ---------------------------------------------------------------------------

def hash_file(path: str | Path) -> str:
    """SHA-256 of the raw file bytes, lowercase hex."""
    h = hashlib.sha256()
    with open(path, "rb") as fh:
        for block in iter(lambda: fh.read(1 << 20), b""):
            h.update(block)
    return h.hexdigest()


def classify_file(path: str | Path, relative_path: str, head: bytes | None = None) -> FileKind:
    """Classify by magic bytes (never by extension); apk requires a manifest entry."""
    path = Path(path)
    if head is None:
        with open(path, "rb") as fh:
            head = fh.read(16)
    if head[:4] == _ELF_MAGIC:
        return FileKind.NATIVE_LIBRARY
    if head[:2] == b"PK":
        try:
            names = zip_entry_names(path.read_bytes())
        except ContainerError:
            return FileKind.OTHER
        return FileKind.APK if MANIFEST_ENTRY in names else FileKind.OTHER
    if head.startswith(_PEM_MAGIC):
        return FileKind.CERTIFICATE
    # DER SEQUENCE with multi-byte length: typical for bare certificates.
    if len(head) >= 2 and head[0] == 0x30 and head[1] in (0x81, 0x82, 0x83):
        return FileKind.CERTIFICATE
    if "META-INF" in Path(relative_path).parts:
        return FileKind.CERTIFICATE
    return FileKind.OTHER


def scan_dump(dump: FirmwareDump) -> list[FileEntry]:
    """Enumerate every regular file under the dump root.

    Output is sorted lexicographically by relative path, so it is a pure
    function of directory content. Unreadable files are recorded with
    kind=other and the UNREADABLE_DIGEST sentinel, and the scan continues.
    """
    root = dump.root_path
    if not root.is_dir():
        raise ContainerError(f"dump root unreadable: {root}")
    paths: list[str] = []
    for cur, dirs, files in os.walk(root):
        dirs.sort()
        for name in sorted(files):
            full = Path(cur) / name
            if full.is_symlink() or not full.is_file():
                continue
            paths.append(full.relative_to(root).as_posix())
    entries = []
    for rel in sorted(paths):
        full = root / rel
        try:
            digest = hash_file(full)
            kind = classify_file(full, rel)
            size = full.stat().st_size
        except OSError as exc:
            log.warning("unreadable file %s: %s", full, exc)
            entries.append(FileEntry(rel, 0, UNREADABLE_DIGEST, FileKind.OTHER))
            continue
        entries.append(FileEntry(rel, size, digest, kind))
    return entries


# ---------------------------------------------------------------------------
# Dedup store
# ---------------------------------------------------------------------------

class UpsertResult(Enum):
    INSERTED = "inserted"
    ALREADY_PRESENT = "already_present"


class DedupStore:
    """Content-addressed record store, persisted as one JSON object per line.

    At most one record exists per sha256. Saving writes to a temp file and
    renames it into place, so a crash never leaves a half-written store.
    """

    def __init__(self, path: str | Path | None = None):
        self.path = Path(path) if path is not None else None
        self.records: dict[str, dict] = {}

    @classmethod
    def load(cls, path: str | Path) -> "DedupStore":
        store = cls(path)
        path = Path(path)
        if path.is_file():
            with open(path, encoding="utf-8") as fh:
                for lineno, line in enumerate(fh, 1):
                    line = line.strip()
                    if not line:
                        continue
                    try:
                        record = json.loads(line)
                    except json.JSONDecodeError as exc:
                        raise ContainerError(f"{path}:{lineno}: bad store record: {exc}") from exc
                    store.records[record["sha256"]] = record
        return store

    def upsert(self, record: dict) -> UpsertResult:
        digest = record["sha256"]
        if digest in self.records:
            return UpsertResult.ALREADY_PRESENT
        self.records[digest] = record
        return UpsertResult.INSERTED

    def save(self, path: str | Path | None = None) -> None:
        target = Path(path) if path is not None else self.path
        if target is None:
            raise ValueError("no store path configured")
        tmp = target.with_name(target.name + ".tmp")
        with open(tmp, "w", encoding="utf-8", newline="\n") as fh:
            for digest in sorted(self.records):
                fh.write(json.dumps(self.records[digest], sort_keys=True) + "\n")
        os.replace(tmp, target)


def dedup_upsert(store: DedupStore, entry: FileEntry, analysis: dict | None = None) -> UpsertResult:
    """Insert a FileEntry (plus optional analysis payload); idempotent per hash."""
    record = {
        "sha256": entry.sha256,
        "path": entry.relative_path,
        "size": entry.size_bytes,
        "kind": entry.kind.value,
    }
    if analysis:
        record["apk"] = analysis
    return store.upsert(record)
