"""Synthetic APK generators for tests and benchmark corpora.

Everything here is the write-side counterpart of the parsers: a binary
XML encoder, a minimal DEX writer, a DER certificate/PKCS#7 builder, a
ZIP/APK assembler (stdlib zipfile, deliberately not our own reader), and
a corpus generator that plants findings with a known ground truth.

Fixture certificates are self-signed around a fixed fake key; they are
parseable DER and nothing more.
"""

from __future__ import annotations

import hashlib
import io
import json
import struct
import zipfile
import zlib
from dataclasses import dataclass, field
from pathlib import Path
from random import Random
from typing import Mapping, Sequence

from .axml import ANDROID_ATTR_RES_IDS, ANDROID_NS, NO_INDEX, ResRef
from .detectors import shannon_entropy
from .manifest import AppFlags, Component, ComponentKind, ManifestModel

# ---------------------------------------------------------------------------
# Binary XML encoder
# ---------------------------------------------------------------------------

_CHUNK_XML = 0x0003
_CHUNK_POOL = 0x0001
_CHUNK_RESMAP = 0x0180
_CHUNK_NS_START = 0x0100
_CHUNK_NS_END = 0x0101
_CHUNK_EL_START = 0x0102
_CHUNK_EL_END = 0x0103
_UTF8_FLAG = 1 << 8


@dataclass
class _El:
    name: str
    ns: str | None = None
    attrs: list[tuple[str | None, str, object]] = field(default_factory=list)
    children: list["_El"] = field(default_factory=list)


class _PoolBuilder:
    def __init__(self) -> None:
        self.strings: list[str] = []
        self.index: dict[str, int] = {}
        self.res_ids: list[int] = []

    def intern(self, text: str) -> int:
        if text not in self.index:
            self.index[text] = len(self.strings)
            self.strings.append(text)
        return self.index[text]

    def intern_mapped(self, name: str, res_id: int) -> int:
        if name in self.index:
            return self.index[name]
        if len(self.res_ids) != len(self.strings):
            raise ValueError("mapped names must be interned before any other string")
        idx = self.intern(name)
        self.res_ids.append(res_id)
        return idx

    def encode(self, utf8: bool) -> bytes:
        offsets = []
        blob = bytearray()
        for text in self.strings:
            offsets.append(len(blob))
            if utf8:
                data = text.encode("utf-8")
                utf16_units = len(text.encode("utf-16-le")) // 2
                blob += _varlen8(utf16_units) + _varlen8(len(data)) + data + b"\x00"
            else:
                data = text.encode("utf-16-le")
                units = len(data) // 2
                if units > 0x7FFF:
                    blob += struct.pack("<HH", 0x8000 | (units >> 16), units & 0xFFFF)
                else:
                    blob += struct.pack("<H", units)
                blob += data + b"\x00\x00"
        while len(blob) % 4:
            blob.append(0)
        count = len(self.strings)
        flags = _UTF8_FLAG if utf8 else 0
        strings_start = 28 + 4 * count
        total = strings_start + len(blob)
        header = struct.pack("<HHIIIIII", _CHUNK_POOL, 28, total, count, 0, flags, strings_start, 0)
        return header + struct.pack(f"<{count}I", *offsets) + bytes(blob)


def _varlen8(n: int) -> bytes:
    if n > 0x7FFF:
        raise ValueError(f"string too long for pool encoding: {n}")
    if n > 0x7F:
        return bytes([0x80 | (n >> 8), n & 0xFF])
    return bytes([n])


def encode_axml_tree(
    root: _El,
    namespaces: Mapping[str, str] | None = None,
    utf8_pool: bool = True,
) -> bytes:
    """Encode a generic element tree into binary XML bytes."""
    namespaces = dict(namespaces or {"android": ANDROID_NS})
    pool = _PoolBuilder()

    def walk_mapped(el: _El) -> None:
        for ns, name, _value in el.attrs:
            if ns == ANDROID_NS and name in ANDROID_ATTR_RES_IDS:
                pool.intern_mapped(name, ANDROID_ATTR_RES_IDS[name])
        for child in el.children:
            walk_mapped(child)

    def walk_rest(el: _El) -> None:
        if el.ns:
            pool.intern(el.ns)
        pool.intern(el.name)
        for ns, name, value in el.attrs:
            if ns:
                pool.intern(ns)
            pool.intern(name)
            if isinstance(value, str):
                pool.intern(value)
        for child in el.children:
            walk_rest(child)

    walk_mapped(root)
    for prefix, uri in namespaces.items():
        pool.intern(prefix)
        pool.intern(uri)
    walk_rest(root)

    line = [1]
    body = bytearray()

    def emit_element(el: _El) -> None:
        attrs = bytearray()
        for ns, name, value in el.attrs:
            ns_ix = pool.intern(ns) if ns else NO_INDEX
            name_ix = pool.intern(name)
            dtype, data, raw_ix = _encode_value(value, pool)
            attrs += struct.pack("<IIIHBBI", ns_ix, name_ix, raw_ix, 8, 0, dtype, data)
        ns_ix = pool.intern(el.ns) if el.ns else NO_INDEX
        name_ix = pool.intern(el.name)
        body.extend(
            struct.pack(
                "<HHIII", _CHUNK_EL_START, 16, 36 + len(attrs), line[0], NO_INDEX
            )
        )
        body.extend(struct.pack("<IIHHHHHH", ns_ix, name_ix, 20, 20, len(el.attrs), 0, 0, 0))
        body.extend(attrs)
        line[0] += 1
        for child in el.children:
            emit_element(child)
        body.extend(struct.pack("<HHIII", _CHUNK_EL_END, 16, 24, line[0], NO_INDEX))
        body.extend(struct.pack("<II", ns_ix, name_ix))

    for prefix, uri in namespaces.items():
        body.extend(struct.pack("<HHIII", _CHUNK_NS_START, 16, 24, line[0], NO_INDEX))
        body.extend(struct.pack("<II", pool.intern(prefix), pool.intern(uri)))
    emit_element(root)
    for prefix, uri in reversed(list(namespaces.items())):
        body.extend(struct.pack("<HHIII", _CHUNK_NS_END, 16, 24, line[0], NO_INDEX))
        body.extend(struct.pack("<II", pool.intern(prefix), pool.intern(uri)))

    pool_chunk = pool.encode(utf8_pool)
    resmap_chunk = b""
    if pool.res_ids:
        resmap_chunk = struct.pack("<HHI", _CHUNK_RESMAP, 8, 8 + 4 * len(pool.res_ids))
        resmap_chunk += struct.pack(f"<{len(pool.res_ids)}I", *pool.res_ids)
    payload = pool_chunk + resmap_chunk + bytes(body)
    return struct.pack("<HHI", _CHUNK_XML, 8, 8 + len(payload)) + payload


def _encode_value(value: object, pool: _PoolBuilder) -> tuple[int, int, int]:
    if isinstance(value, bool):
        return 0x12, 0xFFFFFFFF if value else 0, NO_INDEX
    if isinstance(value, int):
        return 0x10, value & 0xFFFFFFFF, NO_INDEX
    if isinstance(value, str):
        idx = pool.intern(value)
        return 0x03, idx, idx
    if isinstance(value, ResRef):
        return 0x01, value.rid, NO_INDEX
    raise TypeError(f"cannot encode attribute value {value!r}")


def _manifest_tree(model: ManifestModel) -> _El:
    a = ANDROID_NS
    root = _El("manifest", attrs=[(None, "package", model.package)])
    if model.shared_user_id is not None:
        root.attrs.append((a, "sharedUserId", model.shared_user_id))
    if model.min_sdk is not None or model.target_sdk is not None:
        sdk = _El("uses-sdk")
        if model.min_sdk is not None:
            sdk.attrs.append((a, "minSdkVersion", model.min_sdk))
        if model.target_sdk is not None:
            sdk.attrs.append((a, "targetSdkVersion", model.target_sdk))
        root.children.append(sdk)
    for perm in model.uses_permissions:
        root.children.append(_El("uses-permission", attrs=[(a, "name", perm)]))
    for name, level in model.defines_permissions:
        el = _El("permission", attrs=[(a, "name", name)])
        if level is not None:
            el.attrs.append((a, "protectionLevel", level))
        root.children.append(el)

    app = _El("application")
    flags = model.app_flags
    if flags.allow_backup is not None:
        app.attrs.append((a, "allowBackup", flags.allow_backup))
    if flags.debuggable is not None:
        app.attrs.append((a, "debuggable", flags.debuggable))
    if flags.uses_cleartext_traffic is not None:
        app.attrs.append((a, "usesCleartextTraffic", flags.uses_cleartext_traffic))
    for comp in model.components:
        el = _El(comp.kind.value, attrs=[(a, "name", comp.name)])
        if comp.exported_attr is not None:
            el.attrs.append((a, "exported", comp.exported_attr))
        if comp.required_permission is not None:
            el.attrs.append((a, "permission", comp.required_permission))
        if comp.has_intent_filter:
            fil = _El("intent-filter")
            fil.children.append(
                _El("action", attrs=[(a, "name", "android.intent.action.MAIN")])
            )
            el.children.append(fil)
        app.children.append(el)
    root.children.append(app)
    return root


def encode_axml(model: ManifestModel, utf8_pool: bool = True) -> bytes:
    """Binary-XML bytes for a manifest model (inverse of decode+extract)."""
    return encode_axml_tree(_manifest_tree(model), utf8_pool=utf8_pool)


# ---------------------------------------------------------------------------
# DEX writer
# ---------------------------------------------------------------------------

_TYPE_SHAPE = ("V", "Z", "B", "S", "C", "I", "J", "F", "D")


def _looks_like_descriptor(text: str) -> bool:
    core = text.lstrip("[")
    return core in _TYPE_SHAPE or (core.startswith("L") and core.endswith(";") and len(core) > 2)


def encode_mutf8(text: str) -> bytes:
    out = bytearray()
    for ch in text:
        cp = ord(ch)
        if cp == 0:
            out += b"\xc0\x80"
        elif cp < 0x80:
            out.append(cp)
        elif cp < 0x800:
            out += bytes([0xC0 | (cp >> 6), 0x80 | (cp & 0x3F)])
        elif cp < 0x10000:
            out += bytes([0xE0 | (cp >> 12), 0x80 | ((cp >> 6) & 0x3F), 0x80 | (cp & 0x3F)])
        else:
            cp -= 0x10000
            for unit in (0xD800 | (cp >> 10), 0xDC00 | (cp & 0x3FF)):
                out += bytes(
                    [0xE0 | (unit >> 12), 0x80 | ((unit >> 6) & 0x3F), 0x80 | (unit & 0x3F)]
                )
    return bytes(out)


def _uleb128(n: int) -> bytes:
    out = bytearray()
    while True:
        byte = n & 0x7F
        n >>= 7
        if n:
            out.append(byte | 0x80)
        else:
            out.append(byte)
            return bytes(out)


def write_fixture_dex(
    strings: Sequence[str], type_indices: Sequence[int] = (), version: str = "035"
) -> bytes:
    """Assemble a parseable DEX carrying the given string and type tables.

    ``type_indices`` must reference descriptor-shaped strings. The Adler-32
    checksum and SHA-1 signature header fields are filled in properly.
    """
    for idx in type_indices:
        if not 0 <= idx < len(strings):
            raise ValueError(f"type index {idx} out of range")
        if not _looks_like_descriptor(strings[idx]):
            raise ValueError(f"string {idx} is not a type descriptor: {strings[idx]!r}")

    header_len = 112
    string_ids_off = header_len if strings else 0
    type_ids_off = header_len + 4 * len(strings) if type_indices else 0
    data_off = header_len + 4 * len(strings) + 4 * len(type_indices)

    data = bytearray()
    string_offsets = []
    for text in strings:
        string_offsets.append(data_off + len(data))
        encoded = encode_mutf8(text)
        units = sum(1 if ord(c) < 0x10000 else 2 for c in text)
        data += _uleb128(units) + encoded + b"\x00"

    total = data_off + len(data)
    out = bytearray(total)
    out[0:8] = b"dex\n" + version.encode("ascii") + b"\x00"
    struct.pack_into("<I", out, 0x20, total)
    struct.pack_into("<I", out, 0x24, header_len)
    struct.pack_into("<I", out, 0x28, 0x12345678)
    struct.pack_into("<II", out, 0x38, len(strings), string_ids_off)
    struct.pack_into("<II", out, 0x40, len(type_indices), type_ids_off)
    struct.pack_into("<II", out, 0x68, len(data), data_off)
    for i, off in enumerate(string_offsets):
        struct.pack_into("<I", out, header_len + 4 * i, off)
    for i, idx in enumerate(type_indices):
        struct.pack_into("<I", out, header_len + 4 * len(strings) + 4 * i, idx)
    out[data_off:total] = data

    out[12:32] = hashlib.sha1(out[32:]).digest()
    struct.pack_into("<I", out, 8, zlib.adler32(bytes(out[12:])) & 0xFFFFFFFF)
    return bytes(out)


# ---------------------------------------------------------------------------
# DER certificate / PKCS#7 builder
# ---------------------------------------------------------------------------

_DN_OIDS = {
    "CN": "2.5.4.3",
    "serialNumber": "2.5.4.5",
    "C": "2.5.4.6",
    "L": "2.5.4.7",
    "ST": "2.5.4.8",
    "O": "2.5.4.10",
    "OU": "2.5.4.11",
    "emailAddress": "1.2.840.113549.1.9.1",
}

# Fixed fake RSA modulus; fixtures only promise parseable DER.
_FAKE_MODULUS = int.from_bytes(hashlib.sha512(b"preapp fixture key").digest(), "big") | 1


def _der(tag: int, content: bytes) -> bytes:
    n = len(content)
    if n < 0x80:
        return bytes([tag, n]) + content
    size = (n.bit_length() + 7) // 8
    return bytes([tag, 0x80 | size]) + n.to_bytes(size, "big") + content


def _der_seq(*parts: bytes) -> bytes:
    return _der(0x30, b"".join(parts))


def _der_set(*parts: bytes) -> bytes:
    return _der(0x31, b"".join(parts))


def _der_int(n: int) -> bytes:
    size = max(1, (n.bit_length() + 8) // 8)
    return _der(0x02, n.to_bytes(size, "big"))


def _der_oid(dotted: str) -> bytes:
    parts = [int(p) for p in dotted.split(".")]
    body = bytearray([40 * parts[0] + parts[1]])
    for value in parts[2:]:
        chunk = bytearray([value & 0x7F])
        value >>= 7
        while value:
            chunk.insert(0, 0x80 | (value & 0x7F))
            value >>= 7
        body += chunk
    return _der(0x06, bytes(body))


def _der_name(rdn: Sequence[tuple[str, str]]) -> bytes:
    parts = []
    for key, value in rdn:
        oid = _DN_OIDS.get(key, key)
        parts.append(
            _der_set(_der_seq(_der_oid(oid), _der(0x0C, value.encode("utf-8"))))
        )
    return _der_seq(*parts)


def build_certificate(
    issuer: Sequence[tuple[str, str]], subject: Sequence[tuple[str, str]] | None = None
) -> bytes:
    """Self-signed-looking DER certificate with the requested issuer DN."""
    subject = issuer if subject is None else subject
    serial = int.from_bytes(hashlib.sha256(repr(issuer).encode()).digest()[:8], "big")
    algo = _der_seq(_der_oid("1.2.840.113549.1.1.11"), _der(0x05, b""))
    validity = _der_seq(
        _der(0x17, b"200101000000Z"), _der(0x17, b"400101000000Z")
    )
    spki = _der_seq(
        _der_seq(_der_oid("1.2.840.113549.1.1.1"), _der(0x05, b"")),
        _der(0x03, b"\x00" + _der_seq(_der_int(_FAKE_MODULUS), _der_int(65537))),
    )
    tbs = _der_seq(
        _der(0xA0, _der_int(2)),
        _der_int(serial),
        algo,
        _der_name(issuer),
        validity,
        _der_name(subject),
        spki,
    )
    signature = _der(0x03, b"\x00" + b"\xab" * 32)
    return _der_seq(tbs, algo, signature)


def build_pkcs7(cert_der: bytes) -> bytes:
    """Minimal PKCS#7 SignedData wrapper around one certificate."""
    signed_data = _der_seq(
        _der_int(1),
        _der_set(_der_seq(_der_oid("2.16.840.1.101.3.4.2.1"), _der(0x05, b""))),
        _der_seq(_der_oid("1.2.840.113549.1.7.1")),
        _der(0xA0, cert_der),
        _der_set(),
    )
    return _der_seq(_der_oid("1.2.840.113549.1.7.2"), _der(0xA0, signed_data))


# ---------------------------------------------------------------------------
# APK assembly
# ---------------------------------------------------------------------------

_FIXED_DATE = (1980, 1, 1, 0, 0, 0)  # keeps fixture bytes reproducible


def build_fixture_apk(
    manifest: ManifestModel | bytes | None,
    dex: bytes | Sequence[bytes] | None = None,
    signer: Sequence[tuple[str, str]] | Mapping[str, str] | None = None,
    extra_entries: Mapping[str, bytes] | None = None,
    utf8_pool: bool = True,
    compress: bool = True,
) -> bytes:
    """ZIP up a synthetic APK from its parts.

    ``manifest`` may be a model (encoded here) or pre-encoded bytes;
    ``dex`` one blob or a sequence mapped to classes.dex, classes2.dex…;
    ``signer`` an issuer DN that lands in META-INF/CERT.RSA.
    """
    buf = io.BytesIO()
    method = zipfile.ZIP_DEFLATED if compress else zipfile.ZIP_STORED
    with zipfile.ZipFile(buf, "w", method) as zf:

        def add(name: str, blob: bytes) -> None:
            info = zipfile.ZipInfo(name, date_time=_FIXED_DATE)
            info.compress_type = method
            zf.writestr(info, blob)

        if manifest is not None:
            blob = manifest if isinstance(manifest, bytes) else encode_axml(manifest, utf8_pool)
            add("AndroidManifest.xml", blob)
        if dex is not None:
            blobs = [dex] if isinstance(dex, (bytes, bytearray)) else list(dex)
            for i, blob in enumerate(blobs):
                add("classes.dex" if i == 0 else f"classes{i + 1}.dex", bytes(blob))
        if signer is not None:
            rdn = list(signer.items()) if isinstance(signer, Mapping) else list(signer)
            add("META-INF/MANIFEST.MF", b"Manifest-Version: 1.0\r\n\r\n")
            add("META-INF/CERT.SF", b"Signature-Version: 1.0\r\n\r\n")
            add("META-INF/CERT.RSA", build_pkcs7(build_certificate(rdn)))
        for name, blob in (extra_entries or {}).items():
            add(name, blob)
    return buf.getvalue()


# ---------------------------------------------------------------------------
# Planted corpus generation
# ---------------------------------------------------------------------------

DEFAULT_NOW_MS = 1767225600000  # 2026-01-01T00:00:00Z
_DAY_MS = 24 * 60 * 60 * 1000

# (tracker_id, planted class prefix, counts toward finding 7) - frozen copies
# of bundled signature facts so corpus expectations stay independent of the
# live DB file.
PLANT_TRACKERS = (
    ("google-firebase-analytics", "Lcom/google/firebase/analytics/", True),
    ("facebook-ads", "Lcom/facebook/ads/", True),
    ("appsflyer", "Lcom/appsflyer/", True),
    ("yandex-appmetrica", "Lcom/yandex/metrica/", True),
    ("baidu-location", "Lcom/baidu/location/", True),
    ("adjust", "Lcom/adjust/sdk/", True),
    ("google-crashlytics", "Lcom/crashlytics/", False),
    ("tencent-bugly", "Lcom/tencent/bugly/", False),
)

_MANUFACTURERS = (
    "Acmemobile", "Bforge", "Celltrix", "Dexon", "Elphone", "Fonix",
    "Gizmotek", "Hypercell", "Ionofone", "Jaxtel", "Kortex", "Lunatel",
)

_THIRD_PARTY_ISSUERS = (
    (("C", "US"), ("O", "Facebook"), ("CN", "Facebook Corporation")),
    (("C", "US"), ("O", "TrackCo Inc"), ("CN", "TrackCo Mobile")),
    (("C", "CN"), ("O", "Social Media Corp"), ("CN", "SMC Android")),
)

_DANGEROUS_POOL = (
    "android.permission.READ_CONTACTS",
    "android.permission.ACCESS_FINE_LOCATION",
    "android.permission.RECORD_AUDIO",
    "android.permission.READ_SMS",
    "android.permission.CAMERA",
    "android.permission.READ_PHONE_STATE",
)

_BENIGN_POOL = (
    "android.permission.INTERNET",
    "android.permission.ACCESS_NETWORK_STATE",
    "android.permission.BLUETOOTH",
    "android.permission.VIBRATE",
)

_CHARS_GMAPS = "ABCDEFGHIJKLMNOPQRSTUVWXYZabcdefghijklmnopqrstuvwxyz0123456789-_"
_CHARS_AWS_ID = "ABCDEFGHIJKLMNOPQRSTUVWXYZ234567"
_CHARS_AWS_SECRET = "ABCDEFGHIJKLMNOPQRSTUVWXYZabcdefghijklmnopqrstuvwxyz0123456789/+"


def _gmaps_key(rng: Random) -> str:
    return "AIza" + "".join(rng.choice(_CHARS_GMAPS) for _ in range(35))


def _aws_id(rng: Random) -> str:
    return "AKIA" + "".join(rng.choice(_CHARS_AWS_ID) for _ in range(16))


def _aws_secret(rng: Random) -> str:
    while True:
        token = "".join(rng.choice(_CHARS_AWS_SECRET) for _ in range(40))
        if shannon_entropy(token) >= 4.2:
            return token


def _slack_webhook(rng: Random) -> str:
    tail = "".join(rng.choice("abcdefghij0123456789") for _ in range(24))
    return f"https://hooks.slack.com/services/T{rng.randrange(10**8):08d}/B{rng.randrange(10**8):08d}/{tail}"


def _oauth_secret(rng: Random) -> str:
    token = "".join(rng.choice("abcdefABCDEF0123456789") for _ in range(20))
    return f"client_secret={token}"


def _firebase_url(device: int, app: int) -> str:
    return f"https://plantdb-{device}-{app}.firebaseio.com"


@dataclass
class _AppPlant:
    package: str
    manifest: ManifestModel
    dex_strings: list[str]
    dex_types: list[int]
    signer: tuple[tuple[str, str], ...] | None
    assets: dict[str, bytes]
    last_update_ms: int | None
    expected_flags: set[str]
    expected_trackers: int
    expected_maps: bool
    expected_other: bool
    second_dex: bool


def _plan_app(rng: Random, device_idx: int, app_idx: int, manufacturer: str, now_ms: int) -> _AppPlant:
    package = f"com.{manufacturer.lower()}.app{app_idx:03d}"
    flags: set[str] = set()

    shared_uid = rng.random() < 0.30
    if shared_uid:
        flags.add("system_uid")

    allow_backup = rng.choices([True, False, None], weights=[4, 2, 4])[0]
    if allow_backup is True:
        flags.add("allow_backup")
    cleartext = rng.choices([True, False, None], weights=[2, 1, 7])[0]
    if cleartext is True:
        flags.add("cleartext")
    debuggable = rng.choices([True, None], weights=[1, 9])[0]
    if debuggable is True:
        flags.add("debuggable")

    signer_mode = rng.choices(["vendor", "third", "unsigned"], weights=[6, 3, 1])[0]
    if signer_mode == "vendor":
        signer = (("C", "US"), ("O", f"{manufacturer} Ltd"), ("CN", "Platform Signing"))
    elif signer_mode == "third":
        signer = rng.choice(_THIRD_PARTY_ISSUERS)
        flags.add("not_vendor_signed")
    else:
        signer = None
        flags.add("not_vendor_signed")

    stale_mode = rng.choices(["stale", "fresh", "none", "boundary"], weights=[35, 45, 15, 5])[0]
    if stale_mode == "stale":
        last_update = now_ms - rng.randrange(731, 1200) * _DAY_MS
        flags.add("stale_2y")
    elif stale_mode == "fresh":
        last_update = now_ms - rng.randrange(1, 700) * _DAY_MS
    elif stale_mode == "boundary":
        last_update = now_ms - 730 * _DAY_MS  # exactly two years: not stale
    else:
        last_update = None

    export_mode = rng.choices(
        ["none", "direct", "implicit_old", "guarded", "implicit_new"],
        weights=[40, 25, 15, 10, 10],
    )[0]
    target_sdk = {"implicit_old": 29, "implicit_new": 31}.get(
        export_mode, rng.choice([None, 26, 28, 30, 33])
    )
    components = [
        Component(ComponentKind.ACTIVITY, f"{package}.Main", exported_attr=False)
    ]
    if export_mode == "direct":
        components.append(Component(ComponentKind.SERVICE, f"{package}.Open", exported_attr=True))
        flags.add("exported_noperm")
    elif export_mode == "implicit_old":
        components.append(
            Component(ComponentKind.RECEIVER, f"{package}.Implicit", has_intent_filter=True)
        )
        flags.add("exported_noperm")
    elif export_mode == "guarded":
        components.append(
            Component(
                ComponentKind.SERVICE,
                f"{package}.Guarded",
                exported_attr=True,
                required_permission=f"{package}.PERM",
            )
        )
    elif export_mode == "implicit_new":
        components.append(
            Component(ComponentKind.PROVIDER, f"{package}.NewImplicit", has_intent_filter=True)
        )

    permissions = rng.sample(_BENIGN_POOL, rng.randrange(0, 3))
    if rng.random() < 0.35:
        permissions += rng.sample(_DANGEROUS_POOL, rng.randrange(1, 3))
        flags.add("dangerous_perm")
    rng.shuffle(permissions)

    tracker_count = rng.choices([0, 1, 2, 3], weights=[4, 3, 2, 1])[0]
    planted = rng.sample(PLANT_TRACKERS, tracker_count)
    expected_trackers = sum(1 for _tid, _prefix, counts in planted if counts)

    cloud_mode = rng.choices(
        ["none", "maps", "firebase", "slack", "oauth", "awspair", "maps_firebase"],
        weights=[50, 15, 10, 6, 6, 8, 5],
    )[0]
    expected_maps = cloud_mode in ("maps", "maps_firebase")
    expected_other = cloud_mode in ("firebase", "slack", "oauth", "awspair", "maps_firebase")

    dex_strings = [
        f"Lcom/{manufacturer.lower()}/app{app_idx:03d}/Main;",
        f"greeting text for {package}",
        "shared preference storage helper",
    ]
    dex_types = [0]
    for _tid, prefix, _counts in planted:
        dex_types.append(len(dex_strings))
        dex_strings.append(prefix + "Sdk;")

    assets: dict[str, bytes] = {}
    secret_strings: list[str] = []
    if cloud_mode in ("maps", "maps_firebase"):
        secret_strings.append(_gmaps_key(rng))
    if cloud_mode in ("firebase", "maps_firebase"):
        url = _firebase_url(device_idx, app_idx)
        if rng.random() < 0.5:
            assets["assets/cloud.cfg"] = f"endpoint={url}\nretries=3\n".encode()
        else:
            secret_strings.append(url)
    if cloud_mode == "slack":
        secret_strings.append(_slack_webhook(rng))
    if cloud_mode == "oauth":
        secret_strings.append(_oauth_secret(rng))
    if cloud_mode == "awspair":
        secret_strings += [_aws_id(rng), _aws_secret(rng)]
    dex_strings += secret_strings

    manifest = ManifestModel(
        package=package,
        shared_user_id="android.uid.system" if shared_uid else None,
        min_sdk=rng.choice([None, 21, 23, 26]),
        target_sdk=target_sdk,
        app_flags=AppFlags(
            allow_backup=allow_backup,
            debuggable=debuggable,
            uses_cleartext_traffic=cleartext,
        ),
        uses_permissions=permissions,
        components=components,
    )
    return _AppPlant(
        package=package,
        manifest=manifest,
        dex_strings=dex_strings,
        dex_types=dex_types,
        signer=signer,
        assets=assets,
        last_update_ms=last_update,
        expected_flags=flags,
        expected_trackers=expected_trackers,
        expected_maps=expected_maps,
        expected_other=expected_other,
        second_dex=rng.random() < 0.15,
    )


def generate_corpus(
    out_dir: str | Path,
    devices: int = 12,
    apps_per_device: int = 25,
    seed: int = 20260101,
    now_ms: int = DEFAULT_NOW_MS,
) -> dict:
    """Write planted firmware dumps plus their ground-truth plant manifest.

    Each device gets its own dump directory with APKs spread over the five
    partition roots and a device.json sidecar. Returns (and writes as
    plant.json) the expected per-device finding vectors for scans run with
    ``now_ms`` and unprobed cloud findings counted.
    """
    out_dir = Path(out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    rng = Random(seed)
    partitions = ("system/app", "system/priv-app", "vendor/app", "product/app", "oem/app", "odm/app")
    plant: dict = {"now_ms": now_ms, "count_unprobed_cloud": True, "devices": []}

    for d in range(devices):
        manufacturer = _MANUFACTURERS[d % len(_MANUFACTURERS)]
        device_id = f"device{d:02d}"
        root = out_dir / device_id
        expected = {
            "device_id": device_id,
            "app_total": apps_per_device,
            "n1": 0, "n2": 0, "n3": 0, "n4": 0, "n5": 0, "n6": 0, "n7": 0,
            "n8_maps": 0, "n8_other": 0, "n9": 0, "n10": 0,
        }
        flag_to_n = {
            "system_uid": "n1", "allow_backup": "n2", "not_vendor_signed": "n3",
            "stale_2y": "n4", "cleartext": "n5", "debuggable": "n6",
            "exported_noperm": "n9", "dangerous_perm": "n10",
        }
        meta_apps = []
        for i in range(apps_per_device):
            app = _plan_app(rng, d, i, manufacturer, now_ms)
            for flag in app.expected_flags:
                expected[flag_to_n[flag]] += 1
            expected["n7"] += app.expected_trackers
            expected["n8_maps"] += int(app.expected_maps)
            expected["n8_other"] += int(app.expected_other)

            dex = write_fixture_dex(app.dex_strings, app.dex_types)
            blobs: list[bytes] = [dex]
            if app.second_dex:
                blobs.append(write_fixture_dex([f"Lcom/{manufacturer.lower()}/aux{i};", "auxiliary strings"], [0]))
            apk = build_fixture_apk(
                app.manifest,
                dex=blobs,
                signer=app.signer,
                extra_entries=app.assets,
                utf8_pool=rng.random() < 0.8,
                compress=rng.random() < 0.8,
            )
            part = partitions[i % len(partitions)]
            apk_path = root / part / f"App{i:03d}" / f"App{i:03d}.apk"
            apk_path.parent.mkdir(parents=True, exist_ok=True)
            apk_path.write_bytes(apk)
            if app.last_update_ms is not None:
                meta_apps.append(
                    {
                        "package": app.package,
                        "first_install_ms": app.last_update_ms - 30 * _DAY_MS,
                        "last_update_ms": app.last_update_ms,
                    }
                )

        sidecar = {
            "device_id": device_id,
            "manufacturer": manufacturer,
            "model": f"{manufacturer}-X{d}",
            "product": f"{manufacturer.lower()}_x{d}",
            "apps": meta_apps,
        }
        (root / "device.json").write_text(
            json.dumps(sidecar, indent=2, sort_keys=True) + "\n", encoding="utf-8"
        )
        plant["devices"].append(expected)

    (out_dir / "plant.json").write_text(
        json.dumps(plant, indent=2, sort_keys=True) + "\n", encoding="utf-8"
    )
    return plant
