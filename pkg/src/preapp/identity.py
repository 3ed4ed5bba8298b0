"""Signing certificate extraction and vendor classification.

Only the v1 (JAR) signature scheme is read: the first DER certificate is
located inside the PKCS#7 blob at META-INF/*.RSA|*.DSA|*.EC by scanning
for a Certificate SEQUENCE, and its Issuer distinguished name is decoded
directly from DER. No chain or signature validation is performed; the
issuer is treated purely as a developer-identity label.
"""

from __future__ import annotations

import hashlib
import json
import logging
from dataclasses import dataclass, field
from enum import Enum
from pathlib import Path
from typing import Iterable

from .errors import ConfigError, IdentityError, UnsignedError

log = logging.getLogger(__name__)

_SIG_SUFFIXES = (".rsa", ".dsa", ".ec")

DEBUG_CERT_CN = "Android Debug"

_OID_NAMES = {
    "2.5.4.3": "CN",
    "2.5.4.5": "serialNumber",
    "2.5.4.6": "C",
    "2.5.4.7": "L",
    "2.5.4.8": "ST",
    "2.5.4.9": "street",
    "2.5.4.10": "O",
    "2.5.4.11": "OU",
    "1.2.840.113549.1.9.1": "emailAddress",
    "0.9.2342.19200300.100.1.25": "DC",
}

_TAG_SEQUENCE = 0x30
_TAG_SET = 0x31
_TAG_OID = 0x06
_TAG_INTEGER = 0x02
_TAG_BITSTRING = 0x03
_STRING_TAGS = {
    0x0C: "utf-8",        # UTF8String
    0x13: "ascii",        # PrintableString
    0x16: "ascii",        # IA5String
    0x14: "latin-1",      # T61String
    0x1E: "utf-16-be",    # BMPString
}


# ---------------------------------------------------------------------------
# DER primitives
# ---------------------------------------------------------------------------

def _read_tlv(data: bytes, off: int) -> tuple[int, int, int, int]:
    """Read one DER TLV; returns (tag, content_off, content_len, end_off)."""
    if off + 2 > len(data):
        raise IdentityError(f"DER truncated at offset {off}")
    tag = data[off]
    first = data[off + 1]
    if first < 0x80:
        length, content = first, off + 2
    else:
        n = first & 0x7F
        if n == 0 or n > 4 or off + 2 + n > len(data):
            raise IdentityError(f"bad DER length at offset {off}")
        length = int.from_bytes(data[off + 2 : off + 2 + n], "big")
        content = off + 2 + n
    if content + length > len(data):
        raise IdentityError(f"DER value overruns buffer at offset {off}")
    return tag, content, length, content + length


def _children(data: bytes, content_off: int, content_len: int) -> list[tuple[int, int, int]]:
    """TLVs directly inside a constructed value, as (tag, content_off, content_len)."""
    out = []
    off = content_off
    end = content_off + content_len
    while off < end:
        tag, c_off, c_len, nxt = _read_tlv(data, off)
        if nxt > end:
            raise IdentityError(f"DER child overruns parent at offset {off}")
        out.append((tag, c_off, c_len))
        off = nxt
    return out


def _decode_oid(data: bytes, off: int, length: int) -> str:
    body = data[off : off + length]
    if not body:
        raise IdentityError("empty OID")
    parts = [body[0] // 40, body[0] % 40]
    value = 0
    for byte in body[1:]:
        value = (value << 7) | (byte & 0x7F)
        if not byte & 0x80:
            parts.append(value)
            value = 0
    return ".".join(str(p) for p in parts)


def _decode_dn(data: bytes, content_off: int, content_len: int) -> list[tuple[str, str]]:
    """Decode an RDNSequence into ordered (short_name, value) pairs."""
    rdn: list[tuple[str, str]] = []
    for tag, off, length in _children(data, content_off, content_len):
        if tag != _TAG_SET:
            raise IdentityError(f"DN entry is not a SET at offset {off}")
        for s_tag, s_off, s_len in _children(data, off, length):
            if s_tag != _TAG_SEQUENCE:
                raise IdentityError(f"AttributeTypeAndValue is not a SEQUENCE at offset {s_off}")
            parts = _children(data, s_off, s_len)
            if len(parts) != 2 or parts[0][0] != _TAG_OID:
                raise IdentityError(f"malformed DN attribute at offset {s_off}")
            oid = _decode_oid(data, parts[0][1], parts[0][2])
            v_tag, v_off, v_len = parts[1]
            encoding = _STRING_TAGS.get(v_tag, "latin-1")
            value = data[v_off : v_off + v_len].decode(encoding, "replace")
            rdn.append((_OID_NAMES.get(oid, oid), value))
    if not rdn:
        raise IdentityError("empty distinguished name")
    return rdn


def _parse_certificate(data: bytes, off: int):
    """Parse a Certificate SEQUENCE at ``off``; returns (issuer, subject, der).

    Validates just enough structure (tbsCertificate, signatureAlgorithm,
    signatureValue; serial/issuer/validity/subject inside the tbs) to
    reject lookalike SEQUENCEs in the surrounding PKCS#7 wrapper.
    """
    tag, c_off, c_len, end = _read_tlv(data, off)
    if tag != _TAG_SEQUENCE:
        raise IdentityError("not a SEQUENCE")
    top = _children(data, c_off, c_len)
    if len(top) != 3 or top[0][0] != _TAG_SEQUENCE or top[1][0] != _TAG_SEQUENCE:
        raise IdentityError("not a Certificate shape")
    if top[2][0] != _TAG_BITSTRING:
        raise IdentityError("missing signatureValue")
    tbs = _children(data, top[0][1], top[0][2])
    idx = 1 if tbs and tbs[0][0] == 0xA0 else 0  # optional [0] EXPLICIT version
    if len(tbs) < idx + 5:
        raise IdentityError("tbsCertificate too short")
    serial, algo, issuer, validity, subject = tbs[idx : idx + 5]
    if serial[0] != _TAG_INTEGER or algo[0] != _TAG_SEQUENCE:
        raise IdentityError("tbsCertificate fields out of order")
    if issuer[0] != _TAG_SEQUENCE or validity[0] != _TAG_SEQUENCE or subject[0] != _TAG_SEQUENCE:
        raise IdentityError("issuer/validity/subject malformed")
    issuer_rdn = _decode_dn(data, issuer[1], issuer[2])
    try:
        subject_rdn = _decode_dn(data, subject[1], subject[2])
    except IdentityError:
        subject_rdn = []
    return issuer_rdn, subject_rdn, data[off:end]


def find_certificate(blob: bytes):
    """First parseable DER Certificate SEQUENCE inside a PKCS#7 blob."""
    for off in range(len(blob) - 1):
        if blob[off] != _TAG_SEQUENCE:
            continue
        try:
            return _parse_certificate(blob, off)
        except IdentityError:
            continue
    raise IdentityError("no DER certificate found in signature blob")


# ---------------------------------------------------------------------------
# Signer identity
# ---------------------------------------------------------------------------

def _dn_escape(value: str) -> str:
    out = value.replace("\\", "\\\\").replace(",", "\\,").replace("+", "\\+").replace('"', '\\"')
    if out.startswith((" ", "#")):
        out = "\\" + out
    if out.endswith(" "):
        out = out[:-1] + "\\ "
    return out


@dataclass
class SignerIdentity:
    """Issuer identity of the certificate that signed an APK."""

    issuer_rdn: list[tuple[str, str]]
    subject_cn: str | None
    cert_sha256: str
    group_label: str = ""

    def issuer_dn(self) -> str:
        """RFC-4514-style rendering (most specific attribute first)."""
        return ",".join(f"{k}={_dn_escape(v)}" for k, v in reversed(self.issuer_rdn))

    def issuer_value(self, key: str) -> str | None:
        for k, v in self.issuer_rdn:
            if k == key:
                return v
        return None

    @property
    def is_debug(self) -> bool:
        return DEBUG_CERT_CN in (self.subject_cn, self.issuer_value("CN"))


def extract_signer(entries: Iterable[tuple[str, bytes]]) -> SignerIdentity:
    """Read the first v1 signing certificate from APK entries.

    Raises UnsignedError when no signature entry exists and IdentityError
    when a blob is present but no certificate can be parsed out of it.
    """
    blobs = sorted(
        (name, blob)
        for name, blob in entries
        if name.startswith("META-INF/") and name.lower().endswith(_SIG_SUFFIXES)
    )
    if not blobs:
        raise UnsignedError("no META-INF signature entry (v1)")
    name, blob = blobs[0]
    try:
        issuer_rdn, subject_rdn, der = find_certificate(blob)
    except IdentityError as exc:
        raise IdentityError(f"{name}: {exc}") from exc
    subject_cn = next((v for k, v in subject_rdn if k == "CN"), None)
    return SignerIdentity(
        issuer_rdn=issuer_rdn,
        subject_cn=subject_cn,
        cert_sha256=hashlib.sha256(der).hexdigest(),
    )


# ---------------------------------------------------------------------------
# Vendor classification
# ---------------------------------------------------------------------------

class VendorClass(str, Enum):
    VENDOR = "vendor"
    THIRD_PARTY = "third_party"
    UNKNOWN = "unknown"


@dataclass
class VendorRule:
    manufacturer: str
    issuer_contains: list[str]
    label: str


@dataclass
class VendorMap:
    rules: list[VendorRule] = field(default_factory=list)

    @classmethod
    def load(cls, path: str | Path) -> "VendorMap":
        with open(path, encoding="utf-8") as fh:
            raw = json.load(fh)
        if not isinstance(raw, list):
            raise ConfigError(f"{path}: vendor map must be a JSON array")
        rules = []
        for i, item in enumerate(raw):
            try:
                rules.append(
                    VendorRule(
                        manufacturer=item["manufacturer"],
                        issuer_contains=list(item["issuer_contains"]),
                        label=item["label"],
                    )
                )
            except (KeyError, TypeError) as exc:
                raise ConfigError(f"{path}: rule {i}: missing/invalid field {exc}") from exc
        return cls(rules=rules)


def assign_group(identity: SignerIdentity | None, vmap: VendorMap) -> str:
    """Stable grouping label for reports: rule label, else issuer O, else CN."""
    if identity is None:
        return "unknown"
    dn = identity.issuer_dn().casefold()
    for rule in vmap.rules:
        if any(sub.casefold() in dn for sub in rule.issuer_contains):
            return rule.label
    return identity.issuer_value("O") or identity.issuer_value("CN") or "unknown"


def classify_vendor(
    identity: SignerIdentity | None, manufacturer: str, vmap: VendorMap
) -> VendorClass:
    """Decide whether an APK was signed by the device maker.

    A vendor-map rule for the manufacturer wins; otherwise the fallback
    heuristic treats the app as vendor-signed iff the case-folded
    manufacturer name occurs in the issuer O or CN. Apps whose identity
    could not be extracted classify as unknown.
    """
    if identity is None:
        return VendorClass.UNKNOWN
    if not manufacturer:
        raise ValueError("manufacturer must be non-empty")
    man = manufacturer.casefold()
    dn = identity.issuer_dn().casefold()
    for rule in vmap.rules:
        if rule.manufacturer.casefold() in man:
            if any(sub.casefold() in dn for sub in rule.issuer_contains):
                return VendorClass.VENDOR
    for key in ("O", "CN"):
        value = identity.issuer_value(key)
        if value and man in value.casefold():
            return VendorClass.VENDOR
    return VendorClass.THIRD_PARTY
