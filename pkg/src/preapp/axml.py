"""Decoder for Android binary XML (the AndroidManifest.xml wire format).

The file is a stream of little-endian chunks:

    0x0003  XML resource file (outer chunk, wraps everything)
    0x0001  string pool (UTF-8 or UTF-16 entries, flag bit 1<<8)
    0x0180  resource map (string index -> attribute resource id)
    0x0100  start namespace     0x0101  end namespace
    0x0102  start element       0x0103  end element

Every chunk begins ``type:u16 header_size:u16 total_size:u32``. Attribute
records are 20 bytes: namespace, name and raw-value string indexes, then a
typed value (size:u16 res0:u8 data_type:u8 data:u32).
"""

from __future__ import annotations

import logging
import struct
from dataclasses import dataclass, field

from .errors import FormatError

log = logging.getLogger(__name__)

CHUNK_XML = 0x0003
CHUNK_STRING_POOL = 0x0001
CHUNK_RESOURCE_MAP = 0x0180
CHUNK_START_NAMESPACE = 0x0100
CHUNK_END_NAMESPACE = 0x0101
CHUNK_START_ELEMENT = 0x0102
CHUNK_END_ELEMENT = 0x0103

UTF8_FLAG = 1 << 8

TYPE_REFERENCE = 0x01
TYPE_STRING = 0x03
TYPE_INT_DEC = 0x10
TYPE_INT_HEX = 0x11
TYPE_INT_BOOLEAN = 0x12

NO_INDEX = 0xFFFFFFFF

ANDROID_NS = "http://schemas.android.com/apk/res/android"

# Public android: attribute resource ids used to recover names when an
# obfuscated pool stores an empty string for a mapped attribute. Encoder
# and decoder must agree on this table; see fixtures.encode_axml.
ANDROID_ATTR_RES_IDS = {
    "theme": 0x01010000,
    "label": 0x01010001,
    "icon": 0x01010002,
    "name": 0x01010003,
    "permission": 0x01010006,
    "protectionLevel": 0x01010009,
    "sharedUserId": 0x0101000B,
    "debuggable": 0x0101000F,
    "exported": 0x01010010,
    "minSdkVersion": 0x0101020C,
    "versionCode": 0x0101021B,
    "versionName": 0x0101021C,
    "targetSdkVersion": 0x01010270,
    "allowBackup": 0x01010280,
    "usesCleartextTraffic": 0x010104EC,
}
_RES_ID_TO_NAME = {rid: name for name, rid in ANDROID_ATTR_RES_IDS.items()}


@dataclass(frozen=True)
class ResRef:
    """A resource reference left unresolved (resources.arsc is out of scope)."""

    rid: int


@dataclass(frozen=True)
class RawValue:
    """A typed value of a data type this decoder does not interpret."""

    data_type: int
    data: int


@dataclass
class XmlAttr:
    ns: str | None
    name: str
    value: object
    resource_id: int | None = None


@dataclass
class XmlElement:
    ns: str | None
    name: str
    attrs: list[XmlAttr] = field(default_factory=list)
    children: list["XmlElement"] = field(default_factory=list)

    def attr(self, name: str, ns: str | None = None):
        """Value of the first attribute matching (ns, name), else None."""
        for a in self.attrs:
            if a.name == name and a.ns == ns:
                return a.value
        return None

    def find_all(self, name: str) -> list["XmlElement"]:
        return [c for c in self.children if c.name == name]


@dataclass
class XmlTree:
    root: XmlElement
    namespaces: dict[str, str] = field(default_factory=dict)


class _StringPool:
    def __init__(self, data: bytes, chunk_off: int, header_size: int, chunk_size: int):
        if chunk_size < 28 or header_size < 28:
            raise FormatError(f"string pool chunk too small at offset {chunk_off}")
        count, style_count, flags, strings_start, _styles_start = struct.unpack_from(
            "<IIIII", data, chunk_off + 8
        )
        self.utf8 = bool(flags & UTF8_FLAG)
        self.base = chunk_off
        self.strings_start = strings_start
        self.limit = chunk_off + chunk_size
        if chunk_off + header_size + 4 * (count + style_count) > self.limit:
            raise FormatError(f"string pool offsets overrun chunk at offset {chunk_off}")
        self.offsets = list(
            struct.unpack_from(f"<{count}I", data, chunk_off + header_size)
        )
        self.data = data
        self._cache: dict[int, str] = {}

    def __len__(self) -> int:
        return len(self.offsets)

    def get(self, index: int) -> str:
        if index in self._cache:
            return self._cache[index]
        if index < 0 or index >= len(self.offsets):
            raise FormatError(
                f"string index {index} out of range (pool at offset {self.base})"
            )
        off = self.base + self.strings_start + self.offsets[index]
        if off < self.base or off >= self.limit:
            raise FormatError(f"string {index} data offset {off} outside pool")
        text = self._decode_utf8(off) if self.utf8 else self._decode_utf16(off)
        self._cache[index] = text
        return text

    def _varlen8(self, off: int) -> tuple[int, int]:
        if off >= self.limit:
            raise FormatError(f"string length byte outside pool at offset {off}")
        n = self.data[off]
        if n & 0x80:
            if off + 1 >= self.limit:
                raise FormatError(f"truncated string length at offset {off}")
            return ((n & 0x7F) << 8) | self.data[off + 1], 2
        return n, 1

    def _decode_utf8(self, off: int) -> str:
        _chars, skip = self._varlen8(off)
        off += skip
        nbytes, skip = self._varlen8(off)
        off += skip
        if off + nbytes > self.limit:
            raise FormatError(f"utf-8 string overruns pool at offset {off}")
        return self.data[off : off + nbytes].decode("utf-8", "replace")

    def _decode_utf16(self, off: int) -> str:
        if off + 2 > self.limit:
            raise FormatError(f"truncated utf-16 length at offset {off}")
        n = struct.unpack_from("<H", self.data, off)[0]
        off += 2
        if n & 0x8000:
            if off + 2 > self.limit:
                raise FormatError(f"truncated utf-16 length at offset {off}")
            n = ((n & 0x7FFF) << 16) | struct.unpack_from("<H", self.data, off)[0]
            off += 2
        if off + 2 * n > self.limit:
            raise FormatError(f"utf-16 string overruns pool at offset {off}")
        return self.data[off : off + 2 * n].decode("utf-16-le", "replace")


def _typed_value(data_type: int, data: int, pool: _StringPool):
    if data_type == TYPE_INT_BOOLEAN:
        return data != 0
    if data_type in (TYPE_INT_DEC, TYPE_INT_HEX):
        return data
    if data_type == TYPE_STRING:
        return pool.get(data)
    if data_type == TYPE_REFERENCE:
        return ResRef(data)
    return RawValue(data_type, data)


def decode_axml(data: bytes) -> XmlTree:
    """Decode binary XML bytes into an element tree.

    Raises FormatError on any structural violation; arbitrary byte input
    never raises anything else.
    """
    if len(data) < 8:
        raise FormatError("input shorter than a chunk header")
    file_type, header_size, total_size = struct.unpack_from("<HHI", data, 0)
    if file_type != CHUNK_XML:
        raise FormatError(f"bad magic: chunk type 0x{file_type:04x}, expected 0x0003")
    if header_size < 8 or total_size < header_size or total_size != len(data):
        raise FormatError(
            f"file chunk sizes inconsistent (header {header_size}, total {total_size}, "
            f"actual {len(data)})"
        )

    pool: _StringPool | None = None
    res_map: list[int] = []
    namespaces: dict[str, str] = {}
    root: XmlElement | None = None
    stack: list[XmlElement] = []

    off = header_size
    while off < total_size:
        if off + 8 > total_size:
            raise FormatError(f"truncated chunk header at offset {off}")
        ctype, chsize, csize = struct.unpack_from("<HHI", data, off)
        if chsize < 8 or csize < chsize or off + csize > total_size:
            raise FormatError(f"chunk at offset {off} has bad sizes ({chsize}/{csize})")

        if ctype == CHUNK_STRING_POOL:
            pool = _StringPool(data, off, chsize, csize)
        elif ctype == CHUNK_RESOURCE_MAP:
            n = (csize - chsize) // 4
            res_map = list(struct.unpack_from(f"<{n}I", data, off + chsize))
        elif ctype in (CHUNK_START_NAMESPACE, CHUNK_END_NAMESPACE):
            if pool is None:
                raise FormatError(f"namespace chunk before string pool at offset {off}")
            if off + chsize + 8 > total_size:
                raise FormatError(f"namespace chunk truncated at offset {off}")
            prefix_ix, uri_ix = struct.unpack_from("<II", data, off + chsize)
            if ctype == CHUNK_START_NAMESPACE and prefix_ix != NO_INDEX and uri_ix != NO_INDEX:
                namespaces[pool.get(prefix_ix)] = pool.get(uri_ix)
        elif ctype == CHUNK_START_ELEMENT:
            if pool is None:
                raise FormatError(f"element chunk before string pool at offset {off}")
            elem = _read_start_element(data, off, chsize, csize, pool, res_map)
            if stack:
                stack[-1].children.append(elem)
            elif root is None:
                root = elem
            stack.append(elem)
        elif ctype == CHUNK_END_ELEMENT:
            if stack:
                stack.pop()
            else:
                log.warning("end element without matching start at offset %d", off)
        else:
            log.warning("skipping unknown chunk type 0x%04x at offset %d", ctype, off)
        off += csize

    if root is None:
        raise FormatError("no element chunks in file")
    return XmlTree(root=root, namespaces=namespaces)


def _read_start_element(
    data: bytes,
    off: int,
    header_size: int,
    chunk_size: int,
    pool: _StringPool,
    res_map: list[int],
) -> XmlElement:
    body = off + header_size
    if body + 20 > off + chunk_size:
        raise FormatError(f"start-element chunk too small at offset {off}")
    ns_ix, name_ix, attr_start, attr_size, attr_count = struct.unpack_from(
        "<IIHHH", data, body
    )
    if attr_size < 20:
        raise FormatError(f"attribute record size {attr_size} < 20 at offset {off}")
    elem = XmlElement(
        ns=pool.get(ns_ix) if ns_ix != NO_INDEX else None,
        name=pool.get(name_ix),
    )
    pos = body + attr_start
    for i in range(attr_count):
        if pos + 20 > off + chunk_size:
            raise FormatError(f"attribute {i} overruns chunk at offset {off}")
        a_ns, a_name, _raw, _vsize, _res0, dtype, vdata = struct.unpack_from(
            "<IIIHBBI", data, pos
        )
        name = pool.get(a_name)
        rid = res_map[a_name] if a_name < len(res_map) else None
        if not name and rid in _RES_ID_TO_NAME:
            name = _RES_ID_TO_NAME[rid]
        elem.attrs.append(
            XmlAttr(
                ns=pool.get(a_ns) if a_ns != NO_INDEX else None,
                name=name,
                value=_typed_value(dtype, vdata, pool),
                resource_id=rid,
            )
        )
        pos += attr_size
    return elem
