import random
import struct

import pytest

from preapp.axml import ANDROID_NS, ResRef, decode_axml
from preapp.errors import FormatError, ManifestError
from preapp.fixtures import _El, encode_axml, encode_axml_tree
from preapp.manifest import (
    Component,
    ComponentKind,
    ManifestModel,
    extract_manifest,
    is_effectively_exported,
)

from conftest import random_manifest


class TestDecode:
    def test_minimal_package_roundtrip(self):
        tree = decode_axml(encode_axml(ManifestModel(package="a.b")))
        assert tree.root.name == "manifest"
        assert tree.root.attr("package") == "a.b"
        assert tree.namespaces == {"android": ANDROID_NS}

    def test_boolean_attribute_true(self):
        from preapp.manifest import AppFlags

        model = ManifestModel(package="x.y", app_flags=AppFlags(allow_backup=True))
        tree = decode_axml(encode_axml(model))
        app = tree.root.find_all("application")[0]
        assert app.attr("allowBackup", ANDROID_NS) is True

    def test_shared_user_id_exact_string(self):
        model = ManifestModel(package="x.y", shared_user_id="android.uid.system")
        tree = decode_axml(encode_axml(model))
        assert tree.root.attr("sharedUserId", ANDROID_NS) == "android.uid.system"

    def test_utf16_pool_supported(self):
        model = ManifestModel(package="x.üğ")
        tree = decode_axml(encode_axml(model, utf8_pool=False))
        assert tree.root.attr("package") == "x.üğ"

    def test_resource_ids_attached_and_empty_names_recovered(self):
        model = ManifestModel(package="x.y", shared_user_id="android.uid.system")
        blob = encode_axml(model)
        tree = decode_axml(blob)
        attr = next(a for a in tree.root.attrs if a.name == "sharedUserId")
        assert attr.resource_id == 0x0101000B

    def test_reference_values_surface_as_opaque_refs(self):
        root = _El("manifest", attrs=[(None, "package", "p.q"), (ANDROID_NS, "label", ResRef(0x7F040001))])
        tree = decode_axml(encode_axml_tree(root))
        assert tree.root.attr("label", ANDROID_NS) == ResRef(0x7F040001)

    def test_bad_magic(self):
        with pytest.raises(FormatError):
            decode_axml(b"\x00\x00\x00\x00\x00\x00\x00\x00")

    def test_truncated_input(self):
        with pytest.raises(FormatError):
            decode_axml(b"\x03\x00")

    def test_size_mismatch(self):
        blob = bytearray(encode_axml(ManifestModel(package="a.b")))
        struct.pack_into("<I", blob, 4, len(blob) + 8)
        with pytest.raises(FormatError):
            decode_axml(bytes(blob))

    def test_string_pool_index_out_of_range_reports_offset(self):
        blob = bytearray(encode_axml(ManifestModel(package="a.b")))
        # Corrupt the root element's name index to a huge value: the start
        # element chunk is near the end; patch its name field.
        tree_ok = decode_axml(bytes(blob))
        assert tree_ok.root.name == "manifest"
        idx = blob.rfind(struct.pack("<HH", 0x0102, 16))
        struct.pack_into("<I", blob, idx + 20, 0xFFFF)
        with pytest.raises(FormatError, match="out of range"):
            decode_axml(bytes(blob))

    def test_unknown_chunk_skipped(self, caplog):
        blob = bytearray(encode_axml(ManifestModel(package="a.b")))
        extra = struct.pack("<HHI", 0x0777, 8, 12) + b"\x00" * 4
        blob += extra
        struct.pack_into("<I", blob, 4, len(blob))
        tree = decode_axml(bytes(blob))
        assert tree.root.attr("package") == "a.b"


class TestExtract:
    def test_debuggable_true(self):
        from preapp.manifest import AppFlags

        model = ManifestModel(package="x", app_flags=AppFlags(debuggable=True))
        got = extract_manifest(decode_axml(encode_axml(model)))
        assert got.app_flags.debuggable is True

    def test_no_application_element(self):
        tree = decode_axml(encode_axml_tree(_El("manifest", attrs=[(None, "package", "x")])))
        model = extract_manifest(tree)
        assert model.components == []
        assert model.app_flags.allow_backup is None
        assert model.app_flags.debuggable is None

    def test_exported_service_without_permission(self):
        model = ManifestModel(
            package="x",
            components=[Component(ComponentKind.SERVICE, "x.S", exported_attr=True)],
        )
        got = extract_manifest(decode_axml(encode_axml(model)))
        comp = got.components[0]
        assert comp.kind is ComponentKind.SERVICE
        assert comp.exported_attr is True
        assert comp.required_permission is None

    def test_missing_package_rejected(self):
        tree = decode_axml(encode_axml_tree(_El("manifest", attrs=[(ANDROID_NS, "label", "x")])))
        with pytest.raises(ManifestError):
            extract_manifest(tree)

    def test_non_manifest_root_rejected(self):
        tree = decode_axml(encode_axml_tree(_El("resources", attrs=[(None, "package", "x")])))
        with pytest.raises(ManifestError):
            extract_manifest(tree)


class TestRoundTrip:
    def test_fifty_random_manifests_both_pools(self):
        rng = random.Random(1234)
        for i in range(50):
            model = random_manifest(rng)
            blob = encode_axml(model, utf8_pool=(i % 2 == 0))
            assert extract_manifest(decode_axml(blob)) == model

    def test_tristate_absence_never_becomes_false(self):
        rng = random.Random(77)
        for _ in range(30):
            model = random_manifest(rng)
            got = extract_manifest(decode_axml(encode_axml(model)))
            assert got.app_flags == model.app_flags
            for mine, theirs in zip(model.components, got.components):
                assert mine.exported_attr == theirs.exported_attr


class TestFuzz:
    def test_random_buffers_raise_format_error_only(self):
        rng = random.Random(999)
        for _ in range(3000):
            blob = rng.randbytes(rng.randrange(0, 300))
            try:
                decode_axml(blob)
            except FormatError:
                pass

    def test_mutated_valid_files(self):
        rng = random.Random(31337)
        base = encode_axml(ManifestModel(package="com.fuzz.seed"))
        for _ in range(3000):
            blob = bytearray(base)
            for _ in range(rng.randrange(1, 6)):
                blob[rng.randrange(len(blob))] = rng.randrange(256)
            try:
                decode_axml(bytes(blob))
            except FormatError:
                pass


class TestExportRule:
    def test_explicit_false(self):
        comp = Component(ComponentKind.ACTIVITY, "a", exported_attr=False, has_intent_filter=True)
        assert is_effectively_exported(comp, 33) is False

    def test_implicit_with_filter_pre_sdk31(self):
        comp = Component(ComponentKind.ACTIVITY, "a", has_intent_filter=True)
        assert is_effectively_exported(comp, 29) is True
        assert is_effectively_exported(comp, 30) is True
        assert is_effectively_exported(comp, 31) is False
        assert is_effectively_exported(comp, None) is True

    def test_explicit_true_without_permission(self):
        comp = Component(ComponentKind.SERVICE, "s", exported_attr=True)
        assert is_effectively_exported(comp, 33) is True

    def test_no_filter_no_export(self):
        comp = Component(ComponentKind.PROVIDER, "p")
        assert is_effectively_exported(comp, 21) is False
