import hashlib
import json

import pytest

from preapp.container import read_zip_entries
from preapp.errors import ConfigError, IdentityError, UnsignedError
from preapp.fixtures import build_certificate, build_fixture_apk, build_pkcs7
from preapp.identity import (
    SignerIdentity,
    VendorClass,
    VendorMap,
    VendorRule,
    assign_group,
    classify_vendor,
    extract_signer,
    find_certificate,
)
from preapp.manifest import ManifestModel


def signed_apk(issuer):
    return build_fixture_apk(ManifestModel(package="s.s"), signer=issuer)


class TestExtractSigner:
    def test_issuer_rdn_recovered(self):
        apk = signed_apk([("CN", "Test"), ("O", "AcmeCorp")])
        sig = extract_signer(read_zip_entries(apk))
        assert ("O", "AcmeCorp") in sig.issuer_rdn
        assert ("CN", "Test") in sig.issuer_rdn

    def test_unsigned_raises(self):
        apk = build_fixture_apk(ManifestModel(package="u.u"))
        with pytest.raises(UnsignedError):
            extract_signer(read_zip_entries(apk))

    def test_android_debug_cn_flagged(self):
        apk = signed_apk([("C", "US"), ("O", "Android"), ("CN", "Android Debug")])
        sig = extract_signer(read_zip_entries(apk))
        assert sig.is_debug
        assert sig.subject_cn == "Android Debug"

    def test_garbage_blob_raises_identity_error(self):
        apk = build_fixture_apk(
            ManifestModel(package="g.g"),
            extra_entries={"META-INF/CERT.RSA": b"\x30\x82\x00\x10garbage"},
        )
        with pytest.raises(IdentityError):
            extract_signer(read_zip_entries(apk))

    def test_digest_matches_independent_hash(self):
        cert = build_certificate([("O", "DigestCheck")])
        apk = build_fixture_apk(
            ManifestModel(package="d.d"), extra_entries={"META-INF/X.RSA": build_pkcs7(cert)}
        )
        sig = extract_signer(read_zip_entries(apk))
        assert sig.cert_sha256 == hashlib.sha256(cert).hexdigest()

    def test_dsa_and_ec_suffixes_accepted(self):
        blob = build_pkcs7(build_certificate([("O", "EcCo")]))
        for name in ("META-INF/CERT.DSA", "META-INF/CERT.EC"):
            apk = build_fixture_apk(ManifestModel(package="e.e"), extra_entries={name: blob})
            assert extract_signer(read_zip_entries(apk)).issuer_value("O") == "EcCo"

    def test_cryptography_generated_certificate_oracle(self):
        # Cross-validate the DER reader against an independent implementation.
        cryptography = pytest.importorskip("cryptography")
        from cryptography import x509
        from cryptography.hazmat.primitives import hashes
        from cryptography.hazmat.primitives.asymmetric import ec
        from cryptography.hazmat.primitives.serialization import Encoding
        from cryptography.x509.oid import NameOID
        import datetime

        key = ec.generate_private_key(ec.SECP256R1())
        name = x509.Name(
            [
                x509.NameAttribute(NameOID.COUNTRY_NAME, "US"),
                x509.NameAttribute(NameOID.ORGANIZATION_NAME, "Oracle Org"),
                x509.NameAttribute(NameOID.COMMON_NAME, "Oracle CN"),
            ]
        )
        cert = (
            x509.CertificateBuilder()
            .subject_name(name)
            .issuer_name(name)
            .public_key(key.public_key())
            .serial_number(x509.random_serial_number())
            .not_valid_before(datetime.datetime(2020, 1, 1))
            .not_valid_after(datetime.datetime(2040, 1, 1))
            .sign(key, hashes.SHA256())
        )
        der = cert.public_bytes(Encoding.DER)
        issuer, subject, found = find_certificate(der)
        assert found == der
        assert ("O", "Oracle Org") in issuer
        assert ("CN", "Oracle CN") in issuer
        assert ("C", "US") in issuer
        assert ("CN", "Oracle CN") in subject


class TestClassifyVendor:
    def identity(self, **rdn):
        return SignerIdentity(
            issuer_rdn=list(rdn.items()), subject_cn=None, cert_sha256="0" * 64
        )

    def test_heuristic_match_on_o(self):
        sig = self.identity(O="Samsung Corporation")
        assert classify_vendor(sig, "samsung", VendorMap()) is VendorClass.VENDOR

    def test_third_party(self):
        sig = self.identity(O="Facebook")
        assert classify_vendor(sig, "samsung", VendorMap()) is VendorClass.THIRD_PARTY

    def test_unknown_when_extraction_failed(self):
        assert classify_vendor(None, "samsung", VendorMap()) is VendorClass.UNKNOWN

    def test_case_insensitive_both_sides(self):
        sig = self.identity(CN="HUAWEI Software")
        assert classify_vendor(sig, "Huawei", VendorMap()) is VendorClass.VENDOR

    def test_rule_wins_over_heuristic(self):
        vmap = VendorMap(rules=[VendorRule("acme", ["trusted signer"], "Acme")])
        sig = self.identity(O="Trusted Signer Ltd")
        assert classify_vendor(sig, "acme", vmap) is VendorClass.VENDOR

    def test_empty_manufacturer_rejected(self):
        with pytest.raises(ValueError):
            classify_vendor(self.identity(O="X"), "", VendorMap())

    def test_deterministic(self):
        sig = self.identity(O="Maker Inc")
        results = {classify_vendor(sig, "maker", VendorMap()) for _ in range(5)}
        assert results == {VendorClass.VENDOR}


class TestVendorMapFile:
    def test_load_and_group(self, tmp_path):
        path = tmp_path / "vm.json"
        path.write_text(
            json.dumps([{"manufacturer": "acme", "issuer_contains": ["acme root"], "label": "Acme"}])
        )
        vmap = VendorMap.load(path)
        sig = SignerIdentity(
            issuer_rdn=[("O", "ACME Root CA")], subject_cn=None, cert_sha256="0" * 64
        )
        assert assign_group(sig, vmap) == "Acme"
        assert assign_group(None, vmap) == "unknown"

    def test_group_falls_back_to_o_then_cn(self):
        sig_o = SignerIdentity([("O", "OrgName")], None, "0" * 64)
        sig_cn = SignerIdentity([("CN", "OnlyCN")], None, "0" * 64)
        assert assign_group(sig_o, VendorMap()) == "OrgName"
        assert assign_group(sig_cn, VendorMap()) == "OnlyCN"

    def test_bad_rule_rejected(self, tmp_path):
        path = tmp_path / "vm.json"
        path.write_text(json.dumps([{"manufacturer": "x"}]))
        with pytest.raises(ConfigError):
            VendorMap.load(path)


class TestDnString:
    def test_rfc4514_ordering_and_escaping(self):
        sig = SignerIdentity(
            issuer_rdn=[("C", "US"), ("O", "Acme, Inc"), ("CN", "Root")],
            subject_cn=None,
            cert_sha256="0" * 64,
        )
        assert sig.issuer_dn() == "CN=Root,O=Acme\\, Inc,C=US"
