import random

import pytest

from preapp.manifest import AppFlags, Component, ComponentKind, ManifestModel


class MockTransport:
    """Scripted transport that records every call it sees."""

    def __init__(self, handler):
        self.handler = handler
        self.calls = []

    def request(self, method, url, body=None):
        self.calls.append((method, url, body))
        return self.handler(method, url, body)

    def methods(self):
        return [m for m, _u, _b in self.calls]


@pytest.fixture
def mock_transport():
    return MockTransport


_PKG_WORDS = ("alpha", "beta", "core", "media", "sync", "ota", "store", "cam")
_VALUE_CHARS = "abcdefghijklmnopqrstuvwxyzABCDEFGHIJKLMNOPQRSTUVWXYZ0123456789._-"


def random_manifest(rng: random.Random) -> ManifestModel:
    """A randomized but valid manifest model for round-trip testing."""
    package = ".".join(rng.sample(_PKG_WORDS, 3)) + str(rng.randrange(100))
    tri = lambda: rng.choice([None, True, False])
    components = []
    for i in range(rng.randrange(0, 4)):
        components.append(
            Component(
                kind=rng.choice(list(ComponentKind)),
                name=f"{package}.C{i}é" if rng.random() < 0.2 else f"{package}.C{i}",
                exported_attr=tri(),
                has_intent_filter=rng.random() < 0.5,
                required_permission=None if rng.random() < 0.6 else f"{package}.PERM{i}",
            )
        )
    return ManifestModel(
        package=package,
        shared_user_id=rng.choice([None, "android.uid.system", "com.shared.uid"]),
        min_sdk=rng.choice([None, 1, 21, 26]),
        target_sdk=rng.choice([None, 28, 29, 31, 33]),
        app_flags=AppFlags(allow_backup=tri(), debuggable=tri(), uses_cleartext_traffic=tri()),
        uses_permissions=[
            "".join(rng.choices(_VALUE_CHARS, k=rng.randrange(5, 30)))
            for _ in range(rng.randrange(0, 4))
        ],
        defines_permissions=[
            (f"{package}.P{i}", rng.choice([None, "signature", "dangerous", "0x2"]))
            for i in range(rng.randrange(0, 3))
        ],
        components=components,
    )
