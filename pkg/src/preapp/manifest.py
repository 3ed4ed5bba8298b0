"""Typed view of AndroidManifest.xml and the component export rule.

Boolean manifest attributes are tri-state: an absent flag is not the same
as an explicit ``false`` and is kept as None throughout.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from enum import Enum

from .axml import ANDROID_NS, XmlTree
from .errors import ManifestError


class ComponentKind(str, Enum):
    ACTIVITY = "activity"
    SERVICE = "service"
    RECEIVER = "receiver"
    PROVIDER = "provider"


@dataclass
class Component:
    kind: ComponentKind
    name: str
    exported_attr: bool | None = None
    has_intent_filter: bool = False
    required_permission: str | None = None

    def __post_init__(self) -> None:
        if not self.name:
            raise ManifestError("component name must be non-empty")


@dataclass
class AppFlags:
    allow_backup: bool | None = None
    debuggable: bool | None = None
    uses_cleartext_traffic: bool | None = None


@dataclass
class ManifestModel:
    package: str
    shared_user_id: str | None = None
    min_sdk: int | None = None
    target_sdk: int | None = None
    app_flags: AppFlags = field(default_factory=AppFlags)
    uses_permissions: list[str] = field(default_factory=list)
    defines_permissions: list[tuple[str, str | None]] = field(default_factory=list)
    components: list[Component] = field(default_factory=list)

    def __post_init__(self) -> None:
        if not self.package:
            raise ManifestError("manifest package must be non-empty")


def _as_bool(value) -> bool | None:
    """Coerce a typed attribute value into a tri-state boolean."""
    if isinstance(value, bool):
        return value
    if isinstance(value, str):
        if value == "true":
            return True
        if value == "false":
            return False
    return None


def _as_int(value) -> int | None:
    if isinstance(value, bool):
        return None
    if isinstance(value, int):
        return value
    if isinstance(value, str):
        try:
            return int(value)
        except ValueError:
            return None
    return None


def _as_str(value) -> str | None:
    return value if isinstance(value, str) else None


def extract_manifest(tree: XmlTree) -> ManifestModel:
    """Map a decoded manifest tree onto ManifestModel.

    Components are collected from the application element; a component's
    guarding permission is its android:permission attribute, and
    has_intent_filter is true iff it has at least one intent-filter child.
    """
    root = tree.root
    if root.name != "manifest":
        raise ManifestError(f"root element is <{root.name}>, expected <manifest>")
    package = _as_str(root.attr("package"))
    if not package:
        raise ManifestError("manifest has no package attribute")

    model = ManifestModel(
        package=package,
        shared_user_id=_as_str(root.attr("sharedUserId", ANDROID_NS)),
    )
    for sdk in root.find_all("uses-sdk"):
        if model.min_sdk is None:
            model.min_sdk = _as_int(sdk.attr("minSdkVersion", ANDROID_NS))
        if model.target_sdk is None:
            model.target_sdk = _as_int(sdk.attr("targetSdkVersion", ANDROID_NS))
    for perm in root.find_all("uses-permission"):
        name = _as_str(perm.attr("name", ANDROID_NS))
        if name:
            model.uses_permissions.append(name)
    for perm in root.find_all("permission"):
        name = _as_str(perm.attr("name", ANDROID_NS))
        if name:
            level = perm.attr("protectionLevel", ANDROID_NS)
            model.defines_permissions.append(
                (name, str(level) if level is not None else None)
            )

    apps = root.find_all("application")
    if apps:
        app = apps[0]
        model.app_flags = AppFlags(
            allow_backup=_as_bool(app.attr("allowBackup", ANDROID_NS)),
            debuggable=_as_bool(app.attr("debuggable", ANDROID_NS)),
            uses_cleartext_traffic=_as_bool(app.attr("usesCleartextTraffic", ANDROID_NS)),
        )
        for child in app.children:
            try:
                kind = ComponentKind(child.name)
            except ValueError:
                continue
            name = _as_str(child.attr("name", ANDROID_NS))
            if not name:
                continue
            model.components.append(
                Component(
                    kind=kind,
                    name=name,
                    exported_attr=_as_bool(child.attr("exported", ANDROID_NS)),
                    has_intent_filter=bool(child.find_all("intent-filter")),
                    required_permission=_as_str(child.attr("permission", ANDROID_NS)),
                )
            )
    return model


def is_effectively_exported(component: Component, target_sdk: int | None) -> bool:
    """Whether other apps can reach this component.

    Explicit android:exported wins. When absent, a component with an
    intent filter is implicitly exported below target SDK 31 (Android 12
    made the attribute mandatory for such components); an unknown target
    SDK is treated as pre-31. Providers follow the same rule here.
    """
    if component.exported_attr is not None:
        return component.exported_attr
    if not component.has_intent_filter:
        return False
    return target_sdk is None or target_sdk < 31
