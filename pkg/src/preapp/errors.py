"""Exception hierarchy shared across the toolkit."""


class PreappError(Exception):
    """Base class for all errors raised by this package."""


class ContainerError(PreappError):
    """ZIP/APK container is structurally unreadable (e.g. missing end record)."""


class FormatError(PreappError):
    """A binary format (AXML, DEX, DER) violates its encoding rules."""


class ManifestError(PreappError):
    """Decoded manifest XML is missing required content."""


class IdentityError(PreappError):
    """Signing certificate could not be parsed."""


class UnsignedError(IdentityError):
    """APK carries no v1 signature entry."""


class ConfigError(PreappError):
    """A configuration or data file fails validation."""


class UndefinedCorrelation(PreappError):
    """Pearson correlation is undefined for the given pairs."""
