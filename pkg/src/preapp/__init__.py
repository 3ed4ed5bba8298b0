"""Static analysis and risk scoring for pre-installed Android apps.

The toolkit ingests offline firmware dumps, parses APK containers
(binary manifest, DEX string tables, signing certificates), detects
tracker SDKs and embedded cloud credentials, and folds everything into
a per-device risk score.
"""

__version__ = "0.1.0"

from .errors import (
    ConfigError,
    ContainerError,
    FormatError,
    IdentityError,
    ManifestError,
    PreappError,
    UndefinedCorrelation,
    UnsignedError,
)

__all__ = [
    "__version__",
    "ConfigError",
    "ContainerError",
    "FormatError",
    "IdentityError",
    "ManifestError",
    "PreappError",
    "UndefinedCorrelation",
    "UnsignedError",
]
