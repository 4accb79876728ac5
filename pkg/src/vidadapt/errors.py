"""Exception hierarchy shared across the package.

The CLI maps these onto process exit codes: ConfigError -> 2,
AdapterError -> 3, FormatError -> 4.
"""


class VidadaptError(Exception):
    """Base class for all package errors."""


class ConfigError(VidadaptError):
    """Invalid configuration, arguments, or input geometry."""


class AdapterError(VidadaptError):
    """An external tool (host codec, VMAF) failed or is missing."""


class FormatError(VidadaptError):
    """Malformed binary data: bad magic, truncation, shape mismatch."""
