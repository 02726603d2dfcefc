"""Exception hierarchy shared across the pipeline."""


class VdpError(Exception):
    """Base class for all pipeline errors."""


class DimensionError(VdpError):
    """Image dimensions are missing, mismatched or too small for an operation."""


class ConfigError(VdpError):
    """A configuration value is out of its allowed range."""


class InputError(VdpError):
    """Input data is missing or unusable (empty directory, no decodable frames)."""


class LabelParseError(VdpError):
    """A label file line could not be parsed."""

    def __init__(self, message: str, line_number: int | None = None):
        if line_number is not None:
            message = f"line {line_number}: {message}"
        super().__init__(message)
        self.line_number = line_number


class ProtocolError(VdpError):
    """A detector response violated the wire contract."""


class ServiceError(VdpError):
    """The detector service stayed unreachable after all retries."""


class ManifestError(VdpError):
    """A manifest file could not be read or parsed."""


class ValidationError(ManifestError):
    """A manifest violated a schema invariant; names the offending key."""

    def __init__(self, key: str, message: str):
        super().__init__(f"{key}: {message}")
        self.key = key
