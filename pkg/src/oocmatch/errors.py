"""Exception types shared across the package."""


class OocmatchError(Exception):
    """Base class for all package errors."""


class MissingFile(OocmatchError):
    """A required store file is absent."""


class MagicMismatch(OocmatchError):
    """An embedding file header is malformed (magic, version, modality, dim)."""


class DimMismatch(OocmatchError):
    """Embedding payload size disagrees with the manifest or header."""


class ManifestParse(OocmatchError):
    """The manifest is structurally invalid (bad JSON, fields, or id sequence)."""


class InvalidConfig(OocmatchError):
    """A configuration value violates its contract."""


class UnknownId(OocmatchError):
    """A sample id is outside the store's 0..N-1 range."""


class LengthMismatch(OocmatchError):
    """Two vectors passed to a kernel have different lengths."""


class DuplicateCaption(OocmatchError):
    """Two match results share a caption id within one split."""


class InsufficientRecords(OocmatchError):
    """A sampling request exceeds the available records."""


class UnknownReport(OocmatchError):
    """An unrecognized report name was requested."""
