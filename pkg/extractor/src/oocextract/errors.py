"""Extractor error types."""


class ExtractError(Exception):
    """Base class for extractor errors."""


class ModelLoadError(ExtractError):
    """A configured model or component could not be resolved."""


class CorpusParse(ExtractError):
    """The raw corpus is structurally invalid."""
