"""Exception hierarchy shared across the pipeline."""


class CmineError(Exception):
    """Base class for all pipeline errors."""


class CorpusFormatError(CmineError):
    """Corpus file is unreadable or exceeds the malformed-line tolerance."""


class VectorFormatError(CmineError):
    """Vector file has a bad magic, dimension, or truncated payload."""


class DomainError(CmineError):
    """Input is outside the mathematical domain of an operation (e.g. zero vector under cosine)."""


class ProviderError(CmineError):
    """Embedding provider failed after retries."""


class ConfigError(CmineError):
    """Run configuration is invalid or inconsistent."""


class StageError(CmineError):
    """A pipeline stage failed; carries the stage name and any partial report."""

    def __init__(self, stage: str, message: str, report: dict | None = None):
        super().__init__(f"{stage}: {message}")
        self.stage = stage
        self.report = report
