"""Exception types shared across the pipeline."""

from __future__ import annotations


class DualGenError(Exception):
    """Base class for every error raised by this package."""

    exit_code = 2


class ConfigError(DualGenError):
    exit_code = 1


class DataError(DualGenError):
    """Malformed input data: bad headers, missing baselines, empty inputs."""

    exit_code = 2


class EmptyCatalogError(DataError):
    pass


class NotFoundError(DataError):
    """A keyword could not be resolved to a location."""

    def __init__(self, keyword: str):
        super().__init__(f"location not found: {keyword!r}")
        self.keyword = keyword


class BackendError(DualGenError):
    exit_code = 3


class TransportError(BackendError):
    """Remote service unreachable or failing after all retries."""


class FixtureMissError(BackendError):
    pass


class ReplayExhaustedError(BackendError):
    pass


class ExtractionError(BackendError):
    """The extractor produced no usable keyword."""


class JudgeParseError(BackendError):
    pass


STAGES = ("extract", "bridge", "generate")


class StageError(DualGenError):
    """Failure inside one stage of the query pipeline."""

    def __init__(self, stage: str, cause: Exception):
        if stage not in STAGES:
            raise ValueError(f"unknown stage {stage!r}")
        super().__init__(f"[{stage}] {type(cause).__name__}: {cause}")
        self.stage = stage
        self.cause = cause
        self.exit_code = getattr(cause, "exit_code", 2)

    @property
    def kind(self) -> str:
        if isinstance(self.cause, NotFoundError):
            return "not_found"
        if isinstance(self.cause, TransportError):
            return "transport"
        if isinstance(self.cause, ExtractionError):
            return "extraction_failed"
        if isinstance(self.cause, BackendError):
            return "backend"
        return "error"

    def to_dict(self) -> dict:
        return {"error": self.kind, "stage": self.stage, "detail": str(self.cause)}
