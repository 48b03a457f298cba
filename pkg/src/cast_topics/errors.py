"""Exception hierarchy shared across the pipeline.

The CLI maps these onto exit codes: DataError -> 1, missing inputs and
bad arguments -> 2, ExternalServiceError -> 3.
"""


class CastError(Exception):
    """Base class for all errors raised by this package."""


class DataError(CastError):
    """A data invariant was violated (bad file, bad vector, bad shape)."""


class PipelineError(CastError):
    """A pipeline stage failed; the message is tagged with the stage name."""

    def __init__(self, stage: str, message: str):
        self.stage = stage
        super().__init__(f"[{stage}] {message}")


class ExternalServiceError(CastError):
    """A remote service (LLM judge endpoint) failed or misbehaved."""
