"""Typed failures shared across the engine.

Every error the stores or the gateway can raise is a subclass of
:class:`SeemError` so callers can catch engine failures without trapping
programming errors.
"""


class SeemError(Exception):
    """Base class for all engine errors."""


class ConfigError(SeemError):
    """A configuration value violates its stated bounds."""


class InputError(SeemError):
    """Caller-supplied input violates an operation precondition."""


class NotFound(SeemError):
    """A referenced passage, frame, or entity does not exist."""


class DimensionError(SeemError):
    """An embedding's dimensionality does not match the store's."""


class ProvenanceViolation(SeemError):
    """A provenance set references a passage id that is not stored."""


class GatewayError(SeemError):
    """Base class for model-gateway failures."""


class ExtractionFailure(GatewayError):
    """The gateway could not produce a valid extraction result."""


class JudgeFailure(GatewayError):
    """The same-event judge failed; callers treat this as 'no fusion'."""


class FusionFailure(GatewayError):
    """Frame fusion failed; callers keep both frames unfused."""


class GenerationFailure(GatewayError):
    """Answer generation failed; never degraded to a fabricated answer."""


class EmptyGraph(SeemError):
    """Propagation was requested over a graph with no nodes."""


class SeedError(SeemError):
    """A propagation seed distribution is invalid."""


class EmptyMemory(SeemError):
    """Retrieval was requested but neither memory layer has content."""


class LoadError(SeemError):
    """A transcript, dataset, or snapshot file could not be loaded."""


class BuildAborted(SeemError):
    """Memory construction exceeded the quarantine tolerance.

    The partially built snapshot is retained at ``partial_path`` when the
    build was asked to persist.
    """

    def __init__(self, message: str, partial_path: str | None = None):
        super().__init__(message)
        self.partial_path = partial_path
