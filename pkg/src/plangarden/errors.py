"""Exception taxonomy shared across the package.

Errors are grouped by the subsystem that raises them. Everything inherits
from GardenError so callers can catch broadly at service boundaries.
"""

from __future__ import annotations


class GardenError(Exception):
    """Base class for all package errors."""


# --- garden graph ---------------------------------------------------------

class SeedAlreadyExists(GardenError):
    pass


class EmptyText(GardenError):
    pass


class UnknownParent(GardenError):
    pass


class UnknownNode(GardenError):
    pass


class KindViolation(GardenError):
    pass


class LeafViolation(KindViolation):
    """PlanStep child attached under a node flagged as a leaf."""


class PreconditionViolation(GardenError):
    pass


# --- completion / embedding providers -------------------------------------

class ProviderError(GardenError):
    pass


class TransportError(ProviderError):
    pass


class ScriptExhausted(TransportError):
    """Replay script ran out of responses for a role."""


class AuthError(ProviderError):
    pass


class ProviderRefusal(ProviderError):
    """Provider returned empty or blocked output without reporting truncation."""


class NoVisionCapability(ProviderError):
    pass


class EmbeddingProviderError(ProviderError):
    pass


# --- planning -------------------------------------------------------------

class ParseFailure(GardenError):
    pass


class UnknownSubmodule(GardenError):
    pass


# --- code generation ------------------------------------------------------

class NoFilesFound(GardenError):
    pass


class PathViolation(GardenError):
    pass


class NoLayoutFound(GardenError):
    pass


class MalformedLayout(GardenError):
    pass


# --- asset pipeline -------------------------------------------------------

class EmptyIndex(GardenError):
    pass


class FetchError(GardenError):
    pass


class DuplicateAssetId(GardenError):
    pass


class MissingFile(GardenError):
    pass


class AdapterError(GardenError):
    """Failure in one stage of the text-to-image-to-mesh chain."""

    def __init__(self, stage: str, message: str) -> None:
        super().__init__(f"{stage}: {message}")
        self.stage = stage


# --- engine adapter -------------------------------------------------------

class EngineUnavailable(GardenError):
    pass


class ToolchainMissing(EngineUnavailable):
    pass


class LaunchFailure(GardenError):
    pass


class UnsupportedFormat(GardenError):
    pass


class ScenarioExhausted(GardenError):
    """Mock engine scenario consumed past its scripted entries."""


# --- orchestration --------------------------------------------------------

class InvalidTarget(GardenError):
    pass


class SnapshotMissing(GardenError):
    pass


# --- persistence ----------------------------------------------------------

class CorruptDocument(GardenError):
    pass


class VersionMismatch(GardenError):
    pass


class SequenceGap(GardenError):
    pass


class UnknownBackup(GardenError):
    pass


class ConflictingIds(GardenError):
    pass
