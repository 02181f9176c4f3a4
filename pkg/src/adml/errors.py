"""Exception hierarchy.

Every error the library raises deliberately derives from AdmlError, so the
CLI can distinguish validation failures (exit 1) from unexpected runtime
failures (exit 2).
"""


class AdmlError(Exception):
    """Base class for all expected failures."""


# --- dataset ---------------------------------------------------------------

class MissingParticipantsFile(AdmlError):
    pass


class MissingMetadata(AdmlError):
    """Folder without a table row, or table row without a folder."""


class MalformedTsv(AdmlError):
    pass


class MissingBaseline(AdmlError):
    pass


class NotMciAtBaseline(AdmlError):
    pass


class UnknownTracer(AdmlError):
    pass


class EmptyGroup(AdmlError):
    pass


class OverlappingGroups(AdmlError):
    """A participant satisfies both group selectors of a task."""


class DuplicateScan(AdmlError):
    pass


class MissingImage(AdmlError):
    pass


# --- volume io -------------------------------------------------------------

class BadMagic(AdmlError):
    pass


class UnsupportedDatatype(AdmlError):
    pass


class NotThreeDimensional(AdmlError):
    pass


class IoFailure(AdmlError):
    pass


class NegativeFwhm(AdmlError):
    pass


class GridMismatch(AdmlError):
    pass


class ZeroReferenceMean(AdmlError):
    pass


class OutOfRangeProbability(AdmlError):
    pass


# --- features --------------------------------------------------------------

class EmptyMask(AdmlError):
    pass


class EmptyRegion(AdmlError):
    pass


class DimensionMismatch(AdmlError):
    pass


# --- classifiers -----------------------------------------------------------

class SingleClass(AdmlError):
    pass


class NonPsdGram(AdmlError):
    pass


class LengthMismatch(AdmlError):
    pass


class NonFinite(AdmlError):
    pass


class BadMaxFeatures(AdmlError):
    pass


class EmptyList(AdmlError):
    pass


# --- evaluation ------------------------------------------------------------

class KTooLarge(AdmlError):
    pass


class DegenerateFraction(AdmlError):
    pass


class InnerFoldDegenerate(AdmlError):
    pass


class SingleClassTruth(AdmlError):
    pass


class FractionTooSmall(AdmlError):
    pass


class DescriptorMismatch(AdmlError):
    pass


# --- cli / reporting -------------------------------------------------------

class ManifestError(AdmlError):
    pass


class SpecInvalid(AdmlError):
    """Invalid synthetic dataset specification."""


class EmptyDistribution(AdmlError):
    pass


class PipelineError(AdmlError):
    """Wraps an upstream failure with the name of the failing stage."""

    def __init__(self, stage, cause):
        self.stage = stage
        self.cause = cause
        super().__init__(f"stage '{stage}' failed: {cause}")
