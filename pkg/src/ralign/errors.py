"""Exception hierarchy.

Every error carries a machine-readable ``code`` (the class name) and an
``exit_code`` used by the command line: 2 for input validation problems,
3 for an asserted inequality that failed.
"""


class AlignmentError(Exception):
    exit_code = 2

    @property
    def code(self) -> str:
        return type(self).__name__


class ValidationError(AlignmentError, ValueError):
    """Input violates a documented invariant."""


# core
class MismatchedSampleCount(ValidationError):
    pass


class NonFiniteEntry(ValidationError):
    pass


class TooFewSamples(ValidationError):
    pass


class DimensionMismatch(ValidationError):
    pass


# kernels
class ZeroRowNormalization(ValidationError):
    pass


class NonPSDPrecomputed(ValidationError):
    pass


class NotSymmetric(ValidationError):
    pass


class DegenerateData(ValidationError):
    pass


# metrics
class ZeroKernel(ValidationError):
    pass


class EmptySpectrum(ValidationError):
    pass


class SingularSystem(ValidationError):
    pass


class SpectralRadiusExceeded(ValidationError):
    pass


class SingularCovariance(ValidationError):
    pass


# task alignment
class ZeroTarget(ValidationError):
    pass


class NonBinaryTargets(ValidationError):
    pass


class ZeroPower(ValidationError):
    pass


# stitching
class UncertifiedLipschitz(ValidationError):
    pass


class ContainmentNotEstablished(ValidationError):
    pass


class RankDeficientHead(ValidationError):
    """A linear head cannot represent every linear predictor on the left features."""


class BoundViolation(AlignmentError):
    """An inequality that must hold was found violated beyond tolerance."""

    exit_code = 3


# synth / concentration
class UnrealizableOverlap(ValidationError):
    pass


class AmbientTooSmall(ValidationError):
    pass


class InvalidDelta(ValidationError):
    pass


# io
class FormatError(ValidationError):
    pass


class BadMagic(FormatError):
    pass


class UnsupportedVersion(FormatError):
    pass


class UnsupportedDtype(FormatError):
    pass


class TruncatedPayload(FormatError):
    pass


class TrailingBytes(FormatError):
    pass


class RaggedRows(FormatError):
    pass


class ParseError(FormatError):
    pass


class IoError(AlignmentError):
    """A file could not be read or written."""
