"""Typed exceptions shared across the package.

Everything derives from :class:`OrthoNNError` so callers can catch one
base type, and from ``ValueError`` so sloppy call sites that only guard
against the builtin still behave sensibly.
"""


class OrthoNNError(ValueError):
    """Base class for all orthonn errors."""


class ZeroVector(OrthoNNError):
    """A vector that must have positive norm was (numerically) zero."""


class DimensionTooSmall(OrthoNNError):
    """An operation requires at least 2 coordinates."""


class DimensionMismatch(OrthoNNError):
    """Two objects that must share a dimension do not."""


class WidthMismatch(OrthoNNError):
    """A circuit and a state/vector disagree on register width."""


class LayoutMismatch(OrthoNNError):
    """A loader layout name is unknown or inconsistent with the data."""


class TooWide(OrthoNNError):
    """Full statevector simulation requested beyond the width cap."""


class NotOrthogonal(OrthoNNError):
    """A matrix expected to be orthogonal fails the tolerance check."""


class NotSquare(OrthoNNError):
    """A matrix expected to be square is rectangular."""


class TraceMismatch(OrthoNNError):
    """A forward trace does not match the layer it is replayed against."""


class NonFiniteLoss(OrthoNNError):
    """Training produced a NaN or infinite loss."""


class SvdFailure(OrthoNNError):
    """numpy's SVD did not converge during an SVB update."""


class QrFailure(OrthoNNError):
    """QR factorization failed during a Stiefel retraction."""


class NormError(OrthoNNError):
    """A probability or norm invariant was violated at runtime."""


class AllDiscarded(OrthoNNError):
    """Error mitigation rejected every shot in a histogram."""


class ParseError(OrthoNNError):
    """A serialized artifact (circuit, network, CSV) is malformed."""


class NonBinaryLabel(OrthoNNError):
    """A classification label outside {0, 1} was encountered."""


class SingleClass(OrthoNNError):
    """A dataset split contains only one class where two are required."""


class RankDeficient(UserWarning):
    """PCA input had lower rank than the requested output dimension."""
