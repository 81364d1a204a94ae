"""Exception types shared across the package."""


class HandactError(Exception):
    """Base class for all errors raised by this package."""


# --- mesh / curvature ---

class ParseError(HandactError):
    """Mesh file could not be parsed; carries the offending line number."""

    def __init__(self, message, line=None):
        self.line = line
        if line is not None:
            message = f"line {line}: {message}"
        super().__init__(message)


class InvariantViolation(HandactError):
    """A mesh invariant failed; the message names the failed check."""


class NonManifoldEdge(HandactError):
    """An edge is shared by more than two faces, or twice with equal orientation."""


class InvalidIndex(HandactError):
    """A face references a vertex index that is out of range."""


class DegenerateArea(HandactError):
    """A per-vertex area fell below the minimum usable threshold."""


# --- taxonomy / annotations ---

class DuplicateId(HandactError):
    """Two taxonomy entries share an id."""


class BadCategory(HandactError):
    """A taxonomy entry uses an unknown grasp category."""


class EmptyAnnotation(HandactError):
    """A transition annotation has no entries."""


class IndexOutOfRange(HandactError):
    """An annotation index does not fit the episode frame count."""


# --- neural stack ---

class ShapeMismatch(HandactError):
    """Operands do not agree in shape."""


class InvalidRate(HandactError):
    """A rate parameter is outside its valid range."""


class NonFiniteGradient(HandactError):
    """A gradient buffer contains NaN or infinity."""


class NonFiniteLoss(HandactError):
    """Training produced a NaN or infinite loss."""


class EmptySequence(HandactError):
    """A sequence model was fed an empty sequence."""


# --- detection oracle ---

class MissingAnnotation(HandactError):
    """A frame record carries no ground-truth boxes."""


class NoHandDetected(HandactError):
    """No hand box available when resolving the primary hand."""


class IoError(HandactError):
    """Corpus files could not be written or read."""
