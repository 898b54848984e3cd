"""Exception taxonomy shared by all modules.

Every failure mode that a run manifest can report maps to one subclass of
:class:`PmefrontError`.  The ``classification`` attribute is the short
machine-readable tag written into ``manifest.json``; the CLI maps these to
exit codes (1 config, 2 precondition refusal, 3 numerical failure).
"""


class PmefrontError(Exception):
    """Base class for all library errors."""

    classification = "error"
    exit_code = 3


# --- configuration / input errors (exit 1) ---------------------------------

class ConfigInvalid(PmefrontError):
    classification = "config-invalid"
    exit_code = 1


class ExpressionParseError(ConfigInvalid):
    """Raised by the expression mini-language; carries the source position."""

    classification = "expression-parse-error"

    def __init__(self, message, position):
        super().__init__(f"{message} (at position {position})")
        self.position = position


# --- precondition refusals (exit 2) -----------------------------------------

class PreconditionRefused(PmefrontError):
    classification = "precondition-refused"
    exit_code = 2


# --- geometry ----------------------------------------------------------------

class NotOnBoundary(PmefrontError):
    classification = "not-on-boundary"


class CollarTooWide(PmefrontError):
    classification = "collar-too-wide"


# --- discretization ----------------------------------------------------------

class GridTooCoarse(PmefrontError):
    classification = "grid-too-coarse"


class CollarUnderResolved(PmefrontError):
    classification = "collar-under-resolved"


# --- transformation ----------------------------------------------------------

class DegenerateData(PmefrontError):
    classification = "degenerate-data"


class SingularC(PmefrontError):
    classification = "singular-c-matrix"

    def __init__(self, message, node=None):
        super().__init__(message)
        self.node = node


class NonpositiveDenominator(PmefrontError):
    classification = "nonpositive-denominator"

    def __init__(self, message, node=None):
        super().__init__(message)
        self.node = node


class NoRootInTube(PmefrontError):
    classification = "no-root-in-tube"


class MultipleRoots(PmefrontError):
    classification = "multiple-roots"


class TubeExceeded(PmefrontError):
    classification = "tube-exceeded"


class SingularJacobian(PmefrontError):
    classification = "singular-jacobian"


# --- linear solves -------------------------------------------------------------

class LinearSolveFailed(PmefrontError):
    classification = "linear-solve-failed"

    def __init__(self, message, condition_estimate=None):
        super().__init__(message)
        self.condition_estimate = condition_estimate


# --- formal solution -----------------------------------------------------------

class JetNotFlat(PmefrontError):
    classification = "jet-not-flat"


class NotFlatAtZero(PmefrontError):
    classification = "not-flat-at-zero"
