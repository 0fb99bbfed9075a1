"""Exception hierarchy shared by every module in the package."""


class PseudosurvError(Exception):
    """Base class for all errors raised by this package."""


class MalformedInterval(PseudosurvError):
    """An observation violates the censoring-interval invariants.

    Raised for a negative left endpoint, a right endpoint smaller than the
    left one, a non-finite left endpoint, or a negative observation time.
    """


class ParseError(PseudosurvError):
    """A CSV cell could not be parsed into the expected domain.

    Carries the offending row index when raised by a loader.
    """

    def __init__(self, message, row=None):
        super().__init__(message)
        self.row = row


class EmptyInput(PseudosurvError):
    """An operation that requires data received an empty dataset."""


class NoEvents(PseudosurvError):
    """A (sub)sample contains no events, so no survival fit exists.

    ``subject`` identifies the removed subject when the empty-event sample
    arose during a leave-one-out computation, and is None otherwise.
    """

    def __init__(self, message, subject=None):
        super().__init__(message)
        self.subject = subject


class InvalidTau(PseudosurvError):
    """The restriction time tau is outside its domain (tau > 0 required)."""


class InvalidTime(PseudosurvError):
    """A time argument is outside its domain (t >= 0 and finite required)."""


class DegenerateInterval(PseudosurvError):
    """An interval with distinct endpoints carries zero probability mass
    under the current model, to machine precision."""


class DidNotConverge(PseudosurvError):
    """An iterative solver exhausted its budget without meeting tolerance.

    Carries the last iterate and diagnostics so callers can inspect or
    restart.
    """

    def __init__(self, message, last_iterate=None, grad_norm=None,
                 iterations=None):
        super().__init__(message)
        self.last_iterate = last_iterate
        self.grad_norm = grad_norm
        self.iterations = iterations


class NonIdentifiable(PseudosurvError):
    """A hazard rate diverged during fitting because the data cannot pin it
    down; the message names the empirically violated condition and piece."""

    def __init__(self, message, piece=None, condition=None):
        super().__init__(message)
        self.piece = piece
        self.condition = condition


class SingularInformation(PseudosurvError):
    """The observed information matrix is singular or numerically so."""


class SingularDesign(PseudosurvError):
    """The regression design matrix is rank deficient."""
