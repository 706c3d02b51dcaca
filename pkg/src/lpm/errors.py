"""Exception hierarchy.

Every error raised on purpose by the package derives from :class:`LPMError`.
Two broad families matter to the command line driver:

* :class:`MathematicalFailure` -- the mathematics says no (gap condition fails,
  the linear flow is not split with the requested exponents, the fixed-point
  iteration does not behave like a contraction).
* everything else -- malformed input, unreadable files, numerical accidents.
"""


class LPMError(Exception):
    """Base class of all package errors."""


# -- expressions --------------------------------------------------------------


class ExprError(LPMError, ValueError):
    """Base class of expression errors. ``position`` is a 0-based offset."""

    def __init__(self, message, position=None):
        self.position = position
        if position is not None:
            message = f"{message} (at position {position})"
        super().__init__(message)


class MalformedExpression(ExprError):
    """An expression string cannot be turned into a valid tree."""


class ExprSyntaxError(MalformedExpression):
    """Grammar violation."""


class UnknownIdentifier(MalformedExpression):
    """Name that is neither a variable, a function nor a declared constant."""


class IndexOutOfRange(MalformedExpression):
    """State variable ``u<j>`` with ``j`` outside ``1..n``."""


class EvalDomainError(ExprError, ArithmeticError):
    """Evaluation left the real domain (log of x <= 0, division by zero...)."""


class NotDifferentiable(ExprError, ArithmeticError):
    """Derivative requested at a kink (``abs`` or ``sqrt`` at 0)."""


# -- problem validation -----------------------------------------------------


class ValidationError(LPMError, ValueError):
    """A problem specification violates a structural requirement."""

    def __init__(self, message, report=None):
        self.report = report
        super().__init__(message)


class ZeroConditionViolated(ValidationError):
    """``f(t, 0)`` is not the zero vector."""


class NonBlockDiagonal(ValidationError):
    """``A(t)`` couples the first ``k`` and the last ``n - k`` coordinates."""


class SpecRangeError(ValidationError):
    """A scalar field is outside its admissible range."""


# -- linear process -----------------------------------------------------------


class IllConditioned(LPMError, ArithmeticError):
    """A fundamental block is numerically singular inside the window."""


class OutOfWindow(LPMError, ValueError):
    """A time outside the integrated grid was requested."""


class TruncationSuspect(LPMError, ArithmeticError):
    """A windowed supremum was attained at the edge of its window."""


# -- mathematical failures ------------------------------------------------------


class MathematicalFailure(LPMError):
    """The requested object does not exist under the given data."""


class NotSplit(MathematicalFailure):
    """Weighted linear flow keeps growing: no splitting with these exponents."""


class GapFails(MathematicalFailure):
    """No sigma in (rho, gamma) makes the Lyapunov-Perron map a contraction."""


class NonContraction(MathematicalFailure):
    """Observed increment ratios exceed the certified contraction factor."""


class NoConvergence(MathematicalFailure):
    """An iteration hit its step limit or left its admissible range."""


class TailTooLarge(MathematicalFailure):
    """The truncation tail bound exceeds the configured tolerance."""


class StateOverflow(LPMError, OverflowError):
    """A forward trajectory left every reasonable box (norm > 1e12)."""


# -- problem files --------------------------------------------------------------


class ProblemFileError(LPMError, ValueError):
    """Base class for problem-file errors; ``line`` is 1-based when known."""

    def __init__(self, message, line=None):
        self.line = line
        if line is not None:
            message = f"line {line}: {message}"
        super().__init__(message)


class ParseError(ProblemFileError):
    """Line that does not follow the ``key = value`` grammar."""


class UnknownKey(ProblemFileError):
    """Key not recognised in its section."""


class MissingRequired(ProblemFileError):
    """A mandatory key is absent."""


class RangeError(ProblemFileError):
    """A value is present but outside its admissible range."""
