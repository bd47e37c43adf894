"""Exception types raised across the package."""


class PlanarCyclesError(Exception):
    """Base class for every error raised by planarcycles."""


class DomainExceeded(PlanarCyclesError, ValueError):
    """A state left the strip ``(a, b) x R`` on which the system is defined."""

    def __init__(self, x, domain):
        self.x = x
        self.domain = domain
        super().__init__(f"x={x!r} outside domain {domain!r}")


class NonPositiveFactor(PlanarCyclesError, ValueError):
    """Sampling found a time-rescaling factor that is not strictly positive."""

    def __init__(self, which, point, value):
        self.which = which
        self.point = point
        self.value = value
        super().__init__(f"{which}({point!r}) = {value!r} is not > 0")


class MissingCurves(PlanarCyclesError, ValueError):
    """The operation needs the non-trivial zero curves psi1, psi2."""


class NotSpecialForm(PlanarCyclesError, TypeError):
    """The operation is only defined for F(x,y) = x (x - psi1(y)) (x - psi2(y))."""


class NoBracket(PlanarCyclesError, RuntimeError):
    def __init__(self, x, scanned):
        self.x = x
        self.scanned = scanned
        super().__init__(f"no sign change of phi(y) - F({x!r}, y) on y in {scanned!r}")


class StepUnderflow(PlanarCyclesError, RuntimeError):
    pass


class BudgetExhausted(PlanarCyclesError, RuntimeError):
    pass


class NoReturn(PlanarCyclesError, RuntimeError):
    """The orbit did not come back to the positive x-axis within budget."""


class LostBracket(PlanarCyclesError, RuntimeError):
    """Refinement could not reach the residual target inside the bracket."""


class NotClosed(PlanarCyclesError, ValueError):
    pass


class WrongCrossingCount(PlanarCyclesError, ValueError):
    pass


class NonPositiveParam(PlanarCyclesError, ValueError):
    pass


class GrazingWarning(UserWarning):
    """Event function vanished tangentially; the contact is not reported as an event."""
