"""Exception types raised by the library."""


class OUFPTError(Exception):
    """Base class for all library errors."""


class InvalidParams(OUFPTError, ValueError):
    pass


class ImmediateHit(OUFPTError, ValueError):
    """The process starts on the barrier, so the hitting time is zero."""


class InfiniteTime(OUFPTError, ValueError):
    """A compactified coordinate at or beyond its upper limit (t = infinity)."""


class OddGrid(OUFPTError, ValueError):
    """The block-by-block scheme needs an even number of steps."""


class RequiresDenseGrid(OUFPTError, ValueError):
    pass


class SolverBreakdown(OUFPTError, ArithmeticError):
    """A (near-)singular linear system was met while marching."""


class PrecisionExhausted(OUFPTError, ArithmeticError):
    pass


class UnstableConfig(OUFPTError, ValueError):
    pass


class UnstableConfigWarning(UserWarning):
    """Emitted when a solver switches to a more diffusive fallback."""
