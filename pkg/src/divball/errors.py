"""Exception types shared across the package."""


class UnsupportedFamilyError(ValueError):
    """Operation requested for a distribution family it is not defined for."""


class RootBracketError(RuntimeError):
    """A bracketed root search failed; carries the last bracket state."""

    def __init__(self, message, lo=None, hi=None, f_lo=None, f_hi=None):
        super().__init__(message)
        self.lo = lo
        self.hi = hi
        self.f_lo = f_lo
        self.f_hi = f_hi

    def __str__(self):
        base = super().__str__()
        if self.lo is None:
            return base
        return (f"{base} [bracket lo={self.lo!r}, hi={self.hi!r}, "
                f"f(lo)={self.f_lo!r}, f(hi)={self.f_hi!r}]")


class TailClassificationError(RuntimeError):
    """Symbolic tail class and numeric grid evidence disagree."""


class InfiniteWorstCaseError(ValueError):
    """The worst-case expectation is infinite for this nominal/divergence pair."""


class CalibrationError(RuntimeError):
    """A calibration target could not be bracketed or met."""
