from typing import Optional


class NRSpaceError(Exception):
    """Base class for every error raised by nrspace."""


class SpecError(NRSpaceError, ValueError):
    """Bad algebra spec, unknown space or a vector that does not fit the spec."""


class ParseError(SpecError):
    def __init__(self, message: str, location: Optional[str] = None):
        self.location = location
        if location:
            message = f"{location}: {message}"
        super().__init__(message)


class DirectionError(SpecError):
    """Direction is zero, not in m, or not of unit length."""


class ReconstructionError(NRSpaceError):
    """A matrix-oracle coefficient could not be identified as a small radical."""


class UnsupportedSpaceError(NRSpaceError):
    """The space lacks the structure an operation needs (closed form, derivative relation)."""


class TruncationError(NRSpaceError):
    def __init__(self, bound: float, tolerance: float, t: float, order: int):
        self.bound = bound
        self.tolerance = tolerance
        self.t = t
        self.order = order
        super().__init__(
            f"series tail bound {bound:.3e} exceeds tolerance {tolerance:.1e} at t={t:g} "
            f"with order {order}; raise the order or use the RK oracle"
        )
