"""Exception hierarchy shared by all modules."""


class ArakError(Exception):
    """Base class for every error raised by arakcf."""


class InvalidInput(ArakError, ValueError):
    """Malformed or out-of-domain input."""


class CapExceeded(ArakError):
    """An enumeration grew past its configured cap."""

    def __init__(self, what: str, size: int, cap: int):
        super().__init__(f"{what}: size {size} exceeds cap {cap}")
        self.what = what
        self.size = size
        self.cap = cap


class QuadratureError(ArakError):
    """Adaptive quadrature could not reach the requested tolerance."""


class NonLatticeError(ArakError):
    """Support is not contained in a common scaled integer lattice."""
