"""Exception hierarchy shared by all hjminimax modules."""


class HJError(Exception):
    """Base class for all errors raised by this package."""


# --- expression parsing / evaluation ---

class ExprSyntaxError(HJError):
    """Malformed expression source. Carries the byte offset of the problem."""

    def __init__(self, message, offset):
        super().__init__(f"{message} (at offset {offset})")
        self.offset = offset


class UnknownIdentifier(HJError):
    """Identifier outside the variable/function whitelist."""


class DomainError(HJError):
    """Evaluation left the declared domain (division by zero, sqrt of a negative, ...)."""


class NonFinite(HJError):
    """A computation produced inf or nan where a finite value is required."""


# --- genericity / resolution ---

class NonGeneric(HJError):
    """Input violates a genericity assumption (tied critical values, degenerate
    cusp, tangential intersection, ...). Callers may perturb and retry."""


class ResolutionTooCoarse(HJError):
    """Sampling resolution cannot separate nearby features."""


class MalformedInput(HJError):
    """Structurally invalid input (e.g. non-alternating Morse indices)."""


# --- characteristics / fronts ---

class RefinementDepthExceeded(HJError):
    """Seed refinement did not quiesce within the depth limit."""

    def __init__(self, message, strands=None):
        super().__init__(message)
        self.strands = strands


class NotLong(HJError):
    """Front endpoints are not graph-like."""


class IndexInconsistency(HJError):
    """Branch-index propagation from the two front ends disagrees."""


class BallTooLarge(HJError):
    """Surgery ball intersects a section not incident to the triangle vertex."""


class DegenerateFiber(HJError):
    """Vertical fiber passes through a cusp projection or double point."""


class InconsistentSweep(HJError):
    """Coupling pair identity changed without a mediating front event."""


class NoVanishingTriangle(HJError):
    """Front is not smooth but the vanishing rule found no removable triangle."""

    def __init__(self, message, diagnostics=None):
        super().__init__(message)
        self.diagnostics = diagnostics or {}


# --- viscosity solvers ---

class OutOfRange(HJError):
    """Legendre transform queried outside the attainable slope range."""


class CFLViolation(HJError):
    """Time step violates the monotone-scheme stability bound."""
