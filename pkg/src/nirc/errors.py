"""Exception types shared across the toolchain."""


class NIRError(Exception):
    """Base class for all domain errors raised by nirc."""


class ParameterError(NIRError, ValueError):
    """A primitive was constructed with inconsistent or invalid parameters."""


class ShapeMismatch(NIRError, ValueError):
    pass


class ShapeConflict(NIRError, ValueError):
    """Shape propagation derived two different shapes for one port."""


class UnknownNode(NIRError, KeyError):
    pass


class NonODEKind(NIRError, TypeError):
    pass


class ParseError(NIRError, ValueError):
    """Malformed serialized input. ``location`` is a JSON-pointer-like path."""

    def __init__(self, message, location=""):
        self.location = location
        super().__init__(f"{location}: {message}" if location else message)


class VersionError(NIRError, ValueError):
    pass


class CycleWithoutState(NIRError, ValueError):
    pass


class UnsatisfiableConstraint(NIRError, ValueError):
    pass


class LengthMismatch(NIRError, ValueError):
    pass


class ValidationError(NIRError, ValueError):
    """Raised by operations that require a structurally valid graph."""

    def __init__(self, diagnostics):
        self.diagnostics = list(diagnostics)
        lines = "; ".join(str(d) for d in self.diagnostics)
        super().__init__(f"graph is invalid: {lines}")
