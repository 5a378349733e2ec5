"""Exception types shared across the package."""


class BmldroomError(Exception):
    """Base class for all package errors."""


class GeometryError(BmldroomError, ValueError):
    """Degenerate or invalid room geometry, or a point outside the room."""


class InsufficientDecayError(BmldroomError):
    """The energy decay curve does not span the range needed for a T30 fit.

    ``drr`` holds the direct-to-reverberant ratio, which is still defined.
    """

    def __init__(self, message, drr=None):
        super().__init__(message)
        self.drr = drr


class NoValidFrameError(BmldroomError):
    """Every analysis frame was flagged (silent masker or target)."""


class ContractError(BmldroomError, ValueError):
    """A caller-supplied callable broke its contract."""
