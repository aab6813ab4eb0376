"""Exception hierarchy shared by all purcellkit modules."""


class PurcellKitError(Exception):
    """Base class for every error raised by purcellkit."""


class DomainError(PurcellKitError, ValueError):
    """An argument lies outside the domain where the model is defined."""


class SingularityError(PurcellKitError, ZeroDivisionError):
    """A closed-form expression hits an exact pole."""


class GridError(PurcellKitError, ValueError):
    """A sampling grid is malformed or too coarse for the requested analysis."""


class FitError(PurcellKitError, RuntimeError):
    """A fit cannot be attempted or its result is unusable."""


class SchemaError(PurcellKitError, ValueError):
    """A JSON document does not match the expected schema.

    The offending location is kept in :attr:`path` (dotted key path).
    """

    def __init__(self, message: str, path: str = ""):
        self.path = path
        super().__init__(f"{path}: {message}" if path else message)
