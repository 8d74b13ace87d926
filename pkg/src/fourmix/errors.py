"""Exception hierarchy shared by all fourmix modules."""


class FourmixError(Exception):
    """Base class for library errors."""


class InvalidArgument(FourmixError, ValueError):
    pass


class InvalidData(FourmixError, ValueError):
    pass


class UnsupportedDimension(InvalidArgument):
    pass


class TrainingDiverged(FourmixError, RuntimeError):
    pass


class DegenerateFit(FourmixError, RuntimeError):
    pass


class WidenDomainError(FourmixError, ValueError):
    """Raised when an integration window leaves too much tail mass outside."""


class NoClosedForm(InvalidArgument):
    """Requested quantity (e.g. a density) has no closed form for this target."""
