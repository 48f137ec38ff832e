"""Exception hierarchy shared by all modules."""


class TaskingError(Exception):
    """Base class for every error raised by fsmtask."""


class DimensionError(TaskingError, ValueError):
    """Raster or grid shapes are zero-sized or do not fit."""


class DomainError(TaskingError, ValueError):
    """An argument lies outside the domain of the operation."""


class InputError(TaskingError, ValueError):
    """Malformed or insufficient input data (files, prediction sets)."""


class PreconditionError(TaskingError, ValueError):
    """A documented precondition of an algorithm is violated."""


class ContractError(TaskingError, RuntimeError):
    """A caller-supplied object does not honour its contract."""
