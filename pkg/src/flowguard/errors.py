"""Exception hierarchy shared by every flowguard module.

All library errors derive from :class:`FlowGuardError` so callers (and the
CLI) can separate data/validation failures from genuine bugs.
"""


class FlowGuardError(Exception):
    """Base class for data and validation errors raised by flowguard."""


class SchemaError(FlowGuardError):
    """The input file or mapping does not match the declared schema."""


class EmptyDataError(FlowGuardError):
    """An operation received, or would produce, a dataset with no rows."""


class InsufficientDataError(FlowGuardError):
    """Too few samples (overall or per class) for the requested operation."""


class StratificationError(InsufficientDataError):
    """A class is too small to stratify into the requested partitions."""


class UnimputableColumnError(InsufficientDataError):
    """A column has no observed values, so gaps in it cannot be filled."""


class ParameterError(FlowGuardError):
    """A parameter value is outside its documented domain."""


class ResampleError(FlowGuardError):
    """The requested class ratio cannot be reached from the given data."""
