"""Exception hierarchy shared by the library and the CLI."""


class CaboError(Exception):
    """Base class for every error raised by this package."""


class ConfigError(CaboError):
    pass


class DimensionError(CaboError, ValueError):
    pass


class NumericalError(CaboError, ArithmeticError):
    pass


class DataError(CaboError):
    pass


class MissingFileError(DataError, FileNotFoundError):
    pass


class RaggedRowError(DataError):
    pass


class NonNumericCellError(DataError):
    pass


class UnknownLabelError(DataError):
    pass


class SchemaError(DataError):
    pass


class BudgetError(CaboError):
    """A reveal was requested beyond the per-event budget."""


class SessionStateError(CaboError):
    """A session was used out of order (reveal after commit, double commit)."""
