"""Exception hierarchy shared across the package.

Each class maps onto one CLI exit code (see ``irn.cli``).
"""


class IrnError(Exception):
    exit_code = 1


class ConfigError(IrnError, ValueError):
    exit_code = 1


class DimensionError(ConfigError):
    """Tensor shapes do not line up."""


class DataError(IrnError, ValueError):
    exit_code = 2


class ParseError(DataError):
    def __init__(self, message, path=None, line=None):
        where = ""
        if path is not None:
            where = f"{path}" + (f":{line}" if line is not None else "") + ": "
        super().__init__(where + message)
        self.path = path
        self.line = line


class NumericError(IrnError, ArithmeticError):
    exit_code = 3
