"""Exception hierarchy shared by every fqlens module.

Each class carries the process exit code the CLI reports for it.
"""


class FqlensError(Exception):
    exit_code = 1


class DomainError(FqlensError, ValueError):
    """Argument outside the mathematical domain of a kernel (p not in [0, 1], q <= 0)."""

    exit_code = 2


class ConfigurationError(FqlensError, ValueError):
    exit_code = 2


class ParseError(FqlensError, ValueError):
    """Malformed input text; ``line`` is 1-based when known."""

    exit_code = 3

    def __init__(self, message, line=None, path=None):
        self.line = line
        self.path = path
        where = []
        if path is not None:
            where.append(str(path))
        if line is not None:
            where.append(f"line {line}")
        if where:
            message = f"{':'.join(where)}: {message}"
        super().__init__(message)


class FormatError(ParseError):
    """Corrupt or inconsistent binary/tabular container."""


class UndefinedStatisticError(FqlensError, ArithmeticError):
    """Statistic has no defined value (e.g. every locus monomorphic in the pool)."""

    exit_code = 4


class ExtinctionError(FqlensError):
    exit_code = 5
