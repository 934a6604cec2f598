"""Exception hierarchy shared by the library and the CLI.

Every error carries the process exit code the CLI should use for it:
1 for problems with user input (config, catalog, line topology), 2 for
failures while computing.
"""

from typing import Optional


class CryoBudgetError(Exception):
    """Base class for all cryobudget errors."""

    exit_code = 2

    def __init__(self, message: str, path: Optional[str] = None, line: Optional[int] = None):
        super().__init__(message)
        self.message = message
        self.path = path
        self.line = line

    def to_dict(self) -> dict:
        return {
            "error": type(self).__name__,
            "exit_code": self.exit_code,
            "message": self.message,
            "path": self.path,
            "line": self.line,
        }


class OutOfRangeError(CryoBudgetError):
    """A temperature or frequency lies outside the data a curve supports."""


class DomainError(CryoBudgetError):
    """An argument is outside the mathematical domain of a formula."""


class FitError(CryoBudgetError):
    """A least-squares fit cannot be carried out on the given data."""


class ConfigError(CryoBudgetError):
    """A project config, catalog file or measurement file is invalid."""

    exit_code = 1


class UnknownEntryError(ConfigError):
    """A material, cable, stage or preset name is not known."""


class TopologyError(ConfigError):
    """A line does not form a contiguous run through the fridge stages."""
