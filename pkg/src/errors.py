"""
Exception hierarchy shared by every stage of the pipeline.

Each error carries a machine-readable category and the process exit code the
CLI uses when the error escapes a command.
"""

from typing import Optional


class SpeechReprError(Exception):
    """Base class for all package errors."""

    category = "internal"
    exit_code = 1


class MissingInputError(SpeechReprError, FileNotFoundError):
    """A referenced input file or directory does not exist."""

    category = "missing_input"
    exit_code = 3


class ConfigError(SpeechReprError, ValueError):
    """A configuration value or config file is invalid."""

    category = "config"
    exit_code = 4


class DimensionError(SpeechReprError, ValueError):
    """Matrix or feature shapes do not agree."""

    category = "dimension"
    exit_code = 5


class ParseError(SpeechReprError, ValueError):
    """A binary or text artifact is malformed."""

    category = "parse"
    exit_code = 6

    def __init__(self, message: str, offset: Optional[int] = None, path: Optional[str] = None):
        self.offset = offset
        self.path = path
        where = []
        if path:
            where.append(str(path))
        if offset is not None:
            where.append(f"offset {offset}")
        super().__init__(f"{message} ({', '.join(where)})" if where else message)


class NumericalError(SpeechReprError, ArithmeticError):
    """A computation produced a non-finite value or a singular system."""

    category = "numerical"
    exit_code = 7


class SpeakerLookupError(SpeechReprError, KeyError):
    """Statistics or metadata requested for an unknown speaker."""

    category = "lookup"
    exit_code = 8

    def __str__(self) -> str:
        return str(self.args[0]) if self.args else "unknown speaker"


class ContractError(SpeechReprError, ValueError):
    """An operation was called outside its precondition."""

    category = "contract"
    exit_code = 9


class ShiftError(ContractError):
    """The prediction shift n does not fit inside the sequence."""


class EmptyInputError(ContractError):
    """An operation received no data to work on."""


class SamplingError(ContractError):
    """No eligible negative frames exist for an anchor."""


class ConsistencyError(SpeechReprError, RuntimeError):
    """Parameter, gradient and optimizer state disagree."""

    category = "consistency"
    exit_code = 10
