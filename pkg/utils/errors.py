"""
Error categories for the LLB simulator

Every category carries a distinct process exit code used by the CLI.
"""

from typing import Optional


class LLBError(Exception):
    """Base class for all simulator errors"""
    exit_code = 1


class ConfigurationError(LLBError):
    """Invalid configuration value or inconsistent sub-configuration"""
    exit_code = 2

    def __init__(self, message: str, key: Optional[str] = None):
        self.key = key
        if key:
            message = f"{key}: {message}"
        super().__init__(message)


class ConfigSyntaxError(LLBError):
    """Malformed configuration text"""
    exit_code = 3

    def __init__(self, message: str, line: Optional[int] = None):
        self.line = line
        if line is not None:
            message = f"line {line}: {message}"
        super().__init__(message)


class RegimeError(LLBError):
    """Parameters outside the above-Curie model (T <= Tc)"""
    exit_code = 4


class SummabilityError(ConfigurationError):
    """Noise family violates sum_k ||h_k||^2_{W^{1,inf}} < inf"""
    exit_code = 5


class UnsupportedDimensionError(LLBError):
    """Only 1D intervals and 2D rectangles are supported"""
    exit_code = 6


class BlowUpError(LLBError):
    """Non-finite state encountered while stepping"""
    exit_code = 7

    def __init__(self, message: str = "non-finite state", step: Optional[int] = None):
        self.step = step
        if step is not None:
            message = f"{message} at step {step}"
        super().__init__(message)


class StatisticsError(LLBError):
    """Not enough samples for a requested estimate"""
    exit_code = 8


class DimensionError(LLBError):
    """Array shape does not match the domain"""
    exit_code = 9


class LedgerError(LLBError):
    """Energy ledger missing or recorded at the wrong stride"""
    exit_code = 10


class OutputError(LLBError):
    """I/O failure or output path outside the output directory"""
    exit_code = 11


class UnknownCommandError(LLBError):
    """Subcommand not recognised"""
    exit_code = 12
