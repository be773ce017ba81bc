"""
Exception types shared by the library, the CLI and the dashboard
"""


class RatebenchError(Exception):
    """Base class for every error raised by ratebench"""
    exit_code = 1


class ConfigError(RatebenchError, ValueError):
    """Invalid configuration, hyper-parameters or command-line usage"""
    exit_code = 1


class DataError(RatebenchError, ValueError):
    """Malformed, inconsistent or empty rating data"""
    exit_code = 2


class NumericalError(RatebenchError, ArithmeticError):
    """Non-finite matrix entries or a diverging optimizer"""
    exit_code = 3


def with_context(error: RatebenchError, **context) -> RatebenchError:
    """Return an error of the same class whose message carries extra context"""
    details = ", ".join(f"{key}={value}" for key, value in context.items())
    return type(error)(f"{error} [{details}]")
