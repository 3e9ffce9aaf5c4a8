"""
Domain errors shared by every simulation app.

Management commands map ParameterError (and configuration problems) to exit
code 2 and any other UploadLabError to exit code 3.
"""


class UploadLabError(Exception):
    """Base class for all simulation errors."""


class ParameterError(UploadLabError, ValueError):
    """An argument is outside its documented range."""


class CapacityError(UploadLabError):
    """A dense or exact computation would exceed its size cap."""


class SingularChannelError(ParameterError):
    """The inverse of a fully depolarizing channel was requested."""


class DomainError(UploadLabError):
    """A root-finding bracket does not contain a root."""


class DivergenceError(UploadLabError):
    """A weight-enumerator series does not converge."""


class DegenerateInstanceError(UploadLabError):
    """The requested instance has no meaningful answer."""


class InvariantViolation(UploadLabError):
    """A runtime self-check failed."""


def require_probability(name, value, *, open_upper=False):
    """Validate that value lies in [0, 1] (or [0, 1) when open_upper)."""
    try:
        value = float(value)
    except (TypeError, ValueError):
        raise ParameterError(f'{name} must be a real number, got {value!r}')
    upper_ok = value < 1.0 if open_upper else value <= 1.0
    if not (value >= 0.0 and upper_ok):
        bracket = '[0, 1)' if open_upper else '[0, 1]'
        raise ParameterError(f'{name} must lie in {bracket}, got {value}')
    return value


def require_positive_int(name, value, minimum=1):
    if isinstance(value, bool) or int(value) != value or value < minimum:
        raise ParameterError(f'{name} must be an integer >= {minimum}, got {value!r}')
    return int(value)
