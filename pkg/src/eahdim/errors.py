"""Exception hierarchy shared by all modules."""


class EahdimError(Exception):
    """Base class for every error raised by the package."""


class InputError(EahdimError, ValueError):
    """Arguments violate an operation's preconditions."""


class NumericError(EahdimError, ArithmeticError):
    """A numerical procedure failed to converge or lost its bracket."""


class ResourceError(EahdimError, RuntimeError):
    """A requested enumeration exceeds the configured budget."""
