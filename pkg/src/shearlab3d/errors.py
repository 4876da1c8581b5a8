"""Exception types mapped to CLI exit codes."""


class ShearletError(Exception):
    exit_code = 1


class PreconditionError(ShearletError, ValueError):
    """Invalid parameters or violated hypotheses (exit code 2)."""
    exit_code = 2


class ConvergenceError(ShearletError, RuntimeError):
    """Iteration or truncation failed to converge (exit code 3)."""
    exit_code = 3

    def __init__(self, message, history=None):
        super().__init__(message)
        self.history = list(history or [])


class OutputError(ShearletError, OSError):
    """Unreadable input or unwritable output (exit code 4)."""
    exit_code = 4
