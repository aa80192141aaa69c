"""Package-wide exception types, mapped to CLI exit codes."""


class ValidationError(ValueError):
    """Bad inputs: out-of-range values, schema violations, invalid config."""


class InfeasibleProblem(RuntimeError):
    """An optimization or sampling problem has no feasible solution."""


class ConvergenceError(RuntimeError):
    """An iterative solver failed to converge within its iteration budget."""
