"""Exception hierarchy shared by all modules."""


class CoopSenseError(Exception):
    """Base class for library errors."""


class DomainError(CoopSenseError, ValueError):
    """An argument lies outside the mathematical domain of an operation."""


class InfeasibleError(CoopSenseError):
    """No sensing configuration meets the targets within the allowed time."""


class SizeGuardError(CoopSenseError):
    """Instance too large for an exponential-time solver."""


class InvalidScheduleError(CoopSenseError):
    """A schedule violates one or more feasibility invariants."""

    def __init__(self, violations):
        self.violations = list(violations)
        super().__init__("invalid schedule: " + "; ".join(self.violations))


class NoSolutionError(CoopSenseError):
    """Every candidate strategy violates the variance constraint."""


class FitError(CoopSenseError):
    """Exponential fit of the sensing-time curve failed."""


class ScenarioError(CoopSenseError, ValueError):
    """Malformed scenario description."""
