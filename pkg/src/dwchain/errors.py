"""Exception types shared across the package."""

__all__ = [
    "NoCrossing",
    "InfeasibleBranch",
    "NonDifferentiable",
    "MeanMismatch",
    "SingularSystem",
    "BudgetExhausted",
    "NotInMinimizerSet",
    "NoConvergence",
    "UnclassifiedSegment",
    "ConfigError",
]


class NoCrossing(Exception):
    """The two wells never cross on the search range (degenerate single-well input)."""


class InfeasibleBranch(Exception):
    """A well-occupancy branch cannot meet the average-slope constraint."""


class NonDifferentiable(Exception):
    """The convex envelope has distinct one-sided slopes at the requested point."""


class MeanMismatch(Exception):
    """A chain configuration violates its declared mean-slope invariant."""


class SingularSystem(Exception):
    """The projected Newton system stayed numerically singular even after damping."""


class BudgetExhausted(Exception):
    """The solve budget ran out before the mandatory candidates were evaluated.

    Carries the best result found so far in ``best`` (may be None).
    """

    def __init__(self, message, best=None):
        super().__init__(message)
        self.best = best


class NotInMinimizerSet(Exception):
    """A transition query names a slope tuple that is not a minimizer for this mean."""


class NoConvergence(Exception):
    """Window-size extrapolation hit its cap before reaching the tolerance.

    Carries the sequence of window values computed so far in ``values``.
    """

    def __init__(self, message, values=()):
        super().__init__(message)
        self.values = tuple(values)


class UnclassifiedSegment(Exception):
    """A low-energy run matched no known microstate within the classification radius."""


class ConfigError(Exception):
    """Run-configuration validation failure with per-field diagnostics."""

    def __init__(self, problems):
        self.problems = list(problems)
        super().__init__("; ".join(f"{field}: {msg}" for field, msg in self.problems))
