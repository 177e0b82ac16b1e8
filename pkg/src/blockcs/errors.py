"""Exception types shared across the package."""


class ConfigurationError(ValueError):
    """A model, channel, or experiment configuration is invalid or inconsistent."""


class RankDeficiencyError(ValueError):
    """A restricted sensing matrix is numerically rank deficient.

    Carries ``condition`` (largest/smallest singular value) when available.
    """

    def __init__(self, message, condition=None):
        super().__init__(message)
        self.condition = condition


class InfeasibleProblemError(ValueError):
    """The constraint set of an optimization problem is empty or unreachable."""


class BoundNotApplicableError(ValueError):
    """The recovery guarantee does not apply at the given isometry constant.

    Raised instead of returning a vacuous (negative or unbounded) value; sweep
    code catches this and marks the point as not applicable.
    """
