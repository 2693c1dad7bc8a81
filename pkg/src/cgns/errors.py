"""Exception hierarchy for the conditional-Gaussian toolkit.

All numerical failures carry the time (or time index) at which they occurred
so that long runs can be debugged without re-running.
"""


class CgnsError(Exception):
    """Base class for all library errors."""


class InvalidParams(CgnsError, ValueError):
    """One or more model parameters violate their documented bounds."""

    def __init__(self, violations):
        self.violations = list(violations)
        super().__init__("invalid parameters: " + "; ".join(self.violations))


class NonFiniteCoefficient(CgnsError):
    """A coefficient evaluator produced NaN/Inf entries.

    Usually a user model bug or evaluation at a blown-up state.
    """

    def __init__(self, t, name=None):
        self.t = t
        self.name = name
        msg = f"non-finite coefficient at t={t!r}"
        if name:
            msg += f" ({name})"
        super().__init__(msg)


class NonFiniteState(CgnsError):
    """Simulated state overflowed or became non-finite (blow-up)."""

    def __init__(self, t, member=None):
        self.t = t
        self.member = member
        msg = f"non-finite or exploding state at t={t!r}"
        if member is not None:
            msg += f" (ensemble member {member})"
        super().__init__(msg)


class SingularObservationGramian(CgnsError):
    """The observational noise Gramian failed a positive-definiteness test."""

    def __init__(self, t):
        self.t = t
        super().__init__(f"observation noise Gramian not positive definite at t={t!r}")


class NotPsd(CgnsError):
    """A matrix that is provably PSD failed the eigenvalue tolerance check."""

    def __init__(self, name, min_eig):
        self.name = name
        self.min_eig = min_eig
        super().__init__(f"{name} not positive semidefinite (min eigenvalue {min_eig:.3e})")


class CovarianceBlowup(CgnsError):
    """A posterior covariance trace exceeded the blow-up threshold."""

    def __init__(self, t, trace):
        self.t = t
        self.trace = trace
        super().__init__(f"covariance blow-up at t={t!r} (trace {trace:.3e})")


class FilterCovSingular(CgnsError):
    """Filter covariance lost strict positive definiteness where the backward
    pass requires it."""

    def __init__(self, t, min_eig=None):
        self.t = t
        self.min_eig = min_eig
        msg = f"filter covariance singular at t={t!r}"
        if min_eig is not None:
            msg += f" (min eigenvalue {min_eig:.3e})"
        super().__init__(msg)


class DegenerateSeries(CgnsError, ValueError):
    """A normalized metric was requested on a series with zero variability."""
