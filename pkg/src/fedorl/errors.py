"""Exception and warning types raised across the package."""


class FedorlError(Exception):
    """Base class for package errors."""


class ShapeMismatch(FedorlError, ValueError):
    pass


class UnsupportedSupport(FedorlError, ValueError):
    """A ratio pi1/pi2 was needed where pi1 > 0 but pi2 == 0."""


class EmptyDataset(FedorlError, ValueError):
    pass


class UndefinedDeltaPi(FedorlError, ValueError):
    """delta_pi needs D(pi, pi_b) > 0."""


class BudgetExceeded(FedorlError, ValueError):
    pass


class BoundViolation(FedorlError, AssertionError):
    """A numerically checked inequality did not hold."""

    def __init__(self, message, details=None):
        super().__init__(message)
        self.details = details or {}


class AgentFailure(FedorlError, RuntimeError):
    def __init__(self, agent_id, cause):
        super().__init__(f"agent {agent_id} failed: {cause!r}")
        self.agent_id = agent_id
        self.cause = cause


class ConfigError(FedorlError, ValueError):
    pass


class NotConverged(UserWarning):
    """Policy evaluation stopped at its iteration cap."""


class DegenerateRegularization(UserWarning):
    """Closed-form improvement called with lambda1 = lambda2 = 0; greedy fallback used."""
