"""Exception hierarchy shared by the library and the command line."""


class NetMomentError(Exception):
    """Base class for all errors raised by netmoment."""


class DomainError(NetMomentError, ValueError):
    """An argument lies outside the domain of a formula (e.g. y <= 0)."""


class SingularityError(DomainError):
    """Evaluation requested at a singular point of a kernel."""


class ContractError(NetMomentError, ValueError):
    """Inputs violate a documented precondition or invariant."""


class AssemblyError(NetMomentError):
    """Gram matrix assembly failed its self-consistency check."""


class SolverError(NetMomentError):
    """A linear solve failed (singular or indefinite system)."""


class BracketError(NetMomentError):
    """A norm target is not reachable inside the regularization bracket."""

    def __init__(self, message, M_low_lambda=None, M_high_lambda=None):
        super().__init__(message)
        self.M_low_lambda = M_low_lambda
        self.M_high_lambda = M_high_lambda
