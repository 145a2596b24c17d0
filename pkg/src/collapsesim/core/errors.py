"""Exception types raised across the package."""


class CollapseSimError(Exception):
    """Base class for all package errors."""


class InvalidArgumentError(CollapseSimError, ValueError):
    pass


class ContractError(CollapseSimError, ValueError):
    """An input violates a documented precondition (e.g. an unnormalized state)."""


class GeometryError(CollapseSimError, ValueError):
    """A state is unresolvable on its grid or leaks into the boundary region."""


class DomainError(CollapseSimError, ValueError):
    pass


class OutOfValidityError(CollapseSimError, ValueError):
    """An approximate formula was evaluated outside its stated range."""


class NumericFailure(CollapseSimError, ArithmeticError):
    pass


class StepSizeError(NumericFailure):
    """Per-step norm drift exceeded the configured tolerance."""


class RunawayError(NumericFailure):
    """A first-passage simulation exhausted its step budget."""


class DegenerateJumpError(NumericFailure):
    pass
