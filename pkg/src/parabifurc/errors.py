"""Exception hierarchy.

Two roots matter to callers (and to the CLI exit codes): :class:`DomainError`
for inputs outside the declared domains or failed preconditions, and
:class:`NumericalError` for solvers that did not deliver.
"""


class ParabifurcError(Exception):
    pass


class DomainError(ParabifurcError, ValueError):
    pass


class NumericalError(ParabifurcError, ArithmeticError):
    pass


class OrderError(DomainError):
    pass


class EscapeError(NumericalError):
    """An iterate left the dynamical domain; ``partial`` holds the orbit so far."""

    def __init__(self, message, partial=None):
        super().__init__(message)
        self.partial = [] if partial is None else list(partial)


class NoConvergence(NumericalError):
    pass


class SingularJacobian(NumericalError):
    pass


class DegenerateJacobian(NumericalError):
    pass


class NotAttracted(NumericalError):
    pass


class SuperattractingUnsupported(DomainError):
    pass


class NotHyperbolic(DomainError):
    pass


class NotParabolic(DomainError):
    pass


class HypcohViolated(DomainError):
    pass


class DegenerateParabolic(NumericalError):
    pass


class BranchJump(NumericalError):
    pass


class ParameterOutsideW(DomainError):
    pass


class ShapeMismatch(DomainError):
    pass


class ResidualUnderflow(NumericalError):
    pass


class DerivativeVanished(NumericalError):
    pass


class DegenerateFold(NumericalError):
    pass


class CountMismatch(NumericalError):
    pass


class NotOdd(DomainError):
    pass


class CensusMismatch(NumericalError):
    pass
