"""Exception types shared across the package."""


class PenmixError(Exception):
    """Base class for all penmix errors."""


class NotPositiveDefinite(PenmixError):
    """A matrix required to be symmetric positive definite is not."""


class DimensionMismatch(PenmixError):
    """Operands disagree on dimension or shape."""


class PreconditionViolated(PenmixError):
    """An operation was called outside its stated domain."""


class AllZeroRow(PenmixError):
    """Every component density underflowed for some observation."""


class InvalidInit(PenmixError):
    """An EM initial value does not match the data or requested order."""


class AllDegenerate(PenmixError):
    """Every unpenalized EM run degenerated; no ratified MLE exists."""


class UnknownModel(PenmixError):
    """A catalog identifier does not resolve to a simulation model."""


class InsufficientReplications(PenmixError):
    """Too few successful replications to aggregate."""
