"""Exception hierarchy shared across the package."""


class DPPRecError(Exception):
    """Base class for every error raised by dpprec."""


class ValidationError(DPPRecError, ValueError):
    """A record or argument violates a data-model invariant."""


class ConfigError(DPPRecError, ValueError):
    pass


class DimensionError(DPPRecError, ValueError):
    pass


class UndefinedSimilarityError(DPPRecError, ValueError):
    """Cosine similarity requested for a zero vector."""


class RankError(DPPRecError):
    """The requested subset size exceeds the numerical rank of the kernel."""


class NumericalDegeneracyError(DPPRecError, ArithmeticError):
    """A basis collapsed below tolerance during projection-DPP sampling."""


class NotPSDError(DPPRecError, ValueError):
    pass


class EnumerationLimitError(DPPRecError, ValueError):
    pass
