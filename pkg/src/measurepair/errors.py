"""Exception types shared across the package."""


class MeasurePairError(Exception):
    """Base class for all library errors."""


class SchemaError(MeasurePairError):
    """Model document is structurally malformed."""


class ValidationError(MeasurePairError):
    """Model data violates an invariant (non-stochastic row, support mismatch, ...)."""


class DepthExceeded(MeasurePairError):
    """Requested depth lies beyond the model's stored horizon."""


class ContinuousCoordinate(MeasurePairError):
    """Operation needs a finite alphabet but hit a Gaussian coordinate."""


class IndexOutOfRange(MeasurePairError):
    """Step index lies outside the given prefix."""


class BudgetExceeded(MeasurePairError):
    """Atom or sample budget exceeded; raised instead of silently truncating."""


class EngineMismatch(MeasurePairError):
    """Prefix-dependent kernels were fed to the product closed-form engine."""


class NotMarkov(MeasurePairError):
    """Operation requires a Markov model."""


class NotProduct(MeasurePairError):
    """Operation requires a product-form model."""


class InconsistentCriteria(MeasurePairError):
    """Two certified criteria disagree; indicates an implementation bug."""
