"""Exception types shared across the package."""


class ShapeMismatch(ValueError):
    """Operands have incompatible shapes for the requested operation."""


class NumericStateError(ArithmeticError):
    """A tensor left the finite-value regime (NaN or Inf)."""


class DeterminismError(RuntimeError):
    """Two evaluations that must agree bitwise did not."""


class ConfigError(ValueError):
    """A configuration value is out of its documented range or malformed."""


class CorpusError(ValueError):
    """A corpus manifest or record violates its invariants."""
