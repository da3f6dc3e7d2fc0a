"""Exception types shared across the package."""


class ShapeError(ValueError):
    """Operands have incompatible or unsupported shapes."""


class NumericError(ArithmeticError):
    """A computation produced non-finite values or an invalid numeric state."""


class TapeError(RuntimeError):
    """The autodiff tape was used out of order (e.g. backward on a stale tape)."""


class ConfigError(ValueError):
    """An experiment configuration is missing, malformed, or inconsistent."""


class DataError(ValueError):
    """A dataset request or file violates the dataset contract."""


class SamplingError(RuntimeError):
    """A sampler cannot satisfy its distinctness requirements."""
