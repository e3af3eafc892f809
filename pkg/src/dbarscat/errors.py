"""Exception and warning types shared across the package."""


class FieldError(ValueError):
    """A field carries non-finite values or has the wrong shape/dtype."""


class GridMismatchError(ValueError):
    """Two fields that must share a grid do not."""


class ConvergenceError(RuntimeError):
    """An iterative solve failed to reach its residual target."""


class ConfigError(ValueError):
    """Invalid configuration value or malformed config file."""


class FormatError(OSError):
    """A binary artifact has the wrong magic, version, or payload size."""


class BoundaryContaminationWarning(UserWarning):
    """Input to a convolution is not negligible on the boundary frame."""
