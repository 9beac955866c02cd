"""Exception types shared across the package."""


class DcrsError(Exception):
    """Base class for all package-specific errors."""


class ShapeError(DcrsError):
    """Matrix dimensions are inconsistent or unsupported."""


class DegenerateInputError(DcrsError):
    """Input is rank-deficient or otherwise numerically degenerate."""


class SingularPairError(DcrsError):
    """Two codewords span (numerically) identical subspaces."""


class OptimizerAbort(DcrsError):
    """Non-finite objective or gradient encountered during optimization."""


class ConfigError(DcrsError):
    """Invalid experiment configuration."""
