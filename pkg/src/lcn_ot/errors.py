"""Exception types raised by the solver stack."""


class LcnOtError(Exception):
    """Base class for all library errors."""


class DimensionError(LcnOtError, ValueError):
    pass


class NonFiniteError(LcnOtError, ValueError):
    pass


class StabilizationError(LcnOtError, FloatingPointError):
    """Scaling vectors over- or underflowed during Sinkhorn updates."""

    def __init__(self, message, variant=None):
        super().__init__(message if variant is None else f"[{variant}] {message}")
        self.variant = variant


class NegativeKernelError(StabilizationError):
    """A low-rank matvec produced a nonpositive entry for a positive input.

    Nyström-based kernels are not guaranteed to be nonnegative. When this is
    raised the usual remedy is to fall back to sparse Sinkhorn.
    """


class FactorizationError(LcnOtError, ArithmeticError):
    """The landmark kernel matrix could not be inverted within the jitter budget."""


class ConfigError(LcnOtError, ValueError):
    pass


class UndefinedMetricError(LcnOtError, ValueError):
    pass
