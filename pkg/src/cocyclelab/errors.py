"""Exception types shared across the package."""


class CocycleLabError(Exception):
    """Base class for all package errors."""


class ShapeError(CocycleLabError):
    """Dimension mismatch between operators, vectors or frames."""


class EmptySampleError(CocycleLabError):
    """A sampling routine was asked for zero points."""


class FrameCollapseError(CocycleLabError):
    """QR frame collapsed (R-diagonal underflow) at a given step."""

    def __init__(self, step, value):
        self.step = step
        self.value = value
        super().__init__(f"frame collapse at step {step}: R-diagonal {value:.3e}")


class RankLossError(CocycleLabError):
    """An image frame became numerically rank-deficient."""


class InsufficientHorizonError(CocycleLabError):
    """A requested quantity is not resolved at the available horizon."""


class IncompleteEvidenceError(CocycleLabError):
    """A classification was requested without the required certificates."""


class ParameterError(CocycleLabError):
    """Perturbation parameters violate a structural precondition."""


class ConfigError(CocycleLabError):
    """An experiment config failed validation; message carries the field path."""
