"""Shared exception types for the fraclandscape package."""


class ContractError(ValueError):
    """An operation's input contract was violated (shape/length mismatch, bad norm)."""


class GridMismatchError(ContractError):
    """Two objects that must share a grid do not."""


class DomainError(ContractError):
    """A parameter lies outside its admissible range."""


class ConfigError(ValueError):
    """A run configuration failed validation."""


class UnsupportedModelError(ValueError):
    """The requested quantity is not defined for this model variant."""


class DegeneracyError(RuntimeError):
    """Orthonormalization hit a numerically dependent column."""

    def __init__(self, column: int, residual_norm: float):
        self.column = column
        self.residual_norm = residual_norm
        super().__init__(
            f"direction column {column} is numerically dependent "
            f"(post-projection norm {residual_norm:.3e})"
        )


class CapacityError(RuntimeError):
    """A dense computation was requested above the supported problem size."""
