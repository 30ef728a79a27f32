"""Exception types shared across the package."""


class InsufficientHorizonError(RuntimeError):
    """A stopping rule could not be realized within the simulated horizon.

    Raised instead of silently capping: a winsorized stopping time would
    bias every downstream distributional test.
    """


class ContractionError(RuntimeError):
    """The backward perpetuity series failed to contract within budget."""


class SpectralGateError(ValueError):
    """The discount operator Q has an eigenvalue with non-positive real part,
    so e^{-tQ} does not vanish at infinity and the operator integral diverges."""


class ConfigError(ValueError):
    """An experiment configuration failed schema validation."""
