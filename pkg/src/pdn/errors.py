"""Exception types shared across the package."""


class PdnError(Exception):
    """Base class for all package-specific errors."""


class InvalidGeometryError(PdnError):
    """Non-physical geometry: non-positive radius, length, or frequency."""


class InvalidArgumentError(PdnError):
    """An argument violates an operation's precondition."""


class InvalidInputError(PdnError):
    """Model or design input is malformed (wrong length, non-finite values)."""


class InvalidConfigError(PdnError):
    """A configuration value is out of range or an unknown key was given."""


class NumericalConsistencyError(PdnError):
    """A computed quantity violates a physical bound beyond tolerance."""


class DataFormatError(PdnError):
    """Dataset container is corrupt; carries the offending byte offset."""

    def __init__(self, message, offset=None):
        if offset is not None:
            message = f"{message} (byte offset {offset})"
        super().__init__(message)
        self.offset = offset


class TrainingDivergedError(PdnError):
    """Loss became non-finite during training."""

    def __init__(self, step, last_finite_loss):
        super().__init__(
            f"training diverged at step {step}; "
            f"last finite loss was {last_finite_loss:.6g}"
        )
        self.step = step
        self.last_finite_loss = last_finite_loss


class CheckpointError(PdnError):
    """Checkpoint file is unreadable or inconsistent with its declared config."""


class InvalidCandidateError(PdnError):
    """Candidate radii fall outside the configured design bounds."""


class DegenerateDataError(PdnError):
    """Input data has too little variance for the requested decomposition."""
