"""Exception types shared across the library."""


class D4PGError(Exception):
    """Base class for all library errors."""


class ConfigError(D4PGError):
    """Invalid configuration value (bad layer size, atom count, bounds, ...)."""


class ShapeError(D4PGError):
    """Array shape inconsistent with the owning spec or cache."""


class NumericalError(D4PGError):
    """Non-finite value where a finite one is required."""


class ContractError(D4PGError):
    """Caller violated a documented precondition."""


class NotEnoughData(D4PGError):
    """Replay buffer holds fewer transitions than the requested batch."""


class CheckpointError(D4PGError):
    """Checkpoint or weight frame failed to load (magic/version/shape)."""


class ChecksumError(CheckpointError):
    """Frame or checkpoint payload failed its integrity checksum."""


class UsageError(D4PGError):
    """Bad command line or config file input. CLI exit code 2."""
