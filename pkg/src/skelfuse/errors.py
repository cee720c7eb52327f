"""Exception types shared across the package.

Everything derives from SkelfuseError (itself a ValueError) so callers can
catch one base class, while the CLI maps any of these to a one-line
diagnostic and a nonzero exit code.
"""


class SkelfuseError(ValueError):
    """Base class for all package-specific errors."""


class DimensionError(SkelfuseError):
    """Array shapes or sizes do not chain."""


class ModalityError(SkelfuseError):
    """Operation applied to a sequence of the wrong modality."""


class FormatError(SkelfuseError):
    """Malformed file: bad magic, truncation, ragged rows, bad values."""


class AlignmentError(SkelfuseError):
    """Sample ids of score streams / label maps do not match up."""


class ConfigError(SkelfuseError):
    """Invalid configuration value or unknown backbone/modality name."""


class ContractError(SkelfuseError):
    """A pluggable component returned something violating its contract."""
