"""Exception types shared across the package.

The split matters for the CLI, which maps each class to a distinct exit
code: configuration problems, capacity (size-cap) problems, and violations
of mathematical invariants detected mid-analysis are different failure
modes and should be distinguishable by scripts.
"""


class DetjumpError(Exception):
    """Base class for all package-specific errors."""


class StructureError(DetjumpError):
    """Malformed input data: non-square matrix, bad row sums, unreadable file."""


class CapacityError(DetjumpError):
    """A configured size cap was exceeded; the message names the cap."""


class BijectionError(DetjumpError):
    """A requested map is not a bijection; the message names the failed condition."""


class InvariantError(DetjumpError):
    """A quantity that is mathematically guaranteed failed its numerical check."""


class ConfigError(DetjumpError):
    """Invalid experiment configuration (CLI layer)."""
