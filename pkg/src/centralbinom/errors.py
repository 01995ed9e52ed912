"""Exception types shared across the package.

The CLI maps these onto exit codes: usage problems (plain ``ValueError``)
exit 1, everything derived from :class:`InvariantViolation` exits 2.
"""


class InvariantViolation(Exception):
    """A structural guarantee failed (e.g. two digit-set elements collide mod P)."""


class PrecisionExhausted(InvariantViolation):
    """A certified comparison landed inside the error radius of a decision boundary."""


class CheckpointError(Exception):
    """Base class for checkpoint problems."""


class FingerprintMismatch(CheckpointError):
    """The checkpoint belongs to a different search problem."""


class CheckpointCorrupt(CheckpointError, InvariantViolation):
    """The checkpoint stream is truncated or fails its checksum."""
