"""Digit constraints, p-adic valuations of binom(2n, n), and the supporting equidistribution and Fourier checks."""

__version__ = "0.1.0"

from .core_arith import PrimeSet, is_prime, kummer_valuation  # noqa: E402
from .errors import (  # noqa: E402
    CheckpointCorrupt,
    CheckpointError,
    FingerprintMismatch,
    InvariantViolation,
    PrecisionExhausted,
)

__all__ = [
    "__version__",
    "PrimeSet",
    "is_prime",
    "kummer_valuation",
    "InvariantViolation",
    "PrecisionExhausted",
    "CheckpointError",
    "FingerprintMismatch",
    "CheckpointCorrupt",
]
