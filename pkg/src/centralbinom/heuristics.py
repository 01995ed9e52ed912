"""Density criterion for simultaneous small-digit conditions.

For a prime p the chance that a random n <= x has every base-p digit in
{0, ..., (p-1)/2} is about x**(-e_p) with e_p = -log(1/2 + 1/(2p)) / log p.
Summing e_p over the prime set gives ``sigma``; sigma < 1 suggests
infinitely many qualifying n, sigma > 1 only finitely many.
"""

from __future__ import annotations

from dataclasses import asdict, dataclass
from typing import Iterable

import mpmath

from .core_arith import PrimeSet

EXPECT_INFINITE = "ExpectInfinite"
EXPECT_FINITE = "ExpectFinite"
BORDERLINE = "Borderline"

BORDERLINE_TOL = mpmath.mpf("1e-9")
_WORK_PREC = 128


@dataclass(frozen=True)
class HeuristicReport:
    primes: list[int]
    per_prime_exponent: list[float]
    sigma: float
    verdict: str
    predicted_count_exponent: float

    def to_dict(self) -> dict:
        return asdict(self)


def prime_exponent(p: int) -> mpmath.mpf:
    with mpmath.workprec(_WORK_PREC):
        return -mpmath.log(mpmath.mpf(1) / 2 + mpmath.mpf(1) / (2 * p)) / mpmath.log(p)


def _sigma_mp(primes: PrimeSet) -> tuple[list[mpmath.mpf], mpmath.mpf]:
    with mpmath.workprec(_WORK_PREC):
        terms = [prime_exponent(p) for p in primes]
        return terms, mpmath.fsum(terms)


def condition_sum(primes: PrimeSet | Iterable[int]) -> HeuristicReport:
    ps = PrimeSet.coerce(primes)
    terms, sigma = _sigma_mp(ps)
    with mpmath.workprec(_WORK_PREC):
        if sigma < 1 - BORDERLINE_TOL:
            verdict = EXPECT_INFINITE
        elif sigma > 1 + BORDERLINE_TOL:
            verdict = EXPECT_FINITE
        else:
            verdict = BORDERLINE
        return HeuristicReport(
            primes=list(ps.primes),
            per_prime_exponent=[float(t) for t in terms],
            sigma=float(sigma),
            verdict=verdict,
            predicted_count_exponent=float(1 - sigma),
        )


def predicted_count(primes: PrimeSet | Iterable[int], limit: int) -> float:
    """Heuristic number of qualifying n in [1, limit]: limit ** (1 - sigma)."""
    if limit < 1:
        raise ValueError("limit must be >= 1")
    _, sigma = _sigma_mp(PrimeSet.coerce(primes))
    with mpmath.workprec(_WORK_PREC):
        return float(mpmath.power(mpmath.mpf(limit), 1 - sigma))
