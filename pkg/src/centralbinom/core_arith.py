"""Digit expansions, Kummer carry counting and a brute-force factor oracle."""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Iterable, Iterator, Sequence

__all__ = [
    "DigitVector",
    "PrimeSet",
    "ValuationReport",
    "add_longhand",
    "central_binomial_factor_oracle",
    "from_digits",
    "is_prime",
    "kummer_valuation",
    "kummer_valuation_longhand",
    "num_digits",
    "to_digits",
    "trivial_bound",
]

ORACLE_CAP = 10**4

_TRIAL_LIMIT = 1 << 20
# Deterministic Miller-Rabin: these witnesses are exact for n < 3.3e24.
_MR_WITNESSES = (2, 3, 5, 7, 11, 13, 17, 19, 23, 29, 31, 37, 41)
_MR_BOUND = 3_317_044_064_679_887_385_961_981


def _small_primes(limit: int) -> list[int]:
    sieve = bytearray([1]) * (limit + 1)
    sieve[0:2] = b"\x00\x00"
    for i in range(2, math.isqrt(limit) + 1):
        if sieve[i]:
            sieve[i * i :: i] = bytearray(len(sieve[i * i :: i]))
    return [i for i in range(limit + 1) if sieve[i]]


_SMALL_PRIMES = _small_primes(1 << 10)


def is_prime(n: int) -> bool:
    """Deterministic primality for n below 3.3e24.

    Trial division settles everything up to 2**20; above that a
    Miller-Rabin pass with the first thirteen prime witnesses is exact.
    """
    if n < 2:
        return False
    for p in _SMALL_PRIMES:
        if n == p:
            return True
        if n % p == 0:
            return False
    if n < _TRIAL_LIMIT:
        d = _SMALL_PRIMES[-1] + 2
        while d * d <= n:
            if n % d == 0:
                return False
            d += 2
        return True
    if n >= _MR_BOUND:
        raise ValueError(f"primality of {n} is outside the deterministic range")
    d, s = n - 1, 0
    while d % 2 == 0:
        d //= 2
        s += 1
    for a in _MR_WITNESSES:
        x = pow(a, d, n)
        if x in (1, n - 1):
            continue
        for _ in range(s - 1):
            x = x * x % n
            if x == n - 1:
                break
        else:
            return False
    return True


def _check_odd_prime(p: int) -> None:
    if not isinstance(p, int) or p == 2 or not is_prime(p):
        raise ValueError(f"expected an odd prime, got {p!r}")


@dataclass(frozen=True)
class PrimeSet:
    """Ordered, duplicate-free tuple of odd primes plus an optional epsilon."""

    primes: tuple[int, ...]
    epsilon: float | None = None

    def __post_init__(self) -> None:
        primes = tuple(int(p) for p in self.primes)
        object.__setattr__(self, "primes", primes)
        if not primes:
            raise ValueError("prime set is empty")
        if len(set(primes)) != len(primes):
            raise ValueError(f"repeated primes in {list(primes)}")
        for p in primes:
            _check_odd_prime(p)
        if self.epsilon is not None and not 0 < self.epsilon < 1:
            raise ValueError("epsilon must lie in (0, 1)")

    @classmethod
    def coerce(cls, primes: "PrimeSet | Iterable[int]") -> "PrimeSet":
        if isinstance(primes, PrimeSet):
            return primes
        return cls(tuple(primes))

    @property
    def r(self) -> int:
        return len(self.primes)

    def __iter__(self) -> Iterator[int]:
        return iter(self.primes)

    def __len__(self) -> int:
        return len(self.primes)

    def __getitem__(self, i):
        return self.primes[i]


@dataclass(frozen=True)
class DigitVector:
    """Little-endian base-``base`` digits; the value 0 is the empty tuple."""

    base: int
    digits: tuple[int, ...] = field(default=())

    def __post_init__(self) -> None:
        if self.base < 2:
            raise ValueError("base must be at least 2")
        digits = tuple(self.digits)
        object.__setattr__(self, "digits", digits)
        if any(not 0 <= d < self.base for d in digits):
            raise ValueError(f"digit out of range for base {self.base}: {digits}")
        if digits and digits[-1] == 0:
            raise ValueError("non-canonical digit vector (trailing zero)")

    @property
    def value(self) -> int:
        return from_digits(self.digits, self.base)

    def __len__(self) -> int:
        return len(self.digits)


def to_digits(n: int, base: int) -> DigitVector:
    if base < 2:
        raise ValueError(f"base must be >= 2, got {base}")
    if n < 0:
        raise ValueError("n must be non-negative")
    out = []
    while n:
        n, d = divmod(n, base)
        out.append(d)
    return DigitVector(base, tuple(out))


def from_digits(digits: Sequence[int], base: int) -> int:
    n = 0
    for d in reversed(digits):
        n = n * base + d
    return n


def num_digits(n: int, base: int) -> int:
    """Length of the canonical expansion (0 for n = 0)."""
    count = 0
    while n:
        n //= base
        count += 1
    return count


@dataclass(frozen=True)
class ValuationReport:
    n: int
    prime: int
    valuation: int
    digit_count: int
    trivial_bound: int


def kummer_valuation(n: int, p: int) -> ValuationReport:
    """p-adic valuation of binom(2n, n), counted as the carries of n + n in base p."""
    _check_odd_prime(p)
    if n < 0:
        raise ValueError("n must be non-negative")
    carries = carry = count = 0
    m = n
    while m:
        m, d = divmod(m, p)
        count += 1
        carry = 1 if 2 * d + carry >= p else 0
        carries += carry
    return ValuationReport(n, p, carries, count, count)


def trivial_bound(n: int, p: int) -> int:
    """Number of base-p digits of n, i.e. 1 + floor(log n / log p)."""
    if n < 1:
        raise ValueError("trivial_bound needs n >= 1")
    return num_digits(n, p)


def add_longhand(a: DigitVector, b: DigitVector) -> tuple[DigitVector, int]:
    """Schoolbook addition of two digit vectors; returns (sum, number of carries)."""
    if a.base != b.base:
        raise ValueError("bases differ")
    base = a.base
    out = []
    carry = carries = 0
    for i in range(max(len(a), len(b))):
        s = (a.digits[i] if i < len(a) else 0) + (b.digits[i] if i < len(b) else 0) + carry
        carry = s // base
        carries += carry
        out.append(s % base)
    if carry:
        out.append(carry)
    return DigitVector(base, tuple(out)), carries


def kummer_valuation_longhand(n: int, p: int) -> int:
    """Second carry counter: materialise both digit vectors and add them."""
    v = to_digits(n, p)
    total, carries = add_longhand(v, v)
    assert total.value == 2 * n
    return carries


def central_binomial_factor_oracle(n: int, primes: PrimeSet | Iterable[int]) -> list[int]:
    """Exact valuations by dividing binom(2n, n) itself; for cross-checks only."""
    if n < 0:
        raise ValueError("n must be non-negative")
    if n > ORACLE_CAP:
        raise ValueError(f"oracle is capped at n <= {ORACLE_CAP}")
    ps = PrimeSet.coerce(primes)
    c = math.comb(2 * n, n)
    out = []
    for p in ps:
        v = 0
        x = c
        while x % p == 0:
            x //= p
            v += 1
        out.append(v)
    return out
