"""Binary fixed-point intervals with an explicit error radius.

A ``Fixed`` stands for the closed interval [(mid - rad) / 2**bits,
(mid + rad) / 2**bits].  Only the handful of operations the construction
needs are provided; every decision that depends on which side of an
integer boundary a value falls raises :class:`PrecisionExhausted` when
the interval straddles it.
"""

from __future__ import annotations

from dataclasses import dataclass
from fractions import Fraction

import mpmath

from .errors import PrecisionExhausted


@dataclass(frozen=True)
class Fixed:
    mid: int
    rad: int
    bits: int

    @classmethod
    def from_fraction(cls, num: int, den: int, bits: int) -> "Fixed":
        q, r = divmod(num << bits, den)
        return cls(q, 0 if r == 0 else 1, bits)

    @classmethod
    def from_value(cls, x, bits: int) -> "Fixed":
        """Exact for ints, Fractions and floats (floats are dyadic rationals)."""
        if isinstance(x, Fixed):
            return x.rescale(bits)
        f = Fraction(x)
        return cls.from_fraction(f.numerator, f.denominator, bits)

    @classmethod
    def from_mpf(cls, x: mpmath.mpf, bits: int) -> "Fixed":
        # mpmath carries at least bits + 32 working bits here, so one ulp covers the rounding.
        with mpmath.workprec(bits + 64):
            return cls(int(mpmath.floor(mpmath.ldexp(x, bits))), 1, bits)

    def rescale(self, bits: int) -> "Fixed":
        if bits == self.bits:
            return self
        if bits > self.bits:
            s = bits - self.bits
            return Fixed(self.mid << s, self.rad << s, bits)
        s = self.bits - bits
        return Fixed(self.mid >> s, (self.rad >> s) + 1, bits)

    def __add__(self, other: "Fixed") -> "Fixed":
        other = other.rescale(self.bits)
        return Fixed(self.mid + other.mid, self.rad + other.rad, self.bits)

    def scale(self, k: int) -> "Fixed":
        return Fixed(self.mid * k, self.rad * abs(k), self.bits)

    def floor(self) -> int:
        lo = (self.mid - self.rad) >> self.bits
        hi = (self.mid + self.rad) >> self.bits
        if lo != hi:
            raise PrecisionExhausted("value straddles an integer boundary")
        return lo

    def frac(self) -> "Fixed":
        return Fixed(self.mid - (self.floor() << self.bits), self.rad, self.bits)

    @property
    def lo(self) -> Fraction:
        return Fraction(self.mid - self.rad, 1 << self.bits)

    @property
    def hi(self) -> Fraction:
        return Fraction(self.mid + self.rad, 1 << self.bits)

    @property
    def error_bound(self) -> Fraction:
        return Fraction(self.rad, 1 << self.bits)

    def to_fraction(self) -> Fraction:
        return Fraction(self.mid, 1 << self.bits)

    def contains(self, x) -> bool:
        x = Fraction(x)
        return self.lo <= x <= self.hi

    def __float__(self) -> float:
        return self.mid / (1 << self.bits) if self.bits < 1000 else float(self.to_fraction())
