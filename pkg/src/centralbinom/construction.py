"""Block-by-block construction of n with few large digits in every base p_j.

n is assembled in base 2 as

    n = n_0 2**(l N' + t) + n_1 2**(l (N' - 1) + t) + ... + n_{N'} 2**t

with n_0 = 1.  For block d the multiplier n_d is the least s such that,
for every prime, the H base-p digits just below position m_{j,d} of the
partial sum are all <= floor(p/3).  In real-number form that is the
condition frac(s * alpha_j + beta_j) in U_j(H), where alpha_j =
2**h / p**m and beta_j = frac(partial / p**m).  A block with no such s
within the budget gets n_d = 0 and is recorded as Flat; otherwise Sharp.
"""

from __future__ import annotations

import math
from concurrent.futures import ProcessPoolExecutor
from dataclasses import asdict, dataclass, field
from fractions import Fraction
from functools import lru_cache
from typing import Iterable, Sequence

import mpmath

from .core_arith import PrimeSet, kummer_valuation, num_digits
from .errors import InvariantViolation, PrecisionExhausted
from .fixedpoint import Fixed

__all__ = [
    "BuildReport",
    "FracContext",
    "alpha",
    "alpha_exponent",
    "best_t_sweep",
    "block_exponent",
    "build_n",
    "choose_ell",
    "default_H",
    "find_s",
    "make_context",
    "theorem_bound_holds",
    "u_membership",
]

DEFAULT_BITS = 128
DEFAULT_S_BUDGET = 10**5
SHARP = "Sharp"
FLAT = "Flat"


@dataclass(frozen=True)
class FracContext:
    prime: int
    H: int
    bits: int
    ratio: Fixed  # log 2 / log prime

    @property
    def cap(self) -> int:
        return self.prime // 3


def make_context(prime: int, H: int, bits: int = DEFAULT_BITS) -> FracContext:
    if H < 1:
        raise ValueError("H must be >= 1")
    if bits < 128:
        raise ValueError("at least 128 fractional bits are required")
    with mpmath.workprec(bits + 64):
        ratio = Fixed.from_mpf(mpmath.log(2) / mpmath.log(prime), bits)
    return FracContext(prime, H, bits, ratio)


def alpha_exponent(n: int, ctx: FracContext) -> int:
    """The m with 2**n / p**m in [1/p, 1), i.e. floor(n log 2 / log p) + 1."""
    if n < 0:
        raise ValueError("n must be non-negative")
    m = ctx.ratio.scale(n).floor() + 1
    p = ctx.prime
    if not (p ** (m - 1) <= 2**n < p**m):
        raise InvariantViolation(f"exponent {m} does not normalise 2**{n} into [1/{p}, 1)")
    return m


def alpha(n: int, ctx: FracContext) -> Fixed:
    """p**(frac(n log 2 / log p) - 1), which equals 2**n / p**m exactly."""
    m = alpha_exponent(n, ctx)
    return Fixed.from_fraction(1 << n, ctx.prime**m, ctx.bits)


@lru_cache(maxsize=64)
def _window_table(p: int, H: int) -> bytes | None:
    size = p**H
    if size > 1 << 22:
        return None
    cap = p // 3
    table = bytearray(b"\x01")
    # extend digit by digit: entries for H' digits from entries for H'-1
    for _ in range(H):
        table = bytearray(table[i] if d <= cap else 0 for d in range(p) for i in range(len(table)))
    return bytes(table)


def _window_ok(D: int, p: int, H: int) -> bool:
    table = _window_table(p, H)
    if table is not None:
        return bool(table[D])
    cap = p // 3
    for _ in range(H):
        D, d = divmod(D, p)
        if d > cap:
            return False
    return True


def _membership_scaled(mid: int, rad: int, bits: int, p: int, H: int) -> bool:
    lo_m, hi_m = mid - rad, mid + rad
    whole = lo_m >> bits
    if (hi_m >> bits) != whole:
        raise PrecisionExhausted("fractional part straddles an integer")
    base = whole << bits
    ph = p**H
    d_lo = ((lo_m - base) * ph) >> bits
    d_hi = ((hi_m - base) * ph) >> bits
    first = _window_ok(d_lo, p, H)
    if d_hi == d_lo:
        return first
    if d_hi - d_lo > 2 or any(_window_ok(D, p, H) != first for D in range(d_lo + 1, d_hi + 1)):
        raise PrecisionExhausted("value lies within the error radius of a digit boundary")
    return first


def u_membership(x, ctx: FracContext) -> bool:
    """Whether frac(x) has its first H base-p digits all <= floor(p/3)."""
    fx = Fixed.from_value(x, ctx.bits)
    if fx.hi < 0 or fx.lo >= 1:
        raise ValueError("x must lie in [0, 1)")
    return _membership_scaled(fx.mid, fx.rad, fx.bits, ctx.prime, ctx.H)


def _find_s_exact(alphas, betas, contexts, s_max):
    # common denominator per coordinate; then the window is an integer quotient
    state = []
    for a, b, c in zip(alphas, betas, contexts):
        a, b = Fraction(a), Fraction(b)
        den = a.denominator * b.denominator // math.gcd(a.denominator, b.denominator)
        state.append([b.numerator * (den // b.denominator) % den,
                      a.numerator * (den // a.denominator) % den, den, c.prime, c.H])
    for s in range(1, s_max + 1):
        ok = True
        for st in state:
            st[0] = (st[0] + st[1]) % st[2]
            if ok:
                ok = _window_ok(st[0] * st[3] ** st[4] // st[2], st[3], st[4])
        if ok:
            return s
    return None


def find_s(
    alphas: Sequence,
    betas: Sequence,
    contexts: Sequence[FracContext],
    s_max: int,
) -> int | None:
    """Least s in [1, s_max] with frac(s alpha_j + beta_j) in U_j(H) for all j.

    Rational inputs (ints, Fractions) are handled exactly; Fixed or float
    inputs go through interval arithmetic and may raise PrecisionExhausted.
    """
    if not len(alphas) == len(betas) == len(contexts):
        raise ValueError("alphas, betas and contexts must have equal length")
    if s_max < 1:
        raise ValueError("s_max must be >= 1")
    if all(isinstance(x, (int, Fraction)) for x in (*alphas, *betas)):
        return _find_s_exact(alphas, betas, contexts, s_max)
    a = [Fixed.from_value(x, c.bits) for x, c in zip(alphas, contexts)]
    b = [Fixed.from_value(x, c.bits) for x, c in zip(betas, contexts)]
    mids = [bj.mid for bj in b]
    rads = [bj.rad for bj in b]
    r = len(contexts)
    for s in range(1, s_max + 1):
        ok = True
        for j in range(r):
            mids[j] += a[j].mid
            rads[j] += a[j].rad
            if ok:
                c = contexts[j]
                ok = _membership_scaled(mids[j], rads[j], c.bits, c.prime, c.H)
        if ok:
            return s
    return None


def choose_ell(p_min: int, H: int) -> int:
    """The unique l with 4**l < p_min**H < 4**(l + 1)."""
    v = p_min**H
    if v & (v - 1) == 0:
        raise ValueError("p_min**H must not be a power of 2")
    ell = (v.bit_length() - 1) // 2
    assert 4**ell < v < 4 ** (ell + 1)
    return ell


def default_H(N: int) -> int:
    return max(2, math.ceil(math.log(math.log(N)))) if N > 2 else 2


def block_exponent(ell: int, n_prime: int, t: int, d: int) -> int:
    return ell * (n_prime - d) + t


@dataclass
class BuildReport:
    n: int
    primes: list[int]
    N: int
    H: int
    ell: int
    t: int
    N_prime: int
    s_max: int
    s_bound_binding: str
    per_prime_bad_digits: list[tuple[int, int]]
    per_prime_valuation: list[tuple[int, int]]
    per_prime_digit_count: list[tuple[int, int]]
    sharp_blocks: int
    flat_blocks: int
    ledger: list[str] = field(default_factory=list)
    multipliers: list[int] = field(default_factory=list)
    window_violations: int = 0
    locality_violations: int = 0
    gap_violations: list[tuple[int, int]] = field(default_factory=list)

    @property
    def worst_bad_fraction(self) -> float:
        return max(b / max(c, 1) for (_, b), (_, c) in zip(self.per_prime_bad_digits, self.per_prime_digit_count))

    def to_dict(self) -> dict:
        return asdict(self)


def _digits_window(x: int, p: int, lo: int, hi: int) -> list[int]:
    """Base-p digits of x at positions lo..hi-1 (lowest first)."""
    x //= p**lo
    out = []
    for _ in range(hi - lo):
        x, d = divmod(x, p)
        out.append(d)
    return out


def build_n(
    primes: PrimeSet | Iterable[int],
    N: int,
    H: int | None = None,
    t: int = 0,
    s_max: int | None = None,
    bits: int = DEFAULT_BITS,
) -> BuildReport:
    ps = PrimeSet.coerce(primes)
    r = len(ps)
    H = default_H(N) if H is None else H
    ell = choose_ell(min(ps), H)
    if ell < 1:
        raise ValueError(f"block length l = {ell}; choose a larger H")
    if not 0 <= t < ell:
        raise ValueError(f"t must lie in [0, {ell})")
    n_prime = N // ell
    if n_prime < 1:
        raise ValueError("N is too small for a single block")
    a_priori_bound = 10 ** (10 * r * r * H)
    budget = DEFAULT_S_BUDGET if s_max is None else s_max
    s_cap = min(a_priori_bound, budget)
    binding = "a_priori" if a_priori_bound <= budget else "budget"

    ctxs = [make_context(p, H, bits) for p in ps]
    caps = [c.cap for c in ctxs]

    partial = 1 << block_exponent(ell, n_prime, t, 0)
    multipliers = [1]
    ledger: list[str] = []
    window_bad = locality_bad = 0
    gap_bad = [0] * r
    prev_m: list[int] | None = None
    for d in range(1, n_prime + 1):
        h = block_exponent(ell, n_prime, t, d)
        ms = [alpha_exponent(h, c) for c in ctxs]
        if prev_m is not None:
            for j in range(r):
                gap = prev_m[j] - ms[j]
                if gap >= H or gap <= 0:
                    gap_bad[j] += 1
        prev_m = ms
        alphas = [Fraction(1 << h, p**m) for p, m in zip(ps, ms)]
        betas = [Fraction(partial % p**m, p**m) for p, m in zip(ps, ms)]
        s = find_s(alphas, betas, ctxs, s_cap)
        if s is None:
            ledger.append(FLAT)
            multipliers.append(0)
            continue
        ledger.append(SHARP)
        multipliers.append(s)
        new = partial + s * (1 << h)
        for j, (p, m) in enumerate(zip(ps, ms)):
            if any(dg > caps[j] for dg in _digits_window(new, p, max(0, m - H), m)):
                window_bad += 1
            cutoff = m + num_digits(s, p)  # m + floor(log s / log p) + 1
            q = p ** (cutoff + 1)
            if new // q != partial // q:
                locality_bad += 1
        partial = new

    n = partial
    bad, vals, counts = [], [], []
    for p, cap in zip(ps, caps):
        x, b, c = n, 0, 0
        while x:
            x, dg = divmod(x, p)
            b += dg > cap
            c += 1
        bad.append((p, b))
        counts.append((p, c))
        vals.append((p, kummer_valuation(n, p).valuation))
    return BuildReport(
        n=n,
        primes=list(ps.primes),
        N=N,
        H=H,
        ell=ell,
        t=t,
        N_prime=n_prime,
        s_max=s_cap,
        s_bound_binding=binding,
        per_prime_bad_digits=bad,
        per_prime_valuation=vals,
        per_prime_digit_count=counts,
        sharp_blocks=ledger.count(SHARP),
        flat_blocks=ledger.count(FLAT),
        ledger=ledger,
        multipliers=multipliers,
        window_violations=window_bad,
        locality_violations=locality_bad,
        gap_violations=list(zip(ps.primes, gap_bad)),
    )


def _build_for_t(args):
    primes, N, H, t, s_max, bits = args
    return build_n(primes, N, H, t, s_max, bits)


def best_t_sweep(
    primes: PrimeSet | Iterable[int],
    N: int,
    H: int | None = None,
    s_max: int | None = None,
    bits: int = DEFAULT_BITS,
    workers: int = 1,
    return_all: bool = False,
):
    """Build for every offset t in [0, l) and keep the one with the smallest worst bad-digit fraction."""
    ps = PrimeSet.coerce(primes)
    H = default_H(N) if H is None else H
    ell = choose_ell(min(ps), H)
    if ell < 1:
        raise ValueError(f"block length l = {ell}; choose a larger H")
    jobs = [(ps, N, H, t, s_max, bits) for t in range(ell)]
    if workers > 1:
        with ProcessPoolExecutor(max_workers=workers) as pool:
            reports = list(pool.map(_build_for_t, jobs))
    else:
        reports = [_build_for_t(j) for j in jobs]
    best = min(reports, key=lambda rep: (rep.worst_bad_fraction, rep.t))
    if return_all:
        return best.t, best, reports
    return best.t, best


def theorem_bound_holds(report: BuildReport, epsilon: float) -> list[bool]:
    """nu_p(binom(2n, n)) <= epsilon * log n / log p for each prime."""
    logn = math.log(report.n) if report.n < 1 << 1000 else report.n.bit_length() * math.log(2)
    return [v <= epsilon * logn / math.log(p) for p, v in report.per_prime_valuation]


def exact_alpha(n: int, p: int) -> Fraction:
    """Reference value 2**n / p**m computed from digit counts alone."""
    m = num_digits(1 << n, p)
    return Fraction(1 << n, p**m)
