"""Finite-sample diagnostics for the orbit n -> (frac(n log 2 / log p_j))_j.

Orbit entries are fractional parts held as 256-bit fixed-point integers;
float copies are kept in a numpy array for the vectorised statistics.
Integer relations among the ratios log 2 / log p_j are searched
exhaustively, and hypothetical relation systems are turned into the
finite family of exponential curves that must contain the orbit.
"""

from __future__ import annotations

import itertools
import math
from dataclasses import dataclass, field
from fractions import Fraction
from typing import Iterable, Sequence

import mpmath
import numpy as np

from .core_arith import PrimeSet
from .errors import InvariantViolation

__all__ = [
    "BoxReport",
    "CoverReport",
    "Curve",
    "CurveFamily",
    "OrbitSample",
    "RelationSystem",
    "box_occupancy",
    "log_ratios",
    "make_curves",
    "orbit",
    "reduce_relations",
    "relation_search",
    "synthetic_ratios",
    "verify_curve_cover",
    "weyl_sum",
]

BITS = 256
_ONE = 1 << BITS
_MASK = _ONE - 1
_FLOAT_SHIFT = BITS - 53


def log_ratios(primes: Iterable[int], bits: int = BITS) -> list[mpmath.mpf]:
    with mpmath.workprec(bits + 32):
        return [mpmath.log(2) / mpmath.log(p) for p in primes]


def _to_fixed(x) -> int:
    """floor(frac(x) * 2**256); exact for Fractions, 2**-256 accurate for mpf."""
    if isinstance(x, (int, Fraction)):
        x = Fraction(x)
        return (x.numerator * _ONE // x.denominator) & _MASK
    with mpmath.workprec(BITS + 64):
        return int(mpmath.floor(mpmath.ldexp(mpmath.mpf(x), BITS))) & _MASK


@dataclass
class OrbitSample:
    """Rows n = 1..N of frac(n * lambda_j) with lambda_j = log 2 / log p_j."""

    primes: tuple[int, ...]
    N: int
    vectors: np.ndarray  # shape (N, r), float64 in [0, 1)
    fixed_ratios: tuple[int, ...] = ()

    def exact(self, n: int, j: int) -> mpmath.mpf:
        """Entry (n, j) from the 256-bit ratio; error at most n * 2**-256."""
        if not 1 <= n <= self.N:
            raise IndexError(n)
        with mpmath.workprec(BITS + 16):
            return mpmath.ldexp(mpmath.mpf(n * self.fixed_ratios[j] & _MASK), -BITS)

    @classmethod
    def from_array(cls, vectors) -> "OrbitSample":
        v = np.atleast_2d(np.asarray(vectors, dtype=float))
        if v.shape[0] == 1 and np.ndim(vectors) == 1:
            v = v.T
        if np.any(v < 0) or np.any(v >= 1):
            raise ValueError("sample entries must lie in [0, 1)")
        return cls((), v.shape[0], v)

    @property
    def r(self) -> int:
        return self.vectors.shape[1]


def orbit(primes: PrimeSet | Iterable[int], N: int, ratios: Sequence | None = None) -> OrbitSample:
    """Orbit sample; ``ratios`` replaces log 2 / log p_j with synthetic values."""
    if N < 1:
        raise ValueError("N must be >= 1")
    ps = PrimeSet.coerce(primes)
    lams = log_ratios(ps) if ratios is None else list(ratios)
    if len(lams) != len(ps):
        raise ValueError("one ratio per prime is required")
    fixed = tuple(_to_fixed(x) for x in lams)
    cols = []
    for lam in fixed:
        col = np.fromiter(((n * lam & _MASK) >> _FLOAT_SHIFT for n in range(1, N + 1)), dtype=np.float64, count=N)
        cols.append(col * 2.0**-53)
    return OrbitSample(ps.primes, N, np.column_stack(cols), fixed)


def weyl_sum(sample: OrbitSample, k: Sequence[int] | int) -> float:
    """|(1/N) sum_n exp(2 pi i k . v_n)|."""
    kv = np.atleast_1d(np.asarray(k, dtype=np.int64))
    if kv.shape != (sample.r,):
        raise ValueError(f"k must have length {sample.r}")
    if not kv.any():
        raise ValueError("k must be nonzero")
    phase = np.mod(sample.vectors @ kv.astype(float), 1.0)
    return float(abs(np.exp(2j * np.pi * phase).mean()))


@dataclass(frozen=True)
class BoxReport:
    P: int
    max_occupancy: float
    boxes_hit: int
    family_size: int  # P**(r - k - 1) curve bins
    reference: float  # 1 / (family_size * P)
    ratio: float


def box_occupancy(sample: OrbitSample, P: int, k: int = 0) -> BoxReport:
    """Largest fraction of the sample in one cell x/P + [0, 1/P)^r (sparse count)."""
    if P < 2:
        raise ValueError("P must be >= 2")
    cells = np.minimum(np.floor(sample.vectors * P).astype(np.int64), P - 1)
    _, counts = np.unique(cells, axis=0, return_counts=True)
    top = counts.max() / sample.N
    fam = P ** max(sample.r - k - 1, 0)
    ref = 1.0 / (fam * P)
    return BoxReport(P, float(top), int(len(counts)), fam, ref, float(top / ref))


# ---------------------------------------------------------------------------
# integer relations


def relation_search(
    primes: PrimeSet | Iterable[int],
    height: int,
    tol: float,
    ratios: Sequence | None = None,
    max_candidates: int = 10**6,
) -> list[tuple[tuple[int, ...], float]]:
    """All (n_1..n_r, n_{r+1}) with |n_i| <= height and |sum n_i lambda_i - n_{r+1}| < tol.

    The first nonzero coefficient is made positive, so each relation appears
    once.  Meet in the middle on 64-bit fixed point, then every candidate is
    rechecked at 256 bits.
    """
    if height < 1:
        raise ValueError("height must be >= 1")
    if tol <= 0:
        raise ValueError("tol must be positive")
    ps = PrimeSet.coerce(primes)
    r = len(ps)
    with mpmath.workprec(BITS + 32):
        lams = log_ratios(ps) if ratios is None else [mpmath.mpf(x) for x in ratios]
        fixed64 = [int(mpmath.floor(mpmath.ldexp(mpmath.frac(x), 64))) for x in lams]

    coeffs = np.arange(-height, height + 1, dtype=np.int64)
    half = (r + 1) // 2

    def side(idx):
        grids = np.meshgrid(*([coeffs] * len(idx)), indexing="ij") if idx else []
        vecs = np.stack([g.ravel() for g in grids], axis=1) if idx else np.zeros((1, 0), np.int64)
        acc = np.zeros(len(vecs), dtype=np.uint64)
        for col, j in enumerate(idx):
            acc += vecs[:, col].astype(np.uint64) * np.uint64(fixed64[j])  # wraps mod 2**64
        return vecs, acc

    left_vecs, left = side(list(range(half)))
    right_vecs, right = side(list(range(half, r)))
    order = np.argsort(left, kind="stable")
    left_sorted = left[order]
    # rounding error: each ratio is off by < 2**-64, times sum |n_i| <= r * height
    slack = r * height + 2
    w = min(int(tol * 2.0**64) + slack, (1 << 63) - 1)
    w64 = np.uint64(w)
    target = (np.uint64(0) - right).astype(np.uint64)
    lo = target - w64
    hi = target + w64
    wrap = lo > hi
    cands: list[tuple[int, int]] = []
    for b in range(len(right)):
        if wrap[b]:
            spans = [(0, np.searchsorted(left_sorted, hi[b], "right")), (np.searchsorted(left_sorted, lo[b], "left"), len(left_sorted))]
        else:
            spans = [(np.searchsorted(left_sorted, lo[b], "left"), np.searchsorted(left_sorted, hi[b], "right"))]
        for a0, a1 in spans:
            for a in range(int(a0), int(a1)):
                cands.append((int(order[a]), b))
        if len(cands) > max_candidates:
            raise ValueError("too many candidates; lower tol or height")

    out = []
    with mpmath.workprec(BITS + 32):
        for a, b in cands:
            vec = tuple(int(x) for x in left_vecs[a]) + tuple(int(x) for x in right_vecs[b])
            nz = next((x for x in vec if x), 0)
            if nz <= 0:
                continue  # zero vector or the negated twin
            value = mpmath.fsum(c * lam for c, lam in zip(vec, lams))
            n_last = int(mpmath.nint(value))
            resid = value - n_last
            if abs(n_last) <= height and abs(resid) < tol:
                out.append((vec + (n_last,), float(resid)))
    out.sort(key=lambda item: (abs(item[1]), item[0]))
    return out


@dataclass(frozen=True)
class RelationSystem:
    """Relations sum_j a_j lambda_j + a_{r+1} = 0, solved for the pivot ratios.

    Each dependent column c satisfies
    lambda_c = sum_h (m_h / n) lambda_h + m_const / n over the free columns h.
    """

    r: int
    coefficients: tuple[tuple[Fraction, ...], ...]
    free: tuple[int, ...]
    dependent: tuple[int, ...]
    reduced: tuple[tuple[Fraction, ...], ...]  # b_{j,h} over free columns, then constant
    denominators: tuple[int, ...]
    numerators: tuple[tuple[int, ...], ...]  # m_{j,h} over free columns, then constant

    @property
    def k(self) -> int:
        return len(self.dependent)

    def to_dict(self) -> dict:
        return {
            "r": self.r,
            "k": self.k,
            "free": list(self.free),
            "dependent": list(self.dependent),
            "reduced": [[str(x) for x in row] for row in self.reduced],
            "denominators": list(self.denominators),
            "numerators": [list(row) for row in self.numerators],
        }


def reduce_relations(raw: Sequence[Sequence], r: int | None = None) -> RelationSystem:
    """Row-reduce relation rows (a_1, ..., a_r, a_{r+1}) meaning sum a_j lambda_j + a_{r+1} = 0.

    A near-relation (n_1, ..., n_r, n_{r+1}) from relation_search, which means
    sum n_j lambda_j = n_{r+1}, enters as (n_1, ..., n_r, -n_{r+1}).
    """
    rows = [[Fraction(x) for x in row] for row in raw]
    if r is None:
        if not rows:
            raise ValueError("r is required for an empty relation matrix")
        r = len(rows[0]) - 1
    if any(len(row) != r + 1 for row in rows):
        raise ValueError(f"every relation needs {r + 1} entries")
    original = tuple(tuple(row) for row in rows)
    pivots: list[int] = []
    work: list[list[Fraction]] = []
    for i, row in enumerate(rows):
        row = row[:]
        for pc, prow in zip(pivots, work):
            if row[pc]:
                f = row[pc]
                row = [a - f * b for a, b in zip(row, prow)]
        pc = next((c for c in reversed(range(r)) if row[c]), None)
        if pc is None:
            raise ValueError(f"relation row {i} is linearly dependent on the earlier rows")
        piv = row[pc]
        row = [a / piv for a in row]
        for w_i, prow in enumerate(work):
            if prow[pc]:
                f = prow[pc]
                work[w_i] = [a - f * b for a, b in zip(prow, row)]
        pivots.append(pc)
        work.append(row)
    if len(pivots) >= r:
        raise ValueError(
            f"{len(pivots)} independent relations among {r} ratios would make every "
            "log 2 / log p rational, i.e. a power of 2 equal to a power of p"
        )
    free = tuple(c for c in range(r) if c not in pivots)
    order = sorted(range(len(pivots)), key=lambda i: pivots[i])
    dependent = tuple(pivots[i] for i in order)
    reduced, dens, nums = [], [], []
    for i in order:
        row = work[i]
        b = tuple(-row[h] for h in free) + (-row[r],)
        den = math.lcm(*(x.denominator for x in b)) if b else 1
        reduced.append(b)
        dens.append(den)
        nums.append(tuple(int(x * den) for x in b))
    return RelationSystem(r, original, free, dependent, tuple(reduced), tuple(dens), tuple(nums))


# ---------------------------------------------------------------------------
# curves


@dataclass(frozen=True)
class Curve:
    """Exponent-space curve: coordinate j has exponent q_j t + sum_i g_{j,i} delta_i + s_j + i_j.

    ``offsets`` are the s_j, ``dilates`` the integer powers i_j of p_j.
    The point on the curve is (p_j ** (exponent_j - 1))_j.
    """

    q: tuple[Fraction, ...]
    delta_coeffs: tuple[tuple[Fraction, ...], ...]
    offsets: tuple[Fraction, ...]
    dilates: tuple[int, ...]

    def exponents(self, t, delta=()):
        return [
            q * t + sum(g * d for g, d in zip(gs, delta)) + s + i
            for q, gs, s, i in zip(self.q, self.delta_coeffs, self.offsets, self.dilates)
        ]

    def bases(self, primes: Sequence[int]) -> list[mpmath.mpf]:
        """theta_j = p_j ** q_j."""
        with mpmath.workprec(BITS):
            return [mpmath.power(p, mpmath.mpf(q.numerator) / q.denominator) for p, q in zip(primes, self.q)]

    def coefficients(self, primes: Sequence[int], delta=()) -> list[mpmath.mpf]:
        """zeta_j with K(t) = (zeta_j theta_j**t)_j."""
        zero = self.exponents(0, delta)
        with mpmath.workprec(BITS):
            return [mpmath.power(p, mpmath.mpf(e) - 1) for p, e in zip(primes, zero)]


@dataclass
class CurveFamily:
    L: int
    L_bound: int
    rho: list[Fraction]
    q: list[Fraction]
    delta_coeffs: list[tuple[Fraction, ...]]
    offset_sets: list[tuple[Fraction, ...]]
    dilate_sets: list[tuple[int, ...]]  # exponents i of D_j = {p_j**i}
    I_bound: int
    shift_set_bound: int
    shift_classes: int
    full_box: bool
    distinct_bases: bool
    curves: list[Curve] = field(default_factory=list)

    def to_dict(self) -> dict:
        return {
            "L": self.L,
            "L_bound": self.L_bound,
            "rho": [str(x) for x in self.rho],
            "q": [str(x) for x in self.q],
            "offset_sets": [[str(x) for x in s] for s in self.offset_sets],
            "dilate_sets": [list(s) for s in self.dilate_sets],
            "I_bound": self.I_bound,
            "shift_set_bound": self.shift_set_bound,
            "shift_classes": self.shift_classes,
            "full_box": self.full_box,
            "distinct_bases": self.distinct_bases,
            "curve_count": len(self.curves),
        }


def _integer_range(coeffs: Sequence[Fraction], s_lo: Fraction, s_hi: Fraction) -> tuple[int, ...]:
    """Integers kappa with [kappa, kappa + 1) meeting {sum c_i x_i + s : x in [0,1)^n, s in [s_lo, s_hi]}.

    The exponent is reduced into [0, 1) by subtracting kappa, i.e. the dilate is p**(-kappa).
    """
    inf = s_lo + sum(c for c in coeffs if c < 0)
    sup = s_hi + sum(c for c in coeffs if c > 0)
    sup_attained = all(c <= 0 for c in coeffs)
    top = math.floor(sup) if sup_attained else math.ceil(sup) - 1
    return tuple(range(math.floor(inf), top + 1))


def _bases_distinct(primes: Sequence[int], q: Sequence[Fraction]) -> bool:
    """p_i**q_i pairwise distinct: exact big-integer test, then certified float separation."""
    for i, j in itertools.combinations(range(len(q)), 2):
        a, b = q[i], q[j]
        if (a > 0) != (b > 0):
            continue
        # p_i**(a) == p_j**(b)  <=>  p_i**(|a.num| b.den) == p_j**(|b.num| a.den)
        ei, ej = abs(a.numerator) * b.denominator, abs(b.numerator) * a.denominator
        if ei * math.log2(primes[i]) < 10**6:
            if primes[i] ** ei == primes[j] ** ej:
                return False
        with mpmath.workprec(BITS):
            gap = abs(
                mpmath.mpf(a.numerator) / a.denominator * mpmath.log(primes[i])
                - mpmath.mpf(b.numerator) / b.denominator * mpmath.log(primes[j])
            )
            if gap < mpmath.ldexp(1, -BITS // 2):
                return False
    return True


def make_curves(system: RelationSystem, primes: PrimeSet | Iterable[int], max_curves: int = 10**5) -> CurveFamily:
    ps = PrimeSet.coerce(primes)
    r = system.r
    if len(ps) != r:
        raise ValueError("prime count does not match the relation system")
    k = system.k
    if k == 0:
        return CurveFamily(
            L=1, L_bound=1, rho=[], q=[], delta_coeffs=[], offset_sets=[], dilate_sets=[],
            I_bound=0, shift_set_bound=1, shift_classes=1, full_box=True, distinct_bases=True,
        )
    free = system.free
    f = len(free)
    ms = [[Fraction(m, n) for m in row[:-1]] for row, n in zip(system.numerators, system.denominators)]
    max_m = max(abs(m) for row in system.numerators for m in row[:-1]) or 1
    L_bound = max(1, 2 * math.lcm(*system.denominators) * max_m)

    L = None
    for cand in range(1, L_bound + 1):
        rho = [sum(b * cand**h for h, b in enumerate(row)) for row in ms]
        if all(rho):
            L = cand
            break
    if L is None:
        raise InvariantViolation(f"no L <= {L_bound} makes every rho nonzero")

    q = [Fraction(0)] * r
    gcoef: list[tuple[Fraction, ...]] = [()] * r
    offsets: list[tuple[Fraction, ...]] = [(Fraction(0),)] * r
    for h, col in enumerate(free):
        q[col] = Fraction(L**h)
        gcoef[col] = tuple(Fraction(int(i == h)) for i in range(1, f))
    for row, n, col, rh in zip(ms, system.denominators, system.dependent, rho):
        q[col] = rh
        gcoef[col] = tuple(row[1:])
        offsets[col] = tuple(Fraction(c, n) for c in range(n))

    dilates: list[tuple[int, ...]] = []
    for col in range(r):
        kap = _integer_range((q[col],) + gcoef[col], min(offsets[col]), max(offsets[col]))
        dilates.append(tuple(-x for x in kap))
    I_bound = r * L**r * max_m
    if any(abs(i) > I_bound for d in dilates for i in d):
        raise InvariantViolation("dilate exponent exceeds the trivial bound")

    dep_classes = [len(offsets[c]) * len(dilates[c]) for c in system.dependent]
    shift_classes = math.prod(dep_classes)
    if r == 2 and k == 1:
        shift_bound = 3 * system.denominators[0] ** 2
    else:
        delta = 1 + r * max(abs(m) // n for row, n in zip(system.numerators, system.denominators) for m in row[:-1])
        shift_bound = sum(system.denominators) * (2 * delta + 1)

    distinct = _bases_distinct(list(ps), q)
    curves: list[Curve] = []
    total = math.prod(len(offsets[c]) * len(dilates[c]) for c in range(r))
    if total <= max_curves:
        per_coord = [[(s, i) for s in offsets[c] for i in dilates[c]] for c in range(r)]
        for combo in itertools.product(*per_coord):
            curves.append(Curve(tuple(q), tuple(gcoef), tuple(s for s, _ in combo), tuple(i for _, i in combo)))
    return CurveFamily(
        L=L, L_bound=L_bound, rho=list(rho), q=q, delta_coeffs=gcoef, offset_sets=offsets,
        dilate_sets=dilates, I_bound=I_bound, shift_set_bound=shift_bound,
        shift_classes=shift_classes, full_box=False, distinct_bases=distinct, curves=curves,
    )


@dataclass(frozen=True)
class CoverReport:
    N: int
    tol: float
    misses: int
    first_miss: int | None
    max_residual: float


def synthetic_ratios(system: RelationSystem, free_values: Sequence) -> list[mpmath.mpf]:
    """Ratios satisfying the system exactly: free columns given, dependent ones solved."""
    if len(free_values) != len(system.free):
        raise ValueError("one value per free column is required")
    with mpmath.workprec(BITS + 64):
        lam = [mpmath.mpf(0)] * system.r
        for col, v in zip(system.free, free_values):
            lam[col] = mpmath.mpf(v.numerator) / v.denominator if isinstance(v, Fraction) else mpmath.mpf(v)
        for col, b in zip(system.dependent, system.reduced):
            lam[col] = mpmath.fsum(mpmath.mpf(x.numerator) / x.denominator * lam[h] for x, h in zip(b, system.free))
            lam[col] += mpmath.mpf(b[-1].numerator) / b[-1].denominator
        return lam


def verify_curve_cover(
    system: RelationSystem,
    primes: PrimeSet | Iterable[int],
    N: int,
    tol: float,
    ratios: Sequence | None = None,
) -> CoverReport:
    """Count n <= N whose exponent vector lies on no curve of the family (within tol)."""
    ps = PrimeSet.coerce(primes)
    fam = make_curves(system, ps, max_curves=0)
    if fam.full_box:
        return CoverReport(N, tol, 0, None, 0.0)
    lams = log_ratios(ps) if ratios is None else list(ratios)
    fixed = [_to_fixed(x) for x in lams]
    free = system.free
    misses, first, worst = 0, None, mpmath.mpf(0)
    with mpmath.workprec(BITS):
        rho = [mpmath.mpf(x.numerator) / x.denominator for x in fam.rho]
        gco = {c: [mpmath.mpf(g.numerator) / g.denominator for g in fam.delta_coeffs[c]] for c in range(system.r)}
        for n in range(1, N + 1):
            u = [mpmath.ldexp(mpmath.mpf(n * lam & _MASK), -BITS) for lam in fixed]
            t = u[free[0]]
            deltas = []
            ok = True
            for h, col in enumerate(free[1:], start=1):
                e = fam.L**h * t
                d = mpmath.frac(u[col] - e)
                deltas.append(d)
                if -int(mpmath.floor(e + d)) not in fam.dilate_sets[col]:
                    ok = False
            best_all = mpmath.mpf(0)
            for j, col in enumerate(system.dependent):
                base = rho[j] * t + mpmath.fsum(g * d for g, d in zip(gco[col], deltas))
                best = None
                for s in fam.offset_sets[col]:
                    e = base + mpmath.mpf(s.numerator) / s.denominator
                    kappa = int(mpmath.nint(e - u[col]))
                    if -kappa not in fam.dilate_sets[col]:
                        continue
                    res = abs(e - kappa - u[col])
                    best = res if best is None or res < best else best
                if best is None or best >= tol:
                    ok = False
                if best is not None:
                    best_all = max(best_all, best)
            worst = max(worst, best_all)
            if not ok:
                misses += 1
                first = n if first is None else first
    return CoverReport(N, tol, misses, first, float(worst))
