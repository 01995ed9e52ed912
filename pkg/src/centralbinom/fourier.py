"""Discretised exponential curves, digit sets mod P and their large spectrum.

Everything here works on concrete residues mod a prime P: the digit sets
A_j, the lattice cells F traversed by a curve K(t) = (zeta_j theta_j**t),
the frequencies where the product-set transform is large, and the cells
of F that are nearly orthogonal to one of those frequencies.  The
brute-force checks of the sumset conclusion and the exponential-sum lower
bound live here too.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Sequence

import mpmath
import numpy as np

from .core_arith import is_prime
from .errors import InvariantViolation

__all__ = [
    "ExpCurve",
    "FourierInstance",
    "LemmaInstance",
    "LemmaReport",
    "RemarkReport",
    "alternating_curve",
    "build_A",
    "counterexample_remark",
    "discretize_curve",
    "epsilon_for",
    "exceptional_set",
    "find_witness",
    "lemma_constant",
    "lemma_lower_bound",
    "spectrum",
    "tightness_example",
    "tightness_instance",
    "transform",
    "triple_sumset",
    "verify_conclusion",
]

EXACT_ANGLE_MAX_P = 2003


def epsilon_for(P: int, H: int) -> float:
    """The epsilon with P**epsilon = 10**H."""
    return H * math.log(10) / math.log(P)


def build_A(p: int, P: int, H: int) -> np.ndarray:
    """Residues sum_i d_i ceil(P/p**i) + x with 0 <= d_i < p/10 and 0 <= x < ceil(P/p**H)."""
    if H < 1:
        raise ValueError("H must be >= 1")
    if P <= p ** (2 * H):
        raise ValueError(f"P must exceed p**(2H) = {p ** (2 * H)}")
    dmax = (p - 1) // 10
    weights = [-(-P // p**i) for i in range(1, H + 1)]
    width = weights[-1]
    base = np.zeros(1, dtype=np.int64)
    for w in weights:
        base = (base[:, None] + w * np.arange(dmax + 1, dtype=np.int64)[None, :]).ravel()
    values = (base[:, None] + np.arange(width, dtype=np.int64)[None, :]).ravel()
    residues = np.unique(values % P)
    if len(residues) != len(values):
        raise InvariantViolation(f"digit set for p={p}, P={P}, H={H} has colliding residues")
    return residues


def transform(A: np.ndarray, P: int) -> np.ndarray:
    """hat 1_A(s) = sum_{a in A} exp(2 pi i a s / P) for s = 0..P-1."""
    A = np.asarray(A, dtype=np.int64)
    if P <= EXACT_ANGLE_MAX_P:
        # reduce a*s mod P before taking the angle, so every phase is exact to one ulp
        roots = np.exp(2j * np.pi * np.arange(P) / P)
        idx = (np.arange(P, dtype=np.int64)[:, None] * A[None, :]) % P
        return roots[idx].sum(axis=1)
    ind = np.zeros(P)
    ind[A] = 1.0
    return np.fft.ifft(ind) * P


def triple_sumset(A: np.ndarray, P: int) -> np.ndarray:
    """Boolean mask of A + A + A mod P via integer convolution."""
    ind = np.zeros(P, dtype=np.int64)
    ind[np.asarray(A, dtype=np.int64) % P] = 1
    conv = np.convolve(np.convolve(ind, ind), ind)
    folded = np.zeros(P, dtype=np.int64)
    np.add.at(folded, np.arange(len(conv)) % P, conv)
    return folded > 0


@dataclass(frozen=True)
class ExpCurve:
    """K(t) = (zeta_j * theta_j**t)_j for t in [0, 1)."""

    zetas: tuple[float, ...]
    thetas: tuple[float, ...]

    def __post_init__(self) -> None:
        z, th = tuple(float(x) for x in self.zetas), tuple(float(x) for x in self.thetas)
        object.__setattr__(self, "zetas", z)
        object.__setattr__(self, "thetas", th)
        if len(z) != len(th) or not z:
            raise ValueError("zetas and thetas must be nonempty and of equal length")
        if any(x == 0 for x in z):
            raise ValueError("every zeta must be nonzero")
        if any(x <= 0 or x == 1 for x in th):
            raise ValueError("every theta must be positive and different from 1")
        if len(set(th)) != len(th):
            raise ValueError("thetas must be distinct")

    @property
    def r(self) -> int:
        return len(self.zetas)

    def __call__(self, t) -> np.ndarray:
        t = np.asarray(t, dtype=float)
        return np.stack([z * th**t for z, th in zip(self.zetas, self.thetas)], axis=-1)


def _crossings(z: float, th: float, P: int, t0: float, t1: float):
    """Times in [t0, t1) where P z th**t crosses an integer, with the cell entered."""
    a, b = P * z * th**t0, P * z * th**t1
    lth = math.log(th)
    if a < b:
        ks = np.arange(math.floor(a) + 1, math.ceil(b), dtype=np.int64)
        cells = ks
    else:
        # a start exactly on a boundary drops into the lower cell at t0
        ks = np.arange(math.floor(a), math.floor(b), -1, dtype=np.int64)
        cells = ks - 1
    times = np.log(ks / (P * z)) / lth if ks.size else np.zeros(0)
    keep = (times >= t0) & (times < t1)
    return times[keep], cells[keep]


def discretize_curve(curve: ExpCurve, P: int, t_range: tuple[float, float] = (0.0, 1.0), with_times: bool = False):
    """Cells x = floor(P K(t)) mod P visited for t in the range, in order of first visit.

    Crossing times of each coordinate are solved in closed form, so no
    crossing can be skipped.  Returns an (m, r) int array, plus the first
    visit time of each cell when ``with_times`` is set.
    """
    t0, t1 = t_range
    if not 0 <= t0 < t1 <= 1:
        raise ValueError("t_range must satisfy 0 <= t0 < t1 <= 1")
    r = curve.r
    start = [math.floor(P * z * th**t0) for z, th in zip(curve.zetas, curve.thetas)]
    ev_t, ev_j, ev_c = [], [], []
    for j, (z, th) in enumerate(zip(curve.zetas, curve.thetas)):
        ts, cs = _crossings(z, th, P, t0, t1)
        ev_t.append(ts)
        ev_j.append(np.full(len(ts), j))
        ev_c.append(cs)
    times = np.concatenate(ev_t)
    coords = np.concatenate(ev_j)
    cells = np.concatenate(ev_c)
    order = np.argsort(times, kind="stable")
    cur = list(start)
    seen: dict[tuple[int, ...], float] = {tuple(c % P for c in cur): t0}
    i = 0
    while i < len(order):
        t = times[order[i]]
        # crossings closer than 1e-13 in t are treated as simultaneous
        while i < len(order) and times[order[i]] - t < 1e-13:
            cur[coords[order[i]]] = int(cells[order[i]])
            i += 1
        key = tuple(c % P for c in cur)
        seen.setdefault(key, float(t))
    F = np.array(list(seen.keys()), dtype=np.int64).reshape(-1, r)
    if with_times:
        return F, np.array(list(seen.values()))
    return F


def _centred(s: np.ndarray, P: int) -> np.ndarray:
    return np.where(s > P // 2, s - P, s)


@dataclass
class FourierInstance:
    P: int
    r: int
    H: int | None
    epsilon: float
    curve: ExpCurve
    A_sets: list[np.ndarray]
    F: np.ndarray
    primes: tuple[int, ...] = ()
    out_of_regime: bool = False
    transforms: list[np.ndarray] = field(default_factory=list, repr=False)

    @classmethod
    def from_digits(cls, primes: Sequence[int], P: int, H: int, curve: ExpCurve) -> "FourierInstance":
        if not is_prime(P):
            raise ValueError("P must be prime")
        if len(primes) != curve.r:
            raise ValueError("one prime per curve coordinate is required")
        A = [build_A(p, P, H) for p in primes]
        for p, a in zip(primes, A):
            if len(a) * 10**H < P:
                raise InvariantViolation(f"|A| = {len(a)} is below P/10**H for p={p}")
        eps = epsilon_for(P, H)
        return cls._make(P, H, eps, curve, A, tuple(primes))

    @classmethod
    def custom(cls, P: int, A_sets: Sequence, curve: ExpCurve, epsilon: float) -> "FourierInstance":
        if not is_prime(P):
            raise ValueError("P must be prime")
        if len(A_sets) != curve.r:
            raise ValueError("one set per curve coordinate is required")
        A = [np.unique(np.asarray(a, dtype=np.int64) % P) for a in A_sets]
        return cls._make(P, None, epsilon, curve, A, ())

    @classmethod
    def _make(cls, P, H, eps, curve, A, primes):
        r = curve.r
        F = discretize_curve(curve, P)
        inst = cls(P, r, H, eps, curve, A, F, primes, out_of_regime=not 0 < eps < 1 / (20 * r * r))
        inst.transforms = [transform(a, P) for a in A]
        return inst

    @property
    def q_threshold(self) -> float:
        return self.P ** (self.r * (1 - 3 * self.epsilon))

    @property
    def q_prime_bound(self) -> float:
        return self.P ** (1 - 6 * self.r * self.epsilon)

    @property
    def e_threshold(self) -> float:
        return self.P ** (-8 * self.r**2 * self.epsilon)

    @property
    def n_max(self) -> int:
        return min(math.floor(self.P ** (10 * self.r**2 * self.epsilon)), self.P)

    @property
    def delta_max(self) -> int:
        return math.floor(self.P ** (7 * self.r * self.epsilon))


@dataclass
class SpectrumReport:
    Q_count: int
    Q_prime: list[tuple[int, ...]]  # centred representatives
    parseval_bound: float
    threshold: float
    box: float


def _product_dfs(mags: list[np.ndarray], reps: list[np.ndarray], threshold: float, collect: bool):
    """Frequency vectors with prod_j mags[j][s_j] >= threshold, pruned by the best remaining factor."""
    r = len(mags)
    orders = [np.argsort(-m, kind="stable") for m in mags]
    sorted_m = [m[o] for m, o in zip(mags, orders)]
    tail = [1.0] * (r + 1)
    for j in range(r - 1, -1, -1):
        tail[j] = tail[j + 1] * (sorted_m[j][0] if len(sorted_m[j]) else 0.0)
    out: list[tuple[int, ...]] = []
    count = 0

    def rec(j, acc, prefix):
        nonlocal count
        if j == r:
            count += 1
            if collect:
                out.append(tuple(prefix))
            return
        need = threshold / (acc * tail[j + 1]) if acc * tail[j + 1] > 0 else math.inf
        m = sorted_m[j]
        # m is descending: everything before this cut can still reach the threshold
        cut = int(np.searchsorted(-m, -need, side="right"))
        for i in range(cut):
            rec(j + 1, acc * m[i], prefix + [int(reps[j][orders[j][i]])])

    rec(0, 1.0, [])
    return count, out


def spectrum(inst: FourierInstance) -> SpectrumReport:
    """|Q| and Q' = Q restricted to |s_i| <= P**(1 - 6 r eps), centred representatives."""
    P = inst.P
    mags = [np.abs(t) for t in inst.transforms]
    s_all = np.arange(P)
    # relative slack guards the zero frequency and exact ties against float rounding
    thr = inst.q_threshold * (1 - 1e-9)
    q_count, _ = _product_dfs(mags, [s_all] * inst.r, thr, collect=False)
    box = inst.q_prime_bound
    cent = _centred(s_all, P)
    mask = np.abs(cent) <= box
    qp_count, q_prime = _product_dfs([m[mask] for m in mags], [cent[mask]] * inst.r, thr, collect=True)
    q_prime.sort()
    bound = P ** (-2 * inst.r * (1 - 3 * inst.epsilon)) * P**inst.r * math.prod(len(a) for a in inst.A_sets)
    return SpectrumReport(q_count, q_prime, bound, inst.q_threshold, box)


def exceptional_set(inst: FourierInstance, spectrum_report: SpectrumReport | None = None) -> np.ndarray:
    """Boolean mask over F: cells with ||x.s/P|| < P**(-8 r^2 eps) for some nonzero s in Q'."""
    spectrum_report = spectrum(inst) if spectrum_report is None else spectrum_report
    P = inst.P
    mask = np.zeros(len(inst.F), dtype=bool)
    thr = inst.e_threshold
    for s in spectrum_report.Q_prime:
        if not any(s):
            continue
        dot = (inst.F @ np.asarray(s, dtype=np.int64)) % P
        dist = np.minimum(dot, P - dot) / P
        mask |= dist < thr
    return mask


@dataclass
class ConclusionReport:
    trials: int
    successes: int
    rate: float
    exceptional_trials: int
    exceptional_successes: int
    n_max: int
    delta_max: int
    delta_covers_all: bool
    witnesses: list[tuple[int, ...]]


def _windows(inst: FourierInstance) -> list[np.ndarray]:
    """W_j = 3A_j + {0..delta_max} mod P as boolean masks."""
    P = inst.P
    dmax = inst.delta_max
    out = []
    for a in inst.A_sets:
        three = triple_sumset(a, P)
        if dmax >= P - 1:
            out.append(np.ones(P, dtype=bool))
            continue
        w = np.zeros(P, dtype=bool)
        for d in range(dmax + 1):
            w |= np.roll(three, d)
        out.append(w)
    return out


def find_witness(inst: FourierInstance, x: Sequence[int], beta: Sequence[int], windows=None):
    """Least n in [1, n_max] with n x + beta - delta in 3A for some delta in range; (n, delta) or None."""
    P = inst.P
    windows = _windows(inst) if windows is None else windows
    n = np.arange(1, inst.n_max + 1, dtype=np.int64)
    ok = np.ones(len(n), dtype=bool)
    for j in range(inst.r):
        ok &= windows[j][(n * int(x[j]) + int(beta[j])) % P]
    hits = np.flatnonzero(ok)
    if not hits.size:
        return None
    nn = int(n[hits[0]])
    deltas = []
    for j, a in enumerate(inst.A_sets):
        three = triple_sumset(a, P)
        y = (nn * int(x[j]) + int(beta[j])) % P
        deltas.append(next(d for d in range(min(inst.delta_max, P - 1) + 1) if three[(y - d) % P]))
    return nn, tuple(deltas)


def verify_conclusion(inst: FourierInstance, trials: int, seed: int = 0, spectrum_report: SpectrumReport | None = None) -> ConclusionReport:
    """Random beta and random x in F minus E; fraction of trials with a witness (n, delta)."""
    if trials < 1:
        raise ValueError("trials must be >= 1")
    rng = np.random.default_rng(seed)
    E = exceptional_set(inst, spectrum_report)
    good = np.flatnonzero(~E)
    bad = np.flatnonzero(E)
    windows = _windows(inst)
    succ = 0
    wit = []
    for _ in range(trials):
        x = inst.F[good[rng.integers(len(good))]] if good.size else None
        beta = rng.integers(0, inst.P, size=inst.r)
        if x is None:
            break
        w = find_witness(inst, x, beta, windows)
        if w is not None:
            succ += 1
            wit.append((w[0],) + w[1])
    e_succ = 0
    e_trials = min(trials, len(bad)) if bad.size else 0
    for _ in range(e_trials):
        x = inst.F[bad[rng.integers(len(bad))]]
        beta = rng.integers(0, inst.P, size=inst.r)
        e_succ += find_witness(inst, x, beta, windows) is not None
    done = trials if good.size else 0
    return ConclusionReport(
        trials=done,
        successes=succ,
        rate=succ / done if done else 0.0,
        exceptional_trials=e_trials,
        exceptional_successes=e_succ,
        n_max=inst.n_max,
        delta_max=inst.delta_max,
        delta_covers_all=inst.delta_max >= inst.P - 1,
        witnesses=wit,
    )


# ---------------------------------------------------------------------------
# the alternating-coefficient curve


def alternating_curve(r: int, theta: float = 0.5) -> ExpCurve:
    zetas = [(-1) ** (i - 1) * math.comb(r - 1, i - 1) for i in range(1, r + 1)]
    return ExpCurve(tuple(zetas), tuple(theta**j for j in range(1, r + 1)))


@dataclass
class RemarkReport:
    r: int
    P: int
    epsilon: float
    n_max: int
    t_max: float
    A_top: int
    cells_checked: int
    origin_degenerate: bool
    coordinatewise_hits: int
    dot_product_hits: int
    first_dot_product_hit: tuple | None
    first_coordinatewise_n_beyond: int | None


def counterexample_remark(r: int, P: int, epsilon: float = 0.1, theta: float = 0.5) -> RemarkReport:
    """Check n x avoids 3A_1 x ... x 3A_r for small t and n <= P**(r(r-1)eps/2).

    Two readings are reported: the coordinatewise claim (n x in the product
    set) and the scalar surrogate (n sum x_k mod P in 3A_1 + ... + 3A_r).
    The cell of t = 0 is (0, ..., 0) mod P, which lies in every product
    set; it is flagged and left out of both counts.
    """
    if r < 2:
        raise ValueError("the construction needs r >= 2")
    if not is_prime(P):
        raise ValueError("P must be prime")
    top = math.floor(P ** (1 - r * epsilon) / 3)
    n_max = max(1, math.floor(P ** (r * (r - 1) * epsilon / 2)))
    t_max = P ** (-r * epsilon)
    curve = alternating_curve(r, theta)
    F, times = discretize_curve(curve, P, (0.0, min(t_max, 1.0)), with_times=True)
    # y_i in 3A_i = [0, 3 top]; the scalar sum ranges over [0, 3 r top]
    three_top = 3 * top
    origin = np.all(F == 0, axis=1)
    cells = F[~origin]
    cell_t = times[~origin]
    coord = dot = 0
    first_dot = None
    for n in range(1, n_max + 1):
        nx = (n * cells) % P
        inside = np.all(nx <= three_top, axis=1)
        coord += int(inside.sum())
        s = (n * cells.sum(axis=1)) % P
        hit = s <= r * three_top
        dot += int(hit.sum())
        if first_dot is None and hit.any():
            i = int(np.flatnonzero(hit)[0])
            first_dot = (n, tuple(int(v) for v in cells[i]), float(cell_t[i]))
    beyond = None
    for n in range(n_max + 1, P):
        if np.any(np.all((n * cells) % P <= three_top, axis=1)):
            beyond = n
            break
    return RemarkReport(
        r=r,
        P=P,
        epsilon=epsilon,
        n_max=n_max,
        t_max=t_max,
        A_top=top,
        cells_checked=int(len(cells)),
        origin_degenerate=bool(origin.any()),
        coordinatewise_hits=coord,
        dot_product_hits=dot,
        first_dot_product_hit=first_dot,
        first_coordinatewise_n_beyond=beyond,
    )


# ---------------------------------------------------------------------------
# exponential sums at 2**r points


@dataclass(frozen=True)
class LemmaInstance:
    coefficients: tuple[float, ...]
    bases: tuple[float, ...]
    grid: tuple[float, ...]

    def __post_init__(self) -> None:
        c = tuple(float(x) for x in self.coefficients)
        x = tuple(float(v) for v in self.bases)
        v = tuple(float(g) for g in self.grid)
        object.__setattr__(self, "coefficients", c)
        object.__setattr__(self, "bases", x)
        object.__setattr__(self, "grid", v)
        if len(c) != len(x) or not c:
            raise ValueError("coefficients and bases must be nonempty and of equal length")
        if any(b <= 0 for b in x) or len(set(x)) != len(x):
            raise ValueError("bases must be positive and distinct")
        if any(a == 0 for a in c):
            raise ValueError("coefficients must be nonzero")
        if len(v) != 2 ** len(c):
            raise ValueError(f"grid needs exactly 2**r = {2 ** len(c)} points")
        if not all(0 < a < b < 1 for a, b in zip(v, v[1:])) or not 0 < v[0] or not v[-1] < 1:
            raise ValueError("grid must be strictly increasing inside (0, 1)")

    @property
    def r(self) -> int:
        return len(self.coefficients)

    @property
    def delta(self) -> float:
        return min(b - a for a, b in zip(self.grid, self.grid[1:])) if len(self.grid) > 1 else 1.0

    def evaluate(self, t) -> mpmath.mpf:
        with mpmath.workdps(40):
            return mpmath.fsum(mpmath.mpf(c) * mpmath.power(x, t) for c, x in zip(self.coefficients, self.bases))


def lemma_constant(bases: Sequence[float], coefficients: Sequence[float], halve: bool = False) -> float:
    """The constant obtained by unrolling the induction, one level per term.

    At each level i0 maximises |c_i|, j0 is index 2 when i0 is index 1 and
    index 1 otherwise, the bases become x_k / x_j0 and the coefficients
    c_k log(x_k / x_j0).  With ``halve`` each level also carries the factor
    1/2 lost when a lower bound on |K(a) - K(b)| is passed to max(|K(a)|, |K(b)|).
    """
    xs = [float(b) for b in bases]
    cs = [float(c) for c in coefficients]
    const = 1.0
    while len(xs) > 1:
        i0 = max(range(len(cs)), key=lambda i: (abs(cs[i]), -i))
        j0 = 1 if i0 == 0 else 0
        xj = xs[j0]
        ratios = [x / xj for k, x in enumerate(xs) if k != j0]
        logs = [math.log(y) for y in ratios]
        cs = [c * lg for c, lg in zip((c for k, c in enumerate(cs) if k != j0), logs)]
        const *= min(abs(lg) for lg in logs) * min(1.0, xj)
        if halve:
            const *= 0.5
        xs = ratios
    return const * min(1.0, xs[0])


LEMMA_RTOL = 1e-12


@dataclass(frozen=True)
class LemmaReport:
    j: int
    value: float
    delta: float
    constant: float
    bound: float
    holds: bool
    constant_halved: float
    bound_halved: float
    holds_halved: bool


def lemma_lower_bound(inst: LemmaInstance) -> LemmaReport:
    vals = [abs(inst.evaluate(v)) for v in inst.grid]
    j = max(range(len(vals)), key=lambda i: vals[i])
    top = float(vals[j])
    cmax = max(abs(c) for c in inst.coefficients)
    d = inst.delta ** (inst.r - 1)
    c_lit = lemma_constant(inst.bases, inst.coefficients)
    c_half = lemma_constant(inst.bases, inst.coefficients, halve=True)
    b_lit, b_half = d * c_lit * cmax, d * c_half * cmax
    # r = 1 is tight, so the comparison carries float rounding slack
    slack = 1 - LEMMA_RTOL
    return LemmaReport(j, top, inst.delta, c_lit, b_lit, top >= b_lit * slack, c_half, b_half, top >= b_half * slack)


def tightness_example(r: int, delta: float) -> tuple[float, float]:
    """(max_j |H(v_j)|, that value / delta**(r-1)) for H(t) = (e**t - 1)**(r-1), v_j = j delta."""
    if r < 2:
        raise ValueError("r must be >= 2")
    if not 0 < delta * 2**r < 1:
        raise ValueError("need 2**r * delta < 1 so the grid fits in (0, 1)")
    with mpmath.workdps(40):
        top = max(abs(mpmath.expm1(j * mpmath.mpf(delta))) ** (r - 1) for j in range(1, 2**r + 1))
        return float(top), float(top / mpmath.mpf(delta) ** (r - 1))


def tightness_instance(r: int, delta: float) -> LemmaInstance:
    """The same H written as sum_j (-1)**(j-1) binom(r-1, j-1) (e**(j-1))**t."""
    coeffs = tuple((-1) ** (j - 1) * math.comb(r - 1, j - 1) for j in range(1, r + 1))
    bases = tuple(math.e ** (j - 1) for j in range(1, r + 1))
    return LemmaInstance(coeffs, bases, tuple(j * delta for j in range(1, 2**r + 1)))
