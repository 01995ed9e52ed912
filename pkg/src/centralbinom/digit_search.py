"""Integers whose digits respect per-prime caps in several bases at once.

With the default caps ``(p - 1) // 2`` this is the Graham problem: by
Kummer's theorem, n qualifies for {3, 5, 7} exactly when binom(2n, n) is
coprime to 105.  Two enumerators are provided.  ``enumerate_qualifying``
checks every n up to the limit (vectorised); ``enumerate_prefix_pruned``
walks base-p digit strings of the most restrictive prime depth-first and
prunes a prefix as soon as the interval it spans is forced to contain a
bad leading digit in some other base.  The pruned walk is resumable: its
state is a plain stack that serialises to a small binary checkpoint.
"""

from __future__ import annotations

import bisect
import hashlib
import io
import json
import math
import struct
import zlib
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field
from typing import BinaryIO, Iterable, Sequence

import numpy as np

from .core_arith import PrimeSet, num_digits, to_digits
from .errors import CheckpointCorrupt, FingerprintMismatch
from .heuristics import predicted_count

__all__ = [
    "CAP_PRESETS",
    "CensusRow",
    "DigitConstraintProblem",
    "PrefixSearch",
    "SearchCheckpoint",
    "census",
    "checkpoint_load",
    "checkpoint_resume",
    "checkpoint_save",
    "decode_checkpoint",
    "encode_checkpoint",
    "enumerate_prefix_pruned",
    "enumerate_qualifying",
    "run_partitioned",
]

CAP_PRESETS = {
    "half": lambda p: (p - 1) // 2,
    "third": lambda p: p // 3,
}

EXHAUSTIVE_MAX = 1 << 64


def resolve_caps(primes: PrimeSet, caps: str | Sequence[int] | None) -> tuple[int, ...]:
    if caps is None:
        caps = "half"
    if isinstance(caps, str):
        if caps in CAP_PRESETS:
            return tuple(CAP_PRESETS[caps](p) for p in primes)
        caps = [int(c) for c in caps.split(",")]
    caps = tuple(int(c) for c in caps)
    if len(caps) != len(primes):
        raise ValueError(f"need {len(primes)} caps, got {len(caps)}")
    return caps


@dataclass(frozen=True)
class DigitConstraintProblem:
    primes: PrimeSet
    caps: tuple[int, ...]
    limit: int
    relax_epsilon: float | None = None

    def __post_init__(self) -> None:
        object.__setattr__(self, "primes", PrimeSet.coerce(self.primes))
        object.__setattr__(self, "caps", tuple(int(c) for c in self.caps))
        if len(self.caps) != len(self.primes):
            raise ValueError("one cap per prime is required")
        for p, c in zip(self.primes, self.caps):
            if not 0 <= c < p:
                raise ValueError(f"cap {c} for prime {p} must satisfy 0 <= cap < p")
        if self.limit < 1:
            raise ValueError("limit must be >= 1")
        if self.relax_epsilon is not None and not 0 < self.relax_epsilon < 1:
            raise ValueError("relax_epsilon must lie in (0, 1)")

    @classmethod
    def create(cls, primes, limit: int, caps="half", relax_epsilon: float | None = None):
        ps = PrimeSet.coerce(primes)
        return cls(ps, resolve_caps(ps, caps), int(limit), relax_epsilon)

    def allowance(self, digit_count: int) -> int:
        """Number of digits allowed above the cap for an n with this many digits."""
        if self.relax_epsilon is None:
            return 0
        return math.ceil(self.relax_epsilon * digit_count)

    def violations(self, n: int, j: int) -> tuple[int, int]:
        p, cap = self.primes[j], self.caps[j]
        bad = count = 0
        while n:
            n, d = divmod(n, p)
            count += 1
            bad += d > cap
        return bad, count

    def qualifies(self, n: int) -> bool:
        if n < 1:
            return False
        for j in range(len(self.primes)):
            bad, count = self.violations(n, j)
            if bad > self.allowance(count):
                return False
        return True

    def fingerprint(self) -> bytes:
        payload = json.dumps(
            {
                "primes": list(self.primes.primes),
                "caps": list(self.caps),
                "limit": str(self.limit),
                "relax_epsilon": None if self.relax_epsilon is None else repr(float(self.relax_epsilon)),
            },
            sort_keys=True,
        )
        return hashlib.sha256(payload.encode()).digest()

    def driver_index(self) -> int:
        """Index of the prime whose digit strings are cheapest to enumerate."""
        def density(j):
            p, cap = self.primes[j], self.caps[j]
            return (math.log(cap + 1) / math.log(p), p)
        return min(range(len(self.primes)), key=density)


# ---------------------------------------------------------------------------
# exhaustive scan


def _scan_chunk(problem: DigitConstraintProblem, arr: np.ndarray, allow: np.ndarray) -> np.ndarray:
    for p, cap in zip(problem.primes, problem.caps):
        if arr.size == 0:
            break
        x = arr.copy()
        bad = np.zeros(arr.shape, dtype=np.int64)
        count = np.zeros(arr.shape, dtype=np.int64)
        while True:
            live = x > 0
            if not live.any():
                break
            d = x % p
            bad += d > cap
            count += live
            x //= p
        arr = arr[bad <= allow[count]]
    return arr


def enumerate_qualifying(problem: DigitConstraintProblem, chunk: int = 1 << 20) -> list[int]:
    """Every n in [1, limit] passing the digit test, by direct per-n checking."""
    if problem.limit > EXHAUSTIVE_MAX:
        raise ValueError("exhaustive mode is limited to limit <= 2**64; use the pruned enumerator")
    allow = np.array([problem.allowance(k) for k in range(70)], dtype=np.int64)
    out: list[int] = []
    start = 1
    int64_top = (1 << 63) - 1
    while start <= problem.limit:
        stop = min(start + chunk, problem.limit + 1)
        if stop - 1 <= int64_top:
            arr = np.arange(start, stop, dtype=np.int64)
            out.extend(int(v) for v in _scan_chunk(problem, arr, allow))
        else:
            out.extend(n for n in range(start, stop) if problem.qualifies(n))
        start = stop
    return out


# ---------------------------------------------------------------------------
# prefix-pruned depth-first search

# frontier node: (length k, depth, violations so far, prefix value)
Node = tuple[int, int, int, int]


@dataclass
class SearchCheckpoint:
    fingerprint: bytes
    frontier: list[Node]
    found: list[int] = field(default_factory=list)
    nodes: int = 0

    @property
    def done(self) -> bool:
        return not self.frontier


class PrefixSearch:
    """Resumable depth-first walk over admissible digit strings of one prime."""

    def __init__(self, problem: DigitConstraintProblem, state: SearchCheckpoint | None = None):
        self.problem = problem
        self.driver = problem.driver_index()
        self.p = problem.primes[self.driver]
        self.cap = problem.caps[self.driver]
        self.others = [j for j in range(len(problem.primes)) if j != self.driver]
        if state is None:
            top = num_digits(problem.limit, self.p)
            state = SearchCheckpoint(problem.fingerprint(), [(k, 0, 0, 0) for k in range(top, 0, -1)])
        elif state.fingerprint != problem.fingerprint():
            raise FingerprintMismatch("checkpoint fingerprint does not match this problem")
        self.state = state
        self._pow = [1]

    def _power(self, e: int) -> int:
        while len(self._pow) <= e:
            self._pow.append(self._pow[-1] * self.p)
        return self._pow[e]

    def _interval_ok(self, lo: int, hi: int) -> bool:
        # Digits shared by every number in [lo, hi] are forced; prune on them.
        prob = self.problem
        for j in self.others:
            q, cap = prob.primes[j], prob.caps[j]
            dl, dh = to_digits(lo, q).digits, to_digits(hi, q).digits
            if len(dl) != len(dh):
                continue
            allow = prob.allowance(len(dh))
            bad = 0
            for a, b in zip(reversed(dl), reversed(dh)):
                if a != b:
                    break
                if a > cap:
                    bad += 1
                    if bad > allow:
                        return False
        return True

    def _leaf_ok(self, n: int) -> bool:
        prob = self.problem
        for j in self.others:
            bad, count = prob.violations(n, j)
            if bad > prob.allowance(count):
                return False
        return True

    def step(self) -> None:
        """Pop and expand one frontier node."""
        st = self.state
        k, depth, viol, prefix = st.frontier.pop()
        st.nodes += 1
        limit = self.problem.limit
        rem = k - depth
        if rem == 0:
            if 1 <= prefix <= limit and self._leaf_ok(prefix):
                st.found.append(prefix)
            return
        scale = self._power(rem - 1)
        allow = self.problem.allowance(k)
        top_digit = self.p - 1 if viol < allow else self.cap
        children = []
        for d in range(1 if depth == 0 else 0, top_digit + 1):
            nv = viol + (d > self.cap)
            if nv > allow:
                continue
            child = prefix * self.p + d
            lo = child * scale
            if lo > limit:
                break
            hi = min(lo + scale - 1, limit)
            if rem > 1 and not self._interval_ok(lo, hi):
                continue
            children.append((k, depth + 1, nv, child))
        st.frontier.extend(reversed(children))

    def run(self, node_budget: int | None = None) -> bool:
        """Expand nodes until done or the budget is spent; True when finished."""
        spent = 0
        while self.state.frontier and (node_budget is None or spent < node_budget):
            self.step()
            spent += 1
        return self.state.done

    def result(self) -> list[int]:
        return sorted(set(self.state.found))


def enumerate_prefix_pruned(problem: DigitConstraintProblem) -> list[int]:
    search = PrefixSearch(problem)
    search.run()
    return search.result()


def _run_shard(problem: DigitConstraintProblem, frontier: list[Node], budget: int | None):
    st = SearchCheckpoint(problem.fingerprint(), list(frontier))
    search = PrefixSearch(problem, st)
    search.run(budget)
    return st.frontier, st.found, st.nodes


def run_partitioned(
    problem: DigitConstraintProblem,
    workers: int = 1,
    state: SearchCheckpoint | None = None,
    node_budget: int | None = None,
) -> SearchCheckpoint:
    """Run the pruned search, optionally across worker processes.

    The frontier is split round-robin into ``workers`` shards; each shard
    runs independently and the shard states are merged back into one
    checkpoint (found sets by sorted union).
    """
    search = PrefixSearch(problem, state)
    st = search.state
    if workers <= 1:
        search.run(node_budget)
        st.found = sorted(set(st.found))
        return st
    spent = 0
    while st.frontier and len(st.frontier) < 4 * workers and (node_budget is None or spent < node_budget):
        search.step()
        spent += 1
    remaining = None if node_budget is None else max(node_budget - spent, 0)
    shards = [st.frontier[i::workers] for i in range(workers)]
    per_shard = None if remaining is None else -(-remaining // workers)
    frontier: list[Node] = []
    found = set(st.found)
    nodes = st.nodes
    with ProcessPoolExecutor(max_workers=workers) as pool:
        for f, got, n in pool.map(_run_shard, [problem] * workers, shards, [per_shard] * workers):
            frontier.extend(f)
            found.update(got)
            nodes += n
    return SearchCheckpoint(st.fingerprint, frontier, sorted(found), nodes)


# ---------------------------------------------------------------------------
# checkpoint format
#
#   magic "CBSC" | u16 version | u16 reserved | 32-byte fingerprint
#   u64 node count | u64 frontier length | frontier nodes | u64 found length
#   | found integers | u32 crc32 of everything before
# node: u32 length, u32 depth, u32 violations, bigint prefix
# bigint: u32 byte length, little-endian unsigned magnitude
# All fixed-width fields are little-endian.

MAGIC = b"CBSC"
VERSION = 1


def _put_big(buf: io.BytesIO, v: int) -> None:
    raw = v.to_bytes((v.bit_length() + 7) // 8, "little")
    buf.write(struct.pack("<I", len(raw)))
    buf.write(raw)


def encode_checkpoint(state: SearchCheckpoint) -> bytes:
    buf = io.BytesIO()
    buf.write(MAGIC)
    buf.write(struct.pack("<HH", VERSION, 0))
    if len(state.fingerprint) != 32:
        raise ValueError("fingerprint must be 32 bytes")
    buf.write(state.fingerprint)
    buf.write(struct.pack("<QQ", state.nodes, len(state.frontier)))
    for k, depth, viol, prefix in state.frontier:
        buf.write(struct.pack("<III", k, depth, viol))
        _put_big(buf, prefix)
    buf.write(struct.pack("<Q", len(state.found)))
    for v in state.found:
        _put_big(buf, v)
    body = buf.getvalue()
    return body + struct.pack("<I", zlib.crc32(body))


class _Reader:
    def __init__(self, data: bytes):
        self.data = data
        self.pos = 0

    def take(self, n: int) -> bytes:
        if self.pos + n > len(self.data):
            raise CheckpointCorrupt("checkpoint stream is truncated")
        out = self.data[self.pos : self.pos + n]
        self.pos += n
        return out

    def unpack(self, fmt: str):
        return struct.unpack(fmt, self.take(struct.calcsize(fmt)))

    def big(self) -> int:
        (n,) = self.unpack("<I")
        return int.from_bytes(self.take(n), "little")


def decode_checkpoint(data: bytes) -> SearchCheckpoint:
    if len(data) < 4 + 4 + 32 + 16 + 8 + 4:
        raise CheckpointCorrupt("checkpoint stream is truncated")
    body, (crc,) = data[:-4], struct.unpack("<I", data[-4:])
    rd = _Reader(body)
    if rd.take(4) != MAGIC:
        raise CheckpointCorrupt("bad checkpoint magic")
    version, _ = rd.unpack("<HH")
    if version != VERSION:
        raise CheckpointCorrupt(f"unsupported checkpoint version {version}")
    if zlib.crc32(body) != crc:
        raise CheckpointCorrupt("checkpoint checksum mismatch")
    fingerprint = rd.take(32)
    nodes, nfront = rd.unpack("<QQ")
    frontier = []
    for _ in range(nfront):
        k, depth, viol = rd.unpack("<III")
        frontier.append((k, depth, viol, rd.big()))
    (nfound,) = rd.unpack("<Q")
    found = [rd.big() for _ in range(nfound)]
    if rd.pos != len(body):
        raise CheckpointCorrupt("trailing bytes in checkpoint")
    return SearchCheckpoint(fingerprint, frontier, found, nodes)


def checkpoint_save(state: SearchCheckpoint, sink: BinaryIO) -> None:
    sink.write(encode_checkpoint(state))


def checkpoint_load(source: BinaryIO) -> SearchCheckpoint:
    return decode_checkpoint(source.read())


def checkpoint_resume(source: BinaryIO, problem: DigitConstraintProblem) -> SearchCheckpoint:
    state = checkpoint_load(source)
    if state.fingerprint != problem.fingerprint():
        raise FingerprintMismatch("checkpoint was written for a different problem")
    return state


# ---------------------------------------------------------------------------
# census


@dataclass(frozen=True)
class CensusRow:
    bound: int
    count: int
    predicted: float


def census(
    problem: DigitConstraintProblem,
    bucket_exponent: int = 1,
    found: Iterable[int] | None = None,
) -> list[CensusRow]:
    """Cumulative counts at bounds 2**(bucket_exponent * i), closed off at the limit."""
    if bucket_exponent < 1:
        raise ValueError("bucket_exponent must be >= 1")
    values = sorted(found) if found is not None else enumerate_prefix_pruned(problem)
    bounds = []
    b = 1 << bucket_exponent
    while b <= problem.limit:
        bounds.append(b)
        b <<= bucket_exponent
    if not bounds or bounds[-1] != problem.limit:
        bounds.append(problem.limit)
    return [
        CensusRow(bound, bisect.bisect_right(values, bound), predicted_count(problem.primes, bound))
        for bound in bounds
    ]
