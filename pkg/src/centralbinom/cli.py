"""Command-line front end.

Exit status: 0 on success, 1 on usage errors, 2 when an internal
invariant check fails (for instance a digit set with colliding residues).
"""

from __future__ import annotations

import argparse
import csv
import json
import logging
import math
import os
import sys
import time
from dataclasses import asdict, is_dataclass
from fractions import Fraction
from pathlib import Path
from typing import Any, Sequence

import numpy as np

from . import __version__
from .errors import CheckpointError, InvariantViolation

log = logging.getLogger("centralbinom")

HEX_THRESHOLD_DIGITS = 10_000


class UsageError(Exception):
    pass


class _Parser(argparse.ArgumentParser):
    def error(self, message):  # argparse exits 2 by default; usage errors are 1 here
        self.print_usage(sys.stderr)
        self.exit(1, f"{self.prog}: error: {message}\n")


# ---------------------------------------------------------------------------
# argument types


def parse_int(text: str) -> int:
    """Accepts 1000, 10^4, 2**20, 1e4 and 0x-prefixed hex."""
    s = text.strip().replace("_", "")
    try:
        if s.lower().startswith("0x"):
            return int(s, 16)
        for op in ("^", "**"):
            if op in s:
                b, e = s.split(op, 1)
                return int(b) ** int(e)
        if "e" in s.lower():
            mant, exp = s.lower().split("e", 1)
            v = Fraction(mant) * Fraction(10) ** int(exp)
            if v.denominator != 1:
                raise ValueError
            return int(v)
        return int(s)
    except ValueError:
        raise argparse.ArgumentTypeError(f"not an integer: {text!r}") from None


def parse_int_list(text: str) -> list[int]:
    try:
        return [parse_int(x) for x in text.split(",") if x.strip()]
    except argparse.ArgumentTypeError:
        raise argparse.ArgumentTypeError(f"not a comma-separated integer list: {text!r}") from None


def parse_float_list(text: str) -> list[float]:
    try:
        return [float(x) for x in text.split(",") if x.strip()]
    except ValueError:
        raise argparse.ArgumentTypeError(f"not a comma-separated list of numbers: {text!r}") from None


def parse_fraction_list(text: str) -> list[Fraction]:
    try:
        return [Fraction(x.strip()) for x in text.split(",") if x.strip()]
    except ValueError:
        raise argparse.ArgumentTypeError(f"not a comma-separated list of rationals: {text!r}") from None


# ---------------------------------------------------------------------------
# output


def _plain(obj: Any) -> Any:
    if is_dataclass(obj) and not isinstance(obj, type):
        return _plain(asdict(obj))
    if isinstance(obj, dict):
        return {str(k): _plain(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [_plain(v) for v in obj]
    if isinstance(obj, np.ndarray):
        return _plain(obj.tolist())
    if isinstance(obj, (np.integer,)):
        return int(obj)
    if isinstance(obj, (np.floating,)):
        return float(obj)
    if isinstance(obj, (np.bool_,)):
        return bool(obj)
    if isinstance(obj, Fraction):
        return str(obj)
    return obj


def dumps(obj: Any) -> str:
    return json.dumps(_plain(obj), sort_keys=True, indent=2)


class Output:
    def __init__(self, fmt: str, stream=None):
        self.fmt = fmt
        self.stream = stream or sys.stdout
        self.records: list[Any] = []

    def emit(self, obj: Any) -> None:
        obj = _plain(obj)
        self.records.append(obj)
        if self.fmt == "json":
            self.stream.write(dumps(obj) + "\n")
        elif self.fmt == "csv" and isinstance(obj, list) and obj and isinstance(obj[0], dict):
            w = csv.DictWriter(self.stream, fieldnames=list(obj[0].keys()), lineterminator="\n")
            w.writeheader()
            w.writerows(obj)
        elif self.fmt in ("csv", "plain") and isinstance(obj, dict):
            for k in sorted(obj):
                v = obj[k]
                self.stream.write(f"{k}: {json.dumps(v, sort_keys=True) if isinstance(v, (dict, list)) else v}\n")
        else:
            self.stream.write(dumps(obj) + "\n")

    def line(self, text: str) -> None:
        self.stream.write(text + "\n")


# ---------------------------------------------------------------------------
# subcommands


def cmd_kummer(args, out: Output) -> dict:
    from .core_arith import kummer_valuation, trivial_bound

    primes = args.prime or []
    if not primes:
        raise UsageError("--prime is required")
    reports = []
    for p in primes:
        rep = kummer_valuation(args.n, p)
        d = asdict(rep)
        d["trivial_bound"] = trivial_bound(args.n, p) if args.n >= 1 else 0
        reports.append(d)
    result = reports[0] if len(reports) == 1 else reports
    out.emit(result)
    return {"reports": reports}


def cmd_heuristic(args, out: Output) -> dict:
    from .heuristics import condition_sum, predicted_count

    rep = condition_sum(args.primes).to_dict()
    if args.limit is not None:
        rep["limit"] = args.limit
        rep["predicted_count"] = predicted_count(args.primes, args.limit)
    out.emit(rep)
    return rep


def _caps_arg(text: str | None):
    if text is None or text in ("half", "third"):
        return text
    return parse_int_list(text)


def cmd_search(args, out: Output) -> dict:
    from .digit_search import (
        DigitConstraintProblem,
        census,
        checkpoint_load,
        checkpoint_save,
        run_partitioned,
    )
    from .errors import FingerprintMismatch

    problem = DigitConstraintProblem.create(args.primes, args.limit, caps=_caps_arg(args.caps), relax_epsilon=args.relax)
    state = None
    ck = Path(args.checkpoint) if args.checkpoint else None
    if ck is not None and ck.exists():
        with open(ck, "rb") as fh:
            state = checkpoint_load(fh)
        if state.fingerprint != problem.fingerprint():
            raise FingerprintMismatch(f"{ck} was written for a different problem")
    t0 = time.perf_counter()
    st = run_partitioned(problem, workers=args.workers, state=state, node_budget=args.node_budget)
    elapsed = time.perf_counter() - t0
    if ck is not None:
        with open(ck, "wb") as fh:
            checkpoint_save(st, fh)
    found = sorted(set(st.found))
    for n in found:
        out.line(str(n))
    summary = {
        "primes": list(problem.primes),
        "caps": list(problem.caps),
        "limit": problem.limit,
        "relax_epsilon": problem.relax_epsilon,
        "count": len(found),
        "nodes": st.nodes,
        "complete": st.done,
    }
    if args.timing:
        summary["elapsed"] = round(elapsed, 6)
    if args.census or args.figure:
        rows = census(problem, args.bucket_exponent, found=found) if st.done else []
        summary["census"] = [asdict(r) for r in rows]
        if args.figure and rows:
            from .plotting import census_figure

            summary["figure"] = str(census_figure(rows, args.figure, title=f"primes {list(problem.primes)}"))
    out.line(json.dumps(_plain(summary), sort_keys=True))
    out.records.append(summary)
    return {"found": found, **{k: v for k, v in summary.items() if k != "elapsed"}}


def cmd_construct(args, out: Output) -> dict:
    from .construction import best_t_sweep, build_n, theorem_bound_holds

    bits = args.precision_bits or 128
    if args.t is None:
        t, rep = best_t_sweep(args.primes, args.N, args.H, s_max=args.s_budget, bits=bits, workers=args.workers)
    else:
        rep = build_n(args.primes, args.N, args.H, args.t, s_max=args.s_budget, bits=bits)
    d = rep.to_dict()
    n = d.pop("n")
    digits = len(str(n)) if n.bit_length() < 40_000 else None
    if args.n_file or digits is None or digits > HEX_THRESHOLD_DIGITS:
        path = Path(args.n_file or "n.hex")
        path.write_text(format(n, "x") + "\n")
        d["n_file"] = str(path)
    elif args.hex:
        d["n"] = hex(n)
    else:
        d["n"] = str(n)
    d["n_bits"] = n.bit_length()
    if args.epsilon is not None:
        d["epsilon"] = args.epsilon
        d["theorem_bound_holds"] = theorem_bound_holds(rep, args.epsilon)
    if args.figure:
        from .plotting import construction_figure

        d["figure"] = str(construction_figure(rep, args.figure))
    out.emit(d)
    return d


def _ratios_arg(text: str | None):
    return None if text is None else parse_fraction_list(text)


def cmd_equidist(args, out: Output) -> dict:
    from . import equidist as eq

    verb = args.verb
    if verb == "orbit":
        s = eq.orbit(args.primes, args.N)
        rows = [{"n": i + 1, **{f"p{p}": float(s.vectors[i, j]) for j, p in enumerate(s.primes)}} for i in range(s.N)]
        if args.figure:
            from .plotting import orbit_figure

            orbit_figure(s, args.figure)
        out.emit(rows)
        return {"rows": rows}
    if verb == "weyl":
        s = eq.orbit(args.primes, args.N)
        r = len(s.primes)
        if args.k:
            ks = [tuple(k) for k in args.k]
        else:
            rng = range(-args.kmax, args.kmax + 1)
            ks = [k for k in np.ndindex(*([len(rng)] * r))]
            ks = [tuple(rng[i] for i in k) for k in ks]
            ks = [k for k in ks if any(k) and next(x for x in k if x) > 0]
        rows = [{"k": " ".join(str(x) for x in k), "magnitude": eq.weyl_sum(s, k)} for k in ks]
        if args.figure:
            from .plotting import orbit_figure

            orbit_figure(s, args.figure, [(r_["k"], r_["magnitude"]) for r_ in rows])
        out.emit(rows)
        return {"rows": rows}
    if verb == "boxes":
        s = eq.orbit(args.primes, args.N)
        rep = asdict(eq.box_occupancy(s, args.P, args.k_rel))
        out.emit(rep)
        return rep
    if verb == "relations":
        found = eq.relation_search(args.primes, args.height, args.tol)
        rep = {
            "primes": list(args.primes),
            "height": args.height,
            "tol": args.tol,
            "relations": [{"coefficients": list(v), "residual": r} for v, r in found],
        }
        out.emit(rep)
        return rep
    if verb == "curves":
        rows = [parse_fraction_list(x) for x in (args.relation or [])]
        system = eq.reduce_relations(rows, r=len(args.primes))
        fam = eq.make_curves(system, args.primes)
        rep = {"system": system.to_dict(), "family": fam.to_dict()}
        if args.verify_N:
            ratios = None
            if not args.true_logs:
                rng = np.random.default_rng(args.seed)
                free_vals = [Fraction(int(x), 1 << 60) for x in rng.integers(1, 1 << 60, size=len(system.free))]
                ratios = eq.synthetic_ratios(system, free_vals)
            cover = eq.verify_curve_cover(system, args.primes, args.verify_N, args.tol, ratios=ratios)
            rep["cover"] = asdict(cover)
        out.emit(rep)
        return rep
    raise UsageError(f"unknown equidist verb {verb!r}")


def _curve_for(args, r: int, primes: Sequence[int]):
    from .fourier import ExpCurve

    thetas = args.thetas or [float(p) for p in primes]
    zetas = args.zetas or [1.0 / t for t in thetas]
    if len(thetas) != r or len(zetas) != r:
        raise UsageError(f"--zetas and --thetas need {r} entries")
    return ExpCurve(tuple(zetas), tuple(thetas))


def _instance(args):
    from .fourier import FourierInstance

    primes = args.primes
    return FourierInstance.from_digits(primes, args.P, args.H, _curve_for(args, len(primes), primes))


def cmd_fourier(args, out: Output) -> dict:
    from . import fourier as fo

    verb = args.verb
    if verb in ("instance", "exceptional", "verify"):
        inst = _instance(args)
        spectrum_report = fo.spectrum(inst)
        base = {
            "P": inst.P,
            "r": inst.r,
            "H": inst.H,
            "primes": list(inst.primes),
            "epsilon": inst.epsilon,
            "out_of_regime": inst.out_of_regime,
            "A_sizes": [len(a) for a in inst.A_sets],
            "F_size": len(inst.F),
            "Q_size": spectrum_report.Q_count,
            "Q_parseval_bound": spectrum_report.parseval_bound,
            "Q_prime": [list(s) for s in spectrum_report.Q_prime],
            "Q_prime_bound": spectrum_report.box,
            "n_max": inst.n_max,
            "delta_max": inst.delta_max,
            "delta_range_covers_P": inst.delta_max >= inst.P - 1,
        }
        if verb == "instance":
            if args.figure:
                from .plotting import fourier_figure

                base["figure"] = str(fourier_figure(inst, args.figure))
            out.emit(base)
            return base
        E = fo.exceptional_set(inst, spectrum_report)
        base["E_size"] = int(E.sum())
        base["E_fraction"] = float(E.sum() / len(inst.F)) if len(inst.F) else 0.0
        if verb == "exceptional":
            if args.csv_out:
                with open(args.csv_out, "w", newline="") as fh:
                    w = csv.writer(fh)
                    w.writerow([f"x{j + 1}" for j in range(inst.r)])
                    w.writerows(inst.F[E].tolist())
                base["csv"] = args.csv_out
            if args.figure:
                from .plotting import fourier_figure

                base["figure"] = str(fourier_figure(inst, args.figure, E))
            out.emit(base)
            return base
        rep = fo.verify_conclusion(inst, args.trials, seed=args.seed, spectrum_report=spectrum_report)
        d = asdict(rep)
        d.pop("witnesses")
        base["conclusion"] = d
        out.emit(base)
        return base
    if verb == "remark":
        rep = asdict(fo.counterexample_remark(args.r, args.P, args.epsilon))
        out.emit(rep)
        return rep
    if verb == "lemma":
        if args.tightness:
            rows = []
            for d in args.deltas:
                top, ratio = fo.tightness_example(args.tightness, d)
                rows.append({"r": args.tightness, "delta": d, "max_abs_H": top, "ratio": ratio})
            rep = {"tightness": rows}
            if args.figure:
                from .plotting import tightness_figure

                rep["figure"] = str(tightness_figure([(x["r"], x["delta"], x["ratio"]) for x in rows], args.figure))
            out.emit(rep)
            return rep
        if args.random:
            rng = np.random.default_rng(args.seed)
            lit = half = 0
            worst = math.inf
            done = 0
            while done < args.random:
                inst = random_lemma_instance(rng, args.r_max)
                if inst is None:
                    continue
                rep = fo.lemma_lower_bound(inst)
                lit += not rep.holds
                half += not rep.holds_halved
                worst = min(worst, rep.value / rep.bound)
                done += 1
            rep = {"instances": done, "violations": lit, "violations_halved": half, "min_ratio": worst}
            out.emit(rep)
            return rep
        if not (args.coefficients and args.bases and args.grid):
            raise UsageError("lemma needs --coefficients, --bases and --grid, or --random, or --tightness")
        rep = asdict(fo.lemma_lower_bound(fo.LemmaInstance(tuple(args.coefficients), tuple(args.bases), tuple(args.grid))))
        out.emit(rep)
        return rep
    raise UsageError(f"unknown fourier verb {verb!r}")


def random_lemma_instance(rng: np.random.Generator, r_max: int = 4):
    """Log-uniform bases in [e**-2.5, e**2.5], coefficients in [-5, 5], sorted uniform grid."""
    from .fourier import LemmaInstance

    r = int(rng.integers(1, r_max + 1))
    x = np.exp(rng.uniform(-2.5, 2.5, r))
    c = rng.uniform(-5, 5, r)
    v = np.sort(rng.uniform(0, 1, 2**r))
    if len(set(x.tolist())) < r or np.any(np.diff(v) <= 0) or v[0] <= 0 or np.any(c == 0):
        return None
    return LemmaInstance(tuple(c), tuple(x), tuple(v))


def cmd_store(args, out: Output) -> dict:
    from .store import default_path, store_query

    path = Path(args.store) if args.store else default_path()
    recs = store_query(path, args.fingerprint)
    if args.verb == "count":
        rep = {"path": str(path), "count": len(recs)}
    else:
        rep = {"path": str(path), "records": recs}
    out.emit(rep)
    return rep


# ---------------------------------------------------------------------------
# parser


def build_parser() -> argparse.ArgumentParser:
    p = _Parser(prog="centralbinom", description="Digit constraints and valuations of central binomial coefficients.")
    p.add_argument("--version", action="version", version=__version__)
    p.add_argument("--seed", type=parse_int, default=0, help="seed for randomised checks")
    p.add_argument("--format", choices=("json", "csv", "plain"), default="json")
    p.add_argument("--precision-bits", type=int, default=None, help="fixed-point bits for the construction (>= 128)")
    p.add_argument("--store", default=None, help="result store path (default $CENTRALBINOM_STORE)")
    p.add_argument("--record", action="store_true", help="append a record of this run to the store")
    p.add_argument("-v", "--verbose", action="store_true")
    sub = p.add_subparsers(dest="command", required=True, parser_class=_Parser)
    # the same flags are also accepted after the subcommand
    common = _Parser(add_help=False)
    common.add_argument("--seed", type=parse_int, default=argparse.SUPPRESS)
    common.add_argument("--format", choices=("json", "csv", "plain"), default=argparse.SUPPRESS)
    common.add_argument("--precision-bits", type=int, default=argparse.SUPPRESS)
    common.add_argument("--store", default=argparse.SUPPRESS)
    common.add_argument("--record", action="store_true", default=argparse.SUPPRESS)

    k = sub.add_parser("kummer", help="p-adic valuation of binom(2n, n)", parents=[common])
    k.add_argument("--n", type=parse_int, required=True)
    k.add_argument("--prime", type=parse_int, action="append")
    k.set_defaults(func=cmd_kummer)

    h = sub.add_parser("heuristic", help="density criterion for a prime set", parents=[common])
    h.add_argument("--primes", type=parse_int_list, required=True)
    h.add_argument("--limit", type=parse_int)
    h.set_defaults(func=cmd_heuristic)

    s = sub.add_parser("search", help="integers with small digits in several bases", parents=[common])
    s.add_argument("--primes", type=parse_int_list, required=True)
    s.add_argument("--limit", type=parse_int, required=True)
    s.add_argument("--caps", default=None, help="half, third, or an explicit list")
    s.add_argument("--relax", type=float, default=None, help="allow ceil(eps * digits) large digits per prime")
    s.add_argument("--checkpoint", default=None)
    s.add_argument("--node-budget", type=parse_int, default=None)
    s.add_argument("--workers", type=int, default=1)
    s.add_argument("--census", action="store_true")
    s.add_argument("--bucket-exponent", type=int, default=1)
    s.add_argument("--timing", action="store_true", help="include elapsed seconds in the summary")
    s.add_argument("--figure", default=None)
    s.set_defaults(func=cmd_search)

    c = sub.add_parser("construct", help="build n block by block", parents=[common])
    c.add_argument("--primes", type=parse_int_list, required=True)
    c.add_argument("--N", type=parse_int, required=True)
    c.add_argument("--H", type=int, default=None)
    c.add_argument("--t", type=int, default=None, help="offset; omitted means sweep all offsets")
    c.add_argument("--s-budget", type=parse_int, default=None)
    c.add_argument("--epsilon", type=float, default=None)
    c.add_argument("--workers", type=int, default=1)
    c.add_argument("--hex", action="store_true")
    c.add_argument("--n-file", default=None)
    c.add_argument("--figure", default=None)
    c.set_defaults(func=cmd_construct)

    e = sub.add_parser("equidist", help="orbit diagnostics and relation pipeline", parents=[common])
    ev = e.add_subparsers(dest="verb", required=True, parser_class=_Parser)
    eo = ev.add_parser("orbit", parents=[common])
    eo.add_argument("--primes", type=parse_int_list, required=True)
    eo.add_argument("--N", type=parse_int, required=True)
    eo.add_argument("--figure", default=None)
    ew = ev.add_parser("weyl", parents=[common])
    ew.add_argument("--primes", type=parse_int_list, required=True)
    ew.add_argument("--N", type=parse_int, required=True)
    ew.add_argument("--k", type=parse_int_list, action="append")
    ew.add_argument("--kmax", type=int, default=10)
    ew.add_argument("--figure", default=None)
    eb = ev.add_parser("boxes", parents=[common])
    eb.add_argument("--primes", type=parse_int_list, required=True)
    eb.add_argument("--N", type=parse_int, required=True)
    eb.add_argument("--P", type=parse_int, required=True)
    eb.add_argument("--k-rel", type=int, default=0, help="number of relations for the reference scale")
    er = ev.add_parser("relations", parents=[common])
    er.add_argument("--primes", type=parse_int_list, required=True)
    er.add_argument("--height", type=int, default=20)
    er.add_argument("--tol", type=float, default=1e-12)
    ec = ev.add_parser("curves", parents=[common])
    ec.add_argument("--primes", type=parse_int_list, required=True)
    ec.add_argument("--relation", action="append", help="a_1,...,a_r,a_{r+1} meaning sum a_j lambda_j + a_{r+1} = 0")
    ec.add_argument("--verify-N", type=parse_int, default=0)
    ec.add_argument("--tol", type=float, default=1e-9)
    ec.add_argument("--true-logs", action="store_true", help="check the cover against log 2 / log p instead of synthetic ratios")
    e.set_defaults(func=cmd_equidist)

    f = sub.add_parser("fourier", help="digit sets mod P, spectrum and exceptional cells", parents=[common])
    fv = f.add_subparsers(dest="verb", required=True, parser_class=_Parser)
    for name in ("instance", "exceptional", "verify"):
        fp = fv.add_parser(name, parents=[common])
        fp.add_argument("--primes", type=parse_int_list, required=True)
        fp.add_argument("--P", type=parse_int, required=True)
        fp.add_argument("--H", type=int, default=1)
        fp.add_argument("--zetas", type=parse_float_list, default=None)
        fp.add_argument("--thetas", type=parse_float_list, default=None)
        fp.add_argument("--figure", default=None)
        if name == "exceptional":
            fp.add_argument("--csv-out", default=None)
        if name == "verify":
            fp.add_argument("--trials", type=int, default=100)
    fr = fv.add_parser("remark", parents=[common])
    fr.add_argument("--r", type=int, default=2)
    fr.add_argument("--P", type=parse_int, default=10007)
    fr.add_argument("--epsilon", type=float, default=0.1)
    fl = fv.add_parser("lemma", parents=[common])
    fl.add_argument("--coefficients", type=parse_float_list)
    fl.add_argument("--bases", type=parse_float_list)
    fl.add_argument("--grid", type=parse_float_list)
    fl.add_argument("--random", type=parse_int, default=0)
    fl.add_argument("--r-max", type=int, default=4)
    fl.add_argument("--tightness", type=int, default=0, help="r for the (e**t - 1)**(r-1) example")
    fl.add_argument("--deltas", type=parse_float_list, default=[1e-2, 1e-3, 1e-4])
    fl.add_argument("--figure", default=None)
    f.set_defaults(func=cmd_fourier)

    st = sub.add_parser("store", help="query the result store", parents=[common])
    stv = st.add_subparsers(dest="verb", required=True, parser_class=_Parser)
    for name in ("query", "count"):
        sp = stv.add_parser(name, parents=[common])
        sp.add_argument("--fingerprint", default=None)
    st.set_defaults(func=cmd_store)
    return p


def _config(args) -> dict:
    skip = {"func", "record", "store", "verbose", "figure", "csv_out", "n_file", "timing", "workers"}
    return {k: _plain(v) for k, v in sorted(vars(args).items()) if k not in skip}


def run(argv: Sequence[str] | None = None, stream=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING, format="%(levelname)s %(message)s")
    out = Output(args.format, stream)
    try:
        result = args.func(args, out)
    except (InvariantViolation, CheckpointError) as exc:
        print(f"centralbinom: invariant violation: {exc}", file=sys.stderr)
        return 2
    except (UsageError, ValueError) as exc:
        print(f"centralbinom: error: {exc}", file=sys.stderr)
        return 1
    if args.record and args.command != "store":
        from .store import default_path, make_record, store_append

        path = Path(args.store) if args.store else default_path()
        store_append(path, make_record(_config(args), _plain(result), __version__))
    return 0


def main() -> None:
    try:
        code = run()
        sys.stdout.flush()
    except BrokenPipeError:
        # reader went away (e.g. piped into head); silence the flush at exit
        os.dup2(os.open(os.devnull, os.O_WRONLY), sys.stdout.fileno())
        code = 0
    sys.exit(code)


if __name__ == "__main__":
    main()
