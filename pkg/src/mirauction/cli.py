"""``mir`` command-line harness.

Exit codes: 0 when every check passed, 1 on an assertion failure, 2 when a
computation was refused for scale or a partition search failed.
"""
from __future__ import annotations

import argparse
import json
import sys
import time
from concurrent.futures import ProcessPoolExecutor
from fractions import Fraction
from itertools import combinations, product

from . import banks, formats, mechanisms, partitions, reports, verify
from .bits import mask_of
from .errors import MalformedInput, MIRError, PreconditionFailed, ScaleRefused, SearchFailed
from .instances import KINDS, gen_instance, load_instance

EXIT_OK, EXIT_ASSERT, EXIT_REFUSED = 0, 1, 2
MECHANISM_NAMES = tuple(mechanisms.MECHANISMS)


# --- shared helpers ---------------------------------------------------------

def _int_list(text: str) -> list[int]:
    try:
        return [int(x) for x in text.split(",") if x.strip()]
    except ValueError:
        raise argparse.ArgumentTypeError(f"expected comma-separated integers, got {text!r}") from None


def _str_list(text: str) -> list[str]:
    return [x.strip() for x in text.split(",") if x.strip()]


def _params(pairs) -> dict:
    out = {}
    for p in pairs or []:
        key, sep, val = p.partition("=")
        if not sep:
            raise MalformedInput(f"--param expects key=value, got {p!r}")
        try:
            out[key] = int(val)
        except ValueError:
            try:
                out[key] = float(val)
            except ValueError:
                out[key] = val
    return out


_DEFAULTS = {"dp": mechanisms.DP_BUDGET, "enum": banks.ENUM_BUDGET,
             "constants": (partitions.C1, partitions.C2, partitions.C_BAL)}


def configure(args) -> None:
    """Apply the budget and constant knobs globally; unset knobs get their defaults back."""
    dp = getattr(args, "budget_dp", None)
    enum = getattr(args, "budget_enum", None)
    mechanisms.DP_BUDGET = _DEFAULTS["dp"] if dp is None else dp
    banks.ENUM_BUDGET = _DEFAULTS["enum"] if enum is None else enum
    consts = _DEFAULTS["constants"]
    if getattr(args, "constants", None):
        c = args.constants.split(",")
        if len(c) != 3:
            raise MalformedInput("--constants expects c1,c2,c_bal")
        try:
            consts = tuple(Fraction(x) for x in c)
        except ValueError:
            raise MalformedInput(f"bad --constants {args.constants!r}") from None
    partitions.C1, partitions.C2, partitions.C_BAL = consts


def _write(text: str, path) -> None:
    if path in (None, "-"):
        sys.stdout.write(text)
    else:
        with open(path, "w", newline="") as f:
            f.write(text)


def _json(obj) -> str:
    return json.dumps(obj, sort_keys=True, separators=(",", ":"), default=str) + "\n"


def _run_one(name, inst, k, seed, y=None, L=None, with_opt=False, timing=False, instance_id=""):
    start = time.perf_counter()
    if name == "chunking" and L is not None:
        out = mechanisms.vcg_outcome(banks.chunking_bank(L, inst.n), inst.valuations)
        out.z = L.z
    else:
        out = mechanisms.run_mechanism(name, inst.valuations, inst.m, k, seed, y)
    elapsed = time.perf_counter() - start
    opt = verify.brute_force_opt(inst.valuations).welfare if with_opt else None
    return reports.ReportRecord(
        name, instance_id, seed, inst.m, inst.n, k, out.welfare, out.denominator, opt,
        payments=list(out.payments), queries=list(out.queries), z=out.z, kind=inst.kind,
        wall_time=round(elapsed, 6) if timing else None), out


# --- subcommands --------------------------------------------------------------

def cmd_gen(args) -> int:
    params = _params(args.param)
    if args.k is not None:
        params.setdefault("k", args.k)
    inst = gen_instance(args.kind, args.m, args.n, args.seed, **params)
    _write(inst.dumps(), args.output)
    return EXIT_OK


def cmd_partition_find(args) -> int:
    r = args.r if args.r is not None else args.t
    z_max = args.z_max
    while True:
        # same seed, so a retry only extends the draw stream
        try:
            L = partitions.find_r_itemizing(args.m, args.t, r, z_max=z_max, seed=args.seed)
            break
        except SearchFailed:
            if r > args.t or z_max * 2 > args.z_cap:
                raise
            z_max *= 2
    _write(formats.dump_partition_list(L), args.output)
    return EXIT_OK


def cmd_run(args) -> int:
    inst = load_instance(args.instance)
    L = None
    if args.list:
        with open(args.list) as f:
            L = formats.load_partition_list(f.read())
        if args.mechanism != "chunking":
            raise MalformedInput("--list applies to the chunking mechanism only")
    rec, out = _run_one(args.mechanism, inst, args.k, args.seed, args.y, L, args.opt, args.timing,
                        str(args.instance))
    _write(reports.emit([rec], args.format), args.output)
    if args.mechanism == "chunking" and rec.opt is not None:
        # welfare * m/k >= OPT, exactly
        if rec.welfare * inst.m < rec.opt * args.k:
            print(f"chunking guarantee violated: welfare={rec.welfare} opt={rec.opt}", file=sys.stderr)
            return EXIT_ASSERT
    return EXIT_OK


def cmd_opt(args) -> int:
    inst = load_instance(args.instance)
    res = verify.brute_force_opt(inst.valuations)
    _write(_json({"welfare": res.welfare, "denominator": res.denominator,
                  "allocation": res.allocation.sets(), "values": list(res.own)}), args.output)
    return EXIT_OK


def _suite_truthful(args, inst):
    def mech(vals):
        return mechanisms.run_mechanism(args.mechanism, vals, inst.m, args.k, args.seed, args.y)
    res = verify.check_truthful(mech, inst.valuations,
                                verify.misreport_deviations(inst.valuations, args.misreports, args.seed))
    yield {"check": "truthful", "mechanism": args.mechanism, "deviations": res.checked,
           "violations": len(res.violations), "passed": res.passed}
    yield {"check": "individual_rationality", "mechanism": args.mechanism, "runs": res.runs,
           "violations": len(res.ir_violations), "passed": not res.ir_violations}


def _suite_shatter(args, inst):
    if args.list:
        with open(args.list) as f:
            L = formats.load_partition_list(f.read())
    else:
        L = mechanisms.chunking_list(inst.m, args.k, args.seed)
    if L.certificate is None:
        raise PreconditionFailed("the partition list carries no itemizing certificate")
    bank = banks.chunking_bank(L, inst.n)
    r = args.r if args.r is not None else L.t
    everyone = mask_of(range(inst.n))
    for size in range(r + 1):
        for S in combinations(range(inst.m), size):
            w = verify.check_d_shatters(bank, mask_of(S), everyone, inst.n)
            yield {"check": "shatter", "items": list(S), "d": inst.n, "passed": w.verified}


def _suite_embedding(args, inst):
    n = args.n if args.n is not None else inst.n
    bank = banks.complete_bank(n, n)
    rep = verify.embedding_sweep(bank, verify.cyclic_family(n))
    yield {"check": "embedding", "n": n, "z": 2, "cases": rep.cases,
           "exceptions": len(rep.exceptions), "passed": rep.passed}


def _suite_decomposition(args, inst):
    opt = verify.brute_force_opt(inst.valuations)
    rep = verify.decomposition_report(inst.valuations, opt, args.k, args.mode)
    yield {"check": "decomposition", **rep.as_dict(), "passed": rep.inequality_holds}


SUITES = {"truthful": _suite_truthful, "shatter": _suite_shatter,
          "embedding": _suite_embedding, "decomposition": _suite_decomposition}


def cmd_verify(args) -> int:
    inst = load_instance(args.instance) if args.instance else None
    if inst is None and args.suite != "embedding":
        raise MalformedInput(f"--suite {args.suite} needs --instance")
    records = list(SUITES[args.suite](args, inst))
    _write("".join(_json(r) for r in records), args.output)
    return EXIT_OK if all(r["passed"] for r in records) else EXIT_ASSERT


def _sweep_cell(job):
    cell, mechs, trials, seed, with_opt, timing, y = job
    m, k, n, kind = cell
    out = []
    for trial in range(trials):
        tseed = banks.derive_seed(seed, m, k, n, KINDS.index(kind), trial)
        iid = f"{kind}-m{m}-n{n}-t{trial}"
        try:
            inst = gen_instance(kind, m, n, tseed)
        except MIRError as e:
            out.append(reports.ReportRecord("-", iid, tseed, m, n, k, 0, kind=kind, error=str(e)))
            continue
        opt = verify.brute_force_opt(inst.valuations).welfare if with_opt else None
        for name in mechs:
            try:
                rec, _ = _run_one(name, inst, k, seed, y, None, False, timing, iid)
                rec.opt = opt
                rec.ratio = reports.ratio_of(opt, rec.welfare) if opt is not None else None
            except (ScaleRefused, SearchFailed, MalformedInput) as e:
                rec = reports.ReportRecord(name, iid, tseed, m, n, k, 0, kind=kind, error=str(e))
            out.append(rec)
    return out


def cmd_sweep(args) -> int:
    cells = list(product(args.m, args.k, args.n, args.kinds))
    for kind in args.kinds:
        if kind not in KINDS:
            raise MalformedInput(f"unknown kind {kind!r}")
    jobs = [(c, args.mechanisms, args.trials, args.seed, not args.no_opt, args.timing, args.y)
            for c in cells]
    if args.jobs > 1:
        with ProcessPoolExecutor(args.jobs) as pool:
            results = list(pool.map(_sweep_cell, jobs))  # map keeps cell order
    else:
        results = [_sweep_cell(j) for j in jobs]
    records = [r for cell in results for r in cell]
    _write(reports.emit(records, args.format), args.output)
    summary = reports.summarize(records)
    if args.summary:
        _write(reports.emit_summary(summary), args.summary)
    for c in summary:
        if c.empirical_constant is not None:
            print(f"{c.mechanism} {c.kind} m={c.m} n={c.n} k={c.k}: worst ratio {c.worst_ratio:.4g}, "
                  f"ratio/sqrt(m/k) = {c.empirical_constant:.4g}", file=sys.stderr)
    bad = [c for c in summary if c.mechanism == "chunking" and c.worst_ratio is not None
           and c.worst_ratio > c.bound]
    # exact re-check of the hard assertion per record
    bad_records = [r for r in records if r.mechanism == "chunking" and r.error is None
                   and r.opt is not None and r.welfare * r.m < r.opt * r.k]
    if bad or bad_records:
        print(f"chunking ratio exceeded m/k in {len(bad_records)} runs", file=sys.stderr)
        return EXIT_ASSERT
    return EXIT_OK


def cmd_report(args) -> int:
    records = []
    for path in args.inputs:
        records.extend(reports.read_records(path))
    if args.summarize:
        _write(reports.emit_summary(reports.summarize(records), args.format), args.output)
    else:
        _write(reports.emit(records, args.format), args.output)
    return EXIT_OK


# --- parser ---------------------------------------------------------------------

def _common(p, k_list=False):
    p.add_argument("--seed", type=int, default=0)
    if k_list:
        p.add_argument("--k", type=_int_list, default=[1])
    else:
        p.add_argument("--k", type=int, default=1)
    p.add_argument("--y", type=int, default=None, help="number of sampled bidder bucketings")
    p.add_argument("--budget-dp", type=int, default=None, help="largest chunk count for the subset DP")
    p.add_argument("--budget-enum", type=int, default=None, help="largest explicit bank enumeration")
    p.add_argument("--constants", default=None, help="c1,c2,c_bal for regularity and balance")
    p.add_argument("-o", "--output", "--out", default=None)
    return p


def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="mir", description=__doc__.splitlines()[0])
    sub = p.add_subparsers(dest="command", required=True)

    g = _common(sub.add_parser("gen", help="generate an instance file"))
    g.add_argument("--kind", choices=KINDS, required=True)
    g.add_argument("--m", type=int, required=True)
    g.add_argument("--n", type=int, default=None)
    g.add_argument("--param", action="append", help="family parameter key=value")
    g.set_defaults(func=cmd_gen, k=None)

    f = _common(sub.add_parser("partition-find", help="search an r-itemizing partition list"))
    f.add_argument("--m", type=int, required=True)
    f.add_argument("--t", type=int, required=True)
    f.add_argument("--r", type=int, default=None)
    f.add_argument("--z-max", type=int, default=4096)
    f.add_argument("--z-cap", type=int, default=1 << 16, help="retries double z-max up to this")
    f.set_defaults(func=cmd_partition_find)

    r = _common(sub.add_parser("run", help="run a mechanism on an instance"))
    r.add_argument("--instance", required=True)
    r.add_argument("--mechanism", choices=MECHANISM_NAMES, default="chunking")
    r.add_argument("--list", default=None, help="partition list file for the chunking mechanism")
    r.add_argument("--opt", action="store_true", help="also compute the brute-force optimum")
    r.add_argument("--format", choices=("jsonl", "csv"), default="jsonl")
    r.add_argument("--timing", action="store_true", help="record wall-clock time (not reproducible)")
    r.set_defaults(func=cmd_run)

    o = _common(sub.add_parser("opt", help="brute-force optimal allocation"))
    o.add_argument("--instance", required=True)
    o.set_defaults(func=cmd_opt)

    v = _common(sub.add_parser("verify", help="run a verification suite"))
    v.add_argument("--suite", choices=tuple(SUITES), required=True)
    v.add_argument("--instance", default=None)
    v.add_argument("--mechanism", choices=MECHANISM_NAMES, default="chunking")
    v.add_argument("--misreports", type=int, default=verify.MISREPORTS)
    v.add_argument("--list", default=None)
    v.add_argument("--r", type=int, default=None)
    v.add_argument("--n", type=int, default=None)
    v.add_argument("--mode", choices=("chunking", "bucket"), default="chunking")
    v.set_defaults(func=cmd_verify)

    s = _common(sub.add_parser("sweep", help="ratio sweep over an (m, k, n) grid"), k_list=True)
    s.add_argument("--m", type=_int_list, required=True)
    s.add_argument("--n", type=_int_list, required=True)
    s.add_argument("--kinds", type=_str_list, default=["additive"])
    s.add_argument("--mechanisms", type=_str_list, default=list(MECHANISM_NAMES))
    s.add_argument("--trials", type=int, default=10)
    s.add_argument("--jobs", type=int, default=1)
    s.add_argument("--no-opt", action="store_true")
    s.add_argument("--format", choices=("jsonl", "csv"), default="csv")
    s.add_argument("--summary", default=None, help="write per-cell worst/mean ratios (CSV) here")
    s.add_argument("--timing", action="store_true")
    s.set_defaults(func=cmd_sweep)

    e = _common(sub.add_parser("report", help="convert or summarize report files"))
    e.add_argument("inputs", nargs="+")
    e.add_argument("--format", choices=("jsonl", "csv"), default="csv")
    e.add_argument("--summarize", action="store_true")
    e.set_defaults(func=cmd_report)
    return p


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    saved = (mechanisms.DP_BUDGET, banks.ENUM_BUDGET, partitions.C1, partitions.C2, partitions.C_BAL)
    try:
        configure(args)
        return args.func(args)
    except (ScaleRefused, SearchFailed) as e:
        print(f"mir: {e}", file=sys.stderr)
        return EXIT_REFUSED
    except PreconditionFailed as e:
        print(f"mir: precondition failed: {e}", file=sys.stderr)
        return EXIT_ASSERT
    except (MalformedInput, OSError) as e:
        # bad input, like a usage error, is "could not run" rather than a failed check
        print(f"mir: {e}", file=sys.stderr)
        return EXIT_REFUSED
    finally:
        (mechanisms.DP_BUDGET, banks.ENUM_BUDGET, partitions.C1, partitions.C2,
         partitions.C_BAL) = saved


if __name__ == "__main__":
    sys.exit(main())
