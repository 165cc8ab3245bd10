"""Command-line interface: check one program, run the litmus suite, dump
intermediate stages, report encoding statistics.

Exit codes of `check`: 0 = property holds / outcome forbidden, 1 = assertion
violated / outcome allowed, 2 = tool error.  `litmus` exits nonzero on any
expectation mismatch.
"""

from __future__ import annotations

import argparse
import csv
import json
import os
import sys
import time
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass

from .arch import MODEL_NAMES, architecture
from .encoder import build_pord, assemble_query
from .errors import WpomcError
from .formula import emit_smtlib, sexpr
from .frontend import format_expr, parse_file
from .oracle import oracle_verdict, sc_interleave_verdict
from .program import While, walk_statements
from .solver import make_config, solve
from .ssa import build_ssa, compute_deps, unroll
from .witness import make_report, render

DEFAULT_MODEL = "sc"
DEFAULT_UNWIND = 2


@dataclass
class Pipeline:
    program: object
    unrolled: object
    ssa: object
    ses: object
    arch: object
    encoding: object
    query: object
    stage_seconds: float


def _stage(name, fn, *args, **kw):
    try:
        return fn(*args, **kw)
    except WpomcError as exc:
        raise WpomcError(f"[{name}] {exc}") from exc


def run_pipeline(path: str, model: str, unwind: int, bitwidth: int = 32,
                 ranges: bool = True, lwsync_cumulative: bool = True,
                 encode: bool = True) -> Pipeline:
    with open(path, "r", encoding="utf-8") as fh:
        text = fh.read()
    t0 = time.time()
    prog = _stage("parse", parse_file, path, text)
    unrolled = _stage("unroll", unroll, prog, unwind)
    ssa, ses = _stage("ssa", build_ssa, unrolled)
    _stage("deps", compute_deps, ses, ssa)
    arch = _stage("model", architecture, model, lwsync_cumulative)
    encoding = query = None
    if encode:
        encoding = _stage("encode", build_pord, ses, arch,
                          final_addrs=ssa.final_shared_addrs, ssa=ssa,
                          bitwidth=bitwidth, ranges=ranges)
        base = os.path.splitext(os.path.basename(path))[0]
        query = assemble_query(ssa, encoding, f"{base}_{model}")
    return Pipeline(prog, unrolled, ssa, ses, arch, encoding, query,
                    time.time() - t0)


def _verdict_of(mode: str, is_sat: bool) -> str:
    if mode == "exists":
        return "Allowed" if is_sat else "Forbidden"
    return "Violated" if is_sat else "Holds-up-to-bound"


def _exit_code(verdict: str) -> int:
    return 1 if verdict in ("Allowed", "Violated") else 0


# ---------------------------------------------------------------------------
# check


def cmd_check(args) -> int:
    pipe = run_pipeline(args.file, args.model, args.unwind, args.bitwidth,
                        not args.no_ranges, not args.lwsync_noncumulative)
    mode = pipe.program.property.mode
    out: dict = {"file": args.file, "model": args.model, "mode": mode}

    if args.oracle:
        verdict = _stage("oracle", oracle_verdict, pipe.unrolled, pipe.arch)
        if verdict == "Holds":
            verdict = "Holds-up-to-bound"
        out["verdict"] = verdict
        out["source"] = "oracle"
        _print_check(args, out, None, pipe)
        return _exit_code(verdict)

    cfg = make_config(args.solver, args.timeout, args.keep_temps)
    t0 = time.time()
    res = _stage("solve", solve, pipe.query, cfg)
    out["solve_seconds"] = round(time.time() - t0, 3)
    verdict = _verdict_of(mode, res.is_sat)
    out["verdict"] = verdict
    if res.path:
        out["query_file"] = res.path
        print(f"query kept at {res.path}", file=sys.stderr)

    report = None
    if res.is_sat:
        report = _stage("witness", make_report, pipe.ses, pipe.ssa, res.valuation)
    _print_check(args, out, report, pipe)
    return _exit_code(verdict)


def _print_check(args, out: dict, report, pipe) -> None:
    if args.json:
        if report is not None:
            from .witness import _as_dict

            out["witness"] = _as_dict(report, pipe.ses)
        print(json.dumps(out, indent=2, sort_keys=True))
    else:
        print(out["verdict"])
        if report is not None:
            print(render(report, pipe.ses, "text"), end="")


# ---------------------------------------------------------------------------
# stats


def cmd_stats(args) -> int:
    with open(args.file, "r", encoding="utf-8") as fh:
        loc = sum(1 for line in fh if line.strip())
    t0 = time.time()
    pipe = run_pipeline(args.file, args.model, args.unwind, args.bitwidth,
                        not args.no_ranges, not args.lwsync_noncumulative)
    encode_seconds = time.time() - t0

    loops = [s for t in pipe.program.threads for s in walk_statements(t.body)
             if isinstance(s, While)]
    if not loops:
        unroll_desc = "none"
    else:
        unroll_desc = str(max(s.bound if s.bound is not None else args.unwind
                              for s in loops))

    by_addr = pipe.ses.by_address()
    tot_shared = sum(len(r) + len(w) for r, w in by_addr.values())
    same_addr = max((len(r) + len(w) for r, w in by_addr.values()), default=0)
    cs = pipe.encoding.cs
    name, cost = cs.most_costly()
    row = {
        "test": os.path.basename(args.file),
        "model": args.model,
        "loc": loc,
        "unroll": unroll_desc,
        "tot_addr": len(pipe.program.shared_decls),
        "tot_shared": tot_shared,
        "same_addr": same_addr,
        "all_constr": cs.total(),
        "most_costly": f"{name} ({cost})",
        "encode_seconds": round(encode_seconds, 3),
    }
    if args.solve:
        cfg = make_config(args.solver, args.timeout, args.keep_temps)
        t0 = time.time()
        res = _stage("solve", solve, pipe.query, cfg)
        row["solve_seconds"] = round(time.time() - t0, 3)
        row["verdict"] = _verdict_of(pipe.program.property.mode, res.is_sat)

    if args.json:
        print(json.dumps(row, indent=2, sort_keys=True))
    else:
        width = max(len(k) for k in row)
        for k, v in row.items():
            print(f"{k:<{width}}  {v}")
    return 0


# ---------------------------------------------------------------------------
# emit


def cmd_emit(args) -> int:
    need_encode = args.stage in ("constraints", "smt")
    pipe = run_pipeline(args.file, args.model, args.unwind, args.bitwidth,
                        not args.no_ranges, not args.lwsync_noncumulative,
                        encode=need_encode)
    stage = args.stage
    if stage == "ssa":
        _emit_ssa(args, pipe)
    elif stage == "ses":
        _emit_ses(args, pipe)
    elif stage == "model":
        _emit_model(args, pipe)
    elif stage == "constraints":
        _emit_constraints(args, pipe)
    elif stage == "smt":
        print(emit_smtlib(pipe.query), end="")
    else:
        raise WpomcError(f"unknown stage {stage!r}")
    return 0


def _guard_str(cube) -> str:
    if not cube:
        return "true"
    return " & ".join(("" if pol else "!") + name for name, pol in sorted(cube))


def _emit_ssa(args, pipe) -> None:
    ssa = pipe.ssa
    if args.json:
        doc = {
            "equations": [
                {"guard": _guard_str(eq.guard), "target": eq.target,
                 "rhs": sexpr(eq.rhs), "bool": eq.is_bool}
                for eq in ssa.equations
            ],
            "assumes": [
                {"guard": _guard_str(g), "formula": sexpr(f)}
                for g, f in ssa.assumes
            ],
            "property": sexpr(ssa.property_literal),
        }
        print(json.dumps(doc, indent=2, sort_keys=True))
        return
    for eq in ssa.equations:
        op = "<->" if eq.is_bool else "="
        print(f"[{_guard_str(eq.guard)}] {eq.target} {op} {sexpr(eq.rhs)}")
    for g, f in ssa.assumes:
        print(f"[{_guard_str(g)}] assume {sexpr(f)}")
    print(f"property: {sexpr(ssa.property_literal)}")


def _emit_ses(args, pipe) -> None:
    ses = pipe.ses
    rows = [
        {"id": e.eid, "tid": e.tid, "kind": e.kind, "addr": e.addr,
         "value": e.value, "fence": e.fence, "guard": _guard_str(e.guard)}
        for e in ses.events
    ]
    if args.json:
        doc = {
            "events": rows,
            "po": {str(t): lst for t, lst in enumerate(ses.po)},
            "po_br": sorted(ses.po_br),
            "dp": [{"src": d.src, "dst": d.dst, "kind": d.kind,
                    "isyncs": list(d.isyncs)} for d in ses.dp],
            "spawn": {str(t): i for t, i in sorted(ses.spawn.items())},
        }
        print(json.dumps(doc, indent=2, sort_keys=True))
        return
    print(f"{'id':>4} {'tid':>4} {'kind':>5} {'addr':>6} {'value':>10} {'guard'}")
    for r in rows:
        fence = f" fence={r['fence']}" if r["fence"] else ""
        print(f"{r['id']:>4} {r['tid']:>4} {r['kind']:>5} "
              f"{r['addr'] or '-':>6} {r['value'] or '-':>10} {r['guard']}{fence}")
    for t, lst in enumerate(ses.po):
        print(f"po t{t}: {' '.join('e%d' % e for e in lst)}")
    print("po_br:", " ".join(f"(e{a},e{b})" for a, b in sorted(ses.po_br)))
    print("dp:", " ".join(f"(e{d.src},e{d.dst},{d.kind})" for d in ses.dp) or "(empty)")
    print("spawn:", " ".join(f"t{t}@{i}" for t, i in sorted(ses.spawn.items())))


def _emit_model(args, pipe) -> None:
    a = pipe.arch
    doc = {
        "name": a.name,
        "ppo": dict(sorted(a.ppo_table.items())),
        "rfi_safe": a.rfi_safe,
        "rfe_safe": a.rfe_safe,
        "fences": {
            k: {"orders": sorted(f.orders), "a_cumulative": f.a_cumulative,
                "b_cumulative": f.b_cumulative, "via_ppo": f.via_ppo}
            for k, f in sorted(a.fences.items())
        },
    }
    if args.json:
        print(json.dumps(doc, indent=2, sort_keys=True))
        return
    print(f"model {doc['name']}")
    print(f"  rfi_safe={a.rfi_safe} rfe_safe={a.rfe_safe}")
    for d, rule in doc["ppo"].items():
        print(f"  ppo {d}: {rule}")
    for k, f in doc["fences"].items():
        print(f"  fence {k}: orders={','.join(f['orders']) or '-'} "
              f"A-cum={f['a_cumulative']} B-cum={f['b_cumulative']} via-ppo={f['via_ppo']}")


def _emit_constraints(args, pipe) -> None:
    cs = pipe.encoding.cs
    by_addr = pipe.ses.by_address()
    tot_shared = sum(len(r) + len(w) for r, w in by_addr.values())
    same = max((len(r) + len(w) for r, w in by_addr.values()), default=0)
    name, cost = cs.most_costly()
    header = {
        "tot. addr": len(by_addr),
        "tot. shared": tot_shared,
        "same addr": same,
        "all constr": cs.total(),
        "most costly": f"{name} ({cost})",
    }
    if args.json:
        doc = {
            "summary": header,
            "counts": cs.counts(),
            "sets": {n: [sexpr(f) for f in getattr(cs, "c_" + n)] for n in cs.SETS},
        }
        print(json.dumps(doc, indent=2, sort_keys=True))
        return
    for k, v in header.items():
        print(f"{k}: {v}")
    for n in cs.SETS:
        formulas = getattr(cs, "c_" + n)
        print(f"({n}) {len(formulas)} constraints")
        for f in formulas:
            print(f"  {sexpr(f)}")


# ---------------------------------------------------------------------------
# litmus suite runner


def cmd_litmus(args) -> int:
    directory = args.dir
    exp_path = args.expectations or os.path.join(directory, "expectations.csv")
    if not os.path.isfile(exp_path):
        raise WpomcError(f"expectations file not found: {exp_path}")
    expectations = {}
    provenance = {}
    with open(exp_path, newline="", encoding="utf-8") as fh:
        for row in csv.DictReader(fh):
            key = (row["test"], row["model"])
            expectations[key] = row["verdict"]
            provenance[key] = row.get("provenance", "")

    models = args.models.split(",") if args.models else list(MODEL_NAMES)
    files = sorted(
        f for f in os.listdir(directory)
        if f.endswith(".litmus") or f.endswith(".mc")
    )
    if not files:
        raise WpomcError(f"no tests found in {directory}")

    jobs = []
    for fname in files:
        for model in models:
            jobs.append((fname, model))

    missing = [(f, m) for f, m in jobs if (f, m) not in expectations]
    if missing:
        for f, m in missing:
            print(f"MISSING EXPECTATION {f} {m}", flush=True)
        return 2

    cfg_spec = args.solver
    results = []

    def run_one(job):
        fname, model = job
        path = os.path.join(directory, fname)
        t0 = time.time()
        try:
            pipe = run_pipeline(path, model, args.unwind, args.bitwidth,
                                not args.no_ranges, not args.lwsync_noncumulative)
            cfg = make_config(cfg_spec, args.timeout, args.keep_temps)
            res = solve(pipe.query, cfg)
            mode = pipe.program.property.mode
            verdict = "Allowed" if res.is_sat else "Forbidden"
            if mode == "assert":
                verdict = "Violated" if res.is_sat else "Holds"
            cross = None
            if args.cross_check:
                cross = oracle_verdict(pipe.unrolled, pipe.arch)
            return (fname, model, verdict, cross, time.time() - t0, None)
        except WpomcError as exc:
            return (fname, model, None, None, time.time() - t0, str(exc))

    if args.jobs > 1:
        with ThreadPoolExecutor(max_workers=args.jobs) as pool:
            results = list(pool.map(run_one, jobs))
    else:
        results = [run_one(j) for j in jobs]

    failures = 0
    total_time = 0.0
    for fname, model, verdict, cross, secs, err in results:
        total_time += secs
        expected = expectations[(fname, model)]
        tag = provenance[(fname, model)]
        if err is not None:
            print(f"ERROR  {fname:<28} {model:<6} {err}")
            failures += 1
            continue
        ok = verdict == expected
        cross_ok = cross is None or cross == verdict
        status = "ok" if ok and cross_ok else "FAIL"
        if not ok:
            status += f" (expected {expected})"
        if cross is not None and not cross_ok:
            status += f" (oracle says {cross})"
        if not (ok and cross_ok):
            failures += 1
        line = f"{status:<6} {fname:<28} {model:<6} {verdict:<10} [{tag}] {secs:.2f}s"
        print(line, flush=True)

    n = len(results)
    print(f"{n - failures}/{n} passed, mean {total_time / max(n, 1):.2f}s per test")
    return 0 if failures == 0 else 1


# ---------------------------------------------------------------------------
# argument parsing


def _add_common(sp) -> None:
    sp.add_argument("--model", default=DEFAULT_MODEL, choices=MODEL_NAMES)
    sp.add_argument("--unwind", type=int, default=DEFAULT_UNWIND,
                    help="default loop bound for un-annotated loops")
    sp.add_argument("--solver", default=None,
                    help="solver command (default: WPO_SOLVER or bundled wpo-solve)")
    sp.add_argument("--timeout", type=float, default=300.0,
                    help="solver timeout in seconds")
    sp.add_argument("--json", action="store_true")
    sp.add_argument("--keep-temps", action="store_true",
                    help="retain SMT-LIB2 query files")
    sp.add_argument("--bitwidth", type=int, default=32,
                    help="value range clamp in bits")
    sp.add_argument("--no-ranges", action="store_true",
                    help="do not emit value/clock range assertions")
    sp.add_argument("--lwsync-noncumulative", action="store_true",
                    help="drop lwsync A/B-cumulativity constraints")


def build_parser() -> argparse.ArgumentParser:
    ap = argparse.ArgumentParser(
        prog="wpomc",
        description="bounded model checker for concurrent programs under weak memory",
    )
    sub = ap.add_subparsers(dest="command", required=True)

    check = sub.add_parser("check", help="check one litmus test or MiniC program")
    check.add_argument("file")
    check.add_argument("--oracle", action="store_true",
                       help="use the enumerative oracle instead of the solver")
    _add_common(check)
    check.set_defaults(fn=cmd_check)

    litmus = sub.add_parser("litmus", help="run a corpus against expectations")
    litmus.add_argument("dir")
    litmus.add_argument("--expectations", default=None)
    litmus.add_argument("--models", default=None,
                        help="comma-separated subset of models")
    litmus.add_argument("--cross-check", action="store_true",
                        help="also run the enumerative oracle on every test")
    litmus.add_argument("--jobs", type=int, default=1)
    _add_common(litmus)
    litmus.set_defaults(fn=cmd_litmus)

    stats = sub.add_parser("stats", help="encoding statistics for one input")
    stats.add_argument("file")
    stats.add_argument("--solve", action="store_true")
    _add_common(stats)
    stats.set_defaults(fn=cmd_stats)

    emit = sub.add_parser("emit", help="dump an intermediate stage")
    emit.add_argument("file")
    emit.add_argument("--stage", required=True,
                      choices=("ssa", "ses", "model", "constraints", "smt"))
    _add_common(emit)
    emit.set_defaults(fn=cmd_emit)
    return ap


def main(argv=None) -> int:
    ap = build_parser()
    args = ap.parse_args(argv)
    try:
        return args.fn(args)
    except WpomcError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2


if __name__ == "__main__":
    sys.exit(main())
