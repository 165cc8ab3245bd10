"""Ground-truth checkers: brute-force axiomatic enumeration and an SC
interleaving executor.

The axiomatic oracle enumerates guard valuations, read-from maps and
per-address write serialisations, propagates values through the SSA equations
along read-from (discarding causally cyclic assignments up front), filters by
the validity axioms, and reports whether any valid execution reaches the
property.  It shares the architecture tables with the encoder, so any
disagreement points at an encoding bug rather than a model divergence.  Both
oracles refuse to run past their enumeration caps: a silently truncated
oracle would be worse than none.
"""

from __future__ import annotations

import itertools
from dataclasses import dataclass

from .arch import Architecture, pair_keep_condition
from .errors import EnumerationCapError, WpomcError
from .formula import (
    Add,
    And,
    BoolConst,
    BoolVar,
    Cmp,
    Iff,
    Implies,
    IntConst,
    IntVar,
    Mul,
    Not,
    Or,
    Sub,
)
from .program import (
    Assign,
    Assume,
    BinOp,
    Fence,
    FinalReg,
    FinalShared,
    If,
    Lit,
    Load,
    Program,
    Reg,
    Store,
    UnOp,
    While,
    count_shared_accesses,
    is_loop_free,
)
from .ssa import Ses, SsaFormula, build_ssa, compute_deps

ORACLE_EVENT_CAP = 14
INTERLEAVE_CAP = 10

VALID = "valid"
V_UNIPROC = "violates-uniproc"
V_THIN = "violates-thin"
V_CONSENSUS = "violates-consensus"


@dataclass
class ConcreteExecution:
    """Concretised execution: guard-true events with integer values plus the
    communication relations."""

    present: list  # eids with true guards, ascending
    values: dict  # eid -> int value (memory events)
    rf: dict  # read eid -> write eid
    ws: dict  # addr -> list of write eids in serialisation order
    guards: dict  # branch literal -> bool

    def fr(self) -> list:
        out = []
        for r, w_src in self.rf.items():
            for addr, order in self.ws.items():
                if w_src in order:
                    later = order[order.index(w_src) + 1:]
                    out.extend((r, w) for w in later)
        return out


def _acyclic(nodes, edges) -> bool:
    succ = {n: [] for n in nodes}
    for a, b in edges:
        if a in succ and b in succ:
            succ[a].append(b)
    state = {n: 0 for n in nodes}  # 0 new, 1 open, 2 done

    for root in nodes:
        if state[root]:
            continue
        stack = [(root, iter(succ[root]))]
        state[root] = 1
        while stack:
            node, it = stack[-1]
            advanced = False
            for nxt in it:
                if state[nxt] == 1:
                    return False
                if state[nxt] == 0:
                    state[nxt] = 1
                    stack.append((nxt, iter(succ[nxt])))
                    advanced = True
                    break
            if not advanced:
                state[node] = 2
                stack.pop()
    return True


# ---------------------------------------------------------------------------
# Axiom checks


def check_axioms(exe: ConcreteExecution, a: Architecture, ses: Ses) -> str:
    """First violated axiom of uniproc / thin / consensus, or "valid"."""
    present = set(exe.present)
    ev = ses.events

    def po_loc_edges():
        out = []
        for e1 in exe.present:
            for e2 in exe.present:
                if e1 == e2 or not ev[e1].is_mem() or not ev[e2].is_mem():
                    continue
                if ev[e1].addr == ev[e2].addr and ses.po_before(e1, e2):
                    out.append((e1, e2))
        return out

    ws_edges = [
        (order[i], order[j])
        for order in exe.ws.values()
        for i in range(len(order))
        for j in range(i + 1, len(order))
    ]
    rf_edges = [(w, r) for r, w in exe.rf.items()]
    fr_edges = exe.fr()

    if not _acyclic(present, ws_edges + rf_edges + fr_edges + po_loc_edges()):
        return V_UNIPROC

    dp_edges = [(d.src, d.dst) for d in ses.dp if d.src in present and d.dst in present]
    if not _acyclic(present, rf_edges + dp_edges):
        return V_THIN

    ghb = list(ws_edges) + list(fr_edges)
    for r, w in exe.rf.items():
        external = ev[w].tid != ev[r].tid
        if (external and a.rfe_safe) or (not external and a.rfi_safe):
            ghb.append((w, r))
    ghb.extend(_ppo_edges(exe, a, ses))
    ghb.extend(_fence_edges(exe, a, ses))
    if not _acyclic(present, ghb):
        return V_CONSENSUS
    return VALID


def _dep_info(ses: Ses, e1: int, e2: int):
    kinds = set()
    isyncs = []
    for d in ses.dp:
        if d.src == e1 and d.dst == e2:
            kinds.add(d.kind)
            isyncs.extend(d.isyncs)
    return frozenset(kinds), isyncs


def _ppo_edges(exe: ConcreteExecution, a: Architecture, ses: Ses) -> list:
    present = set(exe.present)
    out = []
    for lst in ses.po:
        mems = [eid for eid in lst if eid in present and ses.events[eid].is_mem()]
        for i, e1 in enumerate(mems):
            for e2 in mems[i + 1:]:
                ev1, ev2 = ses.events[e1], ses.events[e2]
                kinds, isyncs = _dep_info(ses, e1, e2)
                verdict = pair_keep_condition(
                    a, ev1.kind, ev2.kind,
                    ev1.addr is not None and ev1.addr == ev2.addr,
                    kinds, bool(isyncs),
                )
                if verdict == "yes":
                    out.append((e1, e2))
                elif verdict == "isync" and any(i in present for i in isyncs):
                    out.append((e1, e2))
    return out


def _fence_edges(exe: ConcreteExecution, a: Architecture, ses: Ses) -> list:
    """Composed fence orderings between memory events (the fence node is
    collapsed): base pairs across the fence plus A/B-cumulativity extensions,
    filtered by the fence's direction table."""
    present = set(exe.present)
    ev = ses.events
    out = []
    cum = not a.rfe_safe
    rf_of_write: dict = {}
    for r, w in exe.rf.items():
        rf_of_write.setdefault(w, []).append(r)

    for lst in ses.po:
        for s_eid in lst:
            s = ev[s_eid]
            if s.kind != "F" or s_eid not in present:
                continue
            spec = a.fence(s.fence)
            if spec.via_ppo:
                continue
            before = [e for e in lst if e in present and ev[e].is_mem()
                      and ses.po_before(e, s_eid)]
            after = [e for e in lst if e in present and ev[e].is_mem()
                     and ses.po_before(s_eid, e)]
            sources = list(before)
            targets = list(after)
            if cum and spec.a_cumulative:
                for r in before:
                    if ev[r].kind == "R" and r in exe.rf:
                        w = exe.rf[r]
                        if ev[w].tid != ev[r].tid:
                            sources.append(w)
            if cum and spec.b_cumulative:
                for w in after:
                    if ev[w].kind == "W":
                        for r in rf_of_write.get(w, []):
                            if ev[r].tid != ev[w].tid:
                                targets.append(r)
            for e1 in sources:
                for e2 in targets:
                    if e1 != e2 and ev[e1].kind + ev[e2].kind in spec.orders:
                        out.append((e1, e2))
    return out


# ---------------------------------------------------------------------------
# Enumerative verdict


def oracle_verdict(p: Program, a: Architecture, cap: int = ORACLE_EVENT_CAP) -> str:
    """Allowed/Forbidden (exists-mode) or Violated/Holds (assert-mode) by
    explicit enumeration of guard valuations, rf maps and ws orders."""
    if not is_loop_free(p):
        raise WpomcError("oracle requires a loop-free (unrolled) program")
    ssa, ses = build_ssa(p)
    compute_deps(ses, ssa)
    if len(ses.events) > cap:
        raise EnumerationCapError(
            f"{len(ses.events)} events exceed the oracle cap of {cap}")

    hit = False
    for exe, env in _enumerate(ssa, ses):
        if check_axioms(exe, a, ses) != VALID:
            continue
        if _property_holds(p, ssa, ses, exe, env):
            hit = True
            break
    if p.property.mode == "exists":
        return "Allowed" if hit else "Forbidden"
    return "Violated" if hit else "Holds"


def _enumerate(ssa: SsaFormula, ses: Ses):
    lits = ssa.branch_literals
    reads = [e for e in ses.events if e.kind == "R"]
    by_addr = ses.by_address()

    for bits in itertools.product((False, True), repeat=len(lits)):
        guards = dict(zip(lits, bits))

        def gtrue(cube):
            return all(guards[n] == pol for n, pol in cube)

        present = [e.eid for e in ses.events if gtrue(e.guard)]
        pset = set(present)
        t_reads = [r for r in reads if r.eid in pset]

        cand_lists = []
        for r in t_reads:
            cands = [w.eid for w in by_addr[r.addr][1]
                     if w.eid in pset and not ses.po_before(r.eid, w.eid)]
            cand_lists.append(cands)

        for choice in itertools.product(*cand_lists):
            rf = {r.eid: w for r, w in zip(t_reads, choice)}
            env = _propagate(ssa, ses, guards, rf, pset)
            if env is None:
                continue
            addr_writes = {
                addr: [w.eid for w in ws if w.eid in pset]
                for addr, (_, ws) in by_addr.items()
            }
            orders = [list(itertools.permutations(ws)) for ws in addr_writes.values()]
            for combo in itertools.product(*orders):
                ws_map = {addr: list(perm) for addr, perm in zip(addr_writes, combo)}
                values = {e: env[ses.events[e].value]
                          for e in present if ses.events[e].is_mem()}
                yield ConcreteExecution(present, values, rf, ws_map, guards), env


def _propagate(ssa: SsaFormula, ses: Ses, guards: dict, rf: dict, present: set):
    """Evaluate all active SSA equations; returns the symbol env, or None if
    the rf choice is causally cyclic or contradicts guards/assumptions."""
    # thin pre-filter: rf union dp must be acyclic for propagation to terminate
    edges = [(w, r) for r, w in rf.items()]
    edges += [(d.src, d.dst) for d in ses.dp if d.src in present and d.dst in present]
    if not _acyclic(present, edges):
        return None

    env: dict = {}
    active = [eq for eq in ssa.equations if _cube_true(eq.guard, guards)]
    checks = []  # boolean branch definitions to validate
    pending = []
    for eq in active:
        if eq.is_bool:
            checks.append(eq)
        else:
            pending.append(eq)

    read_pending = {r: w for r, w in rf.items()}

    progress = True
    while progress:
        progress = False
        for r, w in list(read_pending.items()):
            wsym = ses.events[w].value
            if wsym in env:
                env[ses.events[r].value] = env[wsym]
                del read_pending[r]
                progress = True
        remaining = []
        for eq in pending:
            v = _eval_term(eq.rhs, env)
            if v is None:
                remaining.append(eq)
            else:
                env[eq.target] = v
                progress = True
        pending = remaining

    if pending or read_pending:
        raise WpomcError("value propagation stalled on an acyclic assignment")

    for eq in checks:
        v = _eval_bool(eq.rhs, env, guards)
        if v is None or v != guards[eq.target]:
            return None
    for g, f in ssa.assumes:
        if _cube_true(g, guards):
            v = _eval_bool(f, env, guards)
            if v is None or not v:
                return None
    return env


def _cube_true(cube, guards) -> bool:
    return all(guards[n] == pol for n, pol in cube)


def _eval_term(t, env):
    if isinstance(t, IntConst):
        return t.value
    if isinstance(t, IntVar):
        return env.get(t.name)
    if isinstance(t, Add):
        vals = [_eval_term(x, env) for x in t.args]
        if any(v is None for v in vals):
            return None
        return sum(vals)
    if isinstance(t, Sub):
        a, b = _eval_term(t.lhs, env), _eval_term(t.rhs, env)
        if a is None or b is None:
            return None
        return a - b
    if isinstance(t, Mul):
        v = _eval_term(t.term, env)
        return None if v is None else t.coef * v
    raise WpomcError(f"cannot evaluate term {t!r}")


_OPS = {"=": lambda a, b: a == b, "<": lambda a, b: a < b, "<=": lambda a, b: a <= b,
        ">": lambda a, b: a > b, ">=": lambda a, b: a >= b}


def _eval_bool(f, env, guards):
    if isinstance(f, BoolConst):
        return f.value
    if isinstance(f, BoolVar):
        return guards.get(f.name)
    if isinstance(f, Not):
        v = _eval_bool(f.arg, env, guards)
        return None if v is None else not v
    if isinstance(f, And):
        vals = [_eval_bool(x, env, guards) for x in f.args]
        if any(v is None for v in vals):
            return None
        return all(vals)
    if isinstance(f, Or):
        vals = [_eval_bool(x, env, guards) for x in f.args]
        if any(v is None for v in vals):
            return None
        return any(vals)
    if isinstance(f, Implies):
        a = _eval_bool(f.lhs, env, guards)
        b = _eval_bool(f.rhs, env, guards)
        if a is None or b is None:
            return None
        return (not a) or b
    if isinstance(f, Iff):
        a = _eval_bool(f.lhs, env, guards)
        b = _eval_bool(f.rhs, env, guards)
        if a is None or b is None:
            return None
        return a == b
    if isinstance(f, Cmp):
        a, b = _eval_term(f.lhs, env), _eval_term(f.rhs, env)
        if a is None or b is None:
            return None
        return _OPS[f.op](a, b)
    raise WpomcError(f"cannot evaluate {f!r}")


def _property_holds(p: Program, ssa: SsaFormula, ses: Ses, exe: ConcreteExecution, env: dict) -> bool:
    """True when the execution reaches the property (exists-mode: condition
    satisfied; assert-mode: assertion violated)."""

    def final_shared(addr):
        order = [w for w in exe.ws.get(addr, [])]
        if not order:
            raise WpomcError(f"no writes for {addr}")
        return exe.values[order[-1]]

    def final_reg(thread_name, reg):
        t = p.thread_by_name(thread_name)
        sym = ssa.final_regs.get(t.tid, {}).get(reg)
        if sym is None:
            return 0
        return env.get(sym, 0)

    def ev(e):
        if isinstance(e, Lit):
            return e.value
        if isinstance(e, FinalReg):
            return final_reg(e.thread, e.reg)
        if isinstance(e, FinalShared):
            return final_shared(e.addr)
        if isinstance(e, UnOp):
            v = ev(e.arg)
            return (0 if v else 1) if e.op == "!" else -v
        if isinstance(e, BinOp):
            a, b = ev(e.lhs), ev(e.rhs)
            return {
                "+": a + b, "-": a - b, "*": a * b,
                "==": int(a == b), "!=": int(a != b),
                "<": int(a < b), "<=": int(a <= b),
                ">": int(a > b), ">=": int(a >= b),
                "&&": int(bool(a) and bool(b)), "||": int(bool(a) or bool(b)),
            }[e.op]
        raise WpomcError(f"bad property expr {e!r}")

    sat = bool(ev(p.property.expr))
    return sat if p.property.mode == "exists" else not sat


# ---------------------------------------------------------------------------
# SC interleaving executor (second, independent ground truth)


def sc_interleave_verdict(p: Program, cap: int = INTERLEAVE_CAP) -> str:
    if not is_loop_free(p):
        raise WpomcError("interleaver requires a loop-free (unrolled) program")
    n = count_shared_accesses(p)
    if n > cap:
        raise EnumerationCapError(
            f"{n} shared accesses exceed the interleaving cap of {cap}")

    codes = [_flatten(t.body) for t in p.threads]
    n_threads = len(codes)
    finals: set = set()
    seen: set = set()

    def run_local(tid, pc, regs, mem):
        """Advance through register-local ops; stop before a shared access."""
        code = codes[tid]
        regs = dict(regs)
        while pc < len(code):
            op = code[pc]
            k = op[0]
            if k == "assign":
                regs[op[1]] = _eval_prog_expr(op[2], regs)
                pc += 1
            elif k == "bz":
                pc = op[2] if not _eval_prog_expr(op[1], regs) else pc + 1
            elif k == "jmp":
                pc = op[1]
            elif k == "fence":
                pc += 1
            elif k == "assume":
                if not _eval_prog_expr(op[1], regs):
                    return None  # path excluded by the unwinding assumption
                pc += 1
            else:
                break  # load/store: interleaving point
        return pc, regs

    # main thread (tid 0) runs its initialisation writes before the workers
    # start, mirroring the spawn ordering
    def ready(pcs, tid):
        if tid == 0:
            return True
        return pcs[0] >= len(codes[0])

    def explore(state_pcs, state_regs, mem):
        key = (state_pcs, tuple(tuple(sorted(r.items())) for r in state_regs),
               tuple(sorted(mem.items())))
        if key in seen:
            return
        seen.add(key)
        done = True
        for tid in range(n_threads):
            pc = state_pcs[tid]
            if pc >= len(codes[tid]):
                continue
            done = False
            if not ready(state_pcs, tid):
                continue
            adv = run_local(tid, pc, state_regs[tid], mem)
            if adv is None:
                continue
            pc2, regs2 = adv
            if pc2 >= len(codes[tid]):
                pcs2 = state_pcs[:tid] + (pc2,) + state_pcs[tid + 1:]
                regsl = list(state_regs)
                regsl[tid] = regs2
                explore(pcs2, tuple(regsl), mem)
                continue
            op = codes[tid][pc2]
            if op[0] == "load":
                regs3 = dict(regs2)
                regs3[op[1]] = mem.get(op[2], 0)
                pcs2 = state_pcs[:tid] + (pc2 + 1,) + state_pcs[tid + 1:]
                regsl = list(state_regs)
                regsl[tid] = regs3
                explore(pcs2, tuple(regsl), mem)
            elif op[0] == "store":
                mem2 = dict(mem)
                mem2[op[1]] = _eval_prog_expr(op[2], regs2)
                pcs2 = state_pcs[:tid] + (pc2 + 1,) + state_pcs[tid + 1:]
                regsl = list(state_regs)
                regsl[tid] = regs2
                explore(pcs2, tuple(regsl), mem2)
        if done:
            regmaps = tuple(tuple(sorted(r.items())) for r in state_regs)
            finals.add((regmaps, tuple(sorted(mem.items()))))

    import sys
    old = sys.getrecursionlimit()
    sys.setrecursionlimit(100000)
    try:
        explore(tuple(0 for _ in range(n_threads)),
                tuple({} for _ in range(n_threads)), {})
    finally:
        sys.setrecursionlimit(old)

    hit = False
    for regmaps, memitems in finals:
        mem = dict(memitems)
        regs = [dict(r) for r in regmaps]

        def ev(e):
            if isinstance(e, Lit):
                return e.value
            if isinstance(e, FinalReg):
                t = p.thread_by_name(e.thread)
                return regs[t.tid].get(e.reg, 0)
            if isinstance(e, FinalShared):
                return mem.get(e.addr, 0)
            if isinstance(e, UnOp):
                v = ev(e.arg)
                return (0 if v else 1) if e.op == "!" else -v
            if isinstance(e, BinOp):
                a, b = ev(e.lhs), ev(e.rhs)
                return {
                    "+": a + b, "-": a - b, "*": a * b,
                    "==": int(a == b), "!=": int(a != b),
                    "<": int(a < b), "<=": int(a <= b),
                    ">": int(a > b), ">=": int(a >= b),
                    "&&": int(bool(a) and bool(b)), "||": int(bool(a) or bool(b)),
                }[e.op]
            raise WpomcError(f"bad property expr {e!r}")

        if bool(ev(p.property.expr)):
            hit = True
            break

    if p.property.mode == "exists":
        return "Allowed" if hit else "Forbidden"
    return "Violated" if hit else "Holds"


def _flatten(body) -> list:
    code: list = []

    def emit(stmts):
        for s in stmts:
            if isinstance(s, Assign):
                code.append(("assign", s.reg, s.expr))
            elif isinstance(s, Load):
                code.append(("load", s.reg, s.addr))
            elif isinstance(s, Store):
                code.append(("store", s.addr, s.expr))
            elif isinstance(s, Fence):
                code.append(("fence",))
            elif isinstance(s, Assume):
                code.append(("assume", s.cond))
            elif isinstance(s, If):
                hole = len(code)
                code.append(None)  # bz placeholder
                emit(s.then)
                if s.els:
                    hole2 = len(code)
                    code.append(None)  # jmp placeholder
                    code[hole] = ("bz", s.cond, len(code))
                    emit(s.els)
                    code[hole2] = ("jmp", len(code))
                else:
                    code[hole] = ("bz", s.cond, len(code))
            elif isinstance(s, While):
                raise WpomcError("loops must be unrolled first")
            else:
                raise WpomcError(f"unknown statement {s!r}")

    emit(body)
    return code


def _eval_prog_expr(e, regs) -> int:
    if isinstance(e, Lit):
        return e.value
    if isinstance(e, Reg):
        return regs.get(e.name, 0)
    if isinstance(e, UnOp):
        v = _eval_prog_expr(e.arg, regs)
        return (0 if v else 1) if e.op == "!" else -v
    if isinstance(e, BinOp):
        a = _eval_prog_expr(e.lhs, regs)
        b = _eval_prog_expr(e.rhs, regs)
        return {
            "+": a + b, "-": a - b, "*": a * b,
            "==": int(a == b), "!=": int(a != b),
            "<": int(a < b), "<=": int(a <= b),
            ">": int(a > b), ">=": int(a >= b),
            "&&": int(bool(a) and bool(b)), "||": int(bool(a) or bool(b)),
        }[e.op]
    raise WpomcError(f"bad expression {e!r}")
