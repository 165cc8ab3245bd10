"""Loop unrolling, guarded SSA and the symbolic event structure.

Each shared-memory access gets a fresh value symbol (breaking cross-iteration
causality on purpose: the partial-order constraints restore precision), each
register follows per-thread SSA indexing with merge equations at branch join
points, and every event carries a guard.  Guards are cubes (conjunctions of
branch literals), which keeps the preserved-program-order walk's entailment
checks exact.
"""

from __future__ import annotations

from dataclasses import dataclass, field

from .errors import EncodingError, SsaError
from .formula import (
    Add,
    Cmp,
    Formula,
    Guard,
    IntConst,
    IntVar,
    Mul,
    Sub,
    TRUE_GUARD,
    fand,
    fnot,
    for_,
    guard_formula,
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
    Property,
    Reg,
    Store,
    Thread,
    UnOp,
    While,
)

# ---------------------------------------------------------------------------
# Domain types


@dataclass(frozen=True)
class SymbolicEvent:
    eid: int
    tid: int
    kind: str  # "R" | "W" | "F"
    addr: str | None  # None for fences
    value: str | None  # value symbol, None for fences
    fence: str | None  # fence kind, None for accesses
    guard: Guard

    def is_mem(self) -> bool:
        return self.kind in ("R", "W")

    def label(self) -> str:
        return f"e{self.eid}"


@dataclass(frozen=True)
class DepPair:
    src: int  # read event id
    dst: int  # event id, same thread, po-after src
    kind: str  # "data" | "control"
    isyncs: tuple = ()  # isync fence eids interposed between branch and dst


@dataclass
class Ses:
    events: list
    po: list  # po[tid] = ordered list of event ids
    po_br: list  # DAG edges (eid, eid) within threads
    dp: list  # DepPair, filled by compute_deps
    spawn: dict  # tid -> spawn index in main's po

    def event(self, eid: int) -> SymbolicEvent:
        return self.events[eid]

    def mem_events(self):
        return [e for e in self.events if e.is_mem()]

    def by_address(self):
        table: dict = {}
        for e in self.events:
            if e.is_mem():
                table.setdefault(e.addr, ([], []))
                table[e.addr][0 if e.kind == "R" else 1].append(e)
        return table  # addr -> (reads, writes)

    def po_index(self, eid: int) -> int:
        return self.po[self.events[eid].tid].index(eid)

    def po_before(self, a: int, b: int) -> bool:
        """Program order, including the spawn ordering: events of the main
        thread precede every event of a thread spawned after them.  Workers
        never precede main events (there is no join)."""
        ea, eb = self.events[a], self.events[b]
        if ea.tid == eb.tid:
            lst = self.po[ea.tid]
            return lst.index(a) < lst.index(b)
        if ea.tid == 0 and eb.tid != 0:
            return self.po[0].index(a) < self.spawn.get(eb.tid, 0)
        return False


@dataclass
class SsaEquation:
    guard: Guard
    target: str
    rhs: Formula  # term (is_bool False) or formula (is_bool True)
    is_bool: bool = False

    def formula(self) -> Formula:
        from .formula import Iff, fimplies

        body = Iff(targ_ref(self), self.rhs) if self.is_bool else Cmp("=", IntVar(self.target), self.rhs)
        return fimplies(guard_formula(self.guard), body)


def targ_ref(eq: SsaEquation):
    from .formula import BoolVar

    return BoolVar(eq.target)


@dataclass
class SsaFormula:
    equations: list
    assumes: list  # (Guard, Formula) unwinding assumptions
    property_literal: Formula
    final_regs: dict  # tid -> {reg -> final symbol}
    final_shared_addrs: list  # addresses the property observes
    branch_literals: list
    sources: dict = field(default_factory=dict)  # symbol -> frozenset of read eids
    branch_records: list = field(default_factory=list)  # internal, for compute_deps

    def conjuncts(self) -> list:
        from .formula import fimplies

        out = [eq.formula() for eq in self.equations]
        out.extend(fimplies(guard_formula(g), f) for g, f in self.assumes)
        return out


@dataclass
class _BranchRecord:
    tid: int
    literal: str
    entry_index: int  # po position where the branch is resolved
    cond_sources: frozenset  # read eids feeding the condition


# ---------------------------------------------------------------------------
# Loop unrolling


def unroll(p: Program, default_bound: int) -> Program:
    """Replace every loop by `bound` guarded body copies plus an unwinding
    assumption that blocks executions needing more iterations."""

    def tx(stmts):
        out = []
        for s in stmts:
            if isinstance(s, While):
                bound = s.bound if s.bound is not None else default_bound
                body = tx(s.body)
                chain = [Assume(UnOp("!", s.cond))]
                for _ in range(bound):
                    chain = [If(s.cond, body + chain, [])]
                out.extend(chain)
            elif isinstance(s, If):
                out.append(If(s.cond, tx(s.then), tx(s.els)))
            else:
                out.append(s)
        return out

    threads = [Thread(t.tid, t.name, tx(t.body), list(t.registers)) for t in p.threads]
    return Program(p.name, list(p.shared_decls), threads, p.property)


# ---------------------------------------------------------------------------
# SSA + SES construction


class _Builder:
    def __init__(self, program: Program):
        self.program = program
        self.shared = {a for a, _ in program.shared_decls}
        self.addr_counter = {a: 0 for a in self.shared}
        self.events: list = []
        self.po: list = [[] for _ in program.threads]
        self.po_br: list = []
        self.equations: list = []
        self.assumes: list = []
        self.branch_literals: list = []
        self.branch_records: list = []
        self.sources: dict = {}
        self.nbranch = 0
        self._reg_init_done: set = set()

    # -- symbols

    def fresh_shared(self, addr: str) -> str:
        k = self.addr_counter[addr]
        self.addr_counter[addr] += 1
        return f"{addr}_{k}"

    def reg_symbol(self, tid: int, reg: str, idx: int) -> str:
        return f"t{tid}_{reg}_{idx}"

    # -- events

    def add_event(self, tid, kind, addr, value, fence, guard, frontier):
        eid = len(self.events)
        ev = SymbolicEvent(eid, tid, kind, addr, value, fence, guard)
        self.events.append(ev)
        self.po[tid].append(eid)
        for prev in frontier:
            self.po_br.append((prev, eid))
        return eid

    # -- expression translation (terms are over register symbols)

    def term(self, e, tid, regs) -> Formula:
        if isinstance(e, Lit):
            return IntConst(e.value)
        if isinstance(e, Reg):
            return IntVar(self.use_reg(tid, e.name, regs))
        if isinstance(e, UnOp):
            if e.op == "-":
                return Mul(-1, self.term(e.arg, tid, regs))
            raise EncodingError("boolean operator in arithmetic context")
        if isinstance(e, BinOp):
            if e.op == "+":
                return Add((self.term(e.lhs, tid, regs), self.term(e.rhs, tid, regs)))
            if e.op == "-":
                return Sub(self.term(e.lhs, tid, regs), self.term(e.rhs, tid, regs))
            if e.op == "*":
                lhs, rhs = e.lhs, e.rhs
                if isinstance(lhs, Lit):
                    return Mul(lhs.value, self.term(rhs, tid, regs))
                if isinstance(rhs, Lit):
                    return Mul(rhs.value, self.term(lhs, tid, regs))
                raise EncodingError("nonlinear multiplication is not supported")
            raise EncodingError("boolean operator in arithmetic context")
        raise EncodingError(f"cannot translate expression {e!r}")

    def bool_expr(self, e, tid, regs) -> Formula:
        if isinstance(e, UnOp) and e.op == "!":
            return fnot(self.bool_expr(e.arg, tid, regs))
        if isinstance(e, BinOp):
            if e.op == "&&":
                return fand(self.bool_expr(e.lhs, tid, regs), self.bool_expr(e.rhs, tid, regs))
            if e.op == "||":
                return for_(self.bool_expr(e.lhs, tid, regs), self.bool_expr(e.rhs, tid, regs))
            if e.op in ("==", "!=", "<", "<=", ">", ">="):
                lhs = self.term(e.lhs, tid, regs)
                rhs = self.term(e.rhs, tid, regs)
                if e.op == "!=":
                    return fnot(Cmp("=", lhs, rhs))
                op = "=" if e.op == "==" else e.op
                return Cmp(op, lhs, rhs)
        # C truthiness: nonzero means true
        return fnot(Cmp("=", self.term(e, tid, regs), IntConst(0)))

    def expr_sources(self, e, tid, regs) -> frozenset:
        if isinstance(e, Reg):
            return self.sources.get(self.use_reg(tid, e.name, regs), frozenset())
        if isinstance(e, UnOp):
            return self.expr_sources(e.arg, tid, regs)
        if isinstance(e, BinOp):
            return self.expr_sources(e.lhs, tid, regs) | self.expr_sources(e.rhs, tid, regs)
        return frozenset()

    # -- registers

    def use_reg(self, tid, reg, regs) -> str:
        if reg not in regs:
            # first use before any assignment: registers start at 0
            regs[reg] = 0
            sym = self.reg_symbol(tid, reg, 0)
            if sym not in self._reg_init_done:
                self._reg_init_done.add(sym)
                self.equations.append(SsaEquation(TRUE_GUARD, sym, IntConst(0)))
                self.sources[sym] = frozenset()
        return self.reg_symbol(tid, reg, regs[reg])

    def assign_reg(self, tid, reg, regs) -> str:
        regs[reg] = regs.get(reg, -1) + 1
        if regs[reg] == 0:
            regs[reg] = 1  # index 0 is reserved for the initial value
        return self.reg_symbol(tid, reg, regs[reg])

    # -- statement walk

    def walk(self, tid, stmts, guard, regs, frontier):
        for s in stmts:
            if isinstance(s, Load):
                vsym = self.fresh_shared(s.addr)
                if s.addr not in self.shared:
                    raise SsaError(f"undeclared address {s.addr!r}")
                eid = self.add_event(tid, "R", s.addr, vsym, None, guard, frontier)
                frontier = [eid]
                tgt = self.assign_reg(tid, s.reg, regs)
                self.equations.append(SsaEquation(guard, tgt, IntVar(vsym)))
                self.sources[vsym] = frozenset([eid])
                self.sources[tgt] = frozenset([eid])
            elif isinstance(s, Store):
                if s.addr not in self.shared:
                    raise SsaError(f"undeclared address {s.addr!r}")
                rhs = self.term(s.expr, tid, regs)
                src = self.expr_sources(s.expr, tid, regs)
                vsym = self.fresh_shared(s.addr)
                eid = self.add_event(tid, "W", s.addr, vsym, None, guard, frontier)
                frontier = [eid]
                self.equations.append(SsaEquation(guard, vsym, rhs))
                self.sources[vsym] = src
            elif isinstance(s, Assign):
                rhs = self.term(s.expr, tid, regs)
                src = self.expr_sources(s.expr, tid, regs)
                tgt = self.assign_reg(tid, s.reg, regs)
                self.equations.append(SsaEquation(guard, tgt, rhs))
                self.sources[tgt] = src
            elif isinstance(s, Fence):
                eid = self.add_event(tid, "F", None, None, s.kind, guard, frontier)
                frontier = [eid]
            elif isinstance(s, Assume):
                self.assumes.append((guard, self.bool_expr(s.cond, tid, regs)))
            elif isinstance(s, If):
                frontier = self.walk_if(tid, s, guard, regs, frontier)
            elif isinstance(s, While):
                raise SsaError("loops must be unrolled before SSA construction")
            else:
                raise SsaError(f"unknown statement {s!r}")
        return frontier

    def walk_if(self, tid, s: If, guard, regs, frontier):
        lit = f"br{self.nbranch}"
        self.nbranch += 1
        self.branch_literals.append(lit)
        cond = self.bool_expr(s.cond, tid, regs)
        self.equations.append(SsaEquation(guard, lit, cond, is_bool=True))
        self.branch_records.append(
            _BranchRecord(tid, lit, len(self.po[tid]), self.expr_sources(s.cond, tid, regs))
        )

        g_then = frozenset(guard | {(lit, True)})
        g_else = frozenset(guard | {(lit, False)})
        regs_then = dict(regs)
        regs_else = dict(regs)
        fr_then = self.walk(tid, s.then, g_then, regs_then, frontier)
        fr_else = self.walk(tid, s.els, g_else, regs_else, frontier)

        # merge register versions that diverged; equal indices need no merge
        # because the branch guards are disjoint and the shared index carries
        # one guarded equation per branch
        for reg in sorted(set(regs_then) | set(regs_else)):
            it, ie = regs_then.get(reg, 0), regs_else.get(reg, 0)
            if it == ie:
                regs[reg] = it
                continue
            sym_t = self.reg_symbol(tid, reg, it) if it else self._init_reg(tid, reg, regs_then)
            sym_e = self.reg_symbol(tid, reg, ie) if ie else self._init_reg(tid, reg, regs_else)
            regs[reg] = max(it, ie, regs.get(reg, 0))
            merged = self.assign_reg(tid, reg, regs)
            self.equations.append(SsaEquation(g_then, merged, IntVar(sym_t)))
            self.equations.append(SsaEquation(g_else, merged, IntVar(sym_e)))
            self.sources[merged] = self.sources.get(sym_t, frozenset()) | self.sources.get(sym_e, frozenset())

        # join: events after the if follow the last event of both branches (or
        # the entry frontier for an empty branch)
        joined = []
        for f in fr_then + fr_else:
            if f not in joined:
                joined.append(f)
        return joined

    def _init_reg(self, tid, reg, regs) -> str:
        # reference to a register never assigned on this path
        return self.use_reg(tid, reg, regs)


def build_ssa(p: Program) -> tuple:
    """Build the guarded-SSA formula and the symbolic event structure."""
    b = _Builder(p)
    final_regs = {}
    for t in p.threads:
        regs: dict = {}
        b.walk(t.tid, t.body, TRUE_GUARD, regs, [])
        final_regs[t.tid] = {
            reg: b.reg_symbol(t.tid, reg, idx) for reg, idx in sorted(regs.items())
        }

    spawn = {t.tid: len(b.po[0]) for t in p.threads[1:]}
    ses = Ses(b.events, b.po, b.po_br, [], spawn)

    prop_expr, shared_addrs = _property_literal(p, final_regs, b)
    ssa = SsaFormula(
        equations=b.equations,
        assumes=b.assumes,
        property_literal=prop_expr,
        final_regs=final_regs,
        final_shared_addrs=shared_addrs,
        branch_literals=b.branch_literals,
        sources=b.sources,
        branch_records=b.branch_records,
    )
    return ssa, ses


def _property_literal(p: Program, final_regs, b: _Builder):
    shared_addrs: list = []

    def term(e):
        if isinstance(e, Lit):
            return IntConst(e.value)
        if isinstance(e, FinalReg):
            t = p.thread_by_name(e.thread)
            sym = final_regs[t.tid].get(e.reg)
            if sym is None:
                sym = b.reg_symbol(t.tid, e.reg, 0)
                b.equations.append(SsaEquation(TRUE_GUARD, sym, IntConst(0)))
            return IntVar(sym)
        if isinstance(e, FinalShared):
            if e.addr not in b.shared:
                raise SsaError(f"undeclared address {e.addr!r} in property")
            if e.addr not in shared_addrs:
                shared_addrs.append(e.addr)
            return IntVar(f"fin_{e.addr}")
        if isinstance(e, UnOp) and e.op == "-":
            return Mul(-1, term(e.arg))
        if isinstance(e, BinOp) and e.op in ("+", "-", "*"):
            if e.op == "+":
                return Add((term(e.lhs), term(e.rhs)))
            if e.op == "-":
                return Sub(term(e.lhs), term(e.rhs))
            if isinstance(e.lhs, Lit):
                return Mul(e.lhs.value, term(e.rhs))
            if isinstance(e.rhs, Lit):
                return Mul(e.rhs.value, term(e.lhs))
            raise EncodingError("nonlinear multiplication in property")
        raise EncodingError(f"bad property term {e!r}")

    def boolean(e):
        if isinstance(e, UnOp) and e.op == "!":
            return fnot(boolean(e.arg))
        if isinstance(e, BinOp):
            if e.op == "&&":
                return fand(boolean(e.lhs), boolean(e.rhs))
            if e.op == "||":
                return for_(boolean(e.lhs), boolean(e.rhs))
            if e.op in ("==", "!=", "<", "<=", ">", ">="):
                lhs, rhs = term(e.lhs), term(e.rhs)
                if e.op == "!=":
                    return fnot(Cmp("=", lhs, rhs))
                return Cmp("=" if e.op == "==" else e.op, lhs, rhs)
        return fnot(Cmp("=", term(e), IntConst(0)))

    f = boolean(p.property.expr)
    if p.property.mode == "assert":
        f = fnot(f)
    return f, shared_addrs


# ---------------------------------------------------------------------------
# Dependency analysis


def compute_deps(ses: Ses, ssa: SsaFormula) -> list:
    """Data and control dependency pairs via register def-use chains.

    Data: a write whose stored value flows from a read.  Control: any memory
    event po-after a branch whose condition flows from a read.  Control pairs
    record the isync fences sitting between the branch and the target, which
    the Power rules consult.  Address dependencies do not arise (addresses are
    static names).
    """
    pairs: dict = {}

    for ev in ses.events:
        if ev.kind != "W":
            continue
        for src in sorted(ssa.sources.get(ev.value, frozenset())):
            if ses.events[src].tid == ev.tid and src != ev.eid:
                pairs[(src, ev.eid, "data")] = set()

    for rec in ssa.branch_records:
        lst = ses.po[rec.tid]
        after = lst[rec.entry_index:]
        isyncs_seen: list = []
        for eid in after:
            ev = ses.events[eid]
            if ev.kind == "F" and ev.fence == "isync":
                isyncs_seen.append(eid)
                continue
            if not ev.is_mem():
                continue
            for src in sorted(rec.cond_sources):
                if ses.events[src].tid != rec.tid:
                    continue
                key = (src, eid, "control")
                pairs.setdefault(key, set()).update(isyncs_seen)

    dp = [
        DepPair(src, dst, kind, tuple(sorted(isy)))
        for (src, dst, kind), isy in sorted(pairs.items())
    ]
    ses.dp = dp
    return dp
