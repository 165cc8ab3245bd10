"""Partial-order constraint generation (the pord conjunct).

Per address: read-from candidates with selector booleans, write-serialisation
totality over cross-thread pairs, from-read as guarded implications over the
rf and ws selectors.  Per thread: the preserved-program-order chain walk that
skips transitively implied pairs (but only when guard reasoning proves them
implied), and the fence pass with cumulativity and dual lwsync clocks.  The
uniproc and thin axioms get the same clock constraints over independent
variable families.

Write-serialisation selectors are shared between the GHB and UNIPROC families
so both see a single serialisation; from-read premises reference those
selectors rather than clock literals.
"""

from __future__ import annotations

from dataclasses import dataclass, field

from .arch import Architecture, grf_external_safe, not_relax
from .errors import EncodingError
from .formula import (
    BoolVar,
    ClockFamily,
    Cmp,
    FALSE,
    GHB,
    IntConst,
    IntVar,
    Query,
    THIN,
    TRUE,
    UNIPROC,
    clock_constraint,
    fand,
    fimplies,
    fnot,
    for_,
    guard_formula,
)
from .ssa import Ses, SsaFormula, SymbolicEvent


@dataclass
class ConstraintSet:
    c_wf: list = field(default_factory=list)
    c_rf: list = field(default_factory=list)
    c_grf: list = field(default_factory=list)
    c_ws: list = field(default_factory=list)
    c_fr: list = field(default_factory=list)
    c_ppo: list = field(default_factory=list)
    c_ab: list = field(default_factory=list)
    c_uniproc: list = field(default_factory=list)
    c_thin: list = field(default_factory=list)
    rf_selectors: dict = field(default_factory=dict)  # (wid, rid) -> name
    ws_selectors: dict = field(default_factory=dict)  # (wid, w2id) -> name

    SETS = ("wf", "rf", "grf", "ws", "fr", "ppo", "ab", "uniproc", "thin")

    def counts(self) -> dict:
        return {name: len(getattr(self, "c_" + name)) for name in self.SETS}

    def total(self) -> int:
        return sum(self.counts().values())

    def most_costly(self) -> tuple:
        counts = self.counts()
        name = max(counts, key=lambda k: (counts[k], k))
        return name, counts[name]

    def all_formulas(self) -> list:
        out = []
        for name in self.SETS:
            out.extend(getattr(self, "c_" + name))
        return out


@dataclass
class Encoding:
    cs: ConstraintSet
    families: dict
    bound_asserts: list  # value-symbol range assertions (clocks stay free)

    def pord_conjuncts(self) -> list:
        return self.cs.all_formulas()


def _dnf_formula(dnf) -> object:
    return for_(*[guard_formula(c) for c in sorted(dnf, key=sorted)])


class _Encoder:
    def __init__(self, ses: Ses, arch: Architecture):
        self.ses = ses
        self.arch = arch
        self.cs = ConstraintSet()
        self.families = {GHB: ClockFamily(GHB), UNIPROC: ClockFamily(UNIPROC), THIN: ClockFamily(THIN)}
        for e in ses.events:
            if e.is_mem():
                for fam in self.families.values():
                    fam.declare(e.eid)
            elif not arch.fence(e.fence).via_ppo:
                self.families[GHB].declare(e.eid, dual=arch.fence(e.fence).dual_clock)
        self.by_addr = ses.by_address()

    # -- helpers

    def cc(self, x, y, family, side_x="r", side_y="r", premise=TRUE):
        return clock_constraint(x, y, self.families[family], side_x, side_y, premise)

    def rf_candidates(self, r: SymbolicEvent) -> list:
        _, writes = self.by_addr[r.addr]
        return [w for w in writes if not self.ses.po_before(r.eid, w.eid)]

    def ws_before_expr(self, w1: SymbolicEvent, w2: SymbolicEvent):
        """Formula meaning w1 is serialised before w2 (guards handled by the
        consumer).  Same-thread pairs are forced by program order."""
        if w1.tid == w2.tid:
            return TRUE if self.ses.po_before(w1.eid, w2.eid) else FALSE
        key = (w1.eid, w2.eid)
        if key in self.cs.ws_selectors:
            return BoolVar(self.cs.ws_selectors[key])
        rev = (w2.eid, w1.eid)
        return fnot(BoolVar(self.cs.ws_selectors[rev]))

    # -- Algorithm: read-from

    def encode_rf(self):
        for addr in sorted(self.by_addr):
            reads, writes = self.by_addr[addr]
            for r in reads:
                cands = self.rf_candidates(r)
                if not cands:
                    raise EncodingError(f"read e{r.eid} of {addr} has no candidate writes")
                some = []
                for w in cands:
                    name = f"s_{w.eid}_{r.eid}"
                    self.cs.rf_selectors[(w.eid, r.eid)] = name
                    s = BoolVar(name)
                    some.append(s)
                    self.cs.c_wf.append(
                        fimplies(s, fand(guard_formula(w.guard),
                                         Cmp("=", IntVar(r.value), IntVar(w.value))))
                    )
                    self.cs.c_rf.append(self.cc(w, r, UNIPROC, premise=s))
                    self.cs.c_rf.append(self.cc(w, r, THIN, premise=s))
                    if grf_external_safe(self.arch, w, r):
                        self.cs.c_grf.append(self.cc(w, r, GHB, premise=s))
                self.cs.c_wf.append(fimplies(guard_formula(r.guard), for_(*some)))

    # -- Algorithm: write serialisation

    def encode_ws(self):
        for addr in sorted(self.by_addr):
            _, writes = self.by_addr[addr]
            for i, w in enumerate(writes):
                for w2 in writes[i + 1:]:
                    if w.tid == w2.tid:
                        continue  # po-ordered, handled through ppo/uniproc
                    name = f"ws_{w.eid}_{w2.eid}"
                    self.cs.ws_selectors[(w.eid, w2.eid)] = name
                    b = BoolVar(name)
                    self.cs.c_ws.append(self.cc(w, w2, GHB, premise=b))
                    self.cs.c_ws.append(self.cc(w, w2, UNIPROC, premise=b))
                    self.cs.c_ws.append(self.cc(w2, w, GHB, premise=fnot(b)))
                    self.cs.c_ws.append(self.cc(w2, w, UNIPROC, premise=fnot(b)))

    # -- Algorithm: from-read

    def encode_fr(self):
        # the GHB constraint is external-only (internal fr along po is part of
        # the ppo walk); the UNIPROC constraint covers same-thread reads too,
        # which rules out reading a value the thread itself already overwrote
        for addr in sorted(self.by_addr):
            reads, writes = self.by_addr[addr]
            for w2 in writes:  # rf source
                for w in writes:
                    if w.eid == w2.eid:
                        continue
                    before = self.ws_before_expr(w2, w)
                    if before == FALSE:
                        continue
                    for r in reads:
                        sel = self.cs.rf_selectors.get((w2.eid, r.eid))
                        if sel is None:
                            continue
                        premise = fand(BoolVar(sel), before, guard_formula(w.guard))
                        if r.tid != w.tid:
                            self.cs.c_fr.append(self.cc(r, w, GHB, premise=premise))
                        self.cs.c_fr.append(self.cc(r, w, UNIPROC, premise=premise))

    # -- Algorithm: preserved program order (transitive-reduction chain walk)

    def encode_ppo(self):
        cap = 64  # DNF size ceiling; overflow keeps the strongest cubes (sound)
        for tid, lst in enumerate(self.ses.po):
            S = [eid for eid in lst if self.ses.events[eid].is_mem()]
            if not S:
                continue
            chains = [(S[0], {})]
            for e2id in S[1:]:
                e2 = self.ses.events[e2id]
                T2: dict = {}
                for e1id, T1 in chains:
                    e1 = self.ses.events[e1id]
                    covered = T2.get(e1id)
                    if covered is not None:
                        base = frozenset(e1.guard | e2.guard)
                        if any(c <= base for c in covered):
                            continue  # transitively implied whenever both run
                    r = not_relax(self.arch, self.ses, e1, e2)
                    if not r:
                        continue
                    self.cs.c_ppo.append(
                        fimplies(_dnf_formula(r),
                                 Cmp("<", self.families[GHB].var(e1id),
                                     self.families[GHB].var(e2id)))
                    )
                    self._merge(T2, e1id, r, cap)
                    for e0id, r0 in T1.items():
                        comp = frozenset(
                            c1 | c2
                            for c1 in r
                            for c2 in r0
                            if _cube_consistent(c1 | c2)
                        )
                        if comp:
                            self._merge(T2, e0id, comp, cap)
                chains.insert(0, (e2id, T2))

    @staticmethod
    def _merge(T, eid, dnf, cap):
        cur = T.get(eid, frozenset())
        merged = cur | dnf
        if len(merged) > cap:
            merged = frozenset(sorted(merged, key=lambda c: (len(c), sorted(c)))[:cap])
        T[eid] = merged

    # -- Algorithm: fences and cumulativity

    def encode_fences(self):
        for tid, lst in enumerate(self.ses.po):
            fences = [
                eid for eid in lst
                if self.ses.events[eid].kind == "F"
                and not self.arch.fence(self.ses.events[eid].fence).via_ppo
            ]
            mems = [eid for eid in lst if self.ses.events[eid].is_mem()]
            for s_eid in fences:
                s = self.ses.events[s_eid]
                spec = self.arch.fence(s.fence)
                cum = not self.arch.rfe_safe
                for e_eid in mems:
                    e = self.ses.events[e_eid]
                    if self.ses.po_before(e_eid, s_eid):
                        side = "r" if e.kind == "R" else "w"
                        self.cs.c_ab.append(self.cc(e, s, GHB, side_y=side))
                        if cum and spec.a_cumulative and e.kind == "R":
                            for w in self.rf_candidates(e):
                                if w.tid == e.tid:
                                    continue
                                sel = BoolVar(self.cs.rf_selectors[(w.eid, e.eid)])
                                self.cs.c_ab.append(
                                    self.cc(w, s, GHB, side_y="w", premise=sel))
                    else:
                        if e.kind == "R":
                            self.cs.c_ab.append(self.cc(s, e, GHB, side_x="r"))
                        else:
                            self.cs.c_ab.append(self.cc(s, e, GHB, side_x="w"))
                            if spec.dual_clock:
                                self.cs.c_ab.append(self.cc(s, e, GHB, side_x="r"))
                        if cum and spec.b_cumulative and e.kind == "W":
                            reads, _ = self.by_addr[e.addr]
                            for r in reads:
                                if r.tid == e.tid:
                                    continue
                                sel = self.cs.rf_selectors.get((e.eid, r.eid))
                                if sel is None:
                                    continue
                                self.cs.c_ab.append(
                                    self.cc(s, r, GHB, side_x="r", premise=BoolVar(sel)))

    # -- uniproc (po-loc) and thin (dependencies)

    def encode_uniproc(self):
        # po-loc spans the spawn ordering: an initialisation write precedes
        # every same-address access of the spawned threads
        for addr in sorted(self.by_addr):
            reads, writes = self.by_addr[addr]
            mems = sorted(reads + writes, key=lambda e: e.eid)
            for e1 in mems:
                for e2 in mems:
                    if e1.eid != e2.eid and self.ses.po_before(e1.eid, e2.eid):
                        self.cs.c_uniproc.append(self.cc(e1, e2, UNIPROC))

    def encode_thin(self):
        for d in self.ses.dp:
            src = self.ses.events[d.src]
            dst = self.ses.events[d.dst]
            self.cs.c_thin.append(self.cc(src, dst, THIN))

    # -- final shared values (for properties observing memory)

    def encode_final(self, addrs):
        for addr in addrs:
            _, writes = self.by_addr[addr]  # init write guarantees the entry
            fin = IntVar(f"fin_{addr}")
            sels = []
            for w in writes:
                name = f"fin_{addr}_e{w.eid}"
                sf = BoolVar(name)
                sels.append(sf)
                conj = [guard_formula(w.guard), Cmp("=", fin, IntVar(w.value))]
                for w2 in writes:
                    if w2.eid == w.eid:
                        continue
                    before = self.ws_before_expr(w2, w)
                    conj.append(fimplies(guard_formula(w2.guard), before))
                self.cs.c_wf.append(fimplies(sf, fand(*conj)))
            self.cs.c_wf.append(for_(*sels))


def build_pord(ses: Ses, arch: Architecture, final_addrs=(), ssa: SsaFormula | None = None,
               bitwidth: int = 32, ranges: bool = True) -> Encoding:
    """Run every sub-encoder and assemble the pord constraint sets.

    `ranges` additionally emits satisfiability-preserving range assertions for
    value symbols (from an interval analysis over the SSA equations and rf
    candidate sets) and for clocks; they bound the solver's search without
    changing verdicts.
    """
    enc = _Encoder(ses, arch)
    enc.encode_rf()
    enc.encode_ws()
    enc.encode_fr()
    enc.encode_ppo()
    enc.encode_fences()
    enc.encode_uniproc()
    enc.encode_thin()
    enc.encode_final(final_addrs)

    bound_asserts = []
    if ranges and ssa is not None:
        for name, (lo, hi) in value_bounds(ses, ssa, final_addrs, bitwidth).items():
            bound_asserts.append(Cmp(">=", IntVar(name), IntConst(lo)))
            bound_asserts.append(Cmp("<=", IntVar(name), IntConst(hi)))
    return Encoding(enc.cs, enc.families, bound_asserts)


def assemble_query(ssa: SsaFormula, encoding: Encoding, name: str = "query") -> Query:
    asserts = list(ssa.conjuncts())
    asserts.append(ssa.property_literal)
    asserts.extend(encoding.pord_conjuncts())
    asserts.extend(encoding.bound_asserts)
    return Query([a for a in asserts if a != TRUE], name)


def _cube_consistent(cube) -> bool:
    names = [n for n, _ in cube]
    return len(names) == len(set(names))


# ---------------------------------------------------------------------------
# Interval inference for value symbols


def value_bounds(ses: Ses, ssa: SsaFormula, final_addrs, bitwidth: int) -> dict:
    """Sound [lo, hi] ranges for every integer value symbol.

    Start from the initialisation constants, push intervals through the SSA
    equations, and give each read the hull of its candidate writes.  Growth is
    clamped to the configured bit-width, which is also the fallback for
    anything the analysis cannot pin down.
    """
    clamp_lo = -(2 ** (bitwidth - 1))
    clamp_hi = 2 ** (bitwidth - 1) - 1

    # Magnitude bound for the symbols feeding shared memory: a satisfying
    # assignment pins values through an acyclic propagation DAG (causal loops
    # are excluded by the thin family), so each addition equation contributes
    # at most once to any single value:
    #   |v| <= (sum of |constants|) * 2^(#additions) * prod(|coefficients|)
    # over the backward closure of the shared value symbols.
    from .formula import Add, Mul, Sub

    def term_vars(t, out):
        if isinstance(t, IntVar):
            out.add(t.name)
        elif isinstance(t, Add):
            for a in t.args:
                term_vars(a, out)
        elif isinstance(t, Sub):
            term_vars(t.lhs, out)
            term_vars(t.rhs, out)
        elif isinstance(t, Mul):
            term_vars(t.term, out)

    int_eqs_all = [eq for eq in ssa.equations if not eq.is_bool]
    by_target: dict = {}
    for eq in int_eqs_all:
        by_target.setdefault(eq.target, []).append(eq)
    read_events = [e for e in ses.events if e.kind == "R"]
    by_addr0 = ses.by_address()
    cand_map = {
        r.value: [w.value for w in by_addr0[r.addr][1]
                  if not ses.po_before(r.eid, w.eid)]
        for r in read_events
    }

    relevant = {e.value for e in ses.events if e.is_mem()}
    relevant.update(f"fin_{a}" for a in final_addrs)
    work = list(relevant)
    while work:
        sym = work.pop()
        for eq in by_target.get(sym, ()):
            ops: set = set()
            term_vars(eq.rhs, ops)
            for o in ops:
                if o not in relevant:
                    relevant.add(o)
                    work.append(o)
        for w in cand_map.get(sym, ()):
            if w not in relevant:
                relevant.add(w)
                work.append(w)

    n_adds = 0
    c_total = 0
    coef_prod = 1

    def scan_term(t):
        nonlocal n_adds, c_total, coef_prod
        if isinstance(t, IntConst):
            c_total += abs(t.value)
            return 1
        if isinstance(t, IntVar):
            return 1
        if isinstance(t, (Add, Sub)):
            args = t.args if isinstance(t, Add) else (t.lhs, t.rhs)
            leaves = sum(scan_term(a) for a in args)
            n_adds += max(0, leaves - 1)
            return leaves
        if isinstance(t, Mul):
            coef_prod *= max(1, abs(t.coef))
            return scan_term(t.term)
        return 1

    for eq in int_eqs_all:
        if eq.target in relevant:
            scan_term(eq.rhs)
    big = max(1, c_total) * (2 ** min(n_adds, bitwidth + 2)) * coef_prod
    rel_lo = max(clamp_lo, -big)
    rel_hi = min(clamp_hi, big)

    def clamp(iv, name=None):
        if name is not None and name in relevant:
            return (max(iv[0], rel_lo), min(iv[1], rel_hi))
        return (max(iv[0], clamp_lo), min(iv[1], clamp_hi))

    box: dict = {}

    def ev_term(t):
        from .formula import Add, Mul, Sub

        if isinstance(t, IntConst):
            return (t.value, t.value)
        if isinstance(t, IntVar):
            return box.get(t.name)
        if isinstance(t, Add):
            parts = [ev_term(a) for a in t.args]
            if any(p is None for p in parts):
                return None
            return (sum(p[0] for p in parts), sum(p[1] for p in parts))
        if isinstance(t, Sub):
            a, b = ev_term(t.lhs), ev_term(t.rhs)
            if a is None or b is None:
                return None
            return (a[0] - b[1], a[1] - b[0])
        if isinstance(t, Mul):
            a = ev_term(t.term)
            if a is None:
                return None
            vals = (t.coef * a[0], t.coef * a[1])
            return (min(vals), max(vals))
        return None

    int_eqs = [eq for eq in ssa.equations if not eq.is_bool]
    reads = [e for e in ses.events if e.kind == "R"]
    by_addr = ses.by_address()
    candidates = {
        r.eid: [w for w in by_addr[r.addr][1] if not ses.po_before(r.eid, w.eid)]
        for r in reads
    }

    # Join-accumulating sweep, capped at the longest possible pinning chain.
    # In a satisfying assignment values propagate acyclically (causal loops
    # through read-from and dependencies are excluded by the thin family), a
    # chain never revisits a symbol, so `max_rounds` rounds cover every value
    # an execution can pin.  A read's hull grows from the candidates resolved
    # so far: a k-step chain only consumes values derivable in fewer steps.
    max_rounds = len(int_eqs) + len(reads) + 4
    for _ in range(max_rounds):
        changed = False
        for eq in int_eqs:
            iv = ev_term(eq.rhs)
            if iv is None:
                continue
            iv = clamp((min(iv), max(iv)), eq.target)
            old = box.get(eq.target)
            new = iv if old is None else (min(old[0], iv[0]), max(old[1], iv[1]))
            new = clamp(new, eq.target)
            if new != old:
                box[eq.target] = new
                changed = True
        for r in reads:
            ivs = [box[w.value] for w in candidates[r.eid] if w.value in box]
            if not ivs:
                continue
            iv = clamp((min(i[0] for i in ivs), max(i[1] for i in ivs)), r.value)
            old = box.get(r.value)
            new = iv if old is None else (min(old[0], iv[0]), max(old[1], iv[1]))
            new = clamp(new, r.value)
            if new != old:
                box[r.value] = new
                changed = True
        if not changed:
            break

    # every integer symbol of the query needs some range
    out: dict = {}
    names: set = set()
    for eq in int_eqs:
        names.add(eq.target)
    for e in ses.events:
        if e.is_mem():
            names.add(e.value)
    for addr in final_addrs:
        names.add(f"fin_{addr}")
        writes = by_addr.get(addr, ((), ()))[1]
        ivs = [box.get(w.value) for w in writes]
        if ivs and not any(i is None for i in ivs):
            box[f"fin_{addr}"] = clamp((min(i[0] for i in ivs), max(i[1] for i in ivs)), f"fin_{addr}")
    for n in sorted(names):
        default = (rel_lo, rel_hi) if n in relevant else (clamp_lo, clamp_hi)
        out[n] = box.get(n, default)
    return out
