"""Reference SMT solver for the QF_LIA fragment this tool emits.

Usage: wpo-solve FILE.smt2  — prints `sat` plus an S-expression model, or
`unsat`, honouring the external-solver contract, so environments without a
system SMT solver can still run the full pipeline.  Point WPO_SOLVER at z3,
cvc5 or any other SMT-LIB2 solver to use that instead.

Decision procedure: CDCL search over a Tseitin skeleton.  Integer variables
that only ever occur in two-variable difference atoms (the clock variables)
live in a lazy difference-logic theory with incremental negative-cycle
detection; every other integer is bit-blasted to two's complement with a
width derived from its asserted range, so all arithmetic is exact.  Models
are re-verified over Python bignums before being printed.
"""

from __future__ import annotations

import sys
from collections import defaultdict

from .errors import SolverOutputError
from .sexp import parse_all

DEFAULT_BITWIDTH = 32


# ---------------------------------------------------------------------------
# Script parsing


class Script:
    def __init__(self):
        self.sorts: dict = {}  # name -> "Bool" | "Int"
        self.asserts: list = []
        self.check_sat = False
        self.get_model = False


def parse_script(text: str) -> Script:
    sc = Script()
    for form in parse_all(text):
        if not isinstance(form, list) or not form:
            raise SolverOutputError(f"bad command {form!r}")
        head = form[0]
        if head in ("set-logic", "set-option", "set-info", "exit", "push", "pop"):
            continue
        if head in ("declare-fun", "declare-const"):
            if head == "declare-fun":
                name, args, sort = form[1], form[2], form[3]
                if args:
                    raise SolverOutputError("only 0-ary declarations are supported")
            else:
                name, sort = form[1], form[2]
            if sort not in ("Bool", "Int"):
                raise SolverOutputError(f"unsupported sort {sort!r}")
            sc.sorts[name] = sort
            continue
        if head == "assert":
            sc.asserts.append(form[1])
            continue
        if head == "check-sat":
            sc.check_sat = True
            continue
        if head == "get-model":
            sc.get_model = True
            continue
        raise SolverOutputError(f"unsupported command {head!r}")
    return sc


def _is_int_literal(s) -> bool:
    return isinstance(s, str) and (s.isdigit() or (s[:1] == "-" and s[1:].isdigit()))


def _sort_of(sorts: dict, t) -> str:
    if isinstance(t, str):
        if t in ("true", "false"):
            return "Bool"
        if _is_int_literal(t):
            return "Int"
        s = sorts.get(t)
        if s is None:
            raise SolverOutputError(f"undeclared symbol {t!r}")
        return s
    if t[0] in ("and", "or", "not", "=>", "<", "<=", ">", ">=", "="):
        return "Bool"
    return "Int"


# ---------------------------------------------------------------------------
# Linear forms: (dict var -> coef, constant)


def _lin_add(a, b):
    coefs = dict(a[0])
    for v, c in b[0].items():
        coefs[v] = coefs.get(v, 0) + c
        if coefs[v] == 0:
            del coefs[v]
    return coefs, a[1] + b[1]


def _lin_scale(a, k):
    if k == 0:
        return {}, 0
    return {v: c * k for v, c in a[0].items()}, a[1] * k


# ---------------------------------------------------------------------------
# CDCL SAT core with a pluggable assignment theory


class Unsat(Exception):
    pass


class CDCL:
    """Two-watched-literal CDCL with activity ordering, phase saving, Luby
    restarts and first-UIP learning.  Literals are ±(var index ≥ 1)."""

    def __init__(self):
        self.nvars = 0
        self.clauses: list = []
        self.watches: dict = defaultdict(list)  # lit -> [(clause idx, blocker)]
        self.binaries: dict = defaultdict(list)  # lit -> [(implied, clause idx)]
        self.assign: list = [None]  # var -> bool | None, index 0 unused
        self.reason: list = [None]
        self.level: list = [None]
        self.activity: list = [0.0]
        self.phase: list = [False]
        self.trail: list = []
        self.trail_lim: list = []
        self.qhead = 0
        self.var_inc = 1.0
        self.ok = True
        self.theory = None  # object with insert_lit(lit, edge, pos) hook
        self._order: list = []  # vars sorted by activity, rebuilt on restart
        self._order_head = 0

    # -- variables and clauses

    def new_var(self) -> int:
        self.nvars += 1
        self.assign.append(None)
        self.reason.append(None)
        self.level.append(0)
        self.activity.append(0.0)
        self.phase.append(False)
        return self.nvars

    def value(self, lit: int):
        v = self.assign[abs(lit)]
        if v is None:
            return None
        return v if lit > 0 else not v

    def add_clause(self, lits) -> None:
        if not self.ok:
            return
        seen = set()
        cl = []
        for l in lits:
            if -l in seen:
                return  # tautology
            if l not in seen:
                seen.add(l)
                cl.append(l)
        if not cl:
            self.ok = False
            return
        if len(cl) == 1:
            if self.current_level() != 0:
                raise SolverOutputError("unit added above level 0")
            val = self.value(cl[0])
            if val is False:
                self.ok = False
            elif val is None:
                self._enqueue(cl[0], None)
            return
        idx = len(self.clauses)
        self.clauses.append(cl)
        if len(cl) == 2:
            self.binaries[-cl[0]].append((cl[1], idx))
            self.binaries[-cl[1]].append((cl[0], idx))
        else:
            self.watches[cl[0]].append((idx, cl[1]))
            self.watches[cl[1]].append((idx, cl[0]))

    def _attach_learnt(self, cl) -> int:
        idx = len(self.clauses)
        self.clauses.append(cl)
        if len(cl) == 2:
            self.binaries[-cl[0]].append((cl[1], idx))
            self.binaries[-cl[1]].append((cl[0], idx))
        else:
            self.watches[cl[0]].append((idx, cl[1]))
            self.watches[cl[1]].append((idx, cl[0]))
        return idx

    # -- trail

    def current_level(self) -> int:
        return len(self.trail_lim)

    def _enqueue(self, lit: int, reason) -> None:
        v = abs(lit)
        self.assign[v] = lit > 0
        self.reason[v] = reason
        self.level[v] = self.current_level()
        self.trail.append(lit)

    def _cancel_until(self, lvl: int) -> None:
        if self.current_level() <= lvl:
            return
        bound = self.trail_lim[lvl]
        assign = self.assign
        phase = self.phase
        reason = self.reason
        for lit in self.trail[bound:]:
            v = lit if lit > 0 else -lit
            phase[v] = assign[v]
            assign[v] = None
            reason[v] = None
        del self.trail[bound:]
        del self.trail_lim[lvl:]
        self.qhead = min(self.qhead, len(self.trail))
        self._order_head = 0
        if self.theory is not None:
            self.theory.backtrack(len(self.trail))

    # -- propagation

    def propagate(self):
        """Returns a conflicting clause (list of lits) or None."""
        clauses = self.clauses
        watches = self.watches
        binaries = self.binaries
        assign = self.assign
        trail = self.trail
        reason = self.reason
        level = self.level
        theory = self.theory
        tedges = theory.atom_edge if theory is not None else None
        while self.qhead < len(trail):
            lit = trail[self.qhead]
            self.qhead += 1
            lvl = len(self.trail_lim)

            for other, ci in binaries[lit]:
                vo = assign[other] if other > 0 else assign[-other]
                if vo is None:
                    var = other if other > 0 else -other
                    assign[var] = other > 0
                    reason[var] = ci
                    level[var] = lvl
                    trail.append(other)
                elif vo != (other > 0):
                    return clauses[ci]

            neg = -lit
            watchlist = watches[neg]
            i = 0
            while i < len(watchlist):
                ci, blocker = watchlist[i]
                vb = assign[blocker] if blocker > 0 else assign[-blocker]
                if vb is not None and vb == (blocker > 0):
                    i += 1
                    continue
                cl = clauses[ci]
                if cl[0] == neg:
                    cl[0] = cl[1]
                    cl[1] = neg
                first = cl[0]
                v0 = assign[first] if first > 0 else assign[-first]
                if v0 is not None and v0 == (first > 0):
                    watchlist[i] = (ci, first)
                    i += 1
                    continue
                moved = False
                for j in range(2, len(cl)):
                    lj = cl[j]
                    vj = assign[lj] if lj > 0 else assign[-lj]
                    if vj is None or vj == (lj > 0):
                        cl[1] = lj
                        cl[j] = neg
                        watches[lj].append((ci, first))
                        watchlist[i] = watchlist[-1]
                        watchlist.pop()
                        moved = True
                        break
                if moved:
                    continue
                if v0 is not None:
                    return cl  # conflict: first watched literal is false
                var = first if first > 0 else -first
                assign[var] = first > 0
                reason[var] = ci
                level[var] = lvl
                trail.append(first)
                i += 1
            if tedges is not None:
                edge = tedges.get(lit if lit > 0 else -lit)
                if edge is not None:
                    confl = theory.insert_lit(lit, edge, self.qhead)
                    if confl is not None:
                        return confl
        return None

    # -- conflict analysis (first UIP)

    def _bump(self, v: int) -> None:
        self.activity[v] += self.var_inc
        if self.activity[v] > 1e100:
            for i in range(1, self.nvars + 1):
                self.activity[i] *= 1e-100
            self.var_inc *= 1e-100

    def analyze(self, confl) -> tuple:
        learnt = []
        seen = [False] * (self.nvars + 1)
        counter = 0
        p = None
        idx = len(self.trail) - 1
        cl = confl
        while True:
            for q in cl:
                if p is not None and q == p:
                    continue
                v = abs(q)
                if not seen[v] and self.level[v] > 0:
                    seen[v] = True
                    self._bump(v)
                    if self.level[v] >= self.current_level():
                        counter += 1
                    else:
                        learnt.append(q)
            while not seen[abs(self.trail[idx])]:
                idx -= 1
            p = self.trail[idx]
            v = abs(p)
            seen[v] = False
            counter -= 1
            idx -= 1
            if counter == 0:
                break
            r = self.reason[v]
            cl = self.clauses[r] if isinstance(r, int) else r
            if cl is None:
                raise SolverOutputError("conflict analysis hit a decision")
        # local minimisation: drop literals whose whole reason is subsumed
        keep = set(learnt)
        minimized = []
        for q in learnt:
            r = self.reason[abs(q)]
            if r is None:
                minimized.append(q)
                continue
            rcl = self.clauses[r]
            if all(x == -q or x in keep or self.level[abs(x)] == 0 for x in rcl):
                continue
            minimized.append(q)
        learnt = minimized

        learnt.insert(0, -p)
        if len(learnt) == 1:
            return learnt, 0
        bl = max(self.level[abs(q)] for q in learnt[1:])
        # watch a literal of the backjump level in second position
        for k in range(1, len(learnt)):
            if self.level[abs(learnt[k])] == bl:
                learnt[1], learnt[k] = learnt[k], learnt[1]
                break
        return learnt, bl

    # -- main loop

    def _handle_conflict(self, confl) -> bool:
        """Learn from a conflicting clause; False when unsat at level 0."""
        levels = [self.level[abs(q)] for q in confl]
        ml = max(levels) if levels else 0
        if ml == 0:
            return False
        if ml < self.current_level():
            # theory cores may live entirely below the current level
            self._cancel_until(ml)
        learnt, bl = self.analyze(confl)
        self._cancel_until(bl)
        if len(learnt) == 1:
            self._enqueue(learnt[0], None)
        else:
            ci = self._attach_learnt(learnt)
            self._enqueue(learnt[0], ci)
        self.var_inc *= 1.052
        return True

    def _rebuild_order(self) -> None:
        act = self.activity
        self._order = sorted(range(1, self.nvars + 1),
                             key=lambda v: -act[v])
        self._order_head = 0

    def solve(self) -> bool:
        if not self.ok:
            return False
        self._rebuild_order()
        conflicts_budget = 256
        luby_k = 1
        since_sort = 0
        while True:
            confl = self.propagate()
            if confl is not None:
                if not self._handle_conflict(confl):
                    return False
                conflicts_budget -= 1
                since_sort += 1
                if conflicts_budget <= 0:
                    luby_k += 1
                    conflicts_budget = 256 * _luby(luby_k)
                    self._cancel_until(0)
                    if since_sort >= 512:
                        self._rebuild_order()
                        since_sort = 0
                continue
            v = self._pick()
            if v == 0:
                return True
            self.trail_lim.append(len(self.trail))
            self._enqueue(v if self.phase[v] else -v, None)

    def _pick(self) -> int:
        order = self._order
        assign = self.assign
        i = self._order_head
        n = len(order)
        while i < n:
            v = order[i]
            if assign[v] is None:
                self._order_head = i
                return v
            i += 1
        self._order_head = n
        return 0


def _luby(i: int) -> int:
    # 1,1,2,1,1,2,4,1,1,2,1,1,2,4,8,...
    while True:
        k = (i + 1).bit_length() - 1
        if (1 << k) - 1 == i:
            return 1 << (k - 1) if k > 0 else 1
        i = i - (1 << k) + 1


# ---------------------------------------------------------------------------
# Difference-logic theory for order (clock) variables
#
# An atom id maps to edge (u, v, k): when its literal is true, u - v <= k;
# when false, v - u <= -k-1.  Feasibility is maintained with potentials under
# incremental edge insertion; an infeasible insertion yields the inserting
# literals along the tight cycle as a conflict clause.


class DiffTheory:
    def __init__(self):
        self.atom_edge: dict = {}  # atom var -> (u, v, k)
        self.pot: dict = {}  # node -> potential (feasible for current edges)
        self.out: dict = defaultdict(dict)  # tail -> {head: (weight, lit)}
        self.edge_stack: list = []  # (action, tail, head, old, pos)

    def register(self, var: int, u, v, k) -> None:
        self.atom_edge[var] = (u, v, k)
        self.pot.setdefault(u, 0)
        self.pot.setdefault(v, 0)

    def insert_lit(self, lit: int, edge, pos: int):
        u, v, k = edge
        if lit < 0:
            u, v, k = v, u, -k - 1
        # constraint u - v <= k is the edge v -> u weight k in the potential
        # graph (require pot[u] <= pot[v] + k)
        old = self.out[v].get(u)
        if old is not None and old[0] <= k:
            self.edge_stack.append(("none", v, u, None, pos))
            return None
        action = "new" if old is None else "replace"
        self.edge_stack.append((action, v, u, old, pos))
        self.out[v][u] = (k, lit)
        if self.pot[u] <= self.pot[v] + k:
            return None
        # relabel potentials reachable from u; reaching v closes a negative
        # cycle through the new edge, whose edge literals form the core
        changed = {u: (v, lit)}
        newpot = {u: self.pot[v] + k}
        queue = [u]
        while queue:
            x = queue.pop()
            px = newpot.get(x, self.pot[x])
            for y, (wy, ly) in self.out[x].items():
                cand = px + wy
                if cand < newpot.get(y, self.pot[y]):
                    if y == v:
                        return self._cycle_core(u, x, changed, ly)
                    newpot[y] = cand
                    changed[y] = (x, ly)
                    queue.append(y)
        for x, p in newpot.items():
            self.pot[x] = p
        return None

    def _cycle_core(self, u, x, changed, closing_lit):
        lits = [closing_lit]
        node = x
        while True:
            prev, plit = changed[node]
            lits.append(plit)
            if node == u:
                break
            node = prev
        core = []
        seen = set()
        for l in lits:
            if l not in seen:
                seen.add(l)
                core.append(-l)
        return core

    def backtrack(self, trail_len: int) -> None:
        while self.edge_stack and self.edge_stack[-1][4] > trail_len:
            action, tail, head, old, _ = self.edge_stack.pop()
            if action == "new":
                del self.out[tail][head]
            elif action == "replace":
                self.out[tail][head] = old

    def model(self) -> dict:
        return dict(self.pot)


# ---------------------------------------------------------------------------
# Bit-blasting for value variables


class Blaster:
    def __init__(self, sat: CDCL):
        self.sat = sat
        self._true = None

    def true_lit(self) -> int:
        if self._true is None:
            self._true = self.sat.new_var()
            self.sat.add_clause([self._true])
        return self._true

    def const_bits(self, value: int, width: int) -> list:
        t = self.true_lit()
        return [(t if (value >> i) & 1 else -t) for i in range(width)]

    def fresh_bits(self, width: int) -> list:
        return [self.sat.new_var() for _ in range(width)]

    def sign_extend(self, bits: list, width: int) -> list:
        if len(bits) >= width:
            return bits[:width]
        return bits + [bits[-1]] * (width - len(bits))

    def _xor(self, a: int, b: int) -> int:
        o = self.sat.new_var()
        add = self.sat.add_clause
        add([-o, a, b])
        add([-o, -a, -b])
        add([o, -a, b])
        add([o, a, -b])
        return o

    def _full_add(self, a: int, b: int, c: int) -> tuple:
        s = self.sat.new_var()
        add = self.sat.add_clause
        add([a, b, c, -s])
        add([a, b, -c, s])
        add([a, -b, c, s])
        add([a, -b, -c, -s])
        add([-a, b, c, s])
        add([-a, b, -c, -s])
        add([-a, -b, c, -s])
        add([-a, -b, -c, s])
        cout = self.sat.new_var()
        add([-a, -b, cout])
        add([-a, -c, cout])
        add([-b, -c, cout])
        add([a, b, -cout])
        add([a, c, -cout])
        add([b, c, -cout])
        return s, cout

    def add(self, xs: list, ys: list, carry_in=None) -> list:
        width = max(len(xs), len(ys)) + 1
        xs = self.sign_extend(xs, width)
        ys = self.sign_extend(ys, width)
        out = []
        carry = carry_in if carry_in is not None else -self.true_lit()
        for i in range(width):
            s, carry = self._full_add(xs[i], ys[i], carry)
            out.append(s)
        return out

    def negate(self, xs: list) -> list:
        # two's complement: ~x + 1 (carry-in true against zero)
        width = len(xs) + 1
        inv = [-b for b in self.sign_extend(xs, width)]
        zero = self.const_bits(0, width)
        return self.add(inv, zero, carry_in=self.true_lit())[:width]

    def scale(self, xs: list, k: int) -> list:
        if k == 0:
            return self.const_bits(0, 1)
        neg = k < 0
        k = abs(k)
        acc = None
        shift = 0
        while k:
            if k & 1:
                shifted = self.const_bits(0, shift) + list(xs)
                acc = shifted if acc is None else self.add(acc, shifted)
            k >>= 1
            shift += 1
        if neg:
            acc = self.negate(acc)
        return acc

    def eq_lit(self, xs: list, ys: list) -> int:
        width = max(len(xs), len(ys))
        xs = self.sign_extend(xs, width)
        ys = self.sign_extend(ys, width)
        o = self.sat.new_var()
        add = self.sat.add_clause
        diffs = []
        for a, b in zip(xs, ys):
            if a == b:
                continue
            # o -> (a <-> b); collect a difference witness for the converse
            add([-o, -a, b])
            add([-o, a, -b])
            d = self._xor(a, b)
            diffs.append(d)
        add([o] + diffs)
        return o

    def le_lit(self, xs: list, ys: list) -> int:
        # signed xs <= ys  <=>  sign(xs - ys - 1) is negative;
        # xs - ys - 1 == xs + ~ys with no carry-in
        width = max(len(xs), len(ys)) + 1
        xs = self.sign_extend(xs, width)
        inv = [-b for b in self.sign_extend(ys, width)]
        out = self.add(xs, inv)
        return out[-1]


# ---------------------------------------------------------------------------
# Translation


class Translator:
    def __init__(self, sc: Script, bitwidth: int):
        self.sc = sc
        self.sat = CDCL()
        self.blaster = Blaster(self.sat)
        self.theory = DiffTheory()
        self.boolmap: dict = {}  # bool symbol -> sat var
        self.int_bounds: dict = {}  # int symbol -> [lo, hi]
        self.int_bits: dict = {}  # blasted symbol -> bit list
        self.order_vars: set = set()
        self.atom_cache: dict = {}
        default = 2 ** (bitwidth - 1)
        self.default_lo, self.default_hi = -default, default - 1

    # -- terms to linear forms

    def term(self, t):
        if _is_int_literal(t):
            return {}, int(t)
        if isinstance(t, str):
            if self.sc.sorts.get(t) != "Int":
                raise SolverOutputError(f"unknown integer symbol {t!r}")
            self.int_bounds.setdefault(t, [self.default_lo, self.default_hi])
            return {t: 1}, 0
        head = t[0]
        if head == "+":
            acc = ({}, 0)
            for a in t[1:]:
                acc = _lin_add(acc, self.term(a))
            return acc
        if head == "-":
            if len(t) == 2:
                return _lin_scale(self.term(t[1]), -1)
            acc = self.term(t[1])
            for a in t[2:]:
                acc = _lin_add(acc, _lin_scale(self.term(a), -1))
            return acc
        if head == "*":
            parts = [self.term(a) for a in t[1:]]
            consts = [p for p in parts if not p[0]]
            lins = [p for p in parts if p[0]]
            if len(lins) > 1:
                raise SolverOutputError("nonlinear multiplication")
            k = 1
            for c in consts:
                k *= c[1]
            if not lins:
                return {}, k
            return _lin_scale(lins[0], k)
        raise SolverOutputError(f"unsupported term {t!r}")

    # -- pass 1: bounds and variable classification

    def scan(self):
        plain = []
        for a in self.sc.asserts:
            if isinstance(a, list) and a and a[0] in ("<", "<=", ">", ">=", "=") \
                    and self._try_bound(a):
                continue
            plain.append(a)
        self.plain_asserts = plain
        self._classify(plain)

    def _try_bound(self, a) -> bool:
        op = a[0]
        try:
            if _sort_of(self.sc.sorts, a[1]) != "Int":
                return False
            lin_l = self.term(a[1])
            lin_r = self.term(a[2])
        except SolverOutputError:
            return False
        diff, const = _lin_add(lin_l, _lin_scale(lin_r, -1))
        if len(diff) != 1:
            return False
        (name, coef), = diff.items()
        if abs(coef) != 1:
            return False
        k = -const
        b = self.int_bounds[name]
        if op in ("<", "<="):
            bound = k if op == "<=" else k - 1
            if coef == 1:
                b[1] = min(b[1], bound)
            else:
                b[0] = max(b[0], -bound)
        elif op in (">", ">="):
            bound = k if op == ">=" else k + 1
            if coef == 1:
                b[0] = max(b[0], bound)
            else:
                b[1] = min(b[1], -bound)
        else:
            if coef == -1:
                k = -k
            b[0] = max(b[0], k)
            b[1] = min(b[1], k)
        return True

    def _classify(self, asserts) -> None:
        """Order variables occur only in two-variable unit-coefficient
        difference comparisons (never equalities)."""
        non_order: set = set()
        seen: set = set()

        def visit(t, in_cmp_diff):
            if isinstance(t, str):
                if self.sc.sorts.get(t) == "Int":
                    seen.add(t)
                    if not in_cmp_diff:
                        non_order.add(t)
                return
            if not isinstance(t, list):
                return
            head = t[0]
            if head in ("<", "<=", ">", ">="):
                try:
                    diff, _ = _lin_add(self.term(t[1]), _lin_scale(self.term(t[2]), -1))
                except SolverOutputError:
                    diff = None
                is_diff = (
                    diff is not None and len(diff) == 2
                    and sorted(diff.values()) == [-1, 1]
                )
                for sub in t[1:]:
                    visit(sub, is_diff)
                return
            for sub in t[1:]:
                visit(sub, False)

        for a in asserts:
            visit(a, False)
        self.order_vars = seen - non_order

    # -- pass 2: encode

    def bits_of(self, name: str) -> list:
        if name in self.int_bits:
            return self.int_bits[name]
        lo, hi = self.int_bounds[name]
        width = max(_signed_width(lo), _signed_width(hi))
        bits = self.blaster.fresh_bits(width)
        self.int_bits[name] = bits
        # assert the range when it is tighter than the representation
        if lo > -(1 << (width - 1)):
            lit = self.blaster.le_lit(bits, self.blaster.const_bits(lo - 1, width))
            self.sat.add_clause([-lit])
        if hi < (1 << (width - 1)) - 1:
            lit = self.blaster.le_lit(bits, self.blaster.const_bits(hi, width))
            self.sat.add_clause([lit])
        return bits

    def _side_bits(self, entries, const: int) -> list:
        """Sum of positively weighted variables plus a constant (no negation
        circuits: callers split atoms into two non-negative sides)."""
        acc = None
        for name, coef in entries:
            piece = self.bits_of(name)
            if coef != 1:
                piece = self.blaster.scale(piece, coef)
            acc = piece if acc is None else self.blaster.add(acc, piece)
        if acc is None:
            return self.blaster.const_bits(const, max(_signed_width(const), 2))
        if const:
            width = max(len(acc), _signed_width(const)) + 1
            acc = self.blaster.add(
                self.blaster.sign_extend(acc, width),
                self.blaster.const_bits(const, width),
            )
        return acc

    def atom_lit(self, op, lhs, rhs) -> int:
        a = self.term(lhs)
        b = self.term(rhs)
        diff, const = _lin_add(a, _lin_scale(b, -1))  # lhs - rhs + const' form
        k = -const
        if op in (">", ">="):
            diff = {v: -c for v, c in diff.items()}
            k = -k
            op = "<" if op == ">" else "<="
        if op == "<":
            op, k = "<=", k - 1
        key = (op, tuple(sorted(diff.items())), k)
        if key in self.atom_cache:
            return self.atom_cache[key]
        lit = self._encode_atom(op, diff, k)
        self.atom_cache[key] = lit
        return lit

    def _encode_atom(self, op, diff, k) -> int:
        if not diff:
            val = (0 <= k) if op == "<=" else (0 == k)
            t = self.blaster.true_lit()
            return t if val else -t
        names = sorted(diff)
        if op == "<=" and len(diff) == 2 and sorted(diff.values()) == [-1, 1] \
                and all(n in self.order_vars for n in names):
            u = names[0] if diff[names[0]] == 1 else names[1]
            v = names[1] if diff[names[0]] == 1 else names[0]
            var = self.sat.new_var()
            self.theory.register(var, u, v, k)  # u - v <= k
            return var
        # split into two non-negative sides: pos <= / == neg + k
        pos = sorted((n, c) for n, c in diff.items() if c > 0)
        neg = sorted((n, -c) for n, c in diff.items() if c < 0)
        lhs_bits = self._side_bits(pos, 0)
        rhs_bits = self._side_bits(neg, k)
        if op == "<=":
            return self.blaster.le_lit(lhs_bits, rhs_bits)
        return self.blaster.eq_lit(lhs_bits, rhs_bits)

    # -- boolean skeleton

    def bool_lit(self, f) -> int:
        if isinstance(f, str):
            if f == "true":
                return self.blaster.true_lit()
            if f == "false":
                return -self.blaster.true_lit()
            if self.sc.sorts.get(f) == "Bool":
                if f not in self.boolmap:
                    self.boolmap[f] = self.sat.new_var()
                return self.boolmap[f]
            raise SolverOutputError(f"unknown boolean symbol {f!r}")
        head = f[0]
        if head == "not":
            return -self.bool_lit(f[1])
        if head == "=>":
            return self.bool_lit(["or", ["not", f[1]], f[2]])
        if head in ("<", "<=", ">", ">="):
            return self.atom_lit(head, f[1], f[2])
        if head == "=":
            if _sort_of(self.sc.sorts, f[1]) == "Int":
                return self.atom_lit("=", f[1], f[2])
            la, lb = self.bool_lit(f[1]), self.bool_lit(f[2])
            aux = self.sat.new_var()
            add = self.sat.add_clause
            add([-aux, -la, lb])
            add([-aux, la, -lb])
            add([aux, la, lb])
            add([aux, -la, -lb])
            return aux
        if head in ("and", "or"):
            lits = [self.bool_lit(a) for a in f[1:]]
            aux = self.sat.new_var()
            add = self.sat.add_clause
            if head == "and":
                for l in lits:
                    add([-aux, l])
                add([aux] + [-l for l in lits])
            else:
                add([-aux] + lits)
                for l in lits:
                    add([aux, -l])
            return aux
        raise SolverOutputError(f"unsupported connective {head!r}")

    def load(self) -> None:
        self.scan()
        for name, (lo, hi) in self.int_bounds.items():
            if lo > hi:
                self.sat.ok = False
                return
        for a in self.plain_asserts:
            self.sat.add_clause([self.bool_lit(a)])
        self.sat.theory = self.theory
        # decide the problem's named booleans (guards, selectors) before the
        # circuit auxiliaries: their assignments drive unit propagation
        # through the value circuits and the ordering theory
        for var in self.boolmap.values():
            self.sat.activity[var] = 1.0


def _signed_width(v: int) -> int:
    # two's complement width that represents v
    if v >= 0:
        return v.bit_length() + 1
    return (-v - 1).bit_length() + 1


# ---------------------------------------------------------------------------
# Driving and model extraction


def solve_script(text: str, bitwidth: int = DEFAULT_BITWIDTH):
    """Returns (status, model) with status "sat" / "unsat" / "unknown"."""
    sc = parse_script(text)
    tr = Translator(sc, bitwidth)
    tr.load()

    sat = tr.sat
    theory = tr.theory
    if not sat.ok:
        return "unsat", None
    if not sat.solve():
        return "unsat", None

    bools = {}
    for name, var in tr.boolmap.items():
        bools[name] = bool(sat.assign[var])
    ints = {}
    for name, bits in tr.int_bits.items():
        v = 0
        for i, b in enumerate(bits):
            if sat.assign[abs(b)] == (b > 0):
                v |= 1 << i
        if v >= 1 << (len(bits) - 1):
            v -= 1 << len(bits)
        ints[name] = v
    # order variables: potentials satisfy every active difference constraint;
    # shift them to non-negative values for presentation
    pots = theory.model()
    if pots:
        base = min(pots.values())
        for n in tr.order_vars:
            if n in tr.int_bounds and n not in tr.int_bits:
                ints[n] = pots.get(n, 0) - base
    for name, sort in sc.sorts.items():
        if sort == "Bool":
            bools.setdefault(name, False)
        else:
            lo, hi = tr.int_bounds.get(name, (0, 0))
            ints.setdefault(name, min(max(0, lo), hi))
    if not _verify(sc, bools, ints):
        return "unknown", None
    return "sat", (bools, ints)


def _verify(sc: Script, bools: dict, ints: dict) -> bool:
    def ev_term(t):
        if _is_int_literal(t):
            return int(t)
        if isinstance(t, str):
            return ints[t]
        head = t[0]
        if head == "+":
            return sum(ev_term(a) for a in t[1:])
        if head == "-":
            if len(t) == 2:
                return -ev_term(t[1])
            return ev_term(t[1]) - sum(ev_term(a) for a in t[2:])
        if head == "*":
            acc = 1
            for a in t[1:]:
                acc *= ev_term(a)
            return acc
        raise SolverOutputError(f"cannot evaluate {t!r}")

    def ev(f):
        if isinstance(f, str):
            if f == "true":
                return True
            if f == "false":
                return False
            return bools[f]
        head = f[0]
        if head == "not":
            return not ev(f[1])
        if head == "and":
            return all(ev(a) for a in f[1:])
        if head == "or":
            return any(ev(a) for a in f[1:])
        if head == "=>":
            return (not ev(f[1])) or ev(f[2])
        if head == "=":
            if _sort_of(sc.sorts, f[1]) == "Bool":
                return ev(f[1]) == ev(f[2])
            return ev_term(f[1]) == ev_term(f[2])
        if head == "<":
            return ev_term(f[1]) < ev_term(f[2])
        if head == "<=":
            return ev_term(f[1]) <= ev_term(f[2])
        if head == ">":
            return ev_term(f[1]) > ev_term(f[2])
        if head == ">=":
            return ev_term(f[1]) >= ev_term(f[2])
        raise SolverOutputError(f"cannot evaluate {f!r}")

    return all(ev(a) for a in sc.asserts)


def format_model(bools: dict, ints: dict) -> str:
    lines = ["(model"]
    for name in sorted(bools):
        lines.append(f"  (define-fun {name} () Bool {'true' if bools[name] else 'false'})")
    for name in sorted(ints):
        v = ints[name]
        val = str(v) if v >= 0 else f"(- {-v})"
        lines.append(f"  (define-fun {name} () Int {val})")
    lines.append(")")
    return "\n".join(lines)


def main(argv=None) -> int:
    args = sys.argv[1:] if argv is None else argv
    bitwidth = DEFAULT_BITWIDTH
    files = []
    i = 0
    while i < len(args):
        if args[i] == "--bitwidth":
            bitwidth = int(args[i + 1])
            i += 2
        elif args[i] in ("-h", "--help"):
            print(__doc__.strip())
            return 0
        else:
            files.append(args[i])
            i += 1
    if len(files) != 1:
        print("usage: wpo-solve [--bitwidth N] FILE.smt2", file=sys.stderr)
        return 2
    with open(files[0], "r", encoding="utf-8") as fh:
        text = fh.read()
    try:
        status, model = solve_script(text, bitwidth)
    except SolverOutputError as exc:
        print(f"(error \"{exc}\")")
        return 1
    print(status)
    if status == "sat" and model is not None:
        print(format_model(*model))
    return 0


if __name__ == "__main__":
    sys.exit(main())
