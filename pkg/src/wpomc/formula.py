"""Constraint IR: boolean/integer terms, clock families, SMT-LIB2 emission.

Formulas are immutable trees.  Well-sortedness is by construction: boolean
connectives take formulas, comparisons take integer terms.  Clock variables
are integer symbols grouped into independent families (GHB, UNIPROC, THIN);
the same pair of events gets one clock constraint per family it participates
in, over that family's variables only.
"""

from __future__ import annotations

from dataclasses import dataclass

from .errors import EncodingError

# ---------------------------------------------------------------------------
# Terms (integer sort)


@dataclass(frozen=True)
class IntVar:
    name: str


@dataclass(frozen=True)
class IntConst:
    value: int


@dataclass(frozen=True)
class Add:
    args: tuple


@dataclass(frozen=True)
class Sub:
    lhs: object
    rhs: object


@dataclass(frozen=True)
class Mul:
    coef: int
    term: object


Term = IntVar | IntConst | Add | Sub | Mul


# ---------------------------------------------------------------------------
# Formulas (boolean sort)


@dataclass(frozen=True)
class BoolConst:
    value: bool


TRUE = BoolConst(True)
FALSE = BoolConst(False)


@dataclass(frozen=True)
class BoolVar:
    name: str


@dataclass(frozen=True)
class Not:
    arg: object


@dataclass(frozen=True)
class And:
    args: tuple


@dataclass(frozen=True)
class Or:
    args: tuple


@dataclass(frozen=True)
class Implies:
    lhs: object
    rhs: object


@dataclass(frozen=True)
class Iff:
    lhs: object
    rhs: object


@dataclass(frozen=True)
class Cmp:
    op: str  # "=" "<" "<=" ">" ">="
    lhs: Term
    rhs: Term


Formula = BoolConst | BoolVar | Not | And | Or | Implies | Iff | Cmp


# ---------------------------------------------------------------------------
# Smart constructors (flatten and fold constants)


def fand(*fs) -> Formula:
    flat = []
    for f in fs:
        if f == TRUE:
            continue
        if f == FALSE:
            return FALSE
        if isinstance(f, And):
            flat.extend(f.args)
        else:
            flat.append(f)
    if not flat:
        return TRUE
    if len(flat) == 1:
        return flat[0]
    return And(tuple(flat))


def for_(*fs) -> Formula:
    flat = []
    for f in fs:
        if f == FALSE:
            continue
        if f == TRUE:
            return TRUE
        if isinstance(f, Or):
            flat.extend(f.args)
        else:
            flat.append(f)
    if not flat:
        return FALSE
    if len(flat) == 1:
        return flat[0]
    return Or(tuple(flat))


def fnot(f) -> Formula:
    if f == TRUE:
        return FALSE
    if f == FALSE:
        return TRUE
    if isinstance(f, Not):
        return f.arg
    return Not(f)


def fimplies(lhs, rhs) -> Formula:
    if lhs == TRUE:
        return rhs
    if lhs == FALSE or rhs == TRUE:
        return TRUE
    if rhs == FALSE:
        return fnot(lhs)
    return Implies(lhs, rhs)


# ---------------------------------------------------------------------------
# Guards: cubes over branch literals, frozenset of (name, polarity)

Guard = frozenset

TRUE_GUARD: Guard = frozenset()


def guard_formula(g: Guard) -> Formula:
    lits = [BoolVar(n) if pol else Not(BoolVar(n)) for n, pol in sorted(g)]
    return fand(*lits)


def guard_consistent(g: Guard) -> bool:
    names = [n for n, _ in g]
    return len(names) == len(set(names))


# ---------------------------------------------------------------------------
# Clock families

GHB = "GHB"
UNIPROC = "UNIPROC"
THIN = "THIN"

_FAMILY_PREFIX = {GHB: "clkg", UNIPROC: "clku", THIN: "clkt"}


@dataclass
class ClockFamily:
    """One independent set of clock variables, one (or two) per event.

    Dual-clock events (lwsync fences in the GHB family) own a read-side and a
    write-side variable; everything else has a single variable reported for
    either side.
    """

    family: str
    variables: dict  # eid -> (read-side name, write-side name)

    def __init__(self, family: str):
        self.family = family
        self.variables = {}

    def declare(self, eid: int, dual: bool = False) -> None:
        base = f"{_FAMILY_PREFIX[self.family]}_e{eid}"
        if dual:
            self.variables[eid] = (base + "_r", base + "_w")
        else:
            self.variables[eid] = (base, base)

    def var(self, eid: int, side: str = "r") -> IntVar:
        pair = self.variables[eid]
        return IntVar(pair[0] if side == "r" else pair[1])

    def names(self) -> list[str]:
        out = []
        for r, w in self.variables.values():
            out.append(r)
            if w != r:
                out.append(w)
        return out


def clock_constraint(x, y, family: ClockFamily, side_x: str = "r",
                     side_y: str = "r", extra_premise: Formula = TRUE) -> Formula:
    """Guarded strict-before constraint between two events' clocks.

    Returns (premise ∧ g(x) ∧ g(y)) => clk_x < clk_y over the family's
    variables; the guards simplify away when trivially true.
    """
    if x.eid == y.eid:
        raise EncodingError(f"clock constraint over a single event e{x.eid}")
    premise = fand(extra_premise, guard_formula(x.guard), guard_formula(y.guard))
    lt = Cmp("<", family.var(x.eid, side_x), family.var(y.eid, side_y))
    return fimplies(premise, lt)


# ---------------------------------------------------------------------------
# Queries and SMT-LIB2 emission


@dataclass
class Query:
    asserts: list
    name: str = "query"

    def conjoined(self) -> Formula:
        return fand(*self.asserts)


def collect_symbols(f, table: dict) -> None:
    if isinstance(f, (BoolConst, IntConst)):
        return
    if isinstance(f, BoolVar):
        _put(table, f.name, "Bool")
        return
    if isinstance(f, IntVar):
        _put(table, f.name, "Int")
        return
    if isinstance(f, Not):
        collect_symbols(f.arg, table)
    elif isinstance(f, (And, Or, Add)):
        for a in f.args:
            collect_symbols(a, table)
    elif isinstance(f, (Implies, Iff, Sub)):
        collect_symbols(f.lhs, table)
        collect_symbols(f.rhs, table)
    elif isinstance(f, Cmp):
        collect_symbols(f.lhs, table)
        collect_symbols(f.rhs, table)
    elif isinstance(f, Mul):
        collect_symbols(f.term, table)
    else:
        raise EncodingError(f"unknown formula node {f!r}")


def _put(table, name, sort):
    prev = table.get(name)
    if prev is not None and prev != sort:
        raise EncodingError(f"symbol {name} used as both {prev} and {sort}")
    table[name] = sort


def sexpr(f) -> str:
    if isinstance(f, BoolConst):
        return "true" if f.value else "false"
    if isinstance(f, (BoolVar, IntVar)):
        return f.name
    if isinstance(f, IntConst):
        return str(f.value) if f.value >= 0 else f"(- {-f.value})"
    if isinstance(f, Not):
        return f"(not {sexpr(f.arg)})"
    if isinstance(f, And):
        return "(and " + " ".join(sexpr(a) for a in f.args) + ")"
    if isinstance(f, Or):
        return "(or " + " ".join(sexpr(a) for a in f.args) + ")"
    if isinstance(f, Implies):
        return f"(=> {sexpr(f.lhs)} {sexpr(f.rhs)})"
    if isinstance(f, Iff):
        return f"(= {sexpr(f.lhs)} {sexpr(f.rhs)})"
    if isinstance(f, Cmp):
        return f"({f.op} {sexpr(f.lhs)} {sexpr(f.rhs)})"
    if isinstance(f, Add):
        return "(+ " + " ".join(sexpr(a) for a in f.args) + ")"
    if isinstance(f, Sub):
        return f"(- {sexpr(f.lhs)} {sexpr(f.rhs)})"
    if isinstance(f, Mul):
        return f"(* {sexpr(IntConst(f.coef))} {sexpr(f.term)})"
    raise EncodingError(f"cannot print {f!r}")


def emit_smtlib(q: Query) -> str:
    """SMT-LIB2 script: QF_LIA, models on, one assert per top-level conjunct.

    Byte-stable for identical queries: declarations are sorted by name and
    asserts keep their construction order.
    """
    table: dict = {}
    for a in q.asserts:
        collect_symbols(a, table)
    lines = [
        "(set-logic QF_LIA)",
        "(set-option :produce-models true)",
    ]
    for name in sorted(table):
        lines.append(f"(declare-fun {name} () {table[name]})")
    for a in q.asserts:
        if a == TRUE:
            continue
        lines.append(f"(assert {sexpr(a)})")
    lines.append("(check-sat)")
    lines.append("(get-model)")
    return "\n".join(lines) + "\n"


# ---------------------------------------------------------------------------
# Exact evaluation (used to validate witnesses and solver models)


def eval_term(t, ints: dict) -> int:
    if isinstance(t, IntConst):
        return t.value
    if isinstance(t, IntVar):
        return ints[t.name]
    if isinstance(t, Add):
        return sum(eval_term(a, ints) for a in t.args)
    if isinstance(t, Sub):
        return eval_term(t.lhs, ints) - eval_term(t.rhs, ints)
    if isinstance(t, Mul):
        return t.coef * eval_term(t.term, ints)
    raise EncodingError(f"cannot evaluate term {t!r}")


_CMP = {
    "=": lambda a, b: a == b,
    "<": lambda a, b: a < b,
    "<=": lambda a, b: a <= b,
    ">": lambda a, b: a > b,
    ">=": lambda a, b: a >= b,
}


def eval_formula(f, bools: dict, ints: dict) -> bool:
    if isinstance(f, BoolConst):
        return f.value
    if isinstance(f, BoolVar):
        return bools[f.name]
    if isinstance(f, Not):
        return not eval_formula(f.arg, bools, ints)
    if isinstance(f, And):
        return all(eval_formula(a, bools, ints) for a in f.args)
    if isinstance(f, Or):
        return any(eval_formula(a, bools, ints) for a in f.args)
    if isinstance(f, Implies):
        return (not eval_formula(f.lhs, bools, ints)) or eval_formula(f.rhs, bools, ints)
    if isinstance(f, Iff):
        return eval_formula(f.lhs, bools, ints) == eval_formula(f.rhs, bools, ints)
    if isinstance(f, Cmp):
        return _CMP[f.op](eval_term(f.lhs, ints), eval_term(f.rhs, ints))
    raise EncodingError(f"cannot evaluate {f!r}")
