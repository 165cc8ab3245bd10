"""Declarative catalogue of memory architectures.

An architecture is a table: which program-order direction pairs stay ordered
(possibly only when backed by a dependency), whether internal/external
read-from is safe (store atomicity), and what each fence kind orders.  The
encoder's not_relax and the enumerative oracle consult the same table, so a
disagreement between them indicates an encoding bug, not a model divergence.

Same-address program-order pairs other than write-read are kept on every
model: the per-address coherence axiom forces the matching write-serialisation
or from-read edge, both of which are unconditionally part of the consensus.
Write-read pairs to the same address are kept only where internal read-from
is safe (no store forwarding).
"""

from __future__ import annotations

from dataclasses import dataclass

from .errors import EncodingError
from .formula import Guard

SC = "sc"
TSO = "tso"
PSO = "pso"
RMO = "rmo"
POWER = "power"

MODEL_NAMES = (SC, TSO, PSO, RMO, POWER)

DIRECTIONS = ("WW", "WR", "RW", "RR")


@dataclass(frozen=True)
class FenceSpec:
    kind: str
    orders: frozenset  # direction pairs made safe across the fence
    a_cumulative: bool
    b_cumulative: bool
    via_ppo: bool = False  # isync: handled by the ppo walk, not the fence pass

    @property
    def dual_clock(self) -> bool:
        # a fence that does not order write-read pairs needs split clocks
        return "WR" not in self.orders


_ALL = frozenset(DIRECTIONS)
_NO_WR = frozenset(("WW", "RW", "RR"))

_FENCES = {
    "mfence": FenceSpec("mfence", _ALL, True, True),
    "sync": FenceSpec("sync", _ALL, True, True),
    "lwsync": FenceSpec("lwsync", _NO_WR, True, True),
    "isync": FenceSpec("isync", frozenset(), False, False, via_ppo=True),
}

_FENCES_NONCUMULATIVE_LWSYNC = dict(_FENCES)
_FENCES_NONCUMULATIVE_LWSYNC["lwsync"] = FenceSpec("lwsync", _NO_WR, False, False)


@dataclass(frozen=True)
class Architecture:
    name: str
    # direction -> rule: "always" | "never" | "dep" (data or control) |
    # "power" (data always; control to writes; control+isync to reads)
    ppo_table: dict
    rfi_safe: bool
    rfe_safe: bool
    fences: dict  # kind -> FenceSpec

    def fence(self, kind: str) -> FenceSpec:
        return self.fences[kind]


def architecture(name: str, lwsync_cumulative: bool = True) -> Architecture:
    """Look up an architecture by name.

    `lwsync_cumulative=False` drops lwsync's A/B-cumulativity constraints
    (configuration point; the default keeps both).
    """
    fences = _FENCES if lwsync_cumulative else _FENCES_NONCUMULATIVE_LWSYNC
    n = name.lower()
    if n == SC:
        table = {d: "always" for d in DIRECTIONS}
        return Architecture(SC, table, rfi_safe=True, rfe_safe=True, fences=fences)
    if n == TSO:
        table = {"WW": "always", "WR": "never", "RW": "always", "RR": "always"}
        return Architecture(TSO, table, rfi_safe=False, rfe_safe=True, fences=fences)
    if n == PSO:
        table = {"WW": "never", "WR": "never", "RW": "always", "RR": "always"}
        return Architecture(PSO, table, rfi_safe=False, rfe_safe=True, fences=fences)
    if n == RMO:
        table = {"WW": "never", "WR": "never", "RW": "dep", "RR": "dep"}
        return Architecture(RMO, table, rfi_safe=False, rfe_safe=True, fences=fences)
    if n == POWER:
        table = {"WW": "never", "WR": "never", "RW": "power", "RR": "power"}
        return Architecture(POWER, table, rfi_safe=False, rfe_safe=False, fences=fences)
    raise EncodingError(f"unknown architecture {name!r}")


def grf_external_safe(a: Architecture, w, r) -> bool:
    """Whether a cross-thread read-from pair joins the consensus directly.

    Internal pairs never do; they are handled by the ppo walk where internal
    read-from is safe.
    """
    return a.rfe_safe and w.tid != r.tid


# ---------------------------------------------------------------------------
# The keep rule shared by the symbolic not_relax and the concrete oracle.
#
# `dep_kinds` are the dependency kinds backing (e1, e2); `isync_guards` are
# the guards of isync fences interposed between the governing branch and e2
# (only consulted by the "power" rule for control-dependent reads).


def pair_keep_condition(a: Architecture, kind1: str, kind2: str, same_addr: bool,
                        dep_kinds: frozenset, has_isync: bool) -> str:
    """Returns "yes", "no", or "isync" (kept only through an isync fence)."""
    direction = kind1 + kind2
    if same_addr:
        if direction in ("WW", "RW"):
            return "yes"  # internal ws / internal fr, always safe
        if direction == "WR" and a.rfi_safe:
            return "yes"
        # same-address RR (and WR under store forwarding) fall through
    rule = a.ppo_table[direction]
    if rule == "always":
        return "yes"
    if rule == "never":
        return "no"
    if rule == "dep":
        return "yes" if dep_kinds else "no"
    if rule == "power":
        if "data" in dep_kinds:
            return "yes"
        if "control" in dep_kinds:
            if kind2 == "W":
                return "yes"
            if has_isync:
                return "isync"
        return "no"
    raise EncodingError(f"bad ppo rule {rule!r}")


def not_relax(a: Architecture, ses, e1, e2) -> frozenset:
    """Condition under which the po pair (e1, e2) is not relaxed on `a`.

    Returns a DNF over branch-literal cubes: empty set means relaxed
    (FALSE); otherwise each cube conjoins both guards, plus the guard of an
    interposed isync when the pair is kept only through one.
    """
    assert e1.tid == e2.tid
    deps = [d for d in ses.dp if d.src == e1.eid and d.dst == e2.eid]
    dep_kinds = frozenset(d.kind for d in deps)
    isyncs = sorted({i for d in deps if d.kind == "control" for i in d.isyncs})

    verdict = pair_keep_condition(
        a, e1.kind, e2.kind, e1.addr is not None and e1.addr == e2.addr,
        dep_kinds, bool(isyncs),
    )
    if verdict == "no":
        return frozenset()
    base: Guard = frozenset(e1.guard | e2.guard)
    if verdict == "yes":
        cubes = [base]
    else:  # kept via isync: one cube per qualifying fence
        cubes = [frozenset(base | ses.events[i].guard) for i in isyncs]
    return frozenset(c for c in cubes if _consistent(c))


def _consistent(cube) -> bool:
    names = [n for n, _ in cube]
    return len(names) == len(set(names))
