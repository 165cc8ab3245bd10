"""Concretise solver valuations into executions and render counterexamples."""

from __future__ import annotations

import json
from dataclasses import dataclass

from .errors import WitnessError
from .formula import GHB
from .oracle import ConcreteExecution
from .solver import Valuation
from .ssa import Ses, SsaFormula


@dataclass
class WitnessReport:
    execution: ConcreteExecution
    ordering: list  # event ids sorted by GHB clock value (ties by id)
    clocks: dict  # eid -> clock value
    property_assignment: dict  # symbol -> final value


def _guard_true(cube, val: Valuation) -> bool:
    return all(val.bool(name) == pol for name, pol in cube)


def concretise(ses: Ses, val: Valuation) -> ConcreteExecution:
    """Execution induced by a satisfying valuation: events whose guards hold,
    their integer values, rf from the true selectors, ws from the selector
    booleans and program order."""
    present = [e.eid for e in ses.events if _guard_true(e.guard, val)]
    pset = set(present)
    values = {}
    for eid in present:
        e = ses.events[eid]
        if e.is_mem():
            values[eid] = val.int(e.value)

    by_addr = ses.by_address()
    rf = {}
    for addr, (reads, writes) in sorted(by_addr.items()):
        for r in reads:
            if r.eid not in pset:
                continue
            srcs = [
                w.eid for w in writes
                if val.bools.get(f"s_{w.eid}_{r.eid}", False)
                and not ses.po_before(r.eid, w.eid)
            ]
            srcs = [w for w in srcs if w in pset]
            if len(srcs) != 1:
                raise WitnessError(
                    f"read e{r.eid} has {len(srcs)} read-from sources in the model")
            rf[r.eid] = srcs[0]

    ws = {}
    for addr, (_, writes) in sorted(by_addr.items()):
        live = [w for w in writes if w.eid in pset]
        order = _serialise(ses, live, val)
        ws[addr] = [w.eid for w in order]

    return ConcreteExecution(present, values, rf, ws,
                             {n: v for n, v in sorted(val.bools.items())
                              if not n.startswith(("s_", "ws_", "fin_"))})


def _serialise(ses: Ses, writes: list, val: Valuation) -> list:
    """Topological order of same-address writes under the model's choices."""

    def before(w1, w2) -> bool:
        if ses.po_before(w1.eid, w2.eid):
            return True
        if ses.po_before(w2.eid, w1.eid):
            return False
        lo, hi = min(w1.eid, w2.eid), max(w1.eid, w2.eid)
        name = f"ws_{lo}_{hi}"
        if name not in val.bools:
            raise WitnessError(
                f"no serialisation decision for writes e{w1.eid}, e{w2.eid}")
        b = val.bools[name]
        return b if w1.eid == lo else not b

    order = []
    pending = list(writes)
    while pending:
        head = None
        for cand in pending:
            if all(cand is o or not before(o, cand) for o in pending):
                head = cand
                break
        if head is None:
            raise WitnessError("cyclic write serialisation in the model")
        order.append(head)
        pending.remove(head)
    return order


def make_report(ses: Ses, ssa: SsaFormula, val: Valuation) -> WitnessReport:
    exe = concretise(ses, val)
    clocks = {}
    for eid in exe.present:
        e = ses.events[eid]
        key = f"clkg_e{eid}"
        if key in val.ints:
            clocks[eid] = val.int(key)
        elif f"clkg_e{eid}_r" in val.ints:
            clocks[eid] = val.int(f"clkg_e{eid}_r")
    ordering = sorted(exe.present, key=lambda i: (clocks.get(i, 0), i))

    prop = {}
    for addr in ssa.final_shared_addrs:
        sym = f"fin_{addr}"
        if sym in val.ints:
            prop[addr] = val.int(sym)
    for tid, regs in sorted(ssa.final_regs.items()):
        for reg, sym in sorted(regs.items()):
            if sym in val.ints:
                prop[f"t{tid}:{reg}"] = val.int(sym)
    return WitnessReport(exe, ordering, clocks, prop)


def render(w: WitnessReport, ses: Ses, fmt: str = "text") -> str:
    if fmt == "json":
        return json.dumps(_as_dict(w, ses), indent=2, sort_keys=True)
    if not w.execution.present:
        return "no events\n"
    lines = ["events in clock order (clock values induce a partial order;"
             " ties are shown in event-id order):"]
    for eid in w.ordering:
        e = ses.events[eid]
        if e.kind == "F":
            desc = f"fence({e.fence})"
        else:
            op = "R" if e.kind == "R" else "W"
            desc = f"{op} {e.addr}={w.execution.values.get(eid)}"
        clk = w.clocks.get(eid)
        clks = f" clk={clk}" if clk is not None else ""
        lines.append(f"  e{eid}  t{e.tid}  {desc}{clks}")
    rf = ", ".join(f"e{wr} -> e{r}" for r, wr in sorted(w.execution.rf.items()))
    lines.append(f"rf: {rf or '(none)'}")
    ws = "; ".join(
        f"{addr}: " + " -> ".join(f"e{i}" for i in order)
        for addr, order in sorted(w.execution.ws.items())
    )
    lines.append(f"ws: {ws}")
    fr = ", ".join(f"e{r} -> e{wr}" for r, wr in sorted(w.execution.fr()))
    lines.append(f"fr: {fr or '(none)'}")
    if w.property_assignment:
        vals = ", ".join(f"{k}={v}" for k, v in sorted(w.property_assignment.items()))
        lines.append(f"final: {vals}")
    return "\n".join(lines) + "\n"


def _as_dict(w: WitnessReport, ses: Ses) -> dict:
    events = []
    for eid in w.ordering:
        e = ses.events[eid]
        events.append({
            "id": eid,
            "tid": e.tid,
            "kind": e.kind,
            "addr": e.addr,
            "value": w.execution.values.get(eid),
            "fence": e.fence,
            "clock": w.clocks.get(eid),
        })
    return {
        "events": events,
        "rf": sorted([[wr, r] for r, wr in w.execution.rf.items()]),
        "ws": {addr: list(order) for addr, order in sorted(w.execution.ws.items())},
        "fr": sorted([[r, wr] for r, wr in w.execution.fr()]),
        "final": dict(sorted(w.property_assignment.items())),
        "note": "clock values induce a partial order; ties are id-ordered",
    }
