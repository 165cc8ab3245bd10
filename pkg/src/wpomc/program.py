"""Program representation shared by the two frontends, the SSA builder and the oracles.

A Program is a list of threads over named shared addresses plus a final-state
property.  Thread 0 is always the implicit main thread carrying one store per
shared declaration (the initialisation writes).  Shared addresses appear only
in Load/Store statements; every other expression is over thread-local
registers and constants.  Registers start at 0.
"""

from __future__ import annotations

from dataclasses import dataclass, field


# ---------------------------------------------------------------------------
# Expressions.  `Reg` refers to a thread-local register; inside property
# expressions `FinalReg`/`FinalShared` refer to end-of-execution values.

@dataclass(frozen=True)
class Lit:
    value: int


@dataclass(frozen=True)
class Reg:
    name: str


@dataclass(frozen=True)
class FinalReg:
    thread: str  # thread name as written in the source, e.g. "P0"
    reg: str


@dataclass(frozen=True)
class FinalShared:
    addr: str


@dataclass(frozen=True)
class UnOp:
    op: str  # "!" or "-"
    arg: "Expr"


@dataclass(frozen=True)
class BinOp:
    op: str  # + - * == != < <= > >= && ||
    lhs: "Expr"
    rhs: "Expr"


Expr = Lit | Reg | FinalReg | FinalShared | UnOp | BinOp

BOOL_OPS = {"==", "!=", "<", "<=", ">", ">=", "&&", "||"}


def expr_is_bool(e: Expr) -> bool:
    if isinstance(e, BinOp):
        return e.op in BOOL_OPS
    if isinstance(e, UnOp):
        return e.op == "!"
    return False


# ---------------------------------------------------------------------------
# Statements

@dataclass
class Assign:
    reg: str
    expr: Expr


@dataclass
class Load:
    reg: str
    addr: str


@dataclass
class Store:
    addr: str
    expr: Expr


@dataclass
class If:
    cond: Expr
    then: list
    els: list = field(default_factory=list)


@dataclass
class While:
    cond: Expr
    body: list
    bound: int | None = None  # @unwind annotation, None = take the CLI default


@dataclass
class Fence:
    kind: str  # mfence | sync | lwsync | isync


@dataclass
class Assume:
    """Internal: produced by loop unrolling (unwinding assumption)."""

    cond: Expr


Stmt = Assign | Load | Store | If | While | Fence | Assume

FENCE_KINDS = ("mfence", "sync", "lwsync", "isync")


@dataclass
class Thread:
    tid: int
    name: str
    body: list
    registers: list[str] = field(default_factory=list)


@dataclass
class Property:
    mode: str  # "exists" (litmus) | "assert" (MiniC)
    expr: Expr


@dataclass
class Program:
    name: str
    shared_decls: list[tuple[str, int]]
    threads: list[Thread]  # threads[0] is main
    property: Property

    def thread_by_name(self, name: str) -> Thread:
        for t in self.threads:
            if t.name == name:
                return t
        raise KeyError(name)

    def addresses(self) -> list[str]:
        return [a for a, _ in self.shared_decls]


# ---------------------------------------------------------------------------
# Structural helpers

def walk_statements(body):
    """Yield every statement in `body`, descending into branches and loops."""
    for s in body:
        yield s
        if isinstance(s, If):
            yield from walk_statements(s.then)
            yield from walk_statements(s.els)
        elif isinstance(s, While):
            yield from walk_statements(s.body)


def is_loop_free(p: Program) -> bool:
    return not any(
        isinstance(s, While) for t in p.threads for s in walk_statements(t.body)
    )


def count_shared_accesses(p: Program) -> int:
    """Loads plus stores across all threads (main's init writes included)."""
    n = 0
    for t in p.threads:
        for s in walk_statements(t.body):
            if isinstance(s, (Load, Store)):
                n += 1
    return n


def expr_registers(e: Expr) -> set[str]:
    if isinstance(e, Reg):
        return {e.name}
    if isinstance(e, UnOp):
        return expr_registers(e.arg)
    if isinstance(e, BinOp):
        return expr_registers(e.lhs) | expr_registers(e.rhs)
    return set()
