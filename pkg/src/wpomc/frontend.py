"""Parsers for the two input formats (litmus tests and MiniC) plus a printer.

Both parsers normalise shared-memory occurrences inside expressions into
explicit Load statements over fresh `_t<n>` temporaries, so that downstream
stages only ever see shared addresses in Load/Store statements.  Loop
conditions are reloaded at the end of each body so that unrolling re-evaluates
them.  Values are mathematical integers (the solver clamps them to a
configurable bit-width); addresses are scalar names only, arrays and
indirection are rejected.
"""

from __future__ import annotations

from .errors import ParseError, UnsupportedConstructError
from .program import (
    Assign,
    Assume,
    BinOp,
    Expr,
    FENCE_KINDS,
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

_PUNCT2 = ("&&", "||", "==", "!=", "<=", ">=", "/\\", "\\/")
_PUNCT1 = "{}();=<>+-*!:,@"


class _Tok:
    __slots__ = ("kind", "text", "line", "col")

    def __init__(self, kind, text, line, col):
        self.kind = kind  # "id" | "int" | "punct" | "eof"
        self.text = text
        self.line = line
        self.col = col

    def __repr__(self):
        return f"{self.kind}({self.text!r})"


def _tokenize(text: str) -> list[_Tok]:
    toks = []
    i, line, col = 0, 1, 1
    n = len(text)
    while i < n:
        c = text[i]
        if c == "\n":
            i += 1
            line += 1
            col = 1
            continue
        if c in " \t\r":
            i += 1
            col += 1
            continue
        if text.startswith("//", i):
            while i < n and text[i] != "\n":
                i += 1
            continue
        if c == "[" or c == "]":
            raise UnsupportedConstructError(
                "arrays and address indirection are not supported", line, col
            )
        two = text[i : i + 2]
        if two in _PUNCT2:
            toks.append(_Tok("punct", two, line, col))
            i += 2
            col += 2
            continue
        if c.isdigit():
            j = i
            while j < n and text[j].isdigit():
                j += 1
            toks.append(_Tok("int", text[i:j], line, col))
            col += j - i
            i = j
            continue
        if c.isalpha() or c == "_":
            j = i
            while j < n and (text[j].isalnum() or text[j] == "_"):
                j += 1
            toks.append(_Tok("id", text[i:j], line, col))
            col += j - i
            i = j
            continue
        if c in _PUNCT1:
            toks.append(_Tok("punct", c, line, col))
            i += 1
            col += 1
            continue
        raise ParseError(f"unexpected character {c!r}", line, col)
    toks.append(_Tok("eof", "", line, col))
    return toks


class _Parser:
    def __init__(self, text):
        self.toks = _tokenize(text)
        self.pos = 0

    def peek(self, ahead=0) -> _Tok:
        return self.toks[min(self.pos + ahead, len(self.toks) - 1)]

    def next(self) -> _Tok:
        t = self.toks[self.pos]
        if t.kind != "eof":
            self.pos += 1
        return t

    def at(self, text) -> bool:
        return self.peek().text == text and self.peek().kind != "eof"

    def accept(self, text) -> bool:
        if self.at(text):
            self.next()
            return True
        return False

    def expect(self, text) -> _Tok:
        t = self.peek()
        if t.text != text or t.kind == "eof":
            self.fail(f"expected {text!r}, found {t.text!r}")
        return self.next()

    def expect_id(self) -> _Tok:
        t = self.peek()
        if t.kind != "id":
            self.fail(f"expected identifier, found {t.text!r}")
        return self.next()

    def fail(self, msg):
        t = self.peek()
        raise ParseError(msg, t.line, t.col)


# ---------------------------------------------------------------------------
# Expression parsing (shared by both grammars)
#
# Precedence, loosest first:  ||  &&  (== != < <= > >=)  (+ -)  (*)  (unary ! -)

def _parse_expr(p: _Parser) -> Expr:
    return _parse_or(p)


def _parse_or(p):
    e = _parse_and(p)
    while p.at("||") or p.at("\\/"):
        p.next()
        e = BinOp("||", e, _parse_and(p))
    return e


def _parse_and(p):
    e = _parse_cmp(p)
    while p.at("&&") or p.at("/\\"):
        p.next()
        e = BinOp("&&", e, _parse_cmp(p))
    return e


def _parse_cmp(p):
    e = _parse_add(p)
    while p.peek().text in ("==", "!=", "<", "<=", ">", ">=") and p.peek().kind == "punct":
        op = p.next().text
        e = BinOp(op, e, _parse_add(p))
    return e


def _parse_add(p):
    e = _parse_mul(p)
    while p.peek().kind == "punct" and p.peek().text in ("+", "-"):
        op = p.next().text
        e = BinOp(op, e, _parse_mul(p))
    return e


def _parse_mul(p):
    e = _parse_unary(p)
    while p.at("*"):
        p.next()
        e = BinOp("*", e, _parse_unary(p))
    return e


def _parse_unary(p):
    if p.accept("!"):
        return UnOp("!", _parse_unary(p))
    if p.accept("-"):
        return UnOp("-", _parse_unary(p))
    t = p.peek()
    if t.kind == "int":
        p.next()
        return Lit(int(t.text))
    if t.kind == "id":
        p.next()
        return Reg(t.text)
    if p.accept("("):
        e = _parse_expr(p)
        p.expect(")")
        return e
    p.fail(f"expected expression, found {t.text!r}")


# ---------------------------------------------------------------------------
# Shared-access normalisation

class _ThreadCtx:
    def __init__(self, shared: set[str], registers: list[str], strict_regs: bool):
        self.shared = shared
        self.registers = registers
        self.strict_regs = strict_regs  # MiniC requires `int r;` declarations
        self._ntemp = 0

    def fresh_temp(self) -> str:
        name = f"_t{self._ntemp}"
        self._ntemp += 1
        if name not in self.registers:
            self.registers.append(name)
        return name

    def note_reg(self, name, tok=None, parser=None):
        if name in self.shared:
            return
        if name not in self.registers:
            if self.strict_regs:
                parser.fail(f"undeclared variable {name!r}")
            self.registers.append(name)


def _lower_expr(e: Expr, ctx: _ThreadCtx, loads: list) -> Expr:
    """Replace shared references by loads into fresh temporaries."""
    if isinstance(e, Reg):
        if e.name in ctx.shared:
            tmp = ctx.fresh_temp()
            loads.append(Load(tmp, e.name))
            return Reg(tmp)
        return e
    if isinstance(e, UnOp):
        return UnOp(e.op, _lower_expr(e.arg, ctx, loads))
    if isinstance(e, BinOp):
        lhs = _lower_expr(e.lhs, ctx, loads)
        rhs = _lower_expr(e.rhs, ctx, loads)
        return BinOp(e.op, lhs, rhs)
    return e


def _check_regs(e: Expr, ctx: _ThreadCtx, p: _Parser):
    if isinstance(e, Reg):
        ctx.note_reg(e.name, parser=p)
    elif isinstance(e, UnOp):
        _check_regs(e.arg, ctx, p)
    elif isinstance(e, BinOp):
        _check_regs(e.lhs, ctx, p)
        _check_regs(e.rhs, ctx, p)


# ---------------------------------------------------------------------------
# Thread-body statements (common statement forms of both grammars)

def _parse_stmt_into(p: _Parser, ctx: _ThreadCtx, out: list, allow_loops: bool):
    if p.at("fence"):
        p.next()
        p.expect("(")
        kind = p.expect_id().text
        if kind not in FENCE_KINDS:
            p.fail(f"unknown fence kind {kind!r}")
        p.expect(")")
        p.expect(";")
        out.append(Fence(kind))
        return

    if p.at("if"):
        p.next()
        p.expect("(")
        cond = _parse_expr(p)
        p.expect(")")
        loads = []
        cond = _lower_expr(cond, ctx, loads)
        _check_regs(cond, ctx, p)
        out.extend(loads)
        then, els = [], []
        p.expect("{")
        while not p.accept("}"):
            _parse_stmt_into(p, ctx, then, allow_loops)
        if p.accept("else"):
            p.expect("{")
            while not p.accept("}"):
                _parse_stmt_into(p, ctx, els, allow_loops)
        out.append(If(cond, then, els))
        return

    if p.at("while"):
        if not allow_loops:
            p.fail("loops are not allowed in litmus threads")
        p.next()
        p.expect("(")
        cond = _parse_expr(p)
        p.expect(")")
        bound = None
        if p.accept("@"):
            tok = p.expect_id()
            if tok.text != "unwind":
                p.fail(f"expected 'unwind', found {tok.text!r}")
            p.expect("(")
            b = p.peek()
            if b.kind != "int":
                p.fail("expected integer unwind bound")
            bound = int(p.next().text)
            p.expect(")")
        loads = []
        cond = _lower_expr(cond, ctx, loads)
        _check_regs(cond, ctx, p)
        body: list = []
        p.expect("{")
        while not p.accept("}"):
            _parse_stmt_into(p, ctx, body, allow_loops)
        # reload the condition's shared operands so each unrolled iteration
        # re-evaluates the exit test
        body.extend(Load(l.reg, l.addr) for l in loads)
        out.extend(loads)
        out.append(While(cond, body, bound))
        return

    if p.at("int"):
        p.next()
        name = p.expect_id().text
        p.expect(";")
        if name in ctx.shared:
            p.fail(f"{name!r} is a shared address, not a register")
        if name in ctx.registers:
            p.fail(f"duplicate register declaration {name!r}")
        ctx.registers.append(name)
        return

    # assignment:  <id> = <expr> ;
    lhs = p.expect_id()
    p.expect("=")
    rhs = _parse_expr(p)
    p.expect(";")
    if lhs.text not in ctx.shared and isinstance(rhs, Reg) and rhs.name in ctx.shared:
        # `r = x;` stays a plain load, no temporary
        ctx.note_reg(lhs.text, parser=p)
        out.append(Load(lhs.text, rhs.name))
        return
    loads = []
    rhs = _lower_expr(rhs, ctx, loads)
    _check_regs(rhs, ctx, p)
    out.extend(loads)
    if lhs.text in ctx.shared:
        out.append(Store(lhs.text, rhs))
    else:
        ctx.note_reg(lhs.text, parser=p)
        out.append(Assign(lhs.text, rhs))


# ---------------------------------------------------------------------------
# Litmus tests

def parse_litmus(text: str) -> Program:
    """Parse a litmus test into a Program with an exists-mode property."""
    p = _Parser(text)
    p.expect("test")
    name = p.expect_id().text

    p.expect("init")
    p.expect("{")
    decls: list[tuple[str, int]] = []
    seen = set()
    while not p.accept("}"):
        addr = p.expect_id().text
        p.expect("=")
        neg = p.accept("-")
        v = p.peek()
        if v.kind != "int":
            p.fail("expected integer initial value")
        val = int(p.next().text) * (-1 if neg else 1)
        p.expect(";")
        if addr in seen:
            p.fail(f"duplicate shared declaration {addr!r}")
        seen.add(addr)
        decls.append((addr, val))

    shared = {a for a, _ in decls}
    main = Thread(0, "main", [Store(a, Lit(v)) for a, v in decls])
    threads = [main]
    while p.at("thread"):
        p.next()
        tname = p.expect_id().text
        if any(t.name == tname for t in threads):
            p.fail(f"duplicate thread name {tname!r}")
        ctx = _ThreadCtx(shared, [], strict_regs=False)
        body: list = []
        p.expect("{")
        while not p.accept("}"):
            _parse_stmt_into(p, ctx, body, allow_loops=False)
        threads.append(Thread(len(threads), tname, body, ctx.registers))

    p.expect("exists")
    p.expect("(")
    expr = _parse_exists_cond(p, threads, shared)
    p.expect(")")
    if p.peek().kind != "eof":
        p.fail(f"trailing input {p.peek().text!r}")
    return Program(name, decls, threads, Property("exists", expr))


def _parse_exists_cond(p: _Parser, threads, shared) -> Expr:
    seen_regs: set[tuple[str, str]] = set()

    def atom():
        if p.accept("("):
            e = disj()
            p.expect(")")
            return e
        t = p.expect_id()
        if p.accept(":"):
            reg = p.expect_id().text
            if not any(th.name == t.text for th in threads):
                p.fail(f"unknown thread {t.text!r} in final condition")
            if (t.text, reg) in seen_regs:
                p.fail(f"duplicate register {t.text}:{reg} in final condition")
            seen_regs.add((t.text, reg))
            ref = FinalReg(t.text, reg)
        else:
            if t.text not in shared:
                p.fail(f"undeclared address {t.text!r} in final condition")
            ref = FinalShared(t.text)
        p.expect("=")
        neg = p.accept("-")
        v = p.peek()
        if v.kind != "int":
            p.fail("expected integer in final condition")
        val = int(p.next().text) * (-1 if neg else 1)
        return BinOp("==", ref, Lit(val))

    def conj():
        e = atom()
        while p.accept("/\\"):
            e = BinOp("&&", e, atom())
        return e

    def disj():
        e = conj()
        while p.accept("\\/"):
            e = BinOp("||", e, conj())
        return e

    return disj()


# ---------------------------------------------------------------------------
# MiniC

def parse_minic(text: str) -> Program:
    """Parse a MiniC program into a Program with an assert-mode property."""
    p = _Parser(text)
    decls: list[tuple[str, int]] = []
    seen = set()
    while p.at("shared"):
        p.next()
        p.expect("int")
        addr = p.expect_id().text
        p.expect("=")
        neg = p.accept("-")
        v = p.peek()
        if v.kind != "int":
            p.fail("expected integer initial value")
        val = int(p.next().text) * (-1 if neg else 1)
        p.expect(";")
        if addr in seen:
            p.fail(f"duplicate shared declaration {addr!r}")
        seen.add(addr)
        decls.append((addr, val))

    shared = {a for a, _ in decls}
    main = Thread(0, "main", [Store(a, Lit(v)) for a, v in decls])
    threads = [main]
    while p.at("thread"):
        p.next()
        ctx = _ThreadCtx(shared, [], strict_regs=True)
        body: list = []
        p.expect("{")
        while not p.accept("}"):
            _parse_stmt_into(p, ctx, body, allow_loops=True)
        tid = len(threads)
        threads.append(Thread(tid, f"t{tid}", body, ctx.registers))

    p.expect("assert")
    p.expect("(")
    raw = _parse_expr(p)
    p.expect(")")
    p.expect(";")
    if p.peek().kind != "eof":
        p.fail(f"trailing input {p.peek().text!r}")
    expr = _finalize_assert_expr(raw, shared, p)
    return Program("minic", decls, threads, Property("assert", expr))


def _finalize_assert_expr(e: Expr, shared, p) -> Expr:
    """The trailing assert ranges over final shared values and constants."""
    if isinstance(e, Reg):
        if e.name not in shared:
            p.fail(f"assert refers to undeclared address {e.name!r}")
        return FinalShared(e.name)
    if isinstance(e, UnOp):
        return UnOp(e.op, _finalize_assert_expr(e.arg, shared, p))
    if isinstance(e, BinOp):
        return BinOp(
            e.op,
            _finalize_assert_expr(e.lhs, shared, p),
            _finalize_assert_expr(e.rhs, shared, p),
        )
    return e


def parse_file(path: str, text: str) -> Program:
    if path.endswith(".litmus"):
        prog = parse_litmus(text)
        prog.name = prog.name  # name from the test header
        return prog
    if path.endswith(".mc"):
        return parse_minic(text)
    # sniff: litmus sources start with the `test` keyword
    stripped = text.lstrip()
    if stripped.startswith("test"):
        return parse_litmus(text)
    return parse_minic(text)


# ---------------------------------------------------------------------------
# Printer (round-trips through the matching parser)

_PREC = {"||": 1, "&&": 2, "==": 3, "!=": 3, "<": 3, "<=": 3, ">": 3, ">=": 3,
         "+": 4, "-": 4, "*": 5}


def format_expr(e: Expr, parent_prec=0, litmus=False) -> str:
    if isinstance(e, Lit):
        # negative literals only occur in final-condition atoms, where the
        # grammar accepts a bare minus sign
        return str(e.value)
    if isinstance(e, Reg):
        return e.name
    if isinstance(e, FinalReg):
        return f"{e.thread}:{e.reg}"
    if isinstance(e, FinalShared):
        return e.addr
    if isinstance(e, UnOp):
        return f"{e.op}{format_expr(e.arg, 6, litmus)}"
    if isinstance(e, BinOp):
        op = e.op
        if litmus:
            op = {"&&": "/\\", "||": "\\/", "==": "="}.get(op, op)
        prec = _PREC[e.op]
        s = f"{format_expr(e.lhs, prec, litmus)} {op} {format_expr(e.rhs, prec + 1, litmus)}"
        return f"({s})" if prec < parent_prec else s
    raise TypeError(e)


def _format_body(body, indent) -> list[str]:
    pad = "  " * indent
    lines = []
    for s in body:
        if isinstance(s, Load):
            lines.append(f"{pad}{s.reg} = {s.addr};")
        elif isinstance(s, Store):
            lines.append(f"{pad}{s.addr} = {format_expr(s.expr)};")
        elif isinstance(s, Assign):
            lines.append(f"{pad}{s.reg} = {format_expr(s.expr)};")
        elif isinstance(s, Fence):
            lines.append(f"{pad}fence({s.kind});")
        elif isinstance(s, If):
            lines.append(f"{pad}if ({format_expr(s.cond)}) {{")
            lines.extend(_format_body(s.then, indent + 1))
            if s.els:
                lines.append(f"{pad}}} else {{")
                lines.extend(_format_body(s.els, indent + 1))
            lines.append(f"{pad}}}")
        elif isinstance(s, While):
            # reload loads appended by the parser print as ordinary loads, and
            # re-parsing adds none (the printed condition has no shared refs),
            # so the round trip is exact
            ann = f" @unwind({s.bound})" if s.bound is not None else ""
            lines.append(f"{pad}while ({format_expr(s.cond)}){ann} {{")
            lines.extend(_format_body(s.body, indent + 1))
            lines.append(f"{pad}}}")
        elif isinstance(s, Assume):
            lines.append(f"{pad}// assume {format_expr(s.cond)}")
        else:
            raise TypeError(s)
    return lines


def format_program(p: Program) -> str:
    """Pretty-print `p` in its native grammar (litmus or MiniC)."""
    lines = []
    if p.property.mode == "exists":
        lines.append(f"test {p.name}")
        init = " ".join(f"{a}={v};" for a, v in p.shared_decls)
        lines.append(f"init {{ {init} }}")
        for t in p.threads[1:]:
            lines.append(f"thread {t.name} {{")
            lines.extend(_format_body(t.body, 1))
            lines.append("}")
        lines.append(f"exists ({format_expr(p.property.expr, litmus=True)})")
    else:
        for a, v in p.shared_decls:
            lines.append(f"shared int {a} = {v};")
        for t in p.threads[1:]:
            lines.append("thread {")
            for r in t.registers:
                lines.append(f"  int {r};")
            lines.extend(_format_body(t.body, 1))
            lines.append("}")
        lines.append(f"assert({format_expr(p.property.expr)});")
    return "\n".join(lines) + "\n"
