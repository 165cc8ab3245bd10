"""Minimal S-expression reader for SMT-LIB2 scripts and solver models."""

from __future__ import annotations

from .errors import SolverOutputError


def tokenize(text: str):
    toks = []
    i, n = 0, len(text)
    while i < n:
        c = text[i]
        if c in " \t\r\n":
            i += 1
            continue
        if c == ";":
            while i < n and text[i] != "\n":
                i += 1
            continue
        if c in "()":
            toks.append(c)
            i += 1
            continue
        if c == "|":  # quoted symbol
            j = text.find("|", i + 1)
            if j < 0:
                raise SolverOutputError("unterminated quoted symbol")
            toks.append(text[i + 1 : j])
            i = j + 1
            continue
        if c == '"':
            j = i + 1
            while j < n and text[j] != '"':
                j += 1
            toks.append(text[i : j + 1])
            i = j + 1
            continue
        j = i
        while j < n and text[j] not in " \t\r\n();|":
            j += 1
        toks.append(text[i:j])
        i = j
    return toks


def parse_all(text: str) -> list:
    """Parse every top-level S-expression; atoms stay strings."""
    toks = tokenize(text)
    out = []
    pos = 0

    def read():
        nonlocal pos
        if pos >= len(toks):
            raise SolverOutputError("unexpected end of input")
        t = toks[pos]
        pos += 1
        if t == "(":
            items = []
            while pos < len(toks) and toks[pos] != ")":
                items.append(read())
            if pos >= len(toks):
                raise SolverOutputError("missing closing parenthesis")
            pos += 1  # skip ")"
            return items
        if t == ")":
            raise SolverOutputError("unbalanced parenthesis")
        return t

    while pos < len(toks):
        out.append(read())
    return out
