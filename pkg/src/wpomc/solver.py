"""External solver invocation: write SMT-LIB2, run `<solver> <file>`, parse.

The solver command comes from the --solver flag, the WPO_SOLVER environment
variable, or defaults to the bundled `wpo-solve` reference solver (falling
back to `python -m wpomc.smtsolver` when the console script is not on PATH).
Any SMT-LIB2 solver that prints `sat`/`unsat` followed by a define-fun model
works, e.g. z3 or cvc5.
"""

from __future__ import annotations

import os
import shlex
import shutil
import subprocess
import sys
import tempfile
from dataclasses import dataclass, field

from .errors import SolverNotFoundError, SolverOutputError, SolverTimeoutError
from .formula import Query, emit_smtlib
from .sexp import parse_all

DEFAULT_TIMEOUT = 300.0


@dataclass
class Valuation:
    bools: dict
    ints: dict

    def bool(self, name: str, default=None):
        v = self.bools.get(name, default)
        if v is None:
            raise SolverOutputError(f"model misses boolean {name!r}")
        return v

    def int(self, name: str, default=None):
        v = self.ints.get(name, default)
        if v is None:
            raise SolverOutputError(f"model misses integer {name!r}")
        return v


@dataclass
class SolveResult:
    status: str  # "sat" | "unsat"
    valuation: Valuation | None = None
    path: str | None = None  # retained query file, when keeping temps

    @property
    def is_sat(self) -> bool:
        return self.status == "sat"


@dataclass
class SolverConfig:
    command: list
    timeout: float = DEFAULT_TIMEOUT
    keep_temps: bool = False
    workdir: str | None = None
    _counter: int = field(default=0, repr=False)

    def next_name(self, base: str) -> str:
        self._counter += 1
        return f"{base}_{self._counter:04d}.smt2"


def resolve_solver(spec: str | None = None) -> list:
    """Figure out the solver argv prefix (without the file argument)."""
    if spec:
        return shlex.split(spec)
    env = os.environ.get("WPO_SOLVER")
    if env:
        return shlex.split(env)
    exe = shutil.which("wpo-solve")
    if exe:
        return [exe]
    return [sys.executable, "-m", "wpomc.smtsolver"]


def make_config(spec: str | None = None, timeout: float = DEFAULT_TIMEOUT,
                keep_temps: bool = False, workdir: str | None = None) -> SolverConfig:
    return SolverConfig(resolve_solver(spec), timeout, keep_temps, workdir)


def _check_executable(command: list) -> None:
    exe = command[0]
    if shutil.which(exe) is None and not os.path.isfile(exe):
        raise SolverNotFoundError(exe)


def solve(query: Query, config: SolverConfig) -> SolveResult:
    """Run the configured solver on `query`; returns sat+model or unsat."""
    _check_executable(config.command)
    text = emit_smtlib(query)

    cleanup = None
    workdir = config.workdir
    if workdir is None:
        if config.keep_temps:
            workdir = tempfile.mkdtemp(prefix="wpomc-")
        else:
            cleanup = tempfile.TemporaryDirectory(prefix="wpomc-")
            workdir = cleanup.name
    os.makedirs(workdir, exist_ok=True)
    path = os.path.join(workdir, config.next_name(query.name))
    with open(path, "w", encoding="utf-8") as fh:
        fh.write(text)

    try:
        proc = subprocess.run(
            [*config.command, path],
            capture_output=True,
            text=True,
            timeout=config.timeout,
        )
    except subprocess.TimeoutExpired:
        raise SolverTimeoutError(config.timeout)
    except FileNotFoundError:
        raise SolverNotFoundError(config.command[0])
    finally:
        if cleanup is not None:
            cleanup.cleanup()

    status, valuation = parse_solver_output(proc.stdout)
    if status == "unknown":
        raise SolverOutputError(
            f"solver returned unknown (stderr: {proc.stderr.strip()[:500]})"
        )
    keep = path if config.keep_temps or config.workdir else None
    return SolveResult(status, valuation, keep)


def parse_solver_output(out: str):
    """Extract sat/unsat plus define-fun bindings from solver stdout."""
    lines = [l.strip() for l in out.splitlines() if l.strip()]
    if not lines:
        raise SolverOutputError("empty solver output")
    status = lines[0]
    if status not in ("sat", "unsat", "unknown"):
        raise SolverOutputError(f"unrecognised solver verdict {status!r}")
    if status != "sat":
        return status, None
    rest = "\n".join(lines[1:])
    bools: dict = {}
    ints: dict = {}
    try:
        forms = parse_all(rest)
    except SolverOutputError as exc:
        raise SolverOutputError(f"unparseable model: {exc}")
    for form in forms:
        if not isinstance(form, list):
            continue
        entries = form[1:] if form and form[0] == "model" else form
        for entry in entries:
            if not isinstance(entry, list) or not entry or entry[0] != "define-fun":
                continue
            _, name, _args, sort, value = entry[:5]
            if sort == "Bool":
                bools[name] = value == "true"
            elif sort == "Int":
                ints[name] = _int_value(value)
    return "sat", Valuation(bools, ints)


def _int_value(v):
    if isinstance(v, list):
        if len(v) == 2 and v[0] == "-":
            return -_int_value(v[1])
        raise SolverOutputError(f"bad integer value {v!r}")
    return int(v)
