"""DIMACS CNF reading and writing.  Clause order is preserved both ways."""
from __future__ import annotations

import warnings

from .cnf import CnfInstance
from .errors import DimacsError


def parse_dimacs(text: str, strict: bool = True) -> CnfInstance:
    """Parse DIMACS CNF text.

    With ``strict=False`` a clause-count mismatch or a missing final ``0``
    only warns; literals out of range and bad headers always raise.
    """
    n = m = None
    clauses: list[tuple[int, ...]] = []
    current: list[int] = []
    for lineno, raw in enumerate(text.splitlines(), 1):
        line = raw.strip()
        if not line or line.startswith("c") or line.startswith("%"):
            continue
        if line.startswith("p"):
            parts = line.split()
            if n is not None:
                raise DimacsError(f"line {lineno}: duplicate header")
            if len(parts) != 4 or parts[1] != "cnf":
                raise DimacsError(f"line {lineno}: malformed header {line!r}")
            try:
                n, m = int(parts[2]), int(parts[3])
            except ValueError:
                raise DimacsError(f"line {lineno}: malformed header {line!r}") from None
            if n < 0 or m < 0:
                raise DimacsError(f"line {lineno}: negative counts in header")
            continue
        if n is None:
            raise DimacsError(f"line {lineno}: clause before 'p cnf' header")
        for tok in line.split():
            try:
                lit = int(tok)
            except ValueError:
                raise DimacsError(f"line {lineno}: bad token {tok!r}") from None
            if lit == 0:
                clauses.append(tuple(current))
                current = []
            elif abs(lit) > n:
                raise DimacsError(f"line {lineno}: literal {lit} out of range (n={n})")
            else:
                current.append(lit)
    if n is None:
        raise DimacsError("missing 'p cnf' header")
    if current:
        if strict:
            raise DimacsError("last clause not terminated by 0")
        warnings.warn("last clause not terminated by 0; accepted", stacklevel=2)
        clauses.append(tuple(current))
    if len(clauses) != m:
        msg = f"header declares {m} clauses, found {len(clauses)}"
        if strict:
            raise DimacsError(msg)
        warnings.warn(msg + "; accepted", stacklevel=2)
    return CnfInstance(n, tuple(clauses))


def write_dimacs(instance: CnfInstance, comments: list[str] | None = None) -> str:
    lines = [f"c {c}" for c in comments or ()]
    lines.append(f"p cnf {instance.n} {instance.m}")
    lines.extend(" ".join([*map(str, c), "0"]) for c in instance.clauses)
    return "\n".join(lines) + "\n"


def read_dimacs(path, strict: bool = True) -> CnfInstance:
    with open(path) as fh:
        return parse_dimacs(fh.read(), strict=strict)


def save_dimacs(instance: CnfInstance, path, comments: list[str] | None = None) -> None:
    with open(path, "w") as fh:
        fh.write(write_dimacs(instance, comments))
