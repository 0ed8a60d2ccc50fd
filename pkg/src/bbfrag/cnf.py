"""CNF data model.

Literals use the DIMACS convention: variable ``v`` (1-based) is the literal
``v`` and its negation is ``-v``.  A clause is a tuple of literals, an
instance is a bag of clauses addressed by stable integer indices, and an
assignment is a boolean numpy vector where ``t[v - 1]`` is the value of
variable ``v``.
"""
from __future__ import annotations

import hashlib
from dataclasses import dataclass, field
from functools import cached_property
from typing import Iterable, Sequence

import numpy as np

Literal = int
Clause = tuple

__all__ = [
    "Backbone",
    "CnfInstance",
    "EvaluationResult",
    "evaluate",
    "hamming_distance",
    "negate",
    "random_assignment",
    "remove_clauses",
]


def negate(lit: Literal) -> Literal:
    return -lit


def variable(lit: Literal) -> int:
    return lit if lit > 0 else -lit


@dataclass(frozen=True, eq=False)
class CnfInstance:
    """A bag of clauses over variables ``1..n``.

    ``parent_indices[i]`` is the index in the parent instance of clause ``i``
    when this instance was derived by clause removal, else ``None``.
    """

    n: int
    clauses: tuple[tuple[int, ...], ...]
    parent_indices: tuple[int, ...] | None = None
    irregular: frozenset[int] = field(default=frozenset(), compare=False)

    def __post_init__(self):
        if self.n < 0:
            raise ValueError("variable count must be non-negative")
        clauses = tuple(tuple(int(l) for l in c) for c in self.clauses)
        object.__setattr__(self, "clauses", clauses)
        bad = []
        for i, c in enumerate(clauses):
            for lit in c:
                if lit == 0 or abs(lit) > self.n:
                    raise ValueError(f"literal {lit} out of range in clause {i} (n={self.n})")
            if len({abs(l) for l in c}) != len(c):
                bad.append(i)
        object.__setattr__(self, "irregular", frozenset(bad))
        if self.parent_indices is not None:
            pi = tuple(int(i) for i in self.parent_indices)
            if len(pi) != len(clauses):
                raise ValueError("parent_indices must map every clause")
            object.__setattr__(self, "parent_indices", pi)

    @classmethod
    def from_clauses(cls, n: int, clauses: Iterable[Sequence[int]]) -> "CnfInstance":
        return cls(n, tuple(tuple(c) for c in clauses))

    @property
    def m(self) -> int:
        return len(self.clauses)

    def __len__(self) -> int:
        return len(self.clauses)

    def __eq__(self, other):
        if not isinstance(other, CnfInstance):
            return NotImplemented
        return self.n == other.n and self.clauses == other.clauses

    def __hash__(self):
        return hash((self.n, self.clauses))

    def __repr__(self):
        return f"CnfInstance(n={self.n}, m={self.m})"

    def content_hash(self) -> str:
        """SHA-256 of the canonical DIMACS text (order-sensitive)."""
        from .dimacs import write_dimacs

        return hashlib.sha256(write_dimacs(self).encode()).hexdigest()

    # flat arrays consumed by the compiled kernels
    @cached_property
    def flat(self) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
        lens = np.fromiter((len(c) for c in self.clauses), dtype=np.int32, count=self.m)
        starts = np.zeros(self.m, dtype=np.int64)
        if self.m:
            starts[1:] = np.cumsum(lens[:-1], dtype=np.int64)
        lits = np.fromiter((l for c in self.clauses for l in c), dtype=np.int32,
                           count=int(lens.sum()))
        for a in (lits, starts, lens):
            a.setflags(write=False)
        return lits, starts, lens

    @cached_property
    def clause_ids(self) -> np.ndarray:
        """Clause index of every entry of ``flat[0]``."""
        _, _, lens = self.flat
        ids = np.repeat(np.arange(self.m, dtype=np.int64), lens)
        ids.setflags(write=False)
        return ids

    def variables_used(self) -> frozenset[int]:
        return frozenset(abs(l) for c in self.clauses for l in c)

    def with_clauses(self, extra: Iterable[Sequence[int]]) -> "CnfInstance":
        """A new instance with ``extra`` appended after the existing clauses."""
        return CnfInstance(self.n, self.clauses + tuple(tuple(c) for c in extra))


@dataclass(frozen=True)
class EvaluationResult:
    unsat_count: int
    unsat_indices: frozenset[int]

    def is_quasi_solution_for(self, bag: Iterable[int]) -> bool:
        """True iff every unsatisfied clause lies in ``bag`` (membership in Q_B)."""
        return self.unsat_indices <= frozenset(bag)


class Backbone(frozenset):
    """A consistent set of literals."""

    def __new__(cls, literals: Iterable[int] = ()):
        self = super().__new__(cls, (int(l) for l in literals))
        for lit in self:
            if lit == 0:
                raise ValueError("0 is not a literal")
            if -lit in self:
                raise ValueError(f"inconsistent backbone: both {lit} and {-lit}")
        return self

    @property
    def variables(self) -> frozenset[int]:
        return frozenset(abs(l) for l in self)

    def sorted(self) -> list[int]:
        return sorted(self, key=lambda l: (abs(l), l < 0))

    def __repr__(self):
        return f"Backbone({self.sorted()})"


def as_assignment(values, n: int | None = None) -> np.ndarray:
    t = np.asarray(values, dtype=bool)
    if t.ndim != 1:
        raise ValueError("assignment must be a 1-d boolean vector")
    if n is not None and t.shape[0] != n:
        raise ValueError(f"assignment covers {t.shape[0]} variables, expected {n}")
    return t


def random_assignment(n: int, rng: np.random.Generator) -> np.ndarray:
    return rng.integers(0, 2, size=n).astype(bool)


def literal_truth(instance: CnfInstance, t: np.ndarray) -> np.ndarray:
    """Truth value of every literal occurrence in ``instance.flat[0]``."""
    lits, _, _ = instance.flat
    return t[np.abs(lits) - 1] == (lits > 0)


def evaluate(instance: CnfInstance, t) -> EvaluationResult:
    t = as_assignment(t, instance.n)
    if instance.m == 0:
        return EvaluationResult(0, frozenset())
    hits = np.bincount(instance.clause_ids, weights=literal_truth(instance, t),
                       minlength=instance.m)
    unsat = np.flatnonzero(hits == 0)
    return EvaluationResult(int(unsat.size), frozenset(int(i) for i in unsat))


def satisfies(instance: CnfInstance, t) -> bool:
    return evaluate(instance, t).unsat_count == 0


def hamming_distance(t1, t2) -> int:
    a = as_assignment(t1)
    b = as_assignment(t2)
    if a.shape != b.shape:
        raise ValueError(f"assignments over different variable counts: {a.size} vs {b.size}")
    return int(np.count_nonzero(a != b))


def remove_clauses(instance: CnfInstance, indices: Iterable[int]) -> CnfInstance:
    """Remove exactly the addressed clause copies; the result records its parent mapping."""
    drop = set(int(i) for i in indices)
    for i in drop:
        if not 0 <= i < instance.m:
            raise IndexError(f"clause index {i} out of range [0, {instance.m})")
    keep = [i for i in range(instance.m) if i not in drop]
    return CnfInstance(instance.n, tuple(instance.clauses[i] for i in keep), tuple(keep))


def compose_parent_indices(child: CnfInstance, parent: CnfInstance) -> tuple[int, ...]:
    """Map ``child`` clauses to the parent of ``parent`` (for chained removals)."""
    if child.parent_indices is None:
        raise ValueError("child has no parent mapping")
    if parent.parent_indices is None:
        return child.parent_indices
    return tuple(parent.parent_indices[i] for i in child.parent_indices)
