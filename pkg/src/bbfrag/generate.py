"""Random k-SAT generation and rejection samplers.

Attempt ``j`` of a sampler draws from the stream ``(rng_seed, *key, j)``, so
samplers can be split across workers by attempt index without changing
which instance is accepted.
"""
from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .cnf import Backbone, CnfInstance
from .errors import BudgetExhausted
from .rng import generator
from .solver import DEFAULT_NODE_CAP, compute_backbone, solve


@dataclass(frozen=True)
class GenSpec:
    n: int
    m: int
    k: int = 3
    rng_seed: int = 0

    def __post_init__(self):
        if self.n < 0 or self.m < 0 or self.k < 1:
            raise ValueError("need n >= 0, m >= 0, k >= 1")
        if self.k > self.n and self.m > 0:
            raise ValueError(f"k={self.k} exceeds n={self.n}")

    @property
    def ratio(self) -> float:
        return self.m / self.n if self.n else float("inf")

    @classmethod
    def from_ratio(cls, n: int, ratio: float, k: int = 3, rng_seed: int = 0) -> "GenSpec":
        return cls(n, int(round(ratio * n)), k, rng_seed)


def generate_random_ksat(spec: GenSpec, rng: np.random.Generator) -> CnfInstance:
    """``m`` clauses, each over ``k`` distinct uniform variables with fair-coin signs."""
    n, m, k = spec.n, spec.m, spec.k
    if m == 0:
        return CnfInstance(n, ())
    if k > n:
        raise ValueError(f"k={k} exceeds n={n}")
    keys = rng.random((m, n))
    chosen = np.argpartition(keys, k - 1, axis=1)[:, :k] if k < n else np.tile(np.arange(n), (m, 1))
    order = np.argsort(np.take_along_axis(keys, chosen, axis=1), axis=1)
    chosen = np.take_along_axis(chosen, order, axis=1) + 1
    signs = np.where(rng.integers(0, 2, size=(m, k)) == 1, -1, 1)
    lits = chosen * signs
    return CnfInstance(n, tuple(tuple(int(x) for x in row) for row in lits))


@dataclass
class SampleReport:
    """An accepted instance plus the attempt telemetry."""

    instance: CnfInstance
    attempts: int
    attempt_index: int
    backbone: Backbone | None = None
    satisfiable_seen: int = 0
    backbone_sizes: list[int] = field(default_factory=list, repr=False)


def _attempt_rng(spec: GenSpec, key: tuple[int, ...], j: int) -> np.random.Generator:
    return generator(spec.rng_seed, *key, j)


def sample_satisfiable(spec: GenSpec, budget: int, key: tuple[int, ...] = (),
                       node_cap: int = DEFAULT_NODE_CAP) -> SampleReport:
    """First satisfiable instance among attempts ``0..budget-1``."""
    if budget < 1:
        raise ValueError("budget must be >= 1")
    for j in range(budget):
        inst = generate_random_ksat(spec, _attempt_rng(spec, key, j))
        if solve(inst, node_cap=node_cap).satisfiable:
            return SampleReport(inst, j + 1, j, satisfiable_seen=1)
    raise BudgetExhausted(f"no satisfiable instance in {budget} attempts (n={spec.n}, m={spec.m})")


def sample_with_backbone_size(spec: GenSpec, target: int, budget: int,
                              key: tuple[int, ...] = (),
                              node_cap: int = DEFAULT_NODE_CAP) -> SampleReport:
    """First satisfiable instance whose backbone has exactly ``target`` literals.

    Pure rejection; instances are never altered.
    """
    if not 0 <= target <= spec.n:
        raise ValueError(f"target must lie in [0, {spec.n}]")
    if budget < 1:
        raise ValueError("budget must be >= 1")
    sat = 0
    sizes = []
    for j in range(budget):
        inst = generate_random_ksat(spec, _attempt_rng(spec, key, j))
        if not solve(inst, node_cap=node_cap).satisfiable:
            continue
        sat += 1
        bb = compute_backbone(inst, node_cap=node_cap)
        sizes.append(len(bb))
        if len(bb) == target:
            return SampleReport(inst, j + 1, j, bb, sat, sizes)
    raise BudgetExhausted(
        f"no satisfiable instance with backbone {target} in {budget} attempts "
        f"(n={spec.n}, m={spec.m}, satisfiable seen {sat})")


def generate_batch(spec: GenSpec, count: int, budget: int, target: int | None = None):
    """Yield ``count`` accepted samples; sample ``i`` uses attempt streams keyed ``(i, j)``."""
    for i in range(count):
        if target is None:
            yield sample_satisfiable(spec, budget, key=(i,))
        else:
            yield sample_with_backbone_size(spec, target, budget, key=(i,))
