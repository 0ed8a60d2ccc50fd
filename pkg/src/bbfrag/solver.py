"""Complete solving: decisions, model counting, enumeration, backbones, hdns."""
from __future__ import annotations

from dataclasses import dataclass, field

import numba as nb
import numpy as np

from . import _dpll
from .cnf import Backbone, CnfInstance, as_assignment, satisfies
from .errors import BudgetExhausted, UnsatisfiableError, UndefinedStatistic

DEFAULT_NODE_CAP = 10**8
DEFAULT_SOLUTION_CAP = 10**6

_NONE = np.zeros(0, dtype=np.int32)


@dataclass
class SolverStats:
    """Cumulative counters, exposed for harness CSVs."""

    nodes: int = 0
    calls: int = 0

    def _absorb(self, raw: np.ndarray) -> None:
        self.nodes += int(raw[_dpll.ST_NODES])
        self.calls += int(raw[_dpll.ST_CALLS])


STATS = SolverStats()


def _raw_stats() -> np.ndarray:
    return np.zeros(3, dtype=np.int64)


@dataclass(frozen=True)
class SolveResult:
    status: str  # "satisfiable" | "unsatisfiable"
    witness: np.ndarray | None = None

    @property
    def satisfiable(self) -> bool:
        return self.status == "satisfiable"


@dataclass(frozen=True)
class SolutionCubes:
    """Disjoint partial assignments whose completions are exactly the solutions.

    ``bits``/``mask`` pack variable ``v`` into bit ``(v-1) % 64`` of word
    ``(v-1) // 64``; a variable outside the mask is free.
    """

    n: int
    bits: np.ndarray
    mask: np.ndarray

    def __len__(self) -> int:
        return self.bits.shape[0]

    def count(self) -> int:
        free = self.n - _popcount_rows(self.mask)
        return sum(1 << int(f) for f in free)


@dataclass(frozen=True)
class SolutionSet:
    solutions: list
    complete: bool
    cap: int
    cubes: SolutionCubes | None = field(default=None, repr=False, compare=False)

    def __len__(self) -> int:
        return len(self.solutions)


def _active(instance: CnfInstance, active) -> np.ndarray:
    if active is None:
        return np.ones(instance.m, dtype=np.bool_)
    a = np.asarray(active, dtype=np.bool_)
    if a.shape != (instance.m,):
        raise ValueError("active mask must have one entry per clause")
    return a


def _check(status: int, what: str, node_cap: int) -> None:
    if status == _dpll.BUDGET:
        raise BudgetExhausted(f"{what}: node cap {node_cap} exceeded")


def solve(instance: CnfInstance, assumptions=(), node_cap: int = DEFAULT_NODE_CAP,
          active=None) -> SolveResult:
    """Decide satisfiability; the witness is re-verified before returning."""
    lits, starts, lens = instance.flat
    model = np.empty(instance.n, dtype=np.bool_)
    raw = _raw_stats()
    assumps = np.asarray(list(assumptions), dtype=np.int32)
    status = _dpll.decide(lits, starts, lens, _active(instance, active), _NONE, False,
                          instance.n, assumps, node_cap, model, raw)
    STATS._absorb(raw)
    _check(status, "solve", node_cap)
    if status == _dpll.UNSAT:
        return SolveResult("unsatisfiable")
    if active is None and not satisfies(instance, model):
        raise AssertionError("solver produced a non-satisfying witness")
    return SolveResult("satisfiable", model)


def is_satisfiable(instance: CnfInstance, node_cap: int = DEFAULT_NODE_CAP) -> bool:
    return solve(instance, node_cap=node_cap).satisfiable


def count_solutions(instance: CnfInstance, node_cap: int = DEFAULT_NODE_CAP) -> int:
    """Exact model count (summed over solution cubes, so no 2^n blow-up)."""
    lits, starts, lens = instance.flat
    raw = _raw_stats()
    hist = np.zeros(instance.n + 1, dtype=np.int64)
    dummy = np.zeros((0, 1), dtype=np.uint64)
    model = np.empty(instance.n, dtype=np.bool_)
    status = _dpll.search(lits, starts, lens, _active(instance, None), _NONE, False, instance.n,
                          _NONE, _dpll.MODE_COUNT, node_cap, model, dummy, dummy, hist, raw, False)
    STATS._absorb(raw)
    _check(status, "count_solutions", node_cap)
    return sum(int(c) << f for f, c in enumerate(hist) if c)


def solution_cubes(instance: CnfInstance, node_cap: int = DEFAULT_NODE_CAP,
                   max_cubes: int | None = None) -> SolutionCubes:
    """All solutions as disjoint cubes.  Raises BudgetExhausted past ``max_cubes``."""
    lits, starts, lens = instance.flat
    words = max(1, (instance.n + 63) // 64)
    cap = 1024
    model = np.empty(instance.n, dtype=np.bool_)
    while True:
        bits = np.zeros((cap, words), dtype=np.uint64)
        mask = np.zeros((cap, words), dtype=np.uint64)
        hist = np.zeros(instance.n + 1, dtype=np.int64)
        raw = _raw_stats()
        status = _dpll.search(lits, starts, lens, _active(instance, None), _NONE, False,
                              instance.n, _NONE, _dpll.MODE_CUBES, node_cap, model, bits, mask,
                              hist, raw, False)
        STATS._absorb(raw)
        _check(status, "solution_cubes", node_cap)
        if status != _dpll.OVERFLOW:
            k = int(raw[2])
            return SolutionCubes(instance.n, bits[:k].copy(), mask[:k].copy())
        if max_cubes is not None and cap >= max_cubes:
            raise BudgetExhausted(f"more than {max_cubes} solution cubes")
        cap *= 4
        if max_cubes is not None:
            cap = min(cap, max_cubes)


def _expand(cubes: SolutionCubes, limit: int) -> list[np.ndarray]:
    out = []
    n = cubes.n
    idx = np.arange(n)
    for bits, mask in zip(cubes.bits, cubes.mask):
        assigned = ((mask[idx >> 6] >> (idx & 63).astype(np.uint64)) & np.uint64(1)).astype(bool)
        values = ((bits[idx >> 6] >> (idx & 63).astype(np.uint64)) & np.uint64(1)).astype(bool)
        free = np.flatnonzero(~assigned)
        for r in range(1 << free.size):
            if len(out) == limit:
                return out
            t = values.copy()
            t[free] = (r >> np.arange(free.size)) & 1
            out.append(t)
    return out


def enumerate_solutions(instance: CnfInstance, cap: int = DEFAULT_SOLUTION_CAP,
                        node_cap: int = DEFAULT_NODE_CAP) -> SolutionSet:
    """Every solution when there are at most ``cap``; otherwise the first ``cap``."""
    if cap < 1:
        raise ValueError("cap must be >= 1")
    cubes = solution_cubes(instance, node_cap=node_cap)
    total = cubes.count()
    sols = _expand(cubes, min(total, cap))
    for t in sols:
        if not satisfies(instance, t):
            raise AssertionError("enumerated a non-solution")
    complete = total <= cap
    return SolutionSet(sols, complete, cap, cubes if complete else None)


def compute_backbone(instance: CnfInstance, node_cap: int = DEFAULT_NODE_CAP,
                     active=None, dcheck: bool = True) -> Backbone:
    """Literals entailed by the instance.

    One witness seeds the candidates and every counter-model found prunes all
    candidates it falsifies.  With ``dcheck`` the remaining candidates are
    first tested jointly (is the instance plus the clause negating all of them
    unsatisfiable?), falling back to one entailment test per candidate only
    when a counter-model turns up.
    """
    lits, starts, lens = instance.flat
    cand = np.zeros(instance.n + 1, dtype=np.int8)
    raw = _raw_stats()
    status = _dpll.backbone(lits, starts, lens, _active(instance, active), instance.n, node_cap,
                            raw, cand, dcheck)
    STATS._absorb(raw)
    _check(status, "compute_backbone", node_cap)
    if status == _dpll.UNSAT:
        raise UnsatisfiableError("backbone undefined: instance is unsatisfiable")
    return cand_to_backbone(cand)


def cand_to_backbone(cand: np.ndarray) -> Backbone:
    vs = np.flatnonzero(cand)
    return Backbone(int(v) if cand[v] > 0 else -int(v) for v in vs)


def backbone_to_cand(backbone, n: int) -> np.ndarray:
    cand = np.zeros(n + 1, dtype=np.int8)
    for lit in backbone:
        cand[abs(lit)] = 1 if lit > 0 else -1
    return cand


def is_entailed(instance: CnfInstance, lit: int, node_cap: int = DEFAULT_NODE_CAP) -> bool:
    return not solve(instance, assumptions=(-lit,), node_cap=node_cap).satisfiable


@nb.njit(cache=True)
def _popcount64(x):
    x = x - ((x >> np.uint64(1)) & np.uint64(0x5555555555555555))
    x = (x & np.uint64(0x3333333333333333)) + ((x >> np.uint64(2)) & np.uint64(0x3333333333333333))
    x = (x + (x >> np.uint64(4))) & np.uint64(0x0F0F0F0F0F0F0F0F)
    return (x * np.uint64(0x0101010101010101)) >> np.uint64(56)


@nb.njit(cache=True)
def _popcount_rows(a):
    out = np.zeros(a.shape[0], dtype=np.int64)
    for i in range(a.shape[0]):
        for w in range(a.shape[1]):
            out[i] += _popcount64(a[i, w])
    return out


@nb.njit(cache=True)
def _min_distance(tbits, bits, mask):
    best = 1 << 62
    for i in range(bits.shape[0]):
        d = 0
        for w in range(bits.shape[1]):
            d += _popcount64((bits[i, w] ^ tbits[w]) & mask[i, w])
        if d < best:
            best = d
            if d == 0:
                break
    return best


@nb.njit(cache=True)
def _min_distance_many(tbits, bits, mask):
    out = np.empty(tbits.shape[0], dtype=np.int64)
    for r in range(tbits.shape[0]):
        out[r] = _min_distance(tbits[r], bits, mask)
    return out


def pack_assignments(ts: np.ndarray) -> np.ndarray:
    """Pack boolean rows (k, n) into uint64 words (k, ceil(n/64))."""
    ts = np.atleast_2d(np.asarray(ts, dtype=bool))
    k, n = ts.shape
    words = max(1, (n + 63) // 64)
    out = np.zeros((k, words), dtype=np.uint64)
    for v in range(n):
        out[:, v >> 6] |= ts[:, v].astype(np.uint64) << np.uint64(v & 63)
    return out


def hdns(t, solutions) -> int:
    """Hamming distance from ``t`` to its nearest solution.

    ``solutions`` is a complete SolutionSet or SolutionCubes.
    """
    if isinstance(solutions, SolutionSet):
        if not solutions.complete:
            raise UndefinedStatistic("hdns needs a complete solution set")
        if not solutions.solutions:
            raise UndefinedStatistic("hdns of an instance without solutions")
        cubes = solutions.cubes
        if cubes is None:
            t = as_assignment(t)
            return min(int(np.count_nonzero(t != s)) for s in solutions.solutions)
    else:
        cubes = solutions
        if len(cubes) == 0:
            raise UndefinedStatistic("hdns of an instance without solutions")
    t = as_assignment(t, cubes.n)
    return int(_min_distance(pack_assignments(t)[0], cubes.bits, cubes.mask))


def hdns_many(ts, cubes: SolutionCubes) -> np.ndarray:
    if len(cubes) == 0:
        raise UndefinedStatistic("hdns of an instance without solutions")
    return _min_distance_many(pack_assignments(ts), cubes.bits, cubes.mask)
