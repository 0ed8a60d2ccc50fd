"""Backbone robustness, backbone-minimal sub-instances and clause-removal procedures."""
from __future__ import annotations

import json
import math
from dataclasses import dataclass, field

import numba as nb
import numpy as np

from . import _dpll
from .cnf import Backbone, CnfInstance, remove_clauses
from .errors import BudgetExhausted, RobustnessUndefined, SatisfiableError
from .rng import generator, kernel_states, shuffle_inplace
from .solver import DEFAULT_NODE_CAP, STATS, backbone_to_cand, compute_backbone, solve


def _stream(rng) -> tuple[int, ...]:
    """Normalize an RNG argument into a stream name.

    Accepts an int seed, a tuple stream name, or a numpy Generator (from
    which a fresh 63-bit root is drawn).
    """
    if isinstance(rng, np.random.Generator):
        return (int(rng.integers(0, 2**63)),)
    if isinstance(rng, tuple):
        return tuple(int(x) for x in rng)
    return (int(rng),)


def _np_rng(rng) -> np.random.Generator:
    if isinstance(rng, np.random.Generator):
        return rng
    return generator(*_stream(rng))


def _absorb(raw):
    STATS.nodes += int(raw[_dpll.ST_NODES])
    STATS.calls += int(raw[_dpll.ST_CALLS])


def halt_size(size: int, rule: str = "floor") -> int:
    """Largest backbone size at which a robustness trial halts.

    ``floor``: reduced by at least half, i.e. size <= floor(original / 2).
    ``strict``: reduced to strictly below half, i.e. size < original / 2.
    """
    if rule == "floor":
        return size // 2
    if rule == "strict":
        return (size - 1) // 2
    raise ValueError(f"unknown halving rule {rule!r}")


# ----------------------------------------------------------------------------
# robustness

@nb.njit(cache=True)
def _trials(lits, starts, lens, nvars, bb_cand, seeds, halt, node_cap, out, out_size, stats):
    m = lens.shape[0]
    active = np.empty(m, dtype=np.bool_)
    order = np.empty(m, dtype=np.int64)
    for t in range(seeds.shape[0]):
        s = seeds[t].copy()
        for c in range(m):
            active[c] = True
            order[c] = c
        shuffle_inplace(s, order)
        cand = bb_cand.copy()
        out[t] = -1
        for j in range(m):
            active[order[j]] = False
            r = _dpll.refine_backbone(lits, starts, lens, active, nvars, cand, node_cap, stats,
                                      True)
            if r == _dpll.BUDGET:
                return _dpll.BUDGET
            size = 0
            for v in range(1, nvars + 1):
                if cand[v] != 0:
                    size += 1
            if size <= halt:
                out[t] = j + 1
                out_size[t] = size
                break
    return _dpll.SAT


def _trial_batch(instance, backbone, seeds, halt, node_cap):
    lits, starts, lens = instance.flat
    out = np.zeros(seeds.shape[0], dtype=np.int64)
    sizes = np.zeros(seeds.shape[0], dtype=np.int64)
    raw = np.zeros(3, dtype=np.int64)
    status = _trials(lits, starts, lens, instance.n, backbone_to_cand(backbone, instance.n),
                     seeds, halt, node_cap, out, sizes, raw)
    _absorb(raw)
    if status == _dpll.BUDGET:
        raise BudgetExhausted("robustness trial: node cap exceeded")
    return out, sizes


def robustness_trial(instance: CnfInstance, backbone, rng, halving: str = "floor",
                     node_cap: int = DEFAULT_NODE_CAP) -> int:
    """Delete random clauses until the backbone is at most half its size; return deletions."""
    backbone = Backbone(backbone)
    if not backbone:
        raise RobustnessUndefined("robustness undefined for an empty backbone")
    stream = _stream(rng)
    seeds = kernel_states(stream[0], stream[1:], 1)
    out, _ = _trial_batch(instance, backbone, seeds, halt_size(len(backbone), halving), node_cap)
    return int(out[0])


@dataclass
class RobustnessEstimate:
    mean: float
    std_error: float
    trials: int
    halved_sizes: np.ndarray = field(repr=False)
    results: np.ndarray = field(repr=False)
    converged: bool = True
    backbone_size: int = 0


def estimate_robustness(instance: CnfInstance, rng, min_trials: int = 100, rel_se: float = 0.05,
                        max_trials: int = 5000, backbone=None, halving: str = "floor",
                        batch: int = 50, node_cap: int = DEFAULT_NODE_CAP) -> RobustnessEstimate:
    """Mean robustness-trial result, sampled until ``se < rel_se * mean`` (after
    ``min_trials``) or ``max_trials``.

    Trial ``i`` uses stream ``(*rng_stream, i)``; the stopping point is decided
    trial by trial, so batching never changes the estimate.
    """
    if min_trials < 1 or max_trials < min_trials:
        raise ValueError("need 1 <= min_trials <= max_trials")
    if backbone is None:
        backbone = compute_backbone(instance, node_cap=node_cap)
    backbone = Backbone(backbone)
    if not backbone:
        raise RobustnessUndefined("robustness undefined for an empty backbone")
    stream = _stream(rng)
    halt = halt_size(len(backbone), halving)
    results = np.zeros(0, dtype=np.int64)
    sizes = np.zeros(0, dtype=np.int64)
    while results.size < max_trials:
        k = min(max(batch, min_trials - results.size), max_trials - results.size)
        seeds = kernel_states(stream[0], stream[1:], k, start=results.size)
        out, sz = _trial_batch(instance, backbone, seeds, halt, node_cap)
        start = results.size
        results = np.concatenate([results, out])
        sizes = np.concatenate([sizes, sz])
        stop = _first_stop(results, start, min_trials, rel_se)
        if stop is not None:
            results, sizes = results[:stop], sizes[:stop]
            break
    mean, se = _mean_se(results)
    converged = results.size >= min_trials and se < rel_se * mean
    return RobustnessEstimate(mean, se, int(results.size), sizes, results, converged,
                              len(backbone))


def _mean_se(x: np.ndarray) -> tuple[float, float]:
    mean = float(x.mean())
    se = float(x.std(ddof=1) / math.sqrt(x.size)) if x.size > 1 else 0.0
    return mean, se


def _first_stop(results: np.ndarray, start: int, min_trials: int, rel_se: float):
    x = results.astype(float)
    csum = np.cumsum(x)
    csq = np.cumsum(x * x)
    for t in range(max(start + 1, min_trials), x.size + 1):
        mean = csum[t - 1] / t
        var = max(0.0, (csq[t - 1] - t * mean * mean) / (t - 1)) if t > 1 else 0.0
        # exact recheck near the boundary avoids cumulative-sum rounding
        se = math.sqrt(var / t)
        if se < rel_se * mean * (1 + 1e-9):
            m2, s2 = _mean_se(x[:t])
            if s2 < rel_se * m2:
                return t
    return None


# ----------------------------------------------------------------------------
# d-clause, MUS and BMS

def build_d_clause(backbone) -> tuple[int, ...]:
    """The disjunction of the negated backbone literals (empty backbone -> empty clause)."""
    return tuple(-l for l in Backbone(backbone).sorted())


_NONE_K = np.zeros(0, dtype=np.int32)


@nb.njit(cache=True)
def _mus(lits, starts, lens, active, nvars, order, protected, node_cap, stats):
    model = np.empty(nvars, dtype=np.bool_)
    for c in order:
        if c == protected or not active[c]:
            continue
        active[c] = False
        r = _dpll.decide(lits, starts, lens, active, _NONE_K, False, nvars, _NONE_K, node_cap,
                         model, stats)
        if r == _dpll.BUDGET:
            return _dpll.BUDGET
        if r == _dpll.SAT:
            active[c] = True
    return _dpll.UNSAT


def find_mus(instance: CnfInstance, rng, protected: int | None = None,
             node_cap: int = DEFAULT_NODE_CAP) -> CnfInstance:
    """Deletion-based MUS: visit clauses in a random order, dropping each one whose
    removal leaves the rest unsatisfiable.  ``protected`` is never tried."""
    if solve(instance, node_cap=node_cap).satisfiable:
        raise SatisfiableError("find_mus needs an unsatisfiable instance")
    if protected is not None and not 0 <= protected < instance.m:
        raise IndexError("protected clause index out of range")
    order = _np_rng(rng).permutation(instance.m).astype(np.int64)
    lits, starts, lens = instance.flat
    active = np.ones(instance.m, dtype=np.bool_)
    raw = np.zeros(3, dtype=np.int64)
    status = _mus(lits, starts, lens, active, instance.n, order,
                  -1 if protected is None else protected, node_cap, raw)
    _absorb(raw)
    if status == _dpll.BUDGET:
        raise BudgetExhausted("find_mus: node cap exceeded")
    return remove_clauses(instance, np.flatnonzero(~active).tolist())


@dataclass
class BmsResult:
    sub_instance: CnfInstance
    parent_indices: tuple[int, ...]
    backbone: Backbone

    @property
    def size(self) -> int:
        return self.sub_instance.m


def find_bms(instance: CnfInstance, rng, backbone=None,
             node_cap: int = DEFAULT_NODE_CAP) -> BmsResult:
    """A random backbone-minimal sub-instance: MUS of ``C and d`` with ``d`` kept, minus ``d``."""
    if backbone is None:
        backbone = compute_backbone(instance, node_cap=node_cap)
    backbone = Backbone(backbone)
    with_d = instance.with_clauses([build_d_clause(backbone)])
    mus = find_mus(with_d, rng, protected=instance.m, node_cap=node_cap)
    keep = [p for p in mus.parent_indices if p != instance.m]
    sub = CnfInstance(instance.n, tuple(instance.clauses[i] for i in keep), tuple(keep))
    return BmsResult(sub, tuple(keep), backbone)


# ----------------------------------------------------------------------------
# clause-removal procedures

def preserve_backbone_removal(instance: CnfInstance, bms: BmsResult, m_r: int, rng,
                              verify: bool = False) -> CnfInstance:
    """Remove ``m_r`` random clauses that are not in the BMS; the backbone is unchanged.

    The removed clauses are a prefix of one random ordering, so a fixed ``rng``
    stream gives nested removals as ``m_r`` grows.
    """
    outside = sorted(set(range(instance.m)) - set(bms.parent_indices))
    if not 0 <= m_r <= len(outside):
        raise ValueError(f"m_r={m_r} exceeds the {len(outside)} clauses outside the BMS")
    drop = _np_rng(rng).permutation(np.asarray(outside, dtype=np.int64))[:m_r]
    out = remove_clauses(instance, drop.tolist())
    if verify and compute_backbone(out, node_cap=DEFAULT_NODE_CAP) != bms.backbone:
        raise AssertionError("PRESERVE-BACKBONE changed the backbone")
    return out


def random_removal(instance: CnfInstance, m_r: int, rng) -> CnfInstance:
    if not 0 <= m_r <= instance.m:
        raise ValueError(f"m_r={m_r} out of range [0, {instance.m}]")
    drop = _np_rng(rng).permutation(instance.m)[:m_r]
    return remove_clauses(instance, drop.tolist())


@nb.njit(cache=True)
def _shrinkers(lits, starts, lens, active, nvars, bb_cand, node_cap, stats, out):
    """out[c] = backbone size lost when active clause c alone is removed (-1 if inactive)."""
    m = lens.shape[0]
    full = 0
    for v in range(1, nvars + 1):
        if bb_cand[v] != 0:
            full += 1
    for c in range(m):
        if not active[c]:
            out[c] = -1
            continue
        if full == 0:
            out[c] = 0
            continue
        active[c] = False
        cand = bb_cand.copy()
        r = _dpll.refine_backbone(lits, starts, lens, active, nvars, cand, node_cap, stats, True)
        active[c] = True
        if r == _dpll.BUDGET:
            return _dpll.BUDGET
        k = 0
        for v in range(1, nvars + 1):
            if cand[v] != 0:
                k += 1
        out[c] = full - k
    return _dpll.SAT


def _contributions(instance, active, backbone, node_cap):
    lits, starts, lens = instance.flat
    out = np.zeros(instance.m, dtype=np.int64)
    raw = np.zeros(3, dtype=np.int64)
    status = _shrinkers(lits, starts, lens, active, instance.n,
                        backbone_to_cand(backbone, instance.n), node_cap, raw, out)
    _absorb(raw)
    if status == _dpll.BUDGET:
        raise BudgetExhausted("backbone contribution: node cap exceeded")
    return out


@dataclass
class ReduceResult:
    instance: CnfInstance
    removed: int
    backbone_sizes: list[int]
    order: list[int] = field(default_factory=list)


def reduce_backbone_removal(instance: CnfInstance, m_r: int, rng,
                            node_cap: int = DEFAULT_NODE_CAP) -> ReduceResult:
    """Remove up to ``m_r`` clauses, each chosen uniformly among those whose removal
    strictly shrinks the current backbone; stops early once the backbone is empty."""
    if m_r < 0:
        raise ValueError("m_r must be >= 0")
    gen = _np_rng(rng)
    active = np.ones(instance.m, dtype=np.bool_)
    backbone = compute_backbone(instance, node_cap=node_cap)
    sizes = [len(backbone)]
    removed = 0
    order = []
    while removed < m_r and backbone:
        contrib = _contributions(instance, active, backbone, node_cap)
        eligible = np.flatnonzero(contrib > 0)
        if eligible.size == 0:
            break
        c = int(gen.choice(eligible))
        active[c] = False
        order.append(c)
        removed += 1
        backbone = compute_backbone(instance, node_cap=node_cap, active=active)
        sizes.append(len(backbone))
    out = remove_clauses(instance, np.flatnonzero(~active).tolist())
    return ReduceResult(out, removed, sizes, order)


def backbone_contribution(instance: CnfInstance, backbone=None,
                          node_cap: int = DEFAULT_NODE_CAP) -> np.ndarray:
    """bc[i] = |backbone(C)| - |backbone(C minus clause i)| for every clause."""
    if backbone is None:
        backbone = compute_backbone(instance, node_cap=node_cap)
    return _contributions(instance, np.ones(instance.m, dtype=np.bool_), Backbone(backbone),
                          node_cap)


def provenance_sidecar(parent: CnfInstance, derived: CnfInstance, backbone, seed, **extra) -> str:
    """JSON sidecar for a derived instance: parent hash, removed indices, backbone, seeds."""
    kept = set(derived.parent_indices or ())
    removed = [i for i in range(parent.m) if i not in kept]
    doc = {
        "parent_sha256": parent.content_hash(),
        "derived_sha256": derived.content_hash(),
        "removed_indices": removed,
        "parent_indices": list(derived.parent_indices or ()),
        "backbone": Backbone(backbone).sorted(),
        "seed": seed if isinstance(seed, (int, list)) else list(seed),
    }
    doc.update(extra)
    return json.dumps(doc, sort_keys=True, indent=1)


__all__ = [
    "BmsResult", "ReduceResult", "RobustnessEstimate", "backbone_contribution",
    "build_d_clause", "estimate_robustness", "find_bms", "find_mus", "halt_size",
    "preserve_backbone_removal", "provenance_sidecar", "random_removal",
    "reduce_backbone_removal", "robustness_trial",
]
