"""WSAT with the SKC variable-selection strategy, plus run instrumentation.

A run starts from a uniformly random assignment.  Each step picks an
unsatisfied clause uniformly at random, picks a variable from it by SKC and
flips it, until the assignment satisfies the instance or the flip cap is hit.

Instrumentation per run: the run length ``f_0``; for each probe ``b`` the
first flip count ``f_b`` at which at most ``b`` clauses are unsatisfied, with
a snapshot of that assignment; and optionally per-clause counts of the states
``T_1..T_f0`` in which the clause was unsatisfied (``T_0`` not counted).
"""
from __future__ import annotations

import json
import os
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field

import numba as nb
import numpy as np

from .cnf import CnfInstance, as_assignment
from .errors import BudgetExhausted, UnflippableClause
from .rng import kernel_state, kernel_states, next_below, next_double

DEFAULT_NOISE = 0.55
DEFAULT_MAX_FLIPS = 10**8

SOLVED = 0
CAP_EXCEEDED = 1
UNFLIPPABLE = 2


@dataclass(frozen=True)
class WsatParams:
    noise_p: float = DEFAULT_NOISE
    max_flips: int = DEFAULT_MAX_FLIPS
    rng_seed: int = 0
    probes: tuple[int, ...] = ()
    record_uf: bool = False
    max_tries: int = 1

    def __post_init__(self):
        if not 0.0 <= self.noise_p <= 1.0:
            raise ValueError("noise_p must lie in [0, 1]")
        if self.max_flips < 0 or self.max_tries < 1:
            raise ValueError("max_flips must be >= 0 and max_tries >= 1")
        if any(b < 0 for b in self.probes):
            raise ValueError("probes must be non-negative")
        object.__setattr__(self, "probes", tuple(sorted(set(int(b) for b in self.probes))))


@dataclass
class RunRecord:
    run_length: int
    f_values: dict[int, int]
    snapshots: dict[int, np.ndarray]
    clause_unsat_counts: np.ndarray | None
    terminated: str  # "solved" | "cap_exceeded"
    final_assignment: np.ndarray | None = field(default=None, repr=False)

    def to_json(self) -> str:
        return json.dumps({
            "run_length": self.run_length,
            "terminated": self.terminated,
            "f_values": {str(b): f for b, f in self.f_values.items()},
            "snapshots": {str(b): "".join("1" if x else "0" for x in t)
                          for b, t in self.snapshots.items()},
            "clause_unsat_counts": None if self.clause_unsat_counts is None
            else [int(x) for x in self.clause_unsat_counts],
        }, sort_keys=True)


@dataclass
class InstanceCostStats:
    runs: int
    cost: float
    quartiles: tuple[float, float, float]
    run_lengths: np.ndarray = field(repr=False)
    cap_exceeded: int = 0
    median_f5: float | None = None
    mean_f5: float | None = None
    mean_hdns_f5: float | None = None
    uf: np.ndarray | None = field(default=None, repr=False)

    def uf_csv(self) -> str:
        if self.uf is None:
            raise ValueError("unsatisfaction frequencies were not recorded")
        rows = ["clause_index,uf"] + [f"{i},{u!r}" for i, u in enumerate(self.uf.tolist())]
        return "\n".join(rows) + "\n"


def _wsat_arrays(instance: CnfInstance):
    """Deduplicated literals per clause; tautologies flagged (never unsatisfied)."""
    lits, starts, lens = [], [0], []
    kind = np.zeros(instance.m, dtype=np.int8)  # 0 normal, 1 tautology, 2 empty
    for i, c in enumerate(instance.clauses):
        seen = list(dict.fromkeys(c))
        if any(-l in seen for l in seen):
            kind[i] = 1
        elif not seen:
            kind[i] = 2
        lits.extend(seen)
        lens.append(len(seen))
        starts.append(starts[-1] + len(seen))
    return (np.asarray(lits, dtype=np.int32), np.asarray(starts[:-1], dtype=np.int64),
            np.asarray(lens, dtype=np.int32), kind)


@nb.njit(cache=True, inline="always")
def _code(lit):
    return 2 * lit if lit > 0 else -2 * lit + 1


@nb.njit(cache=True)
def _occ(lits, starts, lens, kind, nvars):
    size = 2 * nvars + 2
    counts = np.zeros(size + 1, dtype=np.int64)
    for c in range(lens.shape[0]):
        if kind[c] == 0:
            for i in range(starts[c], starts[c] + lens[c]):
                counts[_code(lits[i]) + 1] += 1
    for i in range(size):
        counts[i + 1] += counts[i]
    occ = np.empty(counts[size], dtype=np.int32)
    fill = counts[:size].copy()
    for c in range(lens.shape[0]):
        if kind[c] == 0:
            for i in range(starts[c], starts[c] + lens[c]):
                k = _code(lits[i])
                occ[fill[k]] = c
                fill[k] += 1
    return counts, occ


@nb.njit(cache=True)
def select_skc(c, lits, starts, lens, breakcount, noise, s, scratch):
    """SKC choice inside clause ``c``; ``scratch`` holds at least len(c) ints."""
    k = lens[c]
    b0 = starts[c]
    nzero = 0
    for j in range(k):
        q = lits[b0 + j]
        v = q if q > 0 else -q
        if breakcount[v] == 0:
            scratch[nzero] = v
            nzero += 1
    if nzero > 0:
        return scratch[next_below(s, nzero)]
    if next_double(s) < noise:
        q = lits[b0 + next_below(s, k)]
        return q if q > 0 else -q
    best = 1 << 30
    nbest = 0
    for j in range(k):
        q = lits[b0 + j]
        v = q if q > 0 else -q
        b = breakcount[v]
        if b < best:
            best = b
            nbest = 0
        if b == best:
            scratch[nbest] = v
            nbest += 1
    return scratch[next_below(s, nbest)]


@nb.njit(cache=True)
def _init_state(lits, starts, lens, kind, val, numtrue, critvar, breakcount, unsat, where, nvars):
    m = lens.shape[0]
    for v in range(nvars + 1):
        breakcount[v] = 0
    nun = 0
    for c in range(m):
        where[c] = -1
        if kind[c] != 0:
            continue
        t = 0
        cv = 0
        for i in range(starts[c], starts[c] + lens[c]):
            q = lits[i]
            v = q if q > 0 else -q
            if val[v] == (q > 0):
                t += 1
                cv = v
        numtrue[c] = t
        critvar[c] = cv
        if t == 0:
            where[c] = nun
            unsat[nun] = c
            nun += 1
        elif t == 1:
            breakcount[cv] += 1
    return nun


@nb.njit(cache=True)
def _flip(v, lits, starts, lens, occ_start, occ, val, numtrue, critvar, breakcount, unsat,
          where, nun):
    val[v] = not val[v]
    now_true = v if val[v] else -v
    k = _code(now_true)
    for i in range(occ_start[k], occ_start[k + 1]):
        c = occ[i]
        numtrue[c] += 1
        if numtrue[c] == 1:
            # remove from unsat list
            p = where[c]
            last = unsat[nun - 1]
            unsat[p] = last
            where[last] = p
            where[c] = -1
            nun -= 1
            critvar[c] = v
            breakcount[v] += 1
        elif numtrue[c] == 2:
            breakcount[critvar[c]] -= 1
    k ^= 1
    for i in range(occ_start[k], occ_start[k + 1]):
        c = occ[i]
        numtrue[c] -= 1
        if numtrue[c] == 0:
            where[c] = nun
            unsat[nun] = c
            nun += 1
            breakcount[v] -= 1
        elif numtrue[c] == 1:
            for j in range(starts[c], starts[c] + lens[c]):
                q = lits[j]
                u = q if q > 0 else -q
                if val[u] == (q > 0):
                    critvar[c] = u
                    breakcount[u] += 1
                    break
    return nun


@nb.njit(cache=True)
def run_batch(lits, starts, lens, kind, nvars, noise, max_flips, max_tries, seeds, probes,
              record_uf, out_len, out_status, out_f, out_snap, uf_acc, out_final, check_every):
    """Run ``seeds.shape[0]`` independent runs; returns the number of breaks-bookkeeping
    mismatches found when ``check_every`` > 0 (naive recomputation at checkpoints)."""
    m = lens.shape[0]
    occ_start, occ = _occ(lits, starts, lens, kind, nvars)
    nempty = 0
    for c in range(m):
        if kind[c] == 2:
            nempty += 1
    val = np.zeros(nvars + 1, dtype=np.bool_)
    numtrue = np.zeros(m, dtype=np.int32)
    critvar = np.zeros(m, dtype=np.int32)
    breakcount = np.zeros(nvars + 1, dtype=np.int64)
    unsat = np.zeros(max(m, 1), dtype=np.int32)
    where = np.zeros(m, dtype=np.int32)
    scratch = np.zeros(max(1, int(lens.max()) if m > 0 else 1), dtype=np.int32)
    naive = np.zeros(nvars + 1, dtype=np.int64)
    nprobe = probes.shape[0]
    mismatches = 0
    per_try = max_flips
    total_cap = max_flips * max_tries
    for r in range(seeds.shape[0]):
        s = seeds[r].copy()
        for v in range(1, nvars + 1):
            val[v] = next_double(s) < 0.5
        nun = _init_state(lits, starts, lens, kind, val, numtrue, critvar, breakcount, unsat,
                          where, nvars)
        for p in range(nprobe):
            out_f[r, p] = -1
        best_seen = nun + nempty + 1
        flips = 0
        in_try = 0
        status = CAP_EXCEEDED
        while True:
            tot = nun + nempty
            if tot < best_seen:
                best_seen = tot
                for p in range(nprobe):
                    if out_f[r, p] < 0 and tot <= probes[p]:
                        out_f[r, p] = flips
                        for v in range(1, nvars + 1):
                            out_snap[r, p, v - 1] = val[v]
            if tot == 0:
                status = SOLVED
                break
            if nun == 0:
                status = UNFLIPPABLE
                break
            if flips >= total_cap:
                break
            if in_try == per_try:
                for v in range(1, nvars + 1):
                    val[v] = next_double(s) < 0.5
                nun = _init_state(lits, starts, lens, kind, val, numtrue, critvar, breakcount,
                                  unsat, where, nvars)
                in_try = 0
                continue
            c = unsat[next_below(s, nun)]
            v = select_skc(c, lits, starts, lens, breakcount, noise, s, scratch)
            nun = _flip(v, lits, starts, lens, occ_start, occ, val, numtrue, critvar,
                        breakcount, unsat, where, nun)
            flips += 1
            in_try += 1
            if record_uf:
                for i in range(nun):
                    uf_acc[unsat[i]] += 1
                if nempty > 0:
                    for c2 in range(m):
                        if kind[c2] == 2:
                            uf_acc[c2] += 1
            if check_every > 0 and flips % check_every == 0:
                for u in range(nvars + 1):
                    naive[u] = 0
                for c2 in range(m):
                    if kind[c2] != 0:
                        continue
                    t = 0
                    cv = 0
                    for i in range(starts[c2], starts[c2] + lens[c2]):
                        q = lits[i]
                        u = q if q > 0 else -q
                        if val[u] == (q > 0):
                            t += 1
                            cv = u
                    if t == 1:
                        naive[cv] += 1
                    if t != numtrue[c2] or (t == 0) != (where[c2] >= 0):
                        mismatches += 1
                for u in range(1, nvars + 1):
                    if naive[u] != breakcount[u]:
                        mismatches += 1
        out_len[r] = flips
        out_status[r] = status
        if out_final.shape[0] > 0:
            for v in range(1, nvars + 1):
                out_final[r, v - 1] = val[v]
    return mismatches


@dataclass
class _Batch:
    lengths: np.ndarray
    status: np.ndarray
    f: np.ndarray
    snaps: np.ndarray
    uf_sum: np.ndarray | None
    final: np.ndarray
    mismatches: int


def _run(instance: CnfInstance, params: WsatParams, seeds: np.ndarray, keep_final=False,
         check_every=0, per_run_uf=False) -> _Batch:
    lits, starts, lens, kind = _wsat_arrays(instance)
    probes = np.asarray(params.probes, dtype=np.int64)
    R = seeds.shape[0]
    out_len = np.zeros(R, dtype=np.int64)
    out_status = np.zeros(R, dtype=np.int8)
    out_f = np.full((R, probes.size), -1, dtype=np.int64)
    out_snap = np.zeros((R, probes.size, instance.n), dtype=np.bool_)
    uf = np.zeros(max(instance.m, 0), dtype=np.int64)
    final = np.zeros((R if keep_final else 0, instance.n), dtype=np.bool_)
    mism = run_batch(lits, starts, lens, kind, instance.n, float(params.noise_p),
                     int(params.max_flips), int(params.max_tries), seeds, probes,
                     bool(params.record_uf), out_len, out_status, out_f, out_snap, uf, final,
                     int(check_every))
    if (out_status == UNFLIPPABLE).any():
        raise UnflippableClause("only the empty clause is unsatisfied; no variable to flip")
    return _Batch(out_len, out_status, out_f, out_snap, uf if params.record_uf else None,
                  final, int(mism))


def _record(b: _Batch, params: WsatParams, r: int, uf=None) -> RunRecord:
    fv = {bb: int(b.f[r, i]) for i, bb in enumerate(params.probes) if b.f[r, i] >= 0}
    snaps = {bb: b.snaps[r, i].copy() for i, bb in enumerate(params.probes) if b.f[r, i] >= 0}
    return RunRecord(
        run_length=int(b.lengths[r]),
        f_values=fv,
        snapshots=snaps,
        clause_unsat_counts=uf,
        terminated="solved" if b.status[r] == SOLVED else "cap_exceeded",
        final_assignment=b.final[r].copy() if b.final.shape[0] else None,
    )


def wsat_run(instance: CnfInstance, params: WsatParams = WsatParams(), *,
             stream: tuple[int, ...] = (), check_every: int = 0) -> RunRecord:
    """One WSAT run seeded by ``(params.rng_seed, *stream)``."""
    seeds = kernel_state(params.rng_seed, *stream)[None, :]
    b = _run(instance, params, seeds, keep_final=True, check_every=check_every)
    rec = _record(b, params, 0, b.uf_sum)
    if check_every and b.mismatches:
        raise AssertionError(f"incremental break counts diverged {b.mismatches} times")
    return rec


def wsat_runs(instance: CnfInstance, params: WsatParams, seeds: np.ndarray,
              keep_final: bool = False) -> list[RunRecord]:
    """Runs for explicit kernel states (rows of ``seeds``); uf vectors are per-run."""
    out = []
    for r in range(seeds.shape[0]):
        b = _run(instance, params, seeds[r:r + 1], keep_final=keep_final)
        out.append(_record(b, params, 0, b.uf_sum))
    return out


def select_variable_skc(clause_index: int, instance: CnfInstance, t, noise_p: float,
                        state: np.ndarray) -> int:
    """SKC choice for one clause under assignment ``t``.

    ``state`` is a kernel RNG state (see ``rng.kernel_state``), advanced in place.
    """
    t = as_assignment(t, instance.n)
    c = instance.clauses[clause_index]
    if any(t[abs(l) - 1] == (l > 0) for l in c):
        raise ValueError("SKC selection on a satisfied clause")
    if not c:
        raise UnflippableClause("empty clause has no variable")
    lits, starts, lens, kind = _wsat_arrays(instance)
    val = np.zeros(instance.n + 1, dtype=np.bool_)
    val[1:] = t
    numtrue = np.zeros(instance.m, dtype=np.int32)
    critvar = np.zeros(instance.m, dtype=np.int32)
    breakcount = np.zeros(instance.n + 1, dtype=np.int64)
    unsat = np.zeros(max(instance.m, 1), dtype=np.int32)
    where = np.zeros(instance.m, dtype=np.int32)
    _init_state(lits, starts, lens, kind, val, numtrue, critvar, breakcount, unsat, where,
                instance.n)
    scratch = np.zeros(max(1, int(lens.max())), dtype=np.int32)
    return int(select_skc(clause_index, lits, starts, lens, breakcount, float(noise_p), state,
                          scratch))


def break_counts(instance: CnfInstance, t) -> np.ndarray:
    """breaks[v] for every variable (index 0 unused), from the incremental initializer."""
    t = as_assignment(t, instance.n)
    lits, starts, lens, kind = _wsat_arrays(instance)
    val = np.zeros(instance.n + 1, dtype=np.bool_)
    val[1:] = t
    breakcount = np.zeros(instance.n + 1, dtype=np.int64)
    _init_state(lits, starts, lens, kind, val, np.zeros(instance.m, np.int32),
                np.zeros(instance.m, np.int32), breakcount, np.zeros(max(instance.m, 1), np.int32),
                np.zeros(instance.m, np.int32), instance.n)
    return breakcount


def run_seeds(root_seed: int, instance_id: int, runs: int, start: int = 0) -> np.ndarray:
    """Kernel states for runs ``start..start+runs-1`` of one instance (family
    ``(root_seed, instance_id)``)."""
    return kernel_states(root_seed, (instance_id,), runs, start)


def _chunk_worker(args):
    instance, params, seeds = args
    return _run(instance, params, seeds)


def measure_cost(instance: CnfInstance, R: int = 1000, params: WsatParams = WsatParams(), *,
                 instance_id: int = 0, workers: int = 1, hdns_solutions=None,
                 on_cap: str = "record") -> InstanceCostStats:
    """Median-of-R run length plus f_5 / hdns(T_f5) / uf summaries.

    Run ``i`` uses the stream ``(params.rng_seed, instance_id, i)``, so the
    result is identical for any ``workers``.  ``hdns_solutions`` (SolutionCubes)
    enables the mean hdns of the f_5 snapshots when probe 5 is requested.
    """
    if R < 1:
        raise ValueError("R must be >= 1")
    if on_cap not in ("record", "fail"):
        raise ValueError("on_cap must be 'record' or 'fail'")
    seeds = run_seeds(params.rng_seed, instance_id, R)
    if workers > 1 and R > 1:
        bounds = np.linspace(0, R, min(workers, R) + 1).astype(int)
        chunks = [(instance, params, seeds[a:b]) for a, b in zip(bounds[:-1], bounds[1:])]
        with ProcessPoolExecutor(max_workers=workers) as ex:
            parts = list(ex.map(_chunk_worker, chunks))
        batch = _Batch(
            np.concatenate([p.lengths for p in parts]),
            np.concatenate([p.status for p in parts]),
            np.concatenate([p.f for p in parts]),
            np.concatenate([p.snaps for p in parts]),
            sum(p.uf_sum for p in parts) if params.record_uf else None,
            np.zeros((0, instance.n), dtype=bool),
            0,
        )
    else:
        batch = _run(instance, params, seeds)
    return summarize(batch, params, instance, hdns_solutions, on_cap)


def summarize(batch: _Batch, params: WsatParams, instance: CnfInstance, hdns_solutions=None,
              on_cap: str = "record") -> InstanceCostStats:
    from .solver import hdns_many
    from .stats import median, percentiles

    lengths = batch.lengths
    capped = int(np.count_nonzero(batch.status == CAP_EXCEEDED))
    if capped and on_cap == "fail":
        raise BudgetExhausted(f"{capped} of {lengths.size} runs hit the flip cap")
    q = percentiles(lengths, (25, 50, 75))
    out = InstanceCostStats(runs=int(lengths.size), cost=float(median(lengths)),
                            quartiles=(float(q[0]), float(q[1]), float(q[2])),
                            run_lengths=lengths, cap_exceeded=capped)
    if 5 in params.probes:
        i = params.probes.index(5)
        f5 = batch.f[:, i]
        ok = f5 >= 0
        if ok.any():
            out.median_f5 = float(median(f5[ok]))
            out.mean_f5 = float(f5[ok].mean())
            if hdns_solutions is not None:
                d = hdns_many(batch.snaps[ok, i, :], hdns_solutions)
                out.mean_hdns_f5 = float(d.mean())
    if batch.uf_sum is not None:
        out.uf = batch.uf_sum / lengths.size
    return out


def default_workers() -> int:
    return int(os.environ.get("BBFRAG_WORKERS", "1"))
