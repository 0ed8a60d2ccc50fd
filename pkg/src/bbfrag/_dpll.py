"""Compiled DPLL search.

Counter-based DPLL: every clause tracks how many of its literals are true
and false, so unit clauses and conflicts are found while assigning.  The
search is iterative (explicit decision stack) but explores exactly the tree
of the textbook recursion: unit propagation, pure literals (decision mode
only), then branch on the unassigned variable occurring most often in
not-yet-satisfied clauses, true first.

Clauses are addressed through ``lits/starts/lens`` plus an ``active`` mask,
so sub-bags are solved without rebuilding arrays.  One optional extra clause
(``extra``, used for the d-clause) is appended at index ``m`` when
``extra_on`` is set.
"""
import numba as nb
import numpy as np

UNSAT = 0
SAT = 1
BUDGET = 2
OVERFLOW = 3

MODE_DECIDE = 0
MODE_COUNT = 1
MODE_CUBES = 2

# stats slots
ST_NODES = 0
ST_CALLS = 1


@nb.njit(cache=True, inline="always")
def _code(lit):
    return 2 * lit if lit > 0 else -2 * lit + 1


@nb.njit(cache=True)
def _build_occ(lits, starts, lens, active, extra, extra_on, nvars):
    m = lens.shape[0]
    size = 2 * nvars + 2
    counts = np.zeros(size + 1, dtype=np.int64)
    for c in range(m):
        if active[c]:
            for i in range(starts[c], starts[c] + lens[c]):
                counts[_code(lits[i]) + 1] += 1
    if extra_on:
        for i in range(extra.shape[0]):
            counts[_code(extra[i]) + 1] += 1
    for i in range(size):
        counts[i + 1] += counts[i]
    occ = np.empty(counts[size], dtype=np.int32)
    fill = counts[:size].copy()
    for c in range(m):
        if active[c]:
            for i in range(starts[c], starts[c] + lens[c]):
                k = _code(lits[i])
                occ[fill[k]] = c
                fill[k] += 1
    if extra_on:
        for i in range(extra.shape[0]):
            k = _code(extra[i])
            occ[fill[k]] = m
            fill[k] += 1
    return counts, occ


@nb.njit(cache=True, inline="always")
def _lit_at(lits, starts, extra, m, c, j):
    if c == m:
        return extra[j]
    return lits[starts[c] + j]


@nb.njit(cache=True)
def _enqueue(lit, val, trail, st):
    v = lit if lit > 0 else -lit
    want = 1 if lit > 0 else 0
    if val[v] == -1:
        val[v] = want
        trail[st[0]] = lit
        st[0] += 1
        return True
    return val[v] == want


@nb.njit(cache=True)
def _propagate(lits, starts, clen, extra, m, occ_start, occ, val, ntrue, nfalse, trail, st):
    """Process the trail from the queue head; st = [trail_len, qhead, nsat]."""
    conflict = False
    while st[1] < st[0]:
        lit = trail[st[1]]
        st[1] += 1
        k = _code(lit)
        for i in range(occ_start[k], occ_start[k + 1]):
            c = occ[i]
            if ntrue[c] == 0:
                st[2] += 1
            ntrue[c] += 1
        k ^= 1
        for i in range(occ_start[k], occ_start[k + 1]):
            c = occ[i]
            nfalse[c] += 1
            if conflict or ntrue[c] != 0:
                continue
            rem = clen[c] - nfalse[c]
            if rem == 0:
                conflict = True
            elif rem == 1:
                unit = 0
                sat = False
                for j in range(clen[c]):
                    q = _lit_at(lits, starts, extra, m, c, j)
                    v = q if q > 0 else -q
                    if val[v] == -1:
                        unit = q
                    elif val[v] == (1 if q > 0 else 0):
                        sat = True
                        break
                if not sat:
                    if unit == 0:
                        conflict = True
                    elif not _enqueue(unit, val, trail, st):
                        conflict = True
        if conflict:
            return True
    return False


@nb.njit(cache=True)
def _undo(to, occ_start, occ, val, ntrue, nfalse, trail, st):
    for i in range(st[0] - 1, to - 1, -1):
        lit = trail[i]
        if i < st[1]:
            k = _code(lit)
            for j in range(occ_start[k], occ_start[k + 1]):
                c = occ[j]
                ntrue[c] -= 1
                if ntrue[c] == 0:
                    st[2] -= 1
            k ^= 1
            for j in range(occ_start[k], occ_start[k + 1]):
                nfalse[occ[j]] -= 1
        val[lit if lit > 0 else -lit] = -1
    st[0] = to
    if st[1] > to:
        st[1] = to


@nb.njit(cache=True)
def search(lits, starts, lens, active, extra, extra_on, nvars, assumps, mode, node_cap,
           model_out, cube_bits, cube_mask, free_hist, stats, use_pure):
    """Run DPLL.

    MODE_DECIDE: returns SAT (model in ``model_out``), UNSAT or BUDGET.
    MODE_COUNT: adds one count per solution cube to ``free_hist[#free vars]``;
        returns SAT/UNSAT (any solution found) or BUDGET.
    MODE_CUBES: like COUNT but also stores each cube (value bits + assigned mask,
        64 variables per word) and returns OVERFLOW when the buffers fill up.
        The number of cubes stored is ``stats[2]``.
    """
    m = lens.shape[0]
    stats[ST_CALLS] += 1
    clen = np.empty(m + 1, dtype=np.int32)
    nactive = 0
    for c in range(m):
        if active[c]:
            clen[c] = lens[c]
            nactive += 1
            if lens[c] == 0:
                return UNSAT
        else:
            clen[c] = 0
    if extra_on:
        clen[m] = extra.shape[0]
        nactive += 1
        if extra.shape[0] == 0:
            return UNSAT
    else:
        clen[m] = 0
    occ_start, occ = _build_occ(lits, starts, lens, active, extra, extra_on, nvars)

    val = np.full(nvars + 1, -1, dtype=np.int8)
    ntrue = np.zeros(m + 1, dtype=np.int32)
    nfalse = np.zeros(m + 1, dtype=np.int32)
    trail = np.empty(nvars + 1, dtype=np.int32)
    st = np.zeros(3, dtype=np.int64)
    dec_pos = np.empty(nvars + 2, dtype=np.int64)
    dec_lit = np.empty(nvars + 2, dtype=np.int32)
    flipped = np.zeros(nvars + 2, dtype=np.bool_)
    pos = np.empty(nvars + 1, dtype=np.int32)
    neg = np.empty(nvars + 1, dtype=np.int32)
    cube_cap = cube_bits.shape[0]
    ncubes = 0
    found = False

    for a in assumps:
        if not _enqueue(a, val, trail, st):
            return UNSAT

    level = 0
    nodes = 0
    while True:
        conflict = _propagate(lits, starts, clen, extra, m, occ_start, occ, val,
                              ntrue, nfalse, trail, st)
        if not conflict:
            if st[2] == nactive:
                found = True
                if mode == MODE_DECIDE:
                    for v in range(1, nvars + 1):
                        model_out[v - 1] = val[v] != 0
                    stats[ST_NODES] += nodes
                    return SAT
                free = 0
                for v in range(1, nvars + 1):
                    if val[v] == -1:
                        free += 1
                free_hist[free] += 1
                if mode == MODE_CUBES:
                    if ncubes == cube_cap:
                        stats[ST_NODES] += nodes
                        return OVERFLOW
                    for w in range(cube_bits.shape[1]):
                        cube_bits[ncubes, w] = 0
                        cube_mask[ncubes, w] = 0
                    for v in range(1, nvars + 1):
                        if val[v] != -1:
                            w = (v - 1) >> 6
                            b = np.uint64(1) << np.uint64((v - 1) & 63)
                            cube_mask[ncubes, w] |= b
                            if val[v] == 1:
                                cube_bits[ncubes, w] |= b
                    ncubes += 1
                    stats[2] = ncubes
                conflict = True
            else:
                for v in range(nvars + 1):
                    pos[v] = 0
                    neg[v] = 0
                for c in range(m + 1):
                    if clen[c] == 0 or ntrue[c] != 0:
                        continue
                    for j in range(clen[c]):
                        q = _lit_at(lits, starts, extra, m, c, j)
                        if q > 0:
                            if val[q] == -1:
                                pos[q] += 1
                        elif val[-q] == -1:
                            neg[-q] += 1
                if mode == MODE_DECIDE and use_pure:
                    npure = 0
                    for v in range(1, nvars + 1):
                        if pos[v] > 0 and neg[v] == 0:
                            _enqueue(v, val, trail, st)
                            npure += 1
                        elif neg[v] > 0 and pos[v] == 0:
                            _enqueue(-v, val, trail, st)
                            npure += 1
                    if npure > 0:
                        continue
                best = 0
                bestf = -1
                for v in range(1, nvars + 1):
                    f = pos[v] + neg[v]
                    if f > bestf:
                        bestf = f
                        best = v
                nodes += 1
                if node_cap > 0 and nodes > node_cap:
                    stats[ST_NODES] += nodes
                    return BUDGET
                level += 1
                dec_pos[level] = st[0]
                dec_lit[level] = best
                flipped[level] = False
                _enqueue(best, val, trail, st)
                continue
        # backtrack
        while True:
            if level == 0:
                stats[ST_NODES] += nodes
                return SAT if found else UNSAT
            _undo(dec_pos[level], occ_start, occ, val, ntrue, nfalse, trail, st)
            if not flipped[level]:
                flipped[level] = True
                _enqueue(-dec_lit[level], val, trail, st)
                break
            level -= 1


_EMPTY_I32 = np.zeros(0, dtype=np.int32)


@nb.njit(cache=True)
def decide(lits, starts, lens, active, extra, extra_on, nvars, assumps, node_cap, model_out, stats):
    dummy_bits = np.zeros((0, 1), dtype=np.uint64)
    hist = np.zeros(1, dtype=np.int64)
    return search(lits, starts, lens, active, extra, extra_on, nvars, assumps, MODE_DECIDE,
                  node_cap, model_out, dummy_bits, dummy_bits, hist, stats, True)


@nb.njit(cache=True)
def occurring(lits, starts, lens, active, nvars):
    used = np.zeros(nvars + 1, dtype=np.bool_)
    for c in range(lens.shape[0]):
        if active[c]:
            for i in range(starts[c], starts[c] + lens[c]):
                q = lits[i]
                used[q if q > 0 else -q] = True
    return used


@nb.njit(cache=True)
def refine_backbone(lits, starts, lens, active, nvars, cand, node_cap, stats, dcheck):
    """Shrink ``cand`` (per variable: +1 / -1 candidate polarity, 0 none) to the backbone.

    Every candidate must be a literal that may be entailed; literals of the
    true backbone are never removed.  With ``dcheck`` set, one call on
    ``C and (negation of all candidates)`` first; UNSAT there confirms every
    candidate at once.  Returns SAT (done), UNSAT (instance unsatisfiable)
    or BUDGET.
    """
    model = np.empty(nvars, dtype=np.bool_)
    one = np.empty(1, dtype=np.int32)
    none = np.zeros(0, dtype=np.int32)
    used = occurring(lits, starts, lens, active, nvars)
    k = 0
    for v in range(1, nvars + 1):
        if cand[v] != 0 and not used[v]:
            cand[v] = 0
        if cand[v] != 0:
            k += 1
    if k == 0:
        return SAT
    if dcheck:
        d = np.empty(k, dtype=np.int32)
        while True:
            k = 0
            for v in range(1, nvars + 1):
                if cand[v] != 0:
                    d[k] = -v if cand[v] > 0 else v
                    k += 1
            if k == 0:
                return SAT
            r = decide(lits, starts, lens, active, d[:k], True, nvars, none, node_cap, model, stats)
            if r == BUDGET:
                return BUDGET
            if r == UNSAT:
                return SAT
            for v in range(1, nvars + 1):
                if cand[v] != 0 and (model[v - 1] != (cand[v] > 0)):
                    cand[v] = 0
            # each model falsifies at least one candidate, so this terminates
    confirmed = np.zeros(nvars + 1, dtype=np.bool_)
    for v in range(1, nvars + 1):
        if cand[v] == 0 or confirmed[v]:
            continue
        one[0] = -v if cand[v] > 0 else v
        r = decide(lits, starts, lens, active, none, False, nvars, one, node_cap, model, stats)
        if r == BUDGET:
            return BUDGET
        if r == UNSAT:
            confirmed[v] = True
        else:
            for u in range(1, nvars + 1):
                if cand[u] != 0 and not confirmed[u] and (model[u - 1] != (cand[u] > 0)):
                    cand[u] = 0
    return SAT


@nb.njit(cache=True)
def backbone(lits, starts, lens, active, nvars, node_cap, stats, cand_out, dcheck):
    """Backbone from scratch: witness-seeded candidates, then refinement."""
    model = np.empty(nvars, dtype=np.bool_)
    none = np.zeros(0, dtype=np.int32)
    r = decide(lits, starts, lens, active, none, False, nvars, none, node_cap, model, stats)
    if r != SAT:
        return r
    for v in range(1, nvars + 1):
        cand_out[v] = 1 if model[v - 1] else -1
    cand_out[0] = 0
    return refine_backbone(lits, starts, lens, active, nvars, cand_out, node_cap, stats, dcheck)
