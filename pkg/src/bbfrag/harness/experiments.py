"""Per-instance work units and per-cell summaries for every experiment.

A unit is one generated instance, named by ``(ratio, target, index)``.
Its generator streams, WSAT seeds and every other random choice derive from
``root_seed`` and that name alone, so a unit computes the same rows on any
worker and in any order.
"""
from __future__ import annotations

import math
from pathlib import Path

import numpy as np

from .. import stats
from ..backbone_lab import (estimate_robustness, find_bms, preserve_backbone_removal,
                            provenance_sidecar, random_removal, reduce_backbone_removal,
                            backbone_contribution)
from ..cnf import CnfInstance, remove_clauses
from ..dimacs import write_dimacs
from ..errors import BudgetExhausted, UndefinedStatistic
from ..generate import GenSpec, sample_satisfiable, sample_with_backbone_size
from ..rng import child_seed, generator
from ..solver import compute_backbone, count_solutions, solution_cubes
from ..wsat import WsatParams, measure_cost
from .config import ExperimentConfig

# stream purposes
WSAT, ROBUST, BMS, PRESERVE, RANDOM, REDUCE, STATS, UF = range(1, 9)

SUMMARY_PERCENTILES = (10, 50, 90)


class Unit:
    """One instance slot of an experiment cell."""

    def __init__(self, cfg: ExperimentConfig, ratio: float, target: int | None, index: int):
        self.cfg = cfg
        self.ratio = float(ratio)
        self.target = target
        self.index = int(index)
        self.spec = GenSpec.from_ratio(cfg.n, ratio, cfg.k, cfg.root_seed)
        self.key = (cfg.n, cfg.k, self.spec.m, 0 if target is None else target + 1, self.index)

    @property
    def instance_id(self) -> str:
        t = "any" if self.target is None else str(self.target)
        return f"n{self.cfg.n}-m{self.spec.m}-b{t}-{self.index:04d}"

    def sample(self):
        cfg = self.cfg
        if self.target is None:
            return sample_satisfiable(self.spec, cfg.gen_budget, self.key, cfg.node_cap)
        return sample_with_backbone_size(self.spec, self.target, cfg.gen_budget, self.key,
                                         cfg.node_cap)

    def lineage(self, attempt: int) -> tuple[int, ...]:
        return (self.cfg.root_seed, *self.key, attempt)

    def base_row(self) -> dict:
        return {
            "ratio": self.ratio,
            "target": "" if self.target is None else self.target,
            "index": self.index,
            "instance_id": self.instance_id,
            "root_seed": self.cfg.root_seed,
            "gen_key": ":".join(str(x) for x in self.key),
        }


def _hash_code(inst: CnfInstance) -> int:
    return int(inst.content_hash()[:15], 16)


def _seed(lineage, purpose: int, inst: CnfInstance | None = None) -> int:
    """Seeds keyed on instance content: equal derived instances share their draws."""
    extra = () if inst is None else (_hash_code(inst),)
    return child_seed(*lineage, purpose, *extra)


def _cost(cfg: ExperimentConfig, inst: CnfInstance, lineage, *, probes=(), cubes=None,
          record_uf=False, purpose=WSAT):
    seed = _seed(lineage, purpose, inst)
    params = WsatParams(cfg.noise, cfg.max_flips, seed, tuple(probes), record_uf)
    return measure_cost(inst, cfg.runs, params, hdns_solutions=cubes), seed


def _cost_cols(st, seed) -> dict:
    return {"cost": st.cost, "q1": st.quartiles[0], "q3": st.quartiles[2],
            "cap_exceeded": st.cap_exceeded, "wsat_seed": seed}


def _robustness(cfg, inst, lineage, backbone) -> dict:
    if not backbone:
        return {"robustness": "", "robustness_se": "", "trials": 0, "converged": "",
                "status_robustness": "undefined"}
    est = estimate_robustness(inst, (_seed(lineage, ROBUST, inst),), cfg.min_trials, cfg.rel_se,
                              cfg.max_trials, backbone=backbone, halving=cfg.halving,
                              node_cap=cfg.node_cap)
    return {"robustness": est.mean, "robustness_se": est.std_error, "trials": est.trials,
            "converged": int(est.converged), "status_robustness": "ok"}


def _save(cfg: ExperimentConfig, parent: CnfInstance, derived: CnfInstance, backbone, seed,
          **extra) -> str:
    h = derived.content_hash()
    if cfg.save_instances:
        d = Path(cfg.out_dir) / cfg.experiment / "instances"
        d.mkdir(parents=True, exist_ok=True)
        _write_once(d / f"{h}.cnf", write_dimacs(derived))
        _write_once(d / f"{h}.json", provenance_sidecar(parent, derived, backbone, seed, **extra))
    return h


def _write_once(path: Path, text: str) -> None:
    if path.exists():
        return
    tmp = path.with_suffix(path.suffix + f".{id(text)}.tmp")
    tmp.write_text(text)
    tmp.replace(path)


# ----------------------------------------------------------------------------
# unit bodies: each returns {table: [rows]}

def main_table(experiment: str) -> str:
    return {"bms-interpolation": "interpolation", "uf-bc": "cohort"}.get(experiment, "instances")


def run_unit(cfg: ExperimentConfig, ratio: float, target, index: int) -> dict[str, list[dict]]:
    unit = Unit(cfg, ratio, target, index)
    row = unit.base_row()
    table = main_table(cfg.experiment)
    try:
        rep = unit.sample()
    except BudgetExhausted as e:
        row.update(status="budget_exhausted", detail=str(e))
        return {table: [row]}
    inst = rep.instance
    lineage = unit.lineage(rep.attempt_index)
    row.update(status="ok", attempt=rep.attempt_index, attempts=rep.attempts, m=inst.m,
               sha256=inst.content_hash())
    if rep.backbone is not None:
        row["backbone_size"] = len(rep.backbone)
    try:
        return BODIES[cfg.experiment](cfg, unit, inst, rep, lineage, row)
    except BudgetExhausted as e:
        row.update(status="node_cap", detail=str(e))
        return {table: [row]}


def _body_cost(cfg, unit, inst, rep, lineage, row):
    st, seed = _cost(cfg, inst, lineage)
    row.update(_cost_cols(st, seed))
    return {"instances": [row]}


def _body_nsolutions(cfg, unit, inst, rep, lineage, row):
    st, seed = _cost(cfg, inst, lineage)
    row.update(_cost_cols(st, seed))
    count = count_solutions(inst, node_cap=cfg.node_cap)
    row.update(nsolutions=count, log10_nsolutions=math.log10(count),
               log10_cost=_log10(st.cost))
    return {"instances": [row]}


def _body_search(cfg, unit, inst, rep, lineage, row):
    cubes = solution_cubes(inst, node_cap=cfg.node_cap)
    probes = tuple(sorted(set(cfg.probes) | {5}))
    st, seed = _cost(cfg, inst, lineage, probes=probes, cubes=cubes)
    row.update(_cost_cols(st, seed))
    row.update(median_f5=st.median_f5, mean_f5=st.mean_f5, mean_hdns_f5=st.mean_hdns_f5,
               nsolutions=cubes.count(), log10_cost=_log10(st.cost))
    return {"instances": [row]}


def _body_robustness(cfg, unit, inst, rep, lineage, row):
    backbone = rep.backbone if rep.backbone is not None else compute_backbone(inst, cfg.node_cap)
    row["backbone_size"] = len(backbone)
    row.update(_robustness(cfg, inst, lineage, backbone))
    if cfg.experiment == "robustness-correlation":
        st, seed = _cost(cfg, inst, lineage)
        row.update(_cost_cols(st, seed))
        row["log10_cost"] = _log10(st.cost)
    return {"instances": [row]}


def _body_bms(cfg, unit, inst, rep, lineage, row):
    backbone = rep.backbone if rep.backbone is not None else compute_backbone(inst, cfg.node_cap)
    bms = find_bms(inst, (_seed(lineage, BMS),), backbone=backbone, node_cap=cfg.node_cap)
    row.update(backbone_size=len(backbone), bms_size=bms.size)
    slack = inst.m - bms.size
    cache: dict[str, dict] = {}
    out = []

    def measure(derived, procedure, m_r, removed, robustness):
        h = derived.content_hash()
        if h not in cache:
            st, seed = _cost(cfg, derived, lineage)
            cache[h] = _cost_cols(st, seed)
        r = dict(row, procedure=procedure, m_r=m_r, removed=removed, m_derived=derived.m,
                 derived_sha256=h, **cache[h])
        if robustness:
            key = ("rob", h)
            if key not in cache:
                cache[key] = _robustness(cfg, derived, lineage, backbone)
            r.update(cache[key])
        out.append(r)

    schedule = sorted(set(cfg.m_r))
    if "preserve" in cfg.procedures:
        stream = (_seed(lineage, PRESERVE),)
        for m_r in schedule:
            eff = min(m_r, slack)
            derived = preserve_backbone_removal(inst, bms, eff, stream)
            _save(cfg, inst, derived, backbone, list(stream), procedure="preserve", m_r=eff)
            measure(derived, "preserve", m_r, eff, True)
        _save(cfg, inst, bms.sub_instance, backbone, [_seed(lineage, BMS)], procedure="bms")
        measure(bms.sub_instance, "bms", "BMS", slack, True)
    if "random" in cfg.procedures:
        stream = (_seed(lineage, RANDOM),)
        for m_r in schedule:
            eff = min(m_r, inst.m)
            measure(random_removal(inst, eff, stream), "random", m_r, eff, False)
    if "reduce" in cfg.procedures:
        chain = reduce_backbone_removal(inst, max(schedule), (_seed(lineage, REDUCE),),
                                        node_cap=cfg.node_cap)
        for m_r in schedule:
            drop = chain.order[:m_r]
            measure(remove_clauses(inst, drop), "reduce", m_r, len(drop), False)
    return {"interpolation": out}


def _body_ufbc_cohort(cfg, unit, inst, rep, lineage, row):
    st, seed = _cost(cfg, inst, lineage)
    row.update(_cost_cols(st, seed))
    return {"cohort": [row]}


BODIES = {
    "cost-peak": _body_cost,
    "cost-vs-ratio-controlled": _body_cost,
    "nsolutions": _body_nsolutions,
    "search-behavior": _body_search,
    "robustness-vs-ratio": _body_robustness,
    "robustness-correlation": _body_robustness,
    "bms-interpolation": _body_bms,
    "uf-bc": _body_ufbc_cohort,
}


def top_set(values: np.ndarray, fraction: float) -> np.ndarray:
    """Indices whose value is at least the (1 - fraction) percentile; ties included.

    When that percentile is the minimum value (e.g. most bc values are 0) the
    tie rule would select every clause, so the values strictly above it are
    taken instead.  A constant vector selects everything.
    """
    values = np.asarray(values)
    thr = np.percentile(values, 100.0 * (1.0 - fraction))
    if thr <= values.min() and values.max() > thr:
        return np.flatnonzero(values > thr)
    return np.flatnonzero(values >= thr)


def run_ufbc_unit(cfg: ExperimentConfig, percentile: int, cohort_row: dict) -> dict[str, list[dict]]:
    """uf and bc for one percentile-selected cohort instance."""
    target = None if cohort_row["target"] == "" else int(cohort_row["target"])
    unit = Unit(cfg, cohort_row["ratio"], target, cohort_row["index"])
    rep = unit.sample()
    inst = rep.instance
    lineage = unit.lineage(rep.attempt_index)
    backbone = compute_backbone(inst, cfg.node_cap)
    bc = backbone_contribution(inst, backbone, node_cap=cfg.node_cap).astype(float)
    st, seed = _cost(cfg, inst, lineage, record_uf=True, purpose=UF)
    uf = st.uf
    top_bc = top_set(bc, cfg.top_fraction)
    top_uf = top_set(uf, cfg.top_fraction)
    summary = {
        "percentile": percentile,
        "instance_id": unit.instance_id,
        "root_seed": cfg.root_seed,
        "gen_key": ":".join(str(x) for x in unit.key),
        "attempt": rep.attempt_index,
        "cost": cohort_row["cost"],
        "backbone_size": len(backbone),
        "uf_mean_all": float(uf.mean()), "uf_std_all": float(uf.std()),
        "uf_mean_top_bc": float(uf[top_bc].mean()), "uf_std_top_bc": float(uf[top_bc].std()),
        "n_top_bc": int(top_bc.size),
        "bc_mean_all": float(bc.mean()), "bc_std_all": float(bc.std()),
        "bc_mean_top_uf": float(bc[top_uf].mean()), "bc_std_top_uf": float(bc[top_uf].std()),
        "n_top_uf": int(top_uf.size),
        "uf_runs": st.runs, "uf_cost": st.cost, "uf_seed": seed,
    }
    clauses = [{"percentile": percentile, "instance_id": unit.instance_id, "clause_index": i,
                "uf": float(uf[i]), "bc": int(bc[i])} for i in range(inst.m)]
    return {"ufbc": [summary], "clauses": clauses}


def select_percentile_rows(rows: list[dict], percentiles) -> list[tuple[int, dict]]:
    """The cohort instance of cost rank ``round(q/100 * N)`` (1-based, ties by index)."""
    ok = sorted((r for r in rows if r.get("status") == "ok"), key=lambda r: (r["cost"], r["index"]))
    if not ok:
        return []
    out = []
    for q in percentiles:
        rank = min(len(ok), max(1, int(round(q / 100.0 * len(ok)))))
        out.append((int(q), ok[rank - 1]))
    return out


# ----------------------------------------------------------------------------
# summaries

def _log10(x: float) -> float:
    return math.log10(x) if x > 0 else float("-inf")


def _ok(rows, *cols):
    return [r for r in rows if r.get("status") == "ok"
            and all(r.get(c) not in (None, "") and np.isfinite(float(r[c])) for c in cols)]


def correlation(x, y, stream, B: int, K: int) -> dict:
    """r, rank r, lsr fit, bootstrap CI and randomization test of paired data."""
    out = {"pairs": len(x)}
    try:
        out["r"] = stats.pearson_r(x, y)
        out["rank_r"] = stats.spearman_rank(x, y)
        out["intercept"], out["gradient"] = stats.ols_fit(x, y)
        ci = stats.bootstrap_ci_r(x, y, B=B, rng=generator(*stream, 1))
        out["ci_lo"], out["ci_hi"] = ci.lo, ci.hi
        rt = stats.randomization_test(x, y, K=K, rng=generator(*stream, 2))
        out["p_two_sided"] = rt.p_two_sided
        out["reject_999"] = int(rt.reject_999)
    except UndefinedStatistic as e:
        out["note"] = str(e)
    return out


def _cells(rows):
    keys = []
    for r in rows:
        k = (r["ratio"], r["target"])
        if k not in keys:
            keys.append(k)
    return keys


def _cell_rows(rows, key):
    return [r for r in rows if (r["ratio"], r["target"]) == key]


def _spread(values, prefix: str) -> dict:
    if not values:
        return {f"{prefix}_median": "", f"{prefix}_q1": "", f"{prefix}_q3": ""}
    q1, med, q3 = stats.percentiles(values, (25, 50, 75))
    return {f"{prefix}_median": float(med), f"{prefix}_q1": float(q1), f"{prefix}_q3": float(q3)}


def _cell_head(key, rows, used):
    return {"ratio": key[0], "target": key[1], "instances": len(rows), "used": len(used),
            "flagged": sum(1 for r in rows if r.get("status") != "ok")}


def summarize(cfg: ExperimentConfig, tables: dict[str, list[dict]]) -> dict[str, list[dict]]:
    exp = cfg.experiment
    rows = tables.get("instances", [])
    out: dict[str, list[dict]] = {}
    code = {k: i for i, k in enumerate(sorted(BODIES))}[exp]
    if exp == "cost-peak":
        peak = []
        for key in _cells(rows):
            used = _ok(_cell_rows(rows, key), "cost")
            costs = [r["cost"] for r in used]
            for q in cfg.percentiles:
                peak.append({"ratio": key[0], "percentile": q,
                             "cost": float(stats.percentiles(costs, q)) if costs else ""})
        out["cost_peak"] = peak
    elif exp in ("cost-vs-ratio-controlled", "robustness-vs-ratio"):
        col = "cost" if exp == "cost-vs-ratio-controlled" else "robustness"
        summ = []
        for key in _cells(rows):
            cell = _cell_rows(rows, key)
            used = _ok(cell, col)
            summ.append({**_cell_head(key, cell, used),
                         **_spread([r[col] for r in used], col)})
        out["summary"] = summ
    else:
        pairs = {"nsolutions": ("log10_nsolutions", "log10_cost"),
                 "search-behavior": ("mean_hdns_f5", "log10_cost"),
                 "robustness-correlation": ("robustness", "log10_cost")}.get(exp)
        if pairs:
            summ = []
            for ci, key in enumerate(_cells(rows)):
                cell = _cell_rows(rows, key)
                used = _ok(cell, *pairs)
                x = np.array([float(r[pairs[0]]) for r in used])
                y = np.array([float(r[pairs[1]]) for r in used])
                row = {**_cell_head(key, cell, used), "x": pairs[0], "y": pairs[1]}
                row.update(_spread([r["cost"] for r in used], "cost"))
                if exp == "nsolutions":
                    row.update(_spread([r["nsolutions"] for r in used], "nsolutions"))
                if exp == "search-behavior":
                    row.update(_spread([r["median_f5"] for r in used], "f5"))
                    row.update(_spread([r["mean_hdns_f5"] for r in used], "hdns"))
                if exp == "robustness-correlation":
                    row.update(_spread([r["robustness"] for r in used], "robustness"))
                row.update(correlation(x, y, (cfg.root_seed, STATS, code, ci),
                                       cfg.bootstrap_b, cfg.permutations))
                summ.append(row)
            out["summary"] = summ
    if exp == "bms-interpolation":
        inter = tables.get("interpolation", [])
        out["bms_cost"] = _interp_summary(inter, "cost")
        out["bms_robustness"] = _interp_summary(
            [r for r in inter if r["procedure"] in ("preserve", "bms")], "robustness")
    return out


def _interp_summary(rows, col) -> list[dict]:
    groups: list[tuple[str, object]] = []
    for r in rows:
        g = (r["procedure"], r["m_r"])
        if g not in groups:
            groups.append(g)
    order = {"preserve": 0, "bms": 1, "random": 2, "reduce": 3}
    groups.sort(key=lambda g: (order[g[0]], g[1] if isinstance(g[1], int) else 10**9))
    out = []
    for proc, m_r in groups:
        vals = [float(r[col]) for r in rows
                if r["procedure"] == proc and r["m_r"] == m_r and r.get(col) not in (None, "")]
        row = {"procedure": proc, "m_r": m_r, "instances": len(vals)}
        if vals:
            p10, med, p90 = stats.percentiles(vals, SUMMARY_PERCENTILES)
            row.update(p10=float(p10), median=float(med), p90=float(p90))
        else:
            row.update(p10="", median="", p90="")
        out.append(row)
    return out
