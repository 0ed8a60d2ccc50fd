"""Dispatch work units to a worker pool, checkpoint them, and write CSVs.

Rows are written in unit order, never completion order, and floats are
written with ``repr``; together these make the CSVs byte-identical for any
worker count.  Completed units are appended to ``checkpoint.jsonl`` so an
interrupted run resumes where it stopped.
"""
from __future__ import annotations

import csv
import hashlib
import io
import json
import logging
import time
from concurrent.futures import ProcessPoolExecutor, as_completed
from pathlib import Path

from .config import WORK_WARN_FLIPS, ExperimentConfig, manifest
from .experiments import main_table, run_ufbc_unit, run_unit, select_percentile_rows, summarize

log = logging.getLogger("bbfrag.harness")

# fields that change scheduling or file placement but never results
_NEUTRAL = ("workers", "out_dir")


def config_fingerprint(cfg: ExperimentConfig) -> str:
    d = {k: v for k, v in cfg.to_dict().items() if k not in _NEUTRAL}
    return hashlib.sha256(json.dumps(d, sort_keys=True).encode()).hexdigest()[:16]


def _call(job):
    kind, cfg_dict, args = job
    cfg = ExperimentConfig.from_dict(cfg_dict)
    if kind == "unit":
        return run_unit(cfg, *args)
    return run_ufbc_unit(cfg, *args)


class Checkpoint:
    def __init__(self, path: Path, fingerprint: str, resume: bool):
        self.path = path
        self.done: dict[str, dict] = {}
        if resume and path.exists():
            with path.open() as f:
                head = json.loads(f.readline() or "{}")
                if head.get("fingerprint") != fingerprint:
                    raise ValueError(f"{path} belongs to a different configuration; "
                                     "use a fresh output directory or disable resume")
                for line in f:
                    if not line.strip():
                        continue
                    try:
                        rec = json.loads(line)
                    except json.JSONDecodeError:
                        break  # torn final line from an interrupted write
                    self.done[rec["unit"]] = rec["tables"]
        else:
            path.parent.mkdir(parents=True, exist_ok=True)
            path.write_text(json.dumps({"fingerprint": fingerprint}) + "\n")

    def add(self, name: str, tables: dict) -> None:
        line = json.dumps({"unit": name, "tables": tables})
        # keep the round-tripped form so fresh and resumed runs write the same bytes
        self.done[name] = json.loads(line)["tables"]
        with self.path.open("a") as f:
            f.write(line + "\n")


def _dispatch(jobs: list[tuple[str, tuple]], cfg: ExperimentConfig, ckpt: Checkpoint,
              workers: int) -> None:
    pending = [(name, job) for name, job in jobs if name not in ckpt.done]
    if not pending:
        return
    log.info("%s: %d units to run (%d already done), %d workers", cfg.experiment,
             len(pending), len(jobs) - len(pending), workers)
    t0 = time.monotonic()
    cfg_dict = cfg.to_dict()
    if workers == 1:
        for i, (name, (kind, args)) in enumerate(pending, 1):
            ckpt.add(name, _call((kind, cfg_dict, args)))
            log.debug("unit %s done (%d/%d, %.1fs)", name, i, len(pending), time.monotonic() - t0)
        return
    with ProcessPoolExecutor(max_workers=workers) as ex:
        futs = {ex.submit(_call, (kind, cfg_dict, args)): name for name, (kind, args) in pending}
        for i, fut in enumerate(as_completed(futs), 1):
            ckpt.add(futs[fut], fut.result())
            log.debug("unit %s done (%d/%d, %.1fs)", futs[fut], i, len(pending),
                      time.monotonic() - t0)


def _collect(names: list[str], ckpt: Checkpoint) -> dict[str, list[dict]]:
    tables: dict[str, list[dict]] = {}
    for name in names:
        for table, rows in ckpt.done[name].items():
            tables.setdefault(table, []).extend(rows)
    return tables


def _fmt(v) -> str:
    if v is None:
        return ""
    if isinstance(v, bool):
        return str(int(v))
    if isinstance(v, float):
        return repr(v)
    return str(v)


def to_csv(rows: list[dict]) -> str:
    cols: list[str] = []
    for r in rows:
        for c in r:
            if c not in cols:
                cols.append(c)
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(cols)
    for r in rows:
        w.writerow([_fmt(r.get(c)) for c in cols])
    return buf.getvalue()


def unit_jobs(cfg: ExperimentConfig) -> list[tuple[str, tuple]]:
    jobs = []
    for ratio, target in cfg.cells():
        for i in range(cfg.instances):
            name = f"{ratio!r}/{target}/{i}"
            jobs.append((name, ("unit", (ratio, target, i))))
    return jobs


def run_experiment(cfg: ExperimentConfig, resume: bool = True,
                   workers: int | None = None) -> dict[str, Path]:
    """Run (or resume) an experiment; returns the written CSV paths by table name."""
    workers = cfg.workers if workers is None else workers
    out = Path(cfg.out_dir) / cfg.experiment
    out.mkdir(parents=True, exist_ok=True)
    if cfg.projected_flips() > WORK_WARN_FLIPS:
        log.warning("%s: projected work is about %.1e flips; consider fewer instances or runs",
                    cfg.experiment, cfg.projected_flips())
    ckpt = Checkpoint(out / "checkpoint.jsonl", config_fingerprint(cfg), resume)
    jobs = unit_jobs(cfg)
    _dispatch(jobs, cfg, ckpt, workers)
    tables = _collect([name for name, _ in jobs], ckpt)

    if cfg.experiment == "uf-bc":
        chosen = select_percentile_rows(tables.get("cohort", []), cfg.percentiles)
        second = [(f"uf/{q}/{row['instance_id']}", ("ufbc", (q, row))) for q, row in chosen]
        _dispatch(second, cfg, ckpt, workers)
        for table, rows in _collect([name for name, _ in second], ckpt).items():
            tables[table] = rows

    tables.update(summarize(cfg, tables))
    names = _file_names(cfg.experiment)
    written: dict[str, Path] = {}
    for table, rows in tables.items():
        path = out / f"{names.get(table, table)}.csv"
        path.write_text(to_csv(rows))
        written[table] = path
    (out / "manifest.json").write_text(manifest(
        cfg, {t: p.name for t, p in sorted(written.items())},
        {"fingerprint": config_fingerprint(cfg), "units": len(jobs)}))
    return written


def _file_names(experiment: str) -> dict[str, str]:
    stem = experiment.replace("-", "_")
    return {"instances": f"{stem}_instances", "summary": f"{stem}_summary",
            "ufbc": f"{stem}_summary", "clauses": f"{stem}_clauses",
            main_table(experiment): f"{stem}_instances"}
