"""Command-line entry point.

Exit codes: 0 ok, 1 usage error, 2 input error, 3 budget exhausted.
"""
from __future__ import annotations

import argparse
import csv
import dataclasses
import json
import logging
import sys
from pathlib import Path

import numpy as np

from .. import stats
from ..backbone_lab import estimate_robustness, find_bms, provenance_sidecar
from ..cnf import CnfInstance
from ..dimacs import parse_dimacs, write_dimacs
from ..errors import (BudgetExhausted, DimacsError, RobustnessUndefined, UndefinedStatistic,
                      UnsatisfiableError)
from ..generate import GenSpec, sample_satisfiable, sample_with_backbone_size, generate_random_ksat
from ..rng import generator
from ..solver import DEFAULT_NODE_CAP, compute_backbone, count_solutions, solve
from ..wsat import DEFAULT_MAX_FLIPS, WsatParams, default_workers, measure_cost
from .config import EXPERIMENTS, ExperimentConfig, load_config

EXIT_OK, EXIT_USAGE, EXIT_INPUT, EXIT_BUDGET = 0, 1, 2, 3


class UsageError(Exception):
    pass


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        self.print_usage(sys.stderr)
        self.exit(EXIT_USAGE, f"{self.prog}: error: {message}\n")


def _read_instance(path: str | None) -> CnfInstance:
    text = sys.stdin.read() if path in (None, "-") else Path(path).read_text()
    return parse_dimacs(text)


def _emit(args, text: str) -> None:
    if args.out:
        Path(args.out).write_text(text)
    else:
        sys.stdout.write(text)


def _render(args, record: dict) -> str:
    if args.format == "json":
        return json.dumps(record, sort_keys=True) + "\n"
    cols = list(record)
    buf = [",".join(cols), ",".join(_cell(record[c]) for c in cols)]
    return "\n".join(buf) + "\n"


def _cell(v) -> str:
    if isinstance(v, float):
        return repr(v)
    if isinstance(v, (list, tuple)):
        return " ".join(str(x) for x in v)
    return "" if v is None else str(v)


def _ints(text: str) -> tuple[int, ...]:
    return tuple(int(x) for x in text.replace(",", " ").split())


# ----------------------------------------------------------------------------
# subcommands

def cmd_gen(args) -> int:
    if (args.m is None) == (args.ratio is None):
        raise UsageError("give exactly one of --m or --ratio")
    spec = GenSpec(args.n, args.m, args.k, args.seed) if args.m is not None else \
        GenSpec.from_ratio(args.n, args.ratio, args.k, args.seed)
    rows, texts = [], []
    for i in range(args.count):
        if args.backbone is not None:
            rep = sample_with_backbone_size(spec, args.backbone, args.budget, (i,))
        elif args.satisfiable:
            rep = sample_satisfiable(spec, args.budget, (i,))
        else:
            inst = generate_random_ksat(spec, generator(args.seed, i, 0))
            rep = None
        inst = rep.instance if rep else inst
        sat = solve(inst).satisfiable
        bb = rep.backbone if rep and rep.backbone is not None else (
            compute_backbone(inst) if sat else None)
        rows.append({"index": i, "seed": args.seed, "n": spec.n, "m": spec.m, "k": spec.k,
                     "satisfiable": int(sat), "backbone_size": "" if bb is None else len(bb),
                     "attempts": rep.attempts if rep else 1, "sha256": inst.content_hash()})
        texts.append(write_dimacs(inst, [f"seed {args.seed} index {i}"]))
    if args.out and (args.count > 1 or Path(args.out).is_dir()):
        d = Path(args.out)
        d.mkdir(parents=True, exist_ok=True)
        for i, t in enumerate(texts):
            (d / f"instance_{i:04d}.cnf").write_text(t)
        with (d / "manifest.csv").open("w", newline="") as f:
            w = csv.DictWriter(f, fieldnames=list(rows[0]), lineterminator="\n")
            w.writeheader()
            w.writerows(rows)
    else:
        _emit(args, "".join(texts))
    return EXIT_OK


def cmd_solve(args) -> int:
    inst = _read_instance(args.file)
    res = solve(inst, node_cap=args.node_cap)
    if args.format == "json":
        rec = {"status": res.status, "witness": None if res.witness is None else
               [i + 1 if v else -(i + 1) for i, v in enumerate(res.witness)]}
        _emit(args, json.dumps(rec) + "\n")
    elif res.satisfiable:
        lits = " ".join(str(i + 1 if v else -(i + 1)) for i, v in enumerate(res.witness))
        _emit(args, f"s SATISFIABLE\nv {lits} 0\n")
    else:
        _emit(args, "s UNSATISFIABLE\n")
    return EXIT_OK


def cmd_backbone(args) -> int:
    inst = _read_instance(args.file)
    bb = compute_backbone(inst, node_cap=args.node_cap)
    if args.format == "json":
        _emit(args, json.dumps({"size": len(bb), "backbone": bb.sorted()}) + "\n")
    else:
        lines = [f"{abs(l)} : {'+1' if l > 0 else '-1'}" for l in bb.sorted()]
        _emit(args, "".join(s + "\n" for s in lines) + f"size {len(bb)}\n")
    return EXIT_OK


def cmd_count(args) -> int:
    inst = _read_instance(args.file)
    c = count_solutions(inst, node_cap=args.node_cap)
    _emit(args, _render(args, {"solutions": c}) if args.format == "json" else f"{c}\n")
    return EXIT_OK


def cmd_wsat(args) -> int:
    inst = _read_instance(args.file)
    params = WsatParams(args.noise, args.max_flips, args.seed, _ints(args.probes),
                        args.uf_out is not None)
    st = measure_cost(inst, args.runs, params, workers=args.workers,
                      on_cap="fail" if args.fail_on_cap else "record")
    rec = {"runs": st.runs, "cost": st.cost, "q1": st.quartiles[0], "q3": st.quartiles[2],
           "cap_exceeded": st.cap_exceeded}
    if st.median_f5 is not None:
        rec.update(median_f5=st.median_f5, mean_f5=st.mean_f5)
    if args.uf_out:
        Path(args.uf_out).write_text(st.uf_csv())
    _emit(args, _render(args, rec))
    return EXIT_OK


def cmd_robustness(args) -> int:
    inst = _read_instance(args.file)
    est = estimate_robustness(inst, args.seed, args.min_trials, args.rel_se, args.max_trials,
                              halving=args.halving, node_cap=args.node_cap)
    rec = {"backbone_size": est.backbone_size, "robustness": est.mean,
           "std_error": est.std_error, "trials": est.trials, "converged": int(est.converged)}
    _emit(args, _render(args, rec))
    return EXIT_OK


def cmd_bms(args) -> int:
    inst = _read_instance(args.file)
    res = find_bms(inst, args.seed, node_cap=args.node_cap)
    text = write_dimacs(res.sub_instance, [f"backbone-minimal sub-instance, seed {args.seed}",
                                           f"parent {inst.content_hash()}"])
    _emit(args, text)
    if args.sidecar:
        Path(args.sidecar).write_text(
            provenance_sidecar(inst, res.sub_instance, res.backbone, args.seed) + "\n")
    return EXIT_OK


_ALIASES = {"root_seed": ["--seed"], "ratios": ["--ratio"], "out_dir": ["--out"],
            "backbone_targets": ["--targets"]}


def _experiment_config(args) -> ExperimentConfig:
    given = {f.name: getattr(args, f.name) for f in dataclasses.fields(ExperimentConfig)
             if getattr(args, f.name, None) is not None}
    if args.config:
        return load_config(args.config, **given)
    given.setdefault("workers", default_workers())
    if "experiment" not in given:
        raise UsageError("--experiment is required without --config")
    return ExperimentConfig.from_dict(given)


def cmd_experiment(args) -> int:
    from .runner import run_experiment

    cfg = _experiment_config(args)
    if args.dump_config:
        sys.stdout.write(cfg.to_text())
        return EXIT_OK
    written = run_experiment(cfg, resume=not args.fresh)
    for table, path in sorted(written.items()):
        print(f"{table}\t{path}")
    return EXIT_OK


def cmd_stats(args) -> int:
    with open(args.file, newline="") as f:
        rows = [r for r in csv.DictReader(f)]
    try:
        pairs = [(float(r[args.x]), float(r[args.y])) for r in rows
                 if r.get(args.x) not in (None, "") and r.get(args.y) not in (None, "")]
    except KeyError as e:
        raise UsageError(f"no column {e} in {args.file}")
    x = np.array([p[0] for p in pairs])
    y = np.array([p[1] for p in pairs])
    if args.log_x:
        x = np.log10(x)
    if args.log_y:
        y = np.log10(y)
    ok = np.isfinite(x) & np.isfinite(y)
    x, y = x[ok], y[ok]
    ci = stats.bootstrap_ci_r(x, y, B=args.bootstrap, rng=(args.seed, 1))
    rt = stats.randomization_test(x, y, K=args.permutations, rng=(args.seed, 2))
    a, b = stats.ols_fit(x, y)
    rec = {"pairs": int(x.size), "r": rt.r_observed, "rank_r": stats.spearman_rank(x, y),
           "intercept": a, "gradient": b, "ci_lo": ci.lo, "ci_hi": ci.hi,
           "p_two_sided": rt.p_two_sided, "reject_999": int(rt.reject_999)}
    _emit(args, _render(args, rec))
    return EXIT_OK


# ----------------------------------------------------------------------------

def build_parser() -> argparse.ArgumentParser:
    p = _Parser(prog="bbfrag", description="Backbone fragility and WSAT experiments.")
    p.add_argument("-v", "--verbose", action="count", default=0)
    sub = p.add_subparsers(dest="command", required=True, parser_class=_Parser)

    def common(sp, file=True):
        if file:
            sp.add_argument("file", nargs="?", help="DIMACS file (default stdin)")
        sp.add_argument("--out", help="write to this path instead of stdout")
        sp.add_argument("--format", choices=("csv", "json"), default="csv")
        sp.add_argument("--seed", type=int, default=0)
        sp.add_argument("--node-cap", type=int, default=DEFAULT_NODE_CAP)

    g = sub.add_parser("gen", help="generate random k-SAT instances")
    common(g, file=False)
    g.add_argument("--n", type=int, required=True)
    g.add_argument("--m", type=int)
    g.add_argument("--ratio", type=float)
    g.add_argument("--k", type=int, default=3)
    g.add_argument("--count", type=int, default=1)
    g.add_argument("--satisfiable", action="store_true")
    g.add_argument("--backbone", type=int, help="required backbone size (implies satisfiable)")
    g.add_argument("--budget", type=int, default=100_000)
    g.set_defaults(func=cmd_gen)

    for name, fn, helptext in (("solve", cmd_solve, "decide satisfiability"),
                               ("backbone", cmd_backbone, "list backbone literals"),
                               ("count", cmd_count, "count solutions")):
        sp = sub.add_parser(name, help=helptext)
        common(sp)
        sp.set_defaults(func=fn)

    w = sub.add_parser("wsat", help="median WSAT run length over independent runs")
    common(w)
    w.add_argument("--runs", type=int, default=1000)
    w.add_argument("--noise", type=float, default=0.55)
    w.add_argument("--max-flips", type=int, default=DEFAULT_MAX_FLIPS)
    w.add_argument("--probes", default="", help="comma-separated b values for f_b")
    w.add_argument("--workers", type=int, default=default_workers())
    w.add_argument("--uf-out", help="write per-clause unsatisfaction frequencies here")
    w.add_argument("--fail-on-cap", action="store_true", help="exit 3 if any run hits the cap")
    w.set_defaults(func=cmd_wsat)

    r = sub.add_parser("robustness", help="estimate backbone robustness")
    common(r)
    r.add_argument("--min-trials", type=int, default=100)
    r.add_argument("--rel-se", type=float, default=0.05)
    r.add_argument("--max-trials", type=int, default=5000)
    r.add_argument("--halving", choices=("floor", "strict"), default="floor")
    r.set_defaults(func=cmd_robustness)

    b = sub.add_parser("bms", help="extract a backbone-minimal sub-instance")
    common(b)
    b.add_argument("--sidecar", help="write the JSON provenance sidecar here")
    b.set_defaults(func=cmd_bms)

    e = sub.add_parser("experiment", help="run an experiment from flags or a key=value config")
    e.add_argument("--config", help="key = value file; flags override it")
    e.add_argument("--fresh", action="store_true", help="ignore any checkpoint")
    e.add_argument("--dump-config", action="store_true", help="print the resolved config")
    e.add_argument("--experiment", choices=EXPERIMENTS)
    for f in dataclasses.fields(ExperimentConfig):
        if f.name == "experiment":
            continue
        flags = [f"--{f.name.replace('_', '-')}"] + _ALIASES.get(f.name, [])
        e.add_argument(*flags, dest=f.name, default=None, metavar=f.name.upper())
    e.set_defaults(func=cmd_experiment)

    s = sub.add_parser("stats", help="correlation, lsr fit, bootstrap CI, randomization test")
    s.add_argument("file", help="CSV file with a header row")
    s.add_argument("--x", required=True)
    s.add_argument("--y", required=True)
    s.add_argument("--log-x", action="store_true")
    s.add_argument("--log-y", action="store_true")
    s.add_argument("--bootstrap", type=int, default=1000)
    s.add_argument("--permutations", type=int, default=1000)
    s.add_argument("--seed", type=int, default=0)
    s.add_argument("--out")
    s.add_argument("--format", choices=("csv", "json"), default="csv")
    s.set_defaults(func=cmd_stats)
    return p


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    logging.basicConfig(level=logging.WARNING - 10 * min(args.verbose, 2),
                        format="%(levelname)s %(message)s")
    try:
        return args.func(args)
    except UsageError as e:
        print(f"bbfrag: {e}", file=sys.stderr)
        return EXIT_USAGE
    except BudgetExhausted as e:
        print(f"bbfrag: budget exhausted: {e}", file=sys.stderr)
        return EXIT_BUDGET
    except (DimacsError, OSError, UnsatisfiableError, RobustnessUndefined,
            UndefinedStatistic, ValueError) as e:
        print(f"bbfrag: {e}", file=sys.stderr)
        return EXIT_INPUT


if __name__ == "__main__":
    sys.exit(main())
