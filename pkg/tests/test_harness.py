import csv
import io
import json

import numpy as np
import pytest

import oracles
from bbfrag.dimacs import write_dimacs
from bbfrag.harness import cli
from bbfrag.harness.config import ExperimentConfig, load_config, parse_config_text
from bbfrag.harness.experiments import select_percentile_rows, top_set
from bbfrag.harness.runner import config_fingerprint, run_experiment, to_csv
from conftest import sat_instance

SMALL = dict(n=20, instances=4, runs=20, ratios=(4.0,), bootstrap_b=50, permutations=50)


def read_csv(path):
    return list(csv.DictReader(io.StringIO(path.read_text())))


# ---------------------------------------------------------------------------- config

def test_config_text_round_trip():
    cfg = ExperimentConfig("robustness-correlation", ratios=(4.2, 4.3), backbone_targets=(0.9,))
    again = ExperimentConfig.from_dict(parse_config_text(cfg.to_text()))
    assert again == cfg


def test_config_file_with_comments_and_overrides(tmp_path):
    p = tmp_path / "c.cfg"
    p.write_text("# desk scale\nexperiment = cost-peak\nratios = 4.0, 4.5\n"
                 "max-flips = 10**6  # cap\nruns = 1e3\n")
    cfg = load_config(p, instances="7")
    assert cfg.ratios == (4.0, 4.5) and cfg.max_flips == 10**6
    assert cfg.runs == 1000 and cfg.instances == 7


def test_config_rejects_bad_input():
    with pytest.raises(ValueError):
        ExperimentConfig.from_dict({"experiment": "cost-peak", "colour": "red"})
    with pytest.raises(ValueError):
        ExperimentConfig("nope")
    with pytest.raises(ValueError):
        ExperimentConfig("cost-peak", backbone_targets=(1.5,))
    with pytest.raises(ValueError):
        parse_config_text("experiment cost-peak")
    with pytest.raises(ValueError):
        ExperimentConfig.from_dict({"experiment": "cost-peak", "runs": "2.5e-1"})


def test_targets_are_rounded_fractions():
    cfg = ExperimentConfig("nsolutions", n=50, backbone_targets=(0.1, 0.9))
    assert cfg.targets() == (5, 45)
    assert ExperimentConfig("cost-peak").targets() == (None,)


def test_fingerprint_ignores_workers_and_output():
    a = ExperimentConfig("cost-peak", **SMALL)
    assert config_fingerprint(a) == config_fingerprint(a.replace(workers=3, out_dir="x"))
    assert config_fingerprint(a) != config_fingerprint(a.replace(root_seed=1))


# ---------------------------------------------------------------------------- helpers

def test_top_set_ties_and_degenerate_threshold():
    v = np.array([0, 0, 0, 0, 0, 0, 0, 0, 0, 3, 1, 0.0])
    assert sorted(top_set(v, 0.1).tolist()) == [9, 10]
    v = np.arange(20.0)
    assert sorted(top_set(v, 0.1).tolist()) == [18, 19]
    assert top_set(np.ones(5), 0.1).tolist() == [0, 1, 2, 3, 4]


def test_percentile_selection_by_rank():
    rows = [{"status": "ok", "cost": float(c), "index": i}
            for i, c in enumerate([50, 10, 40, 20, 30, 30, 70, 60, 90, 80])]
    chosen = dict((q, r["cost"]) for q, r in select_percentile_rows(rows, (10, 50, 90)))
    # sorted: 10 20 30 30 40 ...; rank round(q/100 * 10)
    assert chosen == {10: 10.0, 50: 40.0, 90: 80.0}
    (_, tie), = select_percentile_rows(rows, (30,))
    assert tie["index"] == 4  # equal costs ordered by index


def test_csv_formatting():
    text = to_csv([{"a": 0.1, "b": True}, {"a": None, "c": 2}])
    assert text == "a,b,c\n0.1,1,\n,,2\n"


# ---------------------------------------------------------------------------- runs

@pytest.mark.parametrize("experiment", ["cost-peak", "search-behavior", "bms-interpolation"])
def test_byte_identical_across_worker_counts(tmp_path, experiment):
    extra = {"procedures": ("preserve", "random"), "m_r": (0, 5)} if experiment == "bms-interpolation" else {}
    base = ExperimentConfig(experiment, **SMALL, **extra)
    one = run_experiment(base.replace(out_dir=str(tmp_path / "w1")), workers=1)
    two = run_experiment(base.replace(out_dir=str(tmp_path / "w2")), workers=2)
    assert one.keys() == two.keys()
    for table in one:
        assert one[table].read_bytes() == two[table].read_bytes(), table


def test_resume_after_interruption(tmp_path):
    cfg = ExperimentConfig("nsolutions", **SMALL, out_dir=str(tmp_path))
    full = {t: p.read_bytes() for t, p in run_experiment(cfg).items()}
    ck = tmp_path / "nsolutions" / "checkpoint.jsonl"
    lines = ck.read_text().splitlines(keepends=True)
    ck.write_text("".join(lines[:3]) + lines[3][: len(lines[3]) // 2])
    for p in (tmp_path / "nsolutions").glob("*.csv"):
        p.unlink()
    resumed = run_experiment(cfg)
    assert {t: p.read_bytes() for t, p in resumed.items()} == full
    with pytest.raises(ValueError):
        run_experiment(cfg.replace(root_seed=5))


def test_bms_table_shape(tmp_path):
    cfg = ExperimentConfig("bms-interpolation", **SMALL, procedures=("preserve",),
                           m_r=(0, 5, 10), out_dir=str(tmp_path))
    out = run_experiment(cfg)
    rows = read_csv(out["bms_cost"])
    assert list(rows[0]) == ["procedure", "m_r", "instances", "p10", "median", "p90"]
    assert [r["m_r"] for r in rows] == ["0", "5", "10", "BMS"]
    inst = read_csv(out["interpolation"])
    assert {r["procedure"] for r in inst} == {"preserve", "bms"}
    man = json.loads((tmp_path / "bms-interpolation" / "manifest.json").read_text())
    assert man["config"]["experiment"] == "bms-interpolation" and man["units"] == 4


def test_generated_instances_have_requested_backbone(tmp_path):
    cfg = ExperimentConfig("nsolutions", n=12, ratios=(4.3,), instances=3, runs=10,
                           backbone_targets=(0.5,), bootstrap_b=20, permutations=20,
                           out_dir=str(tmp_path))
    rows = read_csv(run_experiment(cfg)["instances"])
    for r in rows:
        assert int(r["target"]) == 6
        sols = int(r["nsolutions"])
        assert sols >= 1


# ---------------------------------------------------------------------------- CLI

def run_cli(argv, capsys):
    try:
        code = cli.main(argv)
    except SystemExit as e:
        code = e.code
    out = capsys.readouterr()
    return code, out.out, out.err


def test_cli_exit_codes(tmp_path, capsys):
    assert run_cli(["bogus"], capsys)[0] == 1
    assert run_cli(["gen", "--n", "5"], capsys)[0] == 1
    assert run_cli(["solve", str(tmp_path / "missing.cnf")], capsys)[0] == 2
    bad = tmp_path / "bad.cnf"
    bad.write_text("p cnf 2 1\n1 x 0\n")
    assert run_cli(["solve", str(bad)], capsys)[0] == 2
    code, _, err = run_cli(["gen", "--n", "5", "--m", "200", "--satisfiable", "--budget", "2"],
                           capsys)
    assert code == 3 and "budget" in err
    unsat = tmp_path / "u.cnf"
    unsat.write_text("p cnf 1 2\n1 0\n-1 0\n")
    assert run_cli(["wsat", str(unsat), "--runs", "2", "--max-flips", "10"], capsys)[0] == 0
    assert run_cli(["wsat", str(unsat), "--runs", "2", "--max-flips", "10", "--fail-on-cap"],
                   capsys)[0] == 3


def test_cli_solve_backbone_count(tmp_path, capsys):
    inst = sat_instance(10, 40, seed=3)
    f = tmp_path / "i.cnf"
    f.write_text(write_dimacs(inst))
    code, out, _ = run_cli(["count", str(f)], capsys)
    assert code == 0 and str(oracles.solutions(10, list(inst.clauses)).shape[0]) in out
    code, out, _ = run_cli(["backbone", str(f)], capsys)
    bb = oracles.backbone(10, list(inst.clauses))
    assert code == 0 and out.strip().splitlines()[-1] == f"size {len(bb)}"


def test_cli_gen_and_wsat(tmp_path, capsys):
    d = tmp_path / "gen"
    code, _, _ = run_cli(["gen", "--n", "20", "--ratio", "4.0", "--count", "3", "--satisfiable",
                          "--out", str(d), "--seed", "2"], capsys)
    files = sorted(d.glob("*.cnf"))
    assert code == 0 and len(files) == 3 and (d / "manifest.csv").exists()
    code, out, _ = run_cli(["wsat", str(files[0]), "--runs", "30"], capsys)
    head, row = out.strip().splitlines()[:2]
    assert code == 0 and head.startswith("runs,cost")
    assert row.split(",")[0] == "30"


def test_cli_experiment_dump_config(capsys):
    code, out, _ = run_cli(["experiment", "--experiment", "uf-bc", "--ratio", "4.3",
                            "--runs", "10**2", "--dump-config"], capsys)
    assert code == 0
    cfg = ExperimentConfig.from_dict(parse_config_text(out))
    assert cfg.runs == 100 and cfg.experiment == "uf-bc"


def test_cli_stats(tmp_path, capsys):
    g = np.random.default_rng(0)
    x = g.uniform(1, 100, 50)
    f = tmp_path / "d.csv"
    f.write_text("x,y\n" + "".join(f"{a},{a * 2 + g.normal()}\n" for a in x))
    code, out, _ = run_cli(["stats", str(f), "--x", "x", "--y", "y", "--log-x", "--log-y",
                            "--bootstrap", "100", "--permutations", "100", "--format", "json"],
                           capsys)
    assert code == 0 and json.loads(out)["r"] > 0.9
    assert run_cli(["stats", str(f), "--x", "x", "--y", "zz"], capsys)[0] == 2
