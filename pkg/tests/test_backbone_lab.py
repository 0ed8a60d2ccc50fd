import json

import numpy as np
import pytest
from hypothesis import given, settings

import oracles
from bbfrag import backbone_lab as lab
from bbfrag.cnf import Backbone, CnfInstance, remove_clauses
from bbfrag.errors import RobustnessUndefined, SatisfiableError
from bbfrag.generate import GenSpec, sample_with_backbone_size
from bbfrag.rng import kernel_states, shuffle_inplace
from conftest import random_instance
from strategies import instances


def with_backbone(n, m, target, seed=0):
    return sample_with_backbone_size(GenSpec(n, m, 3, seed), target, 20_000).instance


@pytest.fixture(scope="module")
def bb_inst():
    return with_backbone(12, 55, 8, seed=1)


def oracle_trial(inst, seed_row, halt):
    """Replay one trial's deletion order with truth-table backbones."""
    order = np.arange(inst.m, dtype=np.int64)
    shuffle_inplace(seed_row.copy(), order)
    clauses = list(inst.clauses)
    dropped = set()
    for j, c in enumerate(order):
        dropped.add(int(c))
        rest = [cl for i, cl in enumerate(clauses) if i not in dropped]
        if len(oracles.backbone(inst.n, rest)) <= halt:
            return j + 1
    return -1


def test_halt_size_rules():
    assert [lab.halt_size(s) for s in (1, 2, 5, 8)] == [0, 1, 2, 4]
    assert [lab.halt_size(s, "strict") for s in (1, 2, 5, 8)] == [0, 0, 2, 3]
    with pytest.raises(ValueError):
        lab.halt_size(4, "round")


def test_robustness_trials_match_replay(bb_inst):
    bb = oracles.backbone(12, list(bb_inst.clauses))
    for rule in ("floor", "strict"):
        halt = lab.halt_size(len(bb), rule)
        for s in range(8):
            got = lab.robustness_trial(bb_inst, bb, (s, 3), halving=rule)
            want = oracle_trial(bb_inst, kernel_states(s, (3,), 1)[0], halt)
            assert got == want


def test_robustness_undefined_for_empty_backbone():
    inst = CnfInstance(3, ((1, 2, 3),))
    with pytest.raises(RobustnessUndefined):
        lab.robustness_trial(inst, Backbone(), 0)
    with pytest.raises(RobustnessUndefined):
        lab.estimate_robustness(inst, 0)


def test_estimate_stops_at_first_precise_point(bb_inst):
    est = lab.estimate_robustness(bb_inst, (4,), min_trials=20, rel_se=0.05, max_trials=2000)
    assert est.converged and est.trials >= 20
    x = est.results.astype(float)
    assert est.mean == pytest.approx(x.mean())
    assert est.std_error == pytest.approx(x.std(ddof=1) / np.sqrt(x.size))
    assert est.std_error < 0.05 * est.mean
    for t in range(20, est.trials):
        assert x[:t].std(ddof=1) / np.sqrt(t) >= 0.05 * x[:t].mean()
    bb = len(oracles.backbone(12, list(bb_inst.clauses)))
    assert (est.halved_sizes <= bb // 2).all()


def test_estimate_independent_of_batching(bb_inst):
    a = lab.estimate_robustness(bb_inst, (9,), min_trials=30, batch=7)
    b = lab.estimate_robustness(bb_inst, (9,), min_trials=30, batch=100)
    assert a.trials == b.trials and (a.results == b.results).all()
    # trial i is the same stream as a single trial on (*stream, i)
    assert a.results[5] == oracle_trial(bb_inst, kernel_states(9, (), 6)[5], 4)


def test_estimate_respects_max_trials(bb_inst):
    est = lab.estimate_robustness(bb_inst, 1, min_trials=10, rel_se=1e-6, max_trials=40)
    assert est.trials == 40 and not est.converged


def test_d_clause():
    assert lab.build_d_clause(Backbone([3, -1])) == (1, -3)
    assert lab.build_d_clause(Backbone()) == ()


def test_mus_is_minimal_unsatisfiable():
    found = 0
    for s in range(40):
        inst = random_instance(8, 60, seed=s)
        if oracles.is_sat(8, list(inst.clauses)):
            continue
        mus = lab.find_mus(inst, s)
        assert oracles.is_mus(8, list(mus.clauses))
        assert [inst.clauses[i] for i in mus.parent_indices] == list(mus.clauses)
        found += 1
    assert found >= 5


def test_mus_keeps_protected_clause():
    inst = CnfInstance(2, ((1,), (-1,), (2,), (-2,)))
    mus = lab.find_mus(inst, 0, protected=2)
    assert 2 in mus.parent_indices and sorted(mus.parent_indices) == [2, 3]
    with pytest.raises(SatisfiableError):
        lab.find_mus(CnfInstance(1, ((1,),)), 0)


def test_bms_is_backbone_minimal(bb_inst):
    for s in range(5):
        res = lab.find_bms(bb_inst, s)
        sub = list(res.sub_instance.clauses)
        assert oracles.is_bms(12, list(bb_inst.clauses), sub)
        assert res.sub_instance.parent_indices == res.parent_indices


@settings(max_examples=30)
@given(instances(max_n=6, max_m=14))
def test_bms_property(inst):
    if not oracles.is_sat(inst.n, list(inst.clauses)):
        return
    res = lab.find_bms(inst, 1)
    assert oracles.is_bms(inst.n, list(inst.clauses), list(res.sub_instance.clauses))


def test_preserve_removal_keeps_backbone_and_nests(bb_inst):
    bms = lab.find_bms(bb_inst, 2)
    bb = oracles.backbone(12, list(bb_inst.clauses))
    outside = bb_inst.m - bms.size
    prev = None
    for m_r in (0, 3, 10, outside):
        out = lab.preserve_backbone_removal(bb_inst, bms, m_r, (5,), verify=True)
        assert out.m == bb_inst.m - m_r
        assert oracles.backbone(12, list(out.clauses)) == bb
        assert set(bms.parent_indices) <= set(out.parent_indices)
        if prev is not None:
            assert set(out.parent_indices) <= set(prev.parent_indices)
        prev = out
    with pytest.raises(ValueError):
        lab.preserve_backbone_removal(bb_inst, bms, outside + 1, 0)


def test_random_removal_nests():
    inst = random_instance(10, 40, seed=1)
    a = lab.random_removal(inst, 5, (2,))
    b = lab.random_removal(inst, 12, (2,))
    assert a.m == 35 and b.m == 28
    assert set(b.parent_indices) <= set(a.parent_indices)
    with pytest.raises(ValueError):
        lab.random_removal(inst, 41, 0)


def test_reduce_removes_only_shrinking_clauses(bb_inst):
    res = lab.reduce_backbone_removal(bb_inst, 20, (6,))
    sizes = res.backbone_sizes
    assert all(a > b for a, b in zip(sizes, sizes[1:]))
    assert res.removed == len(res.order) == len(sizes) - 1
    clauses = list(bb_inst.clauses)
    for j in range(res.removed + 1):
        part = remove_clauses(bb_inst, res.order[:j])
        assert len(oracles.backbone(12, list(part.clauses))) == sizes[j]
    assert res.instance == remove_clauses(bb_inst, res.order)
    if res.removed < 20:
        # stopped early: empty backbone or nothing left that shrinks it
        last = list(res.instance.clauses)
        assert sizes[-1] == 0 or max(oracles.bc(12, last)) == 0
    # prefixes of a longer chain are the shorter chains
    short = lab.reduce_backbone_removal(bb_inst, 2, (6,))
    assert short.order == res.order[:2]
    assert clauses == list(bb_inst.clauses)


def test_backbone_contribution_matches_oracle(bb_inst):
    got = lab.backbone_contribution(bb_inst).tolist()
    assert got == oracles.bc(12, list(bb_inst.clauses))


@settings(max_examples=40)
@given(instances(max_n=6, max_m=16))
def test_backbone_contribution_property(inst):
    if not oracles.is_sat(inst.n, list(inst.clauses)):
        return
    assert lab.backbone_contribution(inst).tolist() == oracles.bc(inst.n, list(inst.clauses))


def test_provenance_sidecar(bb_inst):
    child = remove_clauses(bb_inst, [0, 4])
    doc = json.loads(lab.provenance_sidecar(bb_inst, child, Backbone([2, -5]), [1, 2], note="x"))
    assert doc["removed_indices"] == [0, 4]
    assert doc["parent_sha256"] == bb_inst.content_hash()
    assert doc["backbone"] == Backbone([2, -5]).sorted()
    assert doc["note"] == "x"
