import numpy as np
import pytest
from scipy.stats import chisquare

import oracles
from bbfrag.errors import BudgetExhausted
from bbfrag.generate import (GenSpec, generate_batch, generate_random_ksat, sample_satisfiable,
                             sample_with_backbone_size)
from bbfrag.rng import generator


def test_shape_and_distinct_variables():
    inst = generate_random_ksat(GenSpec(20, 300, 3), generator(1))
    assert inst.n == 20 and inst.m == 300
    for c in inst.clauses:
        assert len(c) == 3 and len({abs(l) for l in c}) == 3
        assert all(1 <= abs(l) <= 20 for l in c)


def test_variables_and_signs_are_uniform():
    inst = generate_random_ksat(GenSpec(10, 20_000, 3), generator(2))
    lits = np.array(inst.clauses).ravel()
    counts = np.bincount(np.abs(lits), minlength=11)[1:]
    assert chisquare(counts).pvalue > 1e-3
    pos = int((lits > 0).sum())
    assert abs(pos - lits.size / 2) < 4 * np.sqrt(lits.size / 4)


def test_variable_triples_are_uniform():
    inst = generate_random_ksat(GenSpec(5, 20_000, 3), generator(3))
    triples = [tuple(sorted(abs(l) for l in c)) for c in inst.clauses]
    keys = sorted(set(triples))
    assert len(keys) == 10
    assert chisquare([triples.count(k) for k in keys]).pvalue > 1e-3


def test_same_stream_same_instance():
    spec = GenSpec(30, 120, 3)
    a = generate_random_ksat(spec, generator(7, 1))
    b = generate_random_ksat(spec, generator(7, 1))
    c = generate_random_ksat(spec, generator(7, 2))
    assert a == b and a != c


def test_spec_validation():
    with pytest.raises(ValueError):
        GenSpec(2, 5, 3)
    with pytest.raises(ValueError):
        GenSpec(-1, 0)
    assert GenSpec(2, 0, 3).m == 0
    assert GenSpec.from_ratio(50, 4.3).m == 215
    assert GenSpec(50, 215).ratio == pytest.approx(4.3)


def test_sample_satisfiable_reports_the_accepted_attempt():
    spec = GenSpec(12, 60, 3, rng_seed=5)
    rep = sample_satisfiable(spec, 500, key=(4,))
    assert oracles.is_sat(12, list(rep.instance.clauses))
    assert rep.attempts == rep.attempt_index + 1
    assert rep.instance == generate_random_ksat(spec, generator(5, 4, rep.attempt_index))
    for j in range(rep.attempt_index):
        earlier = generate_random_ksat(spec, generator(5, 4, j))
        assert not oracles.is_sat(12, list(earlier.clauses))


def test_backbone_rejection_sampler_matches_oracle():
    spec = GenSpec(10, 43, 3, rng_seed=11)
    for target in (0, 3, 7):
        rep = sample_with_backbone_size(spec, target, 5000, key=(target,))
        bb = oracles.backbone(10, list(rep.instance.clauses))
        assert len(bb) == target and rep.backbone == bb
        assert rep.backbone_sizes[-1] == target
        assert all(s != target for s in rep.backbone_sizes[:-1])
        assert rep.satisfiable_seen == len(rep.backbone_sizes)


def test_budget_exhaustion():
    with pytest.raises(BudgetExhausted):
        sample_satisfiable(GenSpec(5, 200, 3), 3)
    with pytest.raises(BudgetExhausted):
        sample_with_backbone_size(GenSpec(10, 5, 3), 10, 20)
    with pytest.raises(ValueError):
        sample_with_backbone_size(GenSpec(10, 5, 3), 11, 20)


def test_batch_keys_samples_independently():
    spec = GenSpec(15, 60, 3, rng_seed=3)
    batch = list(generate_batch(spec, 3, 200))
    assert batch[1].instance == sample_satisfiable(spec, 200, key=(1,)).instance
    assert len({r.instance.content_hash() for r in batch}) == 3
