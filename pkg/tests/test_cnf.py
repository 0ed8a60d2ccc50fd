import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from bbfrag.cnf import (Backbone, CnfInstance, compose_parent_indices, evaluate, hamming_distance, negate,
                        remove_clauses, satisfies)
from conftest import random_instance
from strategies import assignments, instances


def naive_unsat(inst, t):
    return {i for i, c in enumerate(inst.clauses) if not any(t[abs(l) - 1] == (l > 0) for l in c)}


def test_evaluate_empty_instance():
    inst = CnfInstance(3, ())
    assert evaluate(inst, [True, False, True]).unsat_count == 0


def test_evaluate_unit_clause():
    res = evaluate(CnfInstance(1, ((1,),)), [False])
    assert res.unsat_indices == {0}
    assert res.unsat_count == 1


def test_evaluate_matches_naive_recount():
    rng = np.random.default_rng(0)
    inst = random_instance(10, 30, seed=4)
    for _ in range(50):
        t = rng.integers(0, 2, 10).astype(bool)
        assert set(evaluate(inst, t).unsat_indices) == naive_unsat(inst, t)


def test_repeated_variable_clause_satisfied_by_any_occurrence():
    inst = CnfInstance(2, ((1, 1, -2),))
    assert 0 in inst.irregular
    assert satisfies(inst, [False, False])
    assert not satisfies(inst, [False, True])


def test_empty_clause_is_never_satisfied():
    inst = CnfInstance(2, ((),))
    assert all(evaluate(inst, t).unsat_count == 1
               for t in ([0, 0], [0, 1], [1, 0], [1, 1]))


def test_quasi_solution_membership():
    inst = CnfInstance(2, ((1,), (2,), (-1, -2)))
    res = evaluate(inst, [False, False])
    assert res.is_quasi_solution_for({0, 1})
    assert not res.is_quasi_solution_for({0})


def test_literal_range_checked():
    with pytest.raises(ValueError):
        CnfInstance(1, ((2,),))
    with pytest.raises(ValueError):
        CnfInstance(1, ((0,),))


def test_hamming_basics():
    t = np.array([True, False, True, True])
    assert hamming_distance(t, t) == 0
    u = t.copy()
    u[2] = ~u[2]
    assert hamming_distance(t, u) == 1
    assert hamming_distance(t, ~t) == 4
    with pytest.raises(ValueError):
        hamming_distance(t, t[:3])


@given(st.lists(st.lists(st.booleans(), min_size=6, max_size=6), min_size=3, max_size=3))
def test_hamming_triangle_and_symmetry(ts):
    a, b, c = (np.array(x) for x in ts)
    assert hamming_distance(a, b) == hamming_distance(b, a)
    assert hamming_distance(a, c) <= hamming_distance(a, b) + hamming_distance(b, c)


def test_remove_clauses_multiset():
    inst = CnfInstance(1, ((1,), (1,)))
    out = remove_clauses(inst, {0})
    assert out.clauses == ((1,),)
    assert out.parent_indices == (1,)
    assert remove_clauses(inst, set()) == inst
    assert remove_clauses(inst, {0, 1}).m == 0
    assert remove_clauses(inst, {0, 1}).n == 1
    with pytest.raises(IndexError):
        remove_clauses(inst, {2})


def test_remove_clauses_composes_parent_indices():
    inst = random_instance(8, 20, seed=1)
    a = remove_clauses(inst, {0, 5})
    b = remove_clauses(a, {0})
    assert b.parent_indices[0] == 1  # index into a, not into inst
    chained = compose_parent_indices(b, a)
    assert chained[0] == 2
    assert [inst.clauses[i] for i in chained] == list(b.clauses)


@given(instances(max_n=6, max_m=12), st.data())
def test_removal_never_increases_unsat(inst, data):
    t = data.draw(assignments(inst.n))
    drop = data.draw(st.sets(st.integers(0, max(inst.m - 1, 0)), max_size=inst.m)) if inst.m else set()
    assert evaluate(remove_clauses(inst, drop), t).unsat_count <= evaluate(inst, t).unsat_count


def test_backbone_consistency():
    assert Backbone([1, -2]).variables == {1, 2}
    with pytest.raises(ValueError):
        Backbone([1, -1])
    assert negate(negate(-3)) == -3


def test_content_hash_is_order_sensitive():
    a = CnfInstance(2, ((1,), (2,)))
    b = CnfInstance(2, ((2,), (1,)))
    assert a.content_hash() != b.content_hash()
    assert a.content_hash() == CnfInstance(2, ((1,), (2,))).content_hash()
