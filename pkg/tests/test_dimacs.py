import pytest
from hypothesis import given

from bbfrag.cnf import CnfInstance
from bbfrag.dimacs import parse_dimacs, write_dimacs
from bbfrag.errors import DimacsError
from conftest import random_instance
from strategies import instances


def test_parse_minimal():
    inst = parse_dimacs("p cnf 2 1\n1 -2 0\n")
    assert inst.n == 2
    assert inst.clauses == ((1, -2),)


def test_comments_ignored_and_multiline_clauses():
    inst = parse_dimacs("c hello\np cnf 3 2\n1 2\n3 0 -1\n0\n")
    assert inst.clauses == ((1, 2, 3), (-1,))


def test_literal_out_of_range():
    with pytest.raises(DimacsError, match="out of range"):
        parse_dimacs("p cnf 1 1\n2 0\n")


@pytest.mark.parametrize("text", [
    "p cnf x 1\n1 0\n",
    "1 0\np cnf 1 1\n",
    "p cnf 1 1\np cnf 1 1\n1 0\n",
    "p cnf 1 1\n1 a 0\n",
])
def test_malformed(text):
    with pytest.raises(DimacsError):
        parse_dimacs(text)


def test_count_mismatch_strict_and_lenient():
    text = "p cnf 2 3\n1 0\n2 0\n"
    with pytest.raises(DimacsError):
        parse_dimacs(text)
    with pytest.warns(UserWarning):
        inst = parse_dimacs(text, strict=False)
    assert inst.m == 2


def test_roundtrip_random():
    inst = random_instance(20, 85, seed=3)
    assert parse_dimacs(write_dimacs(inst)) == inst


@given(instances(max_n=9, max_m=15, max_len=4, min_len=0))
def test_roundtrip_preserves_order_and_multiplicity(inst):
    back = parse_dimacs(write_dimacs(inst))
    assert back.n == inst.n and back.clauses == inst.clauses


def test_empty_clause_roundtrip():
    inst = CnfInstance(2, ((1,), ()))
    assert parse_dimacs(write_dimacs(inst)).clauses == ((1,), ())
