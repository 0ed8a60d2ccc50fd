"""Hypothesis strategies for small CNF instances."""
from hypothesis import strategies as st

from bbfrag.cnf import CnfInstance


@st.composite
def literals(draw, n):
    v = draw(st.integers(1, n))
    return v if draw(st.booleans()) else -v


@st.composite
def instances(draw, max_n=8, max_m=30, max_len=3, min_len=1):
    n = draw(st.integers(1, max_n))
    m = draw(st.integers(0, max_m))
    clauses = draw(st.lists(st.lists(literals(n), min_size=min_len, max_size=max_len),
                            min_size=m, max_size=m))
    return CnfInstance.from_clauses(n, clauses)


@st.composite
def assignments(draw, n):
    return draw(st.lists(st.booleans(), min_size=n, max_size=n))
