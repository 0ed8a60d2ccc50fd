import os
import sys

import numpy as np
import pytest
from hypothesis import HealthCheck, settings

sys.path.insert(0, os.path.dirname(__file__))

from bbfrag.cnf import CnfInstance  # noqa: E402
from bbfrag.generate import GenSpec, generate_random_ksat  # noqa: E402
from bbfrag.rng import generator  # noqa: E402

settings.register_profile("default", deadline=None, max_examples=60,
                          suppress_health_check=[HealthCheck.too_slow])
settings.load_profile("default")


def random_instance(n, m, seed, k=3):
    return generate_random_ksat(GenSpec(n, m, k), generator(seed))


def sat_instance(n, m, seed, k=3):
    """First satisfiable draw at or after ``seed``."""
    from bbfrag.solver import solve

    while True:
        inst = random_instance(n, m, seed, k)
        if solve(inst).satisfiable:
            return inst
        seed += 1


# criterion number -> (passed, detail); filled by test_acceptance
ACCEPTANCE: dict[int, tuple[bool, str]] = {}


def pytest_terminal_summary(terminalreporter):
    if not ACCEPTANCE:
        return
    terminalreporter.section("acceptance criteria")
    for k in sorted(ACCEPTANCE):
        ok, detail = ACCEPTANCE[k]
        terminalreporter.write_line(f"criterion {k:2d}: {'PASS' if ok else 'FAIL'}  {detail}")


@pytest.fixture
def rng():
    return np.random.default_rng(12345)
