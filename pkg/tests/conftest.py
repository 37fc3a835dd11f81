import itertools

import numpy as np
import pytest

from stochbench.model import IsingInstance


def all_configs(n):
    """Every spin vector of length n, as rows of a (2**n, n) array."""
    return np.array(list(itertools.product((-1, 1), repeat=n)), dtype=np.int8)


def brute_force_energies(instance):
    J = instance.dense
    S = all_configs(instance.n).astype(float)
    return np.einsum("ki,ij,kj->k", S, J, S)


def random_instance(n, rng, density=1.0, **kwargs):
    J = rng.normal(size=(n, n))
    J = np.triu(J, 1) * (rng.random((n, n)) < density)
    J = J + J.T
    return IsingInstance.from_dense(J, **kwargs)


@pytest.fixture
def ferro_pair():
    # J_12 = -1 favours aligned spins under the s'Js convention
    return IsingInstance.from_couplings(2, {(0, 1): -1.0}, planted_state=[1, 1], meta={"id": "ferro"})


@pytest.fixture
def rng():
    return np.random.default_rng(12345)


# (criterion, verdict, detail) lines filled in by test_acceptance.py
ACCEPTANCE_RESULTS = []


def pytest_terminal_summary(terminalreporter):
    if not ACCEPTANCE_RESULTS:
        return
    terminalreporter.section("acceptance criteria")
    for number, verdict, detail in sorted(ACCEPTANCE_RESULTS):
        terminalreporter.write_line(f"criterion {number}: {verdict}  {detail}")
