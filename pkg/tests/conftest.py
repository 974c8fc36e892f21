import itertools

import numpy as np
import pytest

from diqss import qstate


@pytest.fixture
def rng():
    return np.random.default_rng(20240607)


@pytest.fixture
def ghz_rho():
    return qstate.pure(qstate.ghz(1, "+"))


def brute_expectation(rho, a, b, c):
    """Tr[rho (a x b x c)] with explicit index loops, no np.kron/np.trace."""
    total = 0j
    for r in itertools.product(range(2), repeat=3):
        for s in itertools.product(range(2), repeat=3):
            op = a[s[0], r[0]] * b[s[1], r[1]] * c[s[2], r[2]]
            total += rho[r[0] * 4 + r[1] * 2 + r[2], s[0] * 4 + s[1] * 2 + s[2]] * op
    return total
