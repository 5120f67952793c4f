import numpy as np
import pytest

from subdyn.core import GroundSet, table_function
from subdyn.oracle import check_submodular
from subdyn.rounding import SeededRng
from subdyn.synthetic import random_submodular_table


def make_verified_submodular(n: int, seed: int, kind=None):
    """Random submodular handle, verified by the exhaustive scan."""
    table = random_submodular_table(n, SeededRng(seed), kind=kind)
    f = table_function(GroundSet(n), table, name=f"rand[{seed}]")
    report = check_submodular(f)
    assert report.holds, f"generator produced a non-submodular table (seed {seed})"
    return f, table


@pytest.fixture
def rng():
    return np.random.default_rng(1234)
