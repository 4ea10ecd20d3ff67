import math

import numpy as np
import pytest

from adhoc_capacity.deployment import assign_destinations, deploy
from adhoc_capacity.sphere import SphereParams
from adhoc_capacity.tessellation import CellGeometry, build_tessellation


class Instance:
    def __init__(self, n: int, coef: float, seed: int):
        self.n = n
        self.sp = SphereParams(n)
        self.cg = CellGeometry(n, coef * math.sqrt(math.log(n)))
        self.rho = self.cg.rho_n
        rng = np.random.default_rng(seed)
        self.t = build_tessellation(self.sp, self.cg, rng)
        self.ns = deploy(n, self.t, rng)
        self.tm = assign_destinations(self.ns, rng, lambda_n=1.0, cap=False)


@pytest.fixture(scope="session")
def small():
    """n = 4096 with rho_n = sqrt(ln n): about a hundred cells."""
    return Instance(4096, 1.0, 7)


@pytest.fixture(scope="session")
def medium():
    """n = 10^4 with rho_n = 0.5 sqrt(ln n): about a thousand cells."""
    return Instance(10_000, 0.5, 11)


@pytest.fixture
def rng():
    return np.random.default_rng(12345)
