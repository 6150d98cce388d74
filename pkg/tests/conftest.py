import numpy as np
import pytest
from hypothesis import HealthCheck, settings

from lrwave.symbols import CoefficientField, HamiltonianSpec, PotentialField, ScalarField, Zero

settings.register_profile("lrwave", deadline=None, max_examples=25,
                          suppress_health_check=[HealthCheck.too_slow])
settings.load_profile("lrwave")


@pytest.fixture
def rng():
    return np.random.default_rng(12345)


class Quartic(ScalarField):
    """c |x|^4: a confining conformal factor whose geodesics stay bounded (tests only)."""

    def __init__(self, c):
        self.c = c

    def value(self, x):
        return self.c * np.sum(x * x, axis=-1) ** 2

    def grad(self, x):
        return 4 * self.c * np.sum(x * x, axis=-1)[..., None] * x

    def hess(self, x):
        n = x.shape[-1]
        r2 = np.sum(x * x, axis=-1)[..., None, None]
        return 4 * self.c * (r2 * np.eye(n) + 2 * x[..., :, None] * x[..., None, :])

    def third(self, x):
        n = x.shape[-1]
        I = np.eye(n)
        return 8 * self.c * (np.einsum("ij,...k->...ijk", I, x) + np.einsum("ik,...j->...ijk", I, x)
                             + np.einsum("jk,...i->...ijk", I, x))


def make_trapped_spec():
    q = Quartic(0.5)
    metric = CoefficientField(2, {(0, 0): q, (1, 1): q}, mu=0.8, c_low=1.0, c_high=np.inf)
    return HamiltonianSpec("TRAP", metric, PotentialField(Zero()), 0.8)


@pytest.fixture
def trapped_spec():
    return make_trapped_spec()


def pytest_terminal_summary(terminalreporter):
    import sys

    mod = sys.modules.get("test_acceptance")
    if mod is None or not getattr(mod, "RESULTS", None):
        return
    terminalreporter.section("acceptance criteria")
    for _, line in sorted(mod.RESULTS):
        terminalreporter.write_line(line)
