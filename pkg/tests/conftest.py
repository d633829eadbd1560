import numpy as np
import pytest
from hypothesis import HealthCheck, settings

from edgelab.potential import Potential

settings.register_profile("default", deadline=None, max_examples=60, suppress_health_check=[HealthCheck.too_slow])
settings.load_profile("default")


HERMITE = Potential((0.0, 0.0, 0.25))
QUARTIC = Potential((0.0, 0.0, 0.5, 0.0, 0.25))
SEXTIC = Potential((0.1, 0.3, 1.0, 0.2, 0.5, 0.0, 0.1))
SQUARE = Potential((0.0, 0.0, 1.0))
SHIFTED_QUARTIC = QUARTIC.shifted(0.4)


@pytest.fixture
def rng():
    return np.random.default_rng(20240601)


def random_jacobi(rng, n, scale=1.0):
    from edgelab.tridiag import TridiagonalSym

    return TridiagonalSym(scale * rng.normal(size=n), scale * rng.uniform(0.3, 1.5, n - 1))


def pytest_terminal_summary(terminalreporter):
    import sys

    mod = sys.modules.get("test_acceptance")
    if mod is None or not mod.RESULTS:
        return
    terminalreporter.section("acceptance criteria")
    for number in sorted(mod.RESULTS):
        terminalreporter.write_line(mod.RESULTS[number])
    missing = sorted(set(range(1, 15)) - set(mod.RESULTS))
    if missing:
        terminalreporter.write_line(f"not run: {', '.join(map(str, missing))}")
