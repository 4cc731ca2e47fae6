import numpy as np
import pytest

from regret_control.plant import PlantModel, random_plant


@pytest.fixture
def s1():
    return PlantModel(0.5, 1.0, 1.0, 1.0, 1.0)


@pytest.fixture
def rng():
    return np.random.default_rng(12345)


def random_models(seed, count, n_max=8, m_max=4, p_max=4, rho_max=1.5, weights=False):
    rng = np.random.default_rng(seed)
    out = []
    for _ in range(count):
        n, m, p = (int(v) for v in rng.integers(1, (n_max + 1, m_max + 1, p_max + 1)))
        out.append(random_plant(rng, n, m, p, rho=rng.uniform(0.2, rho_max), weights=weights))
    return out


ACCEPTANCE_LINES = []


def pytest_terminal_summary(terminalreporter):
    if ACCEPTANCE_LINES:
        terminalreporter.section("acceptance criteria")
        for line in sorted(ACCEPTANCE_LINES):
            terminalreporter.write_line(line)
