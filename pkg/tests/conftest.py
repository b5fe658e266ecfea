import numpy as np
import pytest

from qodimer import DimerParams, solve_symmetric_steady_states


@pytest.fixture(scope="session")
def fig4_params() -> DimerParams:
    return DimerParams(gamma=0.1, delta1=0.0, delta2=0.0,
                       j1=3.0, j2=1.0, pump=3.275)


@pytest.fixture(scope="session")
def fig4_lower(fig4_params):
    return solve_symmetric_steady_states(fig4_params)[0]


@pytest.fixture(scope="session")
def fig6_params() -> DimerParams:
    return DimerParams(gamma=0.1, delta1=1.1, delta2=1.1,
                       j1=20.0, j2=1.0, pump=0.0)


@pytest.fixture(scope="session")
def fig7_params() -> DimerParams:
    return DimerParams(gamma=1.0, delta1=0.0, delta2=0.0,
                       j1=4.0, j2=1.0, pump=0.0)


def random_params(rng: np.random.Generator, pump_max: float = 3.0,
                  ) -> DimerParams:
    return DimerParams(
        gamma=float(rng.uniform(0.1, 2.0)),
        delta1=float(rng.uniform(-1.5, 1.5)),
        delta2=float(rng.uniform(-1.5, 1.5)),
        j1=float(rng.uniform(0.0, 3.0)),
        j2=float(rng.uniform(0.0, 1.5)),
        pump=float(rng.uniform(0.0, pump_max)),
    )
