import numpy as np
import pytest

import swingcert as sc
from swingcert.dynamics import IntegratorConfig, SystemState, integrate


@pytest.fixture(scope="session", autouse=True)
def warm_kernels():
    """Compile the integration kernels once so timed tests measure runs."""
    model = sc.smib_model(p_ref=0.5, k=1.0, inertia=1.0, droop=1.0)
    state = SystemState(theta=[0.1, -0.1], omega=[0.0, 0.0])
    cfg = IntegratorConfig(step_full=1e-3, step_reduced=1e-3)
    integrate(model, state, t_end=0.01, config=cfg, mode="full")
    integrate(model, state, t_end=0.01, config=cfg, mode="reduced")


@pytest.fixture
def smib():
    """Twin model of the default single-machine case (P*=0.5, K=1)."""
    return sc.smib_model(p_ref=0.5, k=1.0, inertia=1.0, droop=1.0)


@pytest.fixture
def rng():
    return np.random.default_rng(20260810)
