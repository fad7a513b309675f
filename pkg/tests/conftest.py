import numpy as np
import pytest
from hypothesis import HealthCheck, settings

from redkin.correlations import CorrelationMatrix, ExpSum, lorentzian_correlation
from redkin.model import OpenSystem
from redkin.operators import pauli

settings.register_profile("redkin", max_examples=25, deadline=None,
                          suppress_health_check=[HealthCheck.too_slow])
settings.load_profile("redkin")


@pytest.fixture
def rng():
    return np.random.default_rng(12345)


@pytest.fixture
def mixed_qubit():
    """Qubit whose single coupling has both diagonal and off-diagonal parts."""
    p = pauli()
    system = OpenSystem(0.5 * p["z"], {"x": p["x"] + 0.5 * p["z"]})
    es = lorentzian_correlation(1.0, 1.0, 0.7) + ExpSum(np.array([0.3]), np.array([2.0]))
    return system, CorrelationMatrix.single(es, "x")
