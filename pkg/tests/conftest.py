import numpy as np
import pytest
from hypothesis import HealthCheck, settings

from kfspoof.kalman import GaussianBelief, reference_model

settings.register_profile("default", deadline=None, max_examples=60,
                          suppress_health_check=[HealthCheck.too_slow])
settings.load_profile("default")


@pytest.fixture
def model():
    return reference_model()


@pytest.fixture
def unit_prior():
    return GaussianBelief(np.zeros(2), np.eye(2))


def random_system(rng, n=2, m=2):
    """Stable-ish random system with random PSD noise."""
    from kfspoof.kalman import LinearSystem
    F = rng.uniform(-1, 1, (n, n))
    F *= 0.95 / max(1.0, np.abs(np.linalg.eigvals(F)).max())
    G = rng.uniform(-1, 1, (n, n))
    H = rng.uniform(-1, 1, (m, n)) + np.eye(m, n)
    a = rng.standard_normal((n, n))
    b = rng.standard_normal((m, m))
    return LinearSystem(F, G, H, 0.5 * a @ a.T, 0.5 * b @ b.T + 0.1 * np.eye(m))


def random_cov(rng, n=2):
    a = rng.standard_normal((n, n))
    return a @ a.T + 0.1 * np.eye(n)


def pytest_terminal_summary(terminalreporter):
    from criteria import RESULTS
    if RESULTS:
        terminalreporter.section("acceptance criteria")
        for k in sorted(RESULTS):
            terminalreporter.write_line(RESULTS[k])
