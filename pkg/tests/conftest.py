import numpy as np
import pytest
from hypothesis import HealthCheck, settings

from rfiscrub.linalg import CovarianceMatrix

settings.register_profile("default", max_examples=40, deadline=None,
                          suppress_health_check=[HealthCheck.too_slow])
settings.load_profile("default")


def random_psd(rng, M, spectrum=None):
    """Random Hermitian PSD matrix with the given (or random) spectrum."""
    X = rng.standard_normal((M, M)) + 1j * rng.standard_normal((M, M))
    Q, _ = np.linalg.qr(X)
    lam = rng.uniform(0.5, 2.0, M) if spectrum is None else np.asarray(spectrum, float)
    return CovarianceMatrix((Q * lam) @ Q.conj().T)


def spiked_spectrum(rng, M, d, gap=10.0, spread=None):
    """d dominant values at least ``gap`` times the largest tail value.

    With ``spread`` the dominant values are also mutually separated by at
    least that ratio.
    """
    tail = rng.uniform(0.5, 1.0, M - d)
    if spread is None:
        top = gap * tail.max() * rng.uniform(1.5, 20.0, d)
    else:
        top = gap * tail.max() * 1.5 * spread ** np.arange(d) * rng.uniform(1.0, 1.2, d)
    return np.concatenate([np.sort(top)[::-1], np.sort(tail)[::-1]])


@pytest.fixture
def rng():
    return np.random.default_rng(1234)


def pytest_terminal_summary(terminalreporter):
    mod = __import__("sys").modules.get("test_acceptance")
    results = getattr(mod, "RESULTS", None)
    if results:
        terminalreporter.section("acceptance criteria")
        for n in sorted(results):
            terminalreporter.write_line(results[n])
