import pytest

from qsdlab.analytic import DriftParams
from qsdlab.measures import AtomicMeasure
from qsdlab.montecarlo import McConfig, simulate_bessel3, simulate_killed

BENCH_SEED = 20240611


@pytest.fixture(scope="session")
def killed_benchmark():
    """Killed paths at (r, x, t) = (1, 1, 1), n = 10^6, h = 10^-3."""
    cfg = McConfig(n_paths=1_000_000, step=1e-3, seed=BENCH_SEED)
    return simulate_killed(DriftParams(1.0), AtomicMeasure.dirac(1.0), 1.0, cfg)


@pytest.fixture(scope="session")
def bessel_benchmark():
    """Exact Bessel-3 draws at x0 = 1, t = 1, n = 10^6."""
    return simulate_bessel3(1.0, 1.0, McConfig(n_paths=1_000_000, seed=BENCH_SEED))
