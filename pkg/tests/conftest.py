import os

import pytest
from hypothesis import HealthCheck, settings

settings.register_profile("ssns", deadline=None, max_examples=25,
                          suppress_health_check=[HealthCheck.too_slow, HealthCheck.function_scoped_fixture])
settings.load_profile("ssns")
os.environ.setdefault("SSNS_THREADS", "1")


@pytest.fixture(scope="session")
def grid():
    from ssns.fields import SimilarityGrid
    from ssns.grid import RadialGrid

    return SimilarityGrid(RadialGrid(), 6)


@pytest.fixture(scope="session")
def small_grid():
    from ssns.fields import SimilarityGrid
    from ssns.grid import RadialGrid

    return SimilarityGrid(RadialGrid(47, 8.0, 3), 4)


@pytest.fixture(scope="session")
def profile_01(grid):
    from ssns.datum import swirl_datum
    from ssns.profile import solve_profile

    return solve_profile(swirl_datum(), 0.1, grid=grid)
