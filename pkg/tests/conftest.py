import numpy as np
import pytest

from pdmd import Signal, collect_from_plant, make_random_polylpv


@pytest.fixture(scope="session")
def random_plant():
    return make_random_polylpv(n_x=6, n_u=2, n_p=2, spectral_target=0.9, seed=1)


@pytest.fixture(scope="session")
def random_ensemble(random_plant):
    rng = np.random.default_rng(0)
    sig = Signal(random_plant.dt, rng.standard_normal((801, 2)))
    return collect_from_plant(random_plant, sig, np.zeros(6), rng.uniform(-1, 1, 800))
