import numpy as np
import pytest

from entrodyn.geometry import (
    circle_chart,
    flat_chart,
    make_space,
    sphere_chart,
    torus_chart,
)


@pytest.fixture(scope="session")
def sphere_space():
    return make_space(sphere_chart(), (1.0,))


@pytest.fixture(scope="session")
def torus_space():
    return make_space(torus_chart(), (1.0,))


@pytest.fixture(scope="session")
def circle_space():
    return make_space(circle_chart(), (1.0,))


@pytest.fixture(scope="session")
def flat1d_space():
    return make_space(flat_chart(1, 8.0), (1.0,))


def random_admissible_points(cs, n, seed=0, pad=0.05):
    """Uniform random points strictly inside the admissible box."""
    rng = np.random.default_rng(seed)
    cols = []
    for _, _, spec in cs.axis_specs:
        lo, hi = spec.admissible_lo, spec.admissible_hi
        if not spec.periodic:
            width = hi - lo
            lo, hi = lo + pad * width, hi - pad * width
        cols.append(rng.uniform(lo, hi, size=n))
    return np.stack(cols, axis=-1)
