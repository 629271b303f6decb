import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from entrodyn.geometry import (
    GridField,
    GridSpec,
    flat_chart,
    laplace_beltrami,
    laplace_beltrami_matrix,
    make_space,
    sphere_chart,
    torus_chart,
    volume_weights,
)


def test_constant_field_maps_to_zero(sphere_space):
    grid = GridSpec.for_space(sphere_space, (32, 32))
    c = 3.7
    out = laplace_beltrami(sphere_space, grid, np.full(grid.shape, c)).values
    assert np.max(np.abs(out)) < 1e-12 * abs(c) / min(grid.spacings) ** 2


def test_flat_second_derivative():
    cs = make_space(flat_chart(1, 4.0), (1.0,))
    grid = GridSpec.for_space(cs, (256,))
    x = grid.mesh()[0]
    out = laplace_beltrami(cs, grid, x**2).values
    assert np.allclose(out[2:-2], 2.0, atol=1e-9)


def test_flat_mass_scaling():
    cs = make_space(flat_chart(1, 4.0), (2.0,))
    grid = GridSpec.for_space(cs, (256,))
    x = grid.mesh()[0]
    out = laplace_beltrami(cs, grid, x**2).values
    assert np.allclose(out[2:-2], 1.0, atol=1e-9)  # (1/m) d^2/dx^2


def test_sphere_eigenfunction(sphere_space):
    grid = GridSpec.for_space(sphere_space, (256, 256))
    th = grid.mesh()[0]
    f = np.cos(th)
    out = laplace_beltrami(sphere_space, grid, f).values
    interior = (slice(2, -2), slice(None))
    rel = np.max(np.abs(out + 2 * f)[interior]) / np.max(np.abs(f))
    assert rel < 0.01


def test_sphere_eigenfunction_convergence_order(sphere_space):
    errs = []
    for n in (64, 128, 256):
        grid = GridSpec.for_space(sphere_space, (n, n))
        th = grid.mesh()[0]
        f = np.cos(th)
        out = laplace_beltrami(sphere_space, grid, f).values
        errs.append(np.max(np.abs(out + 2 * f)[2:-2, :]))
    orders = np.log2(np.array(errs[:-1]) / np.array(errs[1:]))
    assert np.all(orders >= 1.9)


@given(seed=st.integers(0, 10_000))
@settings(max_examples=20, deadline=None)
def test_discrete_divergence_theorem_periodic(torus_space, seed):
    grid = GridSpec.for_space(torus_space, (16, 16))
    f = np.random.default_rng(seed).normal(size=grid.shape)
    w = volume_weights(torus_space, grid)
    out = laplace_beltrami(torus_space, grid, f).values
    assert abs(np.sum(w * out)) < 1e-10 * np.linalg.norm(f)


def test_conservation_with_reflecting_boundaries(sphere_space):
    grid = GridSpec.for_space(sphere_space, (24, 16))
    f = np.random.default_rng(0).normal(size=grid.shape)
    w = volume_weights(sphere_space, grid)
    out = laplace_beltrami(sphere_space, grid, f).values
    assert abs(np.sum(w * out)) < 1e-10 * np.linalg.norm(f)


@pytest.mark.parametrize("factory,counts", [
    (lambda: make_space(sphere_chart(), (1.5,)), (20, 24)),
    (lambda: make_space(torus_chart(), (1.0,)), (16, 16)),
    (lambda: make_space(flat_chart(1, 3.0), (2.0,)), (64,)),
])
def test_weighted_self_adjointness(factory, counts):
    cs = factory()
    grid = GridSpec.for_space(cs, counts)
    w = volume_weights(cs, grid).ravel()
    L = laplace_beltrami_matrix(cs, grid)
    rng = np.random.default_rng(9)
    f = rng.normal(size=grid.size)
    g = rng.normal(size=grid.size)
    lhs = np.dot(w * f, L @ g)
    rhs = np.dot(w * g, L @ f)
    assert abs(lhs - rhs) < 1e-11 * (np.linalg.norm(f) * np.linalg.norm(g))


def test_two_particles_on_circle_block_operator():
    from entrodyn.geometry import circle_chart

    cs = make_space(circle_chart(), (1.0, 2.0))
    grid = GridSpec.for_space(cs, (64, 64))
    x0, x1 = grid.mesh()
    f = np.sin(x0) + np.cos(2 * x1)
    out = laplace_beltrami(cs, grid, f).values
    expected = -np.sin(x0) / 1.0 - 4 * np.cos(2 * x1) / 2.0
    assert np.max(np.abs(out - expected)) < 1e-2


def test_grid_mismatch_raises(sphere_space):
    grid = GridSpec.for_space(sphere_space, (16, 16))
    with pytest.raises(ValueError):
        laplace_beltrami(sphere_space, grid, np.zeros((8, 8)))


def test_grid_requires_min_counts(sphere_space):
    with pytest.raises(ValueError):
        GridSpec.for_space(sphere_space, (4, 16))


def test_periodic_axis_spacing_times_count_is_period(circle_space):
    grid = GridSpec.for_space(circle_space, (64,))
    ax = grid.axes[0]
    assert ax.periodic
    assert ax.spacing * ax.count == pytest.approx(2 * np.pi, rel=1e-15)
