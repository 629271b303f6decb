import numpy as np
import pytest

from entrodyn import pde
from entrodyn.errors import StepSizeError
from entrodyn.geometry import (
    GridField,
    GridSpec,
    circle_chart,
    flat_chart,
    make_space,
    normalize_density,
    volume_weights,
)
from entrodyn.params import SimParams


def circle_setup(nodes=256, masses=(1.0,)):
    cs = make_space(circle_chart(), masses)
    grid = GridSpec.for_space(cs, (nodes,))
    return cs, grid, grid.mesh()[0], volume_weights(cs, grid)


# ---------------------------------------------------------------------------
# Fokker-Planck step
# ---------------------------------------------------------------------------


def test_fp_heat_kernel_variance():
    cs, grid, x, w = circle_setup(256)
    sig0, T = 0.3, 0.2
    rho = normalize_density(cs, GridField(grid, np.exp(-((x - np.pi) ** 2) / (2 * sig0**2))))
    phi = GridField(grid, np.zeros(grid.shape), role="drift_potential")
    p = SimParams(eta=1.0, dt=1.0)
    dt = 0.8 * pde.fp_cfl_dt(cs, grid, p, None, diffusive=True)
    n = int(np.ceil(T / dt))
    p = p.with_(dt=T / n)
    for _ in range(n):
        rho = pde.fp_step(rho, phi, cs, p).rho
    var = float(np.sum(w * rho.values * (x - np.pi) ** 2))
    assert abs(var - (sig0**2 + T)) / (sig0**2 + T) < 0.01


def test_fp_uniform_is_stationary():
    cs, grid, x, w = circle_setup(128)
    rho = normalize_density(cs, GridField(grid, np.ones(grid.shape)))
    phi = GridField(grid, np.zeros(grid.shape), role="drift_potential")
    p = SimParams(eta=1.0, dt=1e-4)
    out = pde.fp_step(rho, phi, cs, p)
    assert np.max(np.abs(out.rho.values - rho.values)) < 1e-10
    assert out.clipped_mass == 0.0


def test_fp_mass_conserved_every_step():
    cs, grid, x, w = circle_setup(128)
    rho = normalize_density(cs, GridField(grid, 1.0 + 0.8 * np.sin(3 * x)))
    phi = GridField(grid, 0.2 * np.cos(x), role="drift_potential")
    p = SimParams(eta=1.0, dt=5e-5)
    for _ in range(50):
        rho = pde.fp_step(rho, phi, cs, p).rho
        assert abs(float(np.sum(w * rho.values)) - 1.0) < 1e-12


def test_fp_two_drives_agree():
    cs, grid, x, w = circle_setup(256)
    rho = normalize_density(cs, GridField(grid, 1.0 + 0.5 * np.cos(x)))
    phi_vals = 0.3 * np.sin(x)
    p = SimParams(eta=1.0, dt=2e-5)
    phi = GridField(grid, phi_vals, role="drift_potential")
    Phi = GridField(
        grid, p.eta * phi_vals - p.eta * 0.5 * np.log(rho.values), role="phase"
    )
    a = pde.fp_step(rho, phi, cs, p).rho.values
    b = pde.fp_step(rho, Phi, cs, p).rho.values
    # both drives advance the same continuity equation to discretization order
    assert np.max(np.abs(a - b)) < 10 * p.dt * max(grid.spacings) ** 2 / min(grid.spacings) ** 2


def test_fp_clips_negative_undershoot_and_reports():
    # a single-cell spike under advection-dominated centered flow (cell
    # Peclet > 1) undershoots; the step must clip, renormalize, and
    # report the clipped invariant mass
    cs, grid, x, w = circle_setup(128)
    spike = np.zeros(grid.shape)
    spike[64] = 1.0
    rho = normalize_density(cs, GridField(grid, spike))
    phi = GridField(grid, 40.0 * np.sin(x), role="drift_potential")
    v = pde.btilde(phi, cs, SimParams())
    dt = 0.9 * pde.fp_cfl_dt(cs, grid, SimParams(), v, diffusive=True)
    out = pde.fp_step(rho, phi, cs, SimParams(dt=dt))
    assert out.clipped_mass > 0.0
    assert np.all(out.rho.values >= 0.0)
    assert abs(float(np.sum(w * out.rho.values)) - 1.0) < 1e-12


def test_fp_cfl_violation_raises_with_suggestion():
    cs, grid, x, w = circle_setup(128)
    rho = normalize_density(cs, GridField(grid, np.ones(grid.shape)))
    phi = GridField(grid, np.zeros(grid.shape), role="drift_potential")
    p = SimParams(eta=1.0, dt=1.0)
    with pytest.raises(StepSizeError) as err:
        pde.fp_step(rho, phi, cs, p)
    assert err.value.suggested_dt is not None
    assert err.value.suggested_dt < 1.0


def test_fp_requires_role():
    cs, grid, x, w = circle_setup(128)
    rho = normalize_density(cs, GridField(grid, np.ones(grid.shape)))
    with pytest.raises(ValueError):
        pde.fp_step(rho, GridField(grid, np.zeros(grid.shape)), cs, SimParams(dt=1e-5))


# ---------------------------------------------------------------------------
# velocities
# ---------------------------------------------------------------------------


def test_osmotic_velocity_uniform_zero():
    cs, grid, x, w = circle_setup(128)
    rho = normalize_density(cs, GridField(grid, np.ones(grid.shape)))
    u, mask = pde.osmotic_velocity(rho, cs, SimParams())
    assert np.max(np.abs(u)) < 1e-12
    assert np.all(mask)


def test_osmotic_velocity_gaussian_linear():
    m = 2.0
    cs = make_space(flat_chart(1, 8.0), (m,))
    grid = GridSpec.for_space(cs, (512,))
    x = grid.mesh()[0]
    sig = 1.0
    rho = normalize_density(cs, GridField(grid, np.exp(-(x**2) / (2 * sig**2))))
    p = SimParams(eta=1.0)
    u, _ = pde.osmotic_velocity(rho, cs, p)
    expected = (p.eta / (2 * m)) * x / sig**2
    sel = np.abs(x) < 4
    assert np.max(np.abs(u[sel, 0] - expected[sel])) < 1e-3


def test_velocity_identity_v_equals_btilde_plus_u():
    cs, grid, x, w = circle_setup(256)
    rho = normalize_density(cs, GridField(grid, 1.0 + 0.6 * np.cos(x)))
    p = SimParams(eta=1.3)
    phi = GridField(grid, 0.4 * np.sin(2 * x), role="drift_potential")
    Phi = GridField(
        grid, p.eta * phi.values - p.eta * 0.5 * np.log(rho.values), role="phase"
    )
    v = pde.current_velocity(rho, Phi, cs)
    bt = pde.btilde(phi, cs, p)
    u, _ = pde.osmotic_velocity(rho, cs, p)
    assert np.max(np.abs(v - (bt + u))) < 10 * max(grid.spacings) ** 2


# ---------------------------------------------------------------------------
# Fisher information
# ---------------------------------------------------------------------------


def test_fisher_uniform_zero():
    cs, grid, x, w = circle_setup(128)
    rho = normalize_density(cs, GridField(grid, np.ones(grid.shape)))
    out = pde.fisher_information(rho, cs)
    assert np.max(np.abs(out.matrix)) < 1e-20
    assert not out.accuracy_warning


def test_fisher_gaussian_inverse_variance():
    cs = make_space(flat_chart(1, 8.0), (1.0,))
    grid = GridSpec.for_space(cs, (1024,))
    x = grid.mesh()[0]
    sig = 1.0
    rho = normalize_density(cs, GridField(grid, np.exp(-(x**2) / (2 * sig**2))))
    out = pde.fisher_information(rho, cs)
    assert abs(out.matrix[0, 0] - 1.0 / sig**2) < 0.005


def test_fisher_product_is_diagonal():
    cs = make_space(flat_chart(2, 6.0), (1.0,))
    grid = GridSpec.for_space(cs, (256, 256))
    x, y = grid.mesh()
    rho = normalize_density(
        cs, GridField(grid, np.exp(-(x**2) / 2 - (y**2) / (2 * 0.5**2)))
    )
    out = pde.fisher_information(rho, cs)
    assert abs(out.matrix[0, 1]) < 1e-8
    assert abs(out.matrix[1, 0]) < 1e-8
    assert out.matrix[0, 0] == pytest.approx(1.0, rel=0.01)
    assert out.matrix[1, 1] == pytest.approx(4.0, rel=0.01)


# ---------------------------------------------------------------------------
# energy functional and its variational derivative
# ---------------------------------------------------------------------------


def test_F_uniform_no_potential_vanishes():
    cs, grid, x, w = circle_setup(128)
    rho = normalize_density(cs, GridField(grid, np.ones(grid.shape)))
    p = SimParams(xi=0.125)
    assert pde.F_functional(rho, None, None, cs, p) == pytest.approx(0.0, abs=1e-15)
    dF = pde.dF_drho(rho, None, None, cs, p)
    assert np.max(np.abs(dF.values)) < 1e-10


def test_F_constant_potential_is_its_value():
    cs, grid, x, w = circle_setup(128)
    rho = normalize_density(cs, GridField(grid, 1.0 + 0.3 * np.sin(x)))
    c = 2.5
    V = GridField(grid, np.full(grid.shape, c), role="potential")
    p = SimParams(xi=0.0)
    assert pde.F_functional(rho, V, None, cs, p) == pytest.approx(c, rel=1e-12)
    dF = pde.dF_drho(rho, V, None, cs, p)
    assert np.allclose(dF.values, c)


def test_dF_matches_finite_difference_of_F():
    cs, grid, x, w = circle_setup(512)
    rho = normalize_density(cs, GridField(grid, 1.0 + 0.6 * np.cos(x)))
    V = GridField(grid, 0.4 * np.cos(2 * x), role="potential")
    p = SimParams(xi=0.125)
    pert = np.sin(x) + 0.3 * np.cos(3 * x + 0.4)
    pert -= np.sum(w * pert) / np.sum(w)
    eps = 1e-6
    Fp = pde.F_functional(GridField(grid, rho.values + eps * pert), V, None, cs, p)
    Fm = pde.F_functional(GridField(grid, rho.values - eps * pert), V, None, cs, p)
    lhs = (Fp - Fm) / (2 * eps)
    rhs = float(np.sum(w * pde.dF_drho(rho, V, None, cs, p).values * pert))
    assert abs(lhs - rhs) / abs(lhs) < 1e-5


# ---------------------------------------------------------------------------
# Hamiltonian
# ---------------------------------------------------------------------------


def test_hamiltonian_trivial_zero():
    cs, grid, x, w = circle_setup(128)
    rho = normalize_density(cs, GridField(grid, np.ones(grid.shape)))
    Phi = GridField(grid, np.full(grid.shape, 1.3), role="phase")
    p = SimParams(xi=0.0)
    assert pde.hamiltonian(rho, Phi, None, None, cs, p) == pytest.approx(0.0, abs=1e-14)


def test_hamiltonian_plane_wave_kinetic_energy():
    m = 1.7
    cs = make_space(flat_chart(1, 10.0), (m,))
    grid = GridSpec.for_space(cs, (512,))
    x = grid.mesh()[0]
    rho = normalize_density(cs, GridField(grid, np.exp(-(x**2) / 2)))
    mom = 0.8
    Phi = GridField(grid, mom * x, role="phase")
    p = SimParams(xi=0.0)
    H = pde.hamiltonian(rho, Phi, None, None, cs, p)
    assert H == pytest.approx(mom**2 / (2 * m), rel=1e-12)


# ---------------------------------------------------------------------------
# Hamilton-Jacobi and the coupled stepper
# ---------------------------------------------------------------------------


def test_hj_fixed_point_uniform():
    cs, grid, x, w = circle_setup(128)
    rho = normalize_density(cs, GridField(grid, np.ones(grid.shape)))
    Phi = GridField(grid, np.full(grid.shape, 0.7), role="phase")
    p = SimParams(xi=0.125, dt=1e-4)
    out = pde.hj_step(Phi, rho, None, None, cs, p)
    assert np.max(np.abs(out.values - Phi.values)) < 1e-12
    res = pde.coupled_step(rho, Phi, None, None, cs, p)
    assert np.max(np.abs(res.rho.values - rho.values)) < 1e-12
    assert np.max(np.abs(res.Phi.values - Phi.values)) < 1e-12


def test_phase_gauge_invariance():
    cs, grid, x, w = circle_setup(128)
    rho = normalize_density(cs, GridField(grid, 1.0 + 0.5 * np.cos(x)))
    Phi = GridField(grid, 0.3 * np.sin(x), role="phase")
    shifted = GridField(grid, Phi.values + 4.2, role="phase")
    p = SimParams(xi=0.125, dt=2e-5)
    a = pde.coupled_step(rho, Phi, None, None, cs, p)
    b = pde.coupled_step(rho, shifted, None, None, cs, p)
    assert np.max(np.abs(a.rho.values - b.rho.values)) < 1e-13
    assert np.max(np.abs((b.Phi.values - a.Phi.values) - 4.2)) < 1e-12
    va = pde.current_velocity(a.rho, a.Phi, cs)
    vb = pde.current_velocity(b.rho, b.Phi, cs)
    assert np.max(np.abs(va - vb)) < 1e-13


def test_coupled_energy_conservation_and_quadratic_drift():
    cs = make_space(flat_chart(1, 6.0), (1.0,))
    grid = GridSpec.for_space(cs, (256,))
    x = grid.mesh()[0]
    rho0 = normalize_density(cs, GridField(grid, np.exp(-(x**2) / 2)))
    Phi0 = GridField(grid, 0.2 * np.sin(0.5 * x), role="phase")
    p = SimParams(eta=1.0, k=1.0, xi=0.125, dt=2e-4)

    def drift(dt, steps):
        pp = p.with_(dt=dt)
        H0 = pde.hamiltonian(rho0, Phi0, None, None, cs, pp)
        r, P = rho0, Phi0
        worst = 0.0
        for _ in range(steps):
            res = pde.coupled_step(r, P, None, None, cs, pp, check_cfl=False)
            r, P = res.rho, res.Phi
            worst = max(worst, abs(pde.hamiltonian(r, P, None, None, cs, pp) - H0) / abs(H0))
        return worst

    d1 = drift(2e-4, 1000)
    d2 = drift(1e-4, 2000)
    assert d1 < 1e-3
    assert 2.5 < d1 / d2 < 6.0  # second-order energy drift


def test_coupled_step_mass_exact():
    cs, grid, x, w = circle_setup(256)
    rho = normalize_density(cs, GridField(grid, 1.0 + 0.6 * np.cos(x)))
    Phi = GridField(grid, 0.3 * np.sin(x), role="phase")
    p = SimParams(xi=0.125, dt=1e-5)
    r, P = rho, Phi
    for _ in range(20):
        res = pde.coupled_step(r, P, None, None, cs, p, check_cfl=False)
        r, P = res.rho, res.Phi
        assert abs(float(np.sum(w * r.values)) - 1.0) < 1e-12
        assert np.all(np.isfinite(r.values))
        assert np.all(np.isfinite(P.values))


def test_coupled_cfl_guard():
    cs, grid, x, w = circle_setup(128)
    rho = normalize_density(cs, GridField(grid, np.ones(grid.shape)))
    Phi = GridField(grid, np.zeros(grid.shape), role="phase")
    p = SimParams(xi=0.125, dt=10.0)
    with pytest.raises(StepSizeError):
        pde.coupled_step(rho, Phi, None, None, cs, p)
