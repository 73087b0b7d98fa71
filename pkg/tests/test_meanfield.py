"""Particle, fixed-point, and finite-volume mean-field solvers."""

import numpy as np
import pytest

from kmflow import dynamics
from kmflow.dynamics import CouplingFunction, PhaseState, wrap_angle
from kmflow.graphon import Graphon
from kmflow.graphs import WeightedGraph
from kmflow.meanfield import (
    BlockOscillatorSystem,
    DensityField,
    ParticleEnsemble,
    StabilityConfig,
    VelocityFieldSpec,
    characteristic_flow,
    default_test_functions,
    density_field_from_spec,
    evolve_family,
    gronwall_envelope,
    picard_solve,
    quantile_family_from_density,
    solve_fv,
    solve_particles,
    stability_experiments,
    velocity,
    weak_residual,
    SpaceTimeTestFunction,
)
from kmflow.measures import (
    CircleMeasure,
    MeasureFamily,
    TwoCluster,
    Uniform,
    VonMises,
    dbar,
    initial_family,
)
from oracles import two_oscillator_gap

TWO_PI = 2.0 * np.pi
SINE = CouplingFunction.sine()


def _spec(graphon, n, coupling=SINE):
    return VelocityFieldSpec(graphon.cell_average(n), coupling)


# -- velocity field ----------------------------------------------------------


def test_velocity_zero_kernel():
    spec = _spec(Graphon.step(np.zeros((3, 3))), 3)
    fam = initial_family(VonMises(2.0, 1.0), 3, 8)
    v = velocity(spec, fam, np.linspace(0, TWO_PI, 7), 1)
    assert np.allclose(v, 0.0)


def test_velocity_vanishes_at_uniform():
    spec = _spec(Graphon.constant(0.5), 4)
    fam = initial_family(Uniform(), 4, 256)
    u = np.linspace(0.0, TWO_PI, 17)
    for cell in range(4):
        assert np.max(np.abs(velocity(spec, fam, u, cell))) < 1e-10


def test_velocity_single_atom_formula():
    spec = _spec(Graphon.small_world(0.1, 0.25), 8)
    theta = 1.0
    fam = MeasureFamily([CircleMeasure.point(theta)] * 8)
    u = np.array([0.3, 2.0, 5.5])
    for cell in (0, 3, 7):
        row_mean = spec.step_graphon.values[cell].mean()
        assert np.allclose(velocity(spec, fam, u, cell),
                           row_mean * np.sin(theta - u), atol=1e-14)


def test_velocity_cell_out_of_range():
    spec = _spec(Graphon.constant(0.5), 3)
    fam = initial_family(Uniform(), 3, 4)
    with pytest.raises(IndexError):
        velocity(spec, fam, 0.0, 3)


def test_velocity_amplitude_and_lipschitz_bounds():
    rng = np.random.default_rng(0)
    spec = _spec(Graphon.small_world(0.2, 0.3), 6)
    fam = initial_family(TwoCluster(0.3, 2.0, 0.4), 6, 16)
    u = rng.uniform(0, TWO_PI, 200)
    v = velocity(spec, fam, u, 2)
    assert np.max(np.abs(v)) <= 1.0 + 1e-9
    u2 = rng.uniform(0, TWO_PI, 200)
    v2 = velocity(spec, fam, u2, 2)
    assert np.all(np.abs(v - v2) <= np.abs(u - u2) + 1e-12)


# -- particle solver ---------------------------------------------------------


def test_particles_uniform_stationary():
    spec = _spec(Graphon.constant(0.5), 4)
    traj = solve_particles(spec, Uniform(), 4, 64, 1.0, 1e-3, record_every=100)
    assert max(dbar(f, traj.families[0]) for f in traj.families) < 1e-6


def test_particles_single_cell_two_atoms_closed_form():
    # n=1, m=2, W=1, sine: the two atoms follow the two-oscillator dynamics
    spec = VelocityFieldSpec(Graphon.constant(1.0).cell_average(1), SINE)
    fam0 = MeasureFamily([CircleMeasure(np.array([0.0, 1.0]), np.array([0.5, 0.5]))])
    traj = evolve_family(spec, fam0, 1.0, 1e-3, record_every=10**9)
    pos = np.sort(traj.final_family.cells[0].positions)
    gap = pos[1] - pos[0]
    assert abs(gap - two_oscillator_gap(1.0, 1.0, 1.0)) < 1e-8


def test_particles_bitwise_equal_to_direct_block_integration():
    spec = _spec(Graphon.small_world(0.2, 0.3), 3)
    rho0 = VonMises(1.0, 1.0)
    traj = solve_particles(spec, rho0, 3, 5, 0.5, 1e-2, record_every=2)
    fam0 = initial_family(rho0, 3, 5)
    system = BlockOscillatorSystem(spec.step_graphon, 5, spec.coupling)
    phases0 = np.concatenate([c.positions for c in fam0.cells])
    raw = dynamics.integrate(system, PhaseState(phases0), 0.5, 1e-2, record_every=2)
    assert np.array_equal(traj.times, raw.times)
    for fam, row in zip(traj.families, raw.phases):
        got = np.concatenate([c.positions for c in fam.cells])
        assert np.array_equal(got, np.asarray(wrap_angle(row)))


def test_block_rhs_matches_dense_kron_system():
    wn = Graphon.small_world(0.2, 0.3).cell_average(3).values
    m = 4
    dense = WeightedGraph(np.kron(wn, np.ones((m, m))))
    rng = np.random.default_rng(1)
    u = rng.uniform(0, TWO_PI, 12)
    for coup in (SINE, CouplingFunction.sine_shift(0.3),
                 CouplingFunction.custom(lambda v: 0.8 * np.sin(v), 0.8)):
        block = BlockOscillatorSystem(Graphon.step(wn).step_values, m, coup)
        full = dynamics.OscillatorSystem(dense, coup, K=1.0)
        assert np.allclose(block.rhs_phases(u), full.rhs_phases(u), atol=1e-12)


def test_particles_preserve_cell_mass():
    spec = _spec(Graphon.constant(0.8), 3)
    traj = solve_particles(spec, TwoCluster(0.5, 2.5, 0.3), 3, 10, 0.5, 1e-2)
    for fam in traj.families:
        for cell in fam.cells:
            assert abs(cell.masses.sum() - 1.0) <= 1e-12


def test_evolve_family_requires_uniform_atoms():
    spec = _spec(Graphon.constant(0.5), 1)
    fam = MeasureFamily([CircleMeasure(np.array([0.0, 1.0]), np.array([0.3, 0.7]))])
    with pytest.raises(ValueError):
        evolve_family(spec, fam, 1.0, 0.1)


def test_particle_ensemble_container():
    ensemble = ParticleEnsemble(2, 3, np.array([0.0, 1.0, 2.0, 3.0, 4.0, 5.0]))
    fam = ensemble.family()
    assert fam.n_cells == 2 and fam.cells[0].n_atoms == 3
    with pytest.raises(ValueError):
        ParticleEnsemble(2, 3, np.zeros(5))


# -- fixed-point iteration ---------------------------------------------------


def test_picard_uniform_fixed_point_immediately():
    spec = _spec(Graphon.constant(0.5), 4)
    fam0 = initial_family(Uniform(), 4, 32)
    _, report = picard_solve(spec, fam0, 1.0, 1e-2, alpha=3.0, tol=1e-4)
    assert report["converged"] and report["iterations"] == 1


def test_picard_contraction_ratios():
    spec = _spec(Graphon.constant(0.5), 4)
    fam0 = initial_family(TwoCluster(0.0, 2.0, 0.5), 4, 16)
    _, report = picard_solve(spec, fam0, 1.0, 1e-2, alpha=3.0, tol=1e-6,
                             max_iter=15)
    assert report["converged"]
    assert all(r <= 0.55 for r in report["contraction_ratios"])


def test_picard_agrees_with_particles():
    spec = _spec(Graphon.constant(0.5), 4)
    rho0 = TwoCluster(0.5, 2.6, 0.4)
    tol = 1e-4
    fam0 = initial_family(rho0, 4, 16)
    fixed, report = picard_solve(spec, fam0, 1.0, 5e-3, alpha=3.0, tol=tol,
                                 max_iter=25)
    assert report["converged"]
    particles = solve_particles(spec, rho0, 4, 16, 1.0, 5e-3)
    sup = max(dbar(a, b) for a, b in zip(fixed.families, particles.families))
    assert sup < 10.0 * tol


def test_picard_requires_contractive_alpha():
    spec = _spec(Graphon.constant(0.5), 2)
    fam0 = initial_family(Uniform(), 2, 4)
    with pytest.raises(ValueError):
        picard_solve(spec, fam0, 1.0, 0.1, alpha=2.0)


def test_picard_max_iter_reports_nonconvergence():
    spec = _spec(Graphon.constant(0.9), 2)
    fam0 = initial_family(TwoCluster(0.3, 2.4, 0.5), 2, 8)
    traj, report = picard_solve(spec, fam0, 1.0, 5e-2, alpha=3.0, tol=1e-15,
                                max_iter=2)
    assert not report["converged"]
    assert report["iterations"] == 2
    assert traj.times[-1] == pytest.approx(1.0)


def test_flow_two_parameter_composition():
    # transporting 0 -> s then s -> t equals transporting 0 -> t
    spec = _spec(Graphon.constant(0.7), 3)
    rho0 = VonMises(1.5, 2.0)
    frozen = solve_particles(spec, rho0, 3, 12, 1.0, 2e-2)
    start = [c.positions.copy() for c in frozen.families[0].cells]
    mid = characteristic_flow(spec, frozen, start, 0.0, 0.5)
    end_two_leg = characteristic_flow(spec, frozen, mid, 0.5, 1.0)
    end_direct = characteristic_flow(spec, frozen, start, 0.0, 1.0)
    for a, b in zip(end_two_leg, end_direct):
        assert np.array_equal(a, b)
    # s = s transport is the identity
    same = characteristic_flow(spec, frozen, start, 0.5, 0.5)
    for a, b in zip(same, start):
        assert np.array_equal(a, b)


# -- finite volumes ----------------------------------------------------------


def test_density_field_validation():
    with pytest.raises(ValueError):
        DensityField(np.ones((2, 8)))  # mass 2*pi per cell, not 1
    du = TWO_PI / 8
    ok = DensityField(np.full((2, 8), 1.0 / TWO_PI))
    assert ok.du == pytest.approx(du)
    with pytest.raises(ValueError):
        DensityField(-np.full((1, 4), 1.0 / TWO_PI))


def test_density_field_from_spec_normalized():
    field = density_field_from_spec(VonMises(5.0, 1.0), 3, 32)
    assert np.max(np.abs(field.cell_masses() - 1.0)) < 1e-14


def test_fv_uniform_stationary():
    spec = _spec(Graphon.constant(0.5), 4)
    rho0 = density_field_from_spec(Uniform(), 4, 64)
    traj = solve_fv(spec, rho0, 1.0, 0.9 * rho0.du, record_every=100)
    drift = np.max(np.abs(traj.final_field.values - rho0.values))
    assert drift < 1e-10


def test_fv_mass_conserved_over_1000_steps():
    spec = _spec(Graphon.constant(0.5), 2)
    rho0 = density_field_from_spec(VonMises(2.0, 1.0), 2, 128)
    dt = 0.5 * rho0.du
    traj = solve_fv(spec, rho0, 1000 * dt, dt, record_every=1000)
    assert np.max(np.abs(traj.final_field.cell_masses() - 1.0)) < 1e-12


def test_fv_rejects_cfl_violation():
    spec = _spec(Graphon.constant(0.5), 2)
    rho0 = density_field_from_spec(Uniform(), 2, 64)
    with pytest.raises(ValueError, match="CFL"):
        solve_fv(spec, rho0, 1.0, rho0.du)


def test_fv_positivity():
    spec = _spec(Graphon.constant(0.9), 2)
    rho0 = density_field_from_spec(VonMises(4.0, 0.5), 2, 64)
    traj = solve_fv(spec, rho0, 1.0, 0.9 * rho0.du, record_every=20)
    for field in traj.fields:
        assert np.all(field.values >= 0.0)


def test_fv_agrees_with_particles_moderate_resolution():
    spec = _spec(Graphon.constant(0.5), 4)
    rho0 = VonMises(2.0, np.pi)
    field0 = density_field_from_spec(rho0, 4, 256)
    fv = solve_fv(spec, field0, 1.0, 0.9 * field0.du, record_every=10**9)
    pt = solve_particles(spec, rho0, 4, 256, 1.0, 1e-2, record_every=10**9)
    fam_fv = quantile_family_from_density(fv.final_field, 256)
    assert dbar(fam_fv, pt.final_family) < 0.05


def test_quantile_family_from_density_uniform():
    field = density_field_from_spec(Uniform(), 2, 64)
    fam = quantile_family_from_density(field, 4)
    assert np.allclose(fam.cells[0].positions,
                       [np.pi / 4, 3 * np.pi / 4, 5 * np.pi / 4, 7 * np.pi / 4],
                       atol=1e-12)


# -- weak-form residual ------------------------------------------------------


def test_weak_residual_stationary_solution():
    spec = _spec(Graphon.constant(0.5), 2)
    rho0 = density_field_from_spec(Uniform(), 2, 64)
    traj = solve_fv(spec, rho0, 1.0, 0.5 * rho0.du, record_every=1)
    assert weak_residual(traj, spec) < 1e-8


def test_weak_residual_zero_test_function():
    spec = _spec(Graphon.constant(0.5), 2)
    rho0 = density_field_from_spec(VonMises(1.0, 1.0), 2, 32)
    traj = solve_fv(spec, rho0, 0.5, 0.5 * rho0.du, record_every=1)
    zero = SpaceTimeTestFunction(
        value=lambda t, u: np.zeros(np.shape(u)),
        dt=lambda t, u: np.zeros(np.shape(u)),
        du=lambda t, u: np.zeros(np.shape(u)),
    )
    assert weak_residual(traj, spec, [zero]) == 0.0


def test_weak_residual_shrinks_under_refinement():
    spec = _spec(Graphon.constant(0.5), 4)
    residuals = []
    for g in (64, 128):
        rho0 = density_field_from_spec(VonMises(1.0, 2.0), 4, g)
        traj = solve_fv(spec, rho0, 1.0, 0.5 * rho0.du, record_every=1)
        residuals.append(weak_residual(traj, spec))
    assert residuals[0] / residuals[1] >= 1.5


def test_default_test_functions_vanish_at_horizon():
    for test in default_test_functions(2.0):
        u = np.linspace(0, TWO_PI, 9)
        assert np.allclose(test.value(2.0, u), 0.0)


# -- stability and utility bounds -------------------------------------------


def test_stability_identical_inputs():
    res = stability_experiments(StabilityConfig(
        graphon_a=Graphon.constant(0.5), n=4, m=16, T=1.0, dt=1e-2,
        rho0=VonMises(1.0, 1.0)))
    assert res["measured"] == 0.0 and res["bound"] == 0.0 and res["passed"]


def test_stability_initial_data_bound():
    fam_a = initial_family(VonMises(1.5, 2.0), 4, 24)
    rng = np.random.default_rng(3)
    cells = [CircleMeasure(c.positions + rng.uniform(-0.15, 0.15, c.n_atoms),
                           c.masses) for c in fam_a.cells]
    res = stability_experiments(StabilityConfig(
        graphon_a=Graphon.constant(0.5), n=4, m=24, T=1.0, dt=1e-2,
        family_a=fam_a, family_b=MeasureFamily(cells)))
    assert res["passed"]
    assert res["bound"] == pytest.approx(np.e * res["initial_dbar"])


def test_stability_kernel_bound():
    res = stability_experiments(StabilityConfig(
        graphon_a=Graphon.constant(0.5), graphon_b=Graphon.constant(0.6),
        n=4, m=32, T=1.0, dt=1e-2, rho0=VonMises(1.5, 2.0)))
    assert res["kernel_l1"] == pytest.approx(0.1)
    assert res["bound"] == pytest.approx(np.exp(2.0) * 0.1)
    assert res["passed"]


def test_gronwall_envelope_dominates():
    t = np.linspace(0.0, 2.0, 2001)
    rng = np.random.default_rng(4)
    for _ in range(10):
        A = rng.uniform(0.2, 3.0)
        B = rng.uniform(0.0, 2.0)
        C = rng.uniform(0.1, 2.0)
        a = rng.uniform(0.0, 1.0) * (1.0 + np.sin(rng.uniform(1, 3) * t)) ** 2
        bound = gronwall_envelope(t, a, A, B, C)
        # phi growing no faster than e^{beta t}, beta <= A, satisfies the
        # integral hypothesis, so the envelope must dominate it
        beta = rng.uniform(0.0, A)
        phi = C * np.exp(beta * t)
        hypothesis_rhs = A * np.concatenate(
            [[0.0], np.cumsum((phi[1:] + phi[:-1]) / 2 * np.diff(t))]
        ) + B * np.concatenate(
            [[0.0], np.cumsum((a[1:] + a[:-1]) / 2 * np.diff(t))]
        ) + C
        assert np.all(phi <= hypothesis_rhs + 1e-9)
        assert np.all(phi <= bound * (1.0 + 1e-9) + 1e-12)
        # equality case: phi equal to the envelope itself
        assert np.all(bound <= gronwall_envelope(t, a, A, B, C) + 1e-15)
