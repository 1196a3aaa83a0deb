import logging

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from foilmesh.constraints import SnapConfig
from foilmesh.errors import CFLViolationError, InvalidParameterError, NumericalDivergenceError
from foilmesh.forces import MaterialParams, RestState, kinetic_energy, spring_energy, total_forces
from foilmesh.geometry import TriMesh, average_nn_distance, watertight_check
from foilmesh.integrator import (
    CONVERGED,
    DIVERGED,
    MAX_ITERATIONS,
    SimConfig,
    SimState,
    cfl_check,
    converged,
    euler_step,
    omega_max_estimate,
    run_simulation,
)
from foilmesh.seed import build_initial_mesh, convex_hull, fibonacci_lattice
from oracles import damped_oscillator, stiffness_matrix


def spring_1d(x0, k=1.0, m=1.0, c=0.0):
    """Free vertex 0 on a unit spring to fixed vertex 1 at the origin."""
    mesh = TriMesh([[1.0 + x0, 0, 0], [0, 0, 0]], np.zeros((0, 3)), fixed=[1])
    rest = RestState([[0, 1]], [1.0])
    params = MaterialParams(k_base=k, mass_m=m, damping_c=c, pressure_p=0, distance_factor_strength=0)
    return mesh, rest, params


def integrate(mesh, rest, params, dt, steps):
    cfg = SimConfig(dt=dt)
    state = SimState(mesh)
    xs, energy = [], []
    for _ in range(steps):
        f = total_forces(state.mesh, rest, params, 1.0, state.velocities)
        x, v, _ = euler_step(state, f, params, cfg)
        state = SimState(state.mesh.with_positions(x), v)
        xs.append(x)
        energy.append(spring_energy(state.mesh, rest, params, 1.0) + kinetic_energy(v, params))
    return np.array(xs), np.array(energy)


def test_sim_config_validation():
    for kw in ({"dt": 0}, {"epsilon": 0}, {"max_iterations": 0}, {"snap_every": 0},
               {"smooth_every": -1}, {"smooth_lambda": 1.0}, {"cfl_mode": "maybe"}):
        with pytest.raises(InvalidParameterError):
            SimConfig(**kw)


def test_omega_single_edge():
    mesh, rest, params = spring_1d(0.0)
    assert omega_max_estimate(mesh, rest, params, 1.0) == pytest.approx(np.sqrt(2))
    p4 = MaterialParams(k_base=4.0, distance_factor_strength=0)
    assert omega_max_estimate(mesh, rest, p4, 1.0) == pytest.approx(2 * np.sqrt(2))


@pytest.mark.parametrize("scale", [1.0, 0.9, 0.7])
def test_omega_bound_dominates_dense_spectrum(scale):
    mesh = convex_hull(fibonacci_lattice(30))
    rest = RestState.from_mesh(mesh, scale)
    params = MaterialParams(k_base=3.0, mass_m=2.0, distance_factor_strength=0)
    H = stiffness_matrix(mesh.positions, rest.edges, np.full(len(rest.edges), 3.0), rest.rest_lengths)
    omega_true = np.sqrt(np.linalg.eigvalsh(H).max() / params.mass_m)
    bound = omega_max_estimate(mesh, rest, params, 1.0)
    assert omega_true <= bound
    assert bound < 3 * omega_true


def test_uniform_bound_dominates_decayed():
    mesh = build_initial_mesh(np.array([[0.5, 0, 0], [-0.5, 0, 0]]), 100)
    rest = RestState.from_mesh(mesh)
    d = average_nn_distance(mesh.positions[:100])
    p = MaterialParams(distance_factor_strength=1.0)
    assert omega_max_estimate(mesh, rest, p, d) < omega_max_estimate(mesh, rest, p, d, uniform=True)


def test_cfl_examples(caplog):
    assert cfl_check(0.1, 10.0)
    with pytest.raises(CFLViolationError, match="admissible dt < 0.2"):
        cfl_check(0.25, 10.0)
    with pytest.raises(CFLViolationError):
        cfl_check(0.2, 10.0)
    with caplog.at_level(logging.WARNING):
        assert cfl_check(0.25, 10.0, "warn") is False
    assert "CFL" in caplog.text


def test_euler_step_examples():
    mesh = TriMesh([[0, 0, 0], [5, 5, 5]], np.zeros((0, 3)), fixed=[1])
    cfg = SimConfig(dt=0.1)
    x, v, disp = euler_step(SimState(mesh), np.zeros((2, 3)), MaterialParams(), cfg)
    assert np.array_equal(x, mesh.positions) and disp == 0
    x, v, disp = euler_step(SimState(mesh), np.array([[1.0, 0, 0], [0, 0, 0]]), MaterialParams(), cfg)
    np.testing.assert_allclose(v[0], [0.1, 0, 0])
    np.testing.assert_allclose(x[0], [0.01, 0, 0])
    assert disp == pytest.approx(0.01)
    assert np.array_equal(x[1], [5, 5, 5])


def test_euler_step_rejects_non_finite():
    mesh = TriMesh([[0, 0, 0], [1, 1, 1]], np.zeros((0, 3)))
    with pytest.raises(NumericalDivergenceError) as exc:
        euler_step(SimState(mesh), np.array([[0, 0, 0], [np.nan, 0, 0]]), MaterialParams(), SimConfig(dt=0.1))
    assert exc.value.vertex == 1


def test_converged_is_strict():
    cfg = SimConfig(epsilon=1e-3)
    assert converged(0.0, cfg) and converged(5e-4, cfg)
    assert not converged(1e-3, cfg)


def test_damped_oscillator_matches_closed_form():
    x0, k, m, c, dt = 0.1, 1.0, 1.0, 0.5, 1e-3
    period = 2 * np.pi / np.sqrt(k / m - (c / (2 * m)) ** 2)
    steps = int(np.ceil(10 * period / dt))
    mesh, rest, params = spring_1d(x0, k, m, c)
    xs, _ = integrate(mesh, rest, params, dt, steps)
    t = dt * np.arange(1, steps + 1)
    err = np.abs((xs[:, 0, 0] - 1.0) - damped_oscillator(t, x0, k, m, c))
    assert err.max() < 0.01 * x0


def test_critical_damping_does_not_oscillate():
    mesh, rest, params = spring_1d(0.1, 1.0, 1.0, 2.0)
    xs, _ = integrate(mesh, rest, params, 1e-3, 20000)
    s = np.sign(xs[:, 0, 0] - 1.0)
    s = s[s != 0]
    assert np.count_nonzero(np.diff(s)) <= 1


def test_energy_non_increasing_oscillator():
    mesh, rest, params = spring_1d(0.2, 1.0, 1.0, 2.5)
    _, e = integrate(mesh, rest, params, 1e-2, 2000)
    assert np.all(e[11:] <= e[10:-1] * (1 + 1e-9))


def test_energy_non_increasing_perturbed_sphere():
    base = convex_hull(fibonacci_lattice(20))
    rest = RestState.from_mesh(base)
    x = base.positions + np.random.default_rng(0).normal(scale=0.05, size=base.positions.shape)
    params = MaterialParams(damping_c=2.0, pressure_p=0.0, distance_factor_strength=0)
    dt = 0.5 * 2 / omega_max_estimate(base, rest, params, 1.0, uniform=True)
    _, e = integrate(base.with_positions(x), rest, params, dt, 300)
    assert np.all(e[11:] <= e[10:-1] * (1 + 1e-9))


def _rest_sphere():
    mesh = convex_hull(fibonacci_lattice(40))
    return mesh, RestState.from_mesh(mesh)


def test_run_already_converged():
    mesh, rest = _rest_sphere()
    params = MaterialParams(pressure_p=0.0, distance_factor_strength=0)
    state, reason, _ = run_simulation(SimState(mesh), params, rest, SnapConfig(), SimConfig(dt=0.05), 0.3)
    assert reason == CONVERGED and state.iteration == 1


def test_run_refuses_cfl_violation():
    mesh, rest = _rest_sphere()
    with pytest.raises(CFLViolationError):
        run_simulation(SimState(mesh), MaterialParams(), rest, SnapConfig(), SimConfig(dt=10.0), 0.3)


def test_run_diverges_in_warn_mode():
    mesh, rest = _rest_sphere()
    x = mesh.positions * 1.05
    params = MaterialParams(pressure_p=0.0, damping_c=0.0, distance_factor_strength=0)
    omega = omega_max_estimate(mesh, rest, params, 0.3, uniform=True)
    cfg = SimConfig(dt=3.0 / omega, cfl_mode="warn", max_iterations=5000, smooth_every=0)
    state, reason, _ = run_simulation(SimState(mesh.with_positions(x)), params, rest, SnapConfig(), cfg, 0.3)
    assert reason == DIVERGED


def test_run_max_iterations():
    mesh, rest = _rest_sphere()
    params = MaterialParams(pressure_p=-1.0, distance_factor_strength=0)
    state, reason, _ = run_simulation(SimState(mesh), params, rest, SnapConfig(), SimConfig(max_iterations=3), 0.3)
    assert reason == MAX_ITERATIONS and state.iteration == 3 and len(state.stats_history) == 3


def _box_run(**cfg_kw):
    fixed = np.array([[0.85, 0, 0], [-0.85, 0, 0], [0, 0.85, 0], [0, -0.85, 0]])
    mesh = build_initial_mesh(fixed, 200, 1.2)
    d = average_nn_distance(mesh.positions[:200])
    rest = RestState.from_mesh(mesh, 0.7)
    params = MaterialParams()
    return fixed, run_simulation(SimState(mesh), params, rest, SnapConfig(), SimConfig(**cfg_kw), d)


def test_run_box_small():
    fixed, (state, reason, rest) = _box_run()
    assert reason == CONVERGED
    assert watertight_check(state.mesh).is_closed
    assert state.mesh.positions[state.mesh.fixed].tobytes() == fixed.tobytes()
    assert state.stats_history[-1].max_displacement < 1e-4
    assert np.all(state.velocities[state.mesh.fixed] == 0)
    assert len(rest.edges) == 3 * state.mesh.n_faces // 2


def test_run_replay_is_bitwise():
    _, (a, _, _) = _box_run(max_iterations=40)
    _, (b, _, _) = _box_run(max_iterations=40)
    assert a.mesh.positions.tobytes() == b.mesh.positions.tobytes()
    assert a.stats_history == b.stats_history


def test_snapshots_and_stats_sinks():
    seen, snaps = [], []
    fixed = np.array([[0.85, 0, 0], [-0.85, 0, 0]])
    mesh = build_initial_mesh(fixed, 100, 1.2)
    rest = RestState.from_mesh(mesh, 0.7)
    run_simulation(SimState(mesh), MaterialParams(), rest, SnapConfig(),
                   SimConfig(max_iterations=12, snapshot_every=5), 0.3,
                   on_stats=seen.append, on_snapshot=lambda i, m: snaps.append(i))
    assert [s.iteration for s in seen] == list(range(1, 13))
    assert snaps == [5, 10]


def test_refine_cycle_during_run():
    fixed = np.array([[0.85, 0, 0], [-0.85, 0, 0]])
    mesh = build_initial_mesh(fixed, 60, 1.2)
    rest = RestState.from_mesh(mesh, 0.7)
    state, _, rest = run_simulation(SimState(mesh), MaterialParams(), rest, SnapConfig(),
                                    SimConfig(max_iterations=10, refine_every=10), 0.3)
    assert state.mesh.n_faces > 2 * 60
    assert watertight_check(state.mesh).is_closed
    assert len(rest.edges) == 3 * state.mesh.n_faces // 2
    assert state.velocities.shape == (state.mesh.n_vertices, 3)


@settings(max_examples=10)
@given(st.integers(0, 2**32 - 1))
def test_fixed_vertices_never_move(seed):
    rng = np.random.default_rng(seed)
    fixed = rng.uniform(-0.7, 0.7, size=(3, 3))
    mesh = build_initial_mesh(fixed, 80, 1.2)
    rest = RestState.from_mesh(mesh, 0.8)
    state, _, _ = run_simulation(SimState(mesh), MaterialParams(), rest, SnapConfig(snapping_tolerance=0.3),
                                 SimConfig(max_iterations=15), 0.2)
    assert state.mesh.positions[state.mesh.fixed].tobytes() == fixed.tobytes()


def test_smoothing_stops_once_motion_settles(monkeypatch):
    from foilmesh import integrator

    calls = []
    original = integrator.refine.laplacian_smooth

    def counting(mesh, lam, rounds):
        calls.append(len(calls))
        return original(mesh, lam, rounds)

    monkeypatch.setattr(integrator.refine, "laplacian_smooth", counting)
    _, (state, reason, _) = _box_run(smooth_every=5, smooth_threshold=5e-3)
    assert reason == CONVERGED
    disp = [s.max_displacement for s in state.stats_history]
    # smoothing runs on every 5th iteration while motion is above the
    # threshold and still shrinking, and stays off after the first miss
    expected, last = 0, np.inf
    for i in range(5, len(disp) + 1, 5):
        if not 5e-3 <= disp[i - 1] < last:
            break
        expected, last = expected + 1, disp[i - 1]
    assert len(calls) == expected


def test_smoothing_released_when_motion_stalls(monkeypatch):
    from foilmesh import integrator

    calls = []
    monkeypatch.setattr(integrator.refine, "laplacian_smooth",
                        lambda mesh, lam, rounds: calls.append(1) or mesh)
    # a threshold of zero leaves only the stall rule to switch smoothing off
    _, (state, reason, _) = _box_run(smooth_every=5, smooth_threshold=0.0)
    assert reason == CONVERGED
    assert 0 < len(calls) < len(state.stats_history) // 5


def test_smoothing_disabled():
    _, (state, reason, _) = _box_run(smooth_every=0)
    assert reason == CONVERGED


def test_box_never_deflates(caplog):
    caplog.set_level(logging.INFO, logger="foilmesh.integrator")
    _box_run()
    assert not any("pressure lowered" in r.getMessage() for r in caplog.records)
