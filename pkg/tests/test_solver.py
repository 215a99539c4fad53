import numpy as np
import pytest

from tfelab.diagnostics import energy, mass
from tfelab.entropy import ModelParams, RegularizationParams
from tfelab.grid import Field, make_uniform_grid
from tfelab.solver import (
    InitialConditionSpec,
    SolverAbort,
    SolverConfig,
    initial_condition,
    initial_state,
    jacobian_banded,
    residual,
    solve,
    step,
)


def _dense(ab):
    n = ab.shape[1]
    J = np.zeros((n, n))
    for i in range(n):
        for j in range(max(0, i - 2), min(n, i + 3)):
            J[i, j] = ab[2 + i - j, j]
    return J


def test_config_invariants():
    p = ModelParams(1e-2, 2)
    with pytest.raises(ValueError):
        SolverConfig(p, 1.0, dt_init=1e-3, dt_max=1e-4)
    with pytest.raises(ValueError):
        SolverConfig(p, 1.0, newton_tol=0.0)
    with pytest.raises(ValueError):
        SolverConfig(p, -1.0)
    assert SolverConfig(p, 1.0).regularization(np.array([2.0])).delta == pytest.approx(8e-12)


def test_initial_condition_examples():
    g = make_uniform_grid(0, 1, 1024)
    u = initial_condition(InitialConditionSpec("parabola", {"a": 0, "b": 1, "mass": 1}), g)
    assert abs(np.sum(u.values) * g.h - 1.0) <= 1e-6
    assert np.max(u.values) == pytest.approx(1.5, abs=1e-5)
    assert np.argmax(u.values) in (511, 512)
    spec = InitialConditionSpec("half_parabola", {"edge": 1.0, "mass": 1, "wall": "left"})
    w = initial_condition(spec, g).values
    assert w[0] == pytest.approx(1.5, abs=1e-5) and w[-1] == pytest.approx(0.0, abs=2e-3)
    assert abs(np.sum(w) * g.h - 1.0) <= 1e-6
    z = initial_condition(InitialConditionSpec("table", {"values": np.zeros(1024)}), g)
    assert np.all(z.values == 0)


def test_initial_condition_floor_and_two_parabolas():
    g = make_uniform_grid(0, 1, 2000)
    spec = InitialConditionSpec(
        "two_parabolas", {"a1": 0.1, "b1": 0.4, "mass1": 0.3, "a2": 0.5, "b2": 0.9, "mass2": 0.7},
        precursor_floor=1e-3)
    u = initial_condition(spec, g)
    assert np.sum(u.values) * g.h == pytest.approx(1.0 + 1e-3, abs=1e-6)


@pytest.mark.parametrize("kind,params", [
    ("parabola", {"a": -0.1, "b": 0.5, "mass": 1}),
    ("parabola", {"a": 0.5, "b": 0.2, "mass": 1}),
    ("parabola", {"a": 0.1, "b": 0.5, "mass": 0}),
    ("half_parabola", {"edge": 0.5, "mass": 1, "wall": "top"}),
    ("table", {"values": [1.0, -1.0]}),
    ("blob", {}),
])
def test_initial_condition_rejects(kind, params):
    g = make_uniform_grid(0, 1, 16)
    with pytest.raises(ValueError):
        initial_condition(InitialConditionSpec(kind, params), g)


def test_constant_is_fixed_point():
    g = make_uniform_grid(0, 1, 64)
    cfg = SolverConfig(ModelParams(1e-2, 2), 1e-3, dt_init=1e-6, dt_max=1e-6)
    s0 = initial_state(Field(g, np.full(64, 0.7)), cfg)
    s1 = step(s0, cfg)
    assert s1.last_newton_iters <= 1
    assert np.array_equal(s1.u.values, s0.u.values)


def test_parabola_single_step_interior(unit_parabola):
    # 6x(1-x) does not satisfy u_x = 0 at the walls, so only the interior is
    # near equilibrium; the boundary cells move by O(1e-4)
    cfg = SolverConfig(ModelParams(1e-2, 2), 1.0, dt_init=1e-8, dt_max=1e-8)
    s1 = step(initial_state(unit_parabola, cfg), cfg)
    x = unit_parabola.grid.centers
    inner = (x >= 0.1) & (x <= 0.9)
    assert np.max(np.abs(s1.u.values - unit_parabola.values)[inner]) < 1e-6
    assert s1.last_dt == 1e-8


def test_mass_telescopes():
    rng = np.random.default_rng(3)
    g = make_uniform_grid(0, 1, 200)
    u = Field(g, 0.2 + rng.random(200))
    cfg = SolverConfig(ModelParams(0.1, 1.5), 1.0, dt_init=1e-7, dt_max=1e-7)
    s1 = step(initial_state(u, cfg), cfg)
    assert abs(np.sum(s1.u.values - u.values)) * g.h <= g.n_cells * cfg.newton_tol * g.h


def test_jacobian_matches_finite_differences():
    rng = np.random.default_rng(0)
    n, h, dt = 16, 1.0 / 16, 1e-4
    p, reg = ModelParams(0.1, 1.5), RegularizationParams(1e-6)
    v = 0.5 + rng.random(n)
    u = v.copy()
    J = _dense(jacobian_banded(v, dt, h, p, reg))
    fd = np.empty((n, n))
    e = 1e-6
    for j in range(n):
        dv = np.zeros(n)
        dv[j] = e
        fd[:, j] = (residual(v + dv, u, dt, h, p, reg) - residual(v - dv, u, dt, h, p, reg)) / (2 * e)
    assert np.max(np.abs(J - fd)) / np.max(np.abs(fd)) <= 1e-7
    assert np.all(J[np.abs(np.subtract.outer(range(n), range(n))) > 2] == 0)


def test_symmetry_preserved():
    g = make_uniform_grid(0, 1, 256)
    u0 = initial_condition(InitialConditionSpec("parabola", {"a": 0.3, "b": 0.7, "mass": 1}), g)
    cfg = SolverConfig(ModelParams(1e-2, 2), 1e-4, record_every=2e-5)
    traj = solve(u0, cfg)
    assert not traj.aborted
    for s in traj.snapshots:
        assert np.max(np.abs(s.u.values - s.u.values[::-1])) <= 1e-12


def test_t_end_zero_gives_initial_snapshot(unit_parabola):
    traj = solve(unit_parabola, SolverConfig(ModelParams(1e-2, 2), 0.0))
    assert len(traj) == 1 and traj.times[0] == 0.0
    assert np.array_equal(traj[0].u.values, unit_parabola.values)


def test_record_times_and_counters():
    g = make_uniform_grid(0, 1, 128)
    u0 = initial_condition(InitialConditionSpec("parabola", {"a": 0.3, "b": 0.7, "mass": 1}), g)
    traj = solve(u0, SolverConfig(ModelParams(1e-2, 2), 1e-4, record_every=3e-5))
    np.testing.assert_allclose(traj.times, [0, 3e-5, 6e-5, 9e-5, 1e-4], rtol=1e-12, atol=0)
    assert traj.step_count > 0 and traj.newton_iter_total >= traj.step_count


def test_mass_and_energy_on_reference_run():
    g = make_uniform_grid(0, 1, 512)
    u0 = initial_condition(InitialConditionSpec("parabola", {"a": 0.4, "b": 0.6, "mass": 1}), g)
    traj = solve(u0, SolverConfig(ModelParams(1e-2, 2), 1e-3, record_every=1e-4))
    m = np.array([mass(s.u) for s in traj.snapshots])
    e = np.array([energy(s.u) for s in traj.snapshots])
    assert np.max(np.abs(m - m[0])) / m[0] <= 1e-10
    assert np.all(np.diff(e) <= 1e-8 * e[0])
    assert min(s.u.values.min() for s in traj.snapshots) >= -1e-4 * u0.values.max()


def test_abort_on_dt_underflow():
    g = make_uniform_grid(0, 1, 128)
    u0 = initial_condition(InitialConditionSpec("parabola", {"a": 0.3, "b": 0.7, "mass": 1}), g)
    cfg = SolverConfig(ModelParams(1e-2, 2), 1e-3, dt_init=1e-4, dt_min=1e-4, dt_max=1e-4,
                       newton_max_iter=1)
    traj = solve(u0, cfg)
    assert traj.aborted and "underflow" in traj.message
    assert len(traj) == 1
    with pytest.raises(SolverAbort) as info:
        solve(u0, cfg, raise_on_abort=True)
    assert info.value.state is not None and info.value.state.t == 0.0


def test_negative_initial_data_rejected():
    g = make_uniform_grid(0, 1, 16)
    with pytest.raises(ValueError):
        solve(Field(g, np.full(16, -1.0)), SolverConfig(ModelParams(1e-2, 2), 1e-3))
