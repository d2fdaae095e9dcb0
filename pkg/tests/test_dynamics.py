import numpy as np
import pytest

from dibm.dynamics import (CONVERGED, FROZEN, MAX_STEPS, SimulationError, classify_basins,
                           fixed_iceline_simulate, initial_profile, simulate)
from dibm.equilibria import equilibrium_profile, find_interior_roots
from dibm.grid import Profile
from dibm.manifold import fixed_point
from dibm.physics import Params, State, fast_field_values


@pytest.fixture(scope="module")
def roots():
    return [r.eta for r in find_interior_roots(Params())]


@pytest.fixture(scope="module")
def manifold_graph():
    return fixed_point(Params()).graph


def t0(params, eta):
    return State(initial_profile(params.grid), eta)


def test_initial_profile(spec):
    p = initial_profile(spec)
    assert p.eval(0.0) == 14.0
    assert p.eval(1.0) == pytest.approx(-40.0, abs=1e-12)
    assert p.mean_unit_interval() == pytest.approx(-4.0, rel=1e-14)


@pytest.mark.parametrize("eta0", [0.5, 1.0])
def test_t0_runs_reach_stable_root(params, roots, eta0):
    traj = simulate(t0(params, eta0), params, profile_stride=10**9)
    assert traj.outcome == CONVERGED
    assert traj.final_eta == pytest.approx(roots[1], abs=1e-4)


def test_t0_run_from_low_iceline_freezes(params):
    traj = simulate(t0(params, 0.1), params, profile_stride=10**9)
    assert traj.outcome == FROZEN
    assert traj.eta_range[0] <= params.grid.y_min + params.grid.h


def test_start_at_equilibrium_stays(params, roots):
    eta = roots[1]
    traj = simulate(State(equilibrium_profile(eta, params), eta), params)
    assert traj.outcome == CONVERGED
    assert traj.final_eta == pytest.approx(eta, abs=1e-4)


def test_basins_split_at_unstable_root(params, roots):
    rows = classify_basins([roots[0] - 0.01, roots[0] + 0.01, 0.6], params)
    assert [r.outcome for r in rows] == [FROZEN, CONVERGED, CONVERGED]
    assert rows[2].final_eta == pytest.approx(roots[1], abs=1e-4)
    assert not any(r.separatrix for r in rows)
    assert isinstance(rows[0].separatrix, bool) and isinstance(rows[0].final_eta, float)


def test_separatrix_flag_on_short_run(params, roots):
    (row,) = classify_basins([roots[0]], params, max_steps=200)
    assert row.outcome == MAX_STEPS and row.separatrix


def test_fixed_iceline_zero_steps_from_equilibrium(params):
    traj = fixed_iceline_simulate(State(equilibrium_profile(0.3, params), 0.3), params)
    assert traj.outcome == CONVERGED and traj.steps == 0
    assert traj.params.eps == 0.0


@pytest.mark.parametrize("eta0", [0.1, 0.3, 0.5, 1.0])
def test_fixed_iceline_relaxation_rate(params, eta0):
    traj = fixed_iceline_simulate(t0(params, eta0), params, profile_stride=10**9)
    assert traj.outcome == CONVERGED and traj.final_eta == eta0
    dist = (traj.final.profile - equilibrium_profile(eta0, params)).sup_norm()
    assert dist < 1e-6
    assert traj.ratio <= 1 - params.dt * params.B + 1e-3


def test_frames_and_observer(params):
    seen = []
    traj = simulate(t0(params, 0.5), params, max_steps=120, stride=50, profile_stride=2,
                    observer=lambda n, v, eta: seen.append(n))
    assert traj.outcome == MAX_STEPS and traj.steps == 120
    assert seen == list(range(121))
    assert [f.time for f in traj.frames] == pytest.approx([0.0, 5.0, 10.0])
    assert [f.profile is not None for f in traj.frames] == [True, False, True]
    assert traj.frames[0].iceline_temp == pytest.approx(0.5)
    assert traj.frames[0].mean_temp == pytest.approx(-4.0)
    assert traj.final_time == pytest.approx(12.0)


def test_simulation_is_deterministic(params):
    a = simulate(t0(params, 0.5), params, max_steps=500)
    b = simulate(t0(params, 0.5), params, max_steps=500)
    assert a.final_eta == b.final_eta
    assert np.array_equal(a.final.profile.values, b.final.profile.values)


@pytest.mark.parametrize("eta0", [0.1, 0.3, 0.5, 0.9])
def test_two_timescales(params, manifold_graph, eta0):
    # the profile reaches the manifold well before the iceline covers half its path
    rec = []
    simulate(t0(params, eta0), params, max_steps=3000,
             observer=lambda n, v, eta: rec.append(
                 (n * params.dt, eta, np.max(np.abs(v - manifold_graph.rows_at(eta)[0])))))
    t, eta, dist = np.array(rec).T
    t_fast = t[np.argmax(dist < 1.0)]
    gap = np.abs(eta - eta[-1])
    t_half = t[np.argmax(gap < gap[0] / 2)]
    assert dist.min() < 1.0
    assert t_fast <= 1.5
    assert t_half >= 3 * t_fast


@pytest.mark.parametrize("eta0", [0.3, 0.5, 0.9])
def test_attraction_to_manifold(params, manifold_graph, eta0):
    rec = []
    simulate(t0(params, eta0), params, max_steps=3000,
             observer=lambda n, v, eta: rec.append(
                 (np.max(np.abs(fast_field_values(v, eta, params))),
                  np.max(np.abs(v - manifold_graph.rows_at(eta)[0])))))
    speed, dist = np.array(rec).T
    start = np.argmax(speed < 0.1)
    assert start > 0
    assert np.max(np.diff(dist[start:])) <= 1e-3


def test_non_finite_state_raises(params, spec):
    # bypass validation: dt above 1/(B+C) makes the Euler map expand
    unstable = params.replace(eps=0.0)
    object.__setattr__(unstable, "dt", 0.5)
    big = Profile(spec, 1e300 * (-1.0) ** np.arange(spec.n_points))
    with np.errstate(over="ignore", invalid="ignore"):
        with pytest.raises(SimulationError) as exc:
            simulate(State(big, 0.5), unstable, max_steps=5000)
    assert exc.value.step > 0


def test_initial_profile_grid_mismatch(params):
    other = params.replace(n_points=1201)
    with pytest.raises(ValueError, match="grid"):
        simulate(t0(other, 0.5), params)
