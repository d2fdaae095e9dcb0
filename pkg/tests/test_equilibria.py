import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from dibm.equilibria import (ICE_COVERED, ICE_FREE, absorbed_integral, boundary_equilibria,
                             equilibrium_profile, find_interior_roots, iceline_excess)
from dibm.grid import Profile
from dibm.physics import Params, State, fast_field

# Independent oracle: adaptive quadrature of the smooth forcing plus brentq,
# computed once with scipy and frozen here.
ORACLE_H = {0.0: -7.859083967251685, 0.5: 4.5764910513376655, 1.0: -1.9651144326048868}
ORACLE_ROOTS = {
    10.5: (0.24676831825576767, 0.9376494979413245),
    15.0: (0.24630097306805257, 0.9431955246298559),
    25.0: (0.2458140611011703, 0.9470479418547215),
    50.0: (0.2455962567891118, 0.9484738902247429),
    100.0: (0.24554184860426345, 0.9486882983164973),
}
ORACLE_G = {0.5: 191.04063643350506}


@pytest.mark.parametrize("eta", sorted(ORACLE_H))
def test_iceline_excess_matches_oracle(eta, params):
    assert iceline_excess(eta, params) == pytest.approx(ORACLE_H[eta], abs=1e-6)


@pytest.mark.parametrize("M", sorted(ORACLE_ROOTS))
def test_roots_match_oracle(M):
    roots = find_interior_roots(Params(M=M))
    assert [r.stable for r in roots] == [False, True]
    for r, ref in zip(roots, ORACLE_ROOTS[M]):
        assert r.eta == pytest.approx(ref, abs=1e-6)


def test_absorbed_integral_values(params):
    assert absorbed_integral(0.5, params) == pytest.approx(ORACLE_G[0.5], rel=1e-8)
    # all ice / no ice: albedo saturates at 0.62 / 0.32 on [0, 1]
    assert absorbed_integral(-1.0, params) == pytest.approx(343 * 0.38, rel=1e-9)
    assert absorbed_integral(2.0, params) == pytest.approx(343 * 0.68, rel=1e-9)


def test_live_quadrature_oracle(params):
    integrate = pytest.importorskip("scipy.integrate")
    s = lambda y: 1 - 0.482 * (3 * y * y - 1) / 2
    for eta in (0.13, 0.62, 0.88):
        f = lambda y: 343 * s(y) * (1 - 0.47 - 0.15 * np.tanh(25 * (y - eta)))
        g, _ = integrate.quad(f, 0, 1, points=[eta], epsabs=1e-13)
        assert absorbed_integral(eta, params) == pytest.approx(g, rel=1e-9)
        local = f(eta)
        h = (local - 202 + (3.04 / 1.9) * (g - 202)) / (1.9 + 3.04) + 10
        assert iceline_excess(eta, params) == pytest.approx(h, abs=1e-7)


def test_absorbed_integral_increasing_in_eta(params):
    g = absorbed_integral(np.linspace(-0.5, 1.5, 401), params)
    assert np.all(np.diff(g) > 0)


def test_iceline_excess_vectorised(params):
    etas = np.linspace(-0.4, 1.4, 37)
    batch = iceline_excess(etas, params)
    assert np.allclose(batch, [iceline_excess(e, params) for e in etas], rtol=0, atol=1e-12)


def test_excess_agrees_with_profile_on_nodes(params, spec):
    for i in (spec.i_zero, spec.i_zero + 75, spec.i_zero + 150, spec.i_one):
        eta = float(spec.nodes[i])
        assert iceline_excess(eta, params) == pytest.approx(
            equilibrium_profile(eta, params).values[i] - params.T_c, abs=1e-10)


@settings(max_examples=100, deadline=None)
@given(st.floats(-0.5, 1.5))
def test_equilibrium_profile_is_fixed_point(eta):
    p = Params()
    F = fast_field(State(equilibrium_profile(eta, p), eta), p)
    assert F.sup_norm() < 1e-9


@settings(max_examples=30, deadline=None)
@given(st.floats(-0.5, 1.5))
def test_equilibrium_mean_identity(eta):
    # integrating the fixed-point equation over [0, 1] cancels transport
    p = Params()
    mean = equilibrium_profile(eta, p).mean_unit_interval()
    assert mean == pytest.approx((absorbed_integral(eta, p) - p.A) / p.B, rel=1e-12)


def test_roots_invariant_to_refinement(params):
    coarse = find_interior_roots(params)
    fine = find_interior_roots(params, scan_step=1e-4, xtol=1e-12)
    assert len(coarse) == len(fine) == 2
    for a, b in zip(coarse, fine):
        assert a.eta == pytest.approx(b.eta, abs=1e-8)
        assert a.stable == b.stable


def test_root_fields(params):
    for r in find_interior_roots(params):
        assert abs(r.h_value) < 1e-6
        assert r.iceline_temp == pytest.approx(params.T_c, abs=1e-6)


def test_no_roots_at_low_q():
    assert find_interior_roots(Params(Q=280.0)) == []


def test_boundary_equilibria_at_defaults(params):
    covered, free = boundary_equilibria(params)
    assert covered.kind == ICE_COVERED and covered.eta == 0.0
    assert free.kind == ICE_FREE and free.eta == 1.0
    assert covered.stable  # h(0) < 0: the iceline stays at the equator
    assert not free.stable  # h(1) < 0: the pole is below T_c
    assert covered.h_value == pytest.approx(ORACLE_H[0.0], abs=1e-6)
    assert free.h_value == pytest.approx(ORACLE_H[1.0], abs=1e-6)


def test_ice_free_state_stable_at_high_q():
    p = Params(Q=500.0)
    _, free = boundary_equilibria(p)
    assert free.stable and free.h_value == pytest.approx(41.2216, abs=1e-3)
    assert find_interior_roots(p) == []


def test_sharp_albedo_limit():
    # as M grows the roots approach the step-albedo values
    r = find_interior_roots(Params(M=400.0))
    assert r[0].eta == pytest.approx(0.2455, abs=5e-4)
    assert r[1].eta == pytest.approx(0.9487, abs=5e-4)


def test_profile_type(params):
    assert isinstance(equilibrium_profile(0.3, params), Profile)
