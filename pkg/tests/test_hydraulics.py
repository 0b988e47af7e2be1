import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st
from scipy.integrate import trapezoid

from pipefdi import (PILOT_VALVES, BoundaryHeads, FluidState, Grid, LeakSpec, StepHead,
                     derive_coefficients, leak_outflow, pilot_grid, pilot_pipeline, rhs,
                     rk4_step, sigma_for_flow_loss, simulate, steady_state_leak_free,
                     steady_state_with_leak)
from pipefdi.errors import (ConfigurationError, HeadDomainError, InfeasibleConfigurationError,
                            SimulationError, ValidationError)
from pipefdi.hydraulics import ConstantHead, max_stable_step, node_sigmas, steady_flow

PAR = pilot_pipeline()
BC = BoundaryHeads.constant(10.0, 2.0)


def _vec(state):
    return np.concatenate([state.flows, state.heads])


# --- coefficients ---------------------------------------------------------

def test_pilot_coefficients_match_hand_values():
    # worked by hand: Ar = pi 0.1047^2 / 4, then a1 = g Ar, a2 = b^2/(g Ar), mu = f/(2 phi Ar)
    assert PAR.area == pytest.approx(8.609605e-3, rel=1e-6)
    assert PAR.a1 == pytest.approx(8.446023e-2, rel=1e-6)
    assert PAR.a2 == pytest.approx(2.6533305e7, rel=1e-6)
    assert PAR.mu == pytest.approx(15.447752, rel=1e-6)


def test_diameter_scaling_law():
    p2 = derive_coefficients(200.16, 2 * 0.1047, 1497.0, 2.785e-2)
    assert p2.area / PAR.area == pytest.approx(4.0)
    assert p2.a1 / PAR.a1 == pytest.approx(4.0)
    assert p2.a2 / PAR.a2 == pytest.approx(0.25)
    assert p2.mu / PAR.mu == pytest.approx(1 / 8)


def test_frictionless_pipe():
    assert derive_coefficients(200.16, 0.1047, 1497.0, 0.0).mu == 0.0


@pytest.mark.parametrize("field", ["length", "diameter", "wave_speed", "gravity"])
def test_nonpositive_input_names_field(field):
    kw = dict(length=200.16, diameter=0.1047, wave_speed=1497.0, friction=0.02, gravity=9.81)
    kw[field] = 0.0
    with pytest.raises(ValidationError) as exc:
        derive_coefficients(**kw)
    assert exc.value.field == field


@given(st.floats(1, 1e4), st.floats(1e-3, 2), st.floats(100, 2000), st.floats(1e-4, 0.1),
       st.floats(1, 20))
def test_coefficient_identities(L, phi, b, f, g):
    p = derive_coefficients(L, phi, b, f, g)
    assert p.area == math.pi * phi**2 / 4
    assert p.a1 == g * p.area
    assert p.a2 == b**2 / (g * p.area)
    assert p.mu == f / (2 * phi * p.area)
    assert derive_coefficients(p.length, p.diameter, p.wave_speed, p.friction, p.gravity) == p


# --- leak outflow ---------------------------------------------------------

@pytest.mark.parametrize("sigma,head,expected", [(0.0, 7.5, 0.0), (1e-4, 4.0, 2e-4), (1e-4, 0.0, 0.0)])
def test_leak_outflow_examples(sigma, head, expected):
    assert leak_outflow(sigma, head) == pytest.approx(expected, abs=1e-18)


def test_leak_outflow_negative_head():
    with pytest.raises(HeadDomainError):
        leak_outflow(1e-4, -0.1)


def test_leak_closed_before_onset():
    lk = LeakSpec(118.365, 3e-4, onset_time=50.0, opening_time=4.0)
    assert lk.sigma_at(49.999) == 0.0
    assert lk.sigma_at(52.0) == pytest.approx(1.5e-4)
    assert lk.sigma_at(54.0) == 3e-4
    ts = np.linspace(49, 56, 71)
    assert np.all(np.diff([lk.sigma_at(t) for t in ts]) >= 0)


# --- grids ----------------------------------------------------------------

def test_pilot_grid_has_valve_nodes():
    g = pilot_grid()
    z = g.node_positions()
    for v in PILOT_VALVES:
        assert np.min(np.abs(z - v)) < 1e-9
    assert g.length == pytest.approx(PAR.length, rel=1e-12)


def test_grid_length_mismatch():
    with pytest.raises(ValidationError):
        Grid.uniform(100.0, 4).check_length(PAR)


# --- rhs ------------------------------------------------------------------

def test_single_section_acceleration():
    g = Grid.uniform(PAR.length, 1)
    d = rhs(FluidState(np.array([0.0]), np.array([10.0, 2.0])), PAR, g, BC, [], 0.0)
    assert d.flows[0] == pytest.approx(PAR.a1 * 8 / 200.16)


@given(st.floats(1e-4, 0.1), st.floats(0, 30))
def test_friction_decelerates_flow(q, h):
    g = Grid.uniform(PAR.length, 3)
    state = FluidState(np.full(3, q), np.full(4, h))
    d = rhs(state, PAR, g, BoundaryHeads.constant(h, h), [], 0.0)
    assert np.all(d.flows < 0)
    d_rev = rhs(FluidState(-state.flows, state.heads), PAR, g, BoundaryHeads.constant(h, h), [], 0.0)
    assert np.all(d_rev.flows > 0)


def test_negative_head_at_leak_node():
    g = Grid((100.08, 100.08))
    state = FluidState(np.array([0.01, 0.01]), np.array([10.0, -1.0, 2.0]))
    with pytest.raises(HeadDomainError):
        rhs(state, PAR, g, BC, [LeakSpec(100.08, 1e-4)], 0.0)


# --- steady states --------------------------------------------------------

def test_pilot_steady_flow():
    q = steady_state_leak_free(PAR, 10.0, 2.0).q_in
    assert q == pytest.approx(math.sqrt(0.084460 * 8 / (15.447 * 200.16)), rel=1e-4)
    assert q == pytest.approx(1.478e-2, rel=1e-3)


def test_steady_flow_square_root_law():
    assert steady_flow(PAR, 18.0, 2.0) / steady_flow(PAR, 10.0, 2.0) == pytest.approx(math.sqrt(2))
    assert steady_flow(PAR, 2.0 + 1e-10, 2.0) < 1e-6


def test_steady_state_needs_forward_gradient():
    with pytest.raises(InfeasibleConfigurationError):
        steady_state_leak_free(PAR, 2.0, 2.0)


def test_simulation_converges_to_steady_flow():
    g = Grid.uniform(PAR.length, 4)
    x0 = FluidState(np.zeros(4), np.linspace(10.0, 2.0, 5))
    tr = simulate(x0, PAR, g, BC, [], 600.0, 0.01, sample_every=1000)
    q = steady_flow(PAR, 10.0, 2.0)
    assert np.allclose(tr.flows[-1], q, rtol=1e-3)


heads = st.tuples(st.floats(0.5, 20.0), st.floats(0.5, 30.0)).map(lambda t: (t[0] + t[1], t[0]))


@settings(max_examples=100, deadline=None)
@given(heads, st.sampled_from(PILOT_VALVES), st.floats(0.005, 0.3), st.floats(0.005, 0.05))
def test_steady_states_are_fixed_points(hh, pos, loss, friction):
    p = derive_coefficients(200.16, 0.1047, 1497.0, friction)
    h_in, h_out = hh
    g = pilot_grid()
    bc = BoundaryHeads.constant(h_in, h_out)
    free = steady_state_leak_free(p, h_in, h_out, g)
    assert np.max(np.abs(_vec(rhs(free, p, g, bc, [], 0.0)))) < 1e-9
    lk = LeakSpec(pos, sigma_for_flow_loss(p, h_in, h_out, pos, loss))
    st_ = steady_state_with_leak(p, h_in, h_out, lk, g)
    assert np.max(np.abs(_vec(rhs(st_, p, g, bc, [lk], 0.0)))) < 1e-9
    q1, q2 = st_.flows[0], st_.flows[-1]
    hf = st_.heads[g.nearest_interior_node(pos)]
    assert q1 - q2 == pytest.approx(lk.sigma * math.sqrt(hf), rel=1e-12)
    assert (q1 - q2) / q1 == pytest.approx(loss, rel=1e-8)


def test_zero_sigma_reduces_to_leak_free():
    a = steady_state_with_leak(PAR, 10.0, 2.0, LeakSpec(118.365, 0.0))
    b = steady_state_leak_free(PAR, 10.0, 2.0)
    assert a.flows[0] == pytest.approx(b.q_in, rel=1e-14)
    assert a.flows[1] == pytest.approx(b.q_in, rel=1e-14)
    assert a.heads[1] == pytest.approx(10.0 - 8.0 * 118.365 / 200.16, rel=1e-14)


def test_small_leak_first_order():
    sigma = 1e-7
    st_ = steady_state_with_leak(PAR, 10.0, 2.0, LeakSpec(118.365, sigma))
    hf0 = 10.0 - 8.0 * 118.365 / 200.16
    assert st_.flows[0] - st_.flows[1] == pytest.approx(sigma * math.sqrt(hf0), rel=1e-3)


def test_oversized_leak_is_infeasible():
    with pytest.raises(InfeasibleConfigurationError):
        steady_state_with_leak(PAR, 10.0, 2.0, LeakSpec(118.365, 1.0))


# --- integration ----------------------------------------------------------

def test_dt_guard():
    g = pilot_grid()
    limit = max_stable_step(PAR, g)
    assert limit == pytest.approx(0.5 * 11.535 / 1497.0, rel=1e-9)
    x0 = steady_state_leak_free(PAR, 10.0, 2.0, g)
    with pytest.raises(ConfigurationError):
        rk4_step(x0, PAR, g, BC, [], 0.0, 1.01 * limit)


def test_rk4_fixed_point():
    g = pilot_grid()
    x0 = steady_state_leak_free(PAR, 10.0, 2.0, g)
    x1 = rk4_step(x0, PAR, g, BC, [], 0.0, 0.0025)
    assert np.max(np.abs(_vec(x1) - _vec(x0))) < 1e-12


def test_rk4_taylor_consistency():
    g = Grid.uniform(PAR.length, 3)
    x0 = FluidState(np.array([0.010, 0.012, 0.014]), np.array([10.0, 7.0, 4.5, 2.0]))
    d = _vec(rhs(x0, PAR, g, BC, [], 0.0))
    errs = []
    for dt in (1e-4, 5e-5):
        errs.append(np.max(np.abs(_vec(rk4_step(x0, PAR, g, BC, [], 0.0, dt)) - _vec(x0) - dt * d)))
    assert errs[0] / errs[1] == pytest.approx(4.0, rel=0.05)


def test_rk4_one_step_error_order():
    g = Grid.uniform(PAR.length, 3)
    x0 = FluidState(np.array([0.010, 0.012, 0.014]), np.array([10.0, 7.0, 4.5, 2.0]))

    def one(dt):
        return _vec(rk4_step(x0, PAR, g, BC, [], 0.0, dt))

    def fine(dt, m=8):
        x = x0
        for k in range(m):
            x = rk4_step(x, PAR, g, BC, [], k * dt / m, dt / m)
        return _vec(x)

    e1 = np.max(np.abs(one(0.008) - fine(0.008)))
    e2 = np.max(np.abs(one(0.004) - fine(0.004)))
    assert 24 < e1 / e2 < 40


def test_zero_horizon_returns_initial_state():
    g = pilot_grid()
    x0 = steady_state_leak_free(PAR, 10.0, 2.0, g)
    tr = simulate(x0, PAR, g, BC, [], 0.0, 0.0025)
    assert len(tr) == 1
    assert np.array_equal(tr.flows[0], x0.flows)


def test_leak_free_run_is_constant():
    g = pilot_grid()
    x0 = steady_state_leak_free(PAR, 10.0, 2.0, g)
    tr = simulate(x0, PAR, g, BC, [], 20.0, 0.0025, sample_every=40)
    assert np.max(np.abs(tr.flows - x0.flows)) < 1e-9
    assert np.max(np.abs(tr.heads - x0.heads)) < 1e-9


@pytest.fixture(scope="module")
def leak_run():
    g = pilot_grid()
    x0 = steady_state_leak_free(PAR, 10.0, 2.0, g)
    lk = LeakSpec(118.365, sigma_for_flow_loss(PAR, 10.0, 2.0, 118.365, 0.05), 20.0, 5.0)
    return g, lk, simulate(x0, PAR, g, BC, [lk], 400.0, 0.0025, sample_every=4)


def test_leak_direction(leak_run):
    _, _, tr = leak_run
    before = tr.t < 20.0
    after = tr.t > 300.0
    assert tr.q_in[after].mean() > tr.q_in[before].mean()
    assert tr.q_out[after].mean() < tr.q_out[before].mean()


def test_leak_run_reaches_leak_steady_state(leak_run):
    g, lk, tr = leak_run
    oracle = steady_state_with_leak(PAR, 10.0, 2.0, lk, g)
    assert np.max(np.abs(tr.flows[-1] - oracle.flows)) < 1e-9
    assert np.max(np.abs(tr.heads[-1] - oracle.heads)) < 1e-8


def test_leak_onset_snapped_to_grid():
    g = Grid((100.08, 100.08))
    x0 = steady_state_leak_free(PAR, 10.0, 2.0, g)
    lk = LeakSpec(100.08, 1e-5, onset_time=0.0151)
    tr = simulate(x0, PAR, g, BC, [lk], 0.05, 0.01)
    # onset snaps to 0.02: flows are untouched through t = 0.02
    assert np.allclose(tr.flows[:3], x0.flows, atol=1e-15)
    assert not np.allclose(tr.flows[3], x0.flows, atol=1e-15)


def test_sudden_large_leak_aborts_with_time():
    g = pilot_grid()
    x0 = steady_state_leak_free(PAR, 10.0, 2.0, g)
    lk = LeakSpec(118.365, 5e-3, onset_time=1.0)
    with pytest.raises(SimulationError) as exc:
        simulate(x0, PAR, g, BC, [lk], 10.0, 0.0025)
    assert exc.value.t >= 1.0


def test_multiple_leaks_sum_at_nodes():
    g = pilot_grid()
    leaks = [LeakSpec(49.825, 1e-4), LeakSpec(148.925, 2e-4), LeakSpec(148.925, 1e-4)]
    sig = node_sigmas(g, leaks)
    assert sig[1] == 1e-4 and sig[4] == pytest.approx(3e-4)
    assert np.count_nonzero(sig) == 2


def test_step_boundary_transient_rk4_order():
    g = Grid.uniform(PAR.length, 3)
    x0 = steady_state_leak_free(PAR, 10.0, 2.0, g)
    bc = BoundaryHeads(StepHead(10.0, 12.0, 0.0), ConstantHead(2.0))

    def end(dt):
        tr = simulate(x0, PAR, g, bc, [], 2.0, dt)
        return np.concatenate([tr.flows[-1], tr.heads[-1]])

    ref = end(0.00125)
    e1, e2, e3 = (np.max(np.abs(end(dt) - ref)) for dt in (0.02, 0.01, 0.005))
    assert math.log2(e1 / e2) >= 3.7
    assert math.log2(e2 / e3) >= 3.7


def test_mass_bookkeeping_short_window(leak_run):
    g, lk, tr = leak_run
    # coarse 10 ms log: only the steady tail is resolvable by the trapezoid
    sel = tr.t >= 200.0
    t, Q, H = tr.t[sel], tr.flows[sel], tr.heads[sel]
    sig = node_sigmas(g, [lk], t[0])
    for i in range(g.n_sections - 1):
        f = Q[:, i] - Q[:, i + 1] - sig[i] * np.sqrt(H[:, i + 1])
        lhs = H[-1, i + 1] - H[0, i + 1]
        assert lhs == pytest.approx(PAR.a2 / g.dz[i] * trapezoid(f, t), abs=1e-9)
