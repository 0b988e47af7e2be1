import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from pipefdi import (DiagnosisVerdict, LeakSpec, MeasurementSample, ObserverConfig,
                     dispatch_observer, pilot_pipeline, steady_state_with_leak)
from pipefdi.errors import ObserverDivergenceError, UsageError, ValidationError
from pipefdi.hydraulics import steady_flow
from pipefdi.observers import (FlowOffsetObserverState, LeakObserverState,
                               PressureFaultObserverState, flow_offset_observer_step,
                               leak_observer_step, pressure_fault_observer_step,
                               seed_flow_observer, seed_leak_observer, seed_pressure_observer)

PAR = pilot_pipeline()
QN = steady_flow(PAR, 10.0, 2.0)
DT = 0.01
LEAK = LeakSpec(118.365, 3.349e-4)
LEAK_SS = steady_state_with_leak(PAR, 10.0, 2.0, LEAK)


def leak_sample(t):
    return MeasurementSample(t, LEAK_SS.q_in, LEAK_SS.q_out, 10.0, 2.0)


def drive(obs, sample_at, seconds):
    rows = []
    for k in range(1, int(round(seconds / DT)) + 1):
        rows.append(obs.update(sample_at(obs.t + DT)))
    return rows


def rise_time(series, start, target):
    """10-90 % rise time of ``series`` (sampled every DT) from ``start`` to ``target``."""
    frac = (np.asarray(series) - start) / (target - start)
    t10 = np.argmax(frac >= 0.1) * DT
    t90 = np.argmax(frac >= 0.9) * DT
    return t90 - t10


# --- configuration --------------------------------------------------------

def test_config_checks():
    with pytest.raises(ValidationError):
        ObserverConfig(lam=0.0)
    with pytest.raises(ValidationError):
        ObserverConfig(dz1=250.0).split(PAR)
    dz1, dz2 = ObserverConfig(dz1=40.0).split(PAR)
    assert dz1 + dz2 == pytest.approx(PAR.length)


def test_step_needs_dt():
    st_ = FlowOffsetObserverState(QN, 0.0)
    with pytest.raises(UsageError):
        flow_offset_observer_step(st_, MeasurementSample(0, QN, QN, 10, 2), PAR, ObserverConfig())


# --- correction-free fixed points ----------------------------------------

@settings(max_examples=30, deadline=None)
@given(st.floats(20.0, 180.0), st.floats(0.0, 5e-4))
def test_leak_observer_parameters_fixed_at_zero_error(dz1, sigma):
    x = LeakObserverState(QN, 6.0, QN, dz1, sigma)
    s = MeasurementSample(0.0, QN, QN, 10.0, 2.0)
    y = leak_observer_step(x, s, PAR, ObserverConfig(), dt=1e-6)
    # outputs agree to first order, so the parameter rows barely move
    assert abs(y.dz1 - dz1) < 1e-6 * PAR.length
    assert abs(y.sigma - sigma) < 1e-9


@given(st.floats(-5e-3, 5e-3))
def test_flow_observer_fixed_point(delta):
    s = MeasurementSample(0.0, QN + delta, QN, 10.0, 2.0)
    x = FlowOffsetObserverState(QN + delta, delta)
    y = flow_offset_observer_step(x, s, PAR, ObserverConfig(lam=2), dt=DT)
    assert y.delta_q == pytest.approx(delta, abs=1e-15)
    assert y.q == pytest.approx(QN + delta, rel=1e-12)


@pytest.mark.parametrize("variant", ["upstream", "downstream"])
def test_pressure_observer_fixed_point(variant):
    d = 1.6e-3
    h = (10.0 + d, 2.0) if variant == "upstream" else (10.0, 2.0 + d)
    s = MeasurementSample(0.0, QN, QN, *h)
    x = PressureFaultObserverState(QN, 6.0, QN, d)
    y = pressure_fault_observer_step(x, s, PAR, ObserverConfig(), variant, dt=DT)
    assert y.delta_h == pytest.approx(d, abs=1e-12)
    assert y.h_f == pytest.approx(6.0, abs=1e-9)


# --- convergence ----------------------------------------------------------

def test_leak_observer_converges_to_oracle():
    obs = seed_leak_observer(PAR, leak_sample(0.0), ObserverConfig(lam=1.0))
    assert obs.state.dz1 == PAR.length / 2 and obs.state.sigma == 0.0
    rows = drive(obs, leak_sample, 300.0)
    est = rows[-1]
    assert abs(est["position"] - LEAK.position) < 0.005 * PAR.length
    assert est["sigma"] == pytest.approx(LEAK.sigma, rel=0.01)
    assert est["h_f"] == pytest.approx(LEAK_SS.heads[1], rel=1e-3)
    assert obs.clamp_hits == 0
    # output error envelope shrinks after the initial transient
    err = np.abs([r["q_in"] - LEAK_SS.q_in for r in rows])
    blocks = err[1000:].reshape(-1, 2900).max(axis=1)
    assert np.all(np.diff(blocks) <= 1e-15)


def test_leak_rise_time_decreases_with_lambda():
    times = []
    for lam in (1.0, 2.0, 4.0):
        obs = seed_leak_observer(PAR, leak_sample(0.0), ObserverConfig(lam=lam))
        pos = [r["position"] for r in drive(obs, leak_sample, 200.0)]
        times.append(rise_time(pos, PAR.length / 2, LEAK.position))
    assert times[0] >= times[1] >= times[2]


@pytest.mark.parametrize("variant,channel", [("upstream", "q_in"), ("downstream", "q_out")])
@pytest.mark.parametrize("percent", [11.11, 22.22])
def test_flow_offset_converges(variant, channel, percent):
    d = percent / 100 * QN
    kw = {"q_in": QN, "q_out": QN, channel: QN + d}
    at = lambda t: MeasurementSample(t, h_in=10.0, h_out=2.0, **kw)  # noqa: E731
    obs = seed_flow_observer(PAR, at(0.0), ObserverConfig(lam=2.0), variant)
    est = drive(obs, at, 60.0)[-1]
    assert est["delta_q"] == pytest.approx(d, rel=0.02)
    assert obs.clamp_hits == 0


def test_flow_offset_variants_mirror():
    d = 0.1111 * QN
    ests = []
    for variant, kw in (("upstream", dict(q_in=QN + d, q_out=QN)),
                        ("downstream", dict(q_in=QN, q_out=QN + d))):
        at = lambda t, kw=kw: MeasurementSample(t, h_in=10.0, h_out=2.0, **kw)  # noqa: E731
        obs = seed_flow_observer(PAR, at(0.0), ObserverConfig(lam=2.0), variant)
        ests.append([r["delta_q"] for r in drive(obs, at, 20.0)])
    assert np.allclose(ests[0], ests[1], rtol=0, atol=1e-15)


@pytest.mark.parametrize("variant", ["upstream", "downstream"])
@pytest.mark.parametrize("seed_error", [0.0, 0.3])
def test_pressure_fault_converges(variant, seed_error):
    d = 1.6e-3
    h = (10.0 + d, 2.0) if variant == "upstream" else (10.0, 2.0 + d)
    at = lambda t: MeasurementSample(t, QN, QN, *h)  # noqa: E731
    obs = seed_pressure_observer(PAR, at(0.0), ObserverConfig(lam=1.0), variant)
    s = obs.state
    obs.state = PressureFaultObserverState(s.q_in * (1 + seed_error), s.h_f + 2 * seed_error,
                                           s.q_out * (1 - seed_error), 0.0)
    est = drive(obs, at, 120.0)[-1]
    assert est["delta_h"] == pytest.approx(d, rel=0.10)
    assert obs.clamp_hits == 0


def test_zero_fault_estimates_stay_at_zero():
    nominal = lambda t: MeasurementSample(t, QN, QN, 10.0, 2.0)  # noqa: E731
    flow = seed_flow_observer(PAR, nominal(0.0), ObserverConfig(lam=2.0), "upstream")
    assert max(abs(r["delta_q"]) for r in drive(flow, nominal, 30.0)) < 1e-12
    pres = seed_pressure_observer(PAR, nominal(0.0), ObserverConfig(lam=1.0), "downstream")
    assert max(abs(r["delta_h"]) for r in drive(pres, nominal, 30.0)) < 1e-9
    leak = seed_leak_observer(PAR, nominal(0.0), ObserverConfig(lam=1.0))
    assert max(r["sigma"] for r in drive(leak, nominal, 30.0)) < 1e-9


def test_leak_state_respects_clamps():
    obs = seed_leak_observer(PAR, leak_sample(0.0), ObserverConfig(lam=1.0))
    for r in drive(obs, leak_sample, 50.0):
        assert r["h_f"] >= 0.01
        assert 0.01 * PAR.length <= r["position"] <= 0.99 * PAR.length
        assert r["sigma"] >= 0.0


def test_divergence_carries_last_state():
    x = FlowOffsetObserverState(QN, 0.0)
    bad = MeasurementSample(0.0, float("inf"), QN, 10.0, 2.0)
    with pytest.raises(ObserverDivergenceError) as exc:
        flow_offset_observer_step(x, bad, PAR, ObserverConfig(), dt=DT)
    assert exc.value.last_state is x


# --- dispatch -------------------------------------------------------------

def _isolated(kind):
    return DiagnosisVerdict("isolated", kind, detection_time=1.0, isolation_time=2.0)


@pytest.mark.parametrize("kind,cls,variant", [
    ("E1", "FlowOffsetObserver", "upstream"),
    ("E2", "FlowOffsetObserver", "downstream"),
    ("E3", "PressureFaultObserver", "upstream"),
    ("E4", "PressureFaultObserver", "downstream"),
    ("E5", "LeakObserver", None),
])
def test_dispatch_examples(kind, cls, variant):
    s = MeasurementSample(2.0, QN, QN, 10.0, 2.0)
    obs = dispatch_observer(_isolated(kind), PAR, s, ObserverConfig())
    assert type(obs).__name__ == cls
    assert getattr(obs, "variant", None) == variant
    assert obs.t == 2.0
    if kind == "E5":
        assert obs.state.dz1 == PAR.length / 2 and obs.state.sigma == 0.0
    elif kind in ("E1", "E2"):
        assert obs.state.delta_q == 0.0
    else:
        assert obs.state.delta_h == 0.0


def test_dispatch_needs_isolation():
    s = MeasurementSample(2.0, QN, QN, 10.0, 2.0)
    with pytest.raises(UsageError):
        dispatch_observer(DiagnosisVerdict("detected", None, detection_time=1.0), PAR, s,
                          ObserverConfig())
