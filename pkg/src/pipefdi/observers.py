"""High-gain observers that reconstruct an isolated fault.

Three families, each driven by the end measurements of one sample:

* leak: ``[Q_in, H_f, Q_out, dz1, sigma]`` on a two-section model split at
  the leak, outputs ``Q_in`` and ``Q_out``;
* flow offset: ``[Q~, dQ]`` on a one-section model, output the faulty
  flowmeter only;
* pressure fault: ``[Q_in, H_f, Q_out, dH]`` on a two-section model, outputs
  ``Q_in`` and ``Q_out``.

Gains are the inverse observability Jacobian applied to the binomial
high-gain coefficients (``2 lambda, lambda^2`` per output chain of length two,
``3 lambda, 3 lambda^2, lambda^3`` for length three), evaluated on the
current estimate.  Friction always opposes the flow (``-mu Q|Q|``), which
fixes the sign of every friction-slope term in the gains.
"""

from __future__ import annotations

import logging
import math
from dataclasses import dataclass

from .errors import ObserverDivergenceError, UsageError, ValidationError
from .hydraulics import PipelineParams

log = logging.getLogger(__name__)


@dataclass(frozen=True)
class ObserverConfig:
    """Tuning and safety clamps shared by the observer families.

    ``dz1`` is the section split of the pressure observers (``L/2`` when
    ``None``).  ``dt`` is the integration step; ``None`` integrates over the
    interval between consecutive samples.
    """

    lam: float = 1.0
    dz1: float | None = None
    eps_h: float = 0.01
    eps_z_fraction: float = 0.01
    eps_q: float = 1e-4
    eps_drop: float = 0.5
    dt: float | None = None

    def __post_init__(self):
        if not self.lam > 0:
            raise ValidationError("lambda must be positive", field="lam")
        if self.eps_h <= 0 or self.eps_q <= 0 or not 0 < self.eps_z_fraction < 0.5:
            raise ValidationError("observer clamps must be positive", field="eps")

    def split(self, params: PipelineParams) -> tuple:
        dz1 = 0.5 * params.length if self.dz1 is None else float(self.dz1)
        if not 0 < dz1 < params.length:
            raise ValidationError("observer split must lie in (0, L)", field="dz1")
        return dz1, params.length - dz1


def _rk4(f, x, dt):
    k1 = f(x)
    k2 = f([a + 0.5 * dt * b for a, b in zip(x, k1)])
    k3 = f([a + 0.5 * dt * b for a, b in zip(x, k2)])
    k4 = f([a + dt * b for a, b in zip(x, k3)])
    return [a + dt / 6.0 * (b + 2.0 * c + 2.0 * d + e) for a, b, c, d, e in zip(x, k1, k2, k3, k4)]


def _finite(x):
    return all(math.isfinite(v) for v in x)


def _step_size(cfg, dt):
    dt = cfg.dt if dt is None else dt
    if dt is None or not dt > 0:
        raise UsageError("observer step needs a positive dt (cfg.dt or explicit)")
    return dt


# ---------------------------------------------------------------------------
# Leak observer
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class LeakObserverState:
    q_in: float
    h_f: float
    q_out: float
    dz1: float
    sigma: float
    clamp_hits: int = 0

    def vector(self):
        return [self.q_in, self.h_f, self.q_out, self.dz1, self.sigma]


def leak_gain(x, h_in, params, lam, eps_h, eps_z, eps_drop=0.5):
    """Gain rows for ``[Q_in, H_f, Q_out, dz1, sigma]`` against ``(e_in, e_out)``.

    The position is observed through the upstream chain (``Q_in`` and its
    derivative), ``H_f`` and ``sigma`` through the three-long downstream
    chain; friction slopes are neglected as in the reduced design.
    """
    _, hf, _, dz1, sig = x
    L, a1, a2 = params.length, params.a1, params.a2
    hf = max(hf, eps_h)
    dz1 = min(max(dz1, eps_z), L - eps_z)
    dz2 = L - dz1
    # the position is unobservable where the upstream head drop vanishes;
    # a regularized inverse keeps that gain bounded across the crossing
    drop = h_in - hf
    sq = math.sqrt(hf)
    k_dz1 = -lam**2 * dz1**2 * drop / (a1 * (drop**2 + eps_drop**2))
    k_hf = 3.0 * lam**2 * dz2 / a1
    gamma = (-3.0 * lam / sq
             - 3.0 * lam**2 * sig * dz2 / (2.0 * a1 * hf)
             - lam**3 * dz1 * dz2 / (a1 * a2 * sq))
    return ((2.0 * lam, 0.0), (0.0, k_hf), (0.0, 3.0 * lam), (k_dz1, 0.0), (0.0, gamma))


def leak_observer_step(state: LeakObserverState, sample, params: PipelineParams,
                       cfg: ObserverConfig, dt: float | None = None) -> LeakObserverState:
    """Advance the leak observer by one step using ``sample``'s measurements."""
    dt = _step_size(cfg, dt)
    L, a1, a2, mu = params.length, params.a1, params.a2, params.mu
    eps_h, eps_z = cfg.eps_h, cfg.eps_z_fraction * L
    h_in, h_out, y_in, y_out = sample.h_in, sample.h_out, sample.q_in, sample.q_out

    def f(x):
        qi, hf, qo, dz1, sig = x
        hfc = max(hf, eps_h)
        dz1c = min(max(dz1, eps_z), L - eps_z)
        e1, e2 = qi - y_in, qo - y_out
        k = leak_gain(x, h_in, params, cfg.lam, eps_h, eps_z, cfg.eps_drop)
        model = (
            -mu * qi * abs(qi) + a1 / dz1c * (h_in - hf),
            a2 / dz1c * (qi - qo - sig * math.sqrt(hfc)),
            -mu * qo * abs(qo) + a1 / (L - dz1c) * (hf - h_out),
            0.0,
            0.0,
        )
        return [m - kr[0] * e1 - kr[1] * e2 for m, kr in zip(model, k)]

    x = _rk4(f, state.vector(), dt)
    if not _finite(x):
        raise ObserverDivergenceError("leak observer diverged", last_state=state, t=sample.t)
    qi, hf, qo, dz1, sig = x
    hits = state.clamp_hits
    if hf < eps_h:
        hf, hits = eps_h, hits + 1
    if not eps_z <= dz1 <= L - eps_z:
        dz1, hits = min(max(dz1, eps_z), L - eps_z), hits + 1
    if sig < 0:
        sig, hits = 0.0, hits + 1
    return LeakObserverState(qi, hf, qo, dz1, sig, hits)


# ---------------------------------------------------------------------------
# Flowmeter offset observers
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class FlowOffsetObserverState:
    q: float
    delta_q: float
    clamp_hits: int = 0


def flow_offset_gain(q, delta, y, params, lam, eps_q):
    """Gain ``(k_q, k_delta)`` of the one-section offset observer.

    ``gamma`` is the slope of the friction term with respect to the offset;
    for a forward true flow it reduces to ``2 mu (q - delta)``.
    """
    mu = params.mu
    true_q = q - delta
    if true_q >= eps_q:
        gamma = 2.0 * mu * true_q
    else:
        s = 1.0 if true_q >= 0 else -1.0
        gamma = mu * abs(true_q) + mu * (y - delta) * s
        if abs(gamma) < 2.0 * mu * eps_q:
            gamma = 2.0 * mu * eps_q
    return 2.0 * lam, 2.0 * lam + lam**2 / gamma


def flow_offset_observer_step(state: FlowOffsetObserverState, sample, params: PipelineParams,
                              cfg: ObserverConfig, variant: str = "upstream",
                              dt: float | None = None) -> FlowOffsetObserverState:
    """Advance the offset observer of the upstream or downstream flowmeter."""
    if variant not in ("upstream", "downstream"):
        raise ValidationError(f"unknown variant {variant!r}", field="variant")
    dt = _step_size(cfg, dt)
    mu, a1, L = params.mu, params.a1, params.length
    y = sample.q_in if variant == "upstream" else sample.q_out
    drive = a1 / L * (sample.h_in - sample.h_out)
    hits = state.clamp_hits
    if state.q - state.delta_q < cfg.eps_q:
        hits += 1

    def f(x):
        q, d = x
        tq = q - d
        kq, kd = flow_offset_gain(q, d, y, params, cfg.lam, cfg.eps_q)
        e = q - y
        return [-mu * tq * abs(tq) + drive - kq * e, -kd * e]

    x = _rk4(f, [state.q, state.delta_q], dt)
    if not _finite(x):
        raise ObserverDivergenceError("flow offset observer diverged", last_state=state, t=sample.t)
    return FlowOffsetObserverState(x[0], x[1], hits)


# ---------------------------------------------------------------------------
# Pressure-system fault observers
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class PressureFaultObserverState:
    q_in: float
    h_f: float
    q_out: float
    delta_h: float
    clamp_hits: int = 0

    def vector(self):
        return [self.q_in, self.h_f, self.q_out, self.delta_h]


def pressure_gain(q_in, q_out, params, dz1, dz2, lam, variant):
    """Gain rows for ``[Q_in, H_f, Q_out, dH]`` against ``(e_in, e_out)``."""
    a1, mu = params.a1, params.mu
    up = dz1 * (lam**2 + 4.0 * mu * abs(q_in) * lam) / a1
    down = dz2 * (lam**2 + 4.0 * mu * abs(q_out) * lam) / a1
    if variant == "upstream":
        return ((2.0 * lam, 0.0), (0.0, down), (0.0, 2.0 * lam), (-up, -down))
    return ((2.0 * lam, 0.0), (-up, 0.0), (0.0, 2.0 * lam), (up, down))


def pressure_fault_observer_step(state: PressureFaultObserverState, sample, params: PipelineParams,
                                 cfg: ObserverConfig, variant: str = "upstream",
                                 dt: float | None = None) -> PressureFaultObserverState:
    """Advance the upstream (pumping) or downstream (storage) fault observer."""
    if variant not in ("upstream", "downstream"):
        raise ValidationError(f"unknown variant {variant!r}", field="variant")
    dt = _step_size(cfg, dt)
    dz1, dz2 = cfg.split(params)
    mu, a1, a2 = params.mu, params.a1, params.a2
    h_in, h_out, y_in, y_out = sample.h_in, sample.h_out, sample.q_in, sample.q_out
    up = variant == "upstream"
    hits = state.clamp_hits
    if state.q_in <= 0 or state.q_out <= 0:
        # the reduced gain assumes forward flow
        log.warning("pressure observer: non-positive flow estimate at t=%.6g s", sample.t)
        hits += 1

    def f(x):
        qi, hf, qo, d = x
        k = pressure_gain(max(abs(qi), cfg.eps_q), max(abs(qo), cfg.eps_q),
                          params, dz1, dz2, cfg.lam, variant)
        e1, e2 = qi - y_in, qo - y_out
        model = (
            -mu * qi * abs(qi) + a1 / dz1 * (h_in - (d if up else 0.0) - hf),
            a2 / dz1 * (qi - qo),
            -mu * qo * abs(qo) + a1 / dz2 * (hf - h_out + (0.0 if up else d)),
            0.0,
        )
        return [m - kr[0] * e1 - kr[1] * e2 for m, kr in zip(model, k)]

    x = _rk4(f, state.vector(), dt)
    if not _finite(x):
        raise ObserverDivergenceError("pressure observer diverged", last_state=state, t=sample.t)
    return PressureFaultObserverState(*x, clamp_hits=hits)


# ---------------------------------------------------------------------------
# Stateful wrappers and dispatch
# ---------------------------------------------------------------------------

class Observer:
    """Sample-synchronous wrapper keeping the state of one observer family."""

    kind = ""
    estimate_names: tuple = ()

    def __init__(self, params: PipelineParams, cfg: ObserverConfig, state, t0: float):
        self.params = params
        self.cfg = cfg
        self.state = state
        self.t = t0

    def _advance(self, sample, dt):
        raise NotImplementedError

    def update(self, sample):
        """Integrate up to ``sample.t`` and return the current estimates."""
        dt = sample.t - self.t
        if dt > 0:
            if self.cfg.dt is None:
                self.state = self._advance(sample, dt)
            else:
                n = max(1, int(round(dt / self.cfg.dt)))
                for _ in range(n):
                    self.state = self._advance(sample, dt / n)
            self.t = sample.t
        return self.estimates()

    @property
    def clamp_hits(self) -> int:
        return self.state.clamp_hits

    def estimates(self) -> dict:
        return {name: getattr(self.state, attr) for name, attr in self.estimate_names}


class LeakObserver(Observer):
    kind = "leak"
    estimate_names = (("position", "dz1"), ("sigma", "sigma"), ("h_f", "h_f"),
                      ("q_in", "q_in"), ("q_out", "q_out"))

    def _advance(self, sample, dt):
        return leak_observer_step(self.state, sample, self.params, self.cfg, dt)


class FlowOffsetObserver(Observer):
    estimate_names = (("delta_q", "delta_q"), ("q", "q"))

    def __init__(self, params, cfg, state, t0, variant):
        super().__init__(params, cfg, state, t0)
        self.variant = variant
        self.kind = f"flow_offset_{variant}"

    def _advance(self, sample, dt):
        return flow_offset_observer_step(self.state, sample, self.params, self.cfg,
                                         self.variant, dt)


class PressureFaultObserver(Observer):
    estimate_names = (("delta_h", "delta_h"), ("h_f", "h_f"), ("q_in", "q_in"),
                      ("q_out", "q_out"))

    def __init__(self, params, cfg, state, t0, variant):
        super().__init__(params, cfg, state, t0)
        self.variant = variant
        self.kind = f"pressure_{variant}"

    def _advance(self, sample, dt):
        return pressure_fault_observer_step(self.state, sample, self.params, self.cfg,
                                            self.variant, dt)


def seed_leak_observer(params, sample, cfg, t0=None, dz1=None, sigma=0.0):
    """Leak observer started from a sample: position at mid-pipe, no leak."""
    dz1 = 0.5 * params.length if dz1 is None else dz1
    hf = sample.h_in - (sample.h_in - sample.h_out) * dz1 / params.length
    state = LeakObserverState(sample.q_in, max(hf, cfg.eps_h), sample.q_out, dz1, sigma)
    return LeakObserver(params, cfg, state, sample.t if t0 is None else t0)


def seed_flow_observer(params, sample, cfg, variant, t0=None, delta=0.0):
    q = sample.q_in if variant == "upstream" else sample.q_out
    state = FlowOffsetObserverState(q, delta)
    return FlowOffsetObserver(params, cfg, state, sample.t if t0 is None else t0, variant)


def seed_pressure_observer(params, sample, cfg, variant, t0=None, delta=0.0):
    dz1, _ = cfg.split(params)
    hf = sample.h_in - (sample.h_in - sample.h_out) * dz1 / params.length
    state = PressureFaultObserverState(sample.q_in, hf, sample.q_out, delta)
    return PressureFaultObserver(params, cfg, state, sample.t if t0 is None else t0, variant)


DISPATCH = {
    "E1": ("flow", "upstream"),
    "E2": ("flow", "downstream"),
    "E3": ("pressure", "upstream"),
    "E4": ("pressure", "downstream"),
    "E5": ("leak", None),
}


def dispatch_observer(verdict, params: PipelineParams, sample, configs) -> Observer:
    """Observer matching an isolated verdict, seeded from ``sample``.

    ``configs`` maps ``"leak"``, ``"flow"`` and ``"pressure"`` to an
    :class:`ObserverConfig` (a single config is used for all families).
    """
    scenario = getattr(verdict, "scenario", None)
    if getattr(verdict, "status", None) != "isolated" or scenario not in DISPATCH:
        raise UsageError(f"observer dispatch needs an isolated verdict, got {verdict!r}")
    family, variant = DISPATCH[scenario]
    cfg = configs if isinstance(configs, ObserverConfig) else configs[family]
    if family == "leak":
        return seed_leak_observer(params, sample, cfg)
    if family == "flow":
        return seed_flow_observer(params, sample, cfg, variant)
    return seed_pressure_observer(params, sample, cfg, variant)
