"""Lumped water-hammer model of a horizontal pipeline.

The pipe is cut into ``n`` sections.  Each section carries one flow ``Q_i``
and the nodes between sections carry the heads ``H_2 .. H_n``; the end heads
``H_1`` and ``H_{n+1}`` are boundary inputs.  Per section::

    dQ_i/dt     = a1/dz_i (H_i - H_{i+1}) - mu Q_i |Q_i|
    dH_{i+1}/dt = a2/dz_i (Q_i - Q_{i+1} - sigma_i sqrt(H_{i+1}))

with ``sigma_i`` non-zero only at nodes hosting a leak.  Friction always
opposes the flow.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Callable, Iterable, Sequence

import numpy as np
from scipy.optimize import brentq

from .errors import (
    ConfigurationError,
    HeadDomainError,
    InfeasibleConfigurationError,
    SimulationError,
    ValidationError,
)

GRAVITY = 9.81

# Valve positions of the 200 m pilot pipeline, measured from upstream [m].
PILOT_VALVES = (11.535, 49.825, 80.355, 118.365, 148.925, 186.945)


# ---------------------------------------------------------------------------
# Parameters and grids
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class PipelineParams:
    """Geometry and fluid constants plus the coefficients of the lumped model.

    ``area``, ``a1``, ``a2`` and ``mu`` are derived on construction and cannot
    be passed in.
    """

    length: float
    diameter: float
    wave_speed: float
    friction: float
    gravity: float = GRAVITY
    area: float = field(init=False)
    a1: float = field(init=False)
    a2: float = field(init=False)
    mu: float = field(init=False)

    def __post_init__(self):
        for name in ("length", "diameter", "wave_speed", "gravity"):
            value = getattr(self, name)
            if not (math.isfinite(value) and value > 0):
                raise ValidationError(f"{name} must be positive, got {value!r}", field=name)
        # f == 0 is accepted as the frictionless limit
        if not (math.isfinite(self.friction) and self.friction >= 0):
            raise ValidationError(
                f"friction must be non-negative, got {self.friction!r}", field="friction"
            )
        area = math.pi * self.diameter**2 / 4.0
        object.__setattr__(self, "area", area)
        object.__setattr__(self, "a1", self.gravity * area)
        object.__setattr__(self, "a2", self.wave_speed**2 / (self.gravity * area))
        object.__setattr__(self, "mu", self.friction / (2.0 * self.diameter * area))

    def to_dict(self) -> dict:
        return {
            "length": self.length,
            "diameter": self.diameter,
            "wave_speed": self.wave_speed,
            "friction": self.friction,
            "gravity": self.gravity,
        }


def derive_coefficients(length, diameter, wave_speed, friction, gravity=GRAVITY) -> PipelineParams:
    """Build a :class:`PipelineParams` from raw geometry, filling ``a1, a2, mu``."""
    return PipelineParams(float(length), float(diameter), float(wave_speed),
                          float(friction), float(gravity))


def pilot_pipeline() -> PipelineParams:
    """The 200.16 m pilot pipeline used throughout the tests and demos."""
    return derive_coefficients(length=200.16, diameter=0.1047, wave_speed=1497.0,
                               friction=2.785e-2)


@dataclass(frozen=True)
class Grid:
    """Section lengths ``dz_1 .. dz_n`` of a spatial discretization."""

    section_lengths: tuple

    def __post_init__(self):
        dz = tuple(float(x) for x in self.section_lengths)
        if len(dz) < 1:
            raise ValidationError("a grid needs at least one section", field="section_lengths")
        if any(not (math.isfinite(x) and x > 0) for x in dz):
            raise ValidationError("section lengths must be positive", field="section_lengths")
        object.__setattr__(self, "section_lengths", dz)

    @classmethod
    def uniform(cls, length: float, n_sections: int) -> "Grid":
        if n_sections < 1:
            raise ValidationError("n_sections must be >= 1", field="n_sections")
        return cls((length / n_sections,) * n_sections)

    @classmethod
    def from_nodes(cls, length: float, nodes: Iterable[float], max_section: float | None = None) -> "Grid":
        """Grid whose interior nodes include ``nodes``.

        Sections longer than ``max_section`` are split evenly.
        """
        pts = sorted(set(float(z) for z in nodes))
        if any(not (0.0 < z < length) for z in pts):
            raise ValidationError("interior nodes must lie strictly inside (0, L)", field="nodes")
        edges = [0.0, *pts, float(length)]
        dz = []
        for a, b in zip(edges[:-1], edges[1:]):
            span = b - a
            pieces = 1 if max_section is None else max(1, math.ceil(span / max_section - 1e-12))
            dz.extend([span / pieces] * pieces)
        return cls(tuple(dz))

    @property
    def n_sections(self) -> int:
        return len(self.section_lengths)

    @property
    def length(self) -> float:
        return math.fsum(self.section_lengths)

    @property
    def dz(self) -> np.ndarray:
        return np.asarray(self.section_lengths)

    def node_positions(self) -> np.ndarray:
        """Positions of all ``n + 1`` head nodes, from 0 to L."""
        return np.concatenate(([0.0], np.cumsum(self.section_lengths)))

    def nearest_interior_node(self, position: float) -> int:
        """Index into the head vector of the interior node nearest ``position``."""
        if self.n_sections < 2:
            raise ValidationError("a single-section grid has no interior node for a leak",
                                  field="position")
        z = self.node_positions()[1:-1]
        return 1 + int(np.argmin(np.abs(z - position)))

    def check_length(self, params: PipelineParams, rtol: float = 1e-9) -> None:
        if abs(self.length - params.length) > rtol * params.length:
            raise ValidationError(
                f"grid length {self.length} does not match pipeline length {params.length}",
                field="section_lengths",
            )


def pilot_grid(length: float = 200.16, max_section: float | None = None) -> Grid:
    """Grid with a node at every pilot-plant valve."""
    return Grid.from_nodes(length, PILOT_VALVES, max_section=max_section)


# ---------------------------------------------------------------------------
# States, leaks and boundary inputs
# ---------------------------------------------------------------------------

@dataclass
class FluidState:
    """Section flows ``Q_1..Q_n`` and node heads ``H_1..H_{n+1}``."""

    flows: np.ndarray
    heads: np.ndarray

    def __post_init__(self):
        self.flows = np.asarray(self.flows, dtype=float)
        self.heads = np.asarray(self.heads, dtype=float)
        if self.flows.ndim != 1 or self.heads.shape != (self.flows.size + 1,):
            raise ValidationError(
                f"need n flows and n+1 heads, got {self.flows.shape} and {self.heads.shape}",
                field="heads",
            )

    @property
    def q_in(self) -> float:
        return float(self.flows[0])

    @property
    def q_out(self) -> float:
        return float(self.flows[-1])

    @property
    def h_in(self) -> float:
        return float(self.heads[0])

    @property
    def h_out(self) -> float:
        return float(self.heads[-1])

    def copy(self) -> "FluidState":
        return FluidState(self.flows.copy(), self.heads.copy())


@dataclass(frozen=True)
class LeakSpec:
    """A leak ``Q_f = sigma sqrt(H)`` at ``position`` opening at ``onset_time``.

    With ``opening_time > 0`` the coefficient rises from zero to ``sigma``
    over that many seconds along a raised cosine (a valve being opened, with
    zero slope at both ends); this keeps the opening surge from driving the
    leak node to negative head.
    """

    position: float
    sigma: float
    onset_time: float = 0.0
    opening_time: float = 0.0

    def __post_init__(self):
        if not (math.isfinite(self.sigma) and self.sigma >= 0):
            raise ValidationError("leak sigma must be >= 0", field="sigma")
        if not (math.isfinite(self.position) and self.position > 0):
            raise ValidationError("leak position must be positive", field="position")
        if not (math.isfinite(self.opening_time) and self.opening_time >= 0):
            raise ValidationError("opening_time must be >= 0", field="opening_time")

    def active(self, t: float) -> bool:
        return t >= self.onset_time

    def sigma_at(self, t: float) -> float:
        """Effective coefficient at time ``t``."""
        if t < self.onset_time:
            return 0.0
        if self.opening_time > 0 and t < self.onset_time + self.opening_time:
            s = (t - self.onset_time) / self.opening_time
            return self.sigma * 0.5 * (1.0 - math.cos(math.pi * s))
        return self.sigma


class ConstantHead:
    def __init__(self, value: float):
        self.value = float(value)

    def __call__(self, t: float) -> float:
        return self.value

    def change_times(self) -> list:
        return []

    def to_dict(self) -> dict:
        return {"kind": "constant", "value": self.value}


class StepHead:
    """``before`` until ``t_step``, ``after`` from then on."""

    def __init__(self, before: float, after: float, t_step: float):
        self.before, self.after, self.t_step = float(before), float(after), float(t_step)

    def __call__(self, t: float) -> float:
        return self.after if t >= self.t_step else self.before

    def change_times(self) -> list:
        return [self.t_step]

    def to_dict(self) -> dict:
        return {"kind": "step", "before": self.before, "after": self.after, "t_step": self.t_step}


class SampledHead:
    """Piecewise-linear interpolation of a recorded head series."""

    def __init__(self, times: Sequence[float], values: Sequence[float]):
        self.times = np.asarray(times, dtype=float)
        self.values = np.asarray(values, dtype=float)
        if self.times.shape != self.values.shape or self.times.size == 0:
            raise ValidationError("sampled head needs matching non-empty series", field="values")

    def __call__(self, t: float) -> float:
        return float(np.interp(t, self.times, self.values))

    def change_times(self) -> list:
        return []

    def to_dict(self) -> dict:
        return {"kind": "sampled", "times": self.times.tolist(), "values": self.values.tolist()}


def head_signal_from_dict(d) -> Callable[[float], float]:
    if isinstance(d, (int, float)):
        return ConstantHead(d)
    kind = d.get("kind", "constant")
    if kind == "constant":
        return ConstantHead(d["value"])
    if kind == "step":
        return StepHead(d["before"], d["after"], d["t_step"])
    if kind == "sampled":
        return SampledHead(d["times"], d["values"])
    raise ValidationError(f"unknown head signal kind {kind!r}", field="kind")


@dataclass(frozen=True)
class BoundaryHeads:
    """Upstream and downstream head inputs as functions of time."""

    h_in: Callable[[float], float]
    h_out: Callable[[float], float]

    @classmethod
    def constant(cls, h_in: float, h_out: float) -> "BoundaryHeads":
        return cls(ConstantHead(h_in), ConstantHead(h_out))

    def __call__(self, t: float) -> tuple:
        hi, ho = self.h_in(t), self.h_out(t)
        if hi < 0 or ho < 0:
            raise ValidationError(f"boundary heads must be >= 0 at t={t}", field="bc")
        return hi, ho

    def change_times(self) -> list:
        times = []
        for sig in (self.h_in, self.h_out):
            times.extend(getattr(sig, "change_times", lambda: [])())
        return sorted(set(times))

    def to_dict(self) -> dict:
        return {"h_in": self.h_in.to_dict(), "h_out": self.h_out.to_dict()}


# ---------------------------------------------------------------------------
# Right-hand side and integration
# ---------------------------------------------------------------------------

def leak_outflow(sigma: float, head: float) -> float:
    """Orifice outflow ``sigma * sqrt(head)``."""
    if head < 0:
        raise HeadDomainError(f"negative head {head!r} at a leak node")
    if sigma == 0.0 or head == 0.0:
        return 0.0
    return sigma * math.sqrt(head)


def node_sigmas(grid: Grid, leaks: Iterable[LeakSpec], t: float | None = None) -> np.ndarray:
    """Leak coefficient per interior node ``H_2..H_n`` (leaks snapped to nodes).

    Without ``t`` every leak counts as fully open.
    """
    sig = np.zeros(max(grid.n_sections - 1, 0))
    for leak in leaks:
        value = leak.sigma if t is None else leak.sigma_at(t)
        if value == 0.0:
            continue
        sig[grid.nearest_interior_node(leak.position) - 1] += value
    return sig


class _Model:
    """Packed-vector form of the lumped model: ``y = [Q_1..Q_n, H_2..H_n]``."""

    def __init__(self, params: PipelineParams, grid: Grid):
        dz = grid.dz
        self.n = grid.n_sections
        self.cq = params.a1 / dz
        self.ch = params.a2 / dz[:-1]
        self.mu = params.mu
        self._h = np.empty(self.n + 1)
        self._sig_ref = None
        self._leaky = None

    def pack(self, state: FluidState) -> np.ndarray:
        return np.concatenate((state.flows, state.heads[1:-1]))

    def unpack(self, y: np.ndarray, h_in: float, h_out: float) -> FluidState:
        n = self.n
        heads = np.empty(n + 1)
        heads[0], heads[-1] = h_in, h_out
        heads[1:-1] = y[n:]
        return FluidState(y[:n].copy(), heads)

    def deriv(self, y: np.ndarray, h_in: float, h_out: float, sig: np.ndarray) -> np.ndarray:
        n = self.n
        q = y[:n]
        h = self._h
        h[0], h[-1] = h_in, h_out
        h[1:-1] = y[n:]
        out = np.empty_like(y)
        out[:n] = self.cq * (h[:-1] - h[1:]) - self.mu * q * np.abs(q)
        if n > 1:
            dq = q[:-1] - q[1:]
            leaky = self._leaky_nodes(sig)
            if leaky is not None:
                hl = y[n:][leaky]
                if np.any(hl < 0):
                    raise HeadDomainError("negative head at a leak node")
                dq[leaky] -= sig[leaky] * np.sqrt(hl)
            out[n:] = self.ch * dq
        return out

    def _leaky_nodes(self, sig):
        # cached per sigma array; sigma changes only at breaks and inside ramps
        if sig is not self._sig_ref:
            self._sig_ref = sig
            idx = np.flatnonzero(sig > 0)
            self._leaky = idx if idx.size else None
        return self._leaky


def rhs(state: FluidState, params: PipelineParams, grid: Grid, bc: BoundaryHeads,
        leaks: Iterable[LeakSpec], t: float) -> FluidState:
    """Time derivative of ``state``; every leak passed in is treated as open.

    The boundary entries of the returned head derivative are zero because the
    end heads are inputs, read from ``bc`` at ``t``.
    """
    model = _Model(params, grid)
    if state.flows.size != grid.n_sections:
        raise ValidationError("state does not match grid", field="flows")
    h_in, h_out = bc(t)
    d = model.deriv(model.pack(state), h_in, h_out, node_sigmas(grid, leaks))
    dheads = np.zeros(grid.n_sections + 1)
    dheads[1:-1] = d[grid.n_sections:]
    return FluidState(d[:grid.n_sections], dheads)


def max_stable_step(params: PipelineParams, grid: Grid, safety: float = 0.5) -> float:
    """Largest admissible step ``safety * min(dz) / b``."""
    return safety * min(grid.section_lengths) / params.wave_speed


def _check_dt(dt: float, params: PipelineParams, grid: Grid, safety: float) -> None:
    if not dt > 0:
        raise ConfigurationError(f"dt must be positive, got {dt!r}", field="dt")
    limit = max_stable_step(params, grid, safety)
    if dt > limit * (1 + 1e-12):
        raise ConfigurationError(
            f"dt={dt:g} s exceeds the wave-speed guard {limit:g} s", field="dt"
        )


def _rk4(model: _Model, y, t, dt, bc, sig, fixed=None):
    # sig is an array, or a (sig0, sig_mid, sig1) triple while a leak is opening
    if fixed is not None:
        hi0, ho0 = him, hom = hi1, ho1 = fixed
    else:
        hi0, ho0 = bc(t)
        him, hom = bc(t + 0.5 * dt)
        hi1, ho1 = bc(t + dt)
    s0, sm, s1 = sig if isinstance(sig, tuple) else (sig, sig, sig)
    k1 = model.deriv(y, hi0, ho0, s0)
    k2 = model.deriv(y + 0.5 * dt * k1, him, hom, sm)
    k3 = model.deriv(y + 0.5 * dt * k2, him, hom, sm)
    k4 = model.deriv(y + dt * k3, hi1, ho1, s1)
    return y + (dt / 6.0) * (k1 + 2.0 * k2 + 2.0 * k3 + k4), hi1, ho1


def rk4_step(state: FluidState, params: PipelineParams, grid: Grid, bc: BoundaryHeads,
             leaks: Iterable[LeakSpec], t: float, dt: float, safety: float = 0.5) -> FluidState:
    """One classical Runge-Kutta step of :func:`rhs` from ``t`` to ``t + dt``."""
    _check_dt(dt, params, grid, safety)
    model = _Model(params, grid)
    sig = node_sigmas(grid, leaks)
    try:
        y1, hi, ho = _rk4(model, model.pack(state), t, dt, bc, sig)
    except HeadDomainError as exc:
        raise SimulationError(str(exc), t=t) from exc
    if not np.all(np.isfinite(y1)):
        raise SimulationError("non-finite state after step", t=t + dt)
    return model.unpack(y1, hi, ho)


def _is_constant(bc) -> bool:
    return isinstance(bc.h_in, ConstantHead) and isinstance(bc.h_out, ConstantHead)


@dataclass
class Trajectory:
    """Uniformly sampled truth trajectory."""

    t: np.ndarray
    flows: np.ndarray   # (N, n)
    heads: np.ndarray   # (N, n + 1)

    def __len__(self):
        return self.t.size

    def state(self, k: int) -> FluidState:
        return FluidState(self.flows[k].copy(), self.heads[k].copy())

    @property
    def q_in(self) -> np.ndarray:
        return self.flows[:, 0]

    @property
    def q_out(self) -> np.ndarray:
        return self.flows[:, -1]


def simulate(initial: FluidState, params: PipelineParams, grid: Grid, bc: BoundaryHeads,
             leaks: Sequence[LeakSpec], horizon: float, dt: float, *,
             t0: float = 0.0, sample_every: int = 1, safety: float = 0.5) -> Trajectory:
    """Integrate from ``t0`` over ``horizon`` seconds with a fixed step.

    Leak onsets are snapped to the nearest multiple of ``dt``; a leak is open
    for every step starting at or after its snapped onset, and an opening
    leak's coefficient is evaluated at every Runge-Kutta stage.  Every
    ``sample_every``-th state is stored, including the initial one.
    """
    _check_dt(dt, params, grid, safety)
    grid.check_length(params)
    if horizon < 0:
        raise ConfigurationError("horizon must be >= 0", field="horizon")
    if sample_every < 1:
        raise ConfigurationError("sample_every must be >= 1", field="sample_every")
    model = _Model(params, grid)
    n_steps = int(round(horizon / dt))
    # snap onsets to the step grid; ramps keep their duration
    leaks = [LeakSpec(lk.position, lk.sigma, t0 + round((lk.onset_time - t0) / dt) * dt,
                      lk.opening_time) for lk in leaks]
    ramps = [(lk.onset_time, lk.onset_time + lk.opening_time) for lk in leaks
             if lk.opening_time > 0]

    def opening(t):
        return any(a - 0.5 * dt < t < b - 0.5 * dt for a, b in ramps)

    n_out = n_steps // sample_every + 1
    ts = np.empty(n_out)
    flows = np.empty((n_out, grid.n_sections))
    heads = np.empty((n_out, grid.n_sections + 1))
    h_in, h_out = bc(t0)
    y = model.pack(initial)
    ts[0], flows[0], heads[0] = t0, initial.flows, initial.heads
    heads[0, 0], heads[0, -1] = h_in, h_out
    onsets = sorted(set(lk.onset_time for lk in leaks))
    sig = node_sigmas(grid, leaks, t0 + 1e-9 * dt)
    fixed = bc(t0) if _is_constant(bc) else None
    row = 1
    for k in range(n_steps):
        t = t0 + k * dt
        if ramps and opening(t):
            sig = (node_sigmas(grid, leaks, t), node_sigmas(grid, leaks, t + 0.5 * dt),
                   node_sigmas(grid, leaks, t + dt))
        elif isinstance(sig, tuple) or (onsets and any(abs(t - to) < 0.5 * dt for to in onsets)):
            sig = node_sigmas(grid, leaks, t + 0.5 * dt)
        try:
            y, h_in, h_out = _rk4(model, y, t, dt, bc, sig, fixed)
        except HeadDomainError as exc:
            raise SimulationError(str(exc), t=t) from exc
        if (k + 1) % sample_every == 0:
            if not np.all(np.isfinite(y)):
                raise SimulationError("non-finite state", t=t + dt)
            if model.n > 1 and np.any(y[model.n:] < 0):
                raise SimulationError("negative head", t=t + dt)
            ts[row] = t0 + (k + 1) * dt
            flows[row] = y[:model.n]
            heads[row, 1:-1] = y[model.n:]
            heads[row, 0], heads[row, -1] = h_in, h_out
            row += 1
    return Trajectory(ts[:row], flows[:row], heads[:row])


# ---------------------------------------------------------------------------
# Steady states
# ---------------------------------------------------------------------------

def _check_heads(h_in, h_out):
    if not (h_out >= 0 and h_in > h_out):
        raise InfeasibleConfigurationError(
            f"no forward steady flow for h_in={h_in!r}, h_out={h_out!r}"
        )


def steady_flow(params: PipelineParams, h_in: float, h_out: float) -> float:
    """Leak-free steady flow ``sqrt(a1 (h_in - h_out) / (mu L))``."""
    _check_heads(h_in, h_out)
    if params.mu == 0:
        raise InfeasibleConfigurationError("a frictionless pipe has no finite steady flow")
    return math.sqrt(params.a1 * (h_in - h_out) / (params.mu * params.length))


def _profile(params, grid, q_sections, h_in):
    """Heads dropping by ``mu Q|Q| dz / a1`` across each section."""
    drops = params.mu * q_sections * np.abs(q_sections) * grid.dz / params.a1
    return np.concatenate(([h_in], h_in - np.cumsum(drops)))


def steady_state_leak_free(params: PipelineParams, h_in: float, h_out: float,
                           grid: Grid | None = None) -> FluidState:
    """Uniform flow with a linear head line, on ``grid`` (one section by default)."""
    grid = grid or Grid.uniform(params.length, 1)
    grid.check_length(params)
    q = steady_flow(params, h_in, h_out)
    flows = np.full(grid.n_sections, q)
    heads = _profile(params, grid, flows, h_in)
    heads[-1] = h_out
    return FluidState(flows, heads)


def _leak_split(params, h_in, h_out, dz1, sigma):
    L, a1, mu = params.length, params.a1, params.mu
    dz2 = L - dz1

    def q1(hf):
        return math.sqrt(a1 * (h_in - hf) / (mu * dz1))

    def q2(hf):
        return math.sqrt(a1 * (hf - h_out) / (mu * dz2))

    def g(hf):
        return q1(hf) - q2(hf) - sigma * math.sqrt(hf)

    lo, hi = h_out, h_in
    if sigma == 0.0:
        hf = h_in - (h_in - h_out) * dz1 / L
    else:
        if not (g(lo) > 0 > g(hi)):
            raise InfeasibleConfigurationError(
                "leak too large: no steady head at the leak between h_out and h_in"
            )
        hf = brentq(g, lo, hi, xtol=1e-14, rtol=4 * np.finfo(float).eps, maxiter=200)
    Q1 = q1(hf)
    return Q1, hf, Q1 - sigma * math.sqrt(hf)


def steady_state_with_leak(params: PipelineParams, h_in: float, h_out: float, leak: LeakSpec,
                           grid: Grid | None = None) -> FluidState:
    """Steady state with one open leak.

    Solves the two-section balance for the leak head by bracketed root
    finding; the downstream flow is then set from mass balance so that
    ``Q1 - Q2 = sigma sqrt(H_f)`` holds exactly.  On a finer ``grid`` the
    leak must sit on a node and the heads are piecewise linear.
    """
    _check_heads(h_in, h_out)
    L = params.length
    if not (0 < leak.position < L):
        raise ValidationError("leak position must lie in (0, L)", field="position")
    if grid is None:
        grid = Grid((leak.position, L - leak.position))
    grid.check_length(params)
    node = grid.nearest_interior_node(leak.position)
    z = grid.node_positions()
    dz1 = float(z[node])
    if abs(dz1 - leak.position) > 1e-9 * L:
        raise ValidationError("leak position is not a grid node", field="position")
    if params.mu == 0:
        raise InfeasibleConfigurationError("a frictionless pipe has no finite steady flow")
    Q1, hf, Q2 = _leak_split(params, h_in, h_out, dz1, leak.sigma)
    flows = np.where(np.arange(grid.n_sections) < node, Q1, Q2)
    heads = np.empty(grid.n_sections + 1)
    heads[:node + 1] = h_in - (h_in - hf) * z[:node + 1] / dz1
    heads[node:] = hf - (hf - h_out) * (z[node:] - dz1) / (L - dz1)
    heads[node], heads[-1] = hf, h_out
    return FluidState(flows, heads)


def sigma_for_flow_loss(params: PipelineParams, h_in: float, h_out: float, position: float,
                        loss_fraction: float) -> float:
    """Leak coefficient that removes ``loss_fraction`` of the upstream flow at steady state."""
    if not 0 < loss_fraction < 1:
        raise ValidationError("loss_fraction must be in (0, 1)", field="loss_fraction")

    def excess(sigma):
        Q1, _, Q2 = _leak_split(params, h_in, h_out, position, sigma)
        return (Q1 - Q2) / Q1 - loss_fraction

    hi = 1e-6
    while excess(hi) < 0:
        hi *= 2.0
        if hi > 1.0:
            raise InfeasibleConfigurationError("requested leak flow loss is unreachable")
    return brentq(excess, 0.0, hi, xtol=1e-16, rtol=1e-14)
