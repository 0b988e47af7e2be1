"""Analytical redundancy residuals, thresholds and fault isolation.

Five residuals computed from the end measurements:

* ``r1 = Q_in - Q_out`` (mass balance);
* ``r2``, ``r3``: steady momentum balance using ``Q_in`` or ``Q_out``;
* ``r4``, ``r5``: two-section dynamic relations with the mid-pipe head
  eliminated through the integral of the flow imbalance.

Which residuals fire identifies the fault through the signature matrix.
"""

from __future__ import annotations

import logging
import math
import statistics
from dataclasses import dataclass, replace
from typing import Iterable, Sequence

from .errors import CalibrationError, UsageError, ValidationError
from .hydraulics import PipelineParams

log = logging.getLogger(__name__)

N_RESIDUALS = 5
RESIDUAL_NAMES = ("r1", "r2", "r3", "r4", "r5")
RESIDUAL_LOG_HEADER = ("t", *RESIDUAL_NAMES, "sig1", "sig2", "sig3", "sig4", "sig5", "status")

SIGNATURES = {
    "E1": (1, 1, 0, 1, 1),
    "E2": (1, 0, 1, 1, 1),
    "E3": (0, 1, 1, 1, 0),
    "E4": (0, 1, 1, 0, 1),
    "E5": (1, 1, 1, 1, 1),
}


class FaultSignatureMatrix:
    """Expected residual pattern per fault scenario; columns must be distinct."""

    def __init__(self, columns: dict | None = None):
        columns = SIGNATURES if columns is None else columns
        self.columns = {k: tuple(bool(b) for b in v) for k, v in columns.items()}
        for k, v in self.columns.items():
            if len(v) != N_RESIDUALS:
                raise ValidationError(f"column {k} needs {N_RESIDUALS} entries", field="columns")
        seen = {}
        for k, v in self.columns.items():
            if v in seen:
                raise ValidationError(f"scenarios {seen[v]} and {k} share a signature; "
                                      "they are not isolable", field="columns")
            seen[v] = k

    def match(self, pattern: Sequence[bool]) -> list:
        p = tuple(bool(b) for b in pattern)
        return [k for k, v in self.columns.items() if v == p]

    def __getitem__(self, scenario):
        return self.columns[scenario]


def residual_gains(params: PipelineParams) -> tuple:
    """``(alpha1, alpha2)`` of the two-section relations.

    Eliminating the mid head from two sections of length ``L/2`` gives
    ``alpha2 = a1 / (L/2)`` and ``alpha1 = alpha2 * a2 / (L/2) = a1 a2 / (L^2/4)``.
    """
    half = 0.5 * params.length
    alpha2 = params.a1 / half
    return alpha2 * params.a2 / half, alpha2


@dataclass(frozen=True)
class ResidualVector:
    t: float
    r1: float
    r2: float
    r3: float
    r4: float
    r5: float

    def values(self) -> tuple:
        return (self.r1, self.r2, self.r3, self.r4, self.r5)


def residual_r1(sample) -> float:
    return sample.q_in - sample.q_out


def residual_r2(sample, params: PipelineParams) -> float:
    """Steady momentum balance with the upstream flow; blind to the downstream meter."""
    return -params.mu * sample.q_in * abs(sample.q_in) + params.a1 / params.length * (
        sample.h_in - sample.h_out)


def residual_r3(sample, params: PipelineParams) -> float:
    """Steady momentum balance with the downstream flow; blind to the upstream meter."""
    return -params.mu * sample.q_out * abs(sample.q_out) + params.a1 / params.length * (
        sample.h_in - sample.h_out)


@dataclass(frozen=True)
class ResidualFilterState:
    """Memories of the dynamic residuals.

    ``dq_in``/``dq_out`` are first-order filtered derivatives (Tustin form of
    ``s / (tau s + 1)``), ``integral`` the trapezoidal integral of
    ``Q_in - Q_out`` with an optional forgetting time constant
    (``None`` = pure integral) and ``h_m0`` the mid-pipe head at the start of
    integration.  ``smooth`` holds the low-passed static residuals r1-r3
    (time constant ``smoothing``, ``None`` = unfiltered).
    """

    t: float
    q_in: float
    q_out: float
    dq_in: float = 0.0
    dq_out: float = 0.0
    integral: float = 0.0
    h_m0: float = 0.0
    tau: float = 1.0
    forgetting: float | None = 0.5
    initialized: bool = True
    smoothing: float | None = 0.5
    smooth: tuple | None = None

    @classmethod
    def start(cls, sample, h_m0: float, tau: float = 1.0, forgetting: float | None = 0.5,
              smoothing: float | None = 0.5):
        return cls(sample.t, sample.q_in, sample.q_out, 0.0, 0.0, 0.0, h_m0, tau, forgetting,
                   True, smoothing)

    def advanced(self, sample) -> "ResidualFilterState":
        """State after consuming ``sample``; a no-op for an already consumed time."""
        dt = sample.t - self.t
        if dt <= 0:
            return self
        c = 2.0 * self.tau / dt
        dq_in = (2.0 / dt * (sample.q_in - self.q_in) - (1.0 - c) * self.dq_in) / (1.0 + c)
        dq_out = (2.0 / dt * (sample.q_out - self.q_out) - (1.0 - c) * self.dq_out) / (1.0 + c)
        half_prev = 0.5 * dt * (self.q_in - self.q_out)
        half_now = 0.5 * dt * (sample.q_in - sample.q_out)
        decay = 1.0 if self.forgetting is None else math.exp(-dt / self.forgetting)
        integral = decay * (self.integral + half_prev) + half_now
        return replace(self, t=sample.t, q_in=sample.q_in, q_out=sample.q_out,
                       dq_in=dq_in, dq_out=dq_out, integral=integral)

    def restarted(self, sample) -> "ResidualFilterState":
        """Clear derivative and integral memories at ``sample`` (keeps ``h_m0``)."""
        return replace(self, t=sample.t, q_in=sample.q_in, q_out=sample.q_out,
                       dq_in=0.0, dq_out=0.0, integral=0.0, smooth=None)


def _require(state):
    if state is None or not getattr(state, "initialized", False):
        raise UsageError("residual filter state is not initialized; calibrate first")


def residual_r4(sample, state: ResidualFilterState, params: PipelineParams) -> tuple:
    """Upstream dynamic relation; blind to the downstream head."""
    _require(state)
    state = state.advanced(sample)
    alpha1, alpha2 = residual_gains(params)
    q = sample.q_in
    r4 = (state.dq_in + params.mu * q * abs(q) + alpha1 * state.integral
          - alpha2 * sample.h_in + alpha2 * state.h_m0)
    return r4, state


def residual_r5(sample, state: ResidualFilterState, params: PipelineParams) -> tuple:
    """Downstream dynamic relation; blind to the upstream head."""
    _require(state)
    state = state.advanced(sample)
    alpha1, alpha2 = residual_gains(params)
    q = sample.q_out
    r5 = (state.dq_out + params.mu * q * abs(q) - alpha1 * state.integral
          + alpha2 * sample.h_out - alpha2 * state.h_m0)
    return r5, state


def compute_residuals(sample, state: ResidualFilterState, params: PipelineParams) -> tuple:
    """All five residuals; r1-r3 pass through the state's first-order smoother."""
    _require(state)
    dt = sample.t - state.t
    r4, state = residual_r4(sample, state, params)
    r5, state = residual_r5(sample, state, params)
    static = (residual_r1(sample), residual_r2(sample, params), residual_r3(sample, params))
    if state.smoothing is not None and state.smooth is not None:
        # exact discretization of 1 / (T s + 1) for a sample-and-hold input
        a = -math.expm1(-max(dt, 0.0) / state.smoothing)
        static = tuple(p + a * (r - p) for p, r in zip(state.smooth, static))
    if state.smoothing is not None:
        state = replace(state, smooth=static)
    return ResidualVector(sample.t, *static, r4, r5), state


# ---------------------------------------------------------------------------
# Thresholds
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class ThresholdPolicy:
    """Per-residual thresholds ``max(k * std_i, floor)`` with a persistence count."""

    thresholds: tuple
    persistence: int
    k: float = 3.0
    stds: tuple = (0.0,) * N_RESIDUALS
    floor: float = 1e-9

    def __post_init__(self):
        if len(self.thresholds) != N_RESIDUALS or any(not th > 0 for th in self.thresholds):
            raise ValidationError("thresholds must be five positive numbers", field="thresholds")
        if self.persistence < 1:
            raise ValidationError("persistence must be >= 1", field="persistence")

    def to_dict(self) -> dict:
        return {"k": self.k, "persistence": self.persistence, "floor": self.floor,
                "stds": list(self.stds), "thresholds": list(self.thresholds)}


def calibrate(window: Sequence, params: PipelineParams, *, k: float = 3.0,
              persistence_time: float = 2.0, min_duration: float = 30.0,
              floor: float = 1e-9, tau: float = 1.0,
              forgetting: float | None = 0.5, smoothing: float | None = 0.5) -> tuple:
    """Thresholds and a primed filter state from a fault-free window.

    The mid head is taken as the window average of ``(h_in + h_out) / 2``; the
    residual spread is measured after the filters have warmed up, and the
    returned state continues from the last sample with a zeroed integral.
    """
    if len(window) < 2 or window[-1].t - window[0].t < min_duration * (1 - 1e-9):
        span = window[-1].t - window[0].t if window else 0.0
        raise CalibrationError(f"calibration window of {span:g} s is shorter than "
                               f"{min_duration:g} s")
    h_m0 = statistics.fmean(0.5 * (s.h_in + s.h_out) for s in window)
    state = ResidualFilterState.start(window[0], h_m0, tau, forgetting, smoothing)
    warmup = window[0].t + min(5.0 * max(tau, forgetting or 0.0, smoothing or 0.0),
                               0.5 * (window[-1].t - window[0].t))
    cols = [[] for _ in range(N_RESIDUALS)]
    for s in window[1:]:
        rv, state = compute_residuals(s, state, params)
        if s.t >= warmup:
            for c, v in zip(cols, rv.values()):
                c.append(v)
    stds = tuple(statistics.pstdev(c) if len(c) > 1 else 0.0 for c in cols)
    dts = [b.t - a.t for a, b in zip(window[:-1], window[1:])]
    dt = statistics.median(dts)
    persistence = max(1, int(round(persistence_time / dt)))
    policy = ThresholdPolicy(tuple(max(k * sd, floor) for sd in stds), persistence,
                             k, stds, floor)
    return policy, replace(state, integral=0.0)


# ---------------------------------------------------------------------------
# Signatures and isolation
# ---------------------------------------------------------------------------

def evaluate_signature(residuals: ResidualVector, policy: ThresholdPolicy,
                       history: Sequence[int] | None = None) -> tuple:
    """Debounced pattern and updated run-length history.

    ``history[i]`` counts consecutive samples with ``|r_i|`` above its
    threshold; bit ``i`` is set once that count reaches the persistence.
    """
    history = (0,) * N_RESIDUALS if history is None else history
    new = tuple(h + 1 if abs(r) > th else 0
                for h, r, th in zip(history, residuals.values(), policy.thresholds))
    pattern = tuple(c >= policy.persistence for c in new)
    return pattern, new


@dataclass(frozen=True)
class DiagnosisVerdict:
    """``status`` is one of ``nominal``, ``detected``, ``isolated``, ``ambiguous``."""

    status: str = "nominal"
    scenario: str | None = None
    candidates: tuple = ()
    detection_time: float | None = None
    isolation_time: float | None = None

    @property
    def label(self) -> str:
        if self.status == "isolated":
            return f"isolated:{self.scenario}"
        if self.status == "ambiguous":
            return "ambiguous:" + "|".join(self.candidates)
        return self.status


def isolate_fault(pattern: Sequence[bool], fsm: FaultSignatureMatrix | None = None,
                  previous: DiagnosisVerdict | None = None, t: float | None = None) -> DiagnosisVerdict:
    """Match a pattern against the signature matrix."""
    fsm = fsm or FaultSignatureMatrix()
    previous = previous or DiagnosisVerdict()
    if not any(pattern):
        return DiagnosisVerdict()
    det = previous.detection_time if previous.detection_time is not None else t
    hits = fsm.match(pattern)
    if len(hits) == 1:
        iso = previous.isolation_time if (previous.status == "isolated"
                                          and previous.scenario == hits[0]) else t
        return DiagnosisVerdict("isolated", hits[0], tuple(hits), det, iso)
    if len(hits) > 1:
        return DiagnosisVerdict("ambiguous", None, tuple(hits), det, None)
    return DiagnosisVerdict("detected", None, (), det, None)


@dataclass
class DiagnosisSettings:
    k: float = 3.0
    persistence_time: float = 2.0
    calibration_time: float = 60.0
    min_calibration: float = 30.0
    floor: float = 1e-9
    derivative_tau: float = 1.0
    integral_forgetting: float | None = 0.5
    static_smoothing: float | None = 0.5
    isolation_dwell: float = 5.0
    settling_time: float = 30.0
    gap_factor: float = 2.0

    def to_dict(self) -> dict:
        return dict(self.__dict__)


class Diagnoser:
    """Sequential detection and isolation over one measurement stream.

    Residual bits are latched once they fire (faults are persistent steps);
    an isolation is declared when the latched pattern matches one column and
    has not changed for ``isolation_dwell`` seconds.
    """

    def __init__(self, params: PipelineParams, settings: DiagnosisSettings | None = None,
                 fsm: FaultSignatureMatrix | None = None, suppress_windows: Iterable = ()):
        self.params = params
        self.settings = settings or DiagnosisSettings()
        self.fsm = fsm or FaultSignatureMatrix()
        self.suppress = [(t, t + self.settings.settling_time) for t in suppress_windows]
        self.policy: ThresholdPolicy | None = None
        self.state: ResidualFilterState | None = None
        self.history = (0,) * N_RESIDUALS
        self.latched = (False,) * N_RESIDUALS
        self.latched_since: float | None = None
        self.verdict = DiagnosisVerdict()
        self.timeline: list = []
        self.exceedances = [0] * N_RESIDUALS
        self.max_ratio = [0.0] * N_RESIDUALS
        self.gaps = 0
        self._dt = None
        self._mid_sum = 0.0
        self._mid_n = 0

    def calibrate(self, window: Sequence) -> ThresholdPolicy:
        s = self.settings
        self.policy, self.state = calibrate(
            window, self.params, k=s.k, persistence_time=s.persistence_time,
            min_duration=s.min_calibration, floor=s.floor, tau=s.derivative_tau,
            forgetting=s.integral_forgetting, smoothing=s.static_smoothing)
        self._dt = statistics.median(b.t - a.t for a, b in zip(window[:-1], window[1:]))
        self.timeline.append((window[-1].t, self.verdict.label))
        return self.policy

    def suppressed(self, t: float) -> bool:
        return any(a <= t < b for a, b in self.suppress)

    def _rebaseline_tail(self, t: float) -> bool:
        # last quarter of a settling window, used to re-estimate the mid head
        return any(b - 0.25 * (b - a) <= t < b for a, b in self.suppress)

    def process(self, sample) -> tuple:
        """Consume one sample; returns ``(residuals, debounced pattern, verdict)``."""
        if self.policy is None:
            raise UsageError("Diagnoser.process called before calibrate")
        if sample.t - self.state.t > self.settings.gap_factor * self._dt * (1 + 1e-9):
            log.warning("telemetry gap of %.6g s before t=%.6g s; residual filters reset",
                        sample.t - self.state.t, sample.t)
            self.gaps += 1
            self.state = self.state.restarted(sample)
            self.history = (0,) * N_RESIDUALS
        suppressed = self.suppressed(sample.t)
        if self._mid_n and not suppressed:
            # new operating point: restart the integral around the new mid head
            self.state = replace(self.state, h_m0=self._mid_sum / self._mid_n, integral=0.0)
            self._mid_sum, self._mid_n = 0.0, 0
        rv, self.state = compute_residuals(sample, self.state, self.params)
        for i, (r, th) in enumerate(zip(rv.values(), self.policy.thresholds)):
            ratio = abs(r) / th
            if suppressed:
                break
            if ratio > 1:
                self.exceedances[i] += 1
            self.max_ratio[i] = max(self.max_ratio[i], ratio)
        if suppressed:
            self.history = (0,) * N_RESIDUALS
            pattern = (False,) * N_RESIDUALS
            if self._rebaseline_tail(sample.t):
                self._mid_sum += 0.5 * (sample.h_in + sample.h_out)
                self._mid_n += 1
        else:
            pattern, self.history = evaluate_signature(rv, self.policy, self.history)
        latched = tuple(a or b for a, b in zip(self.latched, pattern))
        if latched != self.latched:
            self.latched, self.latched_since = latched, sample.t
        self._update_verdict(sample.t)
        return rv, pattern, self.verdict

    def _update_verdict(self, t):
        v = self.verdict
        if not any(self.latched):
            return
        candidate = isolate_fault(self.latched, self.fsm, v, t)
        if candidate.status == "isolated" and t - self.latched_since < self.settings.isolation_dwell:
            candidate = DiagnosisVerdict("detected", None, (), candidate.detection_time, None)
        if candidate.label != v.label:
            self.timeline.append((t, candidate.label))
        self.verdict = candidate
