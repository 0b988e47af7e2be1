"""Scenario configuration: JSON document, schema, defaults and resolution."""

from __future__ import annotations

import copy
import json
import math
from dataclasses import dataclass, field

import jsonschema

from .errors import ConfigurationError
from .hydraulics import (
    PILOT_VALVES,
    BoundaryHeads,
    Grid,
    LeakSpec,
    PipelineParams,
    head_signal_from_dict,
    max_stable_step,
    sigma_for_flow_loss,
    steady_flow,
)
from .observers import ObserverConfig
from .residuals import DiagnosisSettings
from .telemetry import FaultScenario, NoiseModel

_num = {"type": "number"}
_pos = {"type": "number", "exclusiveMinimum": 0}
_nonneg = {"type": "number", "minimum": 0}
_head = {
    "oneOf": [
        _nonneg,
        {"type": "object", "required": ["kind"], "properties": {
            "kind": {"enum": ["constant", "step", "sampled"]},
            "value": _nonneg, "before": _nonneg, "after": _nonneg, "t_step": _num,
            "times": {"type": "array", "items": _num},
            "values": {"type": "array", "items": _nonneg}}},
    ]
}
_observer = {"type": "object", "additionalProperties": False, "properties": {
    "lambda": _pos, "dz1": {"type": ["number", "null"]}, "eps_h": _pos,
    "eps_z_fraction": _pos, "eps_q": _pos, "eps_drop": _pos,
    "dt": {"type": ["number", "null"]}}}

SCHEMA = {
    "$schema": "https://json-schema.org/draft/2020-12/schema",
    "title": "pipefdi scenario",
    "type": "object",
    "additionalProperties": False,
    "properties": {
        "name": {"type": "string"},
        "pipeline": {"type": "object", "additionalProperties": False, "properties": {
            "length": _pos, "diameter": _pos, "wave_speed": _pos, "friction": _nonneg,
            "gravity": _pos}},
        "grid": {"type": "object", "additionalProperties": False, "properties": {
            "nodes": {"type": "array", "items": _pos},
            "n_sections": {"type": ["integer", "null"], "minimum": 1},
            "max_section": {"type": ["number", "null"], "exclusiveMinimum": 0}}},
        "boundary": {"type": "object", "additionalProperties": False,
                     "properties": {"h_in": _head, "h_out": _head}},
        "noise": {"type": "object", "additionalProperties": False, "properties": {
            "flow_std": _nonneg, "flow_std_percent": _nonneg, "head_std": _nonneg,
            "seed": {"type": "integer", "minimum": 0}}},
        "faults": {"type": "array", "items": {
            "type": "object", "required": ["kind"], "additionalProperties": False,
            "properties": {
                "kind": {"enum": ["E1", "E2", "E3", "E4", "E5"]},
                "onset": _nonneg, "magnitude": _num, "percent_of_nominal": _num,
                "position": _pos, "sigma": _nonneg,
                "flow_loss": {"type": "number", "exclusiveMinimum": 0, "exclusiveMaximum": 1},
                "opening_time": _nonneg}}},
        "run": {"type": "object", "additionalProperties": False, "properties": {
            "horizon": _nonneg, "dt": _pos, "sample_period": _pos, "safety": _pos}},
        "diagnosis": {"type": "object", "additionalProperties": False, "properties": {
            "k": _pos, "persistence_time": _nonneg, "calibration_time": _pos,
            "min_calibration": _pos, "floor": _pos, "derivative_tau": _pos,
            "integral_forgetting": {"type": ["number", "null"], "exclusiveMinimum": 0},
            "static_smoothing": {"type": ["number", "null"], "exclusiveMinimum": 0},
            "isolation_dwell": _nonneg, "settling_time": _nonneg, "gap_factor": _pos}},
        "observers": {"type": "object", "additionalProperties": False, "properties": {
            "leak": _observer, "flow": _observer, "pressure": _observer,
            "reconstruct": {"type": "boolean"}}},
        "tolerances": {"type": "object", "additionalProperties": False, "properties": {
            "position_fraction": _pos, "sigma_relative": _pos, "flow_offset_relative": _pos,
            "pressure_relative": _pos, "settle_window": _pos}},
    },
}

DEFAULTS = {
    "name": "nominal",
    "pipeline": {"length": 200.16, "diameter": 0.1047, "wave_speed": 1497.0,
                 "friction": 2.785e-2, "gravity": 9.81},
    "grid": {"nodes": list(PILOT_VALVES), "n_sections": None, "max_section": None},
    "boundary": {"h_in": 10.0, "h_out": 2.0},
    "noise": {"flow_std": 0.0, "head_std": 0.0, "seed": 0},
    "faults": [],
    "run": {"horizon": 300.0, "dt": 0.0025, "sample_period": 0.01, "safety": 0.5},
    "diagnosis": DiagnosisSettings().to_dict(),
    "observers": {"leak": {"lambda": 1.0}, "flow": {"lambda": 2.0},
                  "pressure": {"lambda": 1.0}, "reconstruct": True},
    "tolerances": {"position_fraction": 0.05, "sigma_relative": 0.10,
                   "flow_offset_relative": 0.02, "pressure_relative": 0.10,
                   "settle_window": 30.0},
}

# Leak from valve V4 opened at 100 s, removing 5 % of the flow.
REFERENCE_FAULTS = [{"kind": "E5", "onset": 100.0, "position": 118.365, "flow_loss": 0.05,
                     "opening_time": 5.0}]


def default_config(with_reference_leak: bool = True) -> dict:
    d = copy.deepcopy(DEFAULTS)
    if with_reference_leak:
        d["name"] = "reference-leak-V4"
        d["faults"] = copy.deepcopy(REFERENCE_FAULTS)
    return d


def _merge(base, over):
    out = copy.deepcopy(base)
    for k, v in over.items():
        if isinstance(v, dict) and isinstance(out.get(k), dict):
            out[k] = _merge(out[k], v)
        else:
            out[k] = copy.deepcopy(v)
    return out


def _observer_cfg(d: dict) -> ObserverConfig:
    kw = {"lam": d.get("lambda", 1.0)}
    for key in ("dz1", "eps_h", "eps_z_fraction", "eps_q", "eps_drop", "dt"):
        if d.get(key) is not None:
            kw[key] = d[key]
    return ObserverConfig(**kw)


@dataclass
class ScenarioConfig:
    """A validated scenario with all objects built.

    ``raw`` is the fully resolved JSON document (defaults filled in, percent
    magnitudes and flow-loss leaks converted to absolute values).
    """

    raw: dict
    params: PipelineParams
    grid: Grid
    bc: BoundaryHeads
    noise: NoiseModel
    faults: list
    horizon: float
    dt: float
    sample_period: float
    safety: float
    diagnosis: DiagnosisSettings
    observers: dict
    reconstruct: bool
    tolerances: dict
    nominal_flow: float = field(default=math.nan)

    @property
    def name(self) -> str:
        return self.raw.get("name", "")

    @property
    def leaks(self) -> list:
        return [f.leak for f in self.faults if f.kind == "E5"]

    @property
    def sample_every(self) -> int:
        return int(round(self.sample_period / self.dt))

    @classmethod
    def from_dict(cls, d: dict) -> "ScenarioConfig":
        errors = sorted(jsonschema.Draft202012Validator(SCHEMA).iter_errors(d),
                        key=lambda e: list(e.absolute_path))
        if errors:
            msgs = [f"{'/'.join(map(str, e.absolute_path)) or '<root>'}: {e.message}"
                    for e in errors]
            raise ConfigurationError("invalid configuration:\n  " + "\n  ".join(msgs))
        raw = _merge(DEFAULTS, d)
        problems = []
        try:
            params = PipelineParams(**raw["pipeline"])
        except Exception as exc:  # noqa: BLE001 - collected and re-raised below
            raise ConfigurationError(f"pipeline: {exc}") from exc

        g = raw["grid"]
        leak_positions = [f["position"] for f in raw["faults"] if f["kind"] == "E5"
                          and "position" in f]
        if g.get("n_sections"):
            grid = Grid.uniform(params.length, g["n_sections"])
        else:
            nodes = sorted(set(g.get("nodes") or []) | set(leak_positions))
            bad = [z for z in nodes if not 0 < z < params.length]
            if bad:
                problems.append(f"grid: nodes outside (0, L): {bad}")
                nodes = [z for z in nodes if 0 < z < params.length]
            grid = (Grid.from_nodes(params.length, nodes, g.get("max_section")) if nodes
                    else Grid.uniform(params.length, 1))
        zs = grid.node_positions()
        for z in leak_positions:
            if not any(abs(z - zn) <= 1e-9 * params.length for zn in zs[1:-1]):
                problems.append(f"faults: leak position {z} is not an interior grid node")

        bc = BoundaryHeads(head_signal_from_dict(raw["boundary"]["h_in"]),
                           head_signal_from_dict(raw["boundary"]["h_out"]))
        h_in0, h_out0 = bc(0.0)
        nominal = math.nan
        if not h_in0 > h_out0:
            problems.append(f"boundary: need h_in > h_out at t=0, got {h_in0} and {h_out0}")
        else:
            nominal = steady_flow(params, h_in0, h_out0)

        n = raw["noise"]
        flow_std = n.get("flow_std", 0.0)
        if "flow_std_percent" in n:
            flow_std = n["flow_std_percent"] / 100.0 * nominal
            raw["noise"] = {k: v for k, v in n.items() if k != "flow_std_percent"}
            raw["noise"]["flow_std"] = flow_std
        noise = NoiseModel(flow_std, n.get("head_std", 0.0), n.get("seed", 0))

        faults, resolved = [], []
        for i, f in enumerate(raw["faults"]):
            f = dict(f)
            onset = f.get("onset", 0.0)
            kind = f["kind"]
            try:
                if kind == "E5":
                    if "position" not in f:
                        raise ConfigurationError("E5 needs a position")
                    if "sigma" not in f:
                        if "flow_loss" not in f:
                            raise ConfigurationError("E5 needs sigma or flow_loss")
                        if math.isnan(nominal):
                            continue
                        f["sigma"] = sigma_for_flow_loss(params, h_in0, h_out0, f["position"],
                                                         f["flow_loss"])
                    leak = LeakSpec(f["position"], f["sigma"], onset, f.get("opening_time", 0.0))
                    faults.append(FaultScenario("E5", leak, onset))
                else:
                    if "magnitude" not in f:
                        if "percent_of_nominal" not in f or kind not in ("E1", "E2"):
                            raise ConfigurationError(f"{kind} needs a magnitude")
                        if math.isnan(nominal):
                            continue
                        f["magnitude"] = f["percent_of_nominal"] / 100.0 * nominal
                    faults.append(FaultScenario(kind, float(f["magnitude"]), onset))
                resolved.append(f)
            except Exception as exc:  # noqa: BLE001
                problems.append(f"faults/{i}: {exc}")
        raw["faults"] = resolved

        r = raw["run"]
        dt, sp, safety = r["dt"], r["sample_period"], r.get("safety", 0.5)
        limit = max_stable_step(params, grid, safety)
        if dt > limit * (1 + 1e-12):
            problems.append(f"run: dt={dt} exceeds the wave-speed guard {limit:.6g} s")
        ratio = sp / dt
        if abs(ratio - round(ratio)) > 1e-9 or round(ratio) < 1:
            problems.append(f"run: sample_period={sp} is not a whole multiple of dt={dt}")

        try:
            diag = DiagnosisSettings(**raw["diagnosis"])
        except TypeError as exc:
            raise ConfigurationError(f"diagnosis: {exc}") from exc
        if diag.calibration_time < diag.min_calibration:
            problems.append("diagnosis: calibration_time is below min_calibration")
        for f in d.get("faults", raw["faults"]):
            if f.get("onset", 0.0) < diag.calibration_time:
                problems.append(f"faults: {f['kind']} onset {f.get('onset', 0.0)} s falls inside "
                                f"the {diag.calibration_time} s calibration window")
        if r["horizon"] <= diag.calibration_time:
            problems.append("run: horizon must exceed the calibration window")

        obs = raw["observers"]
        observers = {}
        for fam in ("leak", "flow", "pressure"):
            try:
                observers[fam] = _observer_cfg(obs.get(fam, {}))
            except Exception as exc:  # noqa: BLE001
                problems.append(f"observers/{fam}: {exc}")
        if problems:
            raise ConfigurationError("invalid configuration:\n  " + "\n  ".join(problems))
        return cls(raw, params, grid, bc, noise, faults, float(r["horizon"]), float(dt),
                   float(sp), float(safety), diag, observers, bool(obs.get("reconstruct", True)),
                   dict(raw["tolerances"]), nominal)

    @classmethod
    def load(cls, path) -> "ScenarioConfig":
        with open(path, encoding="utf-8") as fh:
            try:
                d = json.load(fh)
            except json.JSONDecodeError as exc:
                raise ConfigurationError(f"{path}: not valid JSON ({exc})") from exc
        return cls.from_dict(d)

    def with_overrides(self, **kw) -> "ScenarioConfig":
        """Copy with CLI-style overrides (``seed``, ``horizon``, ``lambda_leak`` ...)."""
        d = copy.deepcopy(self.raw)
        if kw.get("seed") is not None:
            d["noise"]["seed"] = kw["seed"]
        if kw.get("horizon") is not None:
            d["run"]["horizon"] = kw["horizon"]
        for fam in ("leak", "flow", "pressure"):
            v = kw.get(f"lambda_{fam}")
            if v is not None:
                d["observers"].setdefault(fam, {})["lambda"] = v
        return ScenarioConfig.from_dict(d)
