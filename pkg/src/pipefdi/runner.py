"""End-to-end scenario runs: simulate, measure, diagnose, reconstruct, report."""

from __future__ import annotations

import datetime as _dt
import json
import logging
import math
import os
import time
from dataclasses import dataclass, field

import numpy as np

from .config import ScenarioConfig
from .errors import (CalibrationError, ObserverDivergenceError, UsageError,
                     ValidationError)
from .hydraulics import simulate, steady_state_leak_free
from .observers import DISPATCH, dispatch_observer
from .residuals import RESIDUAL_LOG_HEADER, Diagnoser
from .telemetry import measure_trajectory, quantize, record, replay, write_csv

log = logging.getLogger(__name__)

EXIT_OK = 0
EXIT_MISSED_DETECTION = 1
EXIT_FALSE_ALARM = 2
EXIT_WRONG_ISOLATION = 3
EXIT_RECONSTRUCTION = 4
OUTCOME_LABELS = {EXIT_OK: "ok", EXIT_MISSED_DETECTION: "missed_detection",
                  EXIT_FALSE_ALARM: "false_alarm", EXIT_WRONG_ISOLATION: "wrong_isolation",
                  EXIT_RECONSTRUCTION: "reconstruction_out_of_tolerance"}

ESTIMATE_LOG_HEADER = ("t", "observer", "estimate_name", "value")


def default_out_dir() -> str:
    return os.environ.get("PIPEFDI_OUT_DIR", "pipefdi-out")


@dataclass
class DiagnosisRun:
    """Everything the diagnosis stage produced for one telemetry stream."""

    diagnoser: Diagnoser
    residual_rows: list
    observer: object = None
    observer_started: float | None = None
    observer_scenario: str | None = None
    estimate_rows: list = field(default_factory=list)
    observer_error: str | None = None

    @property
    def verdict(self):
        return self.diagnoser.verdict

    def estimate_series(self, name: str) -> tuple:
        """``(t, values)`` arrays of one estimate from the active observer."""
        rows = [(t, v) for t, _, n, v in self.estimate_rows if n == name]
        if not rows:
            return np.zeros(0), np.zeros(0)
        arr = np.array(rows)
        return arr[:, 0], arr[:, 1]


def diagnose_stream(samples, config: ScenarioConfig, reconstruct: bool | None = None) -> DiagnosisRun:
    """Calibrate on the leading window, then detect, isolate and reconstruct."""
    if not samples:
        raise CalibrationError("telemetry stream is empty")
    s = config.diagnosis
    t0 = samples[0].t
    n_cal = sum(1 for x in samples if x.t - t0 <= s.calibration_time + 1e-9)
    window, rest = samples[:n_cal], samples[n_cal:]
    diag = Diagnoser(config.params, s, suppress_windows=config.bc.change_times())
    diag.calibrate(window)
    reconstruct = config.reconstruct if reconstruct is None else reconstruct
    run = DiagnosisRun(diag, [])
    rows = run.residual_rows
    obs = None
    for x in rest:
        rv, pattern, verdict = diag.process(x)
        rows.append((x.t, *rv.values(), *(int(b) for b in pattern), verdict.label))
        if not reconstruct or run.observer_error is not None:
            continue
        if verdict.status == "isolated" and verdict.scenario in DISPATCH:
            if obs is None or run.observer_scenario != verdict.scenario:
                obs = dispatch_observer(verdict, config.params, x, config.observers)
                run.observer, run.observer_started = obs, x.t
                run.observer_scenario = verdict.scenario
                log.info("t=%.3f s: %s observer started", x.t, obs.kind)
        if obs is not None:
            try:
                est = obs.update(x)
            except ObserverDivergenceError as exc:
                run.observer_error = f"{exc} at t={exc.t}"
                log.error("observer diverged at t=%s", exc.t)
                continue
            for name, value in est.items():
                run.estimate_rows.append((x.t, obs.kind, name, value))
    return run


def _truth(config: ScenarioConfig) -> dict:
    faults = config.faults
    if not faults:
        return {"expected": "nominal", "scenarios": []}
    first = min(faults, key=lambda f: f.onset_time)
    exp = "isolated:" + first.kind if len(faults) == 1 else "multiple"
    return {"expected": exp, "onset": first.onset_time,
            "scenarios": [f.to_dict() for f in faults]}


def _reconstruction(run: DiagnosisRun, config: ScenarioConfig, horizon_end: float,
                    truth: bool = True) -> dict | None:
    obs = run.observer
    if obs is None:
        return None
    tol = config.tolerances
    win = tol["settle_window"]
    finals = {}
    for name, _ in obs.estimate_names:
        t, v = run.estimate_series(name)
        sel = t >= horizon_end - win
        finals[name] = float(np.mean(v[sel])) if sel.any() else math.nan
    out = {"observer": obs.kind, "started_at": run.observer_started, "final": finals,
           "settle_window": win, "clamp_hits": int(obs.clamp_hits), "error": run.observer_error}
    scen = run.observer_scenario
    match = [f for f in config.faults if f.kind == scen] if truth else []
    if not match:
        out["truth"], out["within_tolerance"] = None, None
        return out
    f = match[0]
    L = config.params.length
    if scen == "E5":
        truth = {"position": f.leak.position, "sigma": f.leak.sigma}
        err = {"position": abs(finals["position"] - truth["position"]) / L,
               "sigma": abs(finals["sigma"] - truth["sigma"]) / truth["sigma"]}
        ok = err["position"] <= tol["position_fraction"] and err["sigma"] <= tol["sigma_relative"]
    elif scen in ("E1", "E2"):
        truth = {"delta_q": float(f.magnitude)}
        err = {"delta_q": abs(finals["delta_q"] - truth["delta_q"]) / abs(truth["delta_q"])}
        ok = err["delta_q"] <= tol["flow_offset_relative"]
    else:
        truth = {"delta_h": float(f.magnitude)}
        err = {"delta_h": abs(finals["delta_h"] - truth["delta_h"]) / abs(truth["delta_h"])}
        ok = err["delta_h"] <= tol["pressure_relative"]
    out.update(truth=truth, errors=err, within_tolerance=bool(ok and run.observer_error is None))
    return out


def classify(truth: dict, verdict, reconstruction: dict | None) -> int:
    """Exit code for a run against its ground truth."""
    det = verdict.detection_time
    if truth["expected"] == "nominal":
        return EXIT_OK if verdict.status == "nominal" else EXIT_FALSE_ALARM
    if det is None:
        return EXIT_MISSED_DETECTION
    if det < truth["onset"]:
        return EXIT_FALSE_ALARM
    if truth["expected"] != "multiple" and verdict.label != truth["expected"]:
        return EXIT_WRONG_ISOLATION
    if reconstruction is not None and reconstruction.get("within_tolerance") is False:
        return EXIT_RECONSTRUCTION
    return EXIT_OK


@dataclass
class RunReport:
    """The run report; ``data`` is the JSON document written to report.json."""

    data: dict
    run: DiagnosisRun | None = None
    samples: list | None = None
    trajectory: object = None

    @property
    def exit_code(self) -> int:
        return self.data["outcome"]["code"]

    @property
    def verdict(self) -> str:
        return self.data["verdict"]["final"]

    def deterministic(self) -> dict:
        """The report without the wall-clock ``runtime`` block."""
        return {k: v for k, v in self.data.items() if k != "runtime"}

    def to_json(self) -> str:
        return json.dumps(self.data, indent=2)


def _report(config, run: DiagnosisRun, samples, started, source, truth=True) -> dict:
    diag = run.diagnoser
    v = diag.verdict
    end = samples[-1].t
    truth_d = _truth(config) if truth else None
    recon = _reconstruction(run, config, end, truth)
    code = classify(truth_d, v, recon) if truth else None
    pol = diag.policy
    return {
        "name": config.name,
        "source": source,
        "config": config.raw,
        "verdict": {"final": v.label, "detection_time": v.detection_time,
                    "isolation_time": v.isolation_time, "candidates": list(v.candidates),
                    "timeline": [[t, lab] for t, lab in diag.timeline]},
        "ground_truth": truth_d,
        "residuals": {"thresholds": list(pol.thresholds), "calibration_std": list(pol.stds),
                      "k": pol.k, "persistence_samples": pol.persistence,
                      "exceedance_counts": list(diag.exceedances),
                      "max_ratio": list(diag.max_ratio), "gaps": diag.gaps},
        "reconstruction": recon,
        "outcome": {"code": code, "label": OUTCOME_LABELS.get(code, "unscored")},
        "runtime": {"generated_at": _dt.datetime.now(_dt.timezone.utc).isoformat(),
                    "wall_seconds": time.perf_counter() - started, "samples": len(samples)},
    }


def _write_outputs(out_dir, report: dict, run: DiagnosisRun, samples=None) -> None:
    os.makedirs(out_dir, exist_ok=True)
    if samples is not None:
        record(samples, os.path.join(out_dir, "telemetry.csv"))
    write_csv(os.path.join(out_dir, "residuals.csv"), RESIDUAL_LOG_HEADER, run.residual_rows)
    write_csv(os.path.join(out_dir, "estimates.csv"), ESTIMATE_LOG_HEADER, run.estimate_rows)
    with open(os.path.join(out_dir, "report.json"), "w", encoding="utf-8") as fh:
        json.dump(report, fh, indent=2)
        fh.write("\n")


def simulate_scenario(config: ScenarioConfig):
    """Truth trajectory from the leak-free steady state at the t=0 boundary heads."""
    h_in, h_out = config.bc(0.0)
    x0 = steady_state_leak_free(config.params, h_in, h_out, config.grid)
    return simulate(x0, config.params, config.grid, config.bc, config.leaks, config.horizon,
                    config.dt, sample_every=config.sample_every, safety=config.safety)


def run_scenario(config: ScenarioConfig, out_dir=None) -> RunReport:
    """Simulate ``config`` and run the full diagnosis pipeline on it.

    Measurements are rounded to the telemetry number format before diagnosis
    so that replaying the recorded file reproduces the run exactly.
    """
    started = time.perf_counter()
    traj = simulate_scenario(config)
    samples = [quantize(s) for s in measure_trajectory(traj, config.faults, config.noise)]
    run = diagnose_stream(samples, config)
    report = _report(config, run, samples, started, "simulation")
    if out_dir is not None:
        _write_outputs(out_dir, report, run, samples)
    return RunReport(report, run, samples, traj)


def run_replay(telemetry, config: ScenarioConfig, out_dir=None, reconstruct: bool | None = None,
               score: bool = False) -> RunReport:
    """Diagnose a recorded telemetry file.

    The truth model is not simulated; ``config`` supplies the pipeline, the
    diagnosis settings and (when ``score``) the ground truth to grade against.
    """
    started = time.perf_counter()
    samples = replay(telemetry)
    if not samples:
        raise CalibrationError(f"{os.fspath(telemetry)}: telemetry file has no samples")
    run = diagnose_stream(samples, config, reconstruct)
    report = _report(config, run, samples, started, os.fspath(telemetry), truth=score)
    if out_dir is not None:
        _write_outputs(out_dir, report, run)
    return RunReport(report, run, samples)


def calibrate_telemetry(telemetry, config: ScenarioConfig, window: float | None = None) -> dict:
    """Threshold policy from the leading window of a recorded fault-free file."""
    samples = replay(telemetry)
    if not samples:
        raise CalibrationError(f"{os.fspath(telemetry)}: telemetry file has no samples")
    s = config.diagnosis
    span = s.calibration_time if window is None else window
    if span <= 0:
        raise ValidationError("calibration window must be > 0", field="window")
    t0 = samples[0].t
    win = [x for x in samples if x.t - t0 <= span + 1e-9]
    diag = Diagnoser(config.params, s)
    pol = diag.calibrate(win)
    return {"window": [win[0].t, win[-1].t], "samples": len(win), **pol.to_dict()}


def run_many(configs, out_root, jobs: int | None = None) -> list:
    """Run several named configs, one output subdirectory each, in parallel."""
    from concurrent.futures import ProcessPoolExecutor

    items = list(configs)
    labels = [label for label, _ in items]
    if len(set(labels)) != len(labels):
        raise UsageError("batch configs need distinct labels")
    with ProcessPoolExecutor(max_workers=jobs) as pool:
        futs = [pool.submit(_run_one, c, os.path.join(out_root, label)) for label, c in items]
        return [f.result() for f in futs]


def _run_one(config, out_dir):
    rep = run_scenario(config, out_dir)
    return rep.data
