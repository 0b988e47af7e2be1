"""Leak and sensor-fault diagnosis for a single pressurized pipeline.

A lumped water-hammer model, measurement and fault injection, a residual
bank with signature-based isolation, and high-gain observers that size the
isolated fault.
"""

from .config import ScenarioConfig, default_config
from .errors import (CalibrationError, ConfigurationError, HeadDomainError,
                     InfeasibleConfigurationError, ObserverDivergenceError, PipeFDIError,
                     SimulationError, TelemetryFormatError, UsageError, ValidationError)
from .hydraulics import (PILOT_VALVES, BoundaryHeads, FluidState, Grid, LeakSpec, PipelineParams,
                         StepHead, Trajectory, derive_coefficients, leak_outflow, pilot_grid,
                         pilot_pipeline, rhs, rk4_step, sigma_for_flow_loss, simulate,
                         steady_state_leak_free, steady_state_with_leak)
from .observers import (LeakObserver, ObserverConfig, dispatch_observer, flow_offset_gain,
                        leak_gain, pressure_gain)
from .residuals import (DiagnosisSettings, DiagnosisVerdict, Diagnoser, FaultSignatureMatrix,
                        ResidualFilterState, ResidualVector, ThresholdPolicy, calibrate,
                        compute_residuals, evaluate_signature, isolate_fault)
from .runner import (RunReport, calibrate_telemetry, diagnose_stream, run_replay,
                     run_scenario)
from .telemetry import (FaultScenario, MeasurementSample, NoiseModel, measure,
                        measure_trajectory, record, replay)

__all__ = [
    "BoundaryHeads",
    "CalibrationError",
    "ConfigurationError",
    "Diagnoser",
    "DiagnosisSettings",
    "DiagnosisVerdict",
    "FaultScenario",
    "FaultSignatureMatrix",
    "FluidState",
    "Grid",
    "HeadDomainError",
    "InfeasibleConfigurationError",
    "LeakObserver",
    "LeakSpec",
    "MeasurementSample",
    "NoiseModel",
    "ObserverConfig",
    "ObserverDivergenceError",
    "PILOT_VALVES",
    "PipeFDIError",
    "PipelineParams",
    "ResidualFilterState",
    "ResidualVector",
    "RunReport",
    "ScenarioConfig",
    "SimulationError",
    "StepHead",
    "TelemetryFormatError",
    "ThresholdPolicy",
    "Trajectory",
    "UsageError",
    "ValidationError",
    "calibrate",
    "calibrate_telemetry",
    "compute_residuals",
    "default_config",
    "derive_coefficients",
    "diagnose_stream",
    "dispatch_observer",
    "evaluate_signature",
    "flow_offset_gain",
    "isolate_fault",
    "leak_gain",
    "leak_outflow",
    "measure",
    "measure_trajectory",
    "pilot_grid",
    "pilot_pipeline",
    "pressure_gain",
    "record",
    "replay",
    "rhs",
    "rk4_step",
    "run_replay",
    "run_scenario",
    "sigma_for_flow_loss",
    "simulate",
    "steady_state_leak_free",
    "steady_state_with_leak",
]

__version__ = "0.1.0"
