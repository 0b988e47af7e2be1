"""End-of-pipe measurements, sensor faults and the telemetry CSV format."""

from __future__ import annotations

import math
import os
from dataclasses import dataclass
from typing import Iterable, Iterator, Sequence

import numpy as np

from .errors import TelemetryFormatError, TelemetryOrderError, ValidationError
from .hydraulics import BoundaryHeads, FluidState, LeakSpec, Trajectory

SCENARIOS = ("E1", "E2", "E3", "E4", "E5")
# measured channel touched by each additive sensor/actuator fault
FAULT_CHANNEL = {"E1": "q_in", "E2": "q_out", "E3": "h_in", "E4": "h_out"}
CHANNELS = ("q_in", "q_out", "h_in", "h_out")
TELEMETRY_HEADER = ("t",) + CHANNELS
SIGNIFICANT_DIGITS = 12


def fmt(x: float) -> str:
    """Fixed CSV number format: 12 significant digits."""
    return format(x, f".{SIGNIFICANT_DIGITS}g")


@dataclass(frozen=True)
class FaultScenario:
    """One fault: an additive step offset (E1-E4) or a leak (E5).

    ``magnitude`` is in m^3/s for E1/E2, in m for E3/E4 and a
    :class:`LeakSpec` for E5 (whose own onset is then ``onset_time``).
    """

    kind: str
    magnitude: float | LeakSpec
    onset_time: float = 0.0

    def __post_init__(self):
        if self.kind not in SCENARIOS:
            raise ValidationError(f"unknown scenario {self.kind!r}", field="kind")
        if self.kind == "E5":
            if not isinstance(self.magnitude, LeakSpec):
                raise ValidationError("E5 needs a LeakSpec magnitude", field="magnitude")
            if self.magnitude.onset_time != self.onset_time:
                object.__setattr__(self, "magnitude", LeakSpec(
                    self.magnitude.position, self.magnitude.sigma, self.onset_time,
                    self.magnitude.opening_time))
        elif isinstance(self.magnitude, LeakSpec) or not math.isfinite(self.magnitude):
            raise ValidationError(f"{self.kind} needs a finite scalar offset", field="magnitude")

    @property
    def channel(self) -> str | None:
        return FAULT_CHANNEL.get(self.kind)

    @property
    def leak(self) -> LeakSpec | None:
        return self.magnitude if self.kind == "E5" else None

    def offset(self, t: float) -> float:
        """Additive offset on :attr:`channel` at time ``t`` (zero for E5)."""
        if self.kind == "E5" or t < self.onset_time:
            return 0.0
        return float(self.magnitude)

    def to_dict(self) -> dict:
        d = {"kind": self.kind, "onset": self.onset_time}
        if self.kind == "E5":
            lk = self.magnitude
            d.update(position=lk.position, sigma=lk.sigma, opening_time=lk.opening_time)
        else:
            d["magnitude"] = float(self.magnitude)
        return d


@dataclass(frozen=True)
class MeasurementSample:
    t: float
    q_in: float
    q_out: float
    h_in: float
    h_out: float

    def values(self) -> tuple:
        return (self.t, self.q_in, self.q_out, self.h_in, self.h_out)


@dataclass(frozen=True)
class NoiseModel:
    """Independent Gaussian noise per channel, drawn from a seeded PCG64 stream.

    Each sample consumes four standard normals in channel order
    ``q_in, q_out, h_in, h_out``.
    """

    flow_std: float = 0.0
    head_std: float = 0.0
    seed: int = 0

    def __post_init__(self):
        if self.flow_std < 0 or self.head_std < 0:
            raise ValidationError("noise std must be >= 0", field="flow_std")

    @property
    def silent(self) -> bool:
        return self.flow_std == 0 and self.head_std == 0

    def rng(self) -> np.random.Generator:
        return np.random.Generator(np.random.PCG64(self.seed))

    def scales(self) -> np.ndarray:
        return np.array([self.flow_std, self.flow_std, self.head_std, self.head_std])


def fault_offsets(faults: Iterable[FaultScenario], t: float) -> dict:
    out = dict.fromkeys(CHANNELS, 0.0)
    for f in faults:
        if f.channel is not None:
            out[f.channel] += f.offset(t)
    return out


def measure(true_state: FluidState, bc: BoundaryHeads | None, faults: Iterable[FaultScenario],
            noise: NoiseModel, t: float, rng: np.random.Generator | None = None) -> MeasurementSample:
    """Measured end values: true value + active fault offsets + noise.

    The true end heads come from ``bc`` at ``t`` (or from the state when
    ``bc`` is None).  Leaks only act through the state.  A noisy model needs
    ``rng`` so that successive samples continue one stream.
    """
    h_in, h_out = bc(t) if bc is not None else (true_state.h_in, true_state.h_out)
    off = fault_offsets(faults, t)
    vals = np.array([true_state.q_in + off["q_in"], true_state.q_out + off["q_out"],
                     h_in + off["h_in"], h_out + off["h_out"]])
    if not noise.silent:
        if rng is None:
            raise ValidationError("a noisy measurement needs an rng", field="rng")
        vals = vals + noise.scales() * rng.standard_normal(4)
    return MeasurementSample(float(t), *map(float, vals))


def measure_trajectory(traj: Trajectory, faults: Sequence[FaultScenario],
                       noise: NoiseModel) -> list:
    """Vectorized :func:`measure` over a trajectory with a fresh noise stream.

    Draws the same numbers in the same order as calling :func:`measure` once
    per sample with ``noise.rng()``.
    """
    t = traj.t
    data = np.column_stack([traj.flows[:, 0], traj.flows[:, -1],
                            traj.heads[:, 0], traj.heads[:, -1]]).astype(float)
    for f in faults:
        if f.channel is not None:
            col = CHANNELS.index(f.channel)
            data[t >= f.onset_time, col] += float(f.magnitude)
    if not noise.silent:
        data = data + noise.scales() * noise.rng().standard_normal((t.size, 4))
    return [MeasurementSample(float(ti), *map(float, row)) for ti, row in zip(t, data)]


def quantize(sample: MeasurementSample) -> MeasurementSample:
    """The sample exactly as it reads back from a telemetry file."""
    return MeasurementSample(*(float(fmt(v)) for v in sample.values()))


# ---------------------------------------------------------------------------
# CSV record / replay
# ---------------------------------------------------------------------------

def write_csv(path, header: Sequence[str], rows: Iterable[Sequence]) -> str:
    """Write rows with the fixed number format; strings are written verbatim."""
    path = os.fspath(path)
    with open(path, "w", encoding="utf-8", newline="") as fh:
        fh.write(",".join(header) + "\n")
        for row in rows:
            fh.write(",".join(v if isinstance(v, str) else fmt(v) for v in row) + "\n")
    return path


def record(samples: Iterable[MeasurementSample], destination) -> str:
    """Write a telemetry file ``t,q_in,q_out,h_in,h_out``; returns its path."""
    return write_csv(destination, TELEMETRY_HEADER, (s.values() for s in samples))


def iter_replay(source) -> Iterator[MeasurementSample]:
    with open(os.fspath(source), encoding="utf-8") as fh:
        header = fh.readline().strip()
        if tuple(header.split(",")) != TELEMETRY_HEADER:
            raise TelemetryFormatError(f"bad header {header!r}", line=1)
        last_t = -math.inf
        for lineno, line in enumerate(fh, start=2):
            line = line.strip()
            if not line:
                continue
            parts = line.split(",")
            if len(parts) != len(TELEMETRY_HEADER):
                raise TelemetryFormatError(f"expected 5 fields, got {len(parts)}", line=lineno)
            try:
                vals = [float(p) for p in parts]
            except ValueError as exc:
                raise TelemetryFormatError(str(exc), line=lineno) from None
            if not all(math.isfinite(v) for v in vals):
                raise TelemetryFormatError("non-finite value", line=lineno)
            if vals[0] < last_t:
                raise TelemetryOrderError(f"time goes backwards ({vals[0]} < {last_t})",
                                          line=lineno)
            last_t = vals[0]
            yield MeasurementSample(*vals)


def replay(source) -> list:
    """Read a telemetry file back into samples, in file order."""
    return list(iter_replay(source))
