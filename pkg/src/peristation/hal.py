"""Hardware abstraction between the controller and any plant.

Two backends implement the same contract: SimulatedBackend drives the
in-process plant model, ReplayBackend plays a recorded telemetry file back
and verifies the controller issues the identical commands.  A physical
backend would slot in behind the same three operations.

The controller owns the backend and serializes all calls; sampling is
pull-based, once per tick.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Optional, Sequence

import numpy as np

from .plant import Plant, VALVE_MODES

READ_PRESSURE = "ReadPressure"
SET_VALVE = "SetValve"


@dataclass(frozen=True)
class HalEndpoint:
    module_id: int
    capabilities: frozenset


@dataclass(frozen=True)
class ValveCommand:
    module_id: int
    mode: str
    timestamp: float


class ReplayMismatchError(ValueError):
    """Controller command diverged from the recorded stream."""


class EndOfRecordingError(ValueError):
    """Replay queried past the last recorded sample."""


class SimulatedBackend:
    """HAL over the in-process plant.

    Sensor readings are the plant pressures plus optional zero-mean Gaussian
    noise, drawn once per module per tick in module order from a seeded
    generator, so a fixed seed reproduces the byte-identical sensed stream
    regardless of who reads what.
    """

    def __init__(self, plant: Plant):
        self.plant = plant
        self._ids = [m.id for m in plant.layout.modules]
        self._sigma = plant.params.noise_sigma
        self._rng = np.random.default_rng(plant.params.rng_seed)
        self._last_cmd_t = {i: -math.inf for i in self._ids}
        self._pending_events: list[tuple[int, str]] = []
        self._sensed = {}
        self._sample()

    def _sample(self) -> None:
        if self._sigma > 0.0:
            noise = self._rng.normal(0.0, self._sigma, len(self._ids))
            self._sensed = {
                mid: self.plant.pressure(mid) + noise[k] for k, mid in enumerate(self._ids)
            }
        else:
            self._sensed = {mid: self.plant.pressure(mid) for mid in self._ids}

    @property
    def now(self) -> float:
        return self.plant.time

    def endpoints(self) -> dict[int, HalEndpoint]:
        caps = frozenset((READ_PRESSURE, SET_VALVE))
        return {mid: HalEndpoint(mid, caps) for mid in self._ids}

    def read_pressure(self, module_id: int) -> tuple[float, float]:
        if module_id not in self._sensed:
            raise ValueError(f"no such endpoint: module {module_id}")
        return self._sensed[module_id], self.plant.time

    def set_valve(self, cmd: ValveCommand) -> bool:
        if cmd.module_id not in self._sensed:
            raise ValueError(f"no such endpoint: module {cmd.module_id}")
        if cmd.timestamp < self._last_cmd_t[cmd.module_id]:
            raise ValueError(
                f"command timestamps must be non-decreasing per module "
                f"(module {cmd.module_id}: {cmd.timestamp} < {self._last_cmd_t[cmd.module_id]})"
            )
        self._last_cmd_t[cmd.module_id] = cmd.timestamp
        self.plant.set_valve(cmd.module_id, cmd.mode)
        return True

    def tick(self, dt: float) -> float:
        if dt <= 0:
            raise ValueError(f"dt must be > 0, got {dt}")
        if abs(dt - self.plant.params.dt) > 1e-12:
            raise ValueError(
                f"simulated backend steps at fixed dt={self.plant.params.dt}, got {dt}"
            )
        self._pending_events.extend(self.plant.step())
        self._sample()
        return self.plant.time

    def drain_events(self) -> list[tuple[int, str]]:
        out = self._pending_events
        self._pending_events = []
        return out


class ReplayBackend:
    """HAL over a recorded telemetry stream.

    read_pressure returns the recorded sensed pressure for the current tick;
    set_valve verifies the command matches the recording and raises
    ReplayMismatchError naming both modes if it does not.  tick advances to
    the next recorded instant and raises EndOfRecordingError past the end.
    """

    def __init__(self, samples: Sequence, dt: float):
        if dt <= 0:
            raise ValueError(f"dt must be > 0, got {dt}")
        self.dt = dt
        self.mismatches = 0
        self._last_cmd_t: dict[int, float] = {}
        # index rows by tick: _ticks[k] = {module_id: (pressure, valve)}
        self._ticks: list[dict[int, tuple[float, str]]] = []
        self._times: list[float] = []
        current_t = None
        for s in samples:
            if s.module_id == 0:
                continue  # station-level event rows carry no endpoint data
            if current_t is None or s.time_s > current_t:
                current_t = s.time_s
                self._ticks.append({})
                self._times.append(s.time_s)
            self._ticks[-1][s.module_id] = (s.pressure_kPa, s.valve)
        if not self._ticks:
            raise ValueError("recording contains no module samples")
        self._ids = sorted(self._ticks[0].keys())
        self._k = 0

    @property
    def now(self) -> float:
        if self._k >= len(self._times):
            raise EndOfRecordingError("end of recording")
        return self._times[self._k]

    def endpoints(self) -> dict[int, HalEndpoint]:
        caps = frozenset((READ_PRESSURE, SET_VALVE))
        return {mid: HalEndpoint(mid, caps) for mid in self._ids}

    def read_pressure(self, module_id: int) -> tuple[float, float]:
        if self._k >= len(self._ticks):
            raise EndOfRecordingError("end of recording")
        row = self._ticks[self._k]
        if module_id not in row:
            raise ValueError(f"no such endpoint: module {module_id}")
        return row[module_id][0], self._times[self._k]

    def set_valve(self, cmd: ValveCommand) -> bool:
        if self._k >= len(self._ticks):
            raise EndOfRecordingError("end of recording")
        row = self._ticks[self._k]
        if cmd.module_id not in row:
            raise ValueError(f"no such endpoint: module {cmd.module_id}")
        if cmd.mode not in VALVE_MODES:
            raise ValueError(f"unknown valve mode {cmd.mode!r}")
        last = self._last_cmd_t.get(cmd.module_id, -math.inf)
        if cmd.timestamp < last:
            raise ValueError(
                f"command timestamps must be non-decreasing per module "
                f"(module {cmd.module_id}: {cmd.timestamp} < {last})"
            )
        self._last_cmd_t[cmd.module_id] = cmd.timestamp
        recorded = row[cmd.module_id][1]
        if recorded != cmd.mode:
            self.mismatches += 1
            raise ReplayMismatchError(
                f"command diverges from recording: module {cmd.module_id} "
                f"sent {cmd.mode}, recorded {recorded}"
            )
        return True

    def tick(self, dt: float) -> float:
        if dt <= 0:
            raise ValueError(f"dt must be > 0, got {dt}")
        if self._k + 1 >= len(self._ticks):
            self._k = len(self._ticks)
            raise EndOfRecordingError("end of recording")
        self._k += 1
        return self._times[self._k]

    def drain_events(self) -> list[tuple[int, str]]:
        return []
