"""Closed-loop station controller.

Feedback is pressure only, matching the hardware contract: phases gate on
inflated/deflated thresholds, contact is inferred from the pressure-rate
ratio against a per-module baseline, and object position is dead reckoned
from completed strokes.  Nothing here reads plant ground truth, so the same
controller runs identically against the simulated and replay backends.

Two layers:
  - grasp / transport_cycle / calibrate_baseline: blocking single-purpose
    schedules that drive a backend to completion.
  - StationController + run_station: the tick-driven phase machine with
    probe scheduling, multi-level promotion, and termination handling.
"""

from __future__ import annotations

from dataclasses import dataclass, field, replace
from typing import Callable, Optional, Sequence

import numpy as np

from .hal import ValveCommand
from .plant import (
    COMPRESSION,
    DEFLATE,
    HOLD,
    INFLATE,
    LONGITUDINAL_STROKE_FRACTION,
    PlantParams,
    StationLayout,
    ObjectSpec,
)

GRASP = "Grasp"
ADVANCE_RELEASE = "AdvanceRelease"
REGRASP_BOTTOM = "RegraspBottom"
RESET_TOP = "ResetTop"
PHASES = (GRASP, ADVANCE_RELEASE, REGRASP_BOTTOM, RESET_TOP)


class ControlFaultError(RuntimeError):
    """A blocking schedule hit a fault condition (timeout, lost object)."""


class CalibrationError(ValueError):
    """Baseline measurement rejected (residual object contact)."""


@dataclass(frozen=True)
class ControlPhase:
    level: int
    phase: str
    phase_elapsed: float


@dataclass(frozen=True)
class DetectionConfig:
    """Parameters of pressure-rate contact detection.

    The slope is regressed strictly after the uninformative before-contact
    interval, and samples at or beyond saturation_fraction * P_max are cut
    so a saturating chamber cannot flatten the measured rate.
    """

    window_start: float = 1.5  # s after inflation onset
    window_len: float = 1.0  # s
    threshold_ratio_theta: float = 1.5
    consecutive_required: int = 2
    min_window_samples: int = 8
    saturation_fraction: float = 0.98
    baseline_rates: dict = field(default_factory=dict)

    def __post_init__(self):
        if self.window_start < 0:
            raise ValueError(f"window_start must be >= 0, got {self.window_start}")
        if self.window_len <= 0:
            raise ValueError(f"window_len must be > 0, got {self.window_len}")
        if self.threshold_ratio_theta <= 1:
            raise ValueError(f"threshold_ratio_theta must be > 1, got {self.threshold_ratio_theta}")
        if self.consecutive_required < 1:
            raise ValueError("consecutive_required must be >= 1")


@dataclass(frozen=True)
class DetectionResult:
    module_id: int
    measured_rate: float
    baseline: float
    ratio: float
    contact: bool


@dataclass(frozen=True)
class ControlConfig:
    phase_timeout_s: float = 10.0
    inflated_fraction: float = 0.95
    deflated_threshold_kPa: float = 0.5
    max_cycles: int = 0  # 0 = no overall cycle budget
    max_cycles_per_level: int = 20  # promotion patience while a probe exists

    def __post_init__(self):
        if self.phase_timeout_s <= 0:
            raise ValueError("phase_timeout_s must be > 0")
        if not 0 < self.inflated_fraction <= 1:
            raise ValueError("inflated_fraction must be in (0, 1]")
        if self.deflated_threshold_kPa < 0:
            raise ValueError("deflated_threshold_kPa must be >= 0")


@dataclass(frozen=True)
class RunResult:
    outcome: str
    cycles: int
    detections: tuple
    faults: tuple
    final_z: float
    sim_time_s: float
    events: tuple  # (time_s, module_id, text), totally ordered

    @property
    def positive_detections(self) -> int:
        return sum(1 for d in self.detections if d.contact)


def _window_slope(trace: Sequence[tuple[float, float]], config: DetectionConfig, p_max: float):
    """Least-squares pressure slope over the detection window.

    Returns (slope, samples_used).  Raises ValueError when the trace does
    not cover the window or saturation leaves too few samples.
    """
    w0 = config.window_start
    w1 = w0 + config.window_len
    if not trace or trace[-1][0] < w1:
        raise ValueError(
            f"insufficient trace: window [{w0}, {w1}] s not covered "
            f"(trace ends at {trace[-1][0]:.3f} s)" if trace else "insufficient trace: empty"
        )
    cutoff = config.saturation_fraction * p_max
    ts, ps = [], []
    for tau, p in trace:
        if tau < w0:
            continue
        if tau > w1 or p >= cutoff:
            break
        ts.append(tau)
        ps.append(p)
    if len(ts) < config.min_window_samples:
        raise ValueError(
            f"insufficient trace: only {len(ts)} usable samples in the window "
            f"(saturation cutoff {cutoff:.3f} kPa)"
        )
    slope = float(np.polyfit(np.asarray(ts), np.asarray(ps), 1)[0])
    return slope, len(ts)


def detect_contact(
    module_id: int,
    trace: Sequence[tuple[float, float]],
    config: DetectionConfig,
    p_max: float,
) -> DetectionResult:
    """Classify one probe inflation trace against the module's baseline.

    trace is (seconds since inflation onset, sensed kPa) pairs.  Deterministic
    for a given trace.

    Raises:
        ValueError: no baseline for the module, or the window is not covered.
    """
    baseline = config.baseline_rates.get(module_id)
    if baseline is None:
        raise ValueError(f"no baseline for module {module_id}")
    rate, _ = _window_slope(trace, config, p_max)
    ratio = rate / baseline
    return DetectionResult(module_id, rate, baseline, ratio, ratio >= config.threshold_ratio_theta)


# -- blocking schedules ------------------------------------------------------


def _triple_ids(layout: StationLayout, level: int) -> tuple[int, int, int]:
    b = 2 * level + 1
    if b + 2 > len(layout.modules):
        raise ValueError(f"station has no level-{level} (C, L, C) triple")
    return b, b + 1, b + 2


def _wait_gate(backend, params: PlantParams, module_id: int, ok: Callable[[float], bool],
               timeout: float, describe: str) -> None:
    deadline = backend.now + timeout
    while True:
        p, _ = backend.read_pressure(module_id)
        if ok(p):
            return
        if backend.now >= deadline:
            raise ControlFaultError(f"timeout: module {module_id} stalled {describe}")
        backend.tick(params.dt)


def grasp(backend, layout: StationLayout, level: int, params: PlantParams,
          control: Optional[ControlConfig] = None, log: Optional[list] = None) -> list:
    """Inflate the level's bottom and top compression rings until both grip.

    Completion is pressure-defined: both rings at or above the inflated
    gate.  Emits a "grasped" event; raises ControlFaultError naming the
    stalled module on timeout.
    """
    ctl = control or ControlConfig()
    b, _, t = _triple_ids(layout, level)
    gate = ctl.inflated_fraction * params.P_max
    events = log if log is not None else []
    backend.set_valve(ValveCommand(b, INFLATE, backend.now))
    backend.set_valve(ValveCommand(t, INFLATE, backend.now))
    deadline = backend.now + ctl.phase_timeout_s
    while True:
        pb, _ = backend.read_pressure(b)
        pt, _ = backend.read_pressure(t)
        if pb >= gate and pt >= gate:
            events.append((backend.now, 0, f"grasped level={level}"))
            return events
        if backend.now >= deadline:
            stalled = b if pb < gate else t
            raise ControlFaultError(
                f"timeout in grasp: module {stalled} stalled below {gate:.2f} kPa"
            )
        backend.tick(params.dt)


def transport_cycle(backend, layout: StationLayout, level: int, params: PlantParams,
                    control: Optional[ControlConfig] = None, log: Optional[list] = None) -> list:
    """Run one grasped-to-grasped transport cycle at the given level.

    Sub-phases in order, each gated on pressure: release the bottom ring and
    stroke the longitudinal ring upward; re-grasp at the bottom and release
    the top; reset the stroke and re-grasp the top.  At least one compression
    ring is commanded to grip at every instant.
    """
    ctl = control or ControlConfig()
    b, m, t = _triple_ids(layout, level)
    hi = ctl.inflated_fraction * params.P_max
    lo = ctl.deflated_threshold_kPa
    timeout = ctl.phase_timeout_s
    events = log if log is not None else []

    def cmd(mid: int, mode: str) -> None:
        backend.set_valve(ValveCommand(mid, mode, backend.now))

    # advance: hand the object to the top ring and stroke upward
    cmd(b, DEFLATE)
    _wait_gate(backend, params, b, lambda p: p <= lo, timeout, "deflating for release")
    cmd(m, INFLATE)
    _wait_gate(backend, params, m, lambda p: p >= hi, timeout, "inflating the stroke")
    events.append((backend.now, 0, f"advanced level={level}"))

    # re-grasp below, release above
    cmd(b, INFLATE)
    _wait_gate(backend, params, b, lambda p: p >= hi, timeout, "re-grasping at the bottom")
    cmd(t, DEFLATE)
    _wait_gate(backend, params, t, lambda p: p <= lo, timeout, "releasing the top")

    # reset the stroke, re-grasp the top
    cmd(m, DEFLATE)
    _wait_gate(backend, params, m, lambda p: p <= lo, timeout, "resetting the stroke")
    cmd(t, INFLATE)
    _wait_gate(backend, params, t, lambda p: p >= hi, timeout, "re-grasping the top")
    events.append((backend.now, 0, f"cycle complete level={level}"))
    return events


def calibrate_baseline(backend, module_id: int, params: PlantParams,
                       detection: DetectionConfig, control: Optional[ControlConfig] = None,
                       log: Optional[list] = None) -> float:
    """Measure one ring's free-inflation pressure slope (kPa/s).

    Vents the ring, inflates it through the detection window, regresses the
    slope, and vents back.  The caller must ensure no object sits in the
    ring's span; a slope above theta times the free rate is rejected as
    contaminated.
    """
    ctl = control or ControlConfig()
    lo = ctl.deflated_threshold_kPa

    def cmd(mode: str) -> None:
        backend.set_valve(ValveCommand(module_id, mode, backend.now))

    p, _ = backend.read_pressure(module_id)
    if p > lo:
        cmd(DEFLATE)
        _wait_gate(backend, params, module_id, lambda q: q <= lo,
                   ctl.phase_timeout_s, "venting before calibration")

    cmd(INFLATE)
    t0 = backend.now
    w_end = detection.window_start + detection.window_len
    trace = []
    while backend.now - t0 <= w_end + params.dt:
        pr, _ = backend.read_pressure(module_id)
        trace.append((backend.now - t0, pr))
        backend.tick(params.dt)
    slope, _ = _window_slope(trace, detection, params.P_max)

    cmd(DEFLATE)
    _wait_gate(backend, params, module_id, lambda q: q <= lo,
               ctl.phase_timeout_s, "venting after calibration")
    cmd(HOLD)

    if slope > detection.threshold_ratio_theta * params.k_free:
        raise CalibrationError(
            f"calibration contaminated: module {module_id} slope {slope:.3f} kPa/s "
            f"exceeds {detection.threshold_ratio_theta} x free rate {params.k_free} kPa/s"
        )
    if log is not None:
        log.append((backend.now, module_id, f"calibrated module={module_id} rate={slope:.6f}"))
    return slope


# -- tick-driven phase machine ------------------------------------------------


class StationController:
    """Phase machine for one station, advanced once per tick by update().

    Design rules:
      - update() owns all transitions; at most one gate fires per tick.
      - Valve commands persist across phases; update() returns only the
        entries that changed this tick.
      - Decisions use sensed pressures and dead-reckoned object position
        only, so simulated and replayed runs take identical paths.

    The working unit at level k is modules (2k+1, 2k+2, 2k+3).  While a
    probe ring (2k+5) exists, it co-inflates during the initial grasp and
    during every top re-grasp; after consecutive_required positive
    detections the next (L, C) pair is promoted into the working unit at
    the end of the cycle.
    """

    def __init__(self, layout: StationLayout, object_spec: Optional[ObjectSpec],
                 initial_z: float, params: PlantParams, detection: DetectionConfig,
                 control: ControlConfig):
        if len(layout.modules) < 3:
            raise ValueError("station needs at least one (C, L, C) triple")
        self.layout = layout
        self.params = params
        self.ctl = control
        self.obj = object_spec
        self.z_est = initial_z
        self.gate_hi = control.inflated_fraction * params.P_max
        self.gate_lo = control.deflated_threshold_kPa

        baselines = dict(detection.baseline_rates)
        for mod in layout.modules:
            if mod.kind == COMPRESSION:
                baselines.setdefault(mod.id, params.k_free)
        self.det = replace(detection, baseline_rates=baselines)

        self.valves = {mod.id: HOLD for mod in layout.modules}
        self._changed: dict[int, str] = {}
        self.level = 0
        self.phase = GRASP
        self.stage = 0
        self.phase_start = 0.0
        self.now = 0.0
        self.cycles = 0
        self.cycles_at_level = 0
        self.consec = 0
        self._promote = False
        self._initial = True
        self._entered = False
        self.detections: list[DetectionResult] = []
        self.faults: list[str] = []
        self._events: list[tuple[int, str]] = []
        self.done = False
        self.outcome: Optional[str] = None
        self._probe_id: Optional[int] = None
        self._probe_t0 = 0.0
        self._probe_trace: Optional[list] = None
        self._probe_done = True

    # -- small helpers -------------------------------------------------------

    def _triple(self) -> tuple[int, int, int]:
        return _triple_ids(self.layout, self.level)

    def _probe_for_level(self) -> Optional[int]:
        pid = 2 * self.level + 5
        return pid if pid <= len(self.layout.modules) else None

    def _stroke(self) -> float:
        mid = 2 * self.level + 2
        return LONGITUDINAL_STROKE_FRACTION * self.layout.module(mid).height_h

    def _rest_span(self, module_id: int) -> tuple[float, float]:
        mod = self.layout.module(module_id)
        return mod.z_origin, mod.z_origin + mod.height_h

    def _set(self, module_id: int, mode: str) -> None:
        if self.valves[module_id] != mode:
            self.valves[module_id] = mode
            self._changed[module_id] = mode

    def _emit(self, module_id: int, text: str) -> None:
        self._events.append((module_id, text))

    def phase_state(self) -> ControlPhase:
        return ControlPhase(self.level, self.phase, self.now - self.phase_start)

    def phase_label(self) -> str:
        return f"L{self.level}:{self.phase}"

    def take_events(self) -> list[tuple[int, str]]:
        out = self._events
        self._events = []
        return out

    # -- lifecycle -----------------------------------------------------------

    def update(self, now: float, sensed: dict[int, float],
               plant_events: Sequence[tuple[int, str]] = ()) -> dict[int, str]:
        """One controller tick: ingest events and pressures, emit changed valves."""
        self._changed = {}
        if self.done:
            return {}
        self.now = now
        for mid, text in plant_events:
            self._emit(mid, text)
            if text.startswith("drop"):
                self._fault(f"object lost at phase {self.phase_label()}")
                return dict(self._changed)
        if not self._entered:
            self._entered = True
            for mid, rate in sorted(self.det.baseline_rates.items()):
                self._emit(mid, f"baseline module={mid} rate={rate:.6f}")
            self._enter_phase(GRASP)
        self._probe_step(sensed)
        if not self.done:
            self._check_gate(sensed)
        return dict(self._changed)

    def finish(self, outcome: str) -> None:
        if not self.done:
            self.done = True
            self.outcome = outcome
            self._emit(0, f"outcome={outcome}")

    def _fault(self, text: str) -> None:
        self.faults.append(text)
        self._emit(0, f"fault {text}")
        self.done = True
        self.outcome = "fault"

    # -- probe ----------------------------------------------------------------

    def _probe_begin(self) -> None:
        pid = self._probe_for_level()
        if pid is None:
            return
        self._probe_id = pid
        self._probe_t0 = self.now
        self._probe_trace = []
        self._probe_done = False
        self._set(pid, INFLATE)

    def _probe_step(self, sensed: dict[int, float]) -> None:
        if self._probe_done:
            return
        tau = self.now - self._probe_t0
        self._probe_trace.append((tau, sensed[self._probe_id]))
        if tau < self.det.window_start + self.det.window_len:
            return
        self._probe_done = True
        pid = self._probe_id
        try:
            res = detect_contact(pid, self._probe_trace, self.det, self.params.P_max)
        except ValueError:
            self._emit(pid, f"detection aborted module={pid} reason=insufficient-trace")
            self.consec = 0
            self._set(pid, DEFLATE)
            return
        self.detections.append(res)
        self._emit(pid, (
            f"detection module={pid} rate={res.measured_rate:.6f} "
            f"baseline={res.baseline:.6f} ratio={res.ratio:.6f} "
            f"contact={1 if res.contact else 0}"
        ))
        if res.contact:
            self.consec += 1
            if self.consec >= self.det.consecutive_required:
                self._promote = True
        else:
            self.consec = 0
        # measurement over; the promoted unit re-establishes grip in Grasp
        self._set(pid, DEFLATE)

    # -- phase machine --------------------------------------------------------

    def _enter_phase(self, phase: str) -> None:
        self.phase = phase
        self.stage = 0
        self.phase_start = self.now
        b, m, t = self._triple()
        if phase == GRASP:
            self._set(b, INFLATE)
            self._set(t, INFLATE)
            if self._initial:
                self._probe_begin()
        elif phase == ADVANCE_RELEASE:
            self._set(b, DEFLATE)
        elif phase == REGRASP_BOTTOM:
            self._set(b, INFLATE)
        elif phase == RESET_TOP:
            self._set(m, DEFLATE)

    def _advance_stage(self) -> None:
        b, m, t = self._triple()
        self.stage = 1
        if self.phase == ADVANCE_RELEASE:
            self._set(m, INFLATE)
        elif self.phase == REGRASP_BOTTOM:
            self._set(t, DEFLATE)
        elif self.phase == RESET_TOP:
            self._set(t, INFLATE)
            self._probe_begin()

    def _stalled_module(self, sensed: dict[int, float]) -> int:
        b, m, t = self._triple()
        if self.phase == GRASP:
            return b if sensed[b] < self.gate_hi else t
        if self.phase == ADVANCE_RELEASE:
            return b if self.stage == 0 else m
        if self.phase == REGRASP_BOTTOM:
            return b if self.stage == 0 else t
        return m if self.stage == 0 else t

    def _check_gate(self, sensed: dict[int, float]) -> None:
        if self.now - self.phase_start > self.ctl.phase_timeout_s:
            stalled = self._stalled_module(sensed)
            self._fault(
                f"timeout in phase {self.phase_label()} stage {self.stage}: "
                f"module {stalled} stalled"
            )
            return
        b, m, t = self._triple()
        if self.phase == GRASP:
            if sensed[b] >= self.gate_hi and sensed[t] >= self.gate_hi:
                self._emit(0, f"grasped level={self.level}")
                self._initial = False
                if self.obj is not None and not self._regrasp_feasible(b):
                    outcome = (
                        "undetectable object" if self._probe_for_level() is not None
                        else "transport limit reached"
                    )
                    self.finish(outcome)
                    return
                self._enter_phase(ADVANCE_RELEASE)
        elif self.phase == ADVANCE_RELEASE:
            if self.stage == 0:
                if sensed[b] <= self.gate_lo:
                    self._advance_stage()
            elif sensed[m] >= self.gate_hi:
                self.z_est += self._stroke()
                self._enter_phase(REGRASP_BOTTOM)
        elif self.phase == REGRASP_BOTTOM:
            if self.stage == 0:
                if sensed[b] >= self.gate_hi:
                    self._advance_stage()
            elif sensed[t] <= self.gate_lo:
                self._enter_phase(RESET_TOP)
        elif self.phase == RESET_TOP:
            if self.stage == 0:
                if sensed[m] <= self.gate_lo:
                    self._advance_stage()
            elif sensed[t] >= self.gate_hi:
                self._cycle_complete()

    def _regrasp_feasible(self, bottom_id: int) -> bool:
        """After one more stroke, can the bottom ring still reach the object?"""
        lo, hi = self._rest_span(bottom_id)
        nz = self.z_est + self._stroke()
        return nz < hi and nz + self.obj.length_L_o > lo

    def _cycle_complete(self) -> None:
        self.cycles += 1
        self.cycles_at_level += 1
        self._emit(0, f"cycle={self.cycles} complete level={self.level} z_est={self.z_est:.6f}")
        if self._promote:
            self._promote = False
            old_b, old_m, _ = self._triple()
            self._set(old_b, DEFLATE)
            self._set(old_m, DEFLATE)
            # the probe ring is the incoming top grasp; abandon any
            # in-flight measurement on it rather than venting it later
            self._probe_done = True
            self.level += 1
            self.cycles_at_level = 0
            self.consec = 0
            self._emit(0, f"promoted level={self.level}")
        if self.obj is not None and self.z_est + self.obj.length_L_o > self.layout.station_top:
            self.finish("object exited")
            return
        if self.ctl.max_cycles and self.cycles >= self.ctl.max_cycles:
            self.finish("cycle budget reached")
            return
        if (self._probe_for_level() is not None
                and self.cycles_at_level >= self.ctl.max_cycles_per_level):
            self._fault(
                f"object never detected at level {self.level} "
                f"after {self.cycles_at_level} cycles"
            )
            return
        self._enter_phase(GRASP)


def run_station(backend, layout: StationLayout, object_spec: Optional[ObjectSpec],
                initial_z: float, params: PlantParams, detection: DetectionConfig,
                control: ControlConfig, duration_s: float, recorder=None) -> RunResult:
    """Drive the phase machine against a backend for at most duration_s.

    Terminates early when the object's top clears the station, transport
    can no longer re-grasp, a cycle budget runs out, or a fault occurs.
    Returns the totally ordered event log and final object position (plant
    ground truth when the backend exposes it, dead reckoning otherwise).
    """
    if duration_s <= 0:
        raise ValueError(f"duration_s must be > 0, got {duration_s}")
    controller = StationController(layout, object_spec, initial_z, params, detection, control)
    dt = params.dt
    n_steps = int(round(duration_s / dt))
    ids = [mod.id for mod in layout.modules]
    plant = getattr(backend, "plant", None)
    events_log: list[tuple[float, int, str]] = []
    plant_events: list[tuple[int, str]] = []
    now = 0.0
    for k in range(n_steps + 1):
        now = k * dt
        sensed = {mid: backend.read_pressure(mid)[0] for mid in ids}
        changed = controller.update(now, sensed, plant_events)
        plant_events = []
        if k == n_steps and not controller.done:
            controller.finish("duration limit reached")
        for mid in sorted(changed):
            backend.set_valve(ValveCommand(mid, changed[mid], now))
        tick_events = controller.take_events()
        for mid, text in tick_events:
            events_log.append((now, mid, text))
        if recorder is not None:
            recorder.record(now, sensed, controller.valves, controller.phase_label(),
                            plant, tick_events)
        if controller.done:
            break
        backend.tick(dt)
        plant_events = backend.drain_events()

    if plant is not None and plant.object is not None:
        final_z = plant.object.z
    else:
        final_z = controller.z_est
    return RunResult(
        outcome=controller.outcome or "duration limit reached",
        cycles=controller.cycles,
        detections=tuple(controller.detections),
        faults=tuple(controller.faults),
        final_z=final_z,
        sim_time_s=now,
        events=tuple(events_log),
    )
