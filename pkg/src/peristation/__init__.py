"""Deterministic simulator of a stacked pneumatic transport station.

Rings of inflatable chambers grasp (Compression) and lift (Longitudinal)
an object through a vertical stack.  The package provides the geometry
model and design sweep, a fixed-step plant, a hardware abstraction with
simulated and replay backends, the closed-loop phase controller with
pressure-rate contact detection, and a CLI over all of it.
"""

from .geometry import (
    ARC_TOLERANCE,
    SWEEP_PARAMETERS,
    InfeasibleGeometryError,
    RingGeometry,
    SurrogateMaterial,
    SweepResult,
    ValidationReport,
    calibrate_kappa,
    solve_chamber_length,
    surrogate_inflation,
    sweep,
    uniformity_factor,
    validate_geometry,
)
from .plant import (
    COMPRESSION,
    DEFLATE,
    HOLD,
    INFLATE,
    LONGITUDINAL,
    LONGITUDINAL_STROKE_FRACTION,
    ChamberState,
    ModuleSpec,
    ObjectSpec,
    ObjectState,
    Plant,
    PlantParams,
    StationLayout,
    build_station,
    contact_check,
    inflation_of,
    pressure_rate,
    station_violations,
    step,
    time_to_contact,
)
from .hal import (
    READ_PRESSURE,
    SET_VALVE,
    EndOfRecordingError,
    HalEndpoint,
    ReplayBackend,
    ReplayMismatchError,
    SimulatedBackend,
    ValveCommand,
)
from .control import (
    ADVANCE_RELEASE,
    GRASP,
    PHASES,
    REGRASP_BOTTOM,
    RESET_TOP,
    CalibrationError,
    ControlConfig,
    ControlFaultError,
    ControlPhase,
    DetectionConfig,
    DetectionResult,
    RunResult,
    StationController,
    calibrate_baseline,
    detect_contact,
    grasp,
    run_station,
    transport_cycle,
)
from .telemetry import TELEMETRY_HEADER, TelemetrySample, TelemetryWriter, read_telemetry
from .config import (
    BASELINES_HEADER,
    ConfigError,
    RunConfig,
    load_baselines,
    load_config,
    write_baselines,
)

__version__ = "0.1.0"
