"""
Record a run, replay it, verify the commands
============================================

The controller makes every decision from sensed pressures and dead
reckoning, so a recorded run can be replayed against its own telemetry:
the replay backend serves the recorded pressures back and checks each
valve command against what was recorded.
"""

import os
import tempfile

from peristation import (
    ControlConfig,
    DetectionConfig,
    ObjectSpec,
    ObjectState,
    Plant,
    PlantParams,
    ReplayBackend,
    RingGeometry,
    SimulatedBackend,
    SurrogateMaterial,
    TelemetryWriter,
    build_station,
    calibrate_kappa,
    read_telemetry,
    run_station,
)

ring = RingGeometry(40.0, 25.0, 1.5, 12.0, 2.0, 28.8, 5)
material = SurrogateMaterial(100.0, 0.45, calibrate_kappa(ring, 100.0, 0.69, 15.0))
params = PlantParams()
layout = build_station(ring, 5, 20.0, 20.0)
spec = ObjectSpec(17.5, 75.0)

path = os.path.join(tempfile.mkdtemp(), "station.csv")

# live run, recorded tick by tick
plant = Plant(layout, ObjectState(spec, 0.0), params, material)
with TelemetryWriter(path) as recorder:
    live = run_station(SimulatedBackend(plant), layout, spec, 0.0, params,
                       DetectionConfig(), ControlConfig(), 120.0, recorder=recorder)
print(f"recorded {live.sim_time_s:.3f} s -> {path}")
print(f"live outcome: {live.outcome}, final z {live.final_z:.3f} mm")

# replay the same controller against the recording
samples = read_telemetry(path)
replay = ReplayBackend(samples, params.dt)
again = run_station(replay, layout, spec, 0.0, params,
                    DetectionConfig(), ControlConfig(), 120.0)

print(f"replay outcome: {again.outcome}, dead-reckoned z {again.final_z:.3f} mm")
print(f"rows: {len(samples)}, command mismatches: {replay.mismatches}")
