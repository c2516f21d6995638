"""
Closed-loop multi-level transport
=================================

Runs the full tick-driven controller on a five-module station.  The
working triple carries the object upward while the ring above probes for
it; two consecutive positive detections promote the working unit one
level, and the run ends when the object's top clears the station.
"""

from peristation import (
    ControlConfig,
    DetectionConfig,
    ObjectSpec,
    ObjectState,
    Plant,
    PlantParams,
    RingGeometry,
    SimulatedBackend,
    SurrogateMaterial,
    build_station,
    calibrate_kappa,
    run_station,
)

ring = RingGeometry(40.0, 25.0, 1.5, 12.0, 2.0, 28.8, 5)
material = SurrogateMaterial(100.0, 0.45, calibrate_kappa(ring, 100.0, 0.69, 15.0))
params = PlantParams()

layout = build_station(ring, 5, 20.0, 20.0)
spec = ObjectSpec(17.5, 75.0)  # r_o = 0.7 r, detectable
plant = Plant(layout, ObjectState(spec, 0.0), params, material)
backend = SimulatedBackend(plant)

result = run_station(backend, layout, spec, 0.0, params,
                     DetectionConfig(), ControlConfig(), duration_s=120.0)

print(f"outcome: {result.outcome}")
print(f"cycles: {result.cycles}, final z: {result.final_z:.3f} mm, "
      f"simulated {result.sim_time_s:.3f} s")
print()

print("probe detections:")
for d in result.detections:
    print(f"  module {d.module_id}: rate {d.measured_rate:.3f} kPa/s, "
          f"ratio {d.ratio:.3f}, contact={d.contact}")
print()

# the milestone events tell the story of the run
print("milestones:")
for t, _, text in result.events:
    if text.split("=")[0] in ("grasped level", "promoted level", "outcome") \
            or text.startswith("cycle="):
        print(f"  {t:9.3f} s  {text}")
