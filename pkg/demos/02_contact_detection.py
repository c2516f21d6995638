"""
Pressure-rate contact detection
===============================

Inflating a compression ring against an object raises its pressure slope.
This probes one ring with a wide object (r_o = 0.7r) and a thin one
(r_o = 0.4r) and classifies both traces against the free-inflation
baseline.
"""

from peristation import (
    INFLATE,
    DetectionConfig,
    ObjectSpec,
    ObjectState,
    Plant,
    PlantParams,
    RingGeometry,
    SimulatedBackend,
    SurrogateMaterial,
    ValveCommand,
    build_station,
    calibrate_kappa,
    detect_contact,
    time_to_contact,
)

ring = RingGeometry(40.0, 25.0, 1.5, 12.0, 2.0, 28.8, 5)
material = SurrogateMaterial(100.0, 0.45, calibrate_kappa(ring, 100.0, 0.69, 15.0))
params = PlantParams()
layout = build_station(ring, 3, 20.0, 20.0)
detection = DetectionConfig(baseline_rates={1: params.k_free})

print(f"free rate {params.k_free} kPa/s, window "
      f"[{detection.window_start}, {detection.window_start + detection.window_len}] s, "
      f"threshold {detection.threshold_ratio_theta}x")
print(f"predicted contact time at 0.7r: {time_to_contact(0.7, params, ring, material):.3f} s")
print()

for ror in (0.7, 0.4):
    obj = ObjectState(ObjectSpec(ror * ring.inner_radius_r, 75.0), 0.0)
    backend = SimulatedBackend(Plant(layout, obj, params, material))

    # inflate ring 1 and record (time since onset, sensed pressure)
    backend.set_valve(ValveCommand(1, INFLATE, 0.0))
    trace = []
    while backend.now <= 2.6:
        trace.append((backend.now, backend.read_pressure(1)[0]))
        backend.tick(params.dt)

    result = detect_contact(1, trace, detection, params.P_max)
    print(f"r_o = {ror}r: slope {result.measured_rate:.3f} kPa/s, "
          f"ratio {result.ratio:.3f}, contact={result.contact}")
