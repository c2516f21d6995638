"""
One transport cycle through the fundamental unit
================================================

The smallest working station is a (Compression, Longitudinal, Compression)
triple.  Grasp the object with both compression rings, then run one
release-stroke-regrasp cycle and watch the object climb one stroke.
"""

from peristation import (
    ObjectSpec,
    ObjectState,
    Plant,
    PlantParams,
    RingGeometry,
    SimulatedBackend,
    SurrogateMaterial,
    build_station,
    calibrate_kappa,
    grasp,
    transport_cycle,
)

ring = RingGeometry(40.0, 25.0, 1.5, 12.0, 2.0, 28.8, 5)
material = SurrogateMaterial(100.0, 0.45, calibrate_kappa(ring, 100.0, 0.69, 15.0))
params = PlantParams()

layout = build_station(ring, 3, 20.0, 20.0)
obj = ObjectState(ObjectSpec(17.5, 75.0), 0.0)
plant = Plant(layout, obj, params, material)
backend = SimulatedBackend(plant)

stroke = 0.3 * layout.module(2).height_h
print(f"station top {layout.station_top} mm, stroke {stroke} mm")
print(f"object starts at z = {plant.object.z} mm")

log = grasp(backend, layout, 0, params)
print(f"[{backend.now:.3f} s] grasped, supporters = {sorted(plant.object_state().supporters)}")

transport_cycle(backend, layout, 0, params, log=log)
print(f"[{backend.now:.3f} s] cycle complete, object at z = {plant.object.z} mm")

print()
print("schedule events:")
for t, _, text in log:
    print(f"  {t:9.3f} s  {text}")

drops = [text for _, text in backend.drain_events() if text.startswith("drop")]
print("drops:", len(drops))
