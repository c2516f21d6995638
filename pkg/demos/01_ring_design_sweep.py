"""
Ring geometry and the design sweep
==================================

Validates the nominal actuation ring, then sweeps chamber count, wall
thickness, and chamber spacing to see where normalized inflation d_c/r
peaks.
"""

from peristation import (
    RingGeometry,
    SurrogateMaterial,
    calibrate_kappa,
    surrogate_inflation,
    sweep,
    validate_geometry,
)

# the nominal ring: R=40, r=25, five 28.8 mm chambers spaced 12 mm apart
ring = RingGeometry(
    outer_radius_R=40.0,
    inner_radius_r=25.0,
    step_height_m=1.5,
    chamber_spacing_l=12.0,
    wall_thickness_t=2.0,
    chamber_length_s=28.8,
    chamber_count_N=5,
)

report = validate_geometry(ring)
print("nominal ring valid:", report.passed)

# pin the inflation law so the nominal ring reaches d_c/r = 0.69 at 15 kPa
kappa = calibrate_kappa(ring, youngs_modulus_E=100.0, target_ratio=0.69, pressure_P=15.0)
material = SurrogateMaterial(100.0, 0.45, kappa)
print(f"calibrated kappa = {kappa:.4f}")
print(f"inflation at 15 kPa: d_c/r = {surrogate_inflation(ring, material, 15.0):.4f}")
print()

# sweep chamber count; each N re-solves the chamber length to pack the arc
result = sweep(ring, material, 15.0, "N", list(range(1, 11)))
print("N    d_c/r")
for n, d in result.samples:
    print(f"{n:<4} {'infeasible' if d is None else format(d, '.4f')}")
best_n, best_d = result.argmax()
print(f"argmax: N = {best_n} (d_c/r = {best_d:.4f})")
print()

# thinner walls inflate more, tighter packing inflates more
for param, values in (("t", [1.0, 2.0, 3.0, 4.0]), ("l", [6.0, 10.0, 14.0, 18.0])):
    result = sweep(ring, material, 15.0, param, values)
    row = "  ".join(f"{v:g}:{d:.4f}" for v, d in result.samples)
    print(f"{param} sweep  {row}")
