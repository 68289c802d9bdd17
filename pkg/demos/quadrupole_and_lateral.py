"""
Tuning the splitting to zero
============================

Sweep the quadrupole and the single lateral gate. Both reach zero splitting,
but only the quadrupole keeps the electron and hole on top of each other.
"""
from qdfss import DeviceSpec, Grid2D, sweep_lateral, sweep_quadrupole
from qdfss.sweep import records_to_csv

spec = DeviceSpec()
grid = Grid2D.for_device(spec, 512)

quad = sweep_quadrupole(spec, grid, v_range=(-0.5, 0.7), n_points=13)
print("quadrupole sweep")
for r in quad.records:
    print(f"  v = {r.params['v']:+.2f} V  FSS = {r.report.fss:7.3f} ueV  beta = {r.report.beta:.4f}")
for c in quad.crossings:
    print(f"  zero at v = {c.root:.4f} V, beta = {c.report.beta:.4f}")

lat = sweep_lateral(spec, grid, v_range=(0.0, 0.4), n_points=9)
print("lateral sweep")
for r in lat.records:
    print(f"  v = {r.params['v']:+.2f} V  FSS = {r.report.fss:7.3f} ueV  beta = {r.report.beta:.4f}")
for c in lat.crossings:
    print(f"  zero at v = {c.root:.4f} V, beta = {c.report.beta:.4f}")

records_to_csv(quad.records, "quadrupole.csv")
records_to_csv(lat.records, "lateral.csv")
