"""
Gate potential in the nanowire cross-section
============================================

Solve the electrostatics for the pure quadrupole configuration and look at
how little of the applied field reaches the dot.
"""
import numpy as np

from qdfss import DeviceSpec, Grid2D, QuadrupoleParam, build_material_map, superpose
from qdfss.fields import field_to_csv
from qdfss.poisson import interior_field_magnitude, shell_field_magnitude

spec = DeviceSpec()
grid = Grid2D.for_device(spec, 512)
print("grid spacing (nm):", grid.spacing)

# top/bottom negative, left/right positive
gates = QuadrupoleParam(0.5).to_gates()
print(gates)

phi = superpose(spec, grid, gates)
mmap = build_material_map(spec, grid)

# potential along the x axis through the centre
j0 = grid.ny // 2
for i in range(0, grid.nx, 32):
    print(f"x = {grid.x[i]:8.1f} nm   phi = {phi.values[i, j0]:+.4f} V")

dot = interior_field_magnitude(phi, mmap)
shell = shell_field_magnitude(phi, mmap)
print("mean |E| in dot   (V/nm):", dot.mean)
print("mean |E| in shell (V/nm):", shell.mean)
print("ratio:", shell.mean / dot.mean)

# the inner 60 nm is nearly a saddle: phi ~ c (x^2 - y^2)
X, Y = grid.mesh()
inner = X**2 + Y**2 < 30.0**2
c = np.linalg.lstsq((X**2 - Y**2)[inner][:, None], phi.values[inner], rcond=None)[0][0]
print("saddle curvature c (V/nm^2):", c)

field_to_csv(phi, "potential_quadrupole_0p5.csv")
