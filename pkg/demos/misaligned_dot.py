"""
A dot rotated away from the gates
=================================

With the dot axis at 20 degrees the pure quadrupole can no longer remove the
splitting. Unequal gate pairs recover it.
"""
import numpy as np

from qdfss import DeviceSpec, Grid2D, QuadrupoleParam, minimize_fss, sweep_quadrupole
from qdfss.sweep import sweep_grid_asymmetric, matrix_to_csv, trace_to_csv

grid = Grid2D.for_device(DeviceSpec(), 512)

for theta in (0.0, 10.0, 20.0):
    spec = DeviceSpec(dot_axis_angle_theta=theta)
    sw = sweep_quadrupole(spec, grid, n_points=13, refine=False)
    best = sw.minimum()
    print(f"theta = {theta:4.1f} deg: lowest FSS {best.report.fss:.3f} ueV at v = {best.params['v']:.2f} V")

spec = DeviceSpec(dot_axis_angle_theta=20.0)

# coarse map of the asymmetric plane at v = 0.5 V
gs = sweep_grid_asymmetric(spec, grid, v_fixed=0.5, n_rl=5, n_tb=5)
np.set_printoptions(precision=2, suppress=True)
print("FSS (ueV), rows dV_RL, columns dV_TB")
print(gs.matrix("fss_ueV"))
matrix_to_csv(gs, "fss_ueV", "theta20_fss_matrix.csv")

res = minimize_fss(spec, grid, QuadrupoleParam(0.5, 0.095, 0.085),
                   bounds=[(0.35, 0.65), (0.0, 0.2), (0.0, 0.2)])
p = res.param
print(res.message, f"after {len(res.trace)} evaluations")
print(f"v = {p.v:.4f}  dV_RL = {p.delta_v_rl:.4f}  dV_TB = {p.delta_v_tb:.4f}")
print(f"FSS = {res.report.fss:.4f} ueV  beta = {res.report.beta:.4f}")
trace_to_csv(res.trace, "theta20_trace.csv")
