"""
Electron and hole ground states under a quadrupole bias
=======================================================

Compare single-particle elongation for the two quadrupole polarities. The
heavy hole reacts much more strongly than the electron.
"""
from qdfss import DeviceSpec, Grid2D, QuadrupoleParam, solve_carriers
from qdfss.excitonics import moments_fit
from qdfss.fields import field_to_csv

spec = DeviceSpec()
grid = Grid2D.for_device(spec, 512)

print(f"{'v (V)':>7} {'E_e (eV)':>10} {'E_h (eV)':>10} {'eps_e':>7} {'eps_h':>7}")
for v in (-0.5, 0.0, 0.7):
    states = solve_carriers(spec, grid, QuadrupoleParam(v).to_gates())
    me = moments_fit(states.electron.wavefunction)
    mh = moments_fit(states.hole.wavefunction)
    print(f"{v:7.2f} {states.electron.energy:10.5f} {states.hole.energy:10.5f} "
          f"{me.elongation:7.3f} {mh.elongation:7.3f}")

    tag = f"{v:+.1f}".replace(".", "p")
    field_to_csv(states.electron.wavefunction.density(), f"psi2_e_{tag}.csv")
    field_to_csv(states.hole.wavefunction.density(), f"psi2_h_{tag}.csv")

# elongation is sigma_x / sigma_y in the gate frame: > 1 means stretched along x
