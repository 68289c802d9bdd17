import numpy as np
import pytest

from qdfss.device import DeviceSpec, Grid2D, build_material_map
from qdfss.fields import ScalarField2D, field_to_csv
from qdfss.poisson import (
    ConvergenceError,
    GateVoltages,
    assemble_operator,
    interior_field_magnitude,
    shell_field_magnitude,
    solve_pinned,
    solve_poisson,
    superpose,
)

QUAD = GateVoltages(0.5, 0.5, -0.5, -0.5)


def mms_error(n, L=100.0):
    """Max error of the pinned-boundary solve against sin(pi x/L) sin(pi y/L)."""
    h = L / n
    x = (np.arange(n) + 0.5) * h
    X, Y = np.meshgrid(x, x, indexing="ij")
    exact = np.sin(np.pi * X / L) * np.sin(np.pi * Y / L)
    eps = 3.0
    source = eps * 2 * (np.pi / L) ** 2 * exact
    ring = np.zeros((n, n), dtype=bool)
    ring[0, :] = ring[-1, :] = ring[:, 0] = ring[:, -1] = True
    pinned = np.flatnonzero(ring)
    A = assemble_operator(np.full((n, n), eps), h)
    u = solve_pinned(A, source.ravel(), pinned, exact.ravel()[pinned], rtol=1e-10, maxiter=20000)
    return np.abs(u.reshape(n, n) - exact).max()


def test_manufactured_solution_second_order():
    errs = [mms_error(n) for n in (32, 64, 128)]
    orders = np.log2(np.array(errs[:-1]) / np.array(errs[1:]))
    assert np.all(orders >= 1.8), orders


@pytest.fixture(scope="module")
def circ():
    spec = DeviceSpec(dot_elongation=1.0)
    grid = Grid2D.for_device(spec, 256)
    return spec, grid, build_material_map(spec, grid)


@pytest.fixture(scope="module")
def default_map(spec, coarse_grid):
    return build_material_map(spec, coarse_grid)


def test_zero_input_gives_zero(default_map):
    phi = solve_poisson(default_map, GateVoltages())
    assert phi.kind == "potential"
    assert np.all(phi.values == 0.0)


def test_quadrupole_centre_is_zero(default_map):
    phi = solve_poisson(default_map, QUAD)
    n = default_map.grid.nx
    centre = phi.values[n // 2 - 1:n // 2 + 1, n // 2 - 1:n // 2 + 1].mean()
    assert abs(centre) < 1e-3


def test_gate_cells_pinned(default_map):
    from qdfss.device import gate_boundary_cells
    phi = solve_poisson(default_map, GateVoltages(0.1, 0.2, 0.3, 0.4)).values.ravel()
    cells = gate_boundary_cells(default_map.spec, default_map.grid)
    for name, v in zip(("top", "bottom", "left", "right"), (0.1, 0.2, 0.3, 0.4)):
        assert np.all(phi[cells[name]] == v)


def test_residual_meets_tolerance(default_map):
    from qdfss.device import gate_boundary_cells
    from qdfss.poisson import _poisson_operator

    phi = solve_poisson(default_map, QUAD, rtol=1e-8).values.ravel()
    A = _poisson_operator(default_map)
    cells = gate_boundary_cells(default_map.spec, default_map.grid)
    free = np.ones(phi.size, dtype=bool)
    for idx in cells.values():
        free[idx] = False
    pinned = ~free
    b = -A[free][:, pinned] @ phi[pinned]
    r = b - A[free][:, free] @ phi[free]
    assert np.linalg.norm(r) <= 1e-8 * np.linalg.norm(b) * (1 + 1e-9)


def test_linearity(default_map):
    a = solve_poisson(default_map, QUAD).values
    b = solve_poisson(default_map, QUAD.scaled(2.5)).values
    np.testing.assert_allclose(b, 2.5 * a, atol=1e-7)


def test_superposition(default_map):
    g1, g2 = GateVoltages(0.3, 0.0, -0.1, 0.2), GateVoltages(-0.2, 0.4, 0.0, 0.1)
    s = solve_poisson(default_map, g1).values + solve_poisson(default_map, g2).values
    np.testing.assert_allclose(solve_poisson(default_map, g1 + g2).values, s, atol=1e-6)


def test_antisymmetry(default_map):
    g = GateVoltages(0.3, -0.1, 0.2, 0.05)
    a = solve_poisson(default_map, g).values
    b = solve_poisson(default_map, g.scaled(-1)).values
    np.testing.assert_allclose(b, -a, atol=1e-9)


def test_quadrupole_symmetry_circular_dot(circ):
    spec, grid, mmap = circ
    phi = solve_poisson(mmap, QUAD).values
    tol = 1e-6
    np.testing.assert_allclose(phi, phi[::-1, :], atol=tol)
    np.testing.assert_allclose(phi, phi[:, ::-1], atol=tol)
    np.testing.assert_allclose(phi, -phi.T, atol=tol)


def test_superpose_matches_direct(default_map, spec, coarse_grid):
    g = GateVoltages(-0.5, -0.585, 0.5, 0.595)
    direct = solve_poisson(default_map, g).values
    np.testing.assert_allclose(superpose(spec, coarse_grid, g).values, direct, atol=1e-6)


def test_charge_source_sign(default_map):
    grid = default_map.grid
    rho = np.zeros(grid.shape)
    n = grid.nx
    rho[n // 2, n // 2] = 1e-3
    phi = solve_poisson(default_map, GateVoltages(), ScalarField2D(grid, rho, "charge")).values
    assert phi[n // 2, n // 2] > 0
    assert phi[n // 2, n // 2] == phi.max()


def test_charge_field_checks(default_map):
    with pytest.raises(ValueError):
        solve_poisson(default_map, GateVoltages(), ScalarField2D(Grid2D.square(4, 4.0), np.zeros((4, 4)), "charge"))
    with pytest.raises(ValueError):
        solve_poisson(default_map, GateVoltages(),
                      ScalarField2D(default_map.grid, np.zeros(default_map.grid.shape), "density"))


def test_iteration_cap_reports_residual(default_map):
    with pytest.raises(ConvergenceError) as info:
        solve_poisson(default_map, QUAD, maxiter=3)
    assert info.value.residual > 1e-8


def test_field_stats_trivial(default_map):
    grid = default_map.grid
    zero = ScalarField2D(grid, np.zeros(grid.shape))
    s = interior_field_magnitude(zero, default_map)
    assert (s.max, s.mean) == (0.0, 0.0)
    X, _ = grid.mesh()
    ramp = ScalarField2D(grid, -0.003 * X)
    s = interior_field_magnitude(ramp, default_map)
    assert s.max == pytest.approx(0.003, rel=1e-12)
    assert s.mean == pytest.approx(0.003, rel=1e-12)


def test_dot_field_below_shell_field(default_map):
    phi = solve_poisson(default_map, QUAD)
    assert interior_field_magnitude(phi, default_map).max < shell_field_magnitude(phi, default_map).max


def test_potential_csv(default_map):
    phi = solve_poisson(default_map, GateVoltages())
    text = field_to_csv(phi)
    lines = text.split("\n")
    assert lines[0] == "x_nm,y_nm,phi_V"
    assert len(lines) == default_map.grid.nx * default_map.grid.ny + 2
    assert "\r" not in text
    assert lines[1].split(",")[2] == "0"
