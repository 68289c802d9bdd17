"""Variable-permittivity electrostatics on the device cross section.

Solves ``div(eps_r grad phi) = -rho / eps0`` with a cell-centred 5-point
finite-volume stencil. Face permittivities are harmonic means of the two
adjacent cells, so the normal displacement flux is continuous across
material interfaces. Gate arcs are Dirichlet cells; every other outer edge
of the box is insulating (zero normal flux).

Lengths are nm, potentials V, charge densities in elementary charges
per nm^3.
"""

from __future__ import annotations

import functools
from dataclasses import dataclass

import numpy as np
import scipy.constants as const
import scipy.sparse as sp
import scipy.sparse.linalg as spla

from .device import (
    DOT,
    GATE_NAMES,
    SHELL,
    Grid2D,
    MaterialMap,
    build_material_map,
    gate_boundary_cells,
    DeviceSpec,
)
from .fields import ScalarField2D

__all__ = [
    "E_OVER_EPS0",
    "ConvergenceError",
    "GateVoltages",
    "FieldStats",
    "assemble_operator",
    "solve_pinned",
    "solve_poisson",
    "gate_basis",
    "interior_field_magnitude",
    "region_field_magnitude",
    "shell_field_magnitude",
    "superpose",
]

# e / eps0 in V nm  (density in e/nm^3 -> source term in V/nm^2)
E_OVER_EPS0 = const.e / const.epsilon_0 * 1e9


class ConvergenceError(RuntimeError):
    """An iterative solve stopped at its cap without meeting tolerance."""

    def __init__(self, message, residual=None, history=None):
        super().__init__(message)
        self.residual = residual
        self.history = history or []


@dataclass(frozen=True)
class GateVoltages:
    """Potentials (V) on the four gates."""

    v_top: float = 0.0
    v_bottom: float = 0.0
    v_left: float = 0.0
    v_right: float = 0.0

    def __post_init__(self):
        if not all(np.isfinite(v) for v in self.as_tuple()):
            raise ValueError(f"gate voltages must be finite: {self.as_tuple()}")

    def as_tuple(self) -> tuple[float, float, float, float]:
        return (self.v_top, self.v_bottom, self.v_left, self.v_right)

    def as_dict(self) -> dict[str, float]:
        return dict(zip(GATE_NAMES, self.as_tuple()))

    def __add__(self, other: "GateVoltages") -> "GateVoltages":
        return GateVoltages(*(a + b for a, b in zip(self.as_tuple(), other.as_tuple())))

    def scaled(self, alpha: float) -> "GateVoltages":
        return GateVoltages(*(alpha * v for v in self.as_tuple()))


def _harmonic(a, b):
    return 2.0 * a * b / (a + b)


def _arithmetic(a, b):
    return 0.5 * (a + b)


def assemble_operator(
    coef: np.ndarray,
    spacing: float,
    dirichlet_edges: bool = False,
    face_mean: str = "harmonic",
) -> sp.csr_matrix:
    """Matrix of ``-div(coef grad .)`` on a cell-centred grid.

    Face coefficients are harmonic (or arithmetic) means of neighbouring
    cells. Box edges are
    zero-flux unless ``dirichlet_edges``, in which case a zero ghost value one
    cell outside is used (face coefficient = the boundary cell's own value).
    The result is symmetric.
    """
    nx, ny = coef.shape
    idx = np.arange(nx * ny).reshape(nx, ny)
    h2 = spacing * spacing
    mean = _harmonic if face_mean == "harmonic" else _arithmetic
    fx = mean(coef[:-1, :], coef[1:, :]) / h2
    fy = mean(coef[:, :-1], coef[:, 1:]) / h2

    diag = np.zeros((nx, ny))
    diag[:-1, :] += fx
    diag[1:, :] += fx
    diag[:, :-1] += fy
    diag[:, 1:] += fy
    if dirichlet_edges:
        diag[0, :] += coef[0, :] / h2
        diag[-1, :] += coef[-1, :] / h2
        diag[:, 0] += coef[:, 0] / h2
        diag[:, -1] += coef[:, -1] / h2

    rows = np.concatenate([idx[:-1, :].ravel(), idx[:, :-1].ravel()])
    cols = np.concatenate([idx[1:, :].ravel(), idx[:, 1:].ravel()])
    vals = -np.concatenate([fx.ravel(), fy.ravel()])
    off = sp.coo_matrix((vals, (rows, cols)), shape=(nx * ny, nx * ny))
    return (off + off.T + sp.diags(diag.ravel())).tocsr()


def solve_pinned(
    operator: sp.csr_matrix,
    source: np.ndarray,
    pinned: np.ndarray,
    pinned_values: np.ndarray,
    rtol: float = 1e-8,
    maxiter: int | None = None,
) -> np.ndarray:
    """Solve ``operator @ u = source`` with ``u[pinned] = pinned_values``.

    Pinned unknowns are eliminated, which keeps the reduced system symmetric
    positive definite; it is solved by Jacobi-preconditioned conjugate
    gradients to relative residual ``rtol``.
    """
    n = operator.shape[0]
    u = np.zeros(n)
    u[pinned] = pinned_values
    free = np.ones(n, dtype=bool)
    free[pinned] = False

    A = operator[free][:, free]
    b = source[free] - operator[free][:, pinned] @ pinned_values
    bnorm = np.linalg.norm(b)
    if bnorm == 0.0:
        return u
    if maxiter is None:
        maxiter = 10 * n

    dinv = 1.0 / A.diagonal()
    M = spla.LinearOperator(A.shape, matvec=lambda r: dinv * r, dtype=float)
    x, info = spla.cg(A, b, rtol=rtol, atol=0.0, maxiter=maxiter, M=M)
    res = np.linalg.norm(b - A @ x) / bnorm
    if info != 0 or res > rtol:
        raise ConvergenceError(
            f"Poisson CG did not converge in {maxiter} iterations "
            f"(relative residual {res:.3e})",
            residual=res,
        )
    u[free] = x
    return u


def solve_poisson(
    material_map: MaterialMap,
    gates: GateVoltages,
    charge: ScalarField2D | None = None,
    rtol: float = 1e-8,
    maxiter: int | None = None,
) -> ScalarField2D:
    """Electrostatic potential for the given gate voltages.

    ``charge`` is a ``"charge"`` field (e/nm^3, positive for holes) on the
    same grid; ``None`` means a neutral device.
    """
    grid = material_map.grid
    if charge is not None:
        if charge.grid != grid:
            raise ValueError("charge field is on a different grid")
        if charge.kind != "charge":
            raise ValueError(f"expected a charge field, got {charge.kind!r}")
    cells = gate_boundary_cells(material_map.spec, grid)
    pinned = np.concatenate([cells[g] for g in GATE_NAMES])
    values = np.concatenate(
        [np.full(cells[g].size, v) for g, v in zip(GATE_NAMES, gates.as_tuple())]
    )
    A = _poisson_operator(material_map)
    source = np.zeros(A.shape[0])
    if charge is not None:
        source = E_OVER_EPS0 * charge.values.ravel()
    if maxiter is None:
        maxiter = 50 * max(grid.nx, grid.ny)
    phi = solve_pinned(A, source, pinned, values, rtol=rtol, maxiter=maxiter)
    return ScalarField2D(grid, phi.reshape(grid.shape), "potential")


def _poisson_operator(material_map: MaterialMap) -> sp.csr_matrix:
    return assemble_operator(material_map.permittivity, material_map.grid.spacing)


@functools.lru_cache(maxsize=16)
def _cached_basis(spec: DeviceSpec, grid: Grid2D, rtol: float, maxiter: int | None):
    mmap = build_material_map(spec, grid)
    out = []
    for k in range(4):
        unit = [0.0] * 4
        unit[k] = 1.0
        phi = solve_poisson(mmap, GateVoltages(*unit), rtol=rtol, maxiter=maxiter).values
        phi.setflags(write=False)
        out.append(phi)
    return tuple(out)


def gate_basis(
    spec: DeviceSpec, grid: Grid2D, rtol: float = 1e-8, maxiter: int | None = None
) -> tuple[np.ndarray, ...]:
    """Unit-voltage potentials of (top, bottom, left, right); cached per device and grid.

    With no free charge the potential is linear in the gate voltages, so any
    configuration is ``sum(v_k * basis[k])``.
    """
    return _cached_basis(spec, grid, rtol, maxiter)


def superpose(
    spec: DeviceSpec,
    grid: Grid2D,
    gates: GateVoltages,
    rtol: float = 1e-8,
    maxiter: int | None = None,
) -> ScalarField2D:
    basis = gate_basis(spec, grid, rtol, maxiter)
    phi = np.zeros(grid.shape)
    for v, b in zip(gates.as_tuple(), basis):
        if v != 0.0:
            phi += v * b
    return ScalarField2D(grid, phi, "potential")


@dataclass(frozen=True)
class FieldStats:
    max: float
    mean: float


def _gradient_magnitude(phi: np.ndarray, h: float) -> np.ndarray:
    gx, gy = np.gradient(phi, h)
    return np.hypot(gx, gy)


def region_field_magnitude(potential: ScalarField2D, material_map: MaterialMap, region: int) -> FieldStats:
    """Max and mean of ``|grad phi|`` (V/nm) over the cells of one region."""
    if potential.grid != material_map.grid:
        raise ValueError("potential and material map are on different grids")
    mask = material_map.region == region
    if not mask.any():
        raise ValueError(f"region {region} has no cells on this grid")
    g = _gradient_magnitude(potential.values, potential.grid.spacing)[mask]
    return FieldStats(float(g.max()), float(g.mean()))


def interior_field_magnitude(potential: ScalarField2D, material_map: MaterialMap) -> FieldStats:
    """Electric-field magnitude statistics over the dot cells (V/nm)."""
    return region_field_magnitude(potential, material_map, DOT)


def shell_field_magnitude(potential: ScalarField2D, material_map: MaterialMap) -> FieldStats:
    """Electric-field magnitude statistics over the nanowire shell cells (V/nm)."""
    return region_field_magnitude(potential, material_map, SHELL)
