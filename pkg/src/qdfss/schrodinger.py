"""Effective-mass ground states of the electron and heavy hole.

The envelope Hamiltonian is written in BenDaniel-Duke form,

    H = -(hbar^2 / 2) div(1/m*(r) grad) + V_band(r) + q phi(r),

with harmonic-mean face masses and psi = 0 one cell outside the box.

Sign convention for the hole: it is treated as a positive-mass particle in
an inverted band profile, so the dot is a potential minimum for both
carriers::

    electron:   V = cb_edge - phi        (charge -e)
    heavy hole: V = vb_edge + phi        (charge +e)

Energies in eV, lengths in nm, wavefunctions in nm^-1.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
import scipy.constants as const
import scipy.sparse as sp
import scipy.sparse.linalg as spla
from scipy.interpolate import RectBivariateSpline

from .device import Grid2D, MaterialMap
from .fields import ScalarField2D
from .poisson import ConvergenceError, assemble_operator

__all__ = [
    "HBAR2_2M0",
    "CarrierKind",
    "ELECTRON",
    "HEAVY_HOLE",
    "Hamiltonian",
    "EigenResult",
    "hamiltonian_from_arrays",
    "build_hamiltonian",
    "ground_state",
    "gaussian_guess",
    "resample",
]

# hbar^2 / (2 m0) in eV nm^2
HBAR2_2M0 = const.hbar**2 / (2 * const.m_e) / const.e * 1e18


@dataclass(frozen=True)
class CarrierKind:
    name: str
    charge_sign: int
    mass_attr: str
    band_attr: str

    def masses(self, material_map: MaterialMap) -> np.ndarray:
        return getattr(material_map, self.mass_attr)

    def band_edge(self, material_map: MaterialMap) -> np.ndarray:
        return getattr(material_map, self.band_attr)


ELECTRON = CarrierKind("electron", -1, "mass_e", "cb_edge")
HEAVY_HOLE = CarrierKind("heavy_hole", +1, "mass_hh", "vb_edge")


@dataclass(frozen=True, eq=False)
class Hamiltonian:
    matrix: sp.csr_matrix
    grid: Grid2D
    potential_energy: np.ndarray
    kind: CarrierKind | None = None


@dataclass(frozen=True, eq=False)
class EigenResult:
    energy: float
    wavefunction: ScalarField2D
    iterations: int
    residual: float


def hamiltonian_from_arrays(mass: np.ndarray, potential_energy: np.ndarray, grid: Grid2D) -> Hamiltonian:
    """Hamiltonian for per-cell masses (units of m0) and potential energy (eV)."""
    mass = np.asarray(mass, dtype=float)
    if mass.shape != grid.shape or potential_energy.shape != grid.shape:
        raise ValueError("mass/potential arrays do not match the grid")
    if not np.all(mass > 0):
        raise ValueError("effective mass must be positive in every cell")
    # arithmetic mean of 1/m on faces == harmonic-mean face mass
    T = HBAR2_2M0 * assemble_operator(
        1.0 / mass, grid.spacing, dirichlet_edges=True, face_mean="arithmetic"
    )
    H = (T + sp.diags(potential_energy.ravel())).tocsr()
    return Hamiltonian(H, grid, potential_energy)


def build_hamiltonian(material_map: MaterialMap, potential: ScalarField2D, kind: CarrierKind) -> Hamiltonian:
    """Discrete envelope Hamiltonian of one carrier on the map's grid."""
    if potential.grid != material_map.grid:
        raise ValueError("potential and material map are on different grids")
    V = kind.band_edge(material_map) + kind.charge_sign * potential.values
    H = hamiltonian_from_arrays(kind.masses(material_map), V, material_map.grid)
    return Hamiltonian(H.matrix, H.grid, H.potential_energy, kind)


def gaussian_guess(grid: Grid2D, width: float) -> np.ndarray:
    X, Y = grid.mesh()
    return np.exp(-(X**2 + Y**2) / (2 * width**2))


def ground_state(
    hamiltonian: Hamiltonian,
    initial_guess: np.ndarray | None = None,
    tol: float = 1e-8,
    guess_width: float = 15.0,
) -> EigenResult:
    """Lowest eigenpair by shift-invert Lanczos (ARPACK).

    The shift sits just below ``min(V)``, which bounds the spectrum from
    below, so the largest shift-inverted eigenvalue is the ground state.
    The default start vector is a Gaussian at the grid centre, which makes
    the result deterministic. ``tol`` bounds ``||H psi - E psi|| / ||psi||``
    in eV.
    """
    H = hamiltonian.matrix
    grid = hamiltonian.grid
    if initial_guess is None:
        initial_guess = gaussian_guess(grid, guess_width)
    v0 = np.asarray(initial_guess, dtype=float).ravel()
    if not np.any(v0):
        raise ValueError("initial guess is identically zero")

    sigma = float(hamiltonian.potential_energy.min()) - 1e-3
    history = []
    vec = v0
    energy = np.nan
    iterations = 0
    for attempt in range(3):
        vals, vecs = spla.eigsh(H, k=1, sigma=sigma, which="LM", v0=vec, tol=0)
        energy = float(vals[0])
        vec = vecs[:, 0]
        vec /= np.linalg.norm(vec)
        iterations += 1
        residual = float(np.linalg.norm(H @ vec - energy * vec))
        history.append(residual)
        if residual <= tol:
            break
    else:
        raise ConvergenceError(
            f"ground state residual {history[-1]:.3e} eV above {tol:.1e} eV",
            residual=history[-1],
            history=history,
        )

    psi = vec.reshape(grid.shape) / grid.spacing
    ic, jc = grid.nx // 2, grid.ny // 2
    # centre value of the 2x2 block around the origin (even grids) or the centre cell
    centre = psi[ic - 1 + grid.nx % 2 : ic + 1, jc - 1 + grid.ny % 2 : jc + 1].sum()
    if centre < 0 or (centre == 0 and psi.sum() < 0):
        psi = -psi
    psi = psi / np.sqrt(np.sum(psi**2) * grid.spacing**2)
    return EigenResult(energy, ScalarField2D(grid, psi, "wavefunction"), iterations, history[-1])


def resample(field: ScalarField2D, grid: Grid2D) -> ScalarField2D:
    """Bicubic-spline interpolation of a potential onto another grid."""
    src = field.grid
    spline = RectBivariateSpline(src.x, src.y, field.values, kx=3, ky=3)
    return ScalarField2D(grid, spline(grid.x, grid.y), field.kind)
