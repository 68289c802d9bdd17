"""Device geometry, materials and grid discretization.

The device is a GaAs dot in an AlGaAs nanowire shell, wrapped in an Al2O3
coating with four in-plane gold gates on the outer dielectric surface. All
lengths are in nm, energies in eV. Radii accumulate outwards::

    shell radius      = dot_radius_mean + shell_thickness
    dielectric radius = shell radius + dielectric_thickness

The z direction is eliminated (flat-dot limit), so the dot height is never
used in computation.
"""

from __future__ import annotations

import dataclasses
from dataclasses import dataclass, field

import numpy as np

__all__ = [
    "GAAS",
    "AL033GA067AS",
    "DOT",
    "SHELL",
    "DIELECTRIC",
    "EXTERIOR",
    "GATE_NAMES",
    "GeometryError",
    "MaterialParams",
    "DeviceSpec",
    "Grid2D",
    "MaterialMap",
    "build_material_map",
    "check_grid_covers",
    "gate_boundary_cells",
]

DOT, SHELL, DIELECTRIC, EXTERIOR = 0, 1, 2, 3
REGION_NAMES = ("dot", "shell", "dielectric", "exterior")

GATE_NAMES = ("top", "bottom", "left", "right")
# gate-center compass angles, radians
_GATE_ANGLES = {"top": np.pi / 2, "bottom": -np.pi / 2, "left": np.pi, "right": 0.0}


class GeometryError(ValueError):
    """Raised when a device or grid violates a containment/resolution rule."""


@dataclass(frozen=True)
class MaterialParams:
    """Bulk parameters of one semiconductor.

    Masses are in units of the free-electron mass. ``cb_offset`` and
    ``vb_offset`` are the conduction and valence band steps from the dot
    material up to the barrier; the material map reads them from the shell.
    """

    bulk_gap_Egb: float = 1.519
    kane_Ep: float = 23.0
    eff_mass_e: float = 0.067
    eff_mass_hh: float = 0.5
    rel_permittivity: float = 12.5
    cb_offset: float = 0.27
    vb_offset: float = 0.14

    def __post_init__(self):
        for name in ("bulk_gap_Egb", "kane_Ep", "cb_offset", "vb_offset"):
            if not getattr(self, name) > 0:
                raise ValueError(f"{name} must be > 0, got {getattr(self, name)}")
        for name in ("eff_mass_e", "eff_mass_hh"):
            if not getattr(self, name) > 0:
                raise ValueError(f"{name} must be > 0, got {getattr(self, name)}")
        if not self.rel_permittivity >= 1:
            raise ValueError(f"rel_permittivity must be >= 1, got {self.rel_permittivity}")


GAAS = MaterialParams()

# Al(x)Ga(1-x)As at x = 0.33, linear interpolation of the binary endpoints.
AL033GA067AS = MaterialParams(
    bulk_gap_Egb=1.519 + 1.247 * 0.33,
    kane_Ep=23.0,
    eff_mass_e=0.067 + 0.083 * 0.33,
    eff_mass_hh=0.5 + 0.14 * 0.33,
    rel_permittivity=12.9 - 2.84 * 0.33,
)


@dataclass(frozen=True)
class DeviceSpec:
    """Parametric description of the gated dot-in-nanowire cross section."""

    dot_radius_mean: float = 15.0
    dot_elongation: float = 1.07
    dot_axis_angle_theta: float = 0.0
    shell_thickness: float = 110.0
    dielectric_thickness: float = 150.0
    gate_arc_width: float = 200.0
    materials_dot: MaterialParams = field(default_factory=lambda: GAAS)
    materials_shell: MaterialParams = field(default_factory=lambda: AL033GA067AS)
    dielectric_permittivity: float = 9.0
    exterior_permittivity: float = 1.0

    def __post_init__(self):
        if not self.dot_elongation > 0:
            raise GeometryError("dot_elongation must be > 0")
        if min(self.dot_radius_mean, self.shell_thickness, self.dielectric_thickness) <= 0:
            raise GeometryError("radii and thicknesses must be > 0")
        if not self.gate_arc_width > 0:
            raise GeometryError("gate_arc_width must be > 0")
        if self.dot_semi_axes[0] >= self.shell_radius:
            raise GeometryError(
                f"dot ellipse (semi-major {self.dot_semi_axes[0]:.3f} nm) "
                f"exceeds shell circle (radius {self.shell_radius:.3f} nm)"
            )
        if self.gate_arc_width > np.pi * self.dielectric_radius / 2 * (1 + 1e-12):
            raise GeometryError(
                "gate arcs overlap: gate_arc_width exceeds a quarter of the "
                "dielectric circumference"
            )

    @property
    def dot_semi_axes(self) -> tuple[float, float]:
        """(major, minor) semi-axes; their geometric mean is the mean radius."""
        root = np.sqrt(self.dot_elongation)
        return self.dot_radius_mean * root, self.dot_radius_mean / root

    @property
    def shell_radius(self) -> float:
        return self.dot_radius_mean + self.shell_thickness

    @property
    def dielectric_radius(self) -> float:
        return self.shell_radius + self.dielectric_thickness

    def replace(self, **changes) -> "DeviceSpec":
        return dataclasses.replace(self, **changes)


@dataclass(frozen=True)
class Grid2D:
    """Uniform square-cell grid centred on the device axis.

    Cell ``(i, j)`` has its centre at ``x[i], y[j]``; fields are stored as
    arrays of shape ``(nx, ny)``.
    """

    nx: int
    ny: int
    extent_Lx: float
    extent_Ly: float

    def __post_init__(self):
        if self.nx < 1 or self.ny < 1:
            raise ValueError("grid needs at least one cell per axis")
        hx, hy = self.extent_Lx / self.nx, self.extent_Ly / self.ny
        if not np.isclose(hx, hy, rtol=1e-12, atol=0):
            raise ValueError(f"non-square cells: {hx} vs {hy} nm")

    @classmethod
    def square(cls, n: int, extent: float) -> "Grid2D":
        return cls(n, n, extent, extent)

    @classmethod
    def for_device(cls, spec: DeviceSpec, n: int = 512, margin: float | None = None) -> "Grid2D":
        """Square grid covering the dielectric circle plus ``margin`` (default one gate width)."""
        if margin is None:
            margin = spec.gate_arc_width
        return cls.square(n, 2.0 * (spec.dielectric_radius + margin))

    @property
    def spacing(self) -> float:
        return self.extent_Lx / self.nx

    @property
    def shape(self) -> tuple[int, int]:
        return self.nx, self.ny

    @property
    def x(self) -> np.ndarray:
        return (np.arange(self.nx) + 0.5) * self.spacing - 0.5 * self.extent_Lx

    @property
    def y(self) -> np.ndarray:
        return (np.arange(self.ny) + 0.5) * self.spacing - 0.5 * self.extent_Ly

    def mesh(self) -> tuple[np.ndarray, np.ndarray]:
        return np.meshgrid(self.x, self.y, indexing="ij")


def check_grid_covers(spec: DeviceSpec, grid: Grid2D) -> None:
    """Require the grid to hold the dielectric circle plus one gate width of margin."""
    need = spec.dielectric_radius + spec.gate_arc_width
    half = 0.5 * min(grid.extent_Lx, grid.extent_Ly)
    if half < need * (1 - 1e-12):
        raise GeometryError(
            f"grid half-extent {half:.1f} nm does not cover dielectric radius "
            f"plus one gate width ({need:.1f} nm)"
        )


@dataclass(frozen=True, eq=False)
class MaterialMap:
    """Per-cell material description on a grid."""

    grid: Grid2D
    spec: DeviceSpec
    region: np.ndarray
    permittivity: np.ndarray
    mass_e: np.ndarray
    mass_hh: np.ndarray
    cb_edge: np.ndarray
    vb_edge: np.ndarray

    def mask(self, name: str) -> np.ndarray:
        return self.region == REGION_NAMES.index(name)


def _readonly(a: np.ndarray) -> np.ndarray:
    a.setflags(write=False)
    return a


def build_material_map(spec: DeviceSpec, grid: Grid2D) -> MaterialMap:
    """Label every cell by the region containing its centre.

    The dot ellipse is rotated by ``spec.dot_axis_angle_theta`` (degrees)
    about the device centre. Carriers see zero band offset in the dot and
    the shell offsets everywhere else.
    """
    X, Y = grid.mesh()
    a, b = spec.dot_semi_axes
    th = np.deg2rad(spec.dot_axis_angle_theta)
    u = X * np.cos(th) + Y * np.sin(th)
    v = -X * np.sin(th) + Y * np.cos(th)
    r2 = X**2 + Y**2

    region = np.full(grid.shape, EXTERIOR, dtype=np.int8)
    region[r2 <= spec.dielectric_radius**2] = DIELECTRIC
    region[r2 <= spec.shell_radius**2] = SHELL
    region[(u / a) ** 2 + (v / b) ** 2 <= 1.0] = DOT

    dot_m, shell_m = spec.materials_dot, spec.materials_shell
    eps = np.array(
        [dot_m.rel_permittivity, shell_m.rel_permittivity,
         spec.dielectric_permittivity, spec.exterior_permittivity]
    )[region]
    # outside the shell the carriers never reach; the shell values are kept
    me = np.where(region == DOT, dot_m.eff_mass_e, shell_m.eff_mass_e)
    mh = np.where(region == DOT, dot_m.eff_mass_hh, shell_m.eff_mass_hh)
    cb = np.where(region == DOT, 0.0, shell_m.cb_offset)
    vb = np.where(region == DOT, 0.0, shell_m.vb_offset)

    return MaterialMap(
        grid=grid,
        spec=spec,
        region=_readonly(region),
        permittivity=_readonly(eps),
        mass_e=_readonly(me),
        mass_hh=_readonly(mh),
        cb_edge=_readonly(cb),
        vb_edge=_readonly(vb),
    )


def gate_boundary_cells(spec: DeviceSpec, grid: Grid2D) -> dict[str, np.ndarray]:
    """Flat indices of the cells pinned by each gate.

    Boundary cells are cells inside the dielectric circle with at least one
    edge neighbour outside it. A gate owns the boundary cells whose polar
    angle lies in ``[centre - w/2R, centre + w/2R)``.
    """
    check_grid_covers(spec, grid)
    X, Y = grid.mesh()
    inside = X**2 + Y**2 <= spec.dielectric_radius**2
    padded = np.pad(inside, 1, constant_values=False)
    all_nb_inside = (
        padded[:-2, 1:-1] & padded[2:, 1:-1] & padded[1:-1, :-2] & padded[1:-1, 2:]
    )
    boundary = inside & ~all_nb_inside

    idx = np.flatnonzero(boundary)
    angle = np.arctan2(Y.ravel()[idx], X.ravel()[idx])
    half = 0.5 * spec.gate_arc_width / spec.dielectric_radius
    h = grid.spacing

    cells = {}
    for name in GATE_NAMES:
        d = np.angle(np.exp(1j * (angle - _GATE_ANGLES[name])))
        sel = idx[(d >= -half) & (d < half)]
        if sel.size < 3:
            raise GeometryError(
                f"gate '{name}' resolved by {sel.size} cells; need at least 3 "
                f"(grid spacing {h:.3g} nm too coarse)"
            )
        cells[name] = sel
    return cells
