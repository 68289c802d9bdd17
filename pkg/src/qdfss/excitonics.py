"""Exciton fine-structure splitting from electron and hole ground states.

The long-range exchange splitting of a flat Gaussian exciton reduces to

    delta = K * beta * xi * (1 - xi) / l_y**3,      FSS = 2 |delta|

    K = 3 sqrt(pi) e^2 hbar^2 E_p / ((4 pi eps0) 16 sqrt(2) eps m0 Eg^2)

where ``beta`` is the squared e-h overlap, ``l_x, l_y`` are the Gaussian
length parameters of the product wavefunction ``psi_h * psi_e`` and
``xi = l_y / l_x``. Length parameters follow the amplitude convention
``psi ~ exp(-(x/l)^2 / 2)``, so a density with standard deviation ``sigma``
has ``l = sqrt(2) * sigma``.
"""

from __future__ import annotations

import json
import math
from dataclasses import asdict, dataclass, field
from typing import NamedTuple

import numpy as np
import scipy.constants as const

from .device import DeviceSpec, Grid2D, MaterialMap, MaterialParams, build_material_map
from .fields import ScalarField2D
from .poisson import GateVoltages, ConvergenceError, solve_poisson, superpose
from .schrodinger import (
    ELECTRON,
    HEAVY_HOLE,
    EigenResult,
    build_hamiltonian,
    gaussian_guess,
    ground_state,
    resample,
)

__all__ = [
    "GaussianMoments",
    "HybridLengths",
    "ExcitonReport",
    "SolverSettings",
    "CarrierStates",
    "StageError",
    "exchange_constant",
    "overlap_beta",
    "moments_fit",
    "hybridized_lengths",
    "compute_fss",
    "quantum_window",
    "solve_carriers",
    "evaluate_configuration",
    "report_from_states",
    "round_sig",
]


def exchange_constant(materials: MaterialParams) -> float:
    """Long-range exchange prefactor K in eV nm^3."""
    e, hbar, m0 = const.e, const.hbar, const.m_e
    Ep = materials.kane_Ep * e
    Eg = materials.bulk_gap_Egb * e
    K = (3 * math.sqrt(math.pi) * e**2 * hbar**2 * Ep) / (
        4 * math.pi * const.epsilon_0 * 16 * math.sqrt(2)
        * materials.rel_permittivity * m0 * Eg**2
    )
    return K / e * 1e27


def overlap_beta(psi_e: ScalarField2D, psi_h: ScalarField2D) -> float:
    """Squared overlap ``|<psi_h|psi_e>|^2`` of two normalised envelopes."""
    if psi_e.grid != psi_h.grid:
        raise ValueError("wavefunctions are on different grids")
    h2 = psi_e.grid.spacing ** 2
    return float(np.sum(psi_h.values * psi_e.values) * h2) ** 2


@dataclass(frozen=True)
class GaussianMoments:
    """First and second moments of a 2D weight, with principal axes.

    ``angle`` (degrees, in (-90, 90]) is the direction of the major axis from
    +x. ``elongation`` is ``sigma_x / sigma_y`` in the fixed gate frame.
    """

    centroid_x: float
    centroid_y: float
    sigma_major: float
    sigma_minor: float
    angle: float
    sigma_x: float
    sigma_y: float
    cov_xy: float

    @property
    def elongation(self) -> float:
        return self.sigma_x / self.sigma_y


def moments_fit(field: ScalarField2D) -> GaussianMoments:
    """Gaussian moments of a density, or of ``psi**2`` for a wavefunction field."""
    w = field.values**2 if field.kind == "wavefunction" else field.values
    if np.any(w < 0):
        raise ValueError("density has negative cells")
    total = w.sum()
    if not total > 0:
        raise ValueError("density has zero total weight")
    grid = field.grid
    x, y = grid.x, grid.y
    wx = w.sum(axis=1) / total
    wy = w.sum(axis=0) / total
    mx = float(wx @ x)
    my = float(wy @ y)
    dx, dy = x - mx, y - my
    cxx = float(wx @ dx**2)
    cyy = float(wy @ dy**2)
    cxy = float(dx @ w @ dy / total)

    evals, evecs = np.linalg.eigh(np.array([[cxx, cxy], [cxy, cyy]]))
    if not evals[0] > 0 or cxx <= 0 or cyy <= 0:
        raise ValueError(f"degenerate covariance {cxx, cxy, cyy}")
    vx, vy = evecs[:, 1]
    angle = math.degrees(math.atan2(vy, vx))
    if angle <= -90:
        angle += 180
    elif angle > 90:
        angle -= 180
    return GaussianMoments(
        centroid_x=mx,
        centroid_y=my,
        sigma_major=math.sqrt(evals[1]),
        sigma_minor=math.sqrt(evals[0]),
        angle=angle,
        sigma_x=math.sqrt(cxx),
        sigma_y=math.sqrt(cyy),
        cov_xy=cxy,
    )


class HybridLengths(NamedTuple):
    l_x: float
    l_y: float
    xi: float
    moments: GaussianMoments


def hybridized_lengths(psi_e: ScalarField2D, psi_h: ScalarField2D, frame: str = "gate") -> HybridLengths:
    """Length parameters of ``psi_h * psi_e`` and ``xi = l_y / l_x``.

    ``frame="gate"`` measures along the fixed x/y gate axes, so ``xi`` may
    exceed 1 and ``delta`` changes sign when the product wavefunction passes
    through circular symmetry. ``frame="principal"`` uses the principal axes
    with ``l_x`` the major one (``xi <= 1``), for dots rotated off the gates.
    """
    if psi_e.grid != psi_h.grid:
        raise ValueError("wavefunctions are on different grids")
    prod = ScalarField2D(psi_e.grid, (psi_h.values * psi_e.values) ** 2, "density")
    m = moments_fit(prod)
    root2 = math.sqrt(2.0)
    if frame == "gate":
        lx, ly = root2 * m.sigma_x, root2 * m.sigma_y
    elif frame == "principal":
        lx, ly = root2 * m.sigma_major, root2 * m.sigma_minor
    else:
        raise ValueError(f"unknown frame {frame!r}")
    return HybridLengths(lx, ly, ly / lx, m)


def compute_fss(materials: MaterialParams, beta: float, xi: float, l_y_eh: float) -> tuple[float, float]:
    """``(delta, fss)`` in micro-eV for the flat-dot limit (z factor 1)."""
    if not l_y_eh > 0:
        raise ValueError("l_y_eh must be > 0")
    if not all(np.isfinite([beta, xi, l_y_eh])):
        raise ValueError("non-finite input to compute_fss")
    delta = exchange_constant(materials) * beta * xi * (1.0 - xi) / l_y_eh**3 * 1e6
    return delta, 2.0 * abs(delta)


@dataclass(frozen=True)
class SolverSettings:
    """Numerical settings for one configuration evaluation.

    The carrier problems are solved on a fine square window centred on the
    dot (``window_extent`` nm wide, ``window_spacing`` nm cells), onto which
    the electrostatic potential is interpolated with bicubic splines.
    ``self_consistent`` switches on the Hartree loop, in which each carrier
    sees the field of the other; its charge is spread over
    ``hartree_thickness`` nm in z.
    """

    poisson_rtol: float = 1e-8
    poisson_maxiter: int | None = None
    eig_tol: float = 1e-8
    window_extent: float = 80.0
    window_spacing: float = 0.4
    self_consistent: bool = False
    mixing: float = 0.5
    sc_tol: float = 1e-6
    sc_maxiter: int = 50
    hartree_thickness: float = 3.0


class StageError(RuntimeError):
    """Failure in one pipeline stage; ``cause`` keeps the original exception."""

    def __init__(self, stage: str, cause: Exception):
        super().__init__(f"{stage} stage failed: {cause}")
        self.stage = stage
        self.cause = cause


@dataclass(frozen=True)
class ExcitonReport:
    delta: float
    fss: float
    beta: float
    xi: float
    l_x_eh: float
    l_y_eh: float
    eps_e: float
    eps_h: float
    angle_eh: float
    energy_e: float
    energy_h: float
    gates: GateVoltages = field(default_factory=GateVoltages)

    def to_dict(self) -> dict:
        """Flat snake_case mapping with units in the key names."""
        return {
            "delta_ueV": self.delta,
            "fss_ueV": self.fss,
            "beta": self.beta,
            "xi": self.xi,
            "l_x_eh_nm": self.l_x_eh,
            "l_y_eh_nm": self.l_y_eh,
            "eps_e": self.eps_e,
            "eps_h": self.eps_h,
            "angle_eh_deg": self.angle_eh,
            "energy_e_eV": self.energy_e,
            "energy_h_eV": self.energy_h,
            "v_top_V": self.gates.v_top,
            "v_bottom_V": self.gates.v_bottom,
            "v_left_V": self.gates.v_left,
            "v_right_V": self.gates.v_right,
        }

    def to_json(self) -> str:
        return json.dumps(round_sig(self.to_dict()), indent=2)


def round_sig(obj, digits: int = 9):
    if isinstance(obj, float):
        return float(f"{obj:.{digits}g}")
    if isinstance(obj, dict):
        return {k: round_sig(v, digits) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [round_sig(v, digits) for v in obj]
    return obj


def quantum_window(settings: SolverSettings) -> Grid2D:
    n = int(round(settings.window_extent / settings.window_spacing))
    return Grid2D.square(n, n * settings.window_spacing)


@dataclass(frozen=True, eq=False)
class CarrierStates:
    """Everything computed for one gate configuration, for export and audit."""

    potential: ScalarField2D
    material_map: MaterialMap
    window_map: MaterialMap
    electron: EigenResult
    hole: EigenResult
    sc_iterations: int = 0


def _deposit(density: np.ndarray, window: Grid2D, grid: Grid2D) -> np.ndarray:
    """Bin a window density onto the coarse grid, conserving the integral."""
    h, H = window.spacing, grid.spacing
    i = np.floor((window.x + 0.5 * grid.extent_Lx) / H).astype(int)
    j = np.floor((window.y + 0.5 * grid.extent_Ly) / H).astype(int)
    out = np.zeros(grid.shape)
    np.add.at(out, (i[:, None], j[None, :]), density * (h * h) / (H * H))
    return out


def _stage(name, fn, *args, **kwargs):
    try:
        return fn(*args, **kwargs)
    except StageError:
        raise
    except Exception as exc:
        raise StageError(name, exc) from exc


def solve_carriers(
    spec: DeviceSpec,
    grid: Grid2D,
    gates: GateVoltages,
    settings: SolverSettings | None = None,
) -> CarrierStates:
    """Material map, potential and both ground states for one configuration."""
    settings = settings or SolverSettings()
    mmap = _stage("material_map", build_material_map, spec, grid)
    window = quantum_window(settings)
    wmap = _stage("material_map", build_material_map, spec, window)
    phi = _stage("poisson", superpose, spec, grid, gates, settings.poisson_rtol,
                 settings.poisson_maxiter)
    phi_w = _stage("poisson", resample, phi, window)

    guess = gaussian_guess(window, spec.dot_radius_mean)

    def carriers(phi_e, phi_h):
        e = _stage("schrodinger", _ground, wmap, phi_e, ELECTRON, guess, settings)
        h = _stage("schrodinger", _ground, wmap, phi_h, HEAVY_HOLE, guess, settings)
        return e, h

    e_res, h_res = carriers(phi_w, phi_w)
    n_iter = 0
    if settings.self_consistent:
        phi_e_w, phi_h_w = phi_w, phi_w
        for n_iter in range(1, settings.sc_maxiter + 1):
            rho_h = _deposit(h_res.wavefunction.values**2, window, grid) / settings.hartree_thickness
            rho_e = _deposit(e_res.wavefunction.values**2, window, grid) / settings.hartree_thickness
            zero = GateVoltages()
            from_h = _stage("poisson", solve_poisson, mmap, zero,
                            ScalarField2D(grid, rho_h, "charge"), settings.poisson_rtol,
                            settings.poisson_maxiter)
            from_e = _stage("poisson", solve_poisson, mmap, zero,
                            ScalarField2D(grid, -rho_e, "charge"), settings.poisson_rtol,
                            settings.poisson_maxiter)
            target_e = phi_w.values + resample(from_h, window).values
            target_h = phi_w.values + resample(from_e, window).values
            new_e = phi_e_w.values + settings.mixing * (target_e - phi_e_w.values)
            new_h = phi_h_w.values + settings.mixing * (target_h - phi_h_w.values)
            change = max(np.abs(new_e - phi_e_w.values).max(), np.abs(new_h - phi_h_w.values).max())
            phi_e_w = ScalarField2D(window, new_e, "potential")
            phi_h_w = ScalarField2D(window, new_h, "potential")
            e_res, h_res = carriers(phi_e_w, phi_h_w)
            if change < settings.sc_tol:
                break
        else:
            raise StageError(
                "self_consistency",
                ConvergenceError(
                    f"Hartree loop: potential change {change:.3e} V after "
                    f"{settings.sc_maxiter} iterations",
                    residual=change,
                ),
            )
    return CarrierStates(phi, mmap, wmap, e_res, h_res, n_iter)


def _ground(wmap, phi, kind, guess, settings):
    res = ground_state(build_hamiltonian(wmap, phi, kind), guess, tol=settings.eig_tol)
    psi = np.abs(res.wavefunction.values)
    edge = max(psi[0, :].max(), psi[-1, :].max(), psi[:, 0].max(), psi[:, -1].max())
    if edge > 1e-6 * psi.max():
        raise ValueError(
            f"{kind.name} wavefunction reaches the window edge "
            f"({edge / psi.max():.1e} of peak); enlarge window_extent"
        )
    return res


def _frame(spec: DeviceSpec) -> str:
    return "gate" if spec.dot_axis_angle_theta % 90.0 == 0.0 else "principal"


def evaluate_configuration(
    spec: DeviceSpec,
    grid: Grid2D,
    gates: GateVoltages,
    settings: SolverSettings | None = None,
) -> ExcitonReport:
    """Full pipeline: map, potential, two ground states, overlap, lengths, FSS."""
    states = solve_carriers(spec, grid, gates, settings)
    return report_from_states(spec, states, gates)


def report_from_states(spec: DeviceSpec, states: CarrierStates, gates: GateVoltages) -> ExcitonReport:
    psi_e, psi_h = states.electron.wavefunction, states.hole.wavefunction
    try:
        beta = overlap_beta(psi_e, psi_h)
        hyb = hybridized_lengths(psi_e, psi_h, _frame(spec))
        delta, fss = compute_fss(spec.materials_dot, beta, hyb.xi, hyb.l_y)
        eps_e = moments_fit(psi_e).elongation
        eps_h = moments_fit(psi_h).elongation
    except Exception as exc:
        raise StageError("excitonics", exc) from exc
    return ExcitonReport(
        delta=delta,
        fss=fss,
        beta=beta,
        xi=hyb.xi,
        l_x_eh=hyb.l_x,
        l_y_eh=hyb.l_y,
        eps_e=eps_e,
        eps_h=eps_h,
        angle_eh=hyb.moments.angle,
        energy_e=states.electron.energy,
        energy_h=states.hole.energy,
        gates=gates,
    )
