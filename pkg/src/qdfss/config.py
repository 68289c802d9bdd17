"""Run configuration: sectioned ``key = value`` files with units in key names.

Every key is optional and defaults to the reference device; unknown
sections or keys are rejected so typos never pass silently.
"""

from __future__ import annotations

import configparser
import dataclasses
import io
import os
from dataclasses import dataclass, field

from .device import AL033GA067AS, GAAS, DeviceSpec, GeometryError, Grid2D
from .excitonics import SolverSettings

__all__ = [
    "ConfigError",
    "GridConfig",
    "SweepConfig",
    "OptimizeConfig",
    "OutputConfig",
    "RunConfig",
    "parse_config",
    "load_config",
    "dump_config",
]


class ConfigError(ValueError):
    pass


@dataclass(frozen=True)
class GridConfig:
    nx: int = 512
    ny: int = 512
    margin: float = 200.0

    def build(self, spec: DeviceSpec) -> Grid2D:
        h = 2.0 * (spec.dielectric_radius + self.margin) / min(self.nx, self.ny)
        return Grid2D(self.nx, self.ny, self.nx * h, self.ny * h)


@dataclass(frozen=True)
class SweepConfig:
    quad_v_min: float = -0.5
    quad_v_max: float = 0.7
    quad_n: int = 13
    lat_v_min: float = 0.0
    lat_v_max: float = 0.4
    lat_n: int = 9
    grid_v_fixed: float = 0.5
    rl_min: float = 0.0
    rl_max: float = 0.2
    rl_n: int = 5
    tb_min: float = 0.0
    tb_max: float = 0.2
    tb_n: int = 5
    refine: bool = True
    workers: int = 0


@dataclass(frozen=True)
class OptimizeConfig:
    v0: float = 0.5
    delta_v_rl0: float = 0.095
    delta_v_tb0: float = 0.085
    v_min: float = 0.35
    v_max: float = 0.65
    rl_min: float = 0.0
    rl_max: float = 0.2
    tb_min: float = 0.0
    tb_max: float = 0.2
    max_evals: int = 300
    target_fss: float = 0.01
    xatol: float = 1e-4


@dataclass(frozen=True)
class OutputConfig:
    directory: str = "."
    prefix: str = "qdfss"


@dataclass(frozen=True)
class RunConfig:
    device: DeviceSpec = field(default_factory=DeviceSpec)
    grid: GridConfig = field(default_factory=GridConfig)
    solver: SolverSettings = field(default_factory=SolverSettings)
    seed: int = 0
    sweep: SweepConfig = field(default_factory=SweepConfig)
    optimize: OptimizeConfig = field(default_factory=OptimizeConfig)
    output: OutputConfig = field(default_factory=OutputConfig)

    def build_grid(self) -> Grid2D:
        return self.grid.build(self.device)

    @property
    def workers(self) -> int:
        return self.sweep.workers or (os.cpu_count() or 1)


# (section, key) -> (path within RunConfig, type)
_DEVICE = {
    "dot_radius_nm": ("dot_radius_mean", float),
    "dot_elongation": ("dot_elongation", float),
    "dot_axis_angle_deg": ("dot_axis_angle_theta", float),
    "shell_thickness_nm": ("shell_thickness", float),
    "dielectric_thickness_nm": ("dielectric_thickness", float),
    "gate_arc_width_nm": ("gate_arc_width", float),
    "dielectric_permittivity": ("dielectric_permittivity", float),
    "exterior_permittivity": ("exterior_permittivity", float),
}
_MATERIAL = {
    "bulk_gap_ev": ("bulk_gap_Egb", float),
    "kane_ep_ev": ("kane_Ep", float),
    "eff_mass_e": ("eff_mass_e", float),
    "eff_mass_hh": ("eff_mass_hh", float),
    "rel_permittivity": ("rel_permittivity", float),
    "cb_offset_ev": ("cb_offset", float),
    "vb_offset_ev": ("vb_offset", float),
}
_GRID = {"nx": ("nx", int), "ny": ("ny", int), "margin_nm": ("margin", float)}
_SOLVER = {
    "poisson_rtol": ("poisson_rtol", float),
    "poisson_maxiter": ("poisson_maxiter", int),
    "eig_tol_ev": ("eig_tol", float),
    "window_extent_nm": ("window_extent", float),
    "window_spacing_nm": ("window_spacing", float),
    "self_consistent": ("self_consistent", bool),
    "mixing": ("mixing", float),
    "sc_tol_v": ("sc_tol", float),
    "sc_maxiter": ("sc_maxiter", int),
    "hartree_thickness_nm": ("hartree_thickness", float),
}
_SWEEP = {
    "quad_v_min_v": ("quad_v_min", float),
    "quad_v_max_v": ("quad_v_max", float),
    "quad_n": ("quad_n", int),
    "lat_v_min_v": ("lat_v_min", float),
    "lat_v_max_v": ("lat_v_max", float),
    "lat_n": ("lat_n", int),
    "grid_v_fixed_v": ("grid_v_fixed", float),
    "rl_min_v": ("rl_min", float),
    "rl_max_v": ("rl_max", float),
    "rl_n": ("rl_n", int),
    "tb_min_v": ("tb_min", float),
    "tb_max_v": ("tb_max", float),
    "tb_n": ("tb_n", int),
    "refine": ("refine", bool),
    "workers": ("workers", int),
}
_OPTIMIZE = {
    "v0_v": ("v0", float),
    "delta_v_rl0_v": ("delta_v_rl0", float),
    "delta_v_tb0_v": ("delta_v_tb0", float),
    "v_min_v": ("v_min", float),
    "v_max_v": ("v_max", float),
    "rl_min_v": ("rl_min", float),
    "rl_max_v": ("rl_max", float),
    "tb_min_v": ("tb_min", float),
    "tb_max_v": ("tb_max", float),
    "max_evals": ("max_evals", int),
    "target_fss_uev": ("target_fss", float),
    "xatol_v": ("xatol", float),
}
_OUTPUT = {"directory": ("directory", str), "prefix": ("prefix", str)}
_RUN = {"seed": ("seed", int)}

_SECTIONS = {
    "run": _RUN,
    "device": _DEVICE,
    "materials.dot": _MATERIAL,
    "materials.shell": _MATERIAL,
    "grid": _GRID,
    "solver": _SOLVER,
    "sweep": _SWEEP,
    "optimize": _OPTIMIZE,
    "output": _OUTPUT,
}


def _convert(section: str, key: str, raw: str, typ):
    try:
        if typ is bool:
            low = raw.strip().lower()
            if low in ("1", "true", "yes", "on"):
                return True
            if low in ("0", "false", "no", "off"):
                return False
            raise ValueError(raw)
        return typ(raw.strip())
    except ValueError:
        raise ConfigError(f"[{section}] {key}: cannot parse {raw!r} as {typ.__name__}") from None


def parse_config(text: str) -> RunConfig:
    """Parse configuration text; unknown sections or keys raise ConfigError."""
    cp = configparser.ConfigParser(interpolation=None, default_section="__none__")
    cp.optionxform = str
    try:
        cp.read_string(text)
    except configparser.Error as exc:
        raise ConfigError(f"malformed config: {exc}") from None

    values: dict[str, dict] = {name: {} for name in _SECTIONS}
    for section in cp.sections():
        if section not in _SECTIONS:
            raise ConfigError(f"unknown section [{section}]")
        table = _SECTIONS[section]
        for key, raw in cp.items(section):
            if key not in table:
                raise ConfigError(f"unknown key '{key}' in section [{section}]")
            attr, typ = table[key]
            values[section][attr] = _convert(section, key, raw, typ)

    try:
        dot = dataclasses.replace(GAAS, **values["materials.dot"])
        shell = dataclasses.replace(AL033GA067AS, **values["materials.shell"])
        device = DeviceSpec(materials_dot=dot, materials_shell=shell, **values["device"])
        solver = values["solver"]
        if solver.get("poisson_maxiter") == 0:
            solver["poisson_maxiter"] = None
        return RunConfig(
            device=device,
            grid=GridConfig(**values["grid"]),
            solver=SolverSettings(**solver),
            sweep=SweepConfig(**values["sweep"]),
            optimize=OptimizeConfig(**values["optimize"]),
            output=OutputConfig(**values["output"]),
            **values["run"],
        )
    except ConfigError:
        raise
    except GeometryError:
        raise
    except (TypeError, ValueError) as exc:
        raise ConfigError(str(exc)) from None


def load_config(path: str | os.PathLike | None) -> RunConfig:
    if path is None:
        return RunConfig()
    try:
        with open(path) as fh:
            text = fh.read()
    except OSError as exc:
        raise ConfigError(f"cannot read config: {exc}") from None
    return parse_config(text)


def _fmt(v) -> str:
    if isinstance(v, bool):
        return "true" if v else "false"
    if v is None:
        return "0"
    if isinstance(v, float):
        return repr(v)
    return str(v)


def dump_config(cfg: RunConfig) -> str:
    """Serialise every field; ``parse_config(dump_config(c)) == c``."""
    sources = {
        "run": cfg,
        "device": cfg.device,
        "materials.dot": cfg.device.materials_dot,
        "materials.shell": cfg.device.materials_shell,
        "grid": cfg.grid,
        "solver": cfg.solver,
        "sweep": cfg.sweep,
        "optimize": cfg.optimize,
        "output": cfg.output,
    }
    buf = io.StringIO()
    for section, table in _SECTIONS.items():
        buf.write(f"[{section}]\n")
        for key, (attr, _) in table.items():
            buf.write(f"{key} = {_fmt(getattr(sources[section], attr))}\n")
        buf.write("\n")
    return buf.getvalue()
