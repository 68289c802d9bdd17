"""Gate-voltage sweeps and derivative-free FSS minimisation.

Voltage conventions
-------------------
A quadrupole potential ``v`` puts ``-v`` on the top and bottom gates and
``+v`` on the left and right gates, so ``v = -0.5`` is the configuration
with the top/bottom pair positive. The asymmetric corrections raise the
right gate by ``delta_v_rl`` and lower the bottom gate by ``delta_v_tb``::

    (top, bottom, left, right) = (-v, -v - delta_v_tb, +v, +v + delta_v_rl)

A lateral potential ``v`` is ``+v`` on the left gate with the others at 0.
"""

from __future__ import annotations

import io
import math
import time
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field
from typing import Callable, Sequence

import numpy as np
from scipy.optimize import minimize

from .device import DeviceSpec, Grid2D
from .excitonics import ExcitonReport, SolverSettings, evaluate_configuration
from .poisson import GateVoltages

__all__ = [
    "QuadrupoleParam",
    "lateral_gates",
    "SweepRecord",
    "Crossing",
    "SweepResult",
    "GridSweep",
    "TraceEntry",
    "OptimizeResult",
    "run_points",
    "find_crossings",
    "refine_crossing",
    "sweep_quadrupole",
    "sweep_lateral",
    "sweep_grid_asymmetric",
    "minimize_fss",
    "records_to_csv",
    "matrix_to_csv",
    "trace_to_csv",
]

REPORT_COLUMNS = ("fss_ueV", "beta", "xi", "l_x_eh_nm", "l_y_eh_nm", "eps_e", "eps_h")


@dataclass(frozen=True)
class QuadrupoleParam:
    v: float = 0.0
    delta_v_rl: float = 0.0
    delta_v_tb: float = 0.0

    def to_gates(self) -> GateVoltages:
        v = self.v
        return GateVoltages(
            v_top=-v,
            v_bottom=-v - self.delta_v_tb,
            v_left=v,
            v_right=v + self.delta_v_rl,
        )

    def as_tuple(self) -> tuple[float, float, float]:
        return (self.v, self.delta_v_rl, self.delta_v_tb)


def lateral_gates(v: float) -> GateVoltages:
    return GateVoltages(0.0, 0.0, v, 0.0)


@dataclass
class SweepRecord:
    params: dict[str, float]
    report: ExcitonReport | None
    wall_time: float = 0.0
    status: str = "ok"

    @property
    def ok(self) -> bool:
        return self.report is not None


def _evaluate_point(args) -> SweepRecord:
    spec, grid, params, gates, settings = args
    t0 = time.perf_counter()
    try:
        report = evaluate_configuration(spec, grid, gates, settings)
        status = "ok"
    except Exception as exc:  # isolate-and-continue
        report = None
        status = f"error: {exc}".replace("\n", " ").replace(",", ";")
    return SweepRecord(params, report, time.perf_counter() - t0, status)


def run_points(
    spec: DeviceSpec,
    grid: Grid2D,
    points: Sequence[tuple[dict[str, float], GateVoltages]],
    settings: SolverSettings | None = None,
    workers: int = 1,
) -> list[SweepRecord]:
    """Evaluate every ``(params, gates)`` point; results keep request order."""
    tasks = [(spec, grid, params, gates, settings) for params, gates in points]
    if workers <= 1 or len(tasks) <= 1:
        return [_evaluate_point(t) for t in tasks]
    with ProcessPoolExecutor(max_workers=workers) as pool:
        return list(pool.map(_evaluate_point, tasks))


@dataclass
class Crossing:
    """Sign change of delta between two sweep points, optionally refined."""

    lo: float
    hi: float
    root: float | None = None
    report: ExcitonReport | None = None


@dataclass
class SweepResult:
    parameter: str
    records: list[SweepRecord]
    crossings: list[Crossing] = field(default_factory=list)

    def values(self, key: str) -> np.ndarray:
        return np.array([
            r.report.to_dict()[key] if r.ok else np.nan for r in self.records
        ])

    def minimum(self) -> SweepRecord | None:
        ok = [r for r in self.records if r.ok]
        return min(ok, key=lambda r: r.report.fss) if ok else None


def find_crossings(records: Sequence[SweepRecord], parameter: str) -> list[Crossing]:
    """Brackets between consecutive successful points where delta changes sign."""
    out = []
    ok = [r for r in records if r.ok]
    for a, b in zip(ok, ok[1:]):
        da, db = a.report.delta, b.report.delta
        if da == 0.0:
            out.append(Crossing(a.params[parameter], a.params[parameter],
                                a.params[parameter], a.report))
        elif da * db < 0:
            out.append(Crossing(a.params[parameter], b.params[parameter]))
    last = ok[-1] if ok else None
    if last is not None and last.report.delta == 0.0 and len(ok) > 1:
        p = last.params[parameter]
        out.append(Crossing(p, p, p, last.report))
    return out


def refine_crossing(
    evaluate: Callable[[float], ExcitonReport],
    lo: float,
    hi: float,
    fss_tol: float = 0.01,
    max_iter: int = 60,
) -> tuple[float, ExcitonReport]:
    """Bisect on the sign of delta until the FSS drops below ``fss_tol`` (ueV)."""
    d_lo = evaluate(lo).delta
    mid, rep = lo, None
    for _ in range(max_iter):
        mid = 0.5 * (lo + hi)
        rep = evaluate(mid)
        if rep.fss < fss_tol or hi - lo < 1e-9:
            break
        if (rep.delta < 0) == (d_lo < 0):
            lo, d_lo = mid, rep.delta
        else:
            hi = mid
    return mid, rep


def _linspace(lo: float, hi: float, n: int) -> np.ndarray:
    if n < 1:
        raise ValueError("need at least one point")
    return np.linspace(lo, hi, n)


def _sweep_1d(spec, grid, name, values, make_gates, settings, workers, refine):
    points = [({name: float(v)}, make_gates(float(v))) for v in values]
    records = run_points(spec, grid, points, settings, workers)
    crossings = find_crossings(records, name)
    if refine:
        def evaluate(x):
            return evaluate_configuration(spec, grid, make_gates(x), settings)

        for c in crossings:
            if c.root is None:
                c.root, c.report = refine_crossing(evaluate, c.lo, c.hi)
    return SweepResult(name, records, crossings)


def sweep_quadrupole(
    spec: DeviceSpec,
    grid: Grid2D,
    v_range: tuple[float, float] = (-0.5, 0.7),
    n_points: int = 13,
    settings: SolverSettings | None = None,
    workers: int = 1,
    refine: bool = True,
) -> SweepResult:
    """FSS and overlap along the pure quadrupole axis."""
    if n_points < 2:
        raise ValueError("n_points must be >= 2")
    values = _linspace(*v_range, n_points)
    return _sweep_1d(spec, grid, "v", values,
                     lambda v: QuadrupoleParam(v).to_gates(), settings, workers, refine)


def sweep_lateral(
    spec: DeviceSpec,
    grid: Grid2D,
    v_range: tuple[float, float] = (0.0, 0.4),
    n_points: int = 9,
    settings: SolverSettings | None = None,
    workers: int = 1,
    refine: bool = True,
) -> SweepResult:
    """FSS and overlap with only the left gate biased."""
    if n_points < 2:
        raise ValueError("n_points must be >= 2")
    values = _linspace(*v_range, n_points)
    return _sweep_1d(spec, grid, "v", values, lateral_gates, settings, workers, refine)


@dataclass
class GridSweep:
    v_fixed: float
    rl_values: np.ndarray
    tb_values: np.ndarray
    records: list[list[SweepRecord]]

    def matrix(self, key: str = "fss_ueV") -> np.ndarray:
        return np.array([
            [r.report.to_dict()[key] if r.ok else np.nan for r in row]
            for row in self.records
        ])

    def minimum(self) -> tuple[int, int, SweepRecord]:
        fss = self.matrix("fss_ueV")
        if np.all(np.isnan(fss)):
            raise ValueError("no successful grid points")
        i, j = np.unravel_index(np.nanargmin(fss), fss.shape)
        return int(i), int(j), self.records[i][j]


def sweep_grid_asymmetric(
    spec: DeviceSpec,
    grid: Grid2D,
    v_fixed: float = 0.5,
    rl_range: tuple[float, float] = (0.0, 0.2),
    tb_range: tuple[float, float] = (0.0, 0.2),
    n_rl: int = 5,
    n_tb: int = 5,
    settings: SolverSettings | None = None,
    workers: int = 1,
) -> GridSweep:
    """FSS over the (delta_v_rl, delta_v_tb) plane at fixed quadrupole ``v``."""
    rl = _linspace(*rl_range, n_rl)
    tb = _linspace(*tb_range, n_tb)
    points = []
    for a in rl:
        for b in tb:
            p = QuadrupoleParam(v_fixed, float(a), float(b))
            points.append(({"v": v_fixed, "delta_v_rl": float(a), "delta_v_tb": float(b)},
                           p.to_gates()))
    flat = run_points(spec, grid, points, settings, workers)
    rows = [flat[i * len(tb):(i + 1) * len(tb)] for i in range(len(rl))]
    return GridSweep(v_fixed, rl, tb, rows)


@dataclass(frozen=True)
class TraceEntry:
    v: float
    delta_v_rl: float
    delta_v_tb: float
    fss: float
    delta: float
    beta: float


@dataclass
class OptimizeResult:
    param: QuadrupoleParam
    report: ExcitonReport
    trace: list[TraceEntry]
    converged: bool
    message: str


class _Stop(Exception):
    pass


def minimize_fss(
    spec: DeviceSpec,
    grid: Grid2D,
    initial: QuadrupoleParam,
    bounds: Sequence[tuple[float, float]],
    settings: SolverSettings | None = None,
    target_fss: float = 0.01,
    xatol: float = 1e-4,
    max_evals: int = 300,
    initial_step: float = 0.05,
    max_restarts: int = 3,
    seed: int = 0,
) -> OptimizeResult:
    """Bounded Nelder-Mead on FSS over ``(v, delta_v_rl, delta_v_tb)``.

    A parameter whose bounds have ``lo == hi`` is held fixed. Stops when the
    FSS falls below ``target_fss`` (ueV), when the simplex shrinks below
    ``xatol`` (V) without a restart improving on it, or after ``max_evals``
    evaluations (then ``converged`` is False). Restarts use a fresh simplex,
    randomly oriented from ``seed``, around the best point so far.
    """
    bounds = [tuple(map(float, b)) for b in bounds]
    if len(bounds) != 3:
        raise ValueError("bounds must give (lo, hi) for v, delta_v_rl, delta_v_tb")
    x0 = np.array(initial.as_tuple(), dtype=float)
    for k, (lo, hi) in enumerate(bounds):
        if not lo <= x0[k] <= hi:
            raise ValueError(f"initial point outside bounds in coordinate {k}")
    free = [k for k, (lo, hi) in enumerate(bounds) if hi > lo]
    rng = np.random.default_rng(seed)

    trace: list[TraceEntry] = []
    best: list = [math.inf, None, None]

    def full(z):
        x = x0.copy()
        x[free] = z
        return x

    def objective(z):
        if len(trace) >= max_evals:
            raise _Stop("budget")
        x = full(np.clip(z, [bounds[k][0] for k in free], [bounds[k][1] for k in free]))
        p = QuadrupoleParam(*map(float, x))
        try:
            rep = evaluate_configuration(spec, grid, p.to_gates(), settings)
        except Exception:
            trace.append(TraceEntry(*p.as_tuple(), math.inf, math.nan, math.nan))
            return 1e12
        trace.append(TraceEntry(*p.as_tuple(), rep.fss, rep.delta, rep.beta))
        if rep.fss < best[0]:
            best[:] = [rep.fss, p, rep]
        if rep.fss < target_fss:
            raise _Stop("target")
        return rep.fss

    converged, message = False, ""
    try:
        objective(x0[free])
        if free:
            start = x0[free]
            step = initial_step
            for attempt in range(max_restarts + 1):
                before = best[0]
                simplex = _simplex(start, step, bounds, free, rng if attempt else None)
                minimize(
                    objective, start, method="Nelder-Mead",
                    bounds=[bounds[k] for k in free],
                    options={"initial_simplex": simplex, "xatol": xatol,
                             "fatol": math.inf, "maxfev": 10 * max_evals},
                )
                start = np.array(best[1].as_tuple())[free]
                step *= 0.5
                if attempt > 0 and before - best[0] <= 1e-3 * before:
                    break
        converged, message = True, "simplex converged"
    except _Stop as stop:
        converged = str(stop) == "target"
        message = "target FSS reached" if converged else "evaluation budget exhausted"
    if best[2] is None:
        raise RuntimeError("no successful evaluation")
    return OptimizeResult(best[1], best[2], trace, converged, message)


def _simplex(start, step, bounds, free, rng):
    n = len(free)
    directions = np.eye(n)
    if rng is not None:
        q, _ = np.linalg.qr(rng.standard_normal((n, n)))
        directions = q
    pts = [start]
    lo = np.array([bounds[k][0] for k in free])
    hi = np.array([bounds[k][1] for k in free])
    for d in directions:
        p = start + step * d
        if np.any(p > hi) or np.any(p < lo):
            p = start - step * d
        pts.append(np.clip(p, lo, hi))
    return np.array(pts)


def _fmt(x) -> str:
    return "" if x is None or (isinstance(x, float) and math.isnan(x)) else f"{x:.9g}"


def records_to_csv(records: Sequence[SweepRecord], path=None) -> str:
    """Sweep table: parameter columns, report columns, status."""
    params = list(records[0].params) if records else []
    buf = io.StringIO()
    buf.write(",".join(params + list(REPORT_COLUMNS) + ["status"]) + "\n")
    for r in records:
        vals = [_fmt(r.params[p]) for p in params]
        d = r.report.to_dict() if r.ok else {}
        vals += [_fmt(d.get(c)) for c in REPORT_COLUMNS]
        buf.write(",".join(vals + [r.status]) + "\n")
    return _finish(buf, path)


def matrix_to_csv(sweep: GridSweep, key: str = "fss_ueV", path=None) -> str:
    """Dense matrix: first column delta_v_rl, header row delta_v_tb."""
    m = sweep.matrix(key)
    buf = io.StringIO()
    buf.write("delta_v_rl\\delta_v_tb," + ",".join(_fmt(float(b)) for b in sweep.tb_values) + "\n")
    for a, row in zip(sweep.rl_values, m):
        buf.write(_fmt(float(a)) + "," + ",".join(_fmt(float(x)) for x in row) + "\n")
    return _finish(buf, path)


def trace_to_csv(trace: Sequence[TraceEntry], path=None) -> str:
    buf = io.StringIO()
    buf.write("eval,v,delta_v_rl,delta_v_tb,fss_ueV,delta_ueV,beta\n")
    for k, t in enumerate(trace):
        buf.write(",".join([str(k)] + [_fmt(x) for x in
                  (t.v, t.delta_v_rl, t.delta_v_tb, t.fss, t.delta, t.beta)]) + "\n")
    return _finish(buf, path)


def _finish(buf: io.StringIO, path) -> str:
    text = buf.getvalue()
    if path is not None:
        with open(path, "w", newline="\n") as fh:
            fh.write(text)
    return text
