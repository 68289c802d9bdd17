import math

import numpy as np
import pytest

from qdfss.excitonics import evaluate_configuration
from qdfss.poisson import GateVoltages
from qdfss.sweep import (
    QuadrupoleParam,
    SweepRecord,
    find_crossings,
    lateral_gates,
    matrix_to_csv,
    minimize_fss,
    records_to_csv,
    refine_crossing,
    run_points,
    sweep_grid_asymmetric,
    sweep_lateral,
    sweep_quadrupole,
    trace_to_csv,
)

BOUNDS = [(0.35, 0.65), (0.0, 0.2), (0.0, 0.2)]


def test_quadrupole_mapping():
    g = QuadrupoleParam(0.3, 0.05, 0.02).to_gates()
    assert g.as_tuple() == pytest.approx((-0.3, -0.32, 0.3, 0.35))
    assert QuadrupoleParam(0.0).to_gates() == GateVoltages()


def test_lateral_mapping():
    assert lateral_gates(0.2).as_tuple() == (0.0, 0.0, 0.2, 0.0)


def test_find_crossings_on_synthetic_records():
    class R:
        def __init__(self, d):
            self.delta, self.fss = d, 2 * abs(d)

    recs = [SweepRecord({"v": v}, R(d)) for v, d in [(0, 3.0), (1, 1.0), (2, -1.0), (3, -2.0)]]
    recs.insert(2, SweepRecord({"v": 1.5}, None, status="error: x"))
    (c,) = find_crossings(recs, "v")
    assert (c.lo, c.hi, c.root) == (1, 2, None)


def test_refine_crossing_linear():
    class R:
        def __init__(self, d):
            self.delta, self.fss = d, 2 * abs(d)

    root, rep = refine_crossing(lambda x: R(10.0 * (0.3137 - x)), 0.0, 1.0, fss_tol=1e-3)
    assert rep.fss < 1e-3
    assert root == pytest.approx(0.3137, abs=1e-4)


@pytest.fixture(scope="module")
def quad(spec, coarse_grid):
    return sweep_quadrupole(spec, coarse_grid, n_points=7)


def test_quadrupole_sweep_has_single_zero(quad):
    assert len(quad.records) == 7 and all(r.ok for r in quad.records)
    assert len(quad.crossings) == 1
    c = quad.crossings[0]
    assert c.lo < c.root < c.hi
    assert c.report.fss < 0.01
    assert np.all(quad.values("beta") > 0.9)


def test_sweep_order_preserved(quad):
    assert [r.params["v"] for r in quad.records] == pytest.approx(np.linspace(-0.5, 0.7, 7))


def test_zero_width_range_is_deterministic(spec, coarse_grid):
    res = sweep_quadrupole(spec, coarse_grid, v_range=(0.0, 0.0), n_points=3, refine=False)
    fss = res.values("fss_ueV")
    assert fss[0] == fss[1] == fss[2]
    assert res.crossings == []


def test_worker_count_does_not_change_output(spec, coarse_grid):
    points = [({"v": v}, QuadrupoleParam(v).to_gates()) for v in (0.1, 0.3, 0.6)]
    serial = run_points(spec, coarse_grid, points, workers=1)
    parallel = run_points(spec, coarse_grid, points, workers=2)
    assert records_to_csv(serial) == records_to_csv(parallel)


def test_lateral_zero_matches_unbiased(spec, coarse_grid):
    res = sweep_lateral(spec, coarse_grid, v_range=(0.0, 0.1), n_points=2, refine=False)
    direct = evaluate_configuration(spec, coarse_grid, GateVoltages())
    assert res.records[0].report.fss == direct.fss
    assert res.records[0].report.beta == direct.beta


def test_lateral_bias_lowers_overlap(spec, coarse_grid):
    res = sweep_lateral(spec, coarse_grid, v_range=(0.0, 0.3), n_points=3, refine=False)
    beta = res.values("beta")
    assert beta[0] > beta[1] > beta[2]


def test_single_point_grid(spec, coarse_grid):
    gs = sweep_grid_asymmetric(spec, coarse_grid, 0.5, (0.1, 0.1), (0.05, 0.05), 1, 1)
    direct = evaluate_configuration(spec, coarse_grid, QuadrupoleParam(0.5, 0.1, 0.05).to_gates())
    assert gs.matrix().shape == (1, 1)
    assert gs.matrix()[0, 0] == direct.fss
    assert gs.minimum()[:2] == (0, 0)


def test_grid_layout(spec, coarse_grid):
    gs = sweep_grid_asymmetric(spec, coarse_grid, 0.5, (0.0, 0.1), (0.0, 0.2), 2, 3)
    assert gs.matrix().shape == (2, 3)
    assert gs.records[1][2].params == {"v": 0.5, "delta_v_rl": 0.1, "delta_v_tb": 0.2}
    lines = matrix_to_csv(gs).splitlines()
    assert lines[0] == "delta_v_rl\\delta_v_tb,0,0.1,0.2"
    assert lines[2].startswith("0.1,")
    assert len(lines) == 3


def test_failure_isolated(spec, coarse_grid):
    points = [({"v": 0.1}, QuadrupoleParam(0.1).to_gates()),
              ({"v": 1e9}, QuadrupoleParam(1e9).to_gates()),
              ({"v": 0.2}, QuadrupoleParam(0.2).to_gates())]
    recs = run_points(spec, coarse_grid, points)
    assert [r.ok for r in recs] == [True, False, True]
    assert recs[1].status.startswith("error:")
    row = records_to_csv(recs).splitlines()[2]
    assert row.split(",")[0] == "1e+09"
    assert len(row.split(",")) == len(records_to_csv(recs).splitlines()[0].split(","))


def test_records_csv_header(quad):
    text = records_to_csv(quad.records)
    header = text.splitlines()[0].split(",")
    assert header[0] == "v" and header[1] == "fss_ueV" and header[-1] == "status"
    assert "\r" not in text
    assert len(text.splitlines()) == 8


def test_minimize_stops_at_target(spec, coarse_grid):
    res = minimize_fss(spec, coarse_grid, QuadrupoleParam(0.5, 0.095, 0.085), BOUNDS,
                       target_fss=1e6)
    assert len(res.trace) == 1
    assert res.converged and res.message == "target FSS reached"


def test_minimize_budget(spec, coarse_grid):
    res = minimize_fss(spec, coarse_grid, QuadrupoleParam(0.5, 0.095, 0.085), BOUNDS,
                       max_evals=1)
    assert not res.converged
    assert len(res.trace) == 1
    assert res.report.fss == res.trace[0].fss


def test_minimize_rejects_outside_start(spec, coarse_grid):
    with pytest.raises(ValueError):
        minimize_fss(spec, coarse_grid, QuadrupoleParam(0.9), BOUNDS)


def test_minimize_aligned_one_dimensional(spec, coarse_grid):
    bounds = [(0.35, 0.65), (0.0, 0.0), (0.0, 0.0)]
    res = minimize_fss(spec, coarse_grid, QuadrupoleParam(0.5), bounds, max_evals=80)
    assert res.converged
    assert res.report.fss < 0.01
    assert res.param.delta_v_rl == 0.0 and res.param.delta_v_tb == 0.0
    assert res.report.fss == min(t.fss for t in res.trace)
    for t in res.trace:
        assert 0.35 <= t.v <= 0.65


def test_trace_csv(spec, coarse_grid):
    res = minimize_fss(spec, coarse_grid, QuadrupoleParam(0.5), BOUNDS, max_evals=3)
    lines = trace_to_csv(res.trace).splitlines()
    assert lines[0] == "eval,v,delta_v_rl,delta_v_tb,fss_ueV,delta_ueV,beta"
    assert len(lines) == 4
    assert all(math.isfinite(float(x)) for x in lines[1].split(","))
