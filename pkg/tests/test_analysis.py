import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from mameshfree.analysis import (
    SIN2X_COSY,
    TABLE_HEADER,
    ConvergenceRow,
    DeltaRule,
    bernstein_probe,
    convergence_study,
    estimate_rate,
    l2_error,
    linf_error,
    sampling_probe,
    sobolev_norms,
    write_table,
)
from mameshfree.catalog import manufactured
from mameshfree.geometry import UnitDisk, UnitSquare, generate_points, probe_grid
from mameshfree.kernel import C2, C4, ScaledKernel
from mameshfree.operator import Problem
from mameshfree.solver import SolverConfig
from mameshfree.trialspace import TrialSpace


def test_l2_examples():
    sq = UnitSquare()
    assert l2_error(sq, 0.3, 0.0, 256) == pytest.approx(0.3, abs=1e-3)
    assert l2_error(sq, lambda x, y: x, 0.0, 256) == pytest.approx(1 / math.sqrt(3), abs=1e-3)
    f = lambda x, y: np.sin(x) * y  # noqa: E731
    assert l2_error(sq, f, f) == 0.0
    assert linf_error(sq, f, f) == 0.0
    with pytest.raises(ValueError):
        l2_error(sq, 1.0, 0.0, 8)


def test_linf_example():
    assert linf_error(UnitSquare(), lambda x, y: x, 0.0, 100) == pytest.approx(0.995)


def test_disk_area_from_constant_norm():
    assert l2_error(UnitDisk(), 1.0, 0.0, 256) == pytest.approx(math.sqrt(math.pi), abs=1e-2)


def test_quadrature_converges_with_resolution():
    sq = UnitSquare()
    vals = [l2_error(sq, lambda x, y: x, 0.0, r) for r in (128, 256, 512)]
    assert abs(vals[1] - vals[0]) <= 0.01 * vals[0]
    assert abs(vals[2] - vals[1]) <= 0.01 * vals[1]


@settings(max_examples=30, deadline=None)
@given(st.floats(-3, 3), st.floats(-3, 3), st.floats(-3, 3))
def test_l2_symmetric_and_triangle(p, q, r):
    dom = UnitDisk()
    a = lambda x, y: p * x + np.sin(y)  # noqa: E731
    b = lambda x, y: q * y**2  # noqa: E731
    c = lambda x, y: r * x * y  # noqa: E731
    assert l2_error(dom, a, b, 64) == l2_error(dom, b, a, 64)
    assert l2_error(dom, a, c, 64) <= l2_error(dom, a, b, 64) + l2_error(dom, b, c, 64) + 1e-12


def test_rate_examples():
    assert estimate_rate(0.09, 0.04, 0.3, 0.2) == pytest.approx(2.0)
    assert estimate_rate(0.5, 0.5, 0.3, 0.2) == 0.0
    assert estimate_rate(0.04, 0.01, 0.2, 0.1) == pytest.approx(2.0)
    with pytest.raises(ValueError):
        estimate_rate(0.0, 0.01, 0.2, 0.1)
    with pytest.raises(ValueError):
        estimate_rate(0.1, 0.01, 0.2, 0.2)


def test_delta_rule():
    assert DeltaRule.fixed(0.7).delta(0.1) == 0.7
    assert DeltaRule.proportional(3.0).delta(0.1) == pytest.approx(0.3)
    with pytest.raises(ValueError):
        DeltaRule("other", 1.0)
    with pytest.raises(ValueError):
        DeltaRule.fixed(0.0)


def test_study_preconditions():
    prob = manufactured("MA2", UnitDisk())
    with pytest.raises(ValueError, match="2 levels"):
        convergence_study(prob, 0.3, 1, DeltaRule.fixed(0.7))
    with pytest.raises(ValueError, match="exact"):
        convergence_study(Problem(UnitDisk(), 1.0, 0.0), 0.3, 2, DeltaRule.fixed(0.7))


@pytest.fixture(scope="module")
def quick_study():
    prob = manufactured("MA2", UnitDisk())
    cfg = SolverConfig(max_iters=5)
    return prob, cfg, convergence_study(prob, 0.4, 2, DeltaRule.fixed(0.7), cfg, resolution=64)


def test_study_rows(quick_study):
    _, _, rows = quick_study
    assert [r.level for r in rows] == [0, 1]
    assert rows[0].h_Y > rows[1].h_Y
    assert rows[0].rate_l2 is None and rows[1].rate_l2 is not None
    assert rows[1].rate_l2 == pytest.approx(estimate_rate(rows[0].e_l2, rows[1].e_l2, rows[0].h_Y, rows[1].h_Y))
    for r in rows:
        assert r.e_l2 >= 0 and r.delta == 0.7 and r.M > r.N
        assert r.s_X < r.h_Y


def test_study_is_deterministic(quick_study):
    prob, cfg, rows = quick_study
    again = convergence_study(prob, 0.4, 2, DeltaRule.fixed(0.7), cfg, resolution=64)
    assert [r.csv_fields() for r in again] == [r.csv_fields() for r in rows]


def test_stationary_rule_scales_delta():
    prob = manufactured("MA2", UnitDisk())
    rows = convergence_study(prob, 0.4, 2, DeltaRule.proportional(2.0), SolverConfig(max_iters=0), resolution=32)
    for r in rows:
        assert r.delta == pytest.approx(2.0 * r.h_Y)


def test_write_table(tmp_path, quick_study):
    _, _, rows = quick_study
    path = tmp_path / "table.csv"
    write_table(rows, path)
    lines = path.read_text().splitlines()
    assert lines[0] == TABLE_HEADER
    assert len(lines) == 3
    first = lines[1].split(",")
    assert len(first) == 15 and first[12] == ""


def test_row_csv_formatting():
    row = ConvergenceRow(0, 0.1, 0.05, 0.05, 0.7, 10, 20, 3, 1e-3, 2e-3, 0.1, 0.2, None, 1.5, True)
    assert row.csv_fields()[-1] == "true" and row.csv_fields()[12] == ""


def test_sin2x_cosy_jet_against_finite_differences(rng):
    pts = rng.uniform(0, 1, (50, 2))
    v, g, H = SIN2X_COSY.jet(pts)
    eps = 1e-6
    for i in range(2):
        e = np.zeros(2)
        e[i] = eps
        vp, gp, _ = SIN2X_COSY.jet(pts + e)
        vm, gm, _ = SIN2X_COSY.jet(pts - e)
        np.testing.assert_allclose((vp - vm) / (2 * eps), g[:, i], atol=1e-8)
        np.testing.assert_allclose((gp - gm) / (2 * eps), H[:, i], atol=1e-8)


def test_sobolev_norms_of_linear_field():
    # u = x on the unit square: |u|_L2^2 = 1/3, gradient adds 1, Hessian adds 0
    jet = lambda p: (p[:, 0], np.tile([1.0, 0.0], (len(p), 1)), np.zeros((len(p), 2, 2)))  # noqa: E731
    l2, h2 = sobolev_norms(UnitSquare(), jet, 256)
    assert l2 == pytest.approx(math.sqrt(1 / 3), abs=1e-4)
    assert h2 == pytest.approx(math.sqrt(4 / 3), abs=1e-4)


@pytest.fixture(scope="module")
def square_levels():
    sq = UnitSquare()
    return sq, [generate_points(sq, h) for h in (0.4, 0.2)]


def test_bernstein_probe_basic(square_levels):
    sq, sets = square_levels
    res = bernstein_probe(sq, [TrialSpace(Y, ScaledKernel(C4, 0.5)) for Y in sets], trials=5, resolution=64)
    assert len(res.max_ratio) == 2 and all(r > 0 for r in res.max_ratio)
    assert all(w >= m for w, m in zip(res.worst_ratio, res.max_ratio))
    assert math.isfinite(res.slope) and math.isfinite(res.worst_slope)
    assert "order m = 2" in res.note


def test_bernstein_ratio_grows_when_delta_halved(square_levels):
    sq, sets = square_levels
    Y = sets[1]
    wide = bernstein_probe(sq, [TrialSpace(Y, ScaledKernel(C4, 0.6))], trials=20, resolution=64, seed=1)
    narrow = bernstein_probe(sq, [TrialSpace(Y, ScaledKernel(C4, 0.3))], trials=20, resolution=64, seed=1)
    assert narrow.max_ratio[0] > wide.max_ratio[0]
    assert narrow.worst_ratio[0] > wide.worst_ratio[0]


def test_bernstein_rejects_c2(square_levels):
    sq, sets = square_levels
    with pytest.raises(ValueError):
        bernstein_probe(sq, [TrialSpace(sets[0], ScaledKernel(C2, 0.5))], trials=1, resolution=32)


def test_sampling_probe_zero_and_single_level(square_levels):
    sq, sets = square_levels
    ts = [TrialSpace(Y, ScaledKernel(C4, 0.8)) for Y in sets]
    zero = sampling_probe(sq, ts, 0, resolution=64)
    assert zero.l2 == [0.0, 0.0] and zero.scaled_h2 == [0.0, 0.0]
    single = sampling_probe(sq, ts[:1], SIN2X_COSY, resolution=64)
    assert len(single.ratio) == 1 and single.spread == 1.0
    assert single.l2[0] > 0


def test_probe_grid_cell_area():
    pts, cell = probe_grid(UnitDisk(), 200)
    assert cell == pytest.approx(4 / 200**2)
    assert len(pts) * cell == pytest.approx(math.pi, abs=1e-2)
