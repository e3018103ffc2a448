import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from mameshfree.geometry import (
    QUASI_UNIFORM_BOUND,
    DegenerateDiscretization,
    Ellipse,
    MeshMetrics,
    PointSet,
    UnitDisk,
    UnitSquare,
    boundary_fill_distance,
    boundary_separation,
    fill_distance_interior,
    generate_points,
    make_domain,
    metrics,
    probe_grid,
    separation,
)

DOMAINS = [UnitDisk(), UnitSquare(), Ellipse(1.0, 0.6)]
IDS = ["disk", "square", "ellipse"]


@pytest.mark.parametrize("domain", DOMAINS, ids=IDS)
def test_boundary_param_lies_on_boundary_and_is_outside_interior(domain):
    t = np.linspace(0, 1, 997, endpoint=False)
    p = domain.boundary_param(t)
    assert not domain.inside(p).any()
    assert np.abs(domain.boundary_distance(p)).max() < 1e-3  # sampled boundary, coarse check
    np.testing.assert_allclose(domain.boundary_coord(p), t, atol=1e-12)
    assert len(np.unique(np.round(p, 12), axis=0)) == len(t)


def test_boundary_param_exact_on_disk_and_ellipse():
    t = np.linspace(0, 1, 500, endpoint=False)
    p = UnitDisk().boundary_param(t)
    np.testing.assert_allclose(np.hypot(*p.T), 1.0, atol=1e-14)
    e = Ellipse(0.9, 0.5)
    q = e.boundary_param(t)
    np.testing.assert_allclose((q[:, 0] / 0.9) ** 2 + (q[:, 1] / 0.5) ** 2, 1.0, atol=1e-12)


def test_ellipse_arclength_is_uniform():
    e = Ellipse(1.0, 0.4)
    p = e.boundary_param(np.linspace(0, 1, 4001))
    seg = np.hypot(*np.diff(p, axis=0).T)
    np.testing.assert_allclose(seg, e.perimeter / 4000, rtol=1e-5)


@pytest.mark.parametrize(
    "domain,expected",
    [(UnitDisk(), math.pi), (UnitSquare(), 1.0), (Ellipse(0.8, 0.5), math.pi * 0.4)],
    ids=IDS,
)
def test_area_by_quadrature(domain, expected):
    assert domain.area == pytest.approx(expected, abs=1e-12)
    # independent check: polar/shoelace integration of the boundary curve
    p = domain.boundary_param(np.linspace(0, 1, 200001, endpoint=False))
    x, y = p.T
    shoelace = 0.5 * abs(np.dot(x, np.roll(y, -1)) - np.dot(y, np.roll(x, -1)))
    assert shoelace == pytest.approx(expected, abs=1e-6)


def test_make_domain():
    assert isinstance(make_domain("unit_disk"), UnitDisk)
    assert isinstance(make_domain("unit_square"), UnitSquare)
    assert make_domain("ellipse", 1.0, 0.5).area == pytest.approx(math.pi / 2)
    with pytest.raises(ValueError):
        make_domain("ellipse")
    with pytest.raises(ValueError):
        make_domain("annulus")
    assert not UnitSquare().smooth_boundary and UnitDisk().smooth_boundary


def test_generate_square_half_spacing():
    pts = generate_points(UnitSquare(), 0.5, "trial", 0)
    expected = {(0.25, 0.25), (0.25, 0.75), (0.75, 0.25), (0.75, 0.75)}
    assert {tuple(np.round(p, 12)) for p in pts.interior} == expected
    t = np.sort(UnitSquare().boundary_coord(pts.boundary))
    gaps = np.diff(np.append(t, t[0] + 1))
    assert gaps.max() <= 0.125 + 1e-12


def test_generate_degenerate():
    with pytest.raises(DegenerateDiscretization, match="degenerate discretization"):
        generate_points(UnitDisk(), 2.5, "trial", 0)
    with pytest.raises(ValueError):
        generate_points(UnitDisk(), -0.1)


@pytest.mark.parametrize("seed", [0, 3])
def test_generate_deterministic(seed):
    a = generate_points(UnitDisk(), 0.2, "test", seed)
    b = generate_points(UnitDisk(), 0.2, "test", seed)
    np.testing.assert_array_equal(a.interior, b.interior)
    np.testing.assert_array_equal(a.boundary, b.boundary)
    assert a.role == "test"


def test_seed_changes_interior_only():
    a = generate_points(UnitSquare(), 0.2, "trial", 0)
    b = generate_points(UnitSquare(), 0.2, "trial", 7)
    np.testing.assert_array_equal(a.boundary, b.boundary)
    assert not np.array_equal(a.interior, b.interior)


@pytest.mark.parametrize("domain", DOMAINS, ids=IDS)
@pytest.mark.parametrize("h", [0.3, 0.15, 0.08])
def test_generated_point_set_invariants(domain, h):
    pts = generate_points(domain, h, "trial", 0)
    assert domain.inside(pts.interior).all()
    assert domain.boundary_distance(pts.interior).min() > h / 4
    np.testing.assert_allclose(domain.boundary_param(domain.boundary_coord(pts.boundary)), pts.boundary, atol=1e-12)
    assert separation(pts.all) > 0
    m = metrics(domain, pts, 300)
    assert m.h_Y / m.q_Y <= QUASI_UNIFORM_BOUND
    assert m.q_I <= m.h_I
    t = np.sort(domain.boundary_coord(pts.boundary))
    assert np.diff(np.append(t, t[0] + 1)).max() <= h / domain.perimeter + 1e-12


@pytest.mark.parametrize("domain", [UnitDisk(), UnitSquare()], ids=["disk", "square"])
def test_refinement_does_not_increase_fill(domain):
    h_Y = [metrics(domain, generate_points(domain, h), 400).h_Y for h in (0.3, 0.15, 0.075)]
    assert h_Y[0] >= h_Y[1] >= h_Y[2]


def test_fill_distance_examples():
    sq = UnitSquare()
    four = np.array([[0.25, 0.25], [0.25, 0.75], [0.75, 0.25], [0.75, 0.75]])
    assert fill_distance_interior(sq, four, 400) == pytest.approx(0.25 * math.sqrt(2), abs=0.005)
    assert fill_distance_interior(sq, np.array([[0.5, 0.5]]), 400) == pytest.approx(math.sqrt(0.5), abs=0.005)
    probes, _ = probe_grid(sq, 50)
    assert fill_distance_interior(sq, probes, 50) == 0.0
    with pytest.raises(ValueError):
        fill_distance_interior(sq, np.empty((0, 2)))


def test_fill_distance_probe_convergence():
    domain = UnitDisk()
    pts = generate_points(domain, 0.2)
    estimates = {res: fill_distance_interior(domain, pts, res) for res in (50, 100, 200, 400)}
    for res in (100, 200, 400):
        assert abs(estimates[res] - estimates[res // 2]) <= 2 * domain.diameter / (res // 2)


def test_separation_examples():
    assert separation([(0, 0), (1, 0), (0, 1)]) == 0.5
    assert separation([(0, 0), (0, 0.2), (5, 5)]) == pytest.approx(0.1)
    h = 0.07
    gx, gy = np.meshgrid(np.arange(10) * h, np.arange(10) * h)
    assert separation(np.column_stack([gx.ravel(), gy.ravel()])) == pytest.approx(h / 2)
    with pytest.raises(ValueError):
        separation([(0, 0)])


@settings(max_examples=50, deadline=None)
@given(st.integers(0, 2**32 - 1), st.floats(-10, 10), st.floats(-10, 10))
def test_separation_permutation_and_translation_invariant(seed, tx, ty):
    rng = np.random.default_rng(seed)
    pts = rng.uniform(-1, 1, (30, 2))
    base = separation(pts)
    assert separation(pts[rng.permutation(30)]) == base
    assert separation(pts + [tx, ty]) == pytest.approx(base, rel=1e-9, abs=1e-12)


def test_boundary_fill_examples():
    disk = UnitDisk()
    assert boundary_fill_distance(disk, disk.boundary_param(np.arange(4) / 4)) == pytest.approx(math.pi / 4)
    for n in (3, 7, 50):
        assert boundary_fill_distance(disk, disk.boundary_param(np.arange(n) / n)) == pytest.approx(math.pi / n)
    assert boundary_fill_distance(disk, [(1.0, 0.0)]) == pytest.approx(math.pi)
    with pytest.raises(ValueError):
        boundary_fill_distance(disk, np.empty((0, 2)))
    assert boundary_separation(disk, disk.boundary_param(np.arange(8) / 8)) == pytest.approx(math.pi / 8)


def test_metrics_composition_and_roles():
    m = MeshMetrics("trial", 0.3, 0.2, 0.1, 0.15)
    assert (m.h_Y, m.q_Y) == (0.3, 0.1)
    with pytest.raises(AttributeError):
        m.s_X
    t = MeshMetrics("test", 0.3, 0.2, 0.1, 0.15)
    assert (t.s_I, t.s_B, t.s_X) == (0.3, 0.2, 0.3)
    assert set(t.as_dict()) == {"s_I", "s_B", "s_X"}
    with pytest.raises(AttributeError):
        t.h_Y


def test_square_quarter_grid_is_quasi_uniform():
    m = metrics(UnitSquare(), generate_points(UnitSquare(), 0.25), 400)
    assert m.h_Y / m.q_Y <= 4


def test_csv_round_trip(tmp_path):
    pts = generate_points(Ellipse(0.9, 0.6), 0.17, "test", 5)
    path = tmp_path / "pts.csv"
    pts.to_csv(path)
    assert path.read_text().splitlines()[0] == "role,x,y,on_boundary"
    back = PointSet.from_csv(path)
    assert back.role == "test"
    np.testing.assert_array_equal(back.interior, pts.interior)
    np.testing.assert_array_equal(back.boundary, pts.boundary)


def test_pointset_order_and_role_validation():
    pts = PointSet([[0.5, 0.5]], [[1, 0], [0, 1]])
    np.testing.assert_array_equal(pts.all, [[0.5, 0.5], [1, 0], [0, 1]])
    assert len(pts) == 3 and pts.n_interior == 1
    with pytest.raises(ValueError):
        PointSet([[0, 0]], [[1, 0]], role="other")


@pytest.mark.parametrize("a,b", [(0.0, 0.5), (-1.0, 0.5), (1.2, 0.5)])
def test_ellipse_axes_validated(a, b):
    with pytest.raises(ValueError):
        Ellipse(a, b)
