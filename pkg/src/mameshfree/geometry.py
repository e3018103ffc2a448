"""Convex 2D domains, quasi-uniform point sets and fill/separation metrics.

The boundary is handled through a single periodic chart: normalized
arclength t in [0, 1).  Boundary fill and separation distances are
measured along that chart, scaled back to domain units by the perimeter.
"""
from __future__ import annotations

import csv
import math
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np
from scipy.integrate import cumulative_simpson
from scipy.spatial import cKDTree

QUASI_UNIFORM_BOUND = 4.0
# Points within this relative margin of a curved boundary count as on it,
# so round-off in boundary_param never lands a boundary point "inside".
BOUNDARY_EPS = 1e-12


class DegenerateDiscretization(ValueError):
    pass


class Domain:
    """Base class for the supported convex domains."""

    shape: str
    chart_count = 1

    def inside(self, p) -> np.ndarray:
        raise NotImplementedError

    def boundary_param(self, t) -> np.ndarray:
        raise NotImplementedError

    def boundary_coord(self, p) -> np.ndarray:
        """Inverse of ``boundary_param`` for points on the boundary."""
        raise NotImplementedError

    @property
    def area(self) -> float:
        raise NotImplementedError

    @property
    def perimeter(self) -> float:
        raise NotImplementedError

    @property
    def bbox(self) -> tuple[float, float, float, float]:
        raise NotImplementedError

    @property
    def center(self) -> np.ndarray:
        x0, x1, y0, y1 = self.bbox
        return np.array([(x0 + x1) / 2, (y0 + y1) / 2])

    @property
    def diameter(self) -> float:
        x0, x1, y0, y1 = self.bbox
        return math.hypot(x1 - x0, y1 - y0)

    @property
    def smooth_boundary(self) -> bool:
        return True

    def boundary_distance(self, p, samples: int = 8192) -> np.ndarray:
        """Distance from points to the boundary, via a dense boundary polyline."""
        tree = self._boundary_tree(samples)
        dist, _ = tree.query(np.atleast_2d(p))
        return dist

    def _boundary_tree(self, samples: int) -> cKDTree:
        cache = self.__dict__.setdefault("_btree_cache", {})
        if samples not in cache:
            t = np.arange(samples) / samples
            cache[samples] = cKDTree(self.boundary_param(t))
        return cache[samples]

    def describe(self) -> dict:
        return {"shape": self.shape}


class UnitDisk(Domain):
    shape = "unit_disk"

    def inside(self, p):
        p = np.atleast_2d(p)
        return p[:, 0] ** 2 + p[:, 1] ** 2 < 1.0 - BOUNDARY_EPS

    def boundary_param(self, t):
        theta = 2 * np.pi * np.asarray(t, float)
        return np.column_stack([np.cos(theta), np.sin(theta)])

    def boundary_coord(self, p):
        p = np.atleast_2d(p)
        return np.mod(np.arctan2(p[:, 1], p[:, 0]) / (2 * np.pi), 1.0)

    def boundary_distance(self, p, samples: int = 8192):
        p = np.atleast_2d(p)
        return np.abs(1.0 - np.hypot(p[:, 0], p[:, 1]))

    area = math.pi
    perimeter = 2 * math.pi
    bbox = (-1.0, 1.0, -1.0, 1.0)


class Ellipse(Domain):
    """Axis-aligned ellipse x^2/a^2 + y^2/b^2 < 1 centered at the origin."""

    shape = "ellipse"
    _TABLE = 20001

    def __init__(self, a: float, b: float):
        if a <= 0 or b <= 0:
            raise ValueError("ellipse semi-axes must be positive")
        if max(a, b) > 1.0:
            raise ValueError("ellipse semi-axes must be <= 1 so the diameter stays <= 2")
        self.a, self.b = float(a), float(b)
        theta = np.linspace(0.0, 2 * np.pi, self._TABLE)
        speed = np.hypot(self.a * np.sin(theta), self.b * np.cos(theta))
        arc = cumulative_simpson(speed, x=theta, initial=0.0)
        self._theta = theta
        self._arc = arc / arc[-1]
        self._perimeter = float(arc[-1])

    def inside(self, p):
        p = np.atleast_2d(p)
        return (p[:, 0] / self.a) ** 2 + (p[:, 1] / self.b) ** 2 < 1.0 - BOUNDARY_EPS

    def boundary_param(self, t):
        t = np.mod(np.asarray(t, float), 1.0)
        theta = np.interp(t, self._arc, self._theta)
        return np.column_stack([self.a * np.cos(theta), self.b * np.sin(theta)])

    def boundary_coord(self, p):
        p = np.atleast_2d(p)
        theta = np.mod(np.arctan2(p[:, 1] / self.b, p[:, 0] / self.a), 2 * np.pi)
        return np.mod(np.interp(theta, self._theta, self._arc), 1.0)

    @property
    def area(self):
        return math.pi * self.a * self.b

    @property
    def perimeter(self):
        return self._perimeter

    @property
    def bbox(self):
        return (-self.a, self.a, -self.b, self.b)

    def describe(self):
        return {"shape": self.shape, "a": self.a, "b": self.b}


class UnitSquare(Domain):
    """[0, 1]^2.  Convex but with corners, so outside the smooth-boundary theory."""

    shape = "unit_square"
    area = 1.0
    perimeter = 4.0
    bbox = (0.0, 1.0, 0.0, 1.0)

    @property
    def smooth_boundary(self):
        return False

    def inside(self, p):
        p = np.atleast_2d(p)
        return (p[:, 0] > 0) & (p[:, 0] < 1) & (p[:, 1] > 0) & (p[:, 1] < 1)

    def boundary_param(self, t):
        s = 4.0 * np.mod(np.asarray(t, float), 1.0)
        side = np.minimum(np.floor(s), 3).astype(int)
        u = s - side
        x = np.choose(side, [u, np.ones_like(u), 1 - u, np.zeros_like(u)])
        y = np.choose(side, [np.zeros_like(u), u, np.ones_like(u), 1 - u])
        return np.column_stack([x, y])

    def boundary_coord(self, p):
        p = np.atleast_2d(p)
        x, y = p[:, 0], p[:, 1]
        s = np.where(
            np.isclose(y, 0) & (x < 1),
            x,
            np.where(
                np.isclose(x, 1) & (y < 1),
                1 + y,
                np.where(np.isclose(y, 1) & (x > 0), 3 - x, 4 - y),
            ),
        )
        return np.mod(s / 4.0, 1.0)

    def boundary_distance(self, p, samples: int = 8192):
        p = np.atleast_2d(p)
        return np.min(np.column_stack([p[:, 0], 1 - p[:, 0], p[:, 1], 1 - p[:, 1]]), axis=1)


def make_domain(shape: str, a: float | None = None, b: float | None = None) -> Domain:
    if shape == "unit_disk":
        return UnitDisk()
    if shape == "unit_square":
        return UnitSquare()
    if shape == "ellipse":
        if a is None or b is None:
            raise ValueError("ellipse needs semi-axes a and b")
        return Ellipse(a, b)
    raise ValueError(f"unknown domain shape {shape!r}")


@dataclass
class PointSet:
    """Interior and boundary points of a trial (Y) or test (X) set."""

    interior: np.ndarray
    boundary: np.ndarray
    role: str = "trial"
    target_h: float | None = field(default=None, compare=False)

    def __post_init__(self):
        if self.role not in ("trial", "test"):
            raise ValueError(f"role must be 'trial' or 'test', got {self.role!r}")
        self.interior = np.asarray(self.interior, float).reshape(-1, 2)
        self.boundary = np.asarray(self.boundary, float).reshape(-1, 2)

    @property
    def all(self) -> np.ndarray:
        """Interior points first, then boundary points."""
        return np.vstack([self.interior, self.boundary])

    @property
    def n_interior(self) -> int:
        return len(self.interior)

    def __len__(self) -> int:
        return len(self.interior) + len(self.boundary)

    def to_csv(self, path) -> None:
        with open(path, "w", newline="") as fh:
            w = csv.writer(fh)
            w.writerow(["role", "x", "y", "on_boundary"])
            for pts, flag in ((self.interior, 0), (self.boundary, 1)):
                for x, y in pts:
                    w.writerow([self.role, repr(float(x)), repr(float(y)), flag])

    @classmethod
    def from_csv(cls, path) -> "PointSet":
        interior, boundary, role = [], [], "trial"
        with open(Path(path), newline="") as fh:
            for row in csv.DictReader(fh):
                role = row["role"]
                pt = (float(row["x"]), float(row["y"]))
                (boundary if int(row["on_boundary"]) else interior).append(pt)
        return cls(np.array(interior), np.array(boundary), role)


@dataclass(frozen=True)
class MeshMetrics:
    """Fill and separation distances of a point set.

    Trial sets expose h_I, h_B, q_I, q_B, h_Y, q_Y; test sets expose
    s_I, s_B, s_X.  Both share the same underlying numbers.
    """

    role: str
    fill_interior: float
    fill_boundary: float
    sep_interior: float
    sep_boundary: float

    @property
    def fill(self) -> float:
        return max(self.fill_interior, self.fill_boundary)

    @property
    def separation(self) -> float:
        return min(self.sep_interior, self.sep_boundary)

    @property
    def ratio(self) -> float:
        return self.fill / self.separation

    def _need(self, role):
        if self.role != role:
            raise AttributeError(f"{role}-role metric requested from a {self.role} set")

    @property
    def h_I(self):
        self._need("trial")
        return self.fill_interior

    @property
    def h_B(self):
        self._need("trial")
        return self.fill_boundary

    @property
    def q_I(self):
        self._need("trial")
        return self.sep_interior

    @property
    def q_B(self):
        self._need("trial")
        return self.sep_boundary

    @property
    def h_Y(self):
        self._need("trial")
        return self.fill

    @property
    def q_Y(self):
        self._need("trial")
        return self.separation

    @property
    def s_I(self):
        self._need("test")
        return self.fill_interior

    @property
    def s_B(self):
        self._need("test")
        return self.fill_boundary

    @property
    def s_X(self):
        self._need("test")
        return self.fill

    def as_dict(self) -> dict[str, float]:
        if self.role == "trial":
            names = ("h_I", "h_B", "q_I", "q_B", "h_Y", "q_Y")
        else:
            names = ("s_I", "s_B", "s_X")
        return {n: getattr(self, n) for n in names}


def separation(points) -> float:
    """Half the minimum pairwise distance."""
    pts = np.asarray(points, float).reshape(-1, 2)
    if len(pts) < 2:
        raise ValueError("separation needs at least 2 points")
    dist, _ = cKDTree(pts).query(pts, k=2)
    return 0.5 * float(dist[:, 1].min())


def probe_grid(domain: Domain, resolution: int) -> tuple[np.ndarray, float]:
    """Cell centers of a resolution x resolution grid on the bbox that lie inside.

    Also returns the cell area, used as the quadrature weight.
    """
    x0, x1, y0, y1 = domain.bbox
    xs = x0 + (np.arange(resolution) + 0.5) * (x1 - x0) / resolution
    ys = y0 + (np.arange(resolution) + 0.5) * (y1 - y0) / resolution
    gx, gy = np.meshgrid(xs, ys, indexing="ij")
    pts = np.column_stack([gx.ravel(), gy.ravel()])
    cell = (x1 - x0) * (y1 - y0) / resolution**2
    return pts[domain.inside(pts)], cell


def fill_distance_interior(domain: Domain, pts, probe_resolution: int = 200) -> float:
    interior = pts.interior if isinstance(pts, PointSet) else np.asarray(pts, float).reshape(-1, 2)
    if len(interior) == 0:
        raise ValueError("fill distance of an empty interior set")
    probes, _ = probe_grid(domain, probe_resolution)
    dist, _ = cKDTree(interior).query(probes)
    return float(dist.max())


def _arc_gaps(domain: Domain, boundary_pts) -> np.ndarray:
    pts = np.asarray(boundary_pts, float).reshape(-1, 2)
    if len(pts) == 0:
        raise ValueError("boundary fill distance of an empty set")
    t = np.sort(domain.boundary_coord(pts))
    gaps = np.diff(np.append(t, t[0] + 1.0))
    return gaps * domain.perimeter


def boundary_fill_distance(domain: Domain, boundary_pts) -> float:
    """Half the largest arclength gap between consecutive boundary points."""
    return 0.5 * float(_arc_gaps(domain, boundary_pts).max())


def boundary_separation(domain: Domain, boundary_pts) -> float:
    gaps = _arc_gaps(domain, boundary_pts)
    if len(gaps) < 2:
        raise ValueError("separation needs at least 2 points")
    return 0.5 * float(gaps.min())


def metrics(domain: Domain, pts: PointSet, probe_resolution: int = 200) -> MeshMetrics:
    return MeshMetrics(
        role=pts.role,
        fill_interior=fill_distance_interior(domain, pts, probe_resolution),
        fill_boundary=boundary_fill_distance(domain, pts.boundary),
        sep_interior=separation(pts.interior),
        sep_boundary=boundary_separation(domain, pts.boundary),
    )


def _probe_resolution_for(domain: Domain, h: float) -> int:
    x0, x1, _, _ = domain.bbox
    return int(min(800, max(100, math.ceil(8 * (x1 - x0) / h))))


def generate_points(domain: Domain, target_h: float, role: str = "trial", seed: int = 0) -> PointSet:
    """Grid interior points plus arclength-equispaced boundary points.

    The interior grid is cell-centered on the domain's bounding box with
    spacing ``target_h``; points closer than ``target_h / 4`` to the
    boundary are dropped.  Seed 0 uses the unshifted grid, other seeds
    shift the grid phase by up to a quarter spacing per axis.
    """
    # target_h >= 1 is not rejected up front: it fails below as degenerate
    if not target_h > 0:
        raise ValueError("target_h must be positive")
    h = float(target_h)
    x0, x1, y0, y1 = domain.bbox
    cx, cy = domain.center
    phase = np.zeros(2)
    if seed:
        phase = np.random.default_rng(seed).uniform(-0.25, 0.25, size=2)

    def axis(lo, hi, c, ph):
        k_lo = math.floor((lo - c) / h - 0.5 - ph) - 1
        k_hi = math.ceil((hi - c) / h - 0.5 - ph) + 1
        k = np.arange(k_lo, k_hi + 1)
        v = c + (k + 0.5 + ph) * h
        return v[(v > lo) & (v < hi)]

    gx, gy = np.meshgrid(axis(x0, x1, cx, phase[0]), axis(y0, y1, cy, phase[1]), indexing="ij")
    cand = np.column_stack([gx.ravel(), gy.ravel()])
    if len(cand):
        keep = domain.inside(cand)
        cand = cand[keep]
    if len(cand):
        cand = cand[domain.boundary_distance(cand) > h / 4]
    if len(cand) == 0:
        raise DegenerateDiscretization("degenerate discretization: interior set is empty")

    n_b = max(3, math.ceil(domain.perimeter / h))
    boundary = domain.boundary_param(np.arange(n_b) / n_b)

    pts = PointSet(cand, boundary, role, target_h=h)
    if len(cand) >= 2:
        m = metrics(domain, pts, _probe_resolution_for(domain, h))
        if m.ratio > QUASI_UNIFORM_BOUND:
            raise DegenerateDiscretization(
                f"degenerate discretization: fill/separation ratio {m.ratio:.3f} exceeds {QUASI_UNIFORM_BOUND}"
            )
    return pts
