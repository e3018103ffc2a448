"""Monge-Ampere operator, its linearization, and the collocation residual/Jacobian."""
from __future__ import annotations

from dataclasses import dataclass
from typing import Callable, NamedTuple, Optional

import numpy as np

from .geometry import Domain, PointSet
from .trialspace import Coefficients, TrialSpace

Field = Callable[[np.ndarray, np.ndarray], np.ndarray]


class NonPositiveRHS(ValueError):
    pass


class HessianSample(NamedTuple):
    """Second partials (u_xx, u_xy, u_yy); fields may be arrays."""

    uxx: np.ndarray
    uxy: np.ndarray
    uyy: np.ndarray

    @classmethod
    def from_matrix(cls, H) -> "HessianSample":
        H = np.asarray(H, float)
        return cls(H[..., 0, 0], H[..., 0, 1], H[..., 1, 1])


def ma_det(h: HessianSample):
    return h.uxx * h.uyy - h.uxy**2


def frechet_apply(hu: HessianSample, hv: HessianSample):
    """Derivative of det(D^2 u) at u in direction v."""
    return hu.uyy * hv.uxx + hu.uxx * hv.uyy - 2.0 * hu.uxy * hv.uxy


def convexity_indicator(h: HessianSample):
    return (np.asarray(h.uxx) > 0) & (ma_det(h) > 0)


def _as_field(v) -> Field:
    if callable(v):
        return v
    const = float(v)
    return lambda x, y: np.full(np.shape(x), const)


@dataclass
class Problem:
    """det(D^2 u) = f in the domain, u = g on its boundary."""

    domain: Domain
    f: Field
    g: Field
    exact: Optional[Field] = None
    name: str = "custom"

    def __post_init__(self):
        self.f = _as_field(self.f)
        self.g = _as_field(self.g)

    def f_at(self, pts) -> np.ndarray:
        pts = np.atleast_2d(pts)
        vals = np.asarray(self.f(pts[:, 0], pts[:, 1]), float) * np.ones(len(pts))
        if np.any(~(vals > 0)):
            raise NonPositiveRHS("f not strictly positive")
        return vals

    def g_at(self, pts) -> np.ndarray:
        pts = np.atleast_2d(pts)
        return np.asarray(self.g(pts[:, 0], pts[:, 1]), float) * np.ones(len(pts))


class CollocationSystem:
    """Residual r(c) = [det D^2 s - f on X^I ; w (s - g) on X^B] and its Jacobian.

    Evaluation matrices are assembled once; with ``dense=True`` they are
    built from every (point, center) pair without neighbor search.
    """

    def __init__(self, problem: Problem, ts: TrialSpace, X: PointSet,
                 boundary_weight: float = 1.0, dense: bool = False):
        if X.role != "test":
            raise ValueError("collocation sites must be a test-role point set")
        self.problem, self.ts, self.X = problem, ts, X
        self.boundary_weight = float(boundary_weight)
        self.f_I = problem.f_at(X.interior) if X.n_interior else np.zeros(0)
        self.g_B = problem.g_at(X.boundary) if len(X.boundary) else np.zeros(0)
        DI = ts.design(X.interior, parts=("xx", "xy", "yy"), dense=dense)
        self.Axx, self.Axy, self.Ayy = (DI[p].toarray() for p in ("xx", "xy", "yy"))
        self.B = ts.design(X.boundary, parts=("value",), dense=dense)["value"].toarray()

    @property
    def shape(self) -> tuple[int, int]:
        return len(self.X), self.ts.N

    def hessians(self, c) -> HessianSample:
        c = _coef(c)
        return HessianSample(self.Axx @ c, self.Axy @ c, self.Ayy @ c)

    def residual_blocks(self, c) -> tuple[np.ndarray, np.ndarray]:
        """Unweighted interior and boundary residuals."""
        c = _coef(c)
        return ma_det(self.hessians(c)) - self.f_I, self.B @ c - self.g_B

    def residual(self, c) -> np.ndarray:
        rI, rB = self.residual_blocks(c)
        return np.concatenate([rI, self.boundary_weight * rB])

    def jacobian(self, c) -> np.ndarray:
        hs = self.hessians(c)
        JI = (hs.uyy[:, None] * self.Axx + hs.uxx[:, None] * self.Ayy
              - 2.0 * hs.uxy[:, None] * self.Axy)
        return np.vstack([JI, self.boundary_weight * self.B])

    def convex_fraction(self, c) -> float:
        if self.X.n_interior == 0:
            return 1.0
        return float(np.mean(convexity_indicator(self.hessians(c))))


def _coef(c) -> np.ndarray:
    return c.c if isinstance(c, Coefficients) else np.asarray(c, float)


def residuals(problem: Problem, ts: TrialSpace, c, X: PointSet, dense: bool = False):
    return CollocationSystem(problem, ts, X, dense=dense).residual_blocks(c)


def jacobian(problem: Problem, ts: TrialSpace, c, X: PointSet, dense: bool = False):
    return CollocationSystem(problem, ts, X, dense=dense).jacobian(c)
