"""Error norms, convergence studies and empirical inequality probes.

Sobolev norms here are integer order 2 (value, gradient, Hessian), the
highest order the kernel jets provide; fractional orders are not computed.
"""
from __future__ import annotations

import csv
import logging
import math
from dataclasses import dataclass, field, fields
from typing import Callable, Sequence

import numpy as np

from .geometry import Domain, generate_points, metrics, probe_grid
from .kernel import C4, KernelFamily, ScaledKernel
from .operator import Problem
from .solver import SolverConfig, SolverStalled, gauss_newton_solve, oversampling_check
from .trialspace import Coefficients, GramFactorizationError, TrialSpace

log = logging.getLogger(__name__)

TABLE_HEADER = (
    "level,h_Y,q_Y,s_X,delta,N,M,iters,res_inf_I,res_inf_B,"
    "e_l2,e_inf,rate_l2,oversampling_value,converged"
)
SOBOLEV_NOTE = "Sobolev norms use integer order m = 2 (value + gradient + Hessian terms)"


def _values(fld, pts):
    if callable(fld):
        return np.asarray(fld(pts[:, 0], pts[:, 1]), float) * np.ones(len(pts))
    return np.full(len(pts), float(fld))


def trial_field(ts: TrialSpace, c: Coefficients) -> Callable:
    return lambda x, y: ts.eval(c, np.column_stack([np.ravel(x), np.ravel(y)]))


def l2_error(domain: Domain, a, b, resolution: int = 256) -> float:
    """Midpoint-rule L2 norm of a - b over cells whose centers lie inside."""
    if resolution < 16:
        raise ValueError("resolution must be at least 16")
    pts, cell = probe_grid(domain, resolution)
    d = _values(a, pts) - _values(b, pts)
    return float(np.sqrt(cell * np.sum(d**2)))


def linf_error(domain: Domain, a, b, resolution: int = 256) -> float:
    if resolution < 16:
        raise ValueError("resolution must be at least 16")
    pts, _ = probe_grid(domain, resolution)
    d = _values(a, pts) - _values(b, pts)
    return float(np.abs(d).max()) if len(d) else 0.0


def estimate_rate(e_prev, e_cur, h_prev, h_cur) -> float:
    for name, v in (("e_prev", e_prev), ("e_cur", e_cur), ("h_prev", h_prev), ("h_cur", h_cur)):
        if not v > 0:
            raise ValueError(f"{name} must be positive, got {v}")
    if h_prev == h_cur:
        raise ValueError("h_prev and h_cur must differ")
    return math.log(e_prev / e_cur) / math.log(h_prev / h_cur)


@dataclass(frozen=True)
class DeltaRule:
    """Fixed support radius, or one proportional to h_Y (stationary)."""

    kind: str
    value: float

    def __post_init__(self):
        if self.kind not in ("fixed", "proportional"):
            raise ValueError(f"delta rule must be 'fixed' or 'proportional', got {self.kind!r}")
        if not self.value > 0:
            raise ValueError("delta rule value must be positive")

    def delta(self, h_Y: float) -> float:
        return self.value if self.kind == "fixed" else self.value * h_Y

    @classmethod
    def fixed(cls, delta: float) -> "DeltaRule":
        return cls("fixed", delta)

    @classmethod
    def proportional(cls, c_delta: float) -> "DeltaRule":
        return cls("proportional", c_delta)


@dataclass
class ConvergenceRow:
    level: int
    h_Y: float
    q_Y: float
    s_X: float
    delta: float
    N: int
    M: int
    iterations: int
    res_inf_interior: float
    res_inf_boundary: float
    e_l2: float
    e_inf: float
    rate_l2: float | None
    oversampling_value: float
    converged: bool
    stop_reason: str = field(default="", compare=False)

    def csv_fields(self) -> list[str]:
        def num(v):
            return "" if v is None else repr(float(v))

        return [
            str(self.level), num(self.h_Y), num(self.q_Y), num(self.s_X), num(self.delta),
            str(self.N), str(self.M), str(self.iterations),
            num(self.res_inf_interior), num(self.res_inf_boundary),
            num(self.e_l2), num(self.e_inf), num(self.rate_l2),
            num(self.oversampling_value), str(self.converged).lower(),
        ]


def write_table(rows: Sequence[ConvergenceRow], path) -> None:
    with open(path, "w", newline="") as fh:
        fh.write(TABLE_HEADER + "\n")
        w = csv.writer(fh, lineterminator="\n")
        for row in rows:
            w.writerow(row.csv_fields())


def convergence_study(problem: Problem, base_h: float, levels: int, delta_rule: DeltaRule,
                      cfg: SolverConfig | None = None, family: KernelFamily = C4,
                      test_refinement: float = 2.0, resolution: int = 256,
                      CCb: float = 1.0, seed: int = 0) -> list[ConvergenceRow]:
    """Solve on successively halved trial spacings and tabulate errors against the exact solution.

    Test sites use spacing h / test_refinement.  A level whose solve
    fails outright is kept in the table with converged = false.
    """
    if problem.exact is None:
        raise ValueError("convergence study needs a problem with an exact solution")
    if levels < 2:
        raise ValueError("at least 2 levels are required for a rate")
    cfg = cfg or SolverConfig()
    domain = problem.domain
    rows: list[ConvergenceRow] = []
    for level in range(levels):
        h = base_h / 2**level
        Y = generate_points(domain, h, "trial", seed)
        X = generate_points(domain, h / test_refinement, "test", seed)
        my, mx = metrics(domain, Y), metrics(domain, X)
        delta = delta_rule.delta(my.h_Y)
        ts = TrialSpace(Y, ScaledKernel(family, delta))
        over, _ = oversampling_check(CCb, delta, family.sobolev_order, mx.s_X, my.h_Y)
        try:
            rep = gauss_newton_solve(problem, ts, X, cfg, trial_metrics=my, test_metrics=mx)
        except (SolverStalled, GramFactorizationError) as exc:
            log.warning("level %d failed: %s", level, exc)
            nan = float("nan")
            rows.append(ConvergenceRow(level, my.h_Y, my.q_Y, mx.s_X, delta, ts.N, len(X), 0,
                                       nan, nan, nan, nan, None, over, False, str(exc)))
            continue
        s = trial_field(ts, rep.coefficients)
        e_l2 = l2_error(domain, problem.exact, s, resolution)
        e_inf = linf_error(domain, problem.exact, s, resolution)
        rate = None
        if rows and rows[-1].e_l2 > 0 and e_l2 > 0:
            rate = estimate_rate(rows[-1].e_l2, e_l2, rows[-1].h_Y, my.h_Y)
        rows.append(ConvergenceRow(
            level, my.h_Y, my.q_Y, mx.s_X, delta, ts.N, len(X), rep.iterations,
            rep.res_inf_interior, rep.res_inf_boundary, e_l2, e_inf, rate, over,
            rep.converged, rep.stop_reason,
        ))
        log.info("level %d: h_Y=%.4f N=%d M=%d e_l2=%.3e e_inf=%.3e", level, my.h_Y, ts.N, len(X), e_l2, e_inf)
    return rows


# --- quadrature Sobolev norms -------------------------------------------------

def _h2_parts(value, grad, hess):
    grad_sq = np.sum(grad**2, axis=-1)
    hess_sq = np.sum(hess**2, axis=(-2, -1))
    return value**2, grad_sq, hess_sq


def sobolev_norms(domain: Domain, jet, resolution: int = 128) -> tuple[float, float]:
    """(L2 norm, order-2 Sobolev norm) of a field given by ``jet(points) -> (v, grad, hess)``."""
    pts, cell = probe_grid(domain, resolution)
    v, g, H = jet(pts)
    v2, g2, h2 = _h2_parts(v, g, H)
    l2 = math.sqrt(cell * v2.sum())
    return l2, math.sqrt(cell * (v2.sum() + g2.sum() + h2.sum()))


@dataclass
class AnalyticField:
    """Smooth field with closed-form value, gradient and Hessian."""

    value: Callable
    grad: Callable
    hess: Callable

    def __call__(self, x, y):
        return self.value(x, y)

    def jet(self, pts):
        x, y = pts[:, 0], pts[:, 1]
        return self.value(x, y), self.grad(x, y), self.hess(x, y)


def _sin2x_cosy_hess(x, y):
    hxx = -4 * np.sin(2 * x) * np.cos(y)
    hxy = -2 * np.cos(2 * x) * np.sin(y)
    hyy = -np.sin(2 * x) * np.cos(y)
    return np.stack([np.stack([hxx, hxy], -1), np.stack([hxy, hyy], -1)], -2)


SIN2X_COSY = AnalyticField(
    value=lambda x, y: np.sin(2 * x) * np.cos(y),
    grad=lambda x, y: np.stack([2 * np.cos(2 * x) * np.cos(y), -np.sin(2 * x) * np.sin(y)], -1),
    hess=_sin2x_cosy_hess,
)


def _loglog_slope(h, v) -> float:
    h, v = np.asarray(h, float), np.asarray(v, float)
    if len(h) < 2:
        return float("nan")
    return float(np.polyfit(np.log(h), np.log(v), 1)[0])


@dataclass
class BernsteinResult:
    """Per-level H2/L2 ratios of trial functions.

    ``max_ratio`` is the largest ratio seen over random coefficient draws;
    ``worst_ratio`` is the supremum over the whole trial space (largest
    generalized eigenvalue of the quadrature Gram pair).  Slopes are
    log-log least-squares slopes against h_Y.
    """

    h_Y: list[float]
    delta: list[float]
    max_ratio: list[float]
    worst_ratio: list[float]
    slope: float
    worst_slope: float
    note: str = SOBOLEV_NOTE


def _dense(m):
    return m.toarray() if m.nnz > 0.1 * m.shape[0] * m.shape[1] else m


def _gram(a, b, cell):
    g = cell * (a.T @ b)
    return g.toarray() if hasattr(g, "toarray") else np.asarray(g)


def worst_case_ratio(D: dict, cell: float, rel_cutoff: float = 1e-12) -> float:
    """sup_c |s|_H2 / |s|_L2 over span of the design columns.

    L2-null directions below ``rel_cutoff`` (relative) are discarded; they
    are numerically indistinguishable from zero functions on the grid.
    """
    D = {k: _dense(v) for k, v in D.items()}
    GL = _gram(D["value"], D["value"], cell)
    GH = GL + sum(_gram(D[k], D[k], cell) for k in ("x", "y", "xx", "yy")) + 2 * _gram(D["xy"], D["xy"], cell)
    w, V = np.linalg.eigh(0.5 * (GL + GL.T))
    keep = w > rel_cutoff * w.max()
    T = V[:, keep] / np.sqrt(w[keep])
    return float(math.sqrt(np.linalg.eigvalsh(T.T @ GH @ T)[-1]))


def bernstein_probe(domain: Domain, ts_sequence: Sequence[TrialSpace], trials: int = 20,
                    resolution: int = 128, seed: int = 0,
                    h_values: Sequence[float] | None = None) -> BernsteinResult:
    """H2/L2 norm ratios of trial functions on each level (fixed delta expected).

    Coefficients are standard normal draws from a seeded generator.
    """
    rng = np.random.default_rng(seed)
    pts, cell = probe_grid(domain, resolution)
    hs, deltas, ratios, worst = [], [], [], []
    for k, ts in enumerate(ts_sequence):
        if not ts.kernel.family.hessian_continuous:
            raise ValueError("bernstein_probe needs a kernel family with continuous second derivatives")
        h = h_values[k] if h_values is not None else metrics(domain, ts.centers).h_Y
        D = ts.design(pts)
        best = 0.0
        for _ in range(trials):
            c = rng.standard_normal(ts.N)
            v = D["value"] @ c
            g = np.column_stack([D["x"] @ c, D["y"] @ c])
            hxx, hxy, hyy = D["xx"] @ c, D["xy"] @ c, D["yy"] @ c
            l2sq = cell * np.sum(v**2)
            h2sq = l2sq + cell * np.sum(g**2) + cell * np.sum(hxx**2 + 2 * hxy**2 + hyy**2)
            best = max(best, math.sqrt(h2sq / l2sq))
        hs.append(h)
        deltas.append(ts.kernel.delta)
        ratios.append(best)
        worst.append(worst_case_ratio(D, cell))
    return BernsteinResult(hs, deltas, ratios, worst, _loglog_slope(hs, ratios), _loglog_slope(hs, worst))


@dataclass
class SamplingResult:
    h_Y: list[float]
    l2: list[float]
    scaled_h2: list[float]
    ratio: list[float]
    note: str = SOBOLEV_NOTE

    @property
    def spread(self) -> float:
        """max ratio / min ratio over levels (1 for a single level)."""
        r = [v for v in self.ratio if np.isfinite(v)]
        return max(r) / min(r) if r else float("nan")


def sampling_probe(domain: Domain, ts_sequence: Sequence[TrialSpace], test_function,
                   resolution: int = 128, h_values: Sequence[float] | None = None) -> SamplingResult:
    """Compare |u - I_h u|_L2 with h_Y^2 |u - I_h u|_H2 on each level.

    ``test_function`` must provide ``jet(points)``; a constant 0 is also
    accepted, in which case both quantities vanish.
    """
    pts, cell = probe_grid(domain, resolution)
    hs, l2s, h2s, ratios = [], [], [], []
    for k, ts in enumerate(ts_sequence):
        h = h_values[k] if h_values is not None else metrics(domain, ts.centers).h_Y
        if hasattr(test_function, "jet"):
            uv, ug, uH = test_function.jet(pts)
            data = test_function(ts.points[:, 0], ts.points[:, 1])
        else:
            uv, ug, uH = np.zeros(len(pts)), np.zeros((len(pts), 2)), np.zeros((len(pts), 2, 2))
            data = np.zeros(ts.N)
        c = ts.interpolate(data)
        sv, sg, sH = ts.eval_jet(c, pts)
        v2, g2, h2 = _h2_parts(uv - sv, ug - sg, uH - sH)
        l2 = math.sqrt(cell * v2.sum())
        h2norm = math.sqrt(cell * (v2.sum() + g2.sum() + h2.sum()))
        hs.append(h)
        l2s.append(l2)
        h2s.append(h**2 * h2norm)
        ratios.append(l2 / (h**2 * h2norm) if h2norm > 0 else float("nan"))
    return SamplingResult(hs, l2s, h2s, ratios)


def rows_as_dicts(rows: Sequence[ConvergenceRow]) -> list[dict]:
    return [{f.name: getattr(r, f.name) for f in fields(r)} for r in rows]
