"""Damped Gauss-Newton solution of the overdetermined collocation system."""
from __future__ import annotations

import logging
from dataclasses import dataclass, field

import numpy as np

from .geometry import MeshMetrics, PointSet, metrics
from .operator import CollocationSystem, Problem
from .trialspace import Coefficients, TrialSpace

log = logging.getLogger(__name__)

LAMBDA_FLOOR = 1e-12


class SolverStalled(RuntimeError):
    pass


@dataclass
class SolverConfig:
    max_iters: int = 50
    tol_mode: str = "absolute"  # "absolute" or "theory"
    tol: float = 1e-8
    tol_constant: float = 1.0
    norm_u: float = 1.0
    lm_lambda0: float = 1e-6
    lm_growth: float = 10.0
    step_tol: float = 1e-14
    max_retries: int = 20
    boundary_weight: float = 1.0

    def __post_init__(self):
        if self.tol_mode not in ("absolute", "theory"):
            raise ValueError(f"tol_mode must be 'absolute' or 'theory', got {self.tol_mode!r}")
        if self.max_iters < 0:
            raise ValueError("max_iters must be nonnegative")
        for name in ("tol", "tol_constant", "norm_u", "lm_lambda0", "step_tol", "boundary_weight"):
            if not getattr(self, name) > 0:
                raise ValueError(f"{name} must be positive")
        if not self.lm_growth > 1:
            raise ValueError("lm_growth must exceed 1")


@dataclass
class IterationRecord:
    res_l2: float
    res_inf_interior: float
    res_inf_boundary: float
    lam: float


@dataclass
class SolveReport:
    coefficients: Coefficients
    iterations: int
    res_inf_interior: float
    res_inf_boundary: float
    res_l2: float
    converged: bool
    convex_fraction: float
    tol: float
    stop_reason: str
    history: list[IterationRecord] = field(default_factory=list)
    warnings: list[str] = field(default_factory=list)
    boundary_weight: float = 1.0

    def to_text(self) -> str:
        lines = [
            f"converged = {str(self.converged).lower()}",
            f"stop_reason = {self.stop_reason}",
            f"iterations = {self.iterations}",
            f"tol = {self.tol!r}",
            f"res_inf_interior = {self.res_inf_interior!r}",
            f"res_inf_boundary = {self.res_inf_boundary!r}",
            f"res_l2 = {self.res_l2!r}",
            f"convex_fraction = {self.convex_fraction!r}",
            f"boundary_weight = {self.boundary_weight!r}",
            f"n_coefficients = {len(self.coefficients)}",
        ]
        for i, w in enumerate(self.warnings):
            lines.append(f"warning.{i} = {w}")
        for i, h in enumerate(self.history):
            lines.append(
                f"history.{i} = res_l2={h.res_l2!r} res_inf_I={h.res_inf_interior!r} "
                f"res_inf_B={h.res_inf_boundary!r} lambda={h.lam!r}"
            )
        return "\n".join(lines) + "\n"


def _positive(**kw):
    for k, v in kw.items():
        if not v > 0:
            raise ValueError(f"{k} must be positive, got {v}")


def tol_from_theory(C, s_B, delta, sigma, h_Y, norm_u) -> float:
    """C * s_B^{1/2} * delta^{-sigma} * h_Y^{sigma - 2 - d/2} * norm_u, d = 2."""
    _positive(C=C, s_B=s_B, delta=delta, sigma=sigma, h_Y=h_Y, norm_u=norm_u)
    return C * s_B**0.5 * delta ** (-sigma) * h_Y ** (sigma - 3.0) * norm_u


def oversampling_check(CCb, delta, sigma, s_X, h_Y) -> tuple[float, bool]:
    """Value of C C_b delta^sigma s_X^{sigma-2} h_Y^{-sigma+d/2} and whether it is below 1/2."""
    _positive(CCb=CCb, delta=delta, sigma=sigma, s_X=s_X, h_Y=h_Y)
    value = CCb * delta**sigma * s_X ** (sigma - 2.0) * h_Y ** (1.0 - sigma)
    return value, value < 0.5


def initial_guess(problem: Problem, ts: TrialSpace) -> Coefficients:
    """Interpolant of mu |x|^2 / 2 + affine, with mu^2 the mean of f over interior centers.

    The affine part is the least-squares fit of g - mu |x|^2 / 2 over the
    boundary centers, so the guess is convex with Hessian mu * I.
    """
    Y = ts.centers
    mu = float(np.sqrt(np.mean(problem.f_at(Y.interior)))) if Y.n_interior else 1.0
    Yb = Y.boundary
    if len(Yb):
        resid = problem.g_at(Yb) - mu * (Yb**2).sum(axis=1) / 2
        A = np.column_stack([np.ones(len(Yb)), Yb])
        coef, *_ = np.linalg.lstsq(A, resid, rcond=None)
    else:
        coef = np.zeros(3)
    P = ts.points
    v0 = mu * (P**2).sum(axis=1) / 2 + coef[0] + P @ coef[1:]
    return ts.interpolate(v0)


def resolve_tol(cfg: SolverConfig, ts: TrialSpace, X: PointSet,
                trial_metrics: MeshMetrics | None = None,
                test_metrics: MeshMetrics | None = None,
                domain=None) -> float:
    if cfg.tol_mode == "absolute":
        return cfg.tol
    if trial_metrics is None or test_metrics is None:
        if domain is None:
            raise ValueError("theory tolerance needs point-set metrics or the domain")
        trial_metrics = trial_metrics or metrics(domain, ts.centers)
        test_metrics = test_metrics or metrics(domain, X)
    return tol_from_theory(cfg.tol_constant, test_metrics.s_B, ts.kernel.delta,
                           ts.kernel.family.sobolev_order, trial_metrics.h_Y, cfg.norm_u)


def _norms(system: CollocationSystem, c):
    rI, rB = system.residual_blocks(c)
    r = np.concatenate([rI, system.boundary_weight * rB])
    inf_I = float(np.abs(rI).max()) if len(rI) else 0.0
    inf_B = float(np.abs(rB).max()) if len(rB) else 0.0
    return r, float(np.linalg.norm(r)), inf_I, inf_B


def gauss_newton_solve(problem: Problem, ts: TrialSpace, X: PointSet,
                       cfg: SolverConfig | None = None, c0: Coefficients | None = None,
                       trial_metrics: MeshMetrics | None = None,
                       test_metrics: MeshMetrics | None = None) -> SolveReport:
    """Levenberg-Marquardt iteration on the stacked collocation residual.

    Steps minimize |J p + r|^2 + lam |p|^2 through one SVD of J per outer
    iteration, so damping retries cost a matrix-vector product each.
    Stops when max(|r_I|_inf, |r_B|_inf) <= tol.
    """
    cfg = cfg or SolverConfig()
    warnings = []
    if len(X) < ts.N:
        warnings.append(f"fewer collocation sites ({len(X)}) than trial centers ({ts.N})")
    if ts.jitter:
        warnings.append(f"Gram jitter {ts.jitter!r} applied")
    if cfg.boundary_weight != 1.0:
        warnings.append(f"non-default boundary_weight {cfg.boundary_weight!r}")
    tol = resolve_tol(cfg, ts, X, trial_metrics, test_metrics, problem.domain)

    system = CollocationSystem(problem, ts, X, boundary_weight=cfg.boundary_weight)
    c = (c0 if c0 is not None else initial_guess(problem, ts)).c.copy()
    r, rl2, inf_I, inf_B = _norms(system, c)
    lam = cfg.lm_lambda0
    history = [IterationRecord(rl2, inf_I, inf_B, lam)]
    iterations = 0
    stop = "max_iters"

    while True:
        if max(inf_I, inf_B) <= tol:
            stop = "tolerance"
            break
        if iterations >= cfg.max_iters:
            stop = "max_iters"
            break
        J = system.jacobian(c)
        try:
            U, S, Vt = np.linalg.svd(J, full_matrices=False)
        except np.linalg.LinAlgError as exc:
            raise SolverStalled("solver stalled") from exc
        Utr = U.T @ r
        accepted = False
        for _ in range(cfg.max_retries):
            step = -(Vt.T @ (S / (S**2 + lam) * Utr))
            if np.abs(step).max() < cfg.step_tol:
                stop = "step_tol"
                break
            c_new = c + step
            r_new, rl2_new, inf_I_new, inf_B_new = _norms(system, c_new)
            if rl2_new < rl2:
                accepted = True
                c, r, rl2, inf_I, inf_B = c_new, r_new, rl2_new, inf_I_new, inf_B_new
                lam = max(lam / cfg.lm_growth, LAMBDA_FLOOR)
                break
            lam *= cfg.lm_growth
        if not accepted:
            if stop != "step_tol":
                stop = "stalled"
            break
        iterations += 1
        history.append(IterationRecord(rl2, inf_I, inf_B, lam))
        log.debug("iter %d: res_l2=%.3e inf_I=%.3e inf_B=%.3e lam=%.1e",
                  iterations, rl2, inf_I, inf_B, lam)

    return SolveReport(
        coefficients=Coefficients(c),
        iterations=iterations,
        res_inf_interior=inf_I,
        res_inf_boundary=inf_B,
        res_l2=rl2,
        converged=max(inf_I, inf_B) <= tol,
        convex_fraction=system.convex_fraction(c),
        tol=tol,
        stop_reason=stop,
        history=history,
        warnings=warnings,
        boundary_weight=cfg.boundary_weight,
    )
