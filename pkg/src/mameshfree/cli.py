"""Command-line front end driven by a flat ``key = value`` run file.

Example run file::

    command = converge
    domain.shape = unit_disk
    kernel.family = C4
    kernel.delta_rule = fixed
    kernel.delta = 0.7
    problem.name = MA2
    discretization.base_h = 0.3
    discretization.levels = 3
    solver.tol = 1e-8
    output.dir = out

Relative output directories are resolved against the run file's folder.
"""
from __future__ import annotations

import argparse
import csv
import logging
import sys
from dataclasses import dataclass, field, fields
from pathlib import Path

from . import catalog
from .analysis import (
    SIN2X_COSY,
    DeltaRule,
    bernstein_probe,
    convergence_study,
    estimate_rate,
    l2_error,
    linf_error,
    sampling_probe,
    trial_field,
    write_table,
)
from .expr import ExprSyntaxError, parse_field_expr
from .geometry import DegenerateDiscretization, generate_points, make_domain, metrics
from .kernel import FAMILIES, ScaledKernel, get_family
from .operator import NonPositiveRHS, Problem
from .solver import SolverConfig, SolverStalled, gauss_newton_solve
from .trialspace import GramFactorizationError, TrialSpace

log = logging.getLogger("mameshfree")

EXIT_OK, EXIT_NOT_CONVERGED, EXIT_CONFIG = 0, 1, 2
COMMANDS = ("solve", "converge", "interp", "diagnose")


class ConfigError(ValueError):
    def __init__(self, key: str, message: str):
        super().__init__(f"{key}: {message}")
        self.key = key


@dataclass
class RunConfig:
    command: str = "solve"
    domain_shape: str = "unit_disk"
    domain_a: float = 1.0
    domain_b: float = 1.0
    kernel_family: str = "C4"
    delta_rule: str = "fixed"
    delta: float = 0.7
    problem_name: str = ""
    problem_f: str = ""
    problem_g: str = ""
    problem_exact: str = ""
    base_h: float = 0.15
    levels: int = 3
    test_refinement: float = 2.0
    seed: int = 0
    resolution: int = 256
    trials: int = 20
    probe_seed: int = 0
    output_dir: str = "out"
    solver: SolverConfig = field(default_factory=SolverConfig)


# run-file key -> (RunConfig attribute, type); solver.* keys map onto SolverConfig
_KEYS = {
    "command": ("command", str),
    "domain.shape": ("domain_shape", str),
    "domain.a": ("domain_a", float),
    "domain.b": ("domain_b", float),
    "kernel.family": ("kernel_family", str),
    "kernel.delta_rule": ("delta_rule", str),
    "kernel.delta": ("delta", float),
    "problem.name": ("problem_name", str),
    "problem.f": ("problem_f", str),
    "problem.g": ("problem_g", str),
    "problem.exact": ("problem_exact", str),
    "discretization.base_h": ("base_h", float),
    "discretization.levels": ("levels", int),
    "discretization.test_refinement": ("test_refinement", float),
    "discretization.seed": ("seed", int),
    "analysis.resolution": ("resolution", int),
    "analysis.trials": ("trials", int),
    "analysis.seed": ("probe_seed", int),
    "output.dir": ("output_dir", str),
}
_SOLVER_TYPES = {f.name: f.type for f in fields(SolverConfig)}
_CASTS = {"int": int, "float": float, "str": str}


def _unquote(v: str) -> str:
    if len(v) >= 2 and v[0] == v[-1] and v[0] in "\"'":
        return v[1:-1]
    return v


def parse_run_text(text: str) -> RunConfig:
    raw: dict[str, str] = {}
    for lineno, line in enumerate(text.splitlines(), 1):
        stripped = line.strip()
        if not stripped or stripped.startswith("#"):
            continue
        if "=" not in stripped:
            raise ConfigError(f"line {lineno}", "expected 'key = value'")
        key, value = (s.strip() for s in stripped.split("=", 1))
        raw[key] = _unquote(value)

    cfg = RunConfig()
    solver_kw = {}
    for key, value in raw.items():
        if key.startswith("solver."):
            name = key[len("solver."):]
            if name not in _SOLVER_TYPES:
                raise ConfigError(key, "unknown solver option")
            cast = _CASTS[_SOLVER_TYPES[name]]
            try:
                solver_kw[name] = cast(value)
            except ValueError:
                raise ConfigError(key, f"cannot parse {value!r} as {_SOLVER_TYPES[name]}") from None
            continue
        if key not in _KEYS:
            raise ConfigError(key, "unknown key")
        attr, cast = _KEYS[key]
        try:
            setattr(cfg, attr, cast(value))
        except ValueError:
            raise ConfigError(key, f"cannot parse {value!r} as {cast.__name__}") from None
    try:
        cfg.solver = SolverConfig(**solver_kw)
    except ValueError as exc:
        raise ConfigError("solver", str(exc)) from None
    _validate(cfg)
    return cfg


def _validate(cfg: RunConfig) -> None:
    if cfg.command not in COMMANDS:
        raise ConfigError("command", f"must be one of {', '.join(COMMANDS)}")
    if cfg.domain_shape not in ("unit_disk", "unit_square", "ellipse"):
        raise ConfigError("domain.shape", "must be unit_disk, unit_square or ellipse")
    if cfg.kernel_family.upper() not in FAMILIES:
        raise ConfigError("kernel.family", f"must be one of {', '.join(FAMILIES)}")
    if cfg.delta_rule not in ("fixed", "proportional"):
        raise ConfigError("kernel.delta_rule", "must be fixed or proportional")
    if not cfg.delta > 0:
        raise ConfigError("kernel.delta", "must be positive")
    if cfg.problem_name:
        if cfg.problem_name.upper() not in catalog.NAMES:
            raise ConfigError("problem.name", f"unknown catalog problem {cfg.problem_name!r}")
    else:
        if cfg.command != "diagnose" and not (cfg.problem_f and cfg.problem_g):
            raise ConfigError("problem.name", "give a catalog name or both problem.f and problem.g")
        for key, text in (("problem.f", cfg.problem_f), ("problem.g", cfg.problem_g),
                          ("problem.exact", cfg.problem_exact)):
            if text:
                try:
                    parse_field_expr(text)
                except ExprSyntaxError as exc:
                    raise ConfigError(key, str(exc)) from None
    if not 0 < cfg.base_h:
        raise ConfigError("discretization.base_h", "must be positive")
    if cfg.levels < 1:
        raise ConfigError("discretization.levels", "must be at least 1")
    if cfg.command in ("converge", "interp", "diagnose") and cfg.levels < 2:
        raise ConfigError("discretization.levels", "at least 2 levels are required for a rate")
    if not cfg.test_refinement >= 1:
        raise ConfigError("discretization.test_refinement", "must be >= 1")
    if cfg.resolution < 16:
        raise ConfigError("analysis.resolution", "must be at least 16")
    if cfg.command in ("converge", "interp") and not (cfg.problem_name or cfg.problem_exact):
        raise ConfigError("problem.exact", f"{cfg.command} needs an exact solution")


def format_run_config(cfg: RunConfig) -> str:
    lines = []
    for key, (attr, _) in _KEYS.items():
        lines.append(f"{key} = {getattr(cfg, attr)}")
    for f in fields(SolverConfig):
        lines.append(f"solver.{f.name} = {getattr(cfg.solver, f.name)!r}".replace("'", ""))
    return "\n".join(lines) + "\n"


def build_problem(cfg: RunConfig) -> Problem:
    domain = make_domain(cfg.domain_shape, cfg.domain_a, cfg.domain_b)
    if cfg.problem_name:
        return catalog.manufactured(cfg.problem_name, domain)
    exact = parse_field_expr(cfg.problem_exact) if cfg.problem_exact else None
    return Problem(domain, parse_field_expr(cfg.problem_f), parse_field_expr(cfg.problem_g),
                   exact=exact, name="inline")


def _delta_rule(cfg: RunConfig) -> DeltaRule:
    return DeltaRule(cfg.delta_rule, cfg.delta)


def _cmd_solve(cfg: RunConfig, problem: Problem, out: Path) -> tuple[int, str]:
    domain = problem.domain
    family = get_family(cfg.kernel_family)
    Y = generate_points(domain, cfg.base_h, "trial", cfg.seed)
    X = generate_points(domain, cfg.base_h / cfg.test_refinement, "test", cfg.seed)
    my, mx = metrics(domain, Y), metrics(domain, X)
    ts = TrialSpace(Y, ScaledKernel(family, _delta_rule(cfg).delta(my.h_Y)))
    rep = gauss_newton_solve(problem, ts, X, cfg.solver, trial_metrics=my, test_metrics=mx)
    text = rep.to_text()
    extra = [f"{k} = {v!r}" for k, v in {**my.as_dict(), **mx.as_dict()}.items()]
    extra += [f"delta = {ts.kernel.delta!r}", f"kernel = {family.name}", f"N = {ts.N}", f"M = {len(X)}",
              f"smooth_boundary = {str(domain.smooth_boundary).lower()}"]
    if problem.exact is not None:
        s = trial_field(ts, rep.coefficients)
        extra.append(f"e_l2 = {l2_error(domain, problem.exact, s, cfg.resolution)!r}")
        extra.append(f"e_inf = {linf_error(domain, problem.exact, s, cfg.resolution)!r}")
    (out / "report.txt").write_text(text + "\n".join(extra) + "\n")
    rep.coefficients.to_csv(out / "coefficients.csv")
    code = EXIT_OK if rep.converged else EXIT_NOT_CONVERGED
    return code, (f"solve: converged={str(rep.converged).lower()} iterations={rep.iterations} "
                  f"res_inf_I={rep.res_inf_interior:.3e} res_inf_B={rep.res_inf_boundary:.3e}")


def _cmd_converge(cfg: RunConfig, problem: Problem, out: Path) -> tuple[int, str]:
    rows = convergence_study(problem, cfg.base_h, cfg.levels, _delta_rule(cfg), cfg.solver,
                             family=get_family(cfg.kernel_family),
                             test_refinement=cfg.test_refinement,
                             resolution=cfg.resolution, seed=cfg.seed)
    write_table(rows, out / "table.csv")
    ok = all(r.converged for r in rows)
    last = rows[-1]
    return (EXIT_OK if ok else EXIT_NOT_CONVERGED,
            f"converge: {len(rows)} levels, all converged={str(ok).lower()}, "
            f"final e_l2={last.e_l2:.3e} rate_l2={last.rate_l2}")


def _level_spaces(cfg: RunConfig, domain):
    family = get_family(cfg.kernel_family)
    rule = _delta_rule(cfg)
    out = []
    for level in range(cfg.levels):
        Y = generate_points(domain, cfg.base_h / 2**level, "trial", cfg.seed)
        m = metrics(domain, Y)
        out.append((m, TrialSpace(Y, ScaledKernel(family, rule.delta(m.h_Y)))))
    return out


def _cmd_interp(cfg: RunConfig, problem: Problem, out: Path) -> tuple[int, str]:
    domain = problem.domain
    prev = None
    with open(out / "interp.csv", "w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(["level", "h_Y", "q_Y", "delta", "N", "e_l2", "e_inf", "rate_l2"])
        for level, (m, ts) in enumerate(_level_spaces(cfg, domain)):
            s = trial_field(ts, ts.interpolate_field(problem.exact))
            e_l2 = l2_error(domain, problem.exact, s, cfg.resolution)
            e_inf = linf_error(domain, problem.exact, s, cfg.resolution)
            rate = estimate_rate(prev[0], e_l2, prev[1], m.h_Y) if prev and e_l2 > 0 else None
            w.writerow([level, repr(m.h_Y), repr(m.q_Y), repr(ts.kernel.delta), ts.N,
                        repr(e_l2), repr(e_inf), "" if rate is None else repr(rate)])
            prev = (e_l2, m.h_Y)
    return EXIT_OK, f"interp: {cfg.levels} levels, final e_l2={prev[0]:.3e}"


def _cmd_diagnose(cfg: RunConfig, problem: Problem | None, out: Path) -> tuple[int, str]:
    domain = problem.domain if problem else make_domain(cfg.domain_shape, cfg.domain_a, cfg.domain_b)
    levels = _level_spaces(cfg, domain)
    hs = [m.h_Y for m, _ in levels]
    spaces = [ts for _, ts in levels]
    res = min(cfg.resolution, 128)
    bern = bernstein_probe(domain, spaces, cfg.trials, res, cfg.probe_seed, h_values=hs)
    samp = sampling_probe(domain, spaces, SIN2X_COSY, res, h_values=hs)
    with open(out / "diagnostics.csv", "w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(["probe", "level", "h_Y", "delta", "quantity", "value"])
        for k, h in enumerate(hs):
            d = repr(spaces[k].kernel.delta)
            w.writerow(["bernstein", k, repr(h), d, "max_ratio", repr(bern.max_ratio[k])])
            w.writerow(["bernstein", k, repr(h), d, "worst_case_ratio", repr(bern.worst_ratio[k])])
            w.writerow(["sampling", k, repr(h), d, "l2", repr(samp.l2[k])])
            w.writerow(["sampling", k, repr(h), d, "h2_scaled", repr(samp.scaled_h2[k])])
            w.writerow(["sampling", k, repr(h), d, "ratio", repr(samp.ratio[k])])
        w.writerow(["bernstein", "", "", "", "slope", repr(bern.slope)])
        w.writerow(["bernstein", "", "", "", "worst_case_slope", repr(bern.worst_slope)])
        w.writerow(["sampling", "", "", "", "spread", repr(samp.spread)])
        w.writerow(["note", "", "", "", bern.note, ""])
    return EXIT_OK, (f"diagnose: bernstein slope={bern.slope:.3f} "
                     f"worst-case slope={bern.worst_slope:.3f} sampling spread={samp.spread:.3f}")


_HANDLERS = {"solve": _cmd_solve, "converge": _cmd_converge,
             "interp": _cmd_interp, "diagnose": _cmd_diagnose}


def load_config(path) -> RunConfig:
    path = Path(path)
    if not path.is_file():
        raise ConfigError("config", f"config not found: {path}")
    return parse_run_text(path.read_text())


def run(config_path, print_config: bool = False, stream=None) -> int:
    stream = stream or sys.stdout
    try:
        cfg = load_config(config_path)
    except ConfigError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    if print_config:
        stream.write(format_run_config(cfg))
        return EXIT_OK
    out = Path(cfg.output_dir)
    if not out.is_absolute():
        out = Path(config_path).resolve().parent / out
    out.mkdir(parents=True, exist_ok=True)
    try:
        problem = build_problem(cfg) if (cfg.problem_name or cfg.problem_f) else None
        code, summary = _HANDLERS[cfg.command](cfg, problem, out)
    except (SolverStalled, GramFactorizationError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_NOT_CONVERGED
    except (DegenerateDiscretization, NonPositiveRHS, ValueError) as exc:
        # bad discretization or data: the config cannot be run as written
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    print(summary, file=stream)
    domain = problem.domain if problem else make_domain(cfg.domain_shape, cfg.domain_a, cfg.domain_b)
    if not domain.smooth_boundary:
        print(f"note: {cfg.domain_shape} has corners, outside the smooth-boundary convergence theory",
              file=stream)
    return code


def main(argv=None) -> int:
    parser = argparse.ArgumentParser(prog="mameshfree", description=__doc__.splitlines()[0])
    parser.add_argument("config", help="run file (key = value lines)")
    parser.add_argument("--threads", type=int, default=None, help="BLAS threads (default: all cores)")
    parser.add_argument("--print-config", action="store_true", help="echo the parsed config and exit")
    parser.add_argument("-v", "--verbose", action="store_true")
    args = parser.parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s")
    if args.threads:
        from threadpoolctl import threadpool_limits

        with threadpool_limits(limits=args.threads):
            return run(args.config, args.print_config)
    return run(args.config, args.print_config)


if __name__ == "__main__":
    sys.exit(main())
