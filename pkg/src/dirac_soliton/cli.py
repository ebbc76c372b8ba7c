"""Command-line front end: ``ndirac {ground-state,solve,sweep,lemmas}``.

Every command writes CSV tables and a JSON report into ``--output-dir``.
Reports embed the resolved configuration and the package version, and
contain no timestamps, so identical inputs give byte-identical files.

Exit codes: 0 success, 2 usage, 3 solver failure, 4 I/O failure.
"""

from __future__ import annotations

import argparse
import json
import math
import sys
from dataclasses import asdict, dataclass, field, replace
from pathlib import Path
from typing import Optional, Sequence

import numpy as np

from . import __version__
from .contraction import (
    ContractionConfig,
    continuation_sweep,
    default_delta,
    fixed_point_residual,
    fixed_point_solve,
    max_adjacent_gap,
    scaling_slope,
)
from .diagnostics import comparison_record, fit_decay, rescale_to_physical
from .errors import SolverError
from .ground_state import pohozaev_residuals, residual_norm, solve_ground_state
from .linear_operator import LinearizedOp, hardy_suite
from .nonlinearity import (
    NonlinearContext,
    counterexample_scan,
    lemma_sweep,
    second_difference_zero_cases,
    sweeps_to_csv,
)
from .radial_core import make_grid, write_columns_csv
from .shooting import dirac_residual, shoot_dirac

EXIT_OK, EXIT_USAGE, EXIT_SOLVER, EXIT_IO = 0, 2, 3, 4

LEMMA_EXTENTS = {"taylor": 10.0, "power-difference": 10.0, "second-difference": 5.0}
LEMMA_DIMS = {"taylor": 2, "power-difference": 2, "second-difference": 3}


class UsageError(ValueError):
    pass


@dataclass
class RunConfig:
    theta: float = 1.0
    epsilon: Optional[float] = None
    omega: Optional[float] = None
    r_max: float = 20.0
    n: int = 4000
    spacing_mode: str = "uniform"
    ode_tol: float = 1e-10
    fp_tol: float = 1e-12
    max_iter: int = 200
    iteration: str = "picard"
    method: str = "banded"
    shoot: bool = False
    output_dir: str = "."
    seed: int = 0
    theta_list: list = field(default_factory=lambda: [1.0, 1.25, 1.5, 1.75, 1.9])
    epsilon_list: list = field(default_factory=list)
    sweep_points_2d: int = 201
    sweep_points_3d: int = 35
    hardy_fields: int = 50

    def validate(self, need_epsilon: bool = False) -> None:
        if self.epsilon is not None and self.omega is not None:
            raise UsageError("give either epsilon or omega, not both")
        if self.omega is not None:
            # rounded so that omega = 0.499 and epsilon = 1e-3 give identical runs
            self.epsilon = float(f"{0.5 - self.omega:.15g}")
            self.omega = None
        if need_epsilon and self.epsilon is None:
            raise UsageError("one of --epsilon / --omega is required")
        if not (0.0 < self.theta < 2.0):
            raise UsageError(f"theta={self.theta:g} outside the admissible range 0 < theta < 2")
        if self.epsilon is not None and not (0.0 < self.epsilon < 0.5):
            raise UsageError(f"epsilon={self.epsilon:g} outside (0, 1/2) (omega must lie in (0, 1/2))")
        for name in ("ode_tol", "fp_tol"):
            if not getattr(self, name) > 0.0:
                raise UsageError(f"{name} must be positive")
        if self.max_iter < 1 or self.n < 10 or not self.r_max > 0.0:
            raise UsageError("max_iter >= 1, n >= 10 and r_max > 0 are required")
        if self.iteration not in ("picard", "newton"):
            raise UsageError(f"unknown iteration {self.iteration!r}")

    def record(self) -> dict:
        """Configuration as embedded in reports; the output location is left
        out so that artifacts do not depend on where they are written."""
        rec = asdict(self)
        del rec["output_dir"]
        return rec


# ---------------------------------------------------------------------------
# output helpers


def _json_default(obj):
    if isinstance(obj, (np.floating, np.integer)):
        return obj.item()
    raise TypeError(f"not serializable: {type(obj).__name__}")


def _clean(obj):
    """Replace non-finite floats by strings so the JSON stays standard."""
    if isinstance(obj, dict):
        return {k: _clean(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [_clean(v) for v in obj]
    if isinstance(obj, (float, np.floating)) and not math.isfinite(obj):
        return str(float(obj))
    return obj


def _write(out: Path, name: str, text: str) -> None:
    (out / name).write_text(text, encoding="utf-8")


def _write_json(out: Path, name: str, payload: dict, cfg: RunConfig) -> None:
    body = {"version": __version__, "config": cfg.record(), **payload}
    _write(out, name, json.dumps(_clean(body), indent=2, default=_json_default) + "\n")


def _output_dir(cfg: RunConfig) -> Path:
    out = Path(cfg.output_dir)
    out.mkdir(parents=True, exist_ok=True)
    return out


def _fit_record(fit) -> dict:
    return asdict(fit)


# ---------------------------------------------------------------------------
# commands


def cmd_ground_state(cfg: RunConfig) -> int:
    cfg.validate()
    grid = make_grid(cfg.r_max, cfg.n, cfg.spacing_mode)
    gs = solve_ground_state(cfg.theta, grid, tol=cfg.ode_tol)
    poh = pohozaev_residuals(gs)
    report = {
        **gs.header(residual_norm(gs)),
        "bisection_steps": gs.bisection_steps,
        "splice_radius": gs.splice_radius,
        "pohozaev_residuals": list(poh),
        "decay_fit": _fit_record(fit_decay(gs.Q, power=1.0)),
    }
    out = _output_dir(cfg)
    _write(out, "ground_state.csv", gs.to_csv())
    _write_json(out, "ground_state.json", report, cfg)
    print(f"Q(0) = {gs.shoot_param:.12g}, residual {report['residual']:.2e}, "
          f"Pohozaev {max(poh):.2e}")
    return EXIT_OK


def cmd_solve(cfg: RunConfig) -> int:
    cfg.validate(need_epsilon=True)
    eps = cfg.epsilon
    grid = make_grid(cfg.r_max, cfg.n, cfg.spacing_mode)
    gs = solve_ground_state(cfg.theta, grid, tol=cfg.ode_tol)
    ctx = NonlinearContext(cfg.theta, eps, gs)
    op = LinearizedOp.from_ground_state(gs)
    ccfg = ContractionConfig(cfg.fp_tol, cfg.max_iter, method=cfg.method, iteration=cfg.iteration)
    point = fixed_point_solve(ctx, op, ccfg)
    pair = point.pair
    profile = rescale_to_physical(pair, gs)
    residual = dirac_residual(profile)
    kappa = math.sqrt(eps * (1.0 - eps))
    decay = {
        "e1": _fit_record(fit_decay(pair.e1, power=1.0)),
        "e2": _fit_record(fit_decay(pair.e2, power=1.0)),
        "f": _fit_record(fit_decay(profile.f, power=1.0)),
        "g": _fit_record(fit_decay(profile.g, power=1.0)),
        "mass_gap": kappa,
    }
    report = {
        "theta": cfg.theta,
        "epsilon": eps,
        "omega": 0.5 - eps,
        "ground_state": {"shoot_param": gs.shoot_param, "residual": residual_norm(gs)},
        "contraction": {
            **point.record(),
            "fixed_point_residual": fixed_point_residual(ctx, op, pair),
            "default_delta": default_delta(eps),
        },
        "profile": profile.header(residual),
        "decay": decay,
    }
    out = _output_dir(cfg)
    if cfg.shoot:
        shot = shoot_dirac(0.5 - eps, cfg.theta, profile.grid, guess=profile.g0)
        report["shooting"] = {
            **comparison_record(profile, shot, ("contraction", "shooting")),
            "residual": dirac_residual(shot),
        }
        _write(out, "shooting_profile.csv", shot.to_csv())
    _write(out, "profile.csv", profile.to_csv())
    _write(out, "perturbation.csv", pair.to_csv())
    _write_json(out, "report.json", report, cfg)
    print(f"theta={cfg.theta:g} eps={eps:g}: {point.iterations} iterations, "
          f"||Le - K||_L4 = {report['contraction']['fixed_point_residual']:.2e}, "
          f"||e||_W14 = {pair.w14_norm:.4g}")
    return EXIT_OK


def cmd_sweep(cfg: RunConfig) -> int:
    cfg.validate()
    if not cfg.epsilon_list:
        raise UsageError("--epsilon-list must not be empty")
    eps = [float(e) for e in cfg.epsilon_list]
    if any(b >= a for a, b in zip(eps, eps[1:])):
        raise UsageError("--epsilon-list must be strictly decreasing")
    thetas = [float(t) for t in cfg.theta_list]
    grid = make_grid(cfg.r_max, cfg.n, cfg.spacing_mode)
    ccfg = ContractionConfig(cfg.fp_tol, cfg.max_iter, method=cfg.method, iteration=cfg.iteration)
    points = continuation_sweep(thetas, eps, ccfg, grid=grid)
    branches = []
    for k, theta in enumerate(thetas):
        branch = points[k * len(eps):(k + 1) * len(eps)]
        branches.append({
            "theta": theta,
            "points": [p.record() for p in branch],
            "scaling_slope": scaling_slope(branch) if len(branch) > 1 else None,
            "max_adjacent_gap": max_adjacent_gap(branch),
        })
    out = _output_dir(cfg)
    _write_json(out, "branch.json", {"branches": branches}, cfg)
    for b in branches:
        slope = b["scaling_slope"]
        print(f"theta={b['theta']:g}: slope {slope if slope is None else format(slope, '.4f')}, "
              f"max gap {b['max_adjacent_gap']:.3e}")
    return EXIT_OK


def cmd_lemmas(cfg: RunConfig) -> int:
    thetas = [float(t) for t in cfg.theta_list]
    if not thetas or any(not (1.0 <= t < 2.0) for t in thetas):
        raise UsageError("--theta-list entries must lie in [1, 2)")
    results = []
    for lemma, extent in LEMMA_EXTENTS.items():
        pts = cfg.sweep_points_2d if LEMMA_DIMS[lemma] == 2 else cfg.sweep_points_3d
        for theta in thetas:
            results.append(lemma_sweep(lemma, theta, extent, pts))
    grid = make_grid(cfg.r_max, cfg.n, cfg.spacing_mode)
    hardy = hardy_suite(grid, cfg.hardy_fields, seed=cfg.seed)
    gs_half = solve_ground_state(0.5, grid, tol=cfg.ode_tol)
    eps_scan = np.logspace(-2, -5, 7)
    scans = [counterexample_scan(0.5, alpha, gs_half, eps_scan) for alpha in (2.0, 0.5)]

    summary = {
        "sweeps": [asdict(r) for r in results],
        "hardy": {str(p): {"min": float(v.min()), "max": float(v.max()), "count": int(v.size)}
                  for p, v in hardy.items()},
        "counterexample": [
            {"alpha": s.alpha, "theta": s.theta, "r0": s.r0, "slope": s.slope,
             "predicted_slope": s.predicted_slope}
            for s in scans
        ],
    }
    if 1.0 in thetas:
        count, worst = second_difference_zero_cases()
        summary["second_difference_zero_cases"] = {"count": count, "max_abs_numerator": worst}

    out = _output_dir(cfg)
    _write(out, "lemma_sweeps.csv", sweeps_to_csv(results))
    _write(out, "hardy.csv", write_columns_csv(
        {f"p={p:g}": v for p, v in hardy.items()}))
    _write(out, "counterexample.csv", write_columns_csv(
        {"epsilon": eps_scan,
         **{f"ratio_alpha={s.alpha:g}": np.array(s.ratios) for s in scans}}))
    _write_json(out, "lemmas.json", summary, cfg)
    for r in results:
        print(f"{r.lemma:>18s} theta={r.theta:<5g} max ratio {r.max_ratio:.6g}")
    for s in scans:
        print(f"counterexample alpha={s.alpha:g}: slope {s.slope:.4f} "
              f"(predicted {s.predicted_slope:.4f})")
    return EXIT_OK


COMMANDS = {
    "ground-state": cmd_ground_state,
    "solve": cmd_solve,
    "sweep": cmd_sweep,
    "lemmas": cmd_lemmas,
}


# ---------------------------------------------------------------------------
# argument parsing


def _float_list(text: str) -> list[float]:
    try:
        return [float(x) for x in text.replace(",", " ").split()]
    except ValueError as exc:
        raise argparse.ArgumentTypeError(f"not a list of numbers: {text!r}") from exc


def build_parser() -> argparse.ArgumentParser:
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--config", help="JSON file of RunConfig fields; flags override it")
    common.add_argument("--output-dir", dest="output_dir")
    common.add_argument("--theta", type=float)
    common.add_argument("--rmax", dest="r_max", type=float)
    common.add_argument("--n", type=int)
    common.add_argument("--spacing", dest="spacing_mode", choices=("uniform", "graded"))
    common.add_argument("--ode-tol", dest="ode_tol", type=float)
    common.add_argument("--seed", type=int)

    parser = argparse.ArgumentParser(
        prog="ndirac", description="Nonlinear Dirac standing waves near the nonrelativistic limit."
    )
    parser.add_argument("--version", action="version", version=f"%(prog)s {__version__}")
    sub = parser.add_subparsers(dest="command", required=True)

    sub.add_parser("ground-state", parents=[common], help="NLS ground state Q")

    solver = argparse.ArgumentParser(add_help=False)
    solver.add_argument("--fp-tol", dest="fp_tol", type=float)
    solver.add_argument("--max-iter", dest="max_iter", type=int)
    solver.add_argument("--iteration", choices=("picard", "newton"))
    solver.add_argument("--method", choices=("banded", "green"))

    p = sub.add_parser("solve", parents=[common, solver], help="one standing wave")
    freq = p.add_mutually_exclusive_group()
    freq.add_argument("--epsilon", type=float)
    freq.add_argument("--omega", type=float)
    p.add_argument("--shoot", action="store_const", const=True, default=None,
                   help="cross-check against direct shooting")

    p = sub.add_parser("sweep", parents=[common, solver], help="continuation in epsilon")
    p.add_argument("--epsilon-list", dest="epsilon_list", type=_float_list)
    p.add_argument("--theta-list", dest="theta_list", type=_float_list)

    p = sub.add_parser("lemmas", parents=[common], help="inequality sweeps and counterexample")
    p.add_argument("--theta-list", dest="theta_list", type=_float_list)
    p.add_argument("--points-2d", dest="sweep_points_2d", type=int)
    p.add_argument("--points-3d", dest="sweep_points_3d", type=int)
    p.add_argument("--hardy-fields", dest="hardy_fields", type=int)
    return parser


def resolve_config(args: argparse.Namespace) -> RunConfig:
    cfg = RunConfig()
    data = {}
    if args.config:
        try:
            data = json.loads(Path(args.config).read_text(encoding="utf-8"))
        except json.JSONDecodeError as exc:
            raise UsageError(f"config file is not valid JSON: {exc}") from exc
        unknown = set(data) - set(asdict(cfg))
        if unknown:
            raise UsageError(f"unknown config keys: {sorted(unknown)}")
        cfg = replace(cfg, **data)
    overrides = {
        k: v for k, v in vars(args).items()
        if v is not None and k not in ("config", "command")
    }
    # a flag for one of epsilon/omega replaces the other from the file
    if "epsilon" in overrides:
        cfg.omega = None
    if "omega" in overrides:
        cfg.epsilon = None
    if args.command == "sweep" and "theta_list" not in overrides and "theta_list" not in data:
        overrides["theta_list"] = [overrides.get("theta", cfg.theta)]
    return replace(cfg, **overrides)


def main(argv: Optional[Sequence[str]] = None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return int(exc.code or 0)
    try:
        cfg = resolve_config(args)
        return COMMANDS[args.command](cfg)
    except UsageError as exc:
        print(f"ndirac: error: {exc}", file=sys.stderr)
        return EXIT_USAGE
    except SolverError as exc:
        stage = getattr(exc, "stage", None) or "solver"
        print(f"ndirac: {stage} failure: {exc}", file=sys.stderr)
        return EXIT_SOLVER
    except OSError as exc:
        print(f"ndirac: I/O error: {exc}", file=sys.stderr)
        return EXIT_IO
    except ValueError as exc:
        print(f"ndirac: error: {exc}", file=sys.stderr)
        return EXIT_USAGE


if __name__ == "__main__":
    sys.exit(main())
