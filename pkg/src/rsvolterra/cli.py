"""Command-line interface.

Every run reads a JSON problem file, executes one pipeline and writes a
self-describing ``report.json`` (with an echo of the effective
configuration) plus CSV dumps into the output directory. Exit codes: 0 on
success, 1 when a hypothesis fails, 2 on numerical failure, 3 on bad input.
"""

from __future__ import annotations

import argparse
import json
import math
import sys
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from pathlib import Path
from typing import Any

import numpy as np

from .errors import ConditionFailed, ConfigError, VolterraError
from .grid import NormParams, SingularFunction, build_ray_grid, weighted_norm, write_csv
from .kernels import (
    _jsonable,
    estimate_gamma,
    estimate_tau,
    verify_diag,
    verify_reg_p,
    verify_sing,
)
from .laplace import fractional_integral, verify_dictionary
from .level1 import (
    Level1Problem,
    borel_sum,
    build_kernels,
    choose_ray,
    singular_points,
    solve_at,
    thread_count,
    validate_problem,
)
from .proto import (
    base_point_invariance,
    compute_prototype,
    estimate_leading_constant,
    verify_fixed_point,
    write_prototype,
)
from .solver import SolveConfig
from .volterra import OperatorHandle, contraction_estimate, smoothing_order

COMMANDS = ("validate", "proto", "solve", "laplace", "level1", "verify-all")


# {{{ configuration


@dataclass
class RunConfig:
    command: str
    problem: Level1Problem
    out: Path
    alpha_index: int | None = None
    theta: float | None = None
    grid: dict[str, Any] = field(default_factory=dict)
    solver: dict[str, Any] = field(default_factory=dict)
    quadrature: dict[str, Any] = field(default_factory=dict)
    z_samples: list[complex] = field(default_factory=lambda: [2.0 + 0j])
    seed: int = 0

    def echo(self) -> dict:
        return _jsonable(
            {
                "command": self.command,
                "P": list(self.problem.P),
                "Q": list(self.problem.Q),
                "R": list(self.problem.R),
                "A": self.problem.A,
                "alpha_index": self.alpha_index,
                "theta": self.theta,
                "grid": self.grid,
                "solver": self.solver,
                "quadrature": self.quadrature,
                "z_samples": self.z_samples,
                "seed": self.seed,
            }
        )

    def solve_config(self) -> SolveConfig:
        s = self.solver
        return SolveConfig(
            rho=s.get("rho"),
            lam=float(s.get("lambda", 0.0)),
            kappa_target=float(s.get("kappa_target", 0.9)),
            tol=float(s.get("tol", 1e-10)),
            max_iter=int(s.get("max_iter", 500)),
            stop_lambda=float(s.get("stop_lambda", 0.0)),
            seed=self.seed,
            trials=int(s.get("trials", 16)),
        )


def _number(v) -> complex:
    if isinstance(v, (list, tuple)) and len(v) == 2:
        return complex(float(v[0]), float(v[1]))
    if isinstance(v, (int, float)) and not isinstance(v, bool):
        return complex(v)
    raise ConfigError(f"expected a number or [re, im], got {v!r}")


def parse_z(text: str) -> list[complex]:
    """``"re,im;re,im"`` to a list of complex numbers."""
    out = []
    for item in text.split(";"):
        item = item.strip()
        if not item:
            continue
        parts = item.split(",")
        try:
            re = float(parts[0])
            im = float(parts[1]) if len(parts) > 1 else 0.0
        except (ValueError, IndexError) as exc:
            raise ConfigError(f"cannot parse z sample {item!r}") from exc
        out.append(complex(re, im))
    if not out:
        raise ConfigError("no z samples given")
    return out


def load_config(args: argparse.Namespace) -> RunConfig:
    path = Path(args.problem)
    if not path.is_file():
        raise ConfigError(f"problem file {path} does not exist")
    try:
        data = json.loads(path.read_text())
    except json.JSONDecodeError as exc:
        raise ConfigError(f"problem file is not valid JSON: {exc}") from exc
    if not isinstance(data, dict) or "P" not in data or "Q" not in data:
        raise ConfigError("problem needs at least the keys 'P' and 'Q'")

    try:
        problem = Level1Problem(
            tuple(_number(c) for c in data["P"]),
            tuple(_number(c) for c in data["Q"]),
            tuple(_number(c) for c in data.get("R", [])),
            float(data.get("A", 0.0)),
        )
        grid = dict(data.get("grid", {}))
        solver = dict(data.get("solver", {}))
        quadrature = dict(data.get("quadrature", {}))
        z = [_number(v) for v in data.get("z_samples", [2.0])]
    except (TypeError, ValueError) as exc:
        raise ConfigError(f"malformed problem file: {exc}") from exc

    if args.tol is not None:
        solver["tol"] = args.tol
    if args.rho is not None:
        solver["rho"] = args.rho
    if args.lam is not None:
        solver["lambda"] = args.lam
    if args.grid_panels is not None:
        grid["panels"] = args.grid_panels
    if args.nodes_per_panel is not None:
        grid["nodes_per_panel"] = args.nodes_per_panel
    if args.z is not None:
        z = parse_z(args.z)
    theta = args.theta if args.theta is not None else data.get("theta")
    alpha_index = args.alpha_index if args.alpha_index is not None else data.get("alpha_index")

    return RunConfig(
        command=args.command,
        problem=problem,
        out=Path(args.out),
        alpha_index=None if alpha_index is None else int(alpha_index),
        theta=None if theta is None else float(theta),
        grid=grid,
        solver=solver,
        quadrature=quadrature,
        z_samples=z,
        seed=args.seed,
    )


# }}}


# {{{ pipelines


def _targets(cfg: RunConfig):
    pts = singular_points(cfg.problem)
    if cfg.alpha_index is not None:
        if not 0 <= cfg.alpha_index < len(pts):
            raise ConfigError(f"alpha_index {cfg.alpha_index} out of range 0..{len(pts) - 1}")
        return [pts[cfg.alpha_index]]
    return [p for p in pts if p.admissible]


def _grid_for(cfg: RunConfig, alpha: complex):
    T = float(cfg.grid.get("T", 40.0))
    ray = choose_ray(cfg.problem, alpha, cfg.theta, T)
    t_min = float(cfg.grid.get("t_min", T * 2.0**-20))
    ratio = float(cfg.grid.get("ratio", 2.0))
    if "panels" in cfg.grid:
        n = int(cfg.grid["panels"])
        if n < 1:
            raise ConfigError("grid.panels must be positive")
        ratio = (T / t_min) ** (1.0 / n) * (1 + 1e-12)
    npp = int(cfg.grid.get("nodes_per_panel", 16))
    return ray, build_ray_grid(ray, t_min, ratio, npp)


def _operator(kernels, grid, cfg: RunConfig) -> OperatorHandle:
    q = cfg.quadrature
    if str(q.get("rule", "gauss-jacobi")) != "gauss-jacobi":
        raise ConfigError(f"unsupported quadrature rule {q['rule']!r}")
    return OperatorHandle(
        kernels,
        grid,
        order=int(q.get("order", 20)),
        rule=str(q.get("rule", "gauss-jacobi")),
        quad_tol=float(q.get("tol", 1e-9)),
    )


def _validated(cfg: RunConfig) -> dict:
    report = validate_problem(cfg.problem)
    if not report.verified:
        raise ConditionFailed(", ".join(report.reasons), report)
    return report.to_dict()


def _map_alphas(cfg: RunConfig, func) -> list:
    pts = _targets(cfg)
    with ThreadPoolExecutor(max_workers=thread_count()) as pool:
        return list(pool.map(func, pts))


def run_validate(cfg: RunConfig) -> dict:
    report = _validated(cfg)
    pts = singular_points(cfg.problem)
    return {
        "validation": report,
        "singular_points": [
            {"alpha": p.alpha, "tau": p.tau, "admissible": p.admissible} for p in pts
        ],
    }


def run_proto(cfg: RunConfig) -> dict:
    _validated(cfg)

    def one(pt):
        k = build_kernels(cfg.problem, pt.alpha, float(cfg.grid.get("T", 40.0)))
        ray, grid = _grid_for(cfg, pt.alpha)
        proto = compute_prototype(k.k0, pt.tau_real, grid)
        M, rate = estimate_leading_constant(proto)
        idx = _index(cfg, pt.alpha)
        proto = type(proto)(proto.f0, proto.base_t, proto.tau, M, rate)
        write_prototype(proto, cfg.out / f"proto_{idx}")
        return {
            "alpha": pt.alpha,
            "theta": ray.theta,
            **proto.header(),
            "fixed_point_residual": verify_fixed_point(proto, k.k0),
        }

    return {"prototypes": _map_alphas(cfg, one)}


def _index(cfg: RunConfig, alpha: complex) -> int:
    pts = singular_points(cfg.problem)
    return min(range(len(pts)), key=lambda i: abs(pts[i].alpha - alpha))


def _solve_one(cfg: RunConfig, pt, laplace: bool):
    ray, grid = _grid_for(cfg, pt.alpha)
    q = cfg.quadrature
    if str(q.get("rule", "gauss-jacobi")) != "gauss-jacobi":
        raise ConfigError(f"unsupported quadrature rule {q['rule']!r}")
    res = solve_at(
        cfg.problem,
        pt.alpha,
        ray,
        cfg.solve_config(),
        grid,
        order=int(q.get("order", 20)),
        quad_tol=float(q.get("tol", 1e-9)),
    )
    if laplace:
        res = borel_sum(cfg.problem, pt.alpha, ray, cfg.z_samples, solution=res)
    idx = _index(cfg, pt.alpha)
    write_csv(res.psi.f, cfg.out / f"psi_{idx}.csv")
    out = {
        "alpha": pt.alpha,
        "tau": pt.tau_real,
        "theta": ray.theta,
        "volterra_residual": res.volterra_residual,
        "solution": res.psi.report(),
    }
    if laplace:
        res.Psi.write_csv(cfg.out / f"Psi_{idx}.csv")
        out["Psi"] = {
            "z": res.Psi.z_samples.tolist(),
            "values": res.Psi.phi_values.tolist(),
            "tail_bound": res.Psi.tail_bound.tolist(),
            "lambda": res.Psi.lam,
            "T": res.Psi.T,
        }
        out["ode_residual"] = res.ode_residual
    return out


def run_solve(cfg: RunConfig) -> dict:
    _validated(cfg)
    return {"solutions": _map_alphas(cfg, lambda pt: _solve_one(cfg, pt, False))}


def run_laplace(cfg: RunConfig) -> dict:
    _validated(cfg)
    return {"solutions": _map_alphas(cfg, lambda pt: _solve_one(cfg, pt, True))}


def run_level1(cfg: RunConfig) -> dict:
    validation = _validated(cfg)
    sols = _map_alphas(cfg, lambda pt: _solve_one(cfg, pt, True))
    return {"validation": validation, "solutions": sols}


def _check(name: str, func) -> dict:
    """Run one check; a raised package error becomes a failed entry."""
    try:
        passed, detail = func()
        return {"check": name, "status": "pass" if passed else "fail", "detail": detail}
    except VolterraError as exc:
        return {
            "check": name,
            "status": "fail",
            "detail": {"error": type(exc).__name__, "message": str(exc)},
            "exit_code": exc.exit_code,
        }


def run_verify_all(cfg: RunConfig) -> dict:
    """Condition reports and property suites for every admissible singular point."""
    _validated(cfg)
    solve_cfg = cfg.solve_config()

    def one(pt):
        alpha, tau = pt.alpha, pt.tau_real
        ray, grid = _grid_for(cfg, alpha)
        k = build_kernels(cfg.problem, alpha, ray.T)
        op = _operator(k, grid, cfg)
        theta = ray.theta
        rho = solve_cfg.rho if solve_cfg.rho is not None else tau + 0.1
        rows = []

        rows.append(_check("tau", lambda: (
            abs(estimate_tau(k.k0, theta) - tau) <= 1e-8, {"tau": tau})))
        sing = {}

        def check_sing():
            rep = verify_sing(k.k0, tau, 1.1 * tau, theta)
            sing.update(rep.constants)
            return rep.verified, rep.to_dict()

        rows.append(_check("sing", check_sing))
        rows.append(_check("diag_0", lambda: (True, verify_diag(k.k0, 0.0, theta=theta).to_dict())))
        rows.append(_check("reg_p", lambda: (
            (rep := verify_reg_p(k.k0.p, alpha, theta)).verified, rep.to_dict())))
        if k.k_star is not None:
            rows.append(_check("diag_star", lambda: (True, verify_diag(
                k.k_star, k.k_star.lambda_delta, alpha, theta).to_dict())))
            rows.append(_check("gamma", lambda: (
                abs((g := estimate_gamma(k.k_star, alpha, theta)) - 1) < 0.05, {"gamma": g})))

        def check_proto():
            proto = compute_prototype(k.k0, tau, grid)
            res = verify_fixed_point(proto, k.k0, op=op.restrict("separable"))
            return res <= 1e-8, {"residual": res}

        rows.append(_check("prototype_fixed_point", check_proto))

        def check_base():
            t1, t2 = 0.5 * min(1.0, ray.T), min(1.0, ray.T)
            c = base_point_invariance(k.k0, tau, grid, t1, t2)
            return True, {"ratio": c}

        rows.append(_check("base_point_invariance", check_base))

        def check_contraction():
            delta = sing.get("delta", 1.0)
            est = contraction_estimate(op.restrict("separable"), rho, 1.0, delta, seed=cfg.seed)
            bound = 1.1 * tau / rho
            return est.near_factor <= bound + 0.02, {"near_factor": est.near_factor, "bound": bound}

        rows.append(_check("contraction_near", check_contraction))

        if k.k_star is None:
            rows.append({"check": "smoothing", "status": "n/a", "detail": {}})
        else:
            def check_smoothing():
                phi = SingularFunction(grid, tau - 1, np.ones(grid.size))
                order = smoothing_order(op, phi)
                return order is not None and order >= tau - 0.05, {"order": order}

            rows.append(_check("smoothing", check_smoothing))

        def check_semigroup():
            phi = SingularFunction(grid, tau - 1, np.ones(grid.size))
            half = fractional_integral(0.5, fractional_integral(0.5, phi))
            full = fractional_integral(1.0, phi)
            p = NormParams(tau, 0.0)
            err = weighted_norm(half - full, p) / weighted_norm(full, p)
            return err <= 1e-8, {"mismatch": err}

        rows.append(_check("semigroup", check_semigroup))

        def check_dictionary():
            phi = SingularFunction(grid, tau - 1, np.ones(grid.size))
            z = [zz for zz in cfg.z_samples if (zz * ray.direction).real > 0.1]
            if not z:
                return True, {"skipped": "no z sample in the half-plane"}
            rep = verify_dictionary(phi, 0.5, 1, z)
            worst = max(rep["fractional_mismatch"], rep["multiplication_mismatch"])
            return worst <= 1e-6 + rep["tail"], rep

        rows.append(_check("dictionary", check_dictionary))

        def check_solution():
            res = solve_at(cfg.problem, alpha, ray, solve_cfg, grid, order=op.order)
            return res.volterra_residual <= 1e-8, {"volterra_residual": res.volterra_residual}

        rows.append(_check("solution_residual", check_solution))
        return {"alpha": alpha, "tau": tau, "theta": theta, "checks": rows}

    return {"points": _map_alphas(cfg, one)}


RUNNERS = {
    "validate": run_validate,
    "proto": run_proto,
    "solve": run_solve,
    "laplace": run_laplace,
    "level1": run_level1,
    "verify-all": run_verify_all,
}


# }}}


def _print_matrix(report: dict) -> None:
    for point in report.get("points", []):
        a = complex(*point["alpha"]) if isinstance(point["alpha"], list) else point["alpha"]
        print(f"alpha = {a.real:g}{a.imag:+g}i, tau = {point['tau']:g}")
        for row in point["checks"]:
            print(f"  {row['check']:<24} {row['status'].upper()}")


def _verify_exit(report: dict) -> int:
    codes = [
        row.get("exit_code", 1)
        for point in report.get("points", [])
        for row in point["checks"]
        if row["status"] == "fail"
    ]
    if not codes:
        return 0
    # hypothesis failures take precedence over numerical ones
    return 1 if 1 in codes else max(codes)


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="rsvolterra",
        description="Regular singular Volterra equations and Borel-Laplace resummation.",
    )
    parser.add_argument("command", choices=COMMANDS)
    parser.add_argument("--problem", required=True, help="problem JSON file")
    parser.add_argument("--out", default="rsv-out", help="output directory")
    parser.add_argument("--seed", type=int, default=0)
    parser.add_argument("--tol", type=float)
    parser.add_argument("--rho", type=float)
    parser.add_argument("--lambda", dest="lam", type=float, help="0 selects Lambda automatically")
    parser.add_argument("--theta", type=float)
    parser.add_argument("--alpha-index", type=int)
    parser.add_argument("--grid-panels", type=int)
    parser.add_argument("--nodes-per-panel", type=int)
    parser.add_argument("--z", help='z samples as "re,im;re,im;..."')
    return parser


def main(argv: list[str] | None = None) -> int:
    args = build_parser().parse_args(argv)
    report: dict[str, Any] = {"command": args.command}
    try:
        cfg = load_config(args)
        report["config"] = cfg.echo()
        cfg.out.mkdir(parents=True, exist_ok=True)
        with np.errstate(all="ignore"):
            report["result"] = RUNNERS[cfg.command](cfg)
        code = _verify_exit(report["result"]) if cfg.command == "verify-all" else 0
        if cfg.command == "verify-all":
            _print_matrix(report["result"])
    except VolterraError as exc:
        code = exc.exit_code
        report["error"] = {"type": type(exc).__name__, "message": str(exc)}
        failed = getattr(exc, "report", None)
        if failed is not None:
            report["error"]["reasons"] = list(failed.reasons)
            report["result"] = {"validation": failed.to_dict()}
        print(f"error: {type(exc).__name__}: {exc}", file=sys.stderr)
        if isinstance(exc, ConfigError) and "config" not in report:
            return code

    report["exit_code"] = code
    text = json.dumps(_jsonable(report), sort_keys=True, indent=2, default=_fallback)
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    (out / "report.json").write_text(text + "\n")
    if code == 0 and args.command != "verify-all":
        print(f"wrote {out / 'report.json'}")
    return code


def _fallback(obj):
    if isinstance(obj, np.ndarray):
        return _jsonable(obj.tolist())
    if isinstance(obj, float) and not math.isfinite(obj):
        return str(obj)
    return str(obj)


if __name__ == "__main__":
    sys.exit(main())
