"""Command-line front end for the laboratory.

Subcommands mirror the workflow: ``ground`` solves the whole-space
profile, ``solve`` one Neumann problem, ``sweep`` a diffusion
continuation written as CSV, ``moser`` prints the iteration ladder,
``verify`` runs the self-checks and ``fit`` extracts power laws from a
sweep CSV.  A plain ``key = value`` config file can seed any run;
explicit flags override it.
"""

from __future__ import annotations

import argparse
import os
import sys
import tempfile

import numpy as np

from .grids import Params, build_grid, build_line_grid
from .harness import read_sweep_csv, scaling_fit, verify_suite, write_sweep_csv
from .kernel import kernel_weights
from .moser import (
    L_closed_form,
    M_sequence,
    MoserParams,
    gamma_majorant,
    lambda_term,
    moser_bound_constant,
)
from .solvers import (
    ConvergenceError,
    SolverConfig,
    SweepAborted,
    default_grid_policy,
    save_snapshot,
    solve_ground_state,
    solve_least_energy,
    sweep,
)

__all__ = ["main"]

# Recognised config keys and their parsers; anything else is a typo and
# is rejected rather than silently ignored.
_CONFIG_KEYS = {
    "s": float,
    "p": float,
    "n": int,
    "domain.a": float,
    "domain.b": float,
    "grid.h": float,
    "grid.Rext": float,
    "solver.tol": float,
    "solver.max_iters": int,
    "solver.step": float,
    "sweep.d_max": float,
    "sweep.d_min": float,
    "sweep.points": int,
}

_QUANTITY_FLAGS = {
    "cd": "cd",
    "sup": "sup",
    "r:0.5": "L0.5",
    "r:1": "L1",
    "r:2": "L2",
    "r:p1": "Lp1",
    "r:4": "L4",
}


def load_config(path: str) -> dict:
    """Parse a ``key = value`` config file with the fixed key set."""
    values: dict = {}
    with open(path) as fh:
        for lineno, raw in enumerate(fh, start=1):
            line = raw.split("#", 1)[0].strip()
            if not line:
                continue
            if "=" not in line:
                raise ValueError(f"{path}:{lineno}: expected 'key = value'")
            key, _, text = line.partition("=")
            key = key.strip()
            if key not in _CONFIG_KEYS:
                raise ValueError(f"{path}:{lineno}: unknown config key {key!r}")
            try:
                values[key] = _CONFIG_KEYS[key](text.strip())
            except ValueError as exc:
                raise ValueError(f"{path}:{lineno}: bad value for {key}: {exc}")
    return values


def _resolve(flag, config: dict, key: str, default):
    if flag is not None:
        return flag
    if key in config:
        return config[key]
    return default


def _solver_config(config: dict) -> SolverConfig:
    return SolverConfig(
        tol_residual=config.get("solver.tol", 1e-8),
        max_iters=config.get("solver.max_iters", 50_000),
        step=config.get("solver.step", 0.1),
    )


def _params(args, config: dict, d: float = 1.0) -> Params:
    return Params(
        n=config.get("n", 1),
        s=_resolve(getattr(args, "s", None), config, "s", 0.25),
        p=_resolve(getattr(args, "p", None), config, "p", 1.5),
        d=d,
    )


def _atomic_write(path: str, text: str) -> None:
    directory = os.path.dirname(os.path.abspath(path))
    fd, tmp = tempfile.mkstemp(dir=directory, suffix=".tmp")
    try:
        with os.fdopen(fd, "w") as fh:
            fh.write(text)
        os.replace(tmp, path)
    except BaseException:
        if os.path.exists(tmp):
            os.unlink(tmp)
        raise


def _fmt(x: float) -> str:
    return format(float(x), ".17g")


def _cmd_ground(args, config: dict) -> int:
    params = _params(args, config)
    half_width = _resolve(args.L, config, "", 60.0)
    h = _resolve(args.h, config, "grid.h", 0.05)
    grid = build_line_grid(half_width, h)
    result = solve_ground_state(params, grid, _solver_config(config))
    print(
        f"F = {result.F_value:.10g}  pohozaev = {result.pohozaev_residual:.3e}  "
        f"decay = {result.decay_exponent_fit:.4f}  "
        f"iterations = {result.iterations}"
    )
    if args.out:
        header = [
            f"# s = {_fmt(params.s)}",
            f"# p = {_fmt(params.p)}",
            f"# L = {_fmt(half_width)}",
            f"# h = {_fmt(grid.h)}",
            f"# F = {_fmt(result.F_value)}",
            f"# pohozaev = {_fmt(result.pohozaev_residual)}",
            f"# decay_exponent = {_fmt(result.decay_exponent_fit)}",
        ]
        rows = [
            f"{_fmt(x)} {_fmt(v)}"
            for x, v in zip(grid.nodes, result.w.values)
        ]
        _atomic_write(args.out, "\n".join(header + rows) + "\n")
    return 0


def _cmd_solve(args, config: dict) -> int:
    params = _params(args, config, d=args.d)
    a = _resolve(args.a, config, "domain.a", 0.0)
    b = _resolve(args.b, config, "domain.b", 1.0)
    h = _resolve(args.h, config, "grid.h", None)
    r_ext = _resolve(args.Rext, config, "grid.Rext", 2.0 * (b - a))
    if h is None:
        grid = default_grid_policy(params, a, b)
    else:
        grid = build_grid(a, b, h, r_ext)
    table = kernel_weights(grid, params)
    result = solve_least_energy(params, grid, table, _solver_config(config))
    branch = "constant" if result.constant_branch else "nonconstant"
    print(
        f"c_d = {result.c_d:.10g}  sup = {result.M_d:.10g}  "
        f"argmax = {result.argmax_x:.6g}  branch = {branch}  "
        f"iterations = {result.iterations}"
    )
    if args.out:
        save_snapshot(args.out, result, params)
    return 0


def _cmd_sweep(args, config: dict) -> int:
    d_max = _resolve(args.d_max, config, "sweep.d_max", 2.0)
    d_min = _resolve(args.d_min, config, "sweep.d_min", 0.02)
    points = _resolve(args.points, config, "sweep.points", 13)
    if not 0.0 < d_min < d_max:
        raise ValueError(f"need 0 < d_min < d_max, got [{d_min}, {d_max}]")
    if points < 2:
        raise ValueError(f"need at least 2 sweep points, got {points}")
    params = _params(args, config)
    a = config.get("domain.a", 0.0)
    b = config.get("domain.b", 1.0)
    ground = solve_ground_state(
        params, build_line_grid(60.0, 0.05), _solver_config(config)
    )
    d_values = list(np.geomspace(d_max, d_min, points))

    def policy(p: Params) -> object:
        return default_grid_policy(p, a, b)

    try:
        records = sweep(
            d_values,
            params,
            grid_policy=policy,
            config=_solver_config(config),
            ground=ground,
        )
    except SweepAborted as exc:
        if exc.records and args.out:
            write_sweep_csv(args.out, exc.records)
        raise
    if args.out:
        write_sweep_csv(args.out, records)
    for r in records:
        branch = "constant" if r.constant_branch else "nonconstant"
        print(f"d = {r.d:.6g}  c_d = {r.c_d:.10g}  sup = {r.sup_u:.6g}  {branch}")
    return 0


def _cmd_moser(args, config: dict) -> int:
    mp = MoserParams(
        n=config.get("n", 1),
        s=_resolve(args.s, config, "s", 0.25),
        p=_resolve(args.p, config, "p", 1.5),
        A=args.A,
        C0=args.C0,
    )
    print("j,L_j,lambda_j,eta_j,gamma_j,eta_over_L_prev")
    for j in range(args.jmax + 1):
        ratio = (
            "" if j == 0 else _fmt(M_sequence(j, mp) / L_closed_form(j - 1, mp))
        )
        print(
            ",".join(
                [
                    str(j),
                    _fmt(L_closed_form(j, mp)),
                    _fmt(lambda_term(j, mp)),
                    _fmt(M_sequence(j, mp)),
                    _fmt(gamma_majorant(j, mp)),
                    ratio,
                ]
            )
        )
    bound = moser_bound_constant(mp, max(2, args.jmax))
    print(f"# m = {_fmt(bound.m)}")
    print(f"# limit = {_fmt(bound.limit)}")
    return 0


def _cmd_verify(args, config: dict) -> int:
    params = _params(args, config)
    report = verify_suite(params)
    failures = 0
    for item in report:
        tag = "PASS" if item.passed else "FAIL"
        print(f"[{tag}] {item.name}: {item.detail}")
        failures += 0 if item.passed else 1
    print(f"{len(report) - failures}/{len(report)} checks passed")
    return 0 if failures == 0 else 1


def _cmd_fit(args, config: dict) -> int:
    records = read_sweep_csv(args.infile)
    quantity = _QUANTITY_FLAGS.get(args.quantity)
    if quantity is None:
        raise ValueError(
            f"unknown quantity {args.quantity!r}; expected one of "
            f"{sorted(_QUANTITY_FLAGS)}"
        )
    fit = scaling_fit(records, quantity)
    print(
        f"slope = {fit.slope:.6g}  intercept = {fit.intercept:.6g}  "
        f"r2 = {fit.r_squared:.8f}  window = [{fit.window[0]:.6g}, "
        f"{fit.window[1]:.6g}]"
    )
    return 0


def _build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="fracneumann",
        description="Least-energy solutions of a 1D fractional Neumann problem",
    )
    parser.add_argument("--config", help="key = value config file")
    sub = parser.add_subparsers(dest="command", required=True)

    g = sub.add_parser("ground", help="whole-space ground-state profile")
    g.add_argument("--s", type=float)
    g.add_argument("--p", type=float)
    g.add_argument("--L", type=float, help="window half-width (default 60)")
    g.add_argument("--h", type=float, help="grid spacing (default 0.05)")
    g.add_argument("--out", help="write the profile to this file")
    g.set_defaults(func=_cmd_ground)

    s = sub.add_parser("solve", help="one Neumann least-energy solve")
    s.add_argument("--d", type=float, required=True)
    s.add_argument("--s", type=float)
    s.add_argument("--p", type=float)
    s.add_argument("--a", type=float)
    s.add_argument("--b", type=float)
    s.add_argument("--h", type=float, help="grid spacing (default: policy)")
    s.add_argument("--Rext", type=float, help="collar width (default 2(b-a))")
    s.add_argument("--out", help="write a solution snapshot to this file")
    s.set_defaults(func=_cmd_solve)

    w = sub.add_parser("sweep", help="geometric diffusion continuation")
    w.add_argument("--d-max", dest="d_max", type=float)
    w.add_argument("--d-min", dest="d_min", type=float)
    w.add_argument("--points", type=int)
    w.add_argument("--s", type=float)
    w.add_argument("--p", type=float)
    w.add_argument("--out", help="write records as CSV to this file")
    w.set_defaults(func=_cmd_sweep)

    m = sub.add_parser("moser", help="print the iteration ladder as CSV")
    m.add_argument("--A", type=float, default=1.0)
    m.add_argument("--C0", type=float, default=1.0)
    m.add_argument("--jmax", type=int, default=30)
    m.add_argument("--s", type=float)
    m.add_argument("--p", type=float)
    m.set_defaults(func=_cmd_moser)

    v = sub.add_parser("verify", help="run the self-check suite")
    v.add_argument("--s", type=float)
    v.add_argument("--p", type=float)
    v.set_defaults(func=_cmd_verify)

    f = sub.add_parser("fit", help="power-law fit from a sweep CSV")
    f.add_argument("--in", dest="infile", required=True, help="sweep CSV path")
    f.add_argument(
        "--quantity",
        required=True,
        help="cd, sup, or r:{0.5,1,2,p1,4}",
    )
    f.set_defaults(func=_cmd_fit)
    return parser


def main(argv: list[str] | None = None) -> int:
    args = _build_parser().parse_args(argv)
    try:
        config = load_config(args.config) if args.config else {}
        return args.func(args, config)
    except (ValueError, ConvergenceError, SweepAborted, OSError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
