"""Ground-state and least-energy solvers, continuation sweep, snapshots.

Both solvers are Nehari-projected gradient descents: every accepted
iterate is nonnegative, (for the whole-space problem) even, and scaled
onto the Nehari manifold, so the objective that backtracking monitors is
the ray-sup energy M[u] = sup_t J(tu).  Critical points are detected
through the Euler-Lagrange residual of the discrete equations, not
through iterate stagnation.

For the Neumann problem the unknowns are interior values only; the
exterior collar is rebuilt by ``extend`` at every evaluation, which
keeps the boundary condition exact and makes the reduced gradient equal
the partial gradient of J_d (the extension is stationary in the
exterior values, so no chain-rule term survives).
"""

from __future__ import annotations

import math
import os
from dataclasses import dataclass, field, replace

import numpy as np

from .energy import J_d, _gagliardo_line, _quadratic_and_potential, pohozaev
from .grids import Grid, LineGrid, Params, build_grid
from .kernel import Field, KernelTable, frac_laplacian_apply, kernel_weights
from .neumann import ExtendedField, extend

__all__ = [
    "SolverConfig",
    "GroundStateResult",
    "LeastEnergyResult",
    "SweepRecord",
    "ConvergenceError",
    "SweepAborted",
    "solve_ground_state",
    "solve_least_energy",
    "sweep",
    "default_grid_policy",
    "transplant_ground_state",
    "record_from_result",
    "save_snapshot",
    "load_snapshot",
]

_INITS = ("gaussian_bump", "transplanted_ground_state", "warm_start")

# Internal gate on the volume (flux) identity, an order below what the
# identity checks downstream ask for.
_FLUX_TOL = 1e-7


class ConvergenceError(RuntimeError):
    """Raised when a descent run fails; carries the residual history."""

    def __init__(self, message: str, history: list[float]):
        super().__init__(message)
        self.history = list(history)


class SweepAborted(RuntimeError):
    """Raised when a sweep member fails; carries the finished records."""

    def __init__(self, message: str, records: list["SweepRecord"]):
        super().__init__(message)
        self.records = list(records)


@dataclass(frozen=True)
class SolverConfig:
    tol_residual: float = 1e-8
    max_iters: int = 50000
    step: float = 0.1
    backtrack: float = 0.5
    init: str = "gaussian_bump"
    seed: int = 0

    def __post_init__(self) -> None:
        if not self.tol_residual > 0.0:
            raise ValueError("tol_residual must be positive")
        if not 0.0 < self.backtrack < 1.0:
            raise ValueError("backtrack factor must lie in (0, 1)")
        if self.max_iters < 1:
            raise ValueError("max_iters must be at least 1")
        if not self.step > 0.0:
            raise ValueError("initial step must be positive")
        if self.init not in _INITS:
            raise ValueError(f"unknown initializer {self.init!r}; pick from {_INITS}")


@dataclass(frozen=True)
class GroundStateResult:
    w: Field
    grid: LineGrid
    F_value: float
    pohozaev_residual: float
    decay_exponent_fit: float
    symmetric_error: float
    el_residual: float
    iterations: int
    peak_history: np.ndarray = field(repr=False, default=None)


@dataclass(frozen=True)
class LeastEnergyResult:
    u: ExtendedField
    c_d: float
    M_d: float
    argmax_x: float
    nehari_residual: float
    flux_residual: float
    iterations: int
    constant_branch: bool
    init_used: str
    el_residual: float
    peak_history: np.ndarray = field(repr=False, default=None)


@dataclass(frozen=True)
class SweepRecord:
    """Per-diffusion diagnostics emitted by a continuation sweep.

    ``lr_norms`` maps exponent labels to the raw integrals int_domain
    u^r for r in {0.5, 1, 2, p+1, 4} plus the sup under "Linf"; the
    scaling laws act on these integrals directly.
    """

    d: float
    c_d: float
    sup_u: float
    argmax_x: float
    dist_boundary: float
    lr_norms: dict[str, float]
    nehari_res: float
    flux_res: float
    constant_branch: bool


# ---------------------------------------------------------------------------
# whole-space ground state


def _line_quad_pot(
    v: np.ndarray, p: float, table: KernelTable, workers: int
) -> tuple[float, float]:
    """Q(v) = c [v]^2 + int v^2 and P(v) = int |v|^(p+1) on the line."""
    quad = table.c_ns / 2.0 * _gagliardo_line(v, table, workers) + table.h * float(
        np.sum(v * v)
    )
    pot = table.h * float(np.sum(np.abs(v) ** (p + 1.0)))
    return quad, pot


def _ray_peak(quad: float, pot: float, p: float) -> float:
    """sup_t of (t^2/2) quad - (t^(p+1)/(p+1)) pot, in closed form."""
    t0 = (quad / pot) ** (1.0 / (p - 1.0))
    return (0.5 - 1.0 / (p + 1.0)) * t0 ** (p + 1.0) * pot


def solve_ground_state(
    params: Params,
    grid: LineGrid,
    config: SolverConfig = SolverConfig(),
    workers: int = 1,
) -> GroundStateResult:
    """Least-energy solution of (-Lap)^s w + w = w^p on the line.

    Projected descent: each iterate is replaced by its absolute value,
    symmetrized by averaging with its reflection, and scaled onto the
    Nehari manifold; steps follow the negative Euler-Lagrange residual
    with a Barzilai-Borwein guess and backtracking on the ray-sup
    energy.  Convergence is declared when the residual drops below
    ``tol_residual`` in sup norm over the inner half of the window.

    Raises
    ------
    ConvergenceError
        When the iteration stalls above tolerance or collapses to the
        trivial limit; the residual history rides on the exception.
    """
    params.require_whole_space_exponent()
    if not isinstance(grid, LineGrid):
        raise ValueError("ground-state solves need a symmetric line grid")
    if grid.half_width < 40.0:
        raise ValueError(
            f"window half-width {grid.half_width} too small; need at least 40"
        )
    table = kernel_weights(grid, params)
    p = params.p
    x = grid.nodes
    inner = np.abs(x) <= grid.half_width / 2.0

    history: list[float] = []

    def project(v: np.ndarray) -> tuple[np.ndarray, float]:
        v = np.abs(v)
        v = 0.5 * (v + v[::-1])
        quad, pot = _line_quad_pot(v, p, table, workers)
        if pot <= 0.0 or not math.isfinite(pot):
            raise ConvergenceError("iterate collapsed to the trivial limit", history)
        t0 = (quad / pot) ** (1.0 / (p - 1.0))
        return t0 * v, _ray_peak(quad, pot, p)

    u, peak = project(np.exp(-0.5 * x * x))
    peaks = [peak]
    prev_u: np.ndarray | None = None
    prev_r: np.ndarray | None = None
    step = config.step

    for it in range(config.max_iters):
        r = frac_laplacian_apply(u, table, workers=workers) + u - u**p
        res = float(np.max(np.abs(r[inner])))
        history.append(res)
        if float(np.max(np.abs(u))) < 1e-10:
            raise ConvergenceError("iterate collapsed to the trivial limit", history)
        if res <= config.tol_residual:
            return _package_ground_state(
                u, grid, table, params, res, it, np.array(peaks), workers
            )

        if prev_u is not None:
            du, dr = u - prev_u, r - prev_r
            denom = float(du @ dr)
            if denom > 0.0:
                step = min(max(float(du @ du) / denom, 1e-6), 1e3)
        prev_u, prev_r = u, r

        alpha = step
        accepted = False
        while alpha > 1e-14 * step:
            trial, tpeak = project(u - alpha * r)
            armijo = peak - 1e-4 * alpha * float(r @ r) * grid.h
            # near the energy's round-off floor descent cannot be
            # strict; a one-round-off band lets the step polish the
            # residual while staying non-increasing to within 1e-14
            if tpeak <= armijo or tpeak <= peak * (1.0 + 1e-14):
                u, peak = trial, tpeak
                peaks.append(tpeak)
                accepted = True
                break
            alpha *= config.backtrack
        if not accepted:
            peaks.append(peak)

    raise ConvergenceError(
        f"no convergence after {config.max_iters} iterations "
        f"(last residual {history[-1]:.3e})",
        history,
    )


def _package_ground_state(u, grid, table, params, res, iters, peaks, workers):
    x = grid.nodes
    h = grid.h
    p, s = params.p, params.s

    gag = _gagliardo_line(u, table, workers)
    mass = 0.5 * h * float(np.sum(u * u))
    pot = h * float(np.sum(np.abs(u) ** (p + 1.0))) / (p + 1.0)
    f_val = table.c_ns / 4.0 * gag + mass - pot
    poh = pohozaev(u, p, s, table, workers=workers)
    semi_poh = (1.0 - 2.0 * s) * table.c_ns / 4.0 * gag
    poh_rel = abs(poh) / max(abs(semi_poh), abs(mass), abs(pot))

    window = (np.abs(x) >= 10.0) & (np.abs(x) <= 30.0) & (u > 0.0)
    slope = np.polyfit(np.log(np.abs(x[window])), np.log(u[window]), 1)[0]
    sym_err = float(np.max(np.abs(u - u[::-1])))
    return GroundStateResult(
        w=Field(u, far_field="zero"),
        grid=grid,
        F_value=f_val,
        pohozaev_residual=float(poh_rel),
        decay_exponent_fit=float(-slope),
        symmetric_error=sym_err,
        el_residual=res,
        iterations=iters,
        peak_history=peaks,
    )


# ---------------------------------------------------------------------------
# Neumann least-energy solution


def _reduced_state(
    u_int: np.ndarray,
    params: Params,
    table: KernelTable,
    workers: int,
    ext: ExtendedField | None = None,
) -> tuple[ExtendedField, np.ndarray]:
    """Extension and pointwise Euler-Lagrange residual at u_int.

    The residual of the reduced problem is
    d c (sum_j W_kj (u_k - u_j) + T_k v_k - mean_I(T v)) + u_k - u_k^p
    with v the extension centred at the interior mean; the gradient of
    J_d in the interior unknowns is h times this vector.
    """
    grid = table.grid
    lo, hi = grid.interior_range
    n = grid.n_nodes
    if ext is None:
        ext = extend(u_int, table, workers=workers)
    vals = ext.values

    conv = table.matvec(vals, lo, hi, 0, n, workers=workers)
    rs = table.row_sums(lo, hi, 0, n)
    pair = u_int * rs - conv

    mean = float(np.mean(u_int))
    tv = table.tail[lo:hi] * (u_int - mean)
    centered_tail = tv - float(np.mean(tv))

    dc = params.d * table.c_ns
    residual = dc * (pair + centered_tail) + u_int - u_int**params.p
    return ext, residual


def solve_least_energy(
    params: Params,
    grid: Grid,
    table: KernelTable,
    config: SolverConfig = SolverConfig(),
    warm: np.ndarray | None = None,
    ground: GroundStateResult | None = None,
    workers: int = 1,
) -> LeastEnergyResult:
    """Least-energy critical point of J_d on the Neumann problem.

    Unknowns are the interior values; each iterate is made nonnegative,
    extended to the collar and Nehari-scaled, and backtracking keeps the
    ray-sup energy non-increasing.  A converged iterate whose relative
    variance is below 1e-10 is snapped to the exact constant branch
    u = 1.  If the found nonconstant critical point sits above the
    constant's energy J_d(1), the constant branch is reported instead:
    the least energy is the smaller of the two.

    ``warm`` supplies interior values for the warm_start initializer;
    ``ground`` supplies the profile for transplanted_ground_state and,
    when present, a post-convergence restart guard against landing in
    the wrong basin.
    """
    params.require_neumann_exponent()
    if table.grid is not grid:
        raise ValueError("table was assembled for a different grid")
    if grid.h > params.intrinsic_scale / 10.0 * (1.0 + 1e-12):
        raise ValueError(
            f"grid spacing {grid.h} does not resolve the intrinsic scale "
            f"{params.intrinsic_scale} (need h <= scale/10)"
        )
    p = params.p
    h = grid.h
    xs = grid.interior_nodes

    init_used = config.init
    if config.init == "warm_start":
        if warm is None:
            raise ValueError("warm_start initializer needs a warm field")
        u = np.asarray(warm, dtype=np.float64).copy()
        if u.shape != xs.shape:
            raise ValueError("warm field length does not match the interior")
    elif config.init == "transplanted_ground_state":
        if ground is None:
            raise ValueError("transplanted initializer needs a ground state")
        u = transplant_ground_state(ground, xs, params)
    else:
        sigma = max(2.0 * h, params.intrinsic_scale)
        u = np.exp(-(((xs - grid.a) / sigma) ** 2))

    history: list[float] = []

    def project(v: np.ndarray) -> tuple[np.ndarray, float, ExtendedField]:
        v = np.abs(v)
        ext = extend(v, table, workers=workers)
        quad, pot = _quadratic_and_potential(ext, params, table, workers)
        if pot <= 0.0 or not math.isfinite(pot):
            raise ConvergenceError("iterate collapsed to the trivial limit", history)
        t0 = (quad / pot) ** (1.0 / (p - 1.0))
        scaled = ExtendedField(t0 * ext.values, grid, from_extension=True)
        return t0 * v, _ray_peak(quad, pot, p), scaled

    u, peak, ext = project(u)
    peaks = [peak]
    prev_u: np.ndarray | None = None
    prev_r: np.ndarray | None = None
    step = config.step
    converged = False
    iterations = 0

    for it in range(config.max_iters):
        iterations = it
        ext, r = _reduced_state(u, params, table, workers, ext=ext)
        scale = max(1.0, float(np.max(u)))
        res = float(np.max(np.abs(r))) / scale
        total_u = float(np.sum(u))
        flux = abs(float(np.sum(u - u**p))) / total_u if total_u > 0 else math.inf
        history.append(res)
        if res <= config.tol_residual and flux <= _FLUX_TOL:
            converged = True
            break

        if prev_u is not None:
            du, dr = u - prev_u, r - prev_r
            denom = float(du @ dr)
            if denom > 0.0:
                step = min(max(float(du @ du) / denom, 1e-6), 1e3)
        prev_u, prev_r = u, r

        alpha = step
        accepted = False
        while alpha > 1e-14 * step:
            trial, tpeak, text = project(u - alpha * r)
            armijo = peak - 1e-4 * alpha * float(r @ r) * h
            # one-round-off acceptance band; see solve_ground_state
            if tpeak <= armijo or tpeak <= peak * (1.0 + 1e-14):
                u, peak, ext = trial, tpeak, text
                peaks.append(tpeak)
                accepted = True
                break
            alpha *= config.backtrack
        if not accepted:
            peaks.append(peak)

    if not converged:
        raise ConvergenceError(
            f"no convergence after {config.max_iters} iterations "
            f"(last residual {history[-1]:.3e})",
            history,
        )

    mean = float(np.mean(u))
    rel_var = float(np.var(u)) / (mean * mean) if mean != 0.0 else math.inf
    constant = rel_var < 1e-10

    if not constant and ground is not None:
        # insurance against a poor basin: restart once from the
        # transplanted profile if that ray peaks meaningfully lower
        alt = transplant_ground_state(ground, xs, params)
        _, alt_peak, _ = project(alt)
        if alt_peak < peak * (1.0 - 1e-6):
            cfg = replace(config, init="warm_start")
            return solve_least_energy(
                params, grid, table, cfg, warm=alt, ground=None, workers=workers
            )

    if not constant:
        c_d = J_d(ext, params, table, workers=workers).total
        if c_d > J_d_constant(grid, params):
            constant = True  # the constant critical point lies lower

    if constant:
        u = np.ones_like(u)
        init_used = init_used + "/constant-branch"
        ext = extend(u, table, workers=workers)
    breakdown = J_d(ext, params, table, workers=workers)
    quad, pot = _quadratic_and_potential(ext, params, table, workers)
    nehari_res = abs(quad - pot) / quad
    flux_res = abs(float(np.sum(u - u**p))) / float(np.sum(u))
    imax = int(np.argmax(u))
    _, r_final = _reduced_state(u, params, table, workers, ext=ext)
    res_final = float(np.max(np.abs(r_final))) / max(1.0, float(np.max(u)))

    return LeastEnergyResult(
        u=ext,
        c_d=breakdown.total,
        M_d=float(np.max(u)),
        argmax_x=float(xs[imax]),
        nehari_residual=float(nehari_res),
        flux_residual=float(flux_res),
        iterations=iterations,
        constant_branch=constant,
        init_used=init_used,
        el_residual=res_final,
        peak_history=np.array(peaks),
    )


def J_d_constant(grid: Grid, params: Params) -> float:
    """Energy of the constant branch u = 1: (1/2 - 1/(p+1)) |domain|."""
    return (0.5 - 1.0 / (params.p + 1.0)) * (grid.b - grid.a)


def transplant_ground_state(
    ground: GroundStateResult,
    xs: np.ndarray,
    params: Params,
    center: float | None = None,
) -> np.ndarray:
    """Ground-state profile squeezed to the intrinsic scale d^(1/2s).

    Values are interpolated from the stored profile; beyond its window
    the power tail |y|^(-(1+2s)) continues the edge sample, matching the
    profile's decay law.  Default centre is the left boundary point.
    """
    if center is None:
        center = float(xs[0] - (xs[1] - xs[0]) / 2.0)
    y = (xs - center) / params.intrinsic_scale
    nodes = ground.grid.nodes
    vals = ground.w.values
    out = np.interp(y, nodes, vals)
    edge = float(nodes[-1])
    far = np.abs(y) > edge
    if np.any(far):
        ref = float(vals[-1])
        out[far] = ref * (edge / np.abs(y[far])) ** (1.0 + 2.0 * params.s)
    return out


# ---------------------------------------------------------------------------
# continuation sweep


def default_grid_policy(params: Params, a: float = 0.0, b: float = 1.0) -> Grid:
    """Domain grid resolving the intrinsic scale: h <= min(0.02, d^(1/2s)/10)."""
    target = min(0.02, params.intrinsic_scale / 10.0)
    n_int = int(math.ceil((b - a) / target - 1e-9))
    h = (b - a) / n_int
    return build_grid(a, b, h, 2.0 * (b - a))


def _lr_integral(u: np.ndarray, h: float, r: float) -> float:
    return float(h * np.sum(np.abs(u) ** r))


def record_from_result(
    result: LeastEnergyResult, params: Params, grid: Grid
) -> SweepRecord:
    ui = result.u.interior_values
    h = grid.h
    lr_norms = {
        "L0.5": _lr_integral(ui, h, 0.5),
        "L1": _lr_integral(ui, h, 1.0),
        "L2": _lr_integral(ui, h, 2.0),
        "Lp1": _lr_integral(ui, h, params.p + 1.0),
        "L4": _lr_integral(ui, h, 4.0),
        "Linf": result.M_d,
    }
    dist = min(result.argmax_x - grid.a, grid.b - result.argmax_x)
    return SweepRecord(
        d=params.d,
        c_d=result.c_d,
        sup_u=result.M_d,
        argmax_x=result.argmax_x,
        dist_boundary=dist,
        lr_norms=lr_norms,
        nehari_res=result.nehari_residual,
        flux_res=result.flux_residual,
        constant_branch=result.constant_branch,
    )


def sweep(
    d_values,
    params: Params,
    grid_policy=default_grid_policy,
    config: SolverConfig = SolverConfig(),
    ground: GroundStateResult | None = None,
    workers: int = 1,
    keep_results: list[LeastEnergyResult] | None = None,
) -> list[SweepRecord]:
    """Continuation in decreasing d with warm starts.

    Each d gets a fresh grid from the policy; the previous nonconstant
    solution is interpolated onto it as a warm start, while constant or
    missing predecessors fall back to the transplanted ground state (or
    a boundary bump when none is supplied).  A failing member aborts the
    sweep; the records finished so far ride on the exception.
    """
    d_list = [float(d) for d in d_values]
    if any(b >= a for a, b in zip(d_list, d_list[1:])):
        raise ValueError("d values must be strictly decreasing")

    records: list[SweepRecord] = []
    prev: tuple[np.ndarray, np.ndarray] | None = None  # interior nodes, values
    for d in d_list:
        pd = replace(params, d=d)
        try:
            grid = grid_policy(pd)
            table = kernel_weights(grid, pd)
            if prev is not None:
                cfg = replace(config, init="warm_start")
                warm = np.interp(grid.interior_nodes, prev[0], prev[1])
                result = solve_least_energy(
                    pd, grid, table, cfg, warm=warm, ground=ground, workers=workers
                )
            elif ground is not None:
                cfg = replace(config, init="transplanted_ground_state")
                result = solve_least_energy(
                    pd, grid, table, cfg, ground=ground, workers=workers
                )
            else:
                cfg = replace(config, init="gaussian_bump")
                result = solve_least_energy(pd, grid, table, cfg, workers=workers)
        except (ConvergenceError, ValueError) as exc:
            raise SweepAborted(f"sweep failed at d = {d}: {exc}", records) from exc
        records.append(record_from_result(result, pd, grid))
        if keep_results is not None:
            keep_results.append(result)
        if not result.constant_branch:
            prev = (grid.interior_nodes, result.u.interior_values)
    return records


# ---------------------------------------------------------------------------
# snapshots


def save_snapshot(path: str, result: LeastEnergyResult, params: Params) -> None:
    """Plain-text solution snapshot; decimal round-trip is bit exact."""
    grid = result.u.grid
    lines = []
    for key, value in (
        ("s", params.s),
        ("p", params.p),
        ("d", params.d),
        ("a", grid.a),
        ("b", grid.b),
        ("h", grid.h),
        ("R_ext", grid.r_ext),
        ("c_d", result.c_d),
        ("M_d", result.M_d),
        ("argmax_x", result.argmax_x),
    ):
        lines.append(f"# {key} = {value:.17g}")
    for x, v in zip(grid.nodes, result.u.values):
        lines.append(f"{x:.17g} {v:.17g}")
    tmp = f"{path}.tmp.{os.getpid()}"
    with open(tmp, "w") as fh:
        fh.write("\n".join(lines) + "\n")
    os.replace(tmp, path)


def load_snapshot(path: str) -> tuple[dict[str, float], np.ndarray, np.ndarray]:
    """Header dict plus node and value arrays from a snapshot file."""
    header: dict[str, float] = {}
    xs: list[float] = []
    vs: list[float] = []
    with open(path) as fh:
        for line in fh:
            line = line.strip()
            if not line:
                continue
            if line.startswith("#"):
                key, _, val = line[1:].partition("=")
                header[key.strip()] = float(val)
            else:
                sx, sv = line.split()
                xs.append(float(sx))
                vs.append(float(sv))
    return header, np.array(xs), np.array(vs)
