"""Scaling-law harness: log-log fits, migration report, profile match.

The solvers produce one :class:`~fracneumann.solvers.SweepRecord` per
diffusion value; this module turns a stack of them into the quantities
the asymptotic theory predicts: power-law slopes of the integral norms
and the least energy, the boundary-migration constant K*, and the
sup-distance between the rescaled solution profile and the whole-space
ground state.  It also hosts the self-verification suite and the CSV
round trip used by the command line.
"""

from __future__ import annotations

import os
import tempfile
from dataclasses import dataclass, replace

import numpy as np

from .energy import peak_energy
from .grids import Grid, Params, build_line_grid
from .kernel import Field, KernelTable, frac_laplacian_apply, kernel_weights
from .moser import (
    L_closed_form,
    M_sequence,
    MoserParams,
    elementary_inequality_margin,
    gamma_majorant,
)
from .neumann import extend, neumann_derivative
from .solvers import (
    GroundStateResult,
    J_d_constant,
    LeastEnergyResult,
    SweepRecord,
    default_grid_policy,
    solve_ground_state,
    solve_least_energy,
    transplant_ground_state,
)

__all__ = [
    "FitResult",
    "MigrationResult",
    "VerifyConfig",
    "VerifyItem",
    "scaling_fit",
    "boundary_migration",
    "profile_compare",
    "verify_suite",
    "write_sweep_csv",
    "read_sweep_csv",
]

# Quantity selectors accepted by scaling_fit: energy, sup, or one of the
# stored integral exponents.
_QUANTITIES = ("cd", "sup", "L0.5", "L1", "L2", "Lp1", "L4")

_CSV_COLUMNS = (
    "d",
    "c_d",
    "sup_u",
    "argmax_x",
    "dist_boundary",
    "L0.5",
    "L1",
    "L2",
    "Lp1",
    "L4",
    "nehari_res",
    "flux_res",
    "constant_branch",
)

# Half-width (in intrinsic units) of the window on which rescaled
# profiles are compared.
_PROFILE_WINDOW = 5.0


@dataclass(frozen=True)
class FitResult:
    """Least-squares power law q = C d^slope on a log-log window."""

    slope: float
    intercept: float
    r_squared: float
    window: tuple[float, float]


@dataclass(frozen=True)
class MigrationResult:
    """Peak-location summary of a sweep.

    ``k_star`` is the largest observed ratio between the peak's distance
    to the boundary and the intrinsic scale d^(1/2s); ``verdict`` is
    "boundary" when the two smallest-d peaks sit within one cell of the
    boundary and "interior" otherwise.
    """

    k_star: float
    verdict: str
    window: tuple[float, float]


@dataclass(frozen=True)
class VerifyItem:
    """One self-check outcome; failures are reported, never raised."""

    name: str
    passed: bool
    detail: str


@dataclass(frozen=True)
class VerifyConfig:
    """Discretisation used by the self-verification suite.

    The suite favours small grids: it guards wiring, not accuracy, so
    each item should run in well under a second.
    """

    line_half_width: float = 40.0
    line_h: float = 0.08
    a: float = 0.0
    b: float = 1.0
    d_small: float = 0.2
    seed: int = 0


def _nonconstant(records: list[SweepRecord]) -> list[SweepRecord]:
    return [r for r in records if not r.constant_branch]


def _quantity_values(records: list[SweepRecord], quantity: str) -> np.ndarray:
    if quantity == "cd":
        return np.array([r.c_d for r in records])
    if quantity == "sup":
        return np.array([r.sup_u for r in records])
    return np.array([r.lr_norms[quantity] for r in records])


def scaling_fit(records: list[SweepRecord], quantity: str) -> FitResult:
    """Power-law fit of a sweep quantity against d.

    Constant-branch records and the largest nonconstant d are excluded
    (the latter sits next to the transition and pollutes the asymptotic
    window).  Requires at least four nonconstant records spanning at
    least one decade of d.
    """
    if quantity not in _QUANTITIES:
        raise ValueError(
            f"unknown quantity {quantity!r}; expected one of {_QUANTITIES}"
        )
    alive = _nonconstant(records)
    if len(alive) < 4:
        raise ValueError(
            f"need at least 4 nonconstant records to fit, got {len(alive)}"
        )
    ds = np.array([r.d for r in alive])
    if np.max(ds) / np.min(ds) < 10.0 * (1.0 - 1e-12):
        raise ValueError(
            "nonconstant records must span at least one decade of d, got "
            f"[{np.min(ds):.6g}, {np.max(ds):.6g}]"
        )
    alive = sorted(alive, key=lambda r: r.d)[:-1]
    ds = np.array([r.d for r in alive])
    qs = _quantity_values(alive, quantity)
    if np.any(qs <= 0.0):
        raise ValueError(f"quantity {quantity!r} must be positive to fit a power law")
    lx = np.log(ds)
    ly = np.log(qs)
    slope, intercept = np.polyfit(lx, ly, 1)
    fitted = slope * lx + intercept
    ss_res = float(np.sum((ly - fitted) ** 2))
    ss_tot = float(np.sum((ly - np.mean(ly)) ** 2))
    r_squared = 1.0 if ss_tot == 0.0 else 1.0 - ss_res / ss_tot
    return FitResult(
        slope=float(slope),
        intercept=float(intercept),
        r_squared=float(r_squared),
        window=(float(np.min(ds)), float(np.max(ds))),
    )


def boundary_migration(
    records: list[SweepRecord],
    params: Params,
    grid_policy=default_grid_policy,
) -> MigrationResult:
    """Peak migration constant and boundary verdict for a sweep.

    K* is the maximum over nonconstant records of
    dist_boundary / d^(1/2s); the verdict compares the two smallest-d
    peak distances against the cell width the grid policy assigns to
    each d ("within one cell" counts as a boundary peak).
    """
    alive = sorted(_nonconstant(records), key=lambda r: r.d)
    if len(alive) < 2:
        raise ValueError(
            f"need at least 2 nonconstant records, got {len(alive)}"
        )
    ratios = [
        r.dist_boundary / replace(params, d=r.d).intrinsic_scale for r in alive
    ]
    at_boundary = []
    for r in alive[:2]:
        h = grid_policy(replace(params, d=r.d)).h
        at_boundary.append(r.dist_boundary <= h * (1.0 + 1e-12))
    verdict = "boundary" if all(at_boundary) else "interior"
    return MigrationResult(
        k_star=float(max(ratios)),
        verdict=verdict,
        window=(alive[0].d, alive[-1].d),
    )


def profile_compare(
    result: LeastEnergyResult,
    ground: GroundStateResult,
    params: Params,
) -> float:
    """Sup distance between the rescaled peak profile and the ground state.

    The solution is sampled at y -> u(z + y d^(1/2s)) around its peak z,
    both profiles are normalised by their value at y = 0, and the sup of
    the difference over |y| <= 5 is returned.  When the peak sits within
    one cell of the boundary only the inward half-line is compared.
    """
    if result.constant_branch:
        raise ValueError("constant-branch solutions have no peak profile")
    grid = result.u.grid
    delta = params.intrinsic_scale
    z = result.argmax_x
    ys = ground.grid.nodes
    ys = ys[np.abs(ys) <= _PROFILE_WINDOW]
    near_left = (z - grid.a) <= grid.h * (1.0 + 1e-12)
    near_right = (grid.b - z) <= grid.h * (1.0 + 1e-12)
    if near_left:
        ys = ys[ys >= 0.0]
    elif near_right:
        ys = ys[ys <= 0.0]
    phi = np.interp(z + ys * delta, grid.nodes, result.u.values)
    phi0 = float(np.interp(z, grid.nodes, result.u.values))
    w = np.interp(ys, ground.grid.nodes, ground.w.values)
    w0 = float(np.interp(0.0, ground.grid.nodes, ground.w.values))
    return float(np.max(np.abs(phi / phi0 - w / w0)))


# ---------------------------------------------------------------------------
# self-verification suite


def _check_symbol(table: KernelTable, grid, tol: float = 2e-2) -> VerifyItem:
    """Fourier symbol check: the operator's action on cos(kx) vs |k|^2s."""
    xs = grid.nodes
    inner = np.abs(xs) <= grid.half_width / 2.0
    worst = 0.0
    for k in (0.5, 1.0):
        field = Field(np.cos(k * xs), far_field="zero")
        got = frac_laplacian_apply(field, table)[inner]
        want = abs(k) ** (2.0 * table.s) * np.cos(k * xs[inner])
        err = float(np.max(np.abs(got - want))) / abs(k) ** (2.0 * table.s)
        worst = max(worst, err)
    return VerifyItem(
        name="kernel-symbol",
        passed=worst <= tol,
        detail=f"max relative symbol error {worst:.3e} (tol {tol:g})",
    )


def _check_extension(table: KernelTable, grid: Grid, seed: int) -> VerifyItem:
    rng = np.random.default_rng(seed)
    u_int = 1.0 + rng.uniform(0.0, 1.0, grid.n_interior)
    ext = extend(u_int, table)
    lo, hi = grid.interior_range
    scale = float(np.max(np.abs(ext.values)))
    worst = 0.0
    for x in range(grid.n_nodes):
        if lo <= x < hi:
            continue
        worst = max(worst, abs(neumann_derivative(ext, table, x)))
    worst /= table.c_ns * scale
    return VerifyItem(
        name="extension-stationarity",
        passed=worst <= 1e-10,
        detail=f"max relative Neumann derivative {worst:.3e} (tol 1e-10)",
    )


def verify_suite(
    params: Params,
    config: VerifyConfig = VerifyConfig(),
    table_factory=kernel_weights,
    workers: int = 1,
) -> list[VerifyItem]:
    """Run the eight wiring checks and report pass/fail per item.

    Items never raise: a failed precondition (for example an exponent
    outside the Neumann range) becomes a failed item whose detail quotes
    the error, and the remaining items still run.
    """
    items: list[VerifyItem] = []

    line = build_line_grid(config.line_half_width, config.line_h)
    line_params = replace(params, d=1.0)
    line_table = table_factory(line, line_params)

    items.append(_check_symbol(line_table, line))

    domain_params = replace(params, d=config.d_small)
    domain = default_grid_policy(domain_params, config.a, config.b)
    domain_table = table_factory(domain, domain_params)

    items.append(_check_extension(domain_table, domain, config.seed))

    solved: LeastEnergyResult | None = None
    try:
        solved = solve_least_energy(domain_params, domain, domain_table,
                                    workers=workers)
        neh, flux = solved.nehari_residual, solved.flux_residual
        items.append(
            VerifyItem(
                name="nehari-flux-identities",
                passed=neh <= 1e-6 and flux <= 1e-6,
                detail=f"nehari {neh:.3e}, flux {flux:.3e} (tol 1e-6)",
            )
        )
    except (ValueError, RuntimeError) as exc:
        items.append(
            VerifyItem("nehari-flux-identities", False, f"solve failed: {exc}")
        )

    ground: GroundStateResult | None = None
    try:
        ground = solve_ground_state(line_params, line, workers=workers)
        items.append(
            VerifyItem(
                name="pohozaev-identity",
                passed=ground.pohozaev_residual <= 1e-3,
                detail=(
                    f"relative Pohozaev residual "
                    f"{ground.pohozaev_residual:.3e} (tol 1e-3)"
                ),
            )
        )
    except (ValueError, RuntimeError) as exc:
        items.append(VerifyItem("pohozaev-identity", False, f"solve failed: {exc}"))

    try:
        mp = MoserParams(n=params.n, s=params.s, p=params.p)
        ts = mp.two_star
        worst = 0.0
        level = L_closed_form(0, mp)
        for j in range(50):
            level = (ts * level - (mp.p - 1.0)) / 2.0
            worst = max(worst, abs(level - L_closed_form(j + 1, mp)) / level)
        majorised = all(
            M_sequence(j, mp) <= gamma_majorant(j, mp) + 1e-12 for j in range(31)
        )
        items.append(
            VerifyItem(
                name="iteration-arithmetic",
                passed=worst <= 1e-12 and majorised,
                detail=(
                    f"recurrence vs closed form {worst:.3e} (tol 1e-12), "
                    f"majorant holds: {majorised}"
                ),
            )
        )
    except ValueError as exc:
        items.append(VerifyItem("iteration-arithmetic", False, str(exc)))

    rng = np.random.default_rng(config.seed)
    x = rng.uniform(0.0, 100.0, 10_000)
    y = rng.uniform(0.0, 100.0, 10_000)
    k = rng.uniform(1.0, 20.0, 10_000)
    min_margin = float(np.min(elementary_inequality_margin(x, y, k)))
    items.append(
        VerifyItem(
            name="pointwise-inequality-fuzz",
            passed=min_margin >= -1e-12,
            detail=f"min margin {min_margin:.3e} over 10000 samples (tol -1e-12)",
        )
    )

    if solved is not None:
        const = J_d_constant(domain, domain_params)
        items.append(
            VerifyItem(
                name="below-constant-branch",
                passed=(not solved.constant_branch) and solved.c_d < const,
                detail=f"c_d {solved.c_d:.6g} vs constant energy {const:.6g}",
            )
        )
    else:
        items.append(
            VerifyItem("below-constant-branch", False, "no converged solve")
        )

    if ground is not None and solved is not None:
        try:
            prof = transplant_ground_state(
                ground, domain.interior_nodes, domain_params
            )
            ext = extend(prof, domain_table, workers=workers)
            peak = peak_energy(ext, domain_params, domain_table, workers=workers)
            bound = (
                domain_params.d ** (domain_params.n / (2.0 * domain_params.s))
                / 2.0
                * ground.F_value
            )
            items.append(
                VerifyItem(
                    name="transplant-energy-bound",
                    passed=peak < bound,
                    detail=(
                        f"ray-sup energy {peak:.6g} vs d^(n/2s)/2 F = "
                        f"{bound:.6g} (ratio {peak / bound:.3f})"
                    ),
                )
            )
        except ValueError as exc:
            items.append(VerifyItem("transplant-energy-bound", False, str(exc)))
    else:
        items.append(
            VerifyItem("transplant-energy-bound", False, "missing prerequisites")
        )

    return items


# ---------------------------------------------------------------------------
# CSV round trip


def _fmt(x: float) -> str:
    return format(float(x), ".17g")


def write_sweep_csv(path: str, records: list[SweepRecord]) -> None:
    """Write sweep records with a fixed column order and 17 significant
    digits, atomically (write to a temporary file, then rename)."""
    lines = [",".join(_CSV_COLUMNS)]
    for r in records:
        lines.append(
            ",".join(
                [
                    _fmt(r.d),
                    _fmt(r.c_d),
                    _fmt(r.sup_u),
                    _fmt(r.argmax_x),
                    _fmt(r.dist_boundary),
                    _fmt(r.lr_norms["L0.5"]),
                    _fmt(r.lr_norms["L1"]),
                    _fmt(r.lr_norms["L2"]),
                    _fmt(r.lr_norms["Lp1"]),
                    _fmt(r.lr_norms["L4"]),
                    _fmt(r.nehari_res),
                    _fmt(r.flux_res),
                    str(int(r.constant_branch)),
                ]
            )
        )
    directory = os.path.dirname(os.path.abspath(path))
    fd, tmp = tempfile.mkstemp(dir=directory, suffix=".tmp")
    try:
        with os.fdopen(fd, "w") as fh:
            fh.write("\n".join(lines) + "\n")
        os.replace(tmp, path)
    except BaseException:
        if os.path.exists(tmp):
            os.unlink(tmp)
        raise


def read_sweep_csv(path: str) -> list[SweepRecord]:
    """Read records written by :func:`write_sweep_csv`."""
    with open(path) as fh:
        rows = [line.strip() for line in fh if line.strip()]
    if not rows or rows[0] != ",".join(_CSV_COLUMNS):
        raise ValueError(f"{path} does not carry the expected sweep header")
    records = []
    for row in rows[1:]:
        parts = row.split(",")
        if len(parts) != len(_CSV_COLUMNS):
            raise ValueError(f"malformed sweep row: {row!r}")
        vals = [float(p) for p in parts[:-1]]
        sup_u = vals[2]
        records.append(
            SweepRecord(
                d=vals[0],
                c_d=vals[1],
                sup_u=sup_u,
                argmax_x=vals[3],
                dist_boundary=vals[4],
                lr_norms={
                    "L0.5": vals[5],
                    "L1": vals[6],
                    "L2": vals[7],
                    "Lp1": vals[8],
                    "L4": vals[9],
                    "Linf": sup_u,
                },
                nehari_res=vals[10],
                flux_res=vals[11],
                constant_branch=bool(int(parts[-1])),
            )
        )
    return records
