"""Nonlocal Neumann derivative and the exterior extension that annuls it.

Setting the Neumann derivative to zero and solving for the exterior
value turns the boundary condition into an explicit formula: every
exterior node carries the kernel-weighted average of the interior
values.  Solvers therefore treat interior values as the only unknowns
and rebuild the collar through ``extend`` whenever they need a full
field.

Numerator and denominator of the average are evaluated by the same
blocked row reduction, so a constant interior field extends to exactly
the same constant (bitwise) and re-extending an extended field is a
no-op.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .grids import Grid
from .kernel import KernelTable

__all__ = ["ExtendedField", "neumann_derivative", "extend"]


@dataclass(frozen=True)
class ExtendedField:
    """Full-grid values whose exterior collar satisfies N_s u = 0.

    ``from_extension`` records provenance: fields built by ``extend``
    carry True; hand-assembled fields (e.g. perturbation tests) carry
    False and make no claim about the Neumann derivative.
    """

    values: np.ndarray
    grid: Grid
    from_extension: bool = False

    def __post_init__(self) -> None:
        v = np.asarray(self.values, dtype=np.float64)
        if v.shape != (self.grid.n_nodes,):
            raise ValueError(
                f"field has {v.shape} values for a grid of {self.grid.n_nodes} nodes"
            )
        if not np.all(np.isfinite(v)):
            raise ValueError("field values must be finite")
        object.__setattr__(self, "values", v)

    @property
    def interior_values(self) -> np.ndarray:
        lo, hi = self.grid.interior_range
        return self.values[lo:hi]


def neumann_derivative(u: ExtendedField | np.ndarray, table: KernelTable, x: int) -> float:
    """Discrete Neumann derivative N_s u at the exterior node ``x``.

    The defining integral runs over the domain only, so the value is
    c_ns * sum over interior j of W[x][j] * (u(x) - u(x_j)); neither the
    kernel tail nor other exterior nodes enter.
    """
    grid = table.grid
    if not isinstance(grid, Grid):
        raise ValueError("Neumann derivative needs a bounded-domain grid")
    v = u.values if isinstance(u, ExtendedField) else np.asarray(u, dtype=np.float64)
    if v.shape != (grid.n_nodes,):
        raise ValueError("field length does not match the grid")
    if not 0 <= x < grid.n_nodes:
        raise ValueError(f"node index {x} outside the grid")
    if grid.interior[x]:
        raise ValueError(f"node {x} is interior; N_s is defined on the collar")
    lo, hi = grid.interior_range
    row = table.row(x, lo, hi)
    return float(table.c_ns * (row @ (v[x] - v[lo:hi])))


def extend(u_int: np.ndarray, table: KernelTable, workers: int = 1) -> ExtendedField:
    """Extend interior data to the collar so that N_s u = 0 exactly.

    Each exterior value is the kernel-weighted average of the interior
    values; weights are positive, so the exterior range is contained in
    [min u_int, max u_int] and nonnegative data stays nonnegative.
    """
    grid = table.grid
    if not isinstance(grid, Grid):
        raise ValueError("extension needs a bounded-domain grid")
    v = np.asarray(u_int, dtype=np.float64)
    lo, hi = grid.interior_range
    if v.shape != (hi - lo,):
        raise ValueError(
            f"interior field has {v.shape} values for {hi - lo} interior nodes"
        )
    if not np.all(np.isfinite(v)):
        raise ValueError("interior values must be finite")

    n = grid.n_nodes
    ones = np.ones(hi - lo)
    full = np.empty(n, dtype=np.float64)
    full[lo:hi] = v
    for r0, r1 in ((0, lo), (hi, n)):
        if r0 == r1:
            continue
        num = table.matvec(v, r0, r1, lo, hi, workers=workers)
        den = table.matvec(ones, r0, r1, lo, hi, workers=workers)
        full[r0:r1] = num / den
    return ExtendedField(values=full, grid=grid, from_extension=True)
