"""Moser iteration arithmetic for the uniform bound on solutions.

The bootstrap that upgrades a finite-energy solution to a bounded one
tests the equation against powers u**(2L - 1), applies the fractional
Sobolev embedding, and watches the L**(2* L_j) norms climb a geometric
ladder.  This module reproduces that ladder exactly: the exponent levels
L_j, the norm bounds M_j, and the geometric majorant that shows
sup u <= exp(m L_j) stabilises.  Everything is tracked in log space
because M_j itself overflows double precision near j = 25.

The module also provides the elementary pointwise inequality that makes
the truncated test functions admissible, and an empirical estimate of
the Sobolev embedding constant on a bounded domain.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .grids import Grid
from .kernel import KernelTable

__all__ = [
    "MoserParams",
    "MoserBound",
    "L_closed_form",
    "lambda_term",
    "M_sequence",
    "gamma_majorant",
    "c_star",
    "moser_bound_constant",
    "elementary_inequality_margin",
    "sobolev_constant_estimate",
]

# The empirical growth constant C* is the maximum of lambda_j / (j + 1)
# over this working range of iteration indices.
_CSTAR_WINDOW = 30

# Fourier modes per random trial field in the embedding estimate; one
# trial always consumes 2 * _TRIAL_MODES + 1 draws so that enlarging
# `trials` extends the same sample stream.
_TRIAL_MODES = 5


@dataclass(frozen=True)
class MoserParams:
    """Inputs of the iteration: exponents plus the two bootstrap constants.

    ``A`` collects the embedding and equation constants multiplying each
    level's norm inflation; ``C0`` is the starting L**(2*) bound.  The
    subcriticality window 1 < p < 2* - 1 is what makes the levels L_j
    increase, so it is enforced here.
    """

    n: int = 1
    s: float = 0.25
    p: float = 1.5
    A: float = 1.0
    C0: float = 1.0

    def __post_init__(self) -> None:
        if not isinstance(self.n, int) or self.n < 1:
            raise ValueError(f"dimension n must be a positive integer, got {self.n!r}")
        for name in ("s", "p", "A", "C0"):
            if not math.isfinite(getattr(self, name)):
                raise ValueError(f"parameter {name} must be finite")
        if not 0.0 < self.s < 1.0:
            raise ValueError(f"fractional order s must lie in (0, 1), got {self.s}")
        if self.n <= 2.0 * self.s:
            raise ValueError(
                f"need n > 2s so the critical exponent is finite, got "
                f"n={self.n}, s={self.s}"
            )
        if self.A <= 0.0 or self.C0 <= 0.0:
            raise ValueError("constants A and C0 must be positive")
        if not 1.0 < self.p < self.two_star - 1.0:
            raise ValueError(
                f"exponent p must lie in (1, 2* - 1) = (1, {self.two_star - 1.0:.6g}),"
                f" got p = {self.p}"
            )

    @property
    def two_star(self) -> float:
        """Critical Sobolev exponent 2n/(n - 2s)."""
        return 2.0 * self.n / (self.n - 2.0 * self.s)


@dataclass(frozen=True)
class MoserBound:
    """Output of :func:`moser_bound_constant`.

    ``m`` is the smallest constant with eta_j <= m * L_{j-1} over the
    requested range, so sup u <= exp(m) in the limit; ``limit`` is the
    closed-form value of the majorant ratio gamma_j / (2* L_{j-1}).
    """

    m: float
    limit: float


def L_closed_form(j: int, mp: MoserParams) -> float:
    """Exponent level L_j = [(2*/2)**(j+1) (2* - p - 1) + p - 1] / (2* - 2)."""
    if j < 0:
        raise ValueError(f"iteration index must be nonnegative, got {j}")
    ts = mp.two_star
    return ((ts / 2.0) ** (j + 1) * (ts - mp.p - 1.0) + mp.p - 1.0) / (ts - 2.0)


def lambda_term(j: int, mp: MoserParams) -> float:
    """Per-level inflation lambda_j = (2*/2) log(A L_j) of the log-norm."""
    return (mp.two_star / 2.0) * math.log(mp.A * L_closed_form(j, mp))


def M_sequence(j: int, mp: MoserParams) -> float:
    """Log-norm bound eta_j = log M_j after j iteration steps.

    Defined by eta_0 = (2*/2) log(A C0) and the recurrence
    eta_{j+1} = (2*/2) eta_j + lambda_j.
    """
    if j < 0:
        raise ValueError(f"iteration index must be nonnegative, got {j}")
    half = mp.two_star / 2.0
    eta = half * math.log(mp.A * mp.C0)
    for i in range(j):
        eta = half * eta + lambda_term(i, mp)
    return eta


def c_star(mp: MoserParams) -> float:
    """Growth constant C* = max_{j <= 30} lambda_j / (j + 1)."""
    return max(lambda_term(j, mp) / (j + 1) for j in range(_CSTAR_WINDOW + 1))


def gamma_majorant(j: int, mp: MoserParams) -> float:
    """Majorant gamma_j of eta_j built from the linear bound on lambda.

    gamma_0 = eta_0 and gamma_{j+1} = (2*/2) gamma_j + C* (j + 1);
    since lambda_j <= C* (j + 1) on the working range, eta_j <= gamma_j
    term by term.
    """
    if j < 0:
        raise ValueError(f"iteration index must be nonnegative, got {j}")
    half = mp.two_star / 2.0
    cs = c_star(mp)
    gamma = half * math.log(mp.A * mp.C0)
    for i in range(j):
        gamma = half * gamma + cs * (i + 1)
    return gamma


def moser_bound_constant(mp: MoserParams, J: int) -> MoserBound:
    """Uniform-bound constant from J iteration steps.

    Returns the smallest m with eta_j <= m * L_{j-1} for 1 <= j <= J,
    together with the closed-form limit of the majorant ratio
    gamma_j / (2* L_{j-1}), namely
    (2* - 2) (eta_0 + 2 C* 2* (2* - 2)**-2) / (2* (2* - p - 1)).
    """
    if J < 2:
        raise ValueError(f"need at least two iteration steps, got J = {J}")
    m = max(M_sequence(j, mp) / L_closed_form(j - 1, mp) for j in range(1, J + 1))
    ts = mp.two_star
    eta0 = (ts / 2.0) * math.log(mp.A * mp.C0)
    limit = (
        (ts - 2.0)
        * (eta0 + 2.0 * c_star(mp) * ts / (ts - 2.0) ** 2)
        / (ts * (ts - mp.p - 1.0))
    )
    return MoserBound(m=m, limit=limit)


def elementary_inequality_margin(x, y, k):
    """Margin (x-y)(x**(2k-1) - y**(2k-1)) - (1/k)(x**k - y**k)**2.

    Nonnegative for all x, y >= 0 and k >= 1; this is the pointwise
    inequality that lets truncated powers act as test functions.
    Accepts scalars or arrays and broadcasts.
    """
    x = np.asarray(x, dtype=np.float64)
    y = np.asarray(y, dtype=np.float64)
    k = np.asarray(k, dtype=np.float64)
    if np.any(x < 0.0) or np.any(y < 0.0):
        raise ValueError("arguments x and y must be nonnegative")
    if np.any(k < 1.0):
        raise ValueError("power k must be at least 1")
    first = (x - y) * (x ** (2.0 * k - 1.0) - y ** (2.0 * k - 1.0))
    dk = x**k - y**k
    margin = first - dk * dk / k
    if margin.ndim == 0:
        return float(margin)
    return margin


def _interior_quadratic(v: np.ndarray, table: KernelTable, d: float) -> float:
    """d (c/2) double-integral over the domain square plus the mass term.

    Only interior-interior kernel pairs enter; the adjacent-cell
    quadrature defect is corrected exactly as in the full seminorm.
    """
    i0, i1 = table.grid.interior_range
    rs = table.row_sums(i0, i1, i0, i1)
    conv = table.matvec(v, i0, i1, i0, i1)
    pair = 2.0 * (float((v * v) @ rs) - float(v @ conv))
    diag = float(np.sum(np.diff(v) ** 2))
    h = table.h
    seminorm = h * (pair + 2.0 * table.pv_coeff * diag)
    mass = h * float(np.sum(v * v))
    return d * (table.c_ns / 2.0) * seminorm + mass


def sobolev_constant_estimate(
    grid: Grid,
    table: KernelTable,
    trials: int,
    d0: float = 1.0,
    seed: int = 0,
) -> float:
    """Empirical lower estimate of the embedding constant on the domain.

    Maximises ||v||_{L^{2*}}**2 * d / (d (c/2) [v]**2 + ||v||_2**2) over
    random smooth trial fields and d in {d0, d0/10, d0/100}, where the
    seminorm pairs interior points only.  With a fixed seed the estimate
    is a running maximum, hence non-decreasing in ``trials``.
    """
    if trials < 100:
        raise ValueError(f"need at least 100 trial fields, got {trials}")
    if d0 <= 0.0:
        raise ValueError(f"diffusion d0 must be positive, got {d0}")
    if table.grid is not grid:
        raise ValueError("kernel table was built for a different grid")
    xs = grid.interior_nodes
    span = grid.b - grid.a
    ts = 2.0 * 1.0 / (1.0 - 2.0 * table.s)
    h = grid.h
    rng = np.random.default_rng(seed)
    best = 0.0
    phases = np.pi * (xs - grid.a) / span
    for _ in range(trials):
        coeffs = rng.standard_normal(2 * _TRIAL_MODES + 1)
        v = np.full(xs.size, coeffs[0])
        for m in range(1, _TRIAL_MODES + 1):
            v = v + coeffs[2 * m - 1] * np.cos(m * phases)
            v = v + coeffs[2 * m] * np.sin(m * phases)
        num = (h * float(np.sum(np.abs(v) ** ts))) ** (2.0 / ts)
        for d in (d0, d0 / 10.0, d0 / 100.0):
            ratio = num * d / _interior_quadratic(v, table, d)
            if ratio > best:
                best = ratio
    return best
