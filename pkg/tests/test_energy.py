"""Energy functionals: brute-force oracles, identities, Nehari algebra."""

import numpy as np
import pytest

from fracneumann import (
    ExtendedField,
    F_energy,
    Field,
    Grid,
    J_d,
    Params,
    build_grid,
    build_line_grid,
    extend,
    frac_laplacian_apply,
    kernel_weights,
    nehari_scale,
    peak_energy,
    pohozaev,
    seminorm_T,
)


def brute_force_cross_seminorm(values, grid, table):
    """Direct double loop over every ordered node pair in the cross set."""
    W = table.dense()
    total = 0.0
    for i in range(grid.n_nodes):
        for j in range(grid.n_nodes):
            if i == j:
                continue
            if not grid.interior[i] and not grid.interior[j]:
                continue
            total += W[i, j] * (values[i] - values[j]) ** 2
    lo, hi = grid.interior_range
    vi = values[lo:hi]
    mean = float(np.mean(vi))
    tail = 2.0 * float((vi - mean) ** 2 @ table.tail[lo:hi])
    return grid.h * (total + tail)


def toy_grid():
    nodes = np.array([0.5, 1.5, 2.5])
    interior = np.array([False, True, False])
    return Grid(a=1.0, b=2.0, h=1.0, r_ext=1.0, nodes=nodes, interior=interior)


def random_extended(grid, table, seed, amplitude=1.0):
    rng = np.random.default_rng(seed)
    u = amplitude * np.abs(rng.standard_normal(grid.n_interior)) + 0.1
    return extend(u, table)


# ---------------------------------------------------------------------------
# cross-set seminorm


def test_toy_seminorm_hand_summed():
    g = toy_grid()
    t = kernel_weights(g, Params())
    u = ExtendedField(np.array([0.0, 1.0, 0.0]), g)
    w1 = 2.0 * (0.5**-0.5 - 1.5**-0.5)
    # ordered pairs (0,1), (1,0), (1,2), (2,1); the lone interior node
    # coincides with its own mean, so the tail term drops out
    assert seminorm_T(u, t) == pytest.approx(4.0 * w1, rel=1e-13)
    assert seminorm_T(u, t) == pytest.approx(
        brute_force_cross_seminorm(u.values, g, t), rel=1e-13
    )


def test_seminorm_matches_brute_force_on_random_fields():
    g = build_grid(0.0, 1.0, 0.1, 2.0)
    t = kernel_weights(g, Params())
    rng = np.random.default_rng(21)
    for _ in range(4):
        vals = rng.standard_normal(g.n_nodes)
        u = ExtendedField(vals, g)
        assert seminorm_T(u, t) == pytest.approx(
            brute_force_cross_seminorm(vals, g, t), rel=1e-11
        )


def test_seminorm_zero_iff_constant():
    g = build_grid(0.0, 1.0, 0.05, 2.0)
    t = kernel_weights(g, Params())
    const = ExtendedField(np.full(g.n_nodes, 4.2), g)
    assert seminorm_T(const, t) == 0.0
    bump = ExtendedField(np.full(g.n_nodes, 4.2) + np.eye(g.n_nodes)[30], g)
    assert seminorm_T(bump, t) > 0.0


def test_seminorm_translation_invariance():
    g = build_grid(0.0, 1.0, 0.05, 2.0)
    t = kernel_weights(g, Params())
    u = random_extended(g, t, 2)
    shifted = ExtendedField(u.values + 3.0, g, from_extension=False)
    assert seminorm_T(shifted, t) == pytest.approx(seminorm_T(u, t), rel=1e-11)


def test_extension_minimizes_seminorm():
    g = build_grid(0.0, 1.0, 0.05, 2.0)
    t = kernel_weights(g, Params())
    rng = np.random.default_rng(17)
    v = np.abs(rng.standard_normal(g.n_interior))
    base_field = extend(v, t)
    base = seminorm_T(base_field, t)
    for _ in range(20):
        perturbed = base_field.values.copy()
        perturbed[~g.interior] += 0.3 * rng.standard_normal((~g.interior).sum())
        worse = seminorm_T(ExtendedField(perturbed, g), t)
        assert worse > base


# ---------------------------------------------------------------------------
# J_d


def test_unit_constant_energy_is_one_tenth():
    g = build_grid(0.0, 1.0, 0.05, 2.0)
    t = kernel_weights(g, Params())
    u = extend(np.ones(g.n_interior), t)
    e = J_d(u, Params(), t)
    assert e.seminorm_term == 0.0
    assert e.mass_term == pytest.approx(1.0, rel=1e-13)
    assert e.potential_term == pytest.approx(0.4, rel=1e-13)
    assert e.total == pytest.approx(0.1, rel=1e-12)


def test_zero_field_energy_is_zero():
    g = build_grid(0.0, 1.0, 0.1, 2.0)
    t = kernel_weights(g, Params())
    e = J_d(ExtendedField(np.zeros(g.n_nodes), g), Params(), t)
    assert e.seminorm_term == e.mass_term == e.potential_term == e.total == 0.0


def test_breakdown_reconstruction_is_exact():
    g = build_grid(0.0, 1.0, 0.05, 2.0)
    t = kernel_weights(g, Params())
    e = J_d(random_extended(g, t, 5), Params(), t)
    assert e.total == (e.seminorm_term + e.mass_term) / 2.0 - e.potential_term


def test_energy_scales_polynomially_along_rays():
    g = build_grid(0.0, 1.0, 0.05, 2.0)
    t = kernel_weights(g, Params())
    p = Params()
    u = random_extended(g, t, 8)
    e1 = J_d(u, p, t)
    quad = e1.seminorm_term + e1.mass_term
    for tt in (0.5, 1.0, 2.0):
        scaled = ExtendedField(tt * u.values, g, from_extension=True)
        expected = tt**2 * quad / 2.0 - tt ** (p.p + 1.0) * e1.potential_term
        assert J_d(scaled, p, t).total == pytest.approx(expected, rel=1e-12)


# ---------------------------------------------------------------------------
# Nehari scaling and peak energy


def test_nehari_scale_hand_example():
    g = build_grid(0.0, 1.0, 0.05, 2.0)
    t = kernel_weights(g, Params())
    u = extend(2.0 * np.ones(g.n_interior), t)
    # Q = 4, int u^2.5 = 2^2.5, p = 1.5 -> t0 = (4 / 2^2.5)^2 = 0.5
    assert nehari_scale(u, Params(), t) == pytest.approx(0.5, rel=1e-12)


def test_nehari_identity_is_fixed_point():
    g = build_grid(0.0, 1.0, 0.05, 2.0)
    t = kernel_weights(g, Params())
    p = Params()
    u = random_extended(g, t, 31)
    t0 = nehari_scale(u, p, t)
    projected = ExtendedField(t0 * u.values, g, from_extension=True)
    assert nehari_scale(projected, p, t) == pytest.approx(1.0, rel=1e-10)


def test_nehari_scale_rejects_zero_field():
    g = build_grid(0.0, 1.0, 0.1, 2.0)
    t = kernel_weights(g, Params())
    with pytest.raises(ValueError, match="degenerate"):
        nehari_scale(ExtendedField(np.zeros(g.n_nodes), g), Params(), t)
    with pytest.raises(ValueError, match="degenerate"):
        peak_energy(ExtendedField(np.zeros(g.n_nodes), g), Params(), t)


def test_peak_energy_of_unit_constant():
    g = build_grid(0.0, 1.0, 0.05, 2.0)
    t = kernel_weights(g, Params())
    u = extend(np.ones(g.n_interior), t)
    assert peak_energy(u, Params(), t) == pytest.approx(0.1, rel=1e-12)


def test_peak_energy_depends_only_on_the_ray():
    g = build_grid(0.0, 1.0, 0.05, 2.0)
    t = kernel_weights(g, Params())
    p = Params()
    u = random_extended(g, t, 12)
    m = peak_energy(u, p, t)
    for c in (0.2, 3.0, 17.5):
        scaled = ExtendedField(c * u.values, g, from_extension=True)
        assert peak_energy(scaled, p, t) == pytest.approx(m, rel=1e-10)


def test_peak_energy_closed_form_for_p_three_halves():
    # at p = 3/2: M = Q^5 / (10 int u^2.5 ^ 4)
    g = build_grid(0.0, 1.0, 0.05, 2.0)
    t = kernel_weights(g, Params())
    p = Params()
    u = random_extended(g, t, 40)
    e = J_d(u, p, t)
    quad = e.seminorm_term + e.mass_term
    pot = e.potential_term * (p.p + 1.0)
    assert peak_energy(u, p, t) == pytest.approx(0.1 * quad**5 / pot**4, rel=1e-10)


def test_ray_energy_is_unimodal():
    g = build_grid(0.0, 1.0, 0.05, 2.0)
    t = kernel_weights(g, Params())
    p = Params()
    for seed in (1, 2, 3):
        u = random_extended(g, t, seed)
        e = J_d(u, p, t)
        quad = (e.seminorm_term + e.mass_term) / 2.0
        ts = np.logspace(-2, 2, 200)
        g_vals = ts**2 * quad - ts ** (p.p + 1.0) * e.potential_term
        interior_max = (g_vals[1:-1] > g_vals[:-2]) & (g_vals[1:-1] > g_vals[2:])
        assert int(interior_max.sum()) == 1


# ---------------------------------------------------------------------------
# whole-space functionals


def brute_force_line_form(v, table):
    W = table.dense()
    pair = 0.0
    n = v.shape[0]
    for i in range(n):
        for j in range(n):
            if i != j:
                pair += W[i, j] * (v[i] - v[j]) ** 2
    edges = float(np.sum(np.diff(v) ** 2))
    tail = float((v * v) @ table.tail)
    return table.h * (pair + 2.0 * table.pv_coeff * edges + 2.0 * tail)


def test_whole_space_quadratic_form_matches_operator():
    lg = build_line_grid(10.0, 0.1)
    t = kernel_weights(lg, Params())
    rng = np.random.default_rng(3)
    v = rng.standard_normal(lg.n_nodes) * np.exp(-np.abs(lg.nodes))
    # h * v . Lv = (c/2) * double integral, by symmetry of the form
    lhs = t.h * float(v @ frac_laplacian_apply(v, t))
    rhs = t.c_ns / 2.0 * brute_force_line_form(v, t)
    assert lhs == pytest.approx(rhs, rel=1e-11)


def test_whole_space_energy_zero_and_positive_cases():
    lg = build_line_grid(20.0, 0.05)
    t = kernel_weights(lg, Params())
    p = Params()
    assert F_energy(np.zeros(lg.n_nodes), p.p, p.s, t) == 0.0
    tiny = 1e-3 * np.exp(-lg.nodes**2)
    assert F_energy(tiny, p.p, p.s, t) > 0.0
    assert pohozaev(np.zeros(lg.n_nodes), p.p, p.s, t) == 0.0
    small = 1e-2 * np.exp(-lg.nodes**2)
    assert pohozaev(small, p.p, p.s, t) > 0.0


def test_whole_space_energy_brute_force_small_grid():
    lg = build_line_grid(6.0, 0.1)
    t = kernel_weights(lg, Params())
    p = Params()
    rng = np.random.default_rng(14)
    v = rng.standard_normal(lg.n_nodes) * np.exp(-np.abs(lg.nodes))
    h = lg.h
    expected = 0.5 * (
        t.c_ns / 2.0 * brute_force_line_form(v, t) + h * float(np.sum(v * v))
    ) - h * float(np.sum(np.abs(v) ** 2.5)) / 2.5
    assert F_energy(v, p.p, p.s, t) == pytest.approx(expected, rel=1e-11)
    expected_p = (
        0.5 * t.c_ns / 4.0 * brute_force_line_form(v, t)
        + 0.5 * h * float(np.sum(v * v))
        - h * float(np.sum(np.abs(v) ** 2.5)) / 2.5
    )
    assert pohozaev(v, p.p, p.s, t) == pytest.approx(expected_p, rel=1e-11)


def test_whole_space_input_validation():
    lg = build_line_grid(5.0, 0.1)
    t = kernel_weights(lg, Params())
    with pytest.raises(ValueError, match="far-field"):
        F_energy(Field(np.ones(lg.n_nodes), far_field="mean"), 1.5, 0.25, t)
    with pytest.raises(ValueError, match="built for"):
        F_energy(np.ones(lg.n_nodes), 1.5, 0.4, t)
    g = build_grid(0.0, 1.0, 0.1, 2.0)
    tg = kernel_weights(g, Params())
    with pytest.raises(ValueError, match="line grid"):
        F_energy(np.ones(g.n_nodes), 1.5, 0.25, tg)
    with pytest.raises(ValueError, match="grids do not match"):
        seminorm_T(ExtendedField(np.ones(g.n_nodes), g), t)
