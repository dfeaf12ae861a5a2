import math

import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from conftest import random_field
from ksns import oracles
from ksns.fields import inner
from ksns.spectral import (
    Basis,
    Grid,
    SpectralField,
    cos_to_sin,
    ddx1,
    ddx2,
    dealias,
    evaluate,
    inv_laplace_dirichlet,
    inv_laplace_neumann,
    laplacian,
    multiply,
    to_physical,
    to_spectral,
)

TAGS = [Basis.COS, Basis.SIN]
grids = st.sampled_from([(8, 5), (16, 9), (12, 7), (18, 6), (32, 17)])
seeds = st.integers(0, 2**31 - 1)


def rel(a, b):
    return np.max(np.abs(a - b)) / max(1.0, np.max(np.abs(b)))


@pytest.mark.parametrize("n1,n2", [(2, 9), (15, 9), (16, 3), (0, 5)])
def test_grid_rejects_bad_sizes(n1, n2):
    with pytest.raises(ValueError):
        Grid(n1, n2)


def test_nodes_and_wavenumbers(grid16):
    assert grid16.x1[0] == -math.pi
    assert np.allclose(np.diff(grid16.x1), 2 * math.pi / 16)
    assert np.allclose(grid16.x2, math.pi * (np.arange(9) + 0.5) / 9)
    assert grid16.k2(Basis.COS)[0, 0] == 0 and grid16.k2(Basis.SIN)[0, 0] == 1
    assert grid16.spectral_shape == (9, 9)


@given(grids, seeds, st.sampled_from(TAGS))
def test_round_trip_physical_spectral(shape, seed, tag):
    grid = Grid(*shape)
    values = np.random.default_rng(seed).standard_normal(shape)
    back = to_physical(to_spectral(values, tag, grid))
    assert np.max(np.abs(back - values)) <= 1e-12 * max(1.0, np.max(np.abs(values)))


@given(grids, seeds, st.sampled_from(TAGS))
def test_spectral_round_trip(shape, seed, tag):
    grid = Grid(*shape)
    f = random_field(grid, tag, np.random.default_rng(seed))
    g = to_spectral(to_physical(f), tag, grid)
    assert rel(g.coeffs, f.coeffs) <= 1e-12


@pytest.mark.parametrize("tag", TAGS)
def test_transforms_match_direct_summation(grid16, rng, tag):
    f = random_field(grid16, tag, rng)
    assert rel(to_physical(f), oracles.direct_to_physical(f)) <= 1e-12
    values = rng.standard_normal((16, 9))
    assert rel(to_spectral(values, tag, grid16).coeffs, oracles.lstsq_to_spectral(values, tag, grid16).coeffs) <= 1e-12


def test_single_mode_coefficients(grid16):
    x1, x2 = grid16.mesh()
    f = to_spectral(np.cos(x1) * np.cos(x2), Basis.COS, grid16)
    expect = np.zeros(grid16.spectral_shape, dtype=complex)
    expect[1, 1] = 0.5  # cos(x1) = (e^{ix1} + e^{-ix1}) / 2, k1 weight 2 on the positive half
    assert np.max(np.abs(f.coeffs - expect)) < 1e-14


def test_evaluate_matches_grid_values(grid16, rng):
    for tag in TAGS:
        f = random_field(grid16, tag, rng)
        x1, x2 = grid16.mesh()
        assert rel(evaluate(f, x1, x2), to_physical(f)) <= 1e-12


OPS = {
    "ddx1_cos": (ddx1, Basis.COS),
    "ddx1_sin": (ddx1, Basis.SIN),
    "ddx2_cos": (ddx2, Basis.COS),
    "ddx2_sin": (ddx2, Basis.SIN),
    "lap_cos": (laplacian, Basis.COS),
    "lap_sin": (laplacian, Basis.SIN),
    "inv_neumann": (inv_laplace_neumann, Basis.COS),
    "inv_dirichlet1": (lambda f: inv_laplace_dirichlet(f, 1), Basis.SIN),
    "inv_dirichlet2": (lambda f: inv_laplace_dirichlet(f, 2), Basis.SIN),
    "cos_to_sin": (cos_to_sin, Basis.COS),
    "dealias_cos": (dealias, Basis.COS),
    "dealias_sin": (dealias, Basis.SIN),
}


@pytest.mark.parametrize("name", sorted(OPS))
def test_operator_matches_dense_oracle(grid16, rng, name):
    op, tag = OPS[name]
    for _ in range(3):
        f = random_field(grid16, tag, rng)
        dense = oracles.apply_dense(oracles.dense_operator(name, grid16), f.coeffs)
        assert rel(op(f).coeffs, dense) <= 1e-12


def test_eigenfunction_examples(grid16):
    x1, x2 = grid16.mesh()
    f = to_spectral(np.cos(x1) * np.cos(x2), Basis.COS, grid16)
    assert np.max(np.abs(to_physical(inv_laplace_neumann(f)) - 0.5 * np.cos(x1) * np.cos(x2))) <= 1e-13
    s = to_spectral(np.sin(2 * x1) * np.sin(3 * x2), Basis.SIN, grid16)
    out = to_physical(inv_laplace_dirichlet(s, 2))
    assert np.max(np.abs(out - np.sin(2 * x1) * np.sin(3 * x2) / 169)) <= 1e-13


def test_neumann_inverse_kills_mean_and_inverts(grid16, rng):
    f = random_field(grid16, Basis.COS, rng)
    c = inv_laplace_neumann(f)
    assert c.coeffs[0, 0] == 0
    back = -laplacian(c)
    expect = f.coeffs.copy()
    expect[0, 0] = 0
    assert rel(back.coeffs, expect) <= 1e-12


def test_inverse_laplacian_rejects_wrong_basis(grid16):
    with pytest.raises(ValueError):
        inv_laplace_neumann(grid16.zeros(Basis.SIN))
    with pytest.raises(ValueError):
        inv_laplace_dirichlet(grid16.zeros(Basis.COS))
    with pytest.raises(ValueError):
        inv_laplace_dirichlet(grid16.zeros(Basis.SIN), 3)


@given(grids, seeds)
def test_ddx1_skew_adjoint(shape, seed):
    grid = Grid(*shape)
    rng = np.random.default_rng(seed)
    for tag in TAGS:
        f = random_field(grid, tag, rng, band_limited=True)
        g = random_field(grid, tag, rng, band_limited=True)
        lhs = inner(ddx1(f), g)
        assert abs(lhs + inner(f, ddx1(g))) <= 1e-10 * max(1.0, abs(lhs))


@given(grids, seeds)
def test_ddx2_skew_adjoint_between_parities(shape, seed):
    grid = Grid(*shape)
    rng = np.random.default_rng(seed)
    c = random_field(grid, Basis.COS, rng, band_limited=True)
    s = random_field(grid, Basis.SIN, rng, band_limited=True)
    lhs = inner(ddx2(c), s)
    assert abs(lhs + inner(c, ddx2(s))) <= 1e-10 * max(1.0, abs(lhs))


@given(grids, seeds)
def test_cos_to_sin_preserves_pairings_with_retained_sines(shape, seed):
    grid = Grid(*shape)
    rng = np.random.default_rng(seed)
    # The Nyquist row has grid norm 2 pi but continuous norm pi; leave it out here.
    fc = random_field(grid, Basis.COS, rng).coeffs.copy()
    fc[-1] = 0
    f = SpectralField(grid, Basis.COS, fc)
    c = random_field(grid, Basis.SIN, rng).coeffs.copy()
    c[:, -1] = 0
    c[-1] = 0
    s = SpectralField(grid, Basis.SIN, c)
    p = cos_to_sin(f)
    assert np.all(p.coeffs[:, -1] == 0)
    # Independent pairing: uniform x1 rule (exact for the trigonometric product)
    # times high-order Gauss-Legendre in x2.
    n1q = 2 * grid.n1
    x1 = -math.pi + 2 * math.pi * np.arange(n1q) / n1q
    x2, w2 = np.polynomial.legendre.leggauss(400)
    x2 = (x2 + 1) * math.pi / 2
    w2 = w2 * math.pi / 2
    X1, X2 = np.meshgrid(x1, x2, indexing="ij")
    vals = evaluate(f, X1, X2) * evaluate(s, X1, X2)
    direct = float(np.sum(vals * w2[None, :]) * 2 * math.pi / n1q)
    assert abs(inner(p, s) - direct) <= 1e-9 * max(1.0, abs(direct))


def test_cos_to_sin_constant_and_odd_modes():
    grid = Grid(8, 64)
    c = np.zeros(grid.spectral_shape, dtype=complex)
    c[0, 0] = 1.0
    one = SpectralField(grid, Basis.COS, c)
    s = cos_to_sin(one)
    k = np.arange(1, 65)
    expect = np.where(k % 2 == 1, 4 / (math.pi * k), 0.0)
    expect[-1] = 0.0
    assert np.allclose(s.coeffs[0].real, expect, atol=1e-15)


@pytest.mark.parametrize("n1,n2", [(16, 9), (18, 9), (24, 12)])
def test_dealias_mask_is_strict(n1, n2):
    grid = Grid(n1, n2)
    m = grid.dealias_mask(Basis.COS)
    k1 = grid.k1[:, 0]
    k2 = grid.k2(Basis.COS)[0]
    assert np.array_equal(m, (3 * k1[:, None] < n1) & (3 * k2[None, :] < 2 * n2))
    if n1 % 3 == 0:
        assert not m[n1 // 3].any()


@given(seeds)
def test_products_of_band_limited_fields_are_exact(seed):
    # Inputs confined to |k| < n/6 multiply without truncation.
    grid = Grid(24, 13)
    rng = np.random.default_rng(seed)
    fields = []
    for tag in (Basis.COS, Basis.SIN):
        f = random_field(grid, tag, rng)
        keep = (grid.k1 < 4) & (grid.k2(tag) < 4)
        fields.append(SpectralField(grid, tag, np.where(keep, f.coeffs, 0)))
    a, b = fields
    for f, g in ((a, a), (a, b), (b, b)):
        prod = multiply(f, g)
        exact = to_physical(f) * to_physical(g)
        assert rel(to_physical(prod), exact) <= 1e-12


def test_field_algebra_and_checks(grid16, rng):
    f = random_field(grid16, Basis.COS, rng)
    g = random_field(grid16, Basis.COS, rng)
    assert np.allclose((f + g - g).coeffs, f.coeffs)
    assert np.allclose((2 * f / 2).coeffs, f.coeffs)
    assert np.allclose((-f).coeffs, -f.coeffs)
    with pytest.raises(ValueError):
        f + random_field(grid16, Basis.SIN, rng)
    with pytest.raises(ValueError):
        f + random_field(Grid(8, 9), Basis.COS, rng)
    with pytest.raises(ValueError):
        to_spectral(np.zeros((4, 4)), Basis.COS, grid16)


def test_dirichlet_inverse_against_finite_differences():
    # f(x2) = x2 (pi - x2) has sine coefficients 8 / (pi k^3) for odd k.
    grid = Grid(8, 65)
    k = np.arange(1, 66)
    a = np.where(k % 2 == 1, 8 / (math.pi * k**3), 0.0)
    c = np.zeros(grid.spectral_shape, dtype=complex)
    c[1] = a
    f = SpectralField(grid, Basis.SIN, c)
    line = inv_laplace_dirichlet(f, 1).coeffs[1].real
    spectral = math.pi / 2 * float(np.sum(line**2))
    fd = oracles.fd_dirichlet_line_norm(lambda x: x * (math.pi - x), 1)
    assert abs(spectral - fd) <= 1e-4 * spectral
