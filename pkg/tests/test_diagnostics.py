import math
import time
from dataclasses import astuple, replace

import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from conftest import random_field
from ksns import oracles
from ksns.diagnostics import FIELD_NAMES, DiagnosticsRecord, doubling_report, read_csv, sample, write_csv
from ksns.fields import FlowLaw, ModelParams, SimState, inner, sobolev_seminorms
from ksns.spectral import Basis, Grid, to_spectral
from ksns.velocity import velocity_of

seeds = st.integers(0, 2**31 - 1)
LAWS = [FlowLaw.NONE, FlowLaw.DARCY, FlowLaw.STATIC_STOKES, FlowLaw.NAVIER_STOKES]


def state(grid, rho, law=FlowLaw.NONE, omega=None, g=7.0, B=3.0):
    if law is FlowLaw.NAVIER_STOKES and omega is None:
        omega = grid.zeros(Basis.SIN)
    return SimState(0.0, rho, ModelParams(g=g, B=B, grid=grid, law=law), omega)


def positive_random(grid, rng):
    f = random_field(grid, Basis.COS, rng, band_limited=True)
    c = f.coeffs.copy()
    c[0, 0] = 0
    c /= np.max(np.abs(c))
    c[0, 0] = 3.0
    return f._like(c)


def test_field_names_in_schema_order():
    assert FIELD_NAMES == (
        "t", "mass", "rho_m", "min_rho", "rho_inf", "E2", "grad_rho_sq", "Ebar", "Etilde", "mix_sq",
        "h1neg_sq", "u_l2_sq", "grad_u_sq", "u_inf", "res_ks_energy", "res_ns_energy",
        "res_static_identity", "res_lemA3", "dt", "tail_frac", "moment_x2",
    )


def test_constant_state(grid16):
    rho = to_spectral(np.full((16, 9), 1.5), Basis.COS, grid16)
    for law in LAWS:
        r = sample(state(grid16, rho, law))
        assert r.E2 == 0 and r.u_l2_sq == 0
        assert r.mass == pytest.approx(2 * math.pi**2 * 1.5, rel=1e-15)
        for name in ("res_ks_energy", "res_ns_energy", "res_static_identity", "res_lemA3"):
            v = getattr(r, name)
            assert math.isnan(v) or abs(v) <= 1e-13


def test_single_mode_values(grid16):
    x1, x2 = grid16.mesh()
    rho = to_spectral(2 + np.cos(x1) * np.cos(x2), Basis.COS, grid16)
    r = sample(state(grid16, rho))
    assert r.E2 == pytest.approx(math.pi**2 / 2, rel=1e-14)
    assert r.Etilde == pytest.approx(math.pi**2 / 2, rel=1e-14)
    assert abs(r.Ebar) <= 1e-15
    assert r.moment_x2 == pytest.approx(2 * math.pi**3, rel=1e-12)
    assert r.rho_m == pytest.approx(2)
    grid_vals = 2 + np.cos(x1) * np.cos(x2)
    assert r.min_rho == pytest.approx(grid_vals.min(), rel=1e-14)
    assert r.rho_inf == pytest.approx(np.max(np.abs(grid_vals - 2)), rel=1e-14)


@pytest.mark.parametrize("law", LAWS)
def test_identities_for_every_law(law):
    grid = Grid(24, 13)
    rng = np.random.default_rng(int(law))
    rho = positive_random(grid, rng)
    omega = random_field(grid, Basis.SIN, rng, band_limited=True) if law is FlowLaw.NAVIER_STOKES else None
    st_ = state(grid, rho, law, omega)
    r = sample(st_)
    u = velocity_of(st_)
    lap_u = sobolev_seminorms(u.u1)[2] + sobolev_seminorms(u.u2)[2]
    assert 2 * math.pi * r.Ebar + r.Etilde == pytest.approx(r.E2, rel=1e-10)
    assert r.h1neg_sq <= math.sqrt(r.grad_rho_sq * r.mix_sq) * (1 + 1e-12)
    assert abs(r.res_ks_energy) <= 1e-8 * r.grad_rho_sq
    if law is not FlowLaw.NONE:
        assert abs(r.res_lemA3) <= 1e-12 * lap_u
    if law is FlowLaw.STATIC_STOKES:
        assert abs(r.res_static_identity) <= 1e-10 * 7.0 * r.mix_sq
    if law is FlowLaw.NAVIER_STOKES:
        scale = 3.0 * r.grad_u_sq + abs(21.0 * inner(rho, u.u2))
        assert abs(r.res_ns_energy) <= 1e-10 * scale
    else:
        assert math.isnan(r.res_ns_energy)


@given(seeds)
def test_pythagoras_and_cauchy_schwarz(seed):
    grid = Grid(16, 9)
    r = sample(state(grid, positive_random(grid, np.random.default_rng(seed)), FlowLaw.STATIC_STOKES))
    assert 2 * math.pi * r.Ebar + r.Etilde == pytest.approx(r.E2, rel=1e-10)
    assert r.h1neg_sq <= math.sqrt(r.grad_rho_sq * r.mix_sq) * (1 + 1e-12)


def test_mix_norm_against_finite_differences():
    # One x1 mode, so the mixing norm is a single Dirichlet line solve.
    grid = Grid(16, 65)
    x1, x2 = grid.mesh()
    rho = to_spectral(1 + np.cos(x1) * np.exp(np.cos(x2)) / 3, Basis.COS, grid)
    r = sample(state(grid, rho))
    # d1 rho = -sin(x1) e^{cos x2} / 3 ; |.|^2 over x1 contributes a factor pi
    fd = oracles.fd_dirichlet_line_norm(lambda x: np.exp(np.cos(x)) / 3, 1, points=2048)
    assert r.mix_sq == pytest.approx(math.pi * fd, rel=1e-4)


def test_res_ks_energy_converges_with_band_limit():
    vals = []
    for n in (16, 32, 64):
        grid = Grid(2 * n, n + 1)
        x1, x2 = grid.mesh()
        rho = to_spectral(2 + np.cos(x1) * np.exp(np.cos(x2)), Basis.COS, grid)
        r = sample(state(grid, rho))
        vals.append(abs(r.res_ks_energy) / r.grad_rho_sq)
    assert vals[-1] <= 1e-10


def rec(t, e2):
    base = dict.fromkeys(FIELD_NAMES, 0.0)
    base.update(t=t, E2=e2)
    return DiagnosticsRecord(**base)


def test_doubling_report_examples():
    assert doubling_report([rec(t, 0.5) for t in range(5)], 1.0) == []
    series = [rec(t, 3.0 * 2**t) for t in np.linspace(-1, 4, 51)]
    out = doubling_report(series, 3.0)
    assert len(out) == 1
    t_hit, t_double = out[0]
    assert t_hit == pytest.approx(0.0, abs=1e-12)
    assert t_double == pytest.approx(1.0, abs=1e-12)
    assert doubling_report(series, 3.0 * 2**3.5) == [(pytest.approx(3.5), None)]
    with pytest.raises(ValueError):
        doubling_report([], 1.0)
    with pytest.raises(ValueError):
        doubling_report([rec(1, 0), rec(0, 1)], 0.5)


@given(st.lists(st.floats(0.0, 10.0), min_size=2, max_size=40), st.floats(0.1, 5.0))
def test_doubling_report_times_are_consistent(values, level):
    series = [rec(float(i), v) for i, v in enumerate(values)]
    for t_hit, t_double in doubling_report(series, level):
        assert 0 <= t_hit <= len(values) - 1
        if t_double is not None:
            assert t_double >= 0


def test_csv_round_trip(tmp_path, grid16, rng):
    recs = [sample(state(grid16, positive_random(grid16, rng), law)) for law in LAWS]
    recs = [replace(r, t=float(i) / 3) for i, r in enumerate(recs)]
    path = tmp_path / "d.csv"
    write_csv(recs, path)
    back = read_csv(path)
    assert len(back) == len(recs)
    for a, b in zip(recs, back):
        for x, y in zip(astuple(a), astuple(b)):
            assert (math.isnan(x) and math.isnan(y)) or x == y
    raw = path.read_bytes()
    assert b"\r\n" not in raw and raw.startswith(",".join(FIELD_NAMES).encode())


def test_csv_empty_and_malformed(tmp_path):
    p = tmp_path / "e.csv"
    write_csv([], p)
    assert p.read_text() == ",".join(FIELD_NAMES) + "\n"
    assert read_csv(p) == []
    (tmp_path / "bad.csv").write_text("t,mass\n1,2\n")
    with pytest.raises(ValueError, match="header"):
        read_csv(tmp_path / "bad.csv")


def test_csv_reads_ten_thousand_rows_quickly(tmp_path):
    recs = [rec(float(i), float(i) ** 0.5) for i in range(10_000)]
    p = tmp_path / "big.csv"
    write_csv(recs, p)
    t0 = time.perf_counter()
    back = read_csv(p)
    assert time.perf_counter() - t0 < 1.0
    assert len(back) == 10_000
