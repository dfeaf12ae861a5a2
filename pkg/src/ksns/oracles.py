"""Slow, independent reference computations used by the test and verify suites.

Nothing here is used by the solver.  Operators are rebuilt as dense matrices by
Gauss-Legendre quadrature of analytically differentiated basis functions,
transforms by direct summation, and right-hand sides by finite differences of
pointwise series evaluations projected back onto the basis.
"""

from __future__ import annotations

import math
from functools import lru_cache

import numpy as np
import scipy.linalg

from .spectral import Basis, Grid, SpectralField, dealias

__all__ = [
    "synthesis_matrix",
    "direct_to_physical",
    "lstsq_to_spectral",
    "dense_operator",
    "apply_dense",
    "static_stokes_dense",
    "fd_dirichlet_line_norm",
    "series",
    "fd_ks_rhs",
    "fd_ns_vorticity_rhs",
    "poincare_constant",
]

QUAD_POINTS = 96


@lru_cache(maxsize=None)
def _gauss(q: int = QUAD_POINTS):
    x, w = np.polynomial.legendre.leggauss(q)
    return (x + 1) * (math.pi / 2), w * (math.pi / 2)


def _ks(tag: Basis, n2: int) -> np.ndarray:
    return np.arange(n2) if tag is Basis.COS else np.arange(1, n2 + 1)


def _line(tag: Basis, k: np.ndarray, x: np.ndarray, deriv: int = 0) -> np.ndarray:
    """``d^deriv/dx^deriv`` of ``cos(k x)`` or ``sin(k x)``; shape ``(len(x), len(k))``."""
    kx = np.outer(x, k)
    phase = deriv * math.pi / 2
    if tag is Basis.COS:
        return k**deriv * np.cos(kx + phase)
    return k**deriv * np.sin(kx + phase)


def synthesis_matrix(grid: Grid, tag: Basis) -> np.ndarray:
    """Real matrix from real coefficient parameters to grid values.

    Parameter order: for each reduced ``k1``, the real parts over ``k2``, then
    (for ``0 < k1 < n1/2``) the imaginary parts.
    """
    x1, x2 = grid.mesh()
    k2 = _ks(tag, grid.n2)
    b2 = np.cos if tag is Basis.COS else np.sin
    cols = []
    for k1 in range(grid.n1 // 2 + 1):
        w = 1.0 if k1 in (0, grid.n1 // 2) else 2.0
        for k in k2:
            cols.append((w * np.cos(k1 * x1) * b2(k * x2)).ravel())
        if 0 < k1 < grid.n1 // 2:
            for k in k2:
                cols.append((-w * np.sin(k1 * x1) * b2(k * x2)).ravel())
    return np.array(cols).T


def _to_params(coeffs: np.ndarray, grid: Grid) -> np.ndarray:
    out = []
    for k1 in range(grid.n1 // 2 + 1):
        out.extend(coeffs[k1].real)
        if 0 < k1 < grid.n1 // 2:
            out.extend(coeffs[k1].imag)
    return np.array(out)


def _from_params(p: np.ndarray, grid: Grid) -> np.ndarray:
    c = np.zeros(grid.spectral_shape, dtype=complex)
    i = 0
    n2 = grid.n2
    for k1 in range(grid.n1 // 2 + 1):
        c[k1] = p[i : i + n2]
        i += n2
        if 0 < k1 < grid.n1 // 2:
            c[k1] += 1j * p[i : i + n2]
            i += n2
    return c


def direct_to_physical(f: SpectralField) -> np.ndarray:
    """``O(N^2)`` direct summation of the series at the grid nodes."""
    m = synthesis_matrix(f.grid, f.tag)
    return (m @ _to_params(f.coeffs, f.grid)).reshape(f.grid.n1, f.grid.n2)


def lstsq_to_spectral(values: np.ndarray, tag: Basis, grid: Grid) -> SpectralField:
    """Interpolating coefficients from a dense least-squares solve."""
    m = synthesis_matrix(grid, tag)
    p, *_ = np.linalg.lstsq(m, values.ravel(), rcond=None)
    return SpectralField(grid, tag, _from_params(p, grid))


def _galerkin(in_tag: Basis, out_tag: Basis, n2: int, deriv: int, rows: int | None = None) -> np.ndarray:
    """``M[k_out, m] = <d^deriv phi_m, psi_k> / |psi_k|^2`` on ``[0, pi]``."""
    x, w = _gauss()
    phi = _line(in_tag, _ks(in_tag, n2), x, deriv)
    psi = _line(out_tag, _ks(out_tag, n2), x)
    gram = (psi * w[:, None]).T @ psi
    proj = (psi * w[:, None]).T @ phi
    m = proj / np.diag(gram)[:, None]
    if rows is not None:
        m[rows:] = 0.0
    return m


def dense_operator(name: str, grid: Grid) -> list[np.ndarray]:
    """Per-``k1`` dense matrices for the named linear operator.

    Names: ``ddx1_cos``, ``ddx1_sin``, ``ddx2_cos``, ``ddx2_sin``, ``lap_cos``,
    ``lap_sin``, ``inv_neumann``, ``inv_dirichlet1``, ``inv_dirichlet2``,
    ``cos_to_sin``, ``dealias_cos``, ``dealias_sin``.
    """
    n2 = grid.n2
    nyq = grid.n1 // 2
    eye = np.eye(n2)
    mats = []
    for k1 in range(nyq + 1):
        if name in ("ddx1_cos", "ddx1_sin"):
            m = (1j * k1 if k1 != nyq else 0.0) * eye
        elif name == "ddx2_cos":
            m = _galerkin(Basis.COS, Basis.SIN, n2, 1)
        elif name == "ddx2_sin":
            m = _galerkin(Basis.SIN, Basis.COS, n2, 1)
        elif name in ("lap_cos", "lap_sin"):
            tag = Basis.COS if name == "lap_cos" else Basis.SIN
            m = _galerkin(tag, tag, n2, 2) - k1**2 * eye
        elif name == "inv_neumann":
            a = -(_galerkin(Basis.COS, Basis.COS, n2, 2) - k1**2 * eye)
            if k1 == 0:
                m = np.zeros((n2, n2))
                m[1:, 1:] = np.linalg.inv(a[1:, 1:])
            else:
                m = np.linalg.inv(a)
        elif name in ("inv_dirichlet1", "inv_dirichlet2"):
            a = -(_galerkin(Basis.SIN, Basis.SIN, n2, 2) - k1**2 * eye)
            m = np.linalg.inv(a)
            if name == "inv_dirichlet2":
                m = m @ m
        elif name == "cos_to_sin":
            m = _galerkin(Basis.COS, Basis.SIN, n2, 0, rows=n2 - 1)
        elif name in ("dealias_cos", "dealias_sin"):
            tag = Basis.COS if name == "dealias_cos" else Basis.SIN
            keep = (3 * _ks(tag, n2) < 2 * n2) & (3 * k1 < grid.n1)
            m = np.diag(keep.astype(float))
        else:
            raise KeyError(name)
        mats.append(np.asarray(m, dtype=complex))
    return mats


def apply_dense(mats: list[np.ndarray], coeffs: np.ndarray) -> np.ndarray:
    return np.stack([m @ c for m, c in zip(mats, coeffs)])


def static_stokes_dense(rho: SpectralField, g: float) -> tuple[np.ndarray, np.ndarray]:
    """Quasi-static Stokes velocity from the coupled stream/vorticity system.

    Solves ``Lap psi = omega``, ``-Lap omega = g d1 rho`` with Dirichlet parity as
    one dense block system per ``k1``; the forcing is projected onto the sine
    modes by quadrature at the solver's truncation (``k2 <= n2 - 1``).
    Returns ``(u1, u2)`` coefficient arrays.
    """
    grid = rho.grid
    n2 = grid.n2
    lap = dense_operator("lap_sin", grid)
    proj = dense_operator("cos_to_sin", grid)
    dx2 = dense_operator("ddx2_sin", grid)
    u1 = np.zeros(grid.spectral_shape, dtype=complex)
    u2 = np.zeros(grid.spectral_shape, dtype=complex)
    z = np.zeros((n2, n2))
    eye = np.eye(n2)
    for k1 in range(grid.n1 // 2 + 1):
        d1 = 1j * k1 if k1 != grid.n1 // 2 else 0.0
        forcing = g * d1 * (proj[k1] @ rho.coeffs[k1])
        block = np.block([[lap[k1], -eye], [z, -lap[k1]]])
        rhs = np.concatenate([np.zeros(n2), forcing])
        sol = np.linalg.solve(block, rhs)
        psi = sol[:n2]
        u1[k1] = -(dx2[k1] @ psi)
        u2[k1] = d1 * psi
    return u1, u2


def fd_dirichlet_line_norm(f, k1: int, points: int = 256) -> float:
    """``|(-d^2/dx^2 + k1^2)^{-1} f|^2_{L^2(0, pi)}`` by second-order finite differences.

    ``f`` is a callable on ``(0, pi)``; homogeneous Dirichlet conditions at both ends.
    """
    h = math.pi / (points + 1)
    x = h * np.arange(1, points + 1)
    main = np.full(points, 2 / h**2 + k1**2)
    off = np.full(points - 1, -1 / h**2)
    sol = scipy.linalg.solve_banded((1, 1), np.vstack([np.r_[0, off], main, np.r_[off, 0]]), f(x))
    return float(h * np.sum(np.abs(sol) ** 2))


def series(f: SpectralField):
    """Callable evaluating the truncated series of ``f`` at arbitrary points."""
    grid = f.grid
    k1 = np.arange(grid.n1 // 2 + 1)
    w = np.where((k1 == 0) | (k1 == grid.n1 // 2), 1.0, 2.0)
    k2 = _ks(f.tag, grid.n2)
    b2 = np.cos if f.tag is Basis.COS else np.sin
    c = f.coeffs

    def fn(x1, x2):
        x1, x2 = np.broadcast_arrays(np.asarray(x1, float), np.asarray(x2, float))
        e1 = np.exp(1j * x1[..., None] * k1)
        bb = b2(x2[..., None] * k2)
        return np.real(np.einsum("...a,ab,...b->...", w * e1, c, bb))

    return fn


FD_H = 1e-3


def _d(fn, axis: int, h: float = FD_H):
    """Fourth-order central first derivative of a pointwise callable."""

    def out(x1, x2):
        if axis == 0:
            s = lambda a: fn(x1 + a * h, x2)
        else:
            s = lambda a: fn(x1, x2 + a * h)
        return (s(-2) - 8 * s(-1) + 8 * s(1) - s(2)) / (12 * h)

    return out


def _d2(fn, axis: int, h: float = FD_H):
    """Fourth-order central second derivative."""

    def out(x1, x2):
        if axis == 0:
            s = lambda a: fn(x1 + a * h, x2)
        else:
            s = lambda a: fn(x1, x2 + a * h)
        return (-s(-2) + 16 * s(-1) - 30 * s(0) + 16 * s(1) - s(2)) / (12 * h * h)

    return out


def _project(fn, tag: Basis, grid: Grid) -> SpectralField:
    """Quadrature projection of a pointwise callable onto the tagged basis."""
    n1q = 3 * grid.n1
    x1 = -math.pi + 2 * math.pi * np.arange(n1q) / n1q
    x2, w2 = _gauss()
    vals = fn(x1[:, None], x2[None, :])
    k1 = np.arange(grid.n1 // 2 + 1)
    e1 = np.exp(-1j * np.outer(k1, x1)) / n1q
    k2 = _ks(tag, grid.n2)
    b2 = _line(tag, k2, x2)
    norm2 = (b2**2 * w2[:, None]).sum(axis=0)
    coeffs = e1 @ vals @ (b2 * w2[:, None]) / norm2
    coeffs[0] = coeffs[0].real
    coeffs[-1] = 0.0
    return SpectralField(grid, tag, coeffs)


def fd_ks_rhs(rho: SpectralField, psi: SpectralField) -> SpectralField:
    """Keller-Segel right-hand side by finite differences, advecting with ``perp_grad psi``.

    The chemical potential comes from the dense Neumann inverse; every
    derivative of a product is a finite difference of pointwise values.  The
    result is projected and dealiased so it compares with the pseudo-spectral
    right-hand side at matched truncation.
    """
    grid = rho.grid
    c = SpectralField(grid, Basis.COS, apply_dense(dense_operator("inv_neumann", grid), rho.coeffs))
    r, cf, ps = series(rho), series(c), series(psi)
    u1 = lambda a, b: -_d(ps, 1)(a, b)
    u2 = _d(ps, 0)
    flux1 = lambda a, b: r(a, b) * (u1(a, b) + _d(cf, 0)(a, b))
    flux2 = lambda a, b: r(a, b) * (u2(a, b) + _d(cf, 1)(a, b))

    def rhs(a, b):
        return _d2(r, 0)(a, b) + _d2(r, 1)(a, b) - _d(flux1, 0)(a, b) - _d(flux2, 1)(a, b)

    return dealias(_project(rhs, Basis.COS, grid))


def fd_ns_vorticity_rhs(omega: SpectralField, rho: SpectralField, B: float, g: float) -> SpectralField:
    """Vorticity right-hand side ``-div(u omega) + B Lap omega + B g d1 rho`` by finite differences."""
    grid = omega.grid
    psi = SpectralField(grid, Basis.SIN, -apply_dense(dense_operator("inv_dirichlet1", grid), omega.coeffs))
    w, r, ps = series(omega), series(rho), series(psi)
    u1 = lambda a, b: -_d(ps, 1)(a, b)
    u2 = _d(ps, 0)
    flux1 = lambda a, b: w(a, b) * u1(a, b)
    flux2 = lambda a, b: w(a, b) * u2(a, b)

    def rhs(a, b):
        adv = _d(flux1, 0)(a, b) + _d(flux2, 1)(a, b)
        return -adv + B * (_d2(w, 0)(a, b) + _d2(w, 1)(a, b)) + B * g * _d(r, 0)(a, b)

    out = _project(rhs, Basis.SIN, grid)
    return dealias(out)


def poincare_constant(grid: Grid) -> float:
    """Smallest ``C`` with ``|u| <= C |grad u|`` over stream-function velocities.

    Builds the Gram matrices of ``perp_grad`` of each sine basis function and of
    its gradient by quadrature, per ``k1``, and solves the generalized symmetric
    eigenproblem.  Returns ``lambda_min^{-1/2}``.
    """
    x, w = _gauss()
    k = _ks(Basis.SIN, grid.n2)
    s0 = _line(Basis.SIN, k, x)
    s1 = _line(Basis.SIN, k, x, 1)
    s2 = _line(Basis.SIN, k, x, 2)
    ip = lambda a, b: (a * w[:, None]).T @ b
    lam = math.inf
    for k1 in range(grid.n1 // 2):
        # u1 = -d2 psi, u2 = d1 psi = i k1 psi (complex modes, x1-integrals cancel)
        mass = ip(s1, s1) + k1**2 * ip(s0, s0)
        # |grad u|^2 = |d1 u1|^2 + |d2 u1|^2 + |d1 u2|^2 + |d2 u2|^2
        stiff = k1**2 * ip(s1, s1) + ip(s2, s2) + k1**4 * ip(s0, s0) + k1**2 * ip(s1, s1)
        vals = scipy.linalg.eigh(stiff, mass, eigvals_only=True)
        lam = min(lam, float(vals[0]))
    return lam**-0.5
