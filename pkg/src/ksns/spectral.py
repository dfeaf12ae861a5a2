"""Mixed Fourier / sine / cosine spectral machinery on the periodic channel.

The domain is ``[-pi, pi) x [0, pi]``.  Fields are periodic in ``x1`` and carry
a definite parity in ``x2``:

* ``Basis.COS`` -- ``exp(i k1 x1) cos(k2 x2)``, ``k2 = 0 .. n2-1`` (Neumann),
* ``Basis.SIN`` -- ``exp(i k1 x1) sin(k2 x2)``, ``k2 = 1 .. n2`` (Dirichlet).

Both parities are collocated on the same midpoint grid ``x2_j = pi (j + 1/2) / n2``,
so the ``x2`` transforms are DCT-II / DST-II pairs.  Coefficients are stored in
conjugate-reduced form: row ``k1`` runs over ``0 .. n1/2`` and the represented
real field is ``sum over all k1`` with ``f(-k1) = conj(f(k1))``.
"""

from __future__ import annotations

import enum
import os
from dataclasses import dataclass, field
from functools import cached_property

import numpy as np
import scipy.fft

__all__ = [
    "Basis",
    "Grid",
    "SpectralField",
    "to_physical",
    "to_spectral",
    "ddx1",
    "ddx2",
    "laplacian",
    "inv_laplace_neumann",
    "inv_laplace_dirichlet",
    "cos_to_sin",
    "cos_to_sin_matrix",
    "dealias",
    "multiply",
    "flux_divergence",
    "evaluate",
]


def _workers() -> int:
    try:
        return max(1, int(os.environ.get("KSNS_THREADS", "1")))
    except ValueError:
        return 1


class Basis(enum.Enum):
    COS = "CosY"
    SIN = "SinY"

    @property
    def flipped(self) -> "Basis":
        return Basis.SIN if self is Basis.COS else Basis.COS


@dataclass(frozen=True)
class Grid:
    """Tensor grid with ``n1`` uniform points in ``x1`` and ``n2`` midpoints in ``x2``."""

    n1: int
    n2: int

    def __post_init__(self):
        if int(self.n1) != self.n1 or int(self.n2) != self.n2:
            raise ValueError("grid sizes must be integers")
        if self.n1 < 4 or self.n1 % 2:
            raise ValueError(f"n1 must be even and >= 4, got {self.n1}")
        if self.n2 < 4:
            raise ValueError(f"n2 must be >= 4, got {self.n2}")

    @cached_property
    def x1(self) -> np.ndarray:
        return -np.pi + 2 * np.pi * np.arange(self.n1) / self.n1

    @cached_property
    def x2(self) -> np.ndarray:
        return np.pi * (np.arange(self.n2) + 0.5) / self.n2

    @property
    def dx1(self) -> float:
        return 2 * np.pi / self.n1

    @property
    def dx2(self) -> float:
        return np.pi / self.n2

    @property
    def spectral_shape(self) -> tuple[int, int]:
        return (self.n1 // 2 + 1, self.n2)

    @property
    def area(self) -> float:
        return 2 * np.pi**2

    @cached_property
    def k1(self) -> np.ndarray:
        """Column of reduced ``x1`` wavenumbers, shape ``(n1/2+1, 1)``."""
        return np.arange(self.n1 // 2 + 1, dtype=float)[:, None]

    def k2(self, tag: Basis) -> np.ndarray:
        """Row of ``x2`` wavenumbers for ``tag``, shape ``(1, n2)``."""
        k = np.arange(self.n2, dtype=float)
        return (k if tag is Basis.COS else k + 1)[None, :]

    def ksq(self, tag: Basis) -> np.ndarray:
        return self.k1**2 + self.k2(tag) ** 2

    @cached_property
    def k1_weight(self) -> np.ndarray:
        """Multiplicity of each reduced ``k1`` row in the full Hermitian sum."""
        w = np.full((self.n1 // 2 + 1, 1), 2.0)
        w[0] = 1.0
        w[-1] = 1.0
        return w

    def parseval_weight(self, tag: Basis) -> np.ndarray:
        """Weights turning ``|coeff|^2`` into the integral over the domain."""
        w2 = np.full((1, self.n2), np.pi / 2)
        if tag is Basis.COS:
            w2[0, 0] = np.pi
        return 2 * np.pi * self.k1_weight * w2

    def dealias_mask(self, tag: Basis) -> np.ndarray:
        # Strict inequalities: when 3 divides n1 (or n2) the mode sitting exactly
        # on n1/3 (2 n2/3) would receive the alias of its own square.
        keep1 = 3 * self.k1 < self.n1
        keep2 = 3 * self.k2(tag) < 2 * self.n2
        return keep1 & keep2

    def zeros(self, tag: Basis) -> "SpectralField":
        return SpectralField(self, tag, np.zeros(self.spectral_shape, dtype=complex))

    def mesh(self) -> tuple[np.ndarray, np.ndarray]:
        return np.meshgrid(self.x1, self.x2, indexing="ij")


@dataclass(frozen=True, eq=False)
class SpectralField:
    """Immutable coefficient array of a real scalar on the channel."""

    grid: Grid
    tag: Basis
    coeffs: np.ndarray = field(repr=False)

    def __post_init__(self):
        c = np.array(self.coeffs, dtype=complex)
        if c.shape != self.grid.spectral_shape:
            raise ValueError(
                f"coefficient shape {c.shape} does not match {self.grid.spectral_shape}"
            )
        c.setflags(write=False)
        object.__setattr__(self, "coeffs", c)

    def _like(self, coeffs: np.ndarray, tag: Basis | None = None) -> "SpectralField":
        return SpectralField(self.grid, self.tag if tag is None else tag, coeffs)

    def _check(self, other: "SpectralField"):
        if other.grid != self.grid:
            raise ValueError("grid mismatch")
        if other.tag is not self.tag:
            raise ValueError(f"basis mismatch: {self.tag.value} vs {other.tag.value}")

    def __add__(self, other):
        if isinstance(other, SpectralField):
            self._check(other)
            return self._like(self.coeffs + other.coeffs)
        return NotImplemented

    def __sub__(self, other):
        if isinstance(other, SpectralField):
            self._check(other)
            return self._like(self.coeffs - other.coeffs)
        return NotImplemented

    def __mul__(self, scalar):
        if np.isscalar(scalar):
            return self._like(self.coeffs * scalar)
        return NotImplemented

    __rmul__ = __mul__

    def __truediv__(self, scalar):
        if np.isscalar(scalar):
            return self._like(self.coeffs / scalar)
        return NotImplemented

    def __neg__(self):
        return self._like(-self.coeffs)

    def is_finite(self) -> bool:
        return bool(np.all(np.isfinite(self.coeffs)))

    @property
    def k2(self) -> np.ndarray:
        return self.grid.k2(self.tag)


def _x1_phase(grid: Grid) -> np.ndarray:
    # nodes start at -pi, so the DFT picks up a (-1)^k1 factor
    return np.where(np.arange(grid.n1 // 2 + 1) % 2 == 0, 1.0, -1.0)[:, None]


def to_physical(f: SpectralField) -> np.ndarray:
    """Values of ``f`` on the ``n1 x n2`` collocation grid."""
    grid = f.grid
    workers = _workers()
    rows = grid.n1 * scipy.fft.irfft(f.coeffs * _x1_phase(grid), n=grid.n1, axis=0, workers=workers)
    if f.tag is Basis.COS:
        rows[:, 1:] *= 0.5
        return scipy.fft.dct(rows, type=3, axis=1, workers=workers)
    rows[:, :-1] *= 0.5
    return scipy.fft.dst(rows, type=3, axis=1, workers=workers)


def to_spectral(values: np.ndarray, tag: Basis, grid: Grid | None = None) -> SpectralField:
    """Interpolating coefficients of grid ``values`` in the ``tag`` basis."""
    values = np.asarray(values, dtype=float)
    if values.ndim != 2:
        raise ValueError(f"expected a 2D array, got shape {values.shape}")
    if grid is None:
        grid = Grid(*values.shape)
    elif values.shape != (grid.n1, grid.n2):
        raise ValueError(f"array shape {values.shape} does not match grid {(grid.n1, grid.n2)}")
    workers = _workers()
    n2 = grid.n2
    if tag is Basis.COS:
        a = scipy.fft.dct(values, type=2, axis=1, workers=workers) / n2
        a[:, 0] *= 0.5
    else:
        a = scipy.fft.dst(values, type=2, axis=1, workers=workers) / n2
        a[:, -1] *= 0.5
    c = scipy.fft.rfft(a, axis=0, workers=workers) / grid.n1
    c *= _x1_phase(grid)
    # real-field convention: k1 = 0 and the Nyquist row carry real coefficients
    c[0] = c[0].real
    c[-1] = c[-1].real
    return SpectralField(grid, tag, c)


def ddx1(f: SpectralField) -> SpectralField:
    """``d/dx1``; the Nyquist row is dropped so the result stays real."""
    mult = 1j * f.grid.k1
    mult = mult.copy()
    mult[-1] = 0.0
    return f._like(f.coeffs * mult)


def ddx2(f: SpectralField) -> SpectralField:
    """``d/dx2`` with the parity flip ``CosY <-> SinY``.

    ``cos(k x) -> -k sin(k x)`` lands in sine modes ``1 .. n2-1``.
    ``sin(k x) -> k cos(k x)`` drops ``k = n2``: ``cos(n2 x2)`` vanishes on the
    midpoint grid and has no slot in the cosine range.
    """
    c = f.coeffs
    out = np.zeros_like(c)
    k = np.arange(f.grid.n2, dtype=float)
    if f.tag is Basis.COS:
        out[:, :-1] = -k[None, 1:] * c[:, 1:]
    else:
        out[:, 1:] = k[None, 1:] * c[:, :-1]
    return f._like(out, f.tag.flipped)


def laplacian(f: SpectralField) -> SpectralField:
    return f._like(-f.grid.ksq(f.tag) * f.coeffs)


def inv_laplace_neumann(f: SpectralField) -> SpectralField:
    """``(-Delta_N)^{-1}`` on the mean-free part; the mean is annihilated."""
    if f.tag is not Basis.COS:
        raise ValueError("inv_laplace_neumann requires a CosY field")
    ksq = f.grid.ksq(Basis.COS).copy()
    ksq[0, 0] = np.inf
    return f._like(f.coeffs / ksq)


def inv_laplace_dirichlet(f: SpectralField, power: int = 1) -> SpectralField:
    if f.tag is not Basis.SIN:
        raise ValueError("inv_laplace_dirichlet requires a SinY field")
    if power not in (1, 2):
        raise ValueError(f"power must be 1 or 2, got {power}")
    return f._like(f.coeffs / f.grid.ksq(Basis.SIN) ** power)


_COS_TO_SIN_CACHE: dict[int, np.ndarray] = {}


def cos_to_sin_matrix(n2: int) -> np.ndarray:
    """Exact ``L^2[0, pi]`` projection of ``cos(m x)`` onto ``sin(k x)``.

    Returns ``S`` with shape ``(n2, n2)``: rows are ``k = 1 .. n2`` and columns
    ``m = 0 .. n2-1``.
    """
    if n2 not in _COS_TO_SIN_CACHE:
        k = np.arange(1, n2 + 1, dtype=float)[:, None]
        m = np.arange(n2, dtype=float)[None, :]
        odd = (k + m) % 2 == 1
        with np.errstate(divide="ignore", invalid="ignore"):
            s = np.where(odd, (4 / np.pi) * k / (k**2 - m**2), 0.0)
        s.setflags(write=False)
        _COS_TO_SIN_CACHE[n2] = s
    return _COS_TO_SIN_CACHE[n2]


def cos_to_sin(f: SpectralField) -> SpectralField:
    """Dirichlet-basis ``L^2`` projection of a CosY field.

    The projection targets sine modes ``1 .. n2-1``; the top mode ``n2`` is left
    at zero so that every SinY field produced here has a cosine partner under
    ``ddx2``.
    """
    if f.tag is not Basis.COS:
        raise ValueError("cos_to_sin requires a CosY field")
    s = cos_to_sin_matrix(f.grid.n2)
    out = f.coeffs @ s.T
    out[:, -1] = 0.0
    return f._like(out, Basis.SIN)


def dealias(f: SpectralField) -> SpectralField:
    """2/3-rule truncation: keep only ``|k1| < n1/3`` and ``k2 < 2 n2/3``."""
    return f._like(np.where(f.grid.dealias_mask(f.tag), f.coeffs, 0.0))


def product_tag(a: Basis, b: Basis) -> Basis:
    return Basis.COS if a is b else Basis.SIN


def multiply(f: SpectralField, g: SpectralField) -> SpectralField:
    """Pseudo-spectral product with 2/3-rule dealiasing of inputs and output."""
    if f.grid != g.grid:
        raise ValueError("grid mismatch")
    vals = to_physical(dealias(f)) * to_physical(dealias(g))
    return dealias(to_spectral(vals, product_tag(f.tag, g.tag), f.grid))


def flux_divergence(q: SpectralField, a1: SpectralField, a2: SpectralField) -> SpectralField:
    """``d1(q a1) + d2(q a2)`` with 2/3-rule products, all factors dealiased."""
    grid = q.grid
    qv = to_physical(dealias(q))
    f1 = to_spectral(qv * to_physical(dealias(a1)), product_tag(q.tag, a1.tag), grid)
    f2 = to_spectral(qv * to_physical(dealias(a2)), product_tag(q.tag, a2.tag), grid)
    return dealias(ddx1(dealias(f1)) + ddx2(dealias(f2)))


def evaluate(f: SpectralField, x1, x2) -> np.ndarray:
    """Sum the truncated series at arbitrary points (broadcasting ``x1`` against ``x2``)."""
    x1, x2 = np.broadcast_arrays(np.asarray(x1, dtype=float), np.asarray(x2, dtype=float))
    grid = f.grid
    k1 = np.arange(grid.n1 // 2 + 1)
    k2 = grid.k2(f.tag)[0]
    basis2 = np.cos if f.tag is Basis.COS else np.sin
    e1 = np.exp(1j * x1[..., None] * k1)  # (..., K1)
    b2 = basis2(x2[..., None] * k2)  # (..., K2)
    w = grid.k1_weight[:, 0]
    inner = np.einsum("...b,ab->...a", b2, f.coeffs)
    return np.real(np.sum(w * e1 * inner, axis=-1))
