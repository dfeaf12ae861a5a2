"""Physical unknowns, simulation state, and the norms used throughout."""

from __future__ import annotations

import enum
from dataclasses import dataclass, field, replace

import numpy as np

from .spectral import (
    Basis,
    Grid,
    SpectralField,
    cos_to_sin_matrix,
    ddx1,
    ddx2,
    laplacian,
)

__all__ = [
    "FlowLaw",
    "Scheme",
    "ModelParams",
    "SimState",
    "mean",
    "split_bar_tilde",
    "l2_norm_sq",
    "inner",
    "sobolev_seminorms",
    "quadrature",
]


class FlowLaw(enum.IntEnum):
    """Velocity closure; the integer values are the checkpoint variant codes."""

    NONE = 0
    DARCY = 1
    STATIC_STOKES = 2
    NAVIER_STOKES = 3

    @classmethod
    def parse(cls, name: str) -> "FlowLaw":
        key = name.strip().lower().replace("-", "_").replace(" ", "_")
        aliases = {
            "none": cls.NONE,
            "noflow": cls.NONE,
            "no_flow": cls.NONE,
            "darcy": cls.DARCY,
            "static": cls.STATIC_STOKES,
            "staticstokes": cls.STATIC_STOKES,
            "static_stokes": cls.STATIC_STOKES,
            "stokes": cls.STATIC_STOKES,
            "ns": cls.NAVIER_STOKES,
            "navierstokes": cls.NAVIER_STOKES,
            "navier_stokes": cls.NAVIER_STOKES,
        }
        if key not in aliases:
            raise ValueError(f"unknown velocity law {name!r}")
        return aliases[key]


class Scheme(enum.Enum):
    IMEX_EULER = "ImexEuler"
    IMEX_CNAB2 = "ImexCNAB2"

    @classmethod
    def parse(cls, name: str) -> "Scheme":
        key = name.strip().lower()
        for s in cls:
            if s.value.lower() == key or s.name.lower() == key:
                return s
        if key in ("euler",):
            return cls.IMEX_EULER
        if key in ("cnab2", "cnab"):
            return cls.IMEX_CNAB2
        raise ValueError(f"unknown time scheme {name!r}")


@dataclass(frozen=True)
class ModelParams:
    g: float
    B: float
    grid: Grid
    law: FlowLaw = FlowLaw.NONE
    scheme: Scheme = Scheme.IMEX_CNAB2
    dt_init: float = 1e-3
    dt_min: float = 1e-6
    dt_max: float = 1e-2
    cfl_safety: float = 0.2
    rho_inf_max: float = 1e6
    tail_frac_max: float = 0.1
    pin_steps: int = 20
    dealias: bool = True

    def __post_init__(self):
        if not self.g > 0:
            raise ValueError(f"g must be positive, got {self.g}")
        if not self.B > 0:
            raise ValueError(f"B must be positive, got {self.B}")
        if not 0 < self.dt_min <= self.dt_max:
            raise ValueError("need 0 < dt_min <= dt_max")
        if not 0 < self.cfl_safety <= 1:
            raise ValueError("cfl_safety must lie in (0, 1]")

    def with_(self, **changes) -> "ModelParams":
        return replace(self, **changes)


@dataclass(frozen=True)
class SimState:
    """One integrable snapshot: density, optional vorticity, time and parameters."""

    t: float
    rho: SpectralField
    params: ModelParams
    omega: SpectralField | None = field(default=None)

    def __post_init__(self):
        if self.rho.tag is not Basis.COS:
            raise ValueError("density must be a CosY field")
        if self.rho.grid != self.params.grid:
            raise ValueError("density grid does not match params.grid")
        if self.params.law is FlowLaw.NAVIER_STOKES:
            if self.omega is None:
                raise ValueError("Navier-Stokes state requires a vorticity field")
            if self.omega.tag is not Basis.SIN:
                raise ValueError("vorticity must be a SinY field")
        elif self.omega is not None:
            raise ValueError("vorticity is only carried by the Navier-Stokes law")

    @property
    def grid(self) -> Grid:
        return self.params.grid

    def advanced(self, t: float, rho: SpectralField, omega: SpectralField | None) -> "SimState":
        return SimState(t, rho, self.params, omega)


def mean(rho: SpectralField) -> float:
    if rho.tag is not Basis.COS:
        raise ValueError("mean is defined for CosY fields")
    return float(rho.coeffs[0, 0].real)


def split_bar_tilde(rho: SpectralField) -> tuple[SpectralField, SpectralField]:
    """Split into the ``x1``-average (``k1 = 0`` row) and the fluctuation."""
    bar = np.zeros_like(rho.coeffs)
    bar[0] = rho.coeffs[0]
    tilde = rho.coeffs.copy()
    tilde[0] = 0.0
    return rho._like(bar), rho._like(tilde)


def inner(f: SpectralField, g: SpectralField) -> float:
    """``L^2`` inner product over the channel.

    Mixed-parity pairs are evaluated exactly by projecting the cosine factor onto
    the full sine range ``1 .. n2``.
    """
    if f.grid != g.grid:
        raise ValueError("grid mismatch")
    grid = f.grid
    if f.tag is g.tag:
        w = grid.parseval_weight(f.tag)
        return float(np.sum(w * (f.coeffs * np.conj(g.coeffs)).real))
    cos_f, sin_g = (f, g) if f.tag is Basis.COS else (g, f)
    projected = cos_f.coeffs @ cos_to_sin_matrix(grid.n2).T
    w = grid.parseval_weight(Basis.SIN)
    return float(np.sum(w * (projected * np.conj(sin_g.coeffs)).real))


def l2_norm_sq(f: SpectralField) -> float:
    w = f.grid.parseval_weight(f.tag)
    return float(np.sum(w * np.abs(f.coeffs) ** 2))


def sobolev_seminorms(f: SpectralField) -> tuple[float, float, float]:
    """``(|grad f|^2, |Hess f|^2, |Lap f|^2)`` in ``L^2``.

    The Hessian norm is assembled term by term from explicit derivatives so it
    serves as an independent check on the Laplacian one.
    """
    d1 = ddx1(f)
    d2 = ddx2(f)
    grad = l2_norm_sq(d1) + l2_norm_sq(d2)
    hess = l2_norm_sq(ddx1(d1)) + 2 * l2_norm_sq(ddx1(d2)) + l2_norm_sq(ddx2(d2))
    lap = l2_norm_sq(laplacian(f))
    return grad, hess, lap


def quadrature(values: np.ndarray, grid: Grid) -> float:
    """Trapezoid (``x1``) times midpoint (``x2``) rule on the collocation grid."""
    return float(np.sum(values) * grid.dx1 * grid.dx2)

