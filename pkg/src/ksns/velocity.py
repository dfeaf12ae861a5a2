"""Velocity closures and stream-function recovery under the Lions condition.

Conventions: ``perp_grad = (-d2, d1)``, ``u = perp_grad psi``, ``omega = perp_grad . u``,
so ``Lap psi = omega``.  The stream function and vorticity are Dirichlet (SinY);
``u1`` is CosY and ``u2`` is SinY, which puts ``u2 = 0`` and ``d2 u1 = 0`` on the walls.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .fields import FlowLaw, SimState, l2_norm_sq, sobolev_seminorms
from .spectral import (
    Basis,
    Grid,
    SpectralField,
    cos_to_sin,
    ddx1,
    ddx2,
    inv_laplace_dirichlet,
    flux_divergence,
    laplacian,
    to_physical,
)

__all__ = [
    "Velocity",
    "velocity_from_stream",
    "stream_from_vorticity",
    "static_stokes_stream",
    "static_stokes_velocity",
    "darcy_velocity",
    "velocity_of",
    "vorticity_of",
    "divergence",
    "ns_vorticity_rhs",
    "ns_vorticity_nonlinear",
]


@dataclass(frozen=True)
class Velocity:
    u1: SpectralField
    u2: SpectralField

    def __post_init__(self):
        if self.u1.tag is not Basis.COS or self.u2.tag is not Basis.SIN:
            raise ValueError("velocity components must be (CosY, SinY)")

    @classmethod
    def zero(cls, grid: Grid) -> "Velocity":
        return cls(grid.zeros(Basis.COS), grid.zeros(Basis.SIN))

    def __sub__(self, other: "Velocity") -> "Velocity":
        return Velocity(self.u1 - other.u1, self.u2 - other.u2)

    def l2_norm_sq(self) -> float:
        return l2_norm_sq(self.u1) + l2_norm_sq(self.u2)

    def grad_norm_sq(self) -> float:
        return sobolev_seminorms(self.u1)[0] + sobolev_seminorms(self.u2)[0]

    def sup_norm(self) -> float:
        a = to_physical(self.u1)
        b = to_physical(self.u2)
        return float(np.sqrt(np.max(a * a + b * b)))


def velocity_from_stream(psi: SpectralField) -> Velocity:
    if psi.tag is not Basis.SIN:
        raise ValueError("stream function must be a SinY field")
    return Velocity(-ddx2(psi), ddx1(psi))


def vorticity_of(u: Velocity) -> SpectralField:
    """``omega = -d2 u1 + d1 u2`` (SinY)."""
    return -ddx2(u.u1) + ddx1(u.u2)


def divergence(u: Velocity) -> SpectralField:
    return ddx1(u.u1) + ddx2(u.u2)


def stream_from_vorticity(omega: SpectralField) -> SpectralField:
    """Solve ``Lap psi = omega`` with ``psi = 0`` on the walls."""
    return -inv_laplace_dirichlet(omega, 1)


def static_stokes_stream(rho: SpectralField, g: float) -> SpectralField:
    """``psi = -g (-Lap_D)^{-2} d1 rho``."""
    return -g * inv_laplace_dirichlet(cos_to_sin(ddx1(rho)), 2)


def static_stokes_velocity(rho: SpectralField, g: float) -> Velocity:
    """Quasi-static Stokes law ``u = -g perp_grad (-Lap_D)^{-2} d1 rho``."""
    return velocity_from_stream(static_stokes_stream(rho, g))


def darcy_velocity(rho: SpectralField, g: float) -> Velocity:
    """Darcy law ``u = g perp_grad (-Lap_D)^{-1} d1 rho`` (sign as in the Darcy model)."""
    return velocity_from_stream(g * inv_laplace_dirichlet(cos_to_sin(ddx1(rho)), 1))


def velocity_of(state: SimState) -> Velocity:
    law = state.params.law
    if law is FlowLaw.NONE:
        return Velocity.zero(state.grid)
    if law is FlowLaw.DARCY:
        return darcy_velocity(state.rho, state.params.g)
    if law is FlowLaw.STATIC_STOKES:
        return static_stokes_velocity(state.rho, state.params.g)
    return velocity_from_stream(stream_from_vorticity(state.omega))


def ns_vorticity_nonlinear(omega: SpectralField, rho: SpectralField, u: Velocity, B: float, g: float):
    """Explicit part of the vorticity equation: ``-u . grad omega + B g P(d1 rho)``."""
    advection = flux_divergence(omega, u.u1, u.u2)
    return B * g * cos_to_sin(ddx1(rho)) - advection


def ns_vorticity_rhs(state: SimState) -> SpectralField:
    """Full vorticity tendency ``-u . grad omega + B Lap omega + B g d1 rho``."""
    if state.omega is None:
        raise ValueError("state carries no vorticity")
    p = state.params
    u = velocity_from_stream(stream_from_vorticity(state.omega))
    return ns_vorticity_nonlinear(state.omega, state.rho, u, p.B, p.g) + p.B * laplacian(state.omega)
