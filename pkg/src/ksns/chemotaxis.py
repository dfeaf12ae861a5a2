"""Keller-Segel right-hand side with an arbitrary divergence-free advecting flow."""

from __future__ import annotations

from .fields import SimState
from .spectral import SpectralField, ddx1, ddx2, flux_divergence, inv_laplace_neumann, laplacian
from .velocity import Velocity

__all__ = ["chem_potential", "ks_nonlinear", "ks_rhs"]


def chem_potential(rho: SpectralField) -> SpectralField:
    """``c = (-Lap_N)^{-1} (rho - rho_m)``; mean zero, Neumann parity."""
    return inv_laplace_neumann(rho)


def ks_nonlinear(rho: SpectralField, u: Velocity) -> SpectralField:
    """Transport and aggregation: ``-div(rho (u + grad c))``.

    Written in divergence form so the mean coefficient is untouched exactly;
    ``u . grad rho = div(rho u)`` because ``u`` is solenoidal.
    """
    c = chem_potential(rho)
    return -flux_divergence(rho, u.u1 + ddx1(c), u.u2 + ddx2(c))


def ks_rhs(state: SimState, u: Velocity) -> SpectralField:
    """``d_t rho = -u . grad rho + Lap rho - div(rho grad c)``."""
    if u.u1.grid != state.grid:
        raise ValueError("grid mismatch between velocity and state")
    return ks_nonlinear(state.rho, u) + laplacian(state.rho)
