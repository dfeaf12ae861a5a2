"""IMEX time stepping, step-size control, blowup detection and checkpoints."""

from __future__ import annotations

import enum
import logging
import struct
from dataclasses import dataclass, field
from typing import Callable, Iterable

import numpy as np

from .chemotaxis import chem_potential, ks_nonlinear
from .fields import FlowLaw, ModelParams, Scheme, SimState, l2_norm_sq, mean
from .spectral import Basis, Grid, SpectralField, ddx1, ddx2, to_physical
from .velocity import Velocity, ns_vorticity_nonlinear, velocity_of

__all__ = [
    "StepController",
    "OutcomeKind",
    "RunOutcome",
    "Detector",
    "step",
    "choose_dt",
    "tail_fraction",
    "fluctuation_energy",
    "integrate",
    "CheckpointError",
    "checkpoint_save",
    "checkpoint_load",
]

log = logging.getLogger(__name__)


@dataclass
class StepController:
    """Step size, bounds, scheme, and the Adams-Bashforth history."""

    dt: float
    dt_min: float
    dt_max: float
    cfl_safety: float = 0.2
    scheme: Scheme = Scheme.IMEX_CNAB2
    history: tuple | None = field(default=None, repr=False)

    def __post_init__(self):
        if not 0 < self.dt_min <= self.dt_max:
            raise ValueError("need 0 < dt_min <= dt_max")
        self.dt = float(np.clip(self.dt, self.dt_min, self.dt_max))

    @classmethod
    def from_params(cls, params: ModelParams) -> "StepController":
        return cls(params.dt_init, params.dt_min, params.dt_max, params.cfl_safety, params.scheme)

    def reset(self):
        self.history = None


class OutcomeKind(enum.Enum):
    COMPLETED = "CompletedHorizon"
    BLOWUP = "BlowupDetected"
    RESOLUTION_LOSS = "ResolutionLoss"


@dataclass(frozen=True)
class RunOutcome:
    kind: OutcomeKind
    t_final: float
    reason: str = ""
    metric: str | None = None
    value: float | None = None

    def to_dict(self) -> dict:
        return {
            "kind": self.kind.value,
            "t_final": self.t_final,
            "reason": self.reason,
            "metric": self.metric,
            "value": self.value,
        }


def _explicit_terms(state: SimState, u: Velocity | None = None):
    if u is None:
        u = velocity_of(state)
    n_rho = ks_nonlinear(state.rho, u)
    n_omega = None
    if state.params.law is FlowLaw.NAVIER_STOKES:
        p = state.params
        n_omega = ns_vorticity_nonlinear(state.omega, state.rho, u, p.B, p.g)
    return n_rho, n_omega


def _bdf2_vorticity(omega, n_omega, history, dt, visc):
    """Variable-step IMEX BDF2 for the vorticity (backward Euler on the first step).

    Crank-Nicolson leaves modes with ``dt B |k|^2 >> 1`` undamped (amplification
    tends to -1), and at large ``B`` the extrapolated buoyancy coupling then
    feeds a growing oscillation.  BDF2 is L-stable and still second order.
    """
    if history is None:
        return (omega + dt * n_omega) / (1 + dt * visc)
    _, prev_n, omega_prev, dt_prev = history
    r = dt / dt_prev
    explicit = (1 + r) * n_omega - r * prev_n
    rhs = (1 + r) * omega - (r * r / (1 + r)) * omega_prev + dt * explicit
    return rhs / ((1 + 2 * r) / (1 + r) + dt * visc)


def step(state: SimState, ctrl: StepController, *, nonlinear: bool = True) -> SimState:
    """Advance one step of size ``ctrl.dt``.

    Diffusion (and viscosity) is implicit and diagonal; transport, aggregation,
    and buoyancy are explicit.  Under ``ImexCNAB2`` the density uses
    Crank-Nicolson / Adams-Bashforth and the vorticity the L-stable BDF2 variant
    (see :func:`_bdf2_vorticity`); both extrapolate explicit terms to second
    order with the variable-step ratio ``dt / dt_prev``.  Quasi-static
    velocities are re-evaluated from the current density.  ``nonlinear=False``
    drops every explicit term (pure heat flow), which is only meant for testing
    the implicit factor.
    """
    dt = ctrl.dt
    p = state.params
    ns = p.law is FlowLaw.NAVIER_STOKES
    grid = state.grid
    if nonlinear:
        n_rho, n_omega = _explicit_terms(state)
        n_rho = n_rho.coeffs
        n_omega = n_omega.coeffs if ns else None
    else:
        n_rho = np.zeros(grid.spectral_shape, dtype=complex)
        n_omega = np.zeros_like(n_rho) if ns else None

    ksq_c = grid.ksq(Basis.COS)
    ksq_s = grid.ksq(Basis.SIN)
    rho = state.rho.coeffs
    omega = state.omega.coeffs if ns else None

    if ctrl.scheme is Scheme.IMEX_EULER:
        new_rho = (rho + dt * n_rho) / (1 + dt * ksq_c)
        new_omega = (omega + dt * n_omega) / (1 + dt * p.B * ksq_s) if ns else None
    else:
        if ctrl.history is None:
            e_rho = n_rho
        else:
            prev_rho, prev_omega, omega_prev, dt_prev = ctrl.history
            r = dt / dt_prev
            e_rho = (1 + r / 2) * n_rho - (r / 2) * prev_rho
        half = 0.5 * dt * ksq_c
        new_rho = ((1 - half) * rho + dt * e_rho) / (1 + half)
        new_omega = _bdf2_vorticity(omega, n_omega, ctrl.history, dt, p.B * ksq_s) if ns else None
        ctrl.history = (n_rho, n_omega, omega, dt)

    rho_f = SpectralField(grid, Basis.COS, new_rho)
    omega_f = SpectralField(grid, Basis.SIN, new_omega) if ns else None
    return state.advanced(state.t + dt, rho_f, omega_f)


def choose_dt(state: SimState, ctrl: StepController) -> float:
    """Advective CFL bound with the chemotactic drift ``grad c`` counted as a velocity."""
    grid = state.grid
    u = velocity_of(state)
    c = chem_potential(state.rho)
    speeds = (
        (grid.dx1, u.u1),
        (grid.dx2, u.u2),
        (grid.dx1, ddx1(c)),
        (grid.dx2, ddx2(c)),
    )
    dt = ctrl.dt_max
    for dx, f in speeds:
        if not np.any(f.coeffs):
            continue
        vmax = float(np.max(np.abs(to_physical(f))))
        if not np.isfinite(vmax):
            return ctrl.dt_min
        if vmax > 0:
            dt = min(dt, ctrl.cfl_safety * dx / vmax)
    return float(np.clip(dt, ctrl.dt_min, ctrl.dt_max))


def fluctuation_energy(rho: SpectralField) -> float:
    """``|rho - rho_m|^2`` in ``L^2``."""
    c = rho.coeffs.copy()
    c[0, 0] = 0.0
    return l2_norm_sq(rho._like(c))


def tail_fraction(rho: SpectralField) -> float:
    """Share of fluctuation energy in the outer third of the retained band.

    The retained band is the 2/3-rule rectangle; "outer third" means normalized
    radius ``sqrt((k1/K1)^2 + (k2/K2)^2) > 2/3``.
    """
    grid = rho.grid
    k1max = grid.n1 / 3
    k2max = 2 * grid.n2 / 3
    radius = np.sqrt((grid.k1 / k1max) ** 2 + (grid.k2(rho.tag) / k2max) ** 2)
    outer = grid.dealias_mask(rho.tag) & (radius > 2 / 3)
    energy = grid.parseval_weight(rho.tag) * np.abs(rho.coeffs) ** 2
    mean_energy = float(energy[0, 0])
    energy[0, 0] = 0.0
    total = float(np.sum(energy))
    # Fluctuations at roundoff level around a constant carry no resolution information.
    if total <= 1e-20 * mean_energy or total <= 0:
        return 0.0
    return float(np.sum(energy[outer]) / total)


class Detector:
    """Stateful blowup / resolution-loss monitor for one trajectory.

    Blowup: non-finite coefficients, grid-sup of ``rho`` above ``rho_inf_max``, or
    the step size pinned at ``dt_min`` for ``pin_steps`` consecutive steps while
    ``|rho - rho_m|^2`` keeps growing.  Resolution loss: :func:`tail_fraction`
    above ``tail_frac_max`` at a step where ``|rho - rho_m|^2`` did not grow.
    This is an engineering proxy for a finite-time singularity, not a certificate.
    """

    def __init__(self, params: ModelParams):
        self.params = params
        self.pinned = 0
        self.last_e2: float | None = None

    def __call__(self, state: SimState, dt: float | None = None) -> RunOutcome | None:
        p = self.params
        t = state.t
        fields = [state.rho] + ([state.omega] if state.omega is not None else [])
        if not all(f.is_finite() for f in fields):
            return RunOutcome(OutcomeKind.BLOWUP, t, "non-finite coefficients", "finite", float("nan"))
        rho_inf = float(np.max(np.abs(to_physical(state.rho))))
        if rho_inf > p.rho_inf_max:
            return RunOutcome(
                OutcomeKind.BLOWUP, t, f"|rho|_inf = {rho_inf:.6g} > {p.rho_inf_max:.6g}", "rho_inf", rho_inf
            )
        e2 = fluctuation_energy(state.rho)
        growing = self.last_e2 is not None and e2 > self.last_e2
        if dt is not None:
            if dt <= p.dt_min * (1 + 1e-12) and growing:
                self.pinned += 1
            else:
                self.pinned = 0
            if self.pinned >= p.pin_steps:
                return RunOutcome(
                    OutcomeKind.BLOWUP,
                    t,
                    f"dt pinned at dt_min for {self.pinned} steps with growing E2",
                    "E2",
                    e2,
                )
        self.last_e2 = e2
        tail = tail_fraction(state.rho)
        # A collapsing solution necessarily saturates the tail; while E2 keeps
        # growing the blowup criteria above get to decide.
        if tail > p.tail_frac_max and not growing:
            return RunOutcome(
                OutcomeKind.RESOLUTION_LOSS,
                t,
                f"spectral tail fraction {tail:.3g} > {p.tail_frac_max:.3g}",
                "tail_frac",
                tail,
            )
        return None


def detect(state: SimState, params: ModelParams | None = None) -> RunOutcome | None:
    """Memoryless check (no step-size history)."""
    return Detector(params or state.params)(state)


def integrate(
    state: SimState,
    t_end: float,
    *,
    ctrl: StepController | None = None,
    detector: Detector | None = None,
    on_step: Callable[[SimState, float, int], None] | None = None,
    dt_sequence: Iterable[float] | None = None,
    max_steps: int | None = None,
) -> tuple[SimState, RunOutcome]:
    """March ``state`` to ``t_end`` or until the detector fires.

    ``on_step(state, dt, n)`` is called after every accepted step (and once at the
    start with ``n = 0``, ``dt = nan``).  ``dt_sequence`` replaces the adaptive
    controller with a prescribed list of step sizes.
    """
    ctrl = ctrl or StepController.from_params(state.params)
    detector = detector or Detector(state.params)
    if on_step is not None:
        on_step(state, float("nan"), 0)
    outcome = detector(state)
    if outcome is not None:
        return state, outcome
    forced = iter(dt_sequence) if dt_sequence is not None else None
    n = 0
    eps = 1e-12 * max(1.0, abs(t_end))
    while state.t < t_end - eps:
        if max_steps is not None and n >= max_steps:
            break
        if forced is not None:
            try:
                dt = float(next(forced))
            except StopIteration:
                break
        else:
            dt = choose_dt(state, ctrl)
            remaining = t_end - state.t
            if dt >= remaining or remaining - dt < 1e-3 * dt:
                dt = remaining
        ctrl.dt = dt
        state = step(state, ctrl)
        n += 1
        if on_step is not None:
            on_step(state, dt, n)
        outcome = detector(state, dt)
        if outcome is not None:
            log.info("detector stop at t=%.6g: %s", state.t, outcome.reason)
            return state, outcome
    return state, RunOutcome(OutcomeKind.COMPLETED, state.t, "reached t_end")


MAGIC = b"KSNS"
VERSION = 1
_HEADER = struct.Struct("<4sBIIBddd")


class CheckpointError(ValueError):
    pass


def _pack_coeffs(f: SpectralField) -> bytes:
    c = np.ascontiguousarray(f.coeffs, dtype="<c16")
    return c.tobytes(order="C")


def checkpoint_save(state: SimState) -> bytes:
    """Serialize to the little-endian ``KSNS`` v1 layout.

    Header: magic, version byte, u32 n1, u32 n2, u8 variant, f64 t, g, B; then
    density coefficients as interleaved (re, im) f64, ``k1``-major, then vorticity
    coefficients for the Navier-Stokes law.
    """
    p = state.params
    head = _HEADER.pack(MAGIC, VERSION, p.grid.n1, p.grid.n2, int(p.law), state.t, p.g, p.B)
    body = _pack_coeffs(state.rho)
    if p.law is FlowLaw.NAVIER_STOKES:
        body += _pack_coeffs(state.omega)
    return head + body


def checkpoint_load(data: bytes, template: ModelParams | None = None) -> SimState:
    """Inverse of :func:`checkpoint_save`.

    Step-policy and detector settings are not part of the format; they are taken
    from ``template`` when given, otherwise from :class:`ModelParams` defaults.
    """
    if len(data) < _HEADER.size:
        raise CheckpointError("truncated checkpoint header")
    magic, version, n1, n2, variant, t, g, B = _HEADER.unpack_from(data)
    if magic != MAGIC:
        raise CheckpointError(f"bad magic {magic!r}")
    if version != VERSION:
        raise CheckpointError(f"unsupported checkpoint version {version}")
    try:
        law = FlowLaw(variant)
    except ValueError as exc:
        raise CheckpointError(f"unknown variant code {variant}") from exc
    grid = Grid(n1, n2)
    count = (n1 // 2 + 1) * n2
    nfields = 2 if law is FlowLaw.NAVIER_STOKES else 1
    expected = _HEADER.size + nfields * count * 16
    if len(data) != expected:
        raise CheckpointError(f"checkpoint has {len(data)} bytes, expected {expected}")

    def read(offset):
        arr = np.frombuffer(data, dtype="<c16", count=count, offset=offset)
        return arr.reshape(grid.spectral_shape).astype(complex)

    if template is None:
        params = ModelParams(g=g, B=B, grid=grid, law=law)
    else:
        params = template.with_(g=g, B=B, grid=grid, law=law)
    rho = SpectralField(grid, Basis.COS, read(_HEADER.size))
    omega = SpectralField(grid, Basis.SIN, read(_HEADER.size + count * 16)) if nfields == 2 else None
    return SimState(t, rho, params, omega)

