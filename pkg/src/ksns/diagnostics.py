"""Per-sample norms, identity residuals, and the CSV sink."""

from __future__ import annotations

import csv
import math
from dataclasses import astuple, dataclass, fields
from pathlib import Path
from typing import Iterable, Sequence

import numpy as np

from .chemotaxis import ks_rhs
from .fields import FlowLaw, SimState, inner, l2_norm_sq, mean, quadrature, sobolev_seminorms
from .integrate import fluctuation_energy, tail_fraction
from .spectral import Basis, cos_to_sin, ddx1, inv_laplace_dirichlet, to_physical
from .velocity import ns_vorticity_rhs, stream_from_vorticity, velocity_of

__all__ = [
    "DiagnosticsRecord",
    "FIELD_NAMES",
    "sample",
    "doubling_report",
    "write_csv",
    "read_csv",
    "CsvSink",
]


@dataclass(frozen=True)
class DiagnosticsRecord:
    t: float
    mass: float
    rho_m: float
    min_rho: float
    rho_inf: float
    E2: float
    grad_rho_sq: float
    Ebar: float
    Etilde: float
    mix_sq: float
    h1neg_sq: float
    u_l2_sq: float
    grad_u_sq: float
    u_inf: float
    res_ks_energy: float
    res_ns_energy: float
    res_static_identity: float
    res_lemA3: float
    dt: float
    tail_frac: float
    moment_x2: float

    def is_finite(self) -> bool:
        return all(math.isfinite(v) for v in astuple(self) if not math.isnan(v))


FIELD_NAMES: tuple[str, ...] = tuple(f.name for f in fields(DiagnosticsRecord))


def _energy_terms(state: SimState, u, rho_phys: np.ndarray) -> tuple[float, float, float]:
    """Return ``(<rhs, rho - rho_m>, |grad rho|^2, 1/2 int rho^2 (rho - rho_m))``.

    The cubic term is evaluated by grid quadrature, which is exact for
    band-limited (dealiased) densities.
    """
    rho = state.rho
    rho_m = mean(rho)
    c = rho.coeffs.copy()
    c[0, 0] = 0.0
    tilde = rho._like(c)
    pairing = inner(ks_rhs(state, u), tilde)
    grad_sq = sobolev_seminorms(rho)[0]
    cubic = 0.5 * quadrature(rho_phys**2 * (rho_phys - rho_m), state.grid)
    return pairing, grad_sq, cubic


def sample(state: SimState, prev: DiagnosticsRecord | None = None, dt: float | None = None) -> DiagnosticsRecord:
    """Evaluate every tracked norm and residual at ``state``.

    ``dt`` is the step that produced ``state``; when omitted it is inferred from
    ``prev`` (or ``nan`` for the first sample).
    """
    p = state.params
    grid = state.grid
    rho = state.rho
    rho_m = mean(rho)
    rho_phys = to_physical(rho)
    law = p.law

    coeffs = rho.coeffs
    e2 = fluctuation_energy(rho)
    ebar = float(np.sum(np.abs(coeffs[0, 1:]) ** 2) * (math.pi / 2))
    etilde = _etilde(rho)

    forcing = cos_to_sin(ddx1(rho))
    mix = inv_laplace_dirichlet(forcing, 1)
    mix_sq = l2_norm_sq(mix)
    h1neg_sq = inner(forcing, mix)

    u = velocity_of(state)
    u_l2 = u.l2_norm_sq()
    g1, h1, l1 = sobolev_seminorms(u.u1)
    g2, h2, l2 = sobolev_seminorms(u.u2)
    grad_u = g1 + g2
    res_lem = (h1 + h2) - (l1 + l2)
    u_inf = u.sup_norm()

    pairing, grad_rho_sq, cubic = _energy_terms(state, u, rho_phys)
    res_ks = pairing + grad_rho_sq - cubic

    rho_u2 = inner(rho, u.u2)
    res_ns = math.nan
    if law is FlowLaw.NAVIER_STOKES:
        psi = stream_from_vorticity(state.omega)
        dudt_u = -inner(ns_vorticity_rhs(state), psi)
        res_ns = dudt_u + p.B * grad_u - p.B * p.g * rho_u2
    res_static = math.nan
    if law is FlowLaw.STATIC_STOKES:
        res_static = p.g * mix_sq - rho_u2

    if dt is None:
        dt = state.t - prev.t if prev is not None else math.nan

    x2 = grid.x2[None, :]
    return DiagnosticsRecord(
        t=float(state.t),
        mass=float(rho_m * grid.area),
        rho_m=rho_m,
        min_rho=float(np.min(rho_phys)),
        rho_inf=float(np.max(np.abs(rho_phys - rho_m))),
        E2=e2,
        grad_rho_sq=grad_rho_sq,
        Ebar=ebar,
        Etilde=etilde,
        mix_sq=mix_sq,
        h1neg_sq=h1neg_sq,
        u_l2_sq=u_l2,
        grad_u_sq=grad_u,
        u_inf=u_inf,
        res_ks_energy=res_ks,
        res_ns_energy=res_ns,
        res_static_identity=res_static,
        res_lemA3=res_lem,
        dt=float(dt),
        tail_frac=tail_fraction(rho),
        moment_x2=quadrature(x2 * rho_phys, grid),
    )


def _etilde(rho) -> float:
    c = rho.coeffs.copy()
    c[0] = 0.0
    return l2_norm_sq(rho._like(c))


def _crossing(t0, e0, t1, e1, level):
    """Time at which the segment from (t0, e0) to (t1, e1) reaches ``level``.

    Interpolates linearly in ``log E`` when both endpoints are positive, so that
    exponential growth is located exactly.
    """
    if e1 == e0:
        return t1
    if e0 > 0 and e1 > 0 and level > 0:
        s = (math.log(level) - math.log(e0)) / (math.log(e1) - math.log(e0))
    else:
        s = (level - e0) / (e1 - e0)
    return t0 + min(max(s, 0.0), 1.0) * (t1 - t0)


def doubling_report(series: Sequence[DiagnosticsRecord], level: float) -> list[tuple[float, float | None]]:
    """For each up-crossing of ``E2`` through ``level``, the time to reach ``2 level``.

    Returns ``(t_hit, t_double)`` pairs; ``t_double`` is ``None`` when ``E2`` never
    reaches twice the level afterwards.
    """
    if len(series) == 0:
        raise ValueError("empty series")
    t = [r.t for r in series]
    e = [r.E2 for r in series]
    if any(b < a for a, b in zip(t, t[1:])):
        raise ValueError("series times must be nondecreasing")
    out = []
    for i in range(1, len(e)):
        if e[i - 1] < level <= e[i]:
            t_hit = _crossing(t[i - 1], e[i - 1], t[i], e[i], level)
            t_double = None
            for j in range(i, len(e)):
                if e[j] >= 2 * level:
                    lo = max(j - 1, i - 1)
                    if e[lo] >= 2 * level:
                        t_cross = t[lo]
                    else:
                        t_cross = _crossing(t[lo], e[lo], t[j], e[j], 2 * level)
                    t_double = t_cross - t_hit
                    break
            out.append((t_hit, t_double))
    return out


def _fmt(v: float) -> str:
    return repr(float(v))


class CsvSink:
    """Append-only writer that flushes each row as it arrives."""

    def __init__(self, path: str | Path):
        self.path = Path(path)
        self._fh = open(self.path, "w", encoding="utf-8", newline="")
        self._writer = csv.writer(self._fh, lineterminator="\n")
        self._writer.writerow(FIELD_NAMES)
        self._fh.flush()

    def append(self, rec: DiagnosticsRecord):
        self._writer.writerow([_fmt(v) for v in astuple(rec)])
        self._fh.flush()

    def close(self):
        self._fh.close()

    def __enter__(self):
        return self

    def __exit__(self, *exc):
        self.close()


def write_csv(records: Iterable[DiagnosticsRecord], path: str | Path) -> None:
    with CsvSink(path) as sink:
        for rec in records:
            sink.append(rec)


def read_csv(path: str | Path) -> list[DiagnosticsRecord]:
    with open(path, encoding="utf-8", newline="") as fh:
        reader = csv.reader(fh)
        try:
            header = next(reader)
        except StopIteration as exc:
            raise ValueError(f"{path}: missing header") from exc
        if tuple(header) != FIELD_NAMES:
            raise ValueError(f"{path}: malformed header {header!r}")
        return [DiagnosticsRecord(*map(float, row)) for row in reader if row]
