"""Self-checks: operator oracles, exact identities, conservation, and the
qualitative experiments (blowup, suppression, full-vs-static, sweeps, mixing).

Each check returns a :class:`CheckResult`; the ``verify`` CLI verb runs the fast
ones (operators, static law, identities, conservation/order).
"""

from __future__ import annotations

import filecmp
import math
import tempfile
import time
from dataclasses import dataclass, field, replace
from pathlib import Path

import numpy as np
from scipy.integrate import trapezoid

from . import oracles
from .chemotaxis import ks_rhs
from .diagnostics import DiagnosticsRecord
from .experiments import (
    DatumSpec,
    RunConfig,
    SweepConfig,
    critical_g,
    critical_mass,
    initial_state,
    run_comparison,
    run_single,
    run_sweep,
)
from .fields import FlowLaw, ModelParams, SimState, l2_norm_sq, sobolev_seminorms
from .integrate import OutcomeKind, integrate
from .spectral import (
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
    to_physical,
    to_spectral,
)
from .velocity import (
    divergence,
    ns_vorticity_rhs,
    static_stokes_velocity,
    velocity_from_stream,
)

__all__ = [
    "CheckResult",
    "REFERENCE_DATUM",
    "bump_datum",
    "check_operators",
    "check_static_law",
    "check_identities",
    "check_conservation_order",
    "check_blowup",
    "check_suppression",
    "check_comparison",
    "check_sweep",
    "check_mixing",
    "dip_pattern",
    "FAST_CHECKS",
]

# Smooth, subcritical datum (rho_m ~ 0.51 < 1, so the uniform state is linearly stable).
REFERENCE_DATUM = DatumSpec(preset="gaussian_bump", mass=10.0, sigma=0.5, x1c=0.5, x2c=1.2)
BUMP_SIGMA = 0.3
BUMP_CENTER = (0.0, math.pi / 2)


def bump_datum(mass: float) -> DatumSpec:
    return DatumSpec(preset="gaussian_bump", mass=mass, sigma=BUMP_SIGMA, x1c=BUMP_CENTER[0], x2c=BUMP_CENTER[1])


@dataclass
class CheckResult:
    name: str
    passed: bool
    detail: str
    metrics: dict = field(default_factory=dict)
    seconds: float = 0.0

    def line(self) -> str:
        return f"{self.name}: {'PASS' if self.passed else 'FAIL'} ({self.detail})"


def _rel(a, b) -> float:
    a = np.asarray(a)
    b = np.asarray(b)
    return float(np.max(np.abs(a - b)) / max(1.0, float(np.max(np.abs(b)))))


def _random_field(grid: Grid, tag: Basis, rng: np.random.Generator) -> SpectralField:
    c = rng.standard_normal(grid.spectral_shape) + 1j * rng.standard_normal(grid.spectral_shape)
    c[0] = c[0].real
    c[-1] = c[-1].real
    return SpectralField(grid, tag, c)


def _timed(fn):
    def wrapper(*args, **kwargs):
        t0 = time.perf_counter()
        res = fn(*args, **kwargs)
        res.seconds = time.perf_counter() - t0
        return res

    wrapper.__name__ = fn.__name__
    wrapper.__doc__ = fn.__doc__
    return wrapper


@_timed
def check_operators(seed: int = 0) -> CheckResult:
    """Linear operators and transforms against dense oracles on 16x9 (1e-12),
    eigenfunction examples exact to 1e-13."""
    grid = Grid(16, 9)
    rng = np.random.default_rng(seed)
    fc = _random_field(grid, Basis.COS, rng)
    fs = _random_field(grid, Basis.SIN, rng)
    errs = {}
    ops = {
        "ddx1_cos": (ddx1, fc),
        "ddx1_sin": (ddx1, fs),
        "ddx2_cos": (ddx2, fc),
        "ddx2_sin": (ddx2, fs),
        "lap_cos": (laplacian, fc),
        "lap_sin": (laplacian, fs),
        "inv_neumann": (inv_laplace_neumann, fc),
        "inv_dirichlet1": (lambda f: inv_laplace_dirichlet(f, 1), fs),
        "inv_dirichlet2": (lambda f: inv_laplace_dirichlet(f, 2), fs),
        "cos_to_sin": (cos_to_sin, fc),
        "dealias_cos": (dealias, fc),
        "dealias_sin": (dealias, fs),
    }
    for name, (op, f) in ops.items():
        errs[name] = _rel(op(f).coeffs, oracles.apply_dense(oracles.dense_operator(name, grid), f.coeffs))
    for tag, f in ((Basis.COS, fc), (Basis.SIN, fs)):
        errs[f"to_physical_{tag.value}"] = _rel(to_physical(f), oracles.direct_to_physical(f))
        values = rng.standard_normal((grid.n1, grid.n2))
        errs[f"to_spectral_{tag.value}"] = _rel(
            to_spectral(values, tag, grid).coeffs, oracles.lstsq_to_spectral(values, tag, grid).coeffs
        )
    x1, x2 = grid.mesh()
    eig = {}
    f = to_spectral(np.cos(x1) * np.cos(x2), Basis.COS, grid)
    eig["neumann_eigen"] = _rel(to_physical(inv_laplace_neumann(f)), 0.5 * np.cos(x1) * np.cos(x2))
    f = to_spectral(np.sin(2 * x1) * np.sin(3 * x2), Basis.SIN, grid)
    eig["dirichlet2_eigen"] = _rel(to_physical(inv_laplace_dirichlet(f, 2)), np.sin(2 * x1) * np.sin(3 * x2) / 169)
    worst_op = max(errs.values())
    worst_eig = max(eig.values())
    passed = worst_op <= 1e-12 and worst_eig <= 1e-13
    return CheckResult(
        "operators",
        passed,
        f"max oracle error {worst_op:.2e} (tol 1e-12), eigen examples {worst_eig:.2e} (tol 1e-13)",
        {**errs, **eig},
    )


@_timed
def check_static_law(seed: int = 0) -> CheckResult:
    """Quasi-static Stokes velocity against the dense coupled solve; boundary
    values, divergence and the Hessian/Laplacian identity."""
    grid = Grid(16, 9)
    x1, x2 = grid.mesh()
    rho = to_spectral(1 + 0.5 * np.cos(x1) * np.cos(x2), Basis.COS, grid)
    u = static_stokes_velocity(rho, 1.0)
    u1, u2 = oracles.static_stokes_dense(rho, 1.0)
    err_dense = max(_rel(u.u1.coeffs, u1), _rel(u.u2.coeffs, u2))

    rng = np.random.default_rng(seed)
    rho_r = dealias(_random_field(grid, Basis.COS, rng))
    ur = static_stokes_velocity(rho_r, 3.0)
    xb = np.linspace(-np.pi, np.pi, 41)
    scale = max(1.0, float(np.max(np.abs(ur.u1.coeffs))))
    bc = max(
        float(np.max(np.abs(evaluate(field_, xb, wall))))
        for field_ in (ur.u2, ddx2(ur.u1))
        for wall in (0.0, np.pi)
    ) / scale
    div = math.sqrt(l2_norm_sq(divergence(ur))) / math.sqrt(ur.l2_norm_sq() + ur.grad_norm_sq())
    h1 = sobolev_seminorms(ur.u1)
    h2 = sobolev_seminorms(ur.u2)
    lem = abs((h1[1] + h2[1]) - (h1[2] + h2[2])) / (h1[2] + h2[2])
    passed = err_dense <= 1e-8 and bc <= 1e-12 and div <= 1e-11 and lem <= 1e-12
    return CheckResult(
        "static law",
        passed,
        f"dense solve {err_dense:.2e}, walls {bc:.2e}, div {div:.2e}, Hess/Lap {lem:.2e}",
        {"dense": err_dense, "boundary": bc, "divergence": div, "lemA3": lem},
    )


def _mass_drift(records: list[DiagnosticsRecord]) -> float:
    return max(abs(r.mass - records[0].mass) / records[0].mass for r in records)


def _identity_metrics(records: list[DiagnosticsRecord]) -> dict:
    ks = max(abs(r.res_ks_energy) / max(r.grad_rho_sq, 1e-300) for r in records)
    pyth = max(abs(2 * math.pi * r.Ebar + r.Etilde - r.E2) / max(r.E2, 1e-300) for r in records)
    cs = all(r.h1neg_sq <= math.sqrt(r.grad_rho_sq * r.mix_sq) * (1 + 1e-12) for r in records)
    lem = max(abs(r.res_lemA3) / max(r.grad_u_sq, 1e-300) for r in records)
    mass = _mass_drift(records)
    return {"ks_energy": ks, "pythagoras": pyth, "cauchy_schwarz": cs, "lemA3": lem, "mass_drift": mass}


@_timed
def check_identities(n1: int = 128, n2: int = 65) -> CheckResult:
    """Per-sample identities over a one-time-unit Navier-Stokes run (g=50, B=100)
    and a parallel quasi-static Stokes run."""
    base = RunConfig(n1=n1, n2=n2, g=50.0, B=100.0, t_end=1.0, datum=REFERENCE_DATUM)
    ns = run_single(base.with_(law=FlowLaw.NAVIER_STOKES))
    st = run_single(base.with_(law=FlowLaw.STATIC_STOKES))
    m = _identity_metrics(ns.records)
    ms = _identity_metrics(st.records)
    static = max(abs(r.res_static_identity) / max(50.0 * r.mix_sq, 1e-300) for r in st.records)
    ns_energy = max(
        abs(r.res_ns_energy) / max(100.0 * r.grad_u_sq + abs(100.0 * 50.0 * r.u_l2_sq), 1e-300) for r in ns.records
    )
    passed = (
        ns.outcome.kind is OutcomeKind.COMPLETED
        and st.outcome.kind is OutcomeKind.COMPLETED
        and static <= 1e-10
        and max(m["ks_energy"], ms["ks_energy"]) <= 1e-8
        and max(m["pythagoras"], ms["pythagoras"]) <= 1e-10
        and m["cauchy_schwarz"]
        and ms["cauchy_schwarz"]
    )
    return CheckResult(
        "identities",
        passed,
        f"static {static:.1e}, ks energy {max(m['ks_energy'], ms['ks_energy']):.1e}, "
        f"pythagoras {max(m['pythagoras'], ms['pythagoras']):.1e}, "
        f"cauchy-schwarz {'ok' if m['cauchy_schwarz'] and ms['cauchy_schwarz'] else 'violated'}, "
        f"{len(ns.records)} samples",
        {
            "mass_drift": max(m["mass_drift"], ms["mass_drift"]),
            "static_identity": static,
            "ns_energy": ns_energy,
            "ns": m,
            "static": ms,
            "outcomes": (ns.outcome.kind.value, st.outcome.kind.value),
        },
    )


def _fixed_step_run(state: SimState, t_end: float, dt: float) -> SimState:
    n = int(round(t_end / dt))
    final, outcome = integrate(state, t_end, dt_sequence=[dt] * n)
    if outcome.kind is not OutcomeKind.COMPLETED:
        raise RuntimeError(f"fixed-step run stopped: {outcome.reason}")
    return final


@_timed
def check_conservation_order(n1: int = 128, n2: int = 65) -> CheckResult:
    """Mass drift, CNAB2 self-convergence order, and spectral tail of a smooth run."""
    cfg = RunConfig(
        n1=n1,
        n2=n2,
        law=FlowLaw.NAVIER_STOKES,
        g=10.0,
        B=100.0,
        t_end=0.5,
        datum=REFERENCE_DATUM,
        omega_init="static",
        dt_min=1e-8,
        dt_max=1.0,
    )
    s0 = initial_state(cfg)
    ref = _fixed_step_run(s0, cfg.t_end, 1.5625e-4)
    dts = (1e-2, 5e-3, 2.5e-3)
    finals = [_fixed_step_run(s0, cfg.t_end, dt) for dt in dts]
    errs = [math.sqrt(l2_norm_sq(f.rho - ref.rho)) for f in finals]
    slope = float(np.polyfit(np.log(dts), np.log(errs), 1)[0])
    pair = [math.log2(errs[i] / errs[i + 1]) for i in range(2)]
    m0 = s0.rho.coeffs[0, 0].real
    drift = max(abs(f.rho.coeffs[0, 0].real - m0) / m0 for f in finals + [ref])
    smooth = run_single(cfg.with_(dt_min=1e-6, dt_max=1e-2, t_end=1.0, omega_init="zero"))
    tail = max(r.tail_frac for r in smooth.records)
    drift = max(drift, _identity_metrics(smooth.records)["mass_drift"])
    order = min([slope] + pair)
    passed = drift <= 1e-8 and order >= 1.8 and tail < 1e-10
    return CheckResult(
        "conservation and order",
        passed,
        f"mass drift {drift:.1e}, order {slope:.3f} (pairwise {pair[0]:.3f}, {pair[1]:.3f}), tail {tail:.1e}",
        {"mass_drift": drift, "order_fit": slope, "order_pairs": pair, "errors": errs, "tail": tail},
    )


FAST_CHECKS = (check_operators, check_static_law, check_identities, check_conservation_order)


# --- experiments ----------------------------------------------------------------


def calibrate_critical_mass(n1: int = 128, n2: int = 65, lo: float = 5.0, hi: float = 60.0, tol: float = 0.05):
    """Bracket of the no-flow blowup threshold in mass for the sigma=0.3 bump (horizon t=1)."""
    cfg = RunConfig(n1=n1, n2=n2, law=FlowLaw.NONE, t_end=1.0, datum=bump_datum(lo))
    return critical_mass(cfg, lo, hi, tol)


@_timed
def check_blowup(critical: float) -> CheckResult:
    """Supercritical bump (3x the critical mass) without flow blows up before t=1
    at two resolutions with consistent blowup times."""
    out = {}
    for n1, n2 in ((128, 65), (192, 97)):
        cfg = RunConfig(n1=n1, n2=n2, law=FlowLaw.NONE, t_end=1.0, datum=bump_datum(3 * critical))
        res = run_single(cfg)
        out[(n1, n2)] = res
    kinds = [r.outcome.kind for r in out.values()]
    times = [r.outcome.t_final for r in out.values()]
    spread = abs(times[0] - times[1]) / max(times)
    min_dt = [min(r.dts) for r in out.values()]
    passed = all(k is OutcomeKind.BLOWUP for k in kinds) and max(times) < 1.0 and spread <= 0.1
    return CheckResult(
        "blowup without flow",
        passed,
        f"critical mass {critical:.4g}; t* = {times[0]:.5g} (128x65), {times[1]:.5g} (192x97), spread {spread:.1%}",
        {
            "critical_mass": critical,
            "kinds": [k.value for k in kinds],
            "t_star": times,
            "spread": spread,
            "reasons": [r.outcome.reason for r in out.values()],
            "min_dt": min_dt,
            "mass_drift": max(_mass_drift(r.records) for r in out.values()),
        },
    )


def dip_pattern(times, e2, fraction: float = 0.5) -> tuple[bool, list]:
    """Stabilize-then-dip test on an ``E2`` series.

    With ``M(t)`` the running maximum, every up-crossing of ``fraction * M`` must
    be followed by a later sample with ``E2 <= fraction * M``, and at least one
    such dip must occur.  Returns ``(ok, events)`` where events are
    ``(t_up, t_dip or None)``.
    """
    e2 = np.asarray(e2, dtype=float)
    running = np.maximum.accumulate(e2)
    below = e2 <= fraction * running
    events = []
    dips = 0
    i = 1
    n = len(e2)
    while i < n:
        if below[i - 1] and not below[i]:
            j = i + 1
            while j < n and not below[j]:
                j += 1
            events.append((float(times[i]), float(times[j]) if j < n else None))
            i = j
        else:
            if below[i] and not below[i - 1]:
                dips += 1
            i += 1
    dips += sum(1 for _, t in events if t is not None)
    ok = dips >= 1 and all(t is not None for _, t in events)
    return ok, events


def calibrate_g_star(critical: float, n1: int = 128, n2: int = 65, ratio: float = 1.05):
    """Bracket of the buoyancy needed for the quasi-static Stokes flow to carry the
    supercritical bump to t=10 without blowup."""
    cfg = RunConfig(n1=n1, n2=n2, law=FlowLaw.STATIC_STOKES, t_end=10.0, datum=bump_datum(3 * critical))
    return critical_g(cfg, 1.0, 1e3, ratio)


@_timed
def check_suppression(critical: float, g_star: float) -> CheckResult:
    """Quasi-static Stokes at g* carries the supercritical bump to t=10 with the
    stabilize-then-dip pattern of E2."""
    cfg = RunConfig(law=FlowLaw.STATIC_STOKES, g=g_star, t_end=10.0, datum=bump_datum(3 * critical))
    res = run_single(cfg)
    t = [r.t for r in res.records]
    e2 = [r.E2 for r in res.records]
    sup = max(e2)
    ok_dip, events = dip_pattern(t, e2)
    completed = res.outcome.kind is OutcomeKind.COMPLETED
    low = min(e2[i] / max(e2[: i + 1]) for i in range(len(e2)))
    passed = completed and math.isfinite(sup) and ok_dip
    return CheckResult(
        "suppression by static flow",
        passed,
        f"g* = {g_star:.4g}, outcome {res.outcome.kind.value}, sup E2 {sup:.4g}, "
        f"lowest E2/running max {low:.3f} (dip needs <= 0.5)",
        {
            "g_star": g_star,
            "sup_E2": sup,
            "events": events,
            "min_ratio": low,
            "E2_final": e2[-1],
            "mass_drift": _mass_drift(res.records),
        },
    )


@_timed
def check_comparison(B_values=(10.0, 100.0, 1000.0)) -> CheckResult:
    """sup_t |rho_NS - rho_static|^2 strictly decreasing in B at g=50."""
    cfg = RunConfig(law=FlowLaw.NAVIER_STOKES, g=50.0, t_end=1.0, datum=REFERENCE_DATUM)
    summary = run_comparison(cfg, B_values)
    sups = [e["sup_r_sq"] for e in summary]
    passed = all(a > b for a, b in zip(sups, sups[1:])) and all(
        e["outcome_full"] == e["outcome_static"] == OutcomeKind.COMPLETED.value for e in summary
    )
    return CheckResult(
        "full vs static",
        passed,
        "sup |r|^2 = " + ", ".join(f"{s:.3e} (B={B:g})" for s, B in zip(sups, B_values)),
        {"sup_r_sq": sups, "B": list(B_values)},
    )


SWEEP_G = (50.0, 100.0, 200.0, 400.0)
SWEEP_B = (10.0, 100.0, 1000.0, 10000.0)


@_timed
def check_sweep(critical: float, g_star: float, t_end: float = 0.5) -> CheckResult:
    """4x4 (g, B) sweep: monotone in B for g >= g*, byte-identical across worker counts."""
    base = RunConfig(law=FlowLaw.NAVIER_STOKES, t_end=t_end, datum=bump_datum(3 * critical), sample_every=50)
    with tempfile.TemporaryDirectory() as tmp:
        rows = run_sweep(SweepConfig(base, SWEEP_G, SWEEP_B, workers=1), Path(tmp) / "w1")
        run_sweep(SweepConfig(base, SWEEP_G, SWEEP_B, workers=2), Path(tmp) / "w2")
        same = filecmp.cmp(Path(tmp) / "w1" / "sweep.csv", Path(tmp) / "w2" / "sweep.csv", shallow=False)
    table = {(r[0], r[1]): r[2] for r in rows}
    violations = []
    for g in SWEEP_G:
        if g < g_star:
            continue
        seen_completed = False
        for B in SWEEP_B:
            done = table[(g, B)] == OutcomeKind.COMPLETED.value
            if seen_completed and not done:
                violations.append((g, B, table[(g, B)]))
            seen_completed |= done
    checked = [g for g in SWEEP_G if g >= g_star]
    passed = same and not violations and bool(checked)
    grid_txt = "; ".join(
        f"g={g:g}: " + "".join("C" if table[(g, B)] == "CompletedHorizon" else table[(g, B)][0] for B in SWEEP_B)
        for g in SWEEP_G
    )
    return CheckResult(
        "regime sweep",
        passed,
        f"{grid_txt} (B ascending); columns g >= {g_star:.4g} monotone: {not violations}; byte-identical: {same}",
        {"table": {f"{g:g},{B:g}": v for (g, B), v in table.items()}, "violations": violations, "identical": same},
    )


@_timed
def check_mixing(g_values=(25.0, 50.0, 100.0)) -> CheckResult:
    """Time integral of the mixing norm over [0, 1] strictly decreasing in g."""
    vals = []
    drift = 0.0
    for g in g_values:
        res = run_single(RunConfig(law=FlowLaw.STATIC_STOKES, g=g, t_end=1.0, datum=REFERENCE_DATUM))
        drift = max(drift, _mass_drift(res.records))
        t = np.array([r.t for r in res.records])
        m = np.array([r.mix_sq for r in res.records])
        vals.append(float(trapezoid(m, t)))
    passed = all(a > b for a, b in zip(vals, vals[1:]))
    return CheckResult(
        "mixing norm",
        passed,
        "int mix_sq = " + ", ".join(f"{v:.4f} (g={g:g})" for v, g in zip(vals, g_values)),
        {"integrals": vals, "g": list(g_values), "mass_drift": drift},
    )
