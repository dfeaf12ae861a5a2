"""Configured runs: datum presets, single runs, full-vs-static comparison, sweeps."""

from __future__ import annotations

import concurrent.futures as cf
import configparser
import csv
import json
import logging
import math
from dataclasses import asdict, dataclass, field, replace
from pathlib import Path
from typing import Sequence

import numpy as np

from .diagnostics import CsvSink, DiagnosticsRecord, sample
from .fields import FlowLaw, ModelParams, Scheme, SimState, l2_norm_sq
from .integrate import (
    Detector,
    OutcomeKind,
    RunOutcome,
    StepController,
    checkpoint_save,
    choose_dt,
    fluctuation_energy,
    integrate,
    step,
)
from .spectral import Basis, Grid, SpectralField, dealias, to_physical, to_spectral
from .velocity import static_stokes_velocity, velocity_of, vorticity_of

__all__ = [
    "ConfigError",
    "DatumSpec",
    "RunConfig",
    "SweepConfig",
    "make_datum",
    "initial_state",
    "load_config",
    "parse_config",
    "RunResult",
    "run_single",
    "run_comparison",
    "run_sweep",
    "critical_mass",
    "critical_g",
]

log = logging.getLogger(__name__)

PRESETS = ("constant", "single_mode", "gaussian_bump", "random_band")
UNDERSHOOT_TOL = 1e-6


class ConfigError(ValueError):
    """Invalid or inconsistent configuration (CLI exit code 2)."""


@dataclass(frozen=True)
class DatumSpec:
    """Initial density preset.

    ``mass`` fixes ``rho_m = mass / (2 pi^2)``.  For ``gaussian_bump`` the bump
    carries all the mass unless ``amplitude`` is given, in which case the rest is
    a uniform background.  ``single_mode`` adds ``amplitude cos(k1 x1) cos(k2 x2)``
    and ``random_band`` adds a random cosine series with ``k1, k2 <= band``
    scaled so its grid sup equals ``amplitude``.
    """

    preset: str = "gaussian_bump"
    mass: float = 10.0
    amplitude: float | None = None
    x1c: float = 0.0
    x2c: float = math.pi / 2
    sigma: float = 0.3
    k1: int = 1
    k2: int = 1
    band: int = 4

    def __post_init__(self):
        if self.preset not in PRESETS:
            raise ConfigError(f"unknown datum preset {self.preset!r}; choose from {PRESETS}")
        if not self.mass > 0:
            raise ConfigError("datum mass must be positive")
        if not self.sigma > 0:
            raise ConfigError("datum sigma must be positive")


@dataclass(frozen=True)
class RunConfig:
    n1: int = 128
    n2: int = 65
    law: FlowLaw = FlowLaw.NONE
    g: float = 1.0
    B: float = 1.0
    t_end: float = 1.0
    sample_every: int = 1
    scheme: Scheme = Scheme.IMEX_CNAB2
    dt_init: float = 1e-3
    dt_min: float = 1e-6
    dt_max: float = 1e-2
    cfl_safety: float = 0.2
    rho_inf_max: float = 1e6
    tail_frac_max: float = 0.1
    pin_steps: int = 20
    omega_init: str = "zero"
    seed: int = 0
    datum: DatumSpec = field(default_factory=DatumSpec)
    out: str | None = None

    def __post_init__(self):
        if self.n1 < 4 or self.n1 % 2 or self.n2 < 4:
            raise ConfigError("need even n1 >= 4 and n2 >= 4")
        for name in ("g", "B", "t_end", "dt_min", "dt_max", "dt_init", "rho_inf_max", "tail_frac_max"):
            if not getattr(self, name) > 0:
                raise ConfigError(f"{name} must be positive")
        if self.sample_every < 1 or self.pin_steps < 1:
            raise ConfigError("sample_every and pin_steps must be >= 1")
        if self.omega_init not in ("zero", "static"):
            raise ConfigError("omega_init must be 'zero' or 'static'")
        if self.omega_init != "zero" and self.law is not FlowLaw.NAVIER_STOKES:
            raise ConfigError("a velocity datum is only accepted by the Navier-Stokes law")
        try:
            self.params()
        except ValueError as exc:
            raise ConfigError(str(exc)) from exc

    @property
    def grid(self) -> Grid:
        return Grid(self.n1, self.n2)

    def params(self) -> ModelParams:
        return ModelParams(
            g=self.g,
            B=self.B,
            grid=self.grid,
            law=self.law,
            scheme=self.scheme,
            dt_init=self.dt_init,
            dt_min=self.dt_min,
            dt_max=self.dt_max,
            cfl_safety=self.cfl_safety,
            rho_inf_max=self.rho_inf_max,
            tail_frac_max=self.tail_frac_max,
            pin_steps=self.pin_steps,
        )

    def with_(self, **changes) -> "RunConfig":
        return replace(self, **changes)

    def to_dict(self) -> dict:
        d = asdict(self)
        d["law"] = self.law.name
        d["scheme"] = self.scheme.value
        return d


@dataclass(frozen=True)
class SweepConfig:
    base: RunConfig
    g_values: tuple[float, ...]
    B_values: tuple[float, ...]
    workers: int = 1

    def __post_init__(self):
        if not self.g_values or not self.B_values:
            raise ConfigError("sweep axes must be nonempty")
        if self.workers < 1:
            raise ConfigError("workers must be >= 1")


def _gaussian_images(grid: Grid, x1c: float, x2c: float, sigma: float) -> np.ndarray:
    """Gaussian periodized in ``x1`` and even-reflected across both walls."""
    x1, x2 = grid.mesh()
    reach = 8 * sigma
    n_per = int(math.ceil(reach / (2 * math.pi))) + 1
    n_ref = int(math.ceil(reach / (2 * math.pi))) + 1
    out = np.zeros_like(x1)
    for m in range(-n_per, n_per + 1):
        d1 = (x1 - x1c - 2 * math.pi * m) ** 2
        if np.min(d1) > reach**2:
            continue
        for j in range(-n_ref, n_ref + 1):
            for c2 in (x2c, -x2c):
                d2 = (x2 - c2 - 2 * math.pi * j) ** 2
                out += np.exp(-(d1 + d2) / (2 * sigma**2))
    return out


def make_datum(spec: DatumSpec, grid: Grid, seed: int = 0) -> SpectralField:
    """Band-limited (dealiased) CosY density for a preset; checks nonnegativity."""
    rho_m = spec.mass / grid.area
    x1, x2 = grid.mesh()
    if spec.preset == "constant":
        c = np.zeros(grid.spectral_shape, dtype=complex)
        c[0, 0] = rho_m
        rho = SpectralField(grid, Basis.COS, c)
    elif spec.preset == "single_mode":
        amp = 0.5 * rho_m if spec.amplitude is None else spec.amplitude
        values = rho_m + amp * np.cos(spec.k1 * x1) * np.cos(spec.k2 * x2)
        rho = to_spectral(values, Basis.COS, grid)
    elif spec.preset == "gaussian_bump":
        shape = dealias(to_spectral(_gaussian_images(grid, spec.x1c, spec.x2c, spec.sigma), Basis.COS, grid))
        shape_mass = shape.coeffs[0, 0].real * grid.area
        if spec.amplitude is None:
            rho = shape * (spec.mass / shape_mass)
        else:
            background = (spec.mass - spec.amplitude * shape_mass) / grid.area
            if background < 0:
                raise ConfigError("bump amplitude exceeds the total mass")
            bump = shape * spec.amplitude
            c = bump.coeffs.copy()
            c[0, 0] += background
            rho = bump._like(c)
    else:
        rng = np.random.default_rng(seed)
        c = np.zeros(grid.spectral_shape, dtype=complex)
        kb = spec.band
        block = rng.standard_normal((kb + 1, kb + 1)) + 1j * rng.standard_normal((kb + 1, kb + 1))
        block[0] = block[0].real
        block[0, 0] = 0.0
        c[: kb + 1, : kb + 1] = block
        wave = SpectralField(grid, Basis.COS, c)
        wave = wave * (1.0 / np.max(np.abs(to_physical(wave))))
        amp = 0.5 * rho_m if spec.amplitude is None else spec.amplitude
        c = (wave * amp).coeffs.copy()
        c[0, 0] = rho_m
        rho = SpectralField(grid, Basis.COS, c)
    rho = dealias(rho)
    vals = to_physical(rho)
    lowest = float(np.min(vals))
    # Band-limiting a compact bump leaves a small Gibbs undershoot; tolerate it at
    # the 1e-6 level and reject data that are genuinely negative.
    if lowest < -UNDERSHOOT_TOL * float(np.max(np.abs(vals))):
        raise ConfigError(f"datum {spec.preset!r} is negative on the grid (min {lowest:.3g})")
    return rho


def initial_state(cfg: RunConfig, seed: int | None = None) -> SimState:
    params = cfg.params()
    rho = make_datum(cfg.datum, params.grid, cfg.seed if seed is None else seed)
    omega = None
    if cfg.law is FlowLaw.NAVIER_STOKES:
        if cfg.omega_init == "static":
            omega = vorticity_of(static_stokes_velocity(rho, cfg.g))
        else:
            omega = params.grid.zeros(Basis.SIN)
    return SimState(0.0, rho, params, omega)


# --- configuration files ------------------------------------------------------

_RUN_KEYS = {
    "n1": int,
    "n2": int,
    "g": float,
    "b": float,
    "t_end": float,
    "sample_every": int,
    "dt_init": float,
    "dt_min": float,
    "dt_max": float,
    "cfl_safety": float,
    "omega_init": str,
    "seed": int,
    "out": str,
}
_DATUM_KEYS = {
    "mass": float,
    "amplitude": float,
    "x1c": float,
    "x2c": float,
    "sigma": float,
    "k1": int,
    "k2": int,
    "band": int,
}
_DETECTOR_KEYS = {"rho_inf_max": float, "tail_frac_max": float, "pin_steps": int}


def _floats(text: str) -> tuple[float, ...]:
    return tuple(float(v) for v in text.replace(";", ",").split(",") if v.strip())


def parse_config(text: str) -> tuple[RunConfig, dict]:
    """Parse INI text into a run configuration plus the raw ``[sweep]`` section.

    Unknown sections or keys are rejected so that typos do not silently fall
    back to defaults.
    """
    cp = configparser.ConfigParser(interpolation=None)
    try:
        cp.read_string(text)
    except configparser.Error as exc:
        raise ConfigError(f"malformed config: {exc}") from exc
    allowed = {"run", "datum", "detector", "sweep"}
    extra = set(cp.sections()) - allowed
    if extra:
        raise ConfigError(f"unknown config sections {sorted(extra)}")

    def convert(section, key, kind):
        raw = cp[section][key]
        try:
            return kind(raw.strip())
        except ValueError as exc:
            raise ConfigError(f"[{section}] {key} = {raw!r} is not a valid {kind.__name__}") from exc

    run_kw: dict = {}
    if cp.has_section("run"):
        for key in cp["run"]:
            if key == "variant":
                try:
                    run_kw["law"] = FlowLaw.parse(cp["run"][key])
                except ValueError as exc:
                    raise ConfigError(str(exc)) from exc
            elif key == "scheme":
                try:
                    run_kw["scheme"] = Scheme.parse(cp["run"][key])
                except ValueError as exc:
                    raise ConfigError(str(exc)) from exc
            elif key in _RUN_KEYS:
                run_kw["B" if key == "b" else key] = convert("run", key, _RUN_KEYS[key])
            else:
                raise ConfigError(f"unknown key [run] {key}")
    datum_kw: dict = {}
    if cp.has_section("datum"):
        for key in cp["datum"]:
            if key == "preset":
                datum_kw["preset"] = cp["datum"][key].strip()
            elif key == "velocity":
                raise ConfigError("velocity data are set with [run] omega_init")
            elif key in _DATUM_KEYS:
                datum_kw[key] = convert("datum", key, _DATUM_KEYS[key])
            else:
                raise ConfigError(f"unknown key [datum] {key}")
    if cp.has_section("detector"):
        for key in cp["detector"]:
            if key not in _DETECTOR_KEYS:
                raise ConfigError(f"unknown key [detector] {key}")
            run_kw[key] = convert("detector", key, _DETECTOR_KEYS[key])
    sweep: dict = {}
    if cp.has_section("sweep"):
        for key in cp["sweep"]:
            try:
                if key == "g":
                    sweep["g"] = _floats(cp["sweep"][key])
                elif key == "b":
                    sweep["B"] = _floats(cp["sweep"][key])
                elif key == "workers":
                    sweep["workers"] = int(cp["sweep"][key])
                else:
                    raise ConfigError(f"unknown key [sweep] {key}")
            except ValueError as exc:
                if isinstance(exc, ConfigError):
                    raise
                raise ConfigError(f"[sweep] {key}: {exc}") from exc
    try:
        datum = DatumSpec(**datum_kw)
        cfg = RunConfig(datum=datum, **run_kw)
    except (TypeError, ValueError) as exc:
        if isinstance(exc, ConfigError):
            raise
        raise ConfigError(str(exc)) from exc
    return cfg, sweep


def load_config(path: str | Path) -> tuple[RunConfig, dict, str]:
    """Read and parse a config file; returns ``(cfg, sweep_section, raw_text)``."""
    text = Path(path).read_text(encoding="utf-8")
    cfg, sweep = parse_config(text)
    return cfg, sweep, text


# --- runs ---------------------------------------------------------------------


@dataclass
class RunResult:
    outcome: RunOutcome
    records: list[DiagnosticsRecord]
    final: SimState
    dts: list[float]


def _write_json(path: Path, payload: dict) -> None:
    path.write_text(json.dumps(payload, indent=2, sort_keys=True) + "\n", encoding="utf-8")


def run_single(
    cfg: RunConfig,
    out: str | Path | None = None,
    *,
    config_text: str | None = None,
    dt_sequence: Sequence[float] | None = None,
    state: SimState | None = None,
) -> RunResult:
    """Integrate one trajectory, sampling diagnostics every ``sample_every`` steps.

    With ``out`` set, writes ``diagnostics.csv`` (streamed), ``final.ckpt`` and
    ``outcome.json``.  The final state is always sampled.
    """
    out = Path(out) if out is not None else (Path(cfg.out) if cfg.out else None)
    state = state if state is not None else initial_state(cfg)
    sink = None
    if out is not None:
        out.mkdir(parents=True, exist_ok=True)
        sink = CsvSink(out / "diagnostics.csv")
    records: list[DiagnosticsRecord] = []
    dts: list[float] = []
    cursor = {"n": 0, "dt": math.nan, "sampled": -1}

    def on_step(st, dt, n):
        if n > 0:
            dts.append(dt)
        cursor["n"], cursor["dt"] = n, dt
        if n % cfg.sample_every == 0:
            rec = sample(st, records[-1] if records else None, dt=dt)
            records.append(rec)
            cursor["sampled"] = n
            if sink is not None:
                sink.append(rec)

    try:
        final, outcome = integrate(
            state,
            cfg.t_end,
            ctrl=StepController.from_params(state.params),
            on_step=on_step,
            dt_sequence=dt_sequence,
        )
        if cursor["n"] != cursor["sampled"]:
            rec = sample(final, records[-1] if records else None, dt=cursor["dt"])
            records.append(rec)
            if sink is not None:
                sink.append(rec)
    finally:
        if sink is not None:
            sink.close()
    if out is not None:
        (out / "final.ckpt").write_bytes(checkpoint_save(final))
        payload = outcome.to_dict()
        payload["config"] = cfg.to_dict()
        if config_text is not None:
            payload["config_text"] = config_text
        payload["steps"] = len(dts)
        _write_json(out / "outcome.json", payload)
    return RunResult(outcome, records, final, dts)


COMPARISON_FIELDS = ("t", "dt", "r_sq", "v_sq", "E2_full", "E2_static", "u_sq_full", "u_sq_static")


def _fmt(v) -> str:
    return repr(float(v))


def _comparison_row(full: SimState, stat: SimState, dt: float) -> tuple:
    r = full.rho - stat.rho
    uf = velocity_of(full)
    us = velocity_of(stat)
    return (
        full.t,
        dt,
        l2_norm_sq(r),
        (uf - us).l2_norm_sq(),
        fluctuation_energy(full.rho),
        fluctuation_energy(stat.rho),
        uf.l2_norm_sq(),
        us.l2_norm_sq(),
    )


def compare_pair(full: SimState, stat: SimState, t_end: float, sample_every: int = 1):
    """Co-evolve two states in lockstep (each step uses the smaller admissible dt).

    Returns ``(rows, dts, outcome_full, outcome_static)``; integration stops as soon
    as either detector fires.
    """
    if full.grid != stat.grid:
        raise ValueError("grid mismatch")
    cf_ = StepController.from_params(full.params)
    cs_ = StepController.from_params(stat.params)
    df, ds = Detector(full.params), Detector(stat.params)
    rows = [_comparison_row(full, stat, math.nan)]
    dts: list[float] = []
    of = df(full)
    os_ = ds(stat)
    n = 0
    eps = 1e-12 * max(1.0, abs(t_end))
    while of is None and os_ is None and full.t < t_end - eps:
        dt = min(choose_dt(full, cf_), choose_dt(stat, cs_))
        remaining = t_end - full.t
        if dt >= remaining or remaining - dt < 1e-3 * dt:
            dt = remaining
        cf_.dt = cs_.dt = dt
        full = step(full, cf_)
        stat = step(stat, cs_)
        # Keep both clocks identical even though each adds dt separately.
        stat = stat.advanced(full.t, stat.rho, stat.omega)
        dts.append(dt)
        n += 1
        of = df(full, dt)
        os_ = ds(stat, dt)
        if n % sample_every == 0 or full.t >= t_end - eps or of is not None or os_ is not None:
            rows.append(_comparison_row(full, stat, dt))
    done = RunOutcome(OutcomeKind.COMPLETED, full.t, "reached t_end")
    return rows, dts, of or done, os_ or done


def run_comparison(
    cfg: RunConfig,
    B_list: Sequence[float],
    out: str | Path | None = None,
) -> list[dict]:
    """Full Navier-Stokes vs quasi-static Stokes from the same datum, per ``B``.

    Writes ``compare_B<B>.csv`` per value and ``comparison_summary.csv`` with
    ``sup_t |rho - rho_s|^2`` and ``sup_t |u - u_s|^2``.
    """
    if cfg.law is not FlowLaw.NAVIER_STOKES:
        raise ConfigError("comparison requires variant = NavierStokes for the full run")
    out = Path(out) if out is not None else (Path(cfg.out) if cfg.out else None)
    if out is not None:
        out.mkdir(parents=True, exist_ok=True)
    summary = []
    for B in B_list:
        full_cfg = cfg.with_(B=float(B))
        full = initial_state(full_cfg)
        stat = SimState(0.0, full.rho, full.params.with_(law=FlowLaw.STATIC_STOKES), None)
        rows, dts, of, os_ = compare_pair(full, stat, cfg.t_end, cfg.sample_every)
        entry = {
            "B": float(B),
            "sup_r_sq": max(r[2] for r in rows),
            "sup_v_sq": max(r[3] for r in rows if not math.isnan(r[3])),
            "outcome_full": of.kind.value,
            "outcome_static": os_.kind.value,
            "t_final": float(rows[-1][0]),
            "rows": rows,
            "dts": dts,
        }
        summary.append(entry)
        if out is not None:
            with open(out / f"compare_B{B:g}.csv", "w", encoding="utf-8", newline="") as fh:
                w = csv.writer(fh, lineterminator="\n")
                w.writerow(COMPARISON_FIELDS)
                for r in rows:
                    w.writerow([_fmt(v) for v in r])
    if out is not None:
        with open(out / "comparison_summary.csv", "w", encoding="utf-8", newline="") as fh:
            w = csv.writer(fh, lineterminator="\n")
            w.writerow(("B", "sup_r_sq", "sup_v_sq", "outcome_full", "outcome_static", "t_final"))
            for e in summary:
                w.writerow(
                    [_fmt(e["B"]), _fmt(e["sup_r_sq"]), _fmt(e["sup_v_sq"]), e["outcome_full"], e["outcome_static"], _fmt(e["t_final"])]
                )
    return summary


SWEEP_FIELDS = ("g", "B", "kind", "t_final", "max_E2", "max_rho_inf", "reason")


def _sweep_cell(cfg: RunConfig, out: str | None) -> tuple:
    try:
        res = run_single(cfg, out)
        max_e2 = max(r.E2 for r in res.records)
        max_inf = max(r.rho_inf for r in res.records)
        o = res.outcome
        return (cfg.g, cfg.B, o.kind.value, o.t_final, max_e2, max_inf, o.reason)
    except Exception as exc:  # recorded per row, never aborts the sweep
        return (cfg.g, cfg.B, "Error", math.nan, math.nan, math.nan, f"{type(exc).__name__}: {exc}")


def _sweep_row_text(row: tuple) -> list[str]:
    g, B, kind, t, e2, inf, reason = row
    return [_fmt(g), _fmt(B), kind, _fmt(t), _fmt(e2), _fmt(inf), reason]


def run_sweep(sweep: SweepConfig, out: str | Path | None = None) -> list[tuple]:
    """Run every ``(g, B)`` cell; rows are streamed in arrival order to
    ``sweep_partial.csv`` and written sorted by ``(g, B)`` to ``sweep.csv``."""
    out = Path(out) if out is not None else (Path(sweep.base.out) if sweep.base.out else None)
    cells = [(g, B) for g in sweep.g_values for B in sweep.B_values]
    jobs = []
    for g, B in cells:
        cell_out = str(out / "cells" / f"g{g:g}_B{B:g}") if out is not None else None
        jobs.append((sweep.base.with_(g=float(g), B=float(B), out=None), cell_out))
    partial = None
    if out is not None:
        out.mkdir(parents=True, exist_ok=True)
        partial = open(out / "sweep_partial.csv", "w", encoding="utf-8", newline="")
        pw = csv.writer(partial, lineterminator="\n")
        pw.writerow(SWEEP_FIELDS)
    rows = []

    def collect(row):
        rows.append(row)
        if partial is not None:
            pw.writerow(_sweep_row_text(row))
            partial.flush()

    try:
        if sweep.workers == 1:
            for cfg, cell_out in jobs:
                collect(_sweep_cell(cfg, cell_out))
        else:
            with cf.ProcessPoolExecutor(max_workers=sweep.workers) as pool:
                futures = [pool.submit(_sweep_cell, cfg, cell_out) for cfg, cell_out in jobs]
                for fut in cf.as_completed(futures):
                    collect(fut.result())
    finally:
        if partial is not None:
            partial.close()
    rows.sort(key=lambda r: (r[0], r[1]))
    if out is not None:
        with open(out / "sweep.csv", "w", encoding="utf-8", newline="") as fh:
            w = csv.writer(fh, lineterminator="\n")
            w.writerow(SWEEP_FIELDS)
            for row in rows:
                w.writerow(_sweep_row_text(row))
    return rows


# --- calibration --------------------------------------------------------------


def critical_mass(cfg: RunConfig, lo: float, hi: float, tol: float = 0.05) -> tuple[float, float]:
    """Bisect on datum mass for the smallest mass whose run ends in blowup.

    Returns the final bracket ``(completed, blowup)``.  Requires the run at
    ``lo`` to complete and the run at ``hi`` to blow up.
    """

    def blows(m):
        c = cfg.with_(datum=replace(cfg.datum, mass=m), out=None, sample_every=10**9)
        return run_single(c).outcome.kind is OutcomeKind.BLOWUP

    if blows(lo) or not blows(hi):
        raise ValueError("mass bracket does not straddle the blowup threshold")
    while hi - lo > tol:
        mid = 0.5 * (lo + hi)
        if blows(mid):
            hi = mid
        else:
            lo = mid
    return lo, hi


def critical_g(cfg: RunConfig, lo: float = 1.0, hi: float = 1e3, ratio: float = 1.05) -> tuple[float, float]:
    """Geometric bisection on ``g`` for the smallest buoyancy that completes.

    Returns ``(failing, completing)``; the upper end is the empirical ``g*``.
    """

    def completes(g):
        c = cfg.with_(g=g, out=None, sample_every=10**9)
        return run_single(c).outcome.kind is OutcomeKind.COMPLETED

    if completes(lo) or not completes(hi):
        raise ValueError("g bracket does not straddle the suppression threshold")
    while hi / lo > ratio:
        mid = math.sqrt(lo * hi)
        if completes(mid):
            hi = mid
        else:
            lo = mid
    return lo, hi
