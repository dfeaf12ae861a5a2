"""SVG plot emission from the CSV outputs (diagnostics, comparison, sweep)."""

from __future__ import annotations

import csv
from pathlib import Path
from typing import Sequence

import matplotlib

matplotlib.use("Agg")
import matplotlib.pyplot as plt  # noqa: E402
import numpy as np  # noqa: E402

from .diagnostics import FIELD_NAMES  # noqa: E402
from .experiments import COMPARISON_FIELDS, SWEEP_FIELDS  # noqa: E402

__all__ = ["PlotError", "read_table", "csv_kind", "emit_plots", "OUTCOME_CODES"]

# matplotlib stamps the creation date into SVG metadata; drop it for reproducible files
_SVG_META = {"Date": None}
# element ids are hashed from a random salt unless one is fixed
matplotlib.rcParams["svg.hashsalt"] = "ksns"

DIAG_PANELS = (
    ("E2", ("E2",)),
    ("mix_sq", ("mix_sq",)),
    ("u_l2_sq", ("u_l2_sq",)),
    ("residuals", ("res_ks_energy", "res_ns_energy", "res_static_identity", "res_lemA3")),
)
OUTCOME_CODES = {"CompletedHorizon": 0, "ResolutionLoss": 1, "BlowupDetected": 2, "Error": 3}


class PlotError(ValueError):
    """Input CSV is missing required columns or cannot be interpreted."""


def read_table(path: str | Path) -> tuple[list[str], list[list[str]]]:
    with open(path, encoding="utf-8", newline="") as fh:
        rows = [r for r in csv.reader(fh) if r]
    if not rows:
        raise PlotError(f"{path}: empty file (no header)")
    return rows[0], rows[1:]


def csv_kind(header: Sequence[str]) -> str:
    """Classify a header as ``diagnostics``, ``comparison`` or ``sweep``."""
    cols = set(header)
    for kind, needed in (
        ("diagnostics", FIELD_NAMES),
        ("comparison", COMPARISON_FIELDS),
        ("sweep", SWEEP_FIELDS),
    ):
        if set(needed) <= cols:
            return kind
    if "t" in cols and "r_sq" in cols:
        return "comparison"
    raise PlotError(f"unrecognized columns {list(header)}")


def _column(header, rows, name) -> np.ndarray:
    if name not in header:
        raise PlotError(f"missing column {name!r}")
    j = header.index(name)
    return np.array([float(r[j]) for r in rows], dtype=float)


def _semilogy_safe(ax, t, y, label):
    y = np.abs(y)
    ok = np.isfinite(y) & (y > 0)
    if ok.any():
        ax.semilogy(t[ok], y[ok], label=label)
    else:
        ax.plot([], [], label=label)


def _save(fig, path: Path) -> Path:
    fig.savefig(path, format="svg", metadata=_SVG_META)
    plt.close(fig)
    return path


def _plot_diagnostics(header, rows, stem: str, out: Path) -> list[Path]:
    t = _column(header, rows, "t")
    paths = []
    for name, cols in DIAG_PANELS:
        fig, ax = plt.subplots(figsize=(6, 4))
        for c in cols:
            if name == "residuals":
                _semilogy_safe(ax, t, _column(header, rows, c), c)
            else:
                ax.plot(t, _column(header, rows, c), label=c)
        ax.set_xlabel("t")
        ax.set_ylabel("|residual|" if name == "residuals" else name)
        ax.set_title(f"{stem}: {name}")
        ax.legend(loc="best")
        paths.append(_save(fig, out / f"{stem}_{name}.svg"))
    return paths


def _plot_comparison(tables: list[tuple[str, list, list]], out: Path) -> list[Path]:
    fig, ax = plt.subplots(figsize=(6, 4))
    for label, header, rows in tables:
        _semilogy_safe(ax, _column(header, rows, "t"), _column(header, rows, "r_sq"), label)
    ax.set_xlabel("t")
    ax.set_ylabel("|rho - rho_static|^2")
    ax.set_title("full vs static")
    ax.legend(loc="best")
    return [_save(fig, out / "comparison_r_sq.svg")]


def _plot_sweep(header, rows, stem: str, out: Path) -> list[Path]:
    g = _column(header, rows, "g")
    B = _column(header, rows, "B")
    kind = [r[header.index("kind")] for r in rows]
    gs = sorted(set(g.tolist()))
    Bs = sorted(set(B.tolist()))
    codes = np.full((len(Bs), len(gs)), np.nan)
    for gi, Bi, k in zip(g, B, kind):
        codes[Bs.index(Bi), gs.index(gi)] = OUTCOME_CODES.get(k, 3)
    fig, ax = plt.subplots(figsize=(6, 4))
    cmap = matplotlib.colors.ListedColormap(["tab:green", "tab:orange", "tab:red", "tab:gray"])
    ax.pcolormesh(
        np.arange(len(gs) + 1), np.arange(len(Bs) + 1), codes, cmap=cmap, vmin=-0.5, vmax=3.5, edgecolors="k"
    )
    ax.set_xticks(np.arange(len(gs)) + 0.5, [f"{v:g}" for v in gs])
    ax.set_yticks(np.arange(len(Bs)) + 0.5, [f"{v:g}" for v in Bs])
    ax.set_xlabel("g")
    ax.set_ylabel("B")
    ax.set_title("outcome: green completed, orange resolution loss, red blowup")
    return [_save(fig, out / f"{stem}_heatmap.svg")]


def emit_plots(csv_paths: Sequence[str | Path], out: str | Path) -> list[Path]:
    """Write SVG plots for each CSV; comparison CSVs share one overlay plot.

    Diagnostics CSVs yield E2, mix_sq, u_l2_sq and residual plots; sweep CSVs
    yield an outcome heatmap with one cell per row.
    """
    out = Path(out)
    out.mkdir(parents=True, exist_ok=True)
    written: list[Path] = []
    comparisons = []
    for p in map(Path, csv_paths):
        header, rows = read_table(p)
        kind = csv_kind(header)
        stem = p.stem if p.parent.name in ("", ".") else f"{p.parent.name}_{p.stem}"
        if kind == "diagnostics":
            written += _plot_diagnostics(header, rows, stem, out)
        elif kind == "sweep":
            written += _plot_sweep(header, rows, stem, out)
        else:
            label = p.stem.replace("compare_", "")
            comparisons.append((label, header, rows))
    if comparisons:
        written += _plot_comparison(comparisons, out)
    return written

