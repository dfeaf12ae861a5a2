"""Command-line front end: ``ksns run|compare|sweep|plot|verify``.

Exit codes: 0 success (a detector stop is a normal outcome), 1 failed
self-check, 2 configuration error, 3 I/O error.
"""

from __future__ import annotations

import argparse
import sys
from pathlib import Path

from .experiments import ConfigError, SweepConfig, load_config, run_comparison, run_single, run_sweep
from .integrate import CheckpointError
from .plots import PlotError, emit_plots

EXIT_OK = 0
EXIT_CHECK_FAILED = 1
EXIT_CONFIG = 2
EXIT_IO = 3

DEFAULT_COMPARE_B = (10.0, 100.0, 1000.0)
_SKIP_PLOT = {"comparison_summary.csv", "sweep_partial.csv"}


def _out_dir(args, cfg) -> Path:
    if args.out:
        return Path(args.out)
    if cfg is not None and cfg.out:
        return Path(cfg.out)
    return Path("out")


def _load(args):
    if not args.config:
        raise ConfigError("--config PATH is required")
    cfg, sweep, text = load_config(args.config)
    if args.seed is not None:
        cfg = cfg.with_(seed=args.seed)
    return cfg, sweep, text


def cmd_run(args) -> int:
    cfg, _, text = _load(args)
    out = _out_dir(args, cfg)
    res = run_single(cfg, out, config_text=text)
    o = res.outcome
    print(f"{o.kind.value} at t={o.t_final:.6g}: {o.reason} ({len(res.dts)} steps) -> {out}")
    return EXIT_OK


def cmd_compare(args) -> int:
    cfg, sweep, _ = _load(args)
    out = _out_dir(args, cfg)
    summary = run_comparison(cfg, sweep.get("B", DEFAULT_COMPARE_B), out)
    for e in summary:
        print(
            f"B={e['B']:g}: sup|r|^2={e['sup_r_sq']:.6e} sup|v|^2={e['sup_v_sq']:.6e} "
            f"({e['outcome_full']}/{e['outcome_static']})"
        )
    print(f"-> {out}")
    return EXIT_OK


def cmd_sweep(args) -> int:
    cfg, sweep, _ = _load(args)
    if "g" not in sweep or "B" not in sweep:
        raise ConfigError("[sweep] needs nonempty g and b lists")
    workers = args.workers if args.workers is not None else sweep.get("workers", 1)
    if workers < 1:
        raise ConfigError("workers must be >= 1")
    out = _out_dir(args, cfg)
    rows = run_sweep(SweepConfig(cfg, sweep["g"], sweep["B"], workers), out)
    for g, B, kind, t_final, *_ in rows:
        print(f"g={g:g} B={B:g}: {kind} t={t_final:.6g}")
    print(f"-> {out / 'sweep.csv'}")
    return EXIT_OK


def _plot_inputs(paths) -> list[Path]:
    found = []
    for p in map(Path, paths):
        if p.is_dir():
            found += sorted(q for q in p.glob("*.csv") if q.name not in _SKIP_PLOT)
        elif p.exists():
            found.append(p)
        else:
            raise FileNotFoundError(f"no such file: {p}")
    return found


def cmd_plot(args) -> int:
    files = _plot_inputs(args.paths)
    written = emit_plots(files, _out_dir(args, None))
    for p in written:
        print(p)
    return EXIT_OK


def cmd_verify(args) -> int:
    from .checks import FAST_CHECKS

    results = []
    for check in FAST_CHECKS:
        res = check(seed=args.seed or 0) if check.__name__ in ("check_operators", "check_static_law") else check()
        results.append(res)
        print(f"{res.name:<24} {'PASS' if res.passed else 'FAIL':<5} {res.seconds:6.1f}s  {res.detail}", flush=True)
    ok = all(r.passed for r in results)
    print(f"{sum(r.passed for r in results)}/{len(results)} checks passed")
    return EXIT_OK if ok else EXIT_CHECK_FAILED


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="ksns", description="Keller-Segel with buoyancy-driven flow")
    sub = parser.add_subparsers(dest="verb", required=True)

    def common(p, config=True):
        if config:
            p.add_argument("--config", metavar="PATH", help="INI config file")
        p.add_argument("--out", metavar="DIR", help="output directory")
        p.add_argument("--seed", type=int, metavar="S", help="seed for random data")
        p.add_argument("--workers", type=int, metavar="N", help="parallel sweep workers")

    common(sub.add_parser("run", help="integrate one trajectory"))
    common(sub.add_parser("compare", help="full Navier-Stokes vs quasi-static Stokes, per B"))
    common(sub.add_parser("sweep", help="(g, B) outcome map"))
    p = sub.add_parser("plot", help="SVG plots from output CSVs or directories")
    p.add_argument("paths", nargs="+", metavar="CSV_OR_DIR")
    common(p, config=False)
    common(sub.add_parser("verify", help="operator oracles, identities, conservation and order"), config=False)
    return parser


VERBS = {"run": cmd_run, "compare": cmd_compare, "sweep": cmd_sweep, "plot": cmd_plot, "verify": cmd_verify}


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    try:
        return VERBS[args.verb](args)
    except ConfigError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except (OSError, PlotError, CheckpointError) as exc:
        print(f"I/O error: {exc}", file=sys.stderr)
        return EXIT_IO


if __name__ == "__main__":
    sys.exit(main())
