"""Command-line entry point: ``entrench {run,sweep,oracle,noise,export}``.

Every config key is also a flag (``--c-high 0.3``); flags override values
read from ``--config``.
"""

from __future__ import annotations

import argparse
import random
import sys
from pathlib import Path
from typing import List, Optional

from . import harness, oracle
from .core import IncentiveParams
from .dynamics import write_event_log
from .harness import ConfigError, KEYS, export_network, parse_config, run_noise_study, run_sweep
from .shocks import run_condition


def _config_text(args) -> str:
    text = Path(args.config).read_text() if args.config else ""
    overrides = []
    for key in KEYS:
        val = getattr(args, key, None)
        if val is not None:
            overrides.append(f"{key}={val}")
    return text + "\n" + "\n".join(overrides) + "\n"


def _add_config_flags(p: argparse.ArgumentParser) -> None:
    p.add_argument("--config", help="key=value config file")
    for key in KEYS:
        p.add_argument("--" + key.replace("_", "-"), dest=key, metavar="VALUE")


def _metrics_line(tag, m) -> str:
    spill = "" if m.spillover_frac is None else f" spillover={m.spillover_frac:.4f}"
    return (f"{tag:5s} k1={m.avg_degree[0]:.4f} k2={m.avg_degree[1]:.4f} "
            f"C1={m.avg_clustering[0]:.4f} u={m.mean_utility:.4f}{spill}")


def _run(args, sim, inc, shock) -> int:
    logs = []
    hook = (lambda phase, log, net: logs.append(log)) if args.events else None
    res = run_condition(sim, inc, shock, random.Random(sim.seed), on_round=hook)
    print(f"condition={shock.condition} shocked_layers={shock.shocked_layers} "
          f"d={float(inc.d):g} e={float(inc.e):g} mode={sim.mode} seed={sim.seed}")
    print(_metrics_line("pre", res.pre_metrics) + f" rounds={res.rounds_pre} converged={res.converged_pre}")
    print(_metrics_line("post", res.post_metrics) + f" rounds={res.rounds_post} converged={res.converged_post}")
    if args.events:
        with open(args.events, "w") as fh:
            write_event_log(logs, fh)
    if args.out_dir:
        out = Path(args.out_dir)
        out.mkdir(parents=True, exist_ok=True)
        for phase in ("pre", "post"):
            (out / f"{shock.condition}_{phase}.edges").write_text(export_network(res, phase, "edgelist"))
    return 0


def _sweep(args, sweep) -> int:
    out = Path(args.out_dir or ".")
    out.mkdir(parents=True, exist_ok=True)
    total = len(sweep.cells()) * sweep.replicates

    def progress(cell, rep, _count=[0]):
        _count[0] += 1
        if args.verbose:
            print(f"\r{_count[0]}/{total}", end="", file=sys.stderr, flush=True)

    res = run_sweep(sweep, progress)
    if args.verbose:
        print(file=sys.stderr)
    with open(out / "rows.csv", "w") as fh:
        res.write_rows(fh)
    with open(out / "aggregate.csv", "w") as fh:
        res.write_aggregates(fh)
    with open(out / "seeds.csv", "w") as fh:
        res.write_seeds(fh)
    print(f"wrote {len(res.rows)} rows, {len(res.aggregates)} aggregates to {out}")
    return 0


def _oracle(args, sim, inc, shock) -> int:
    lo, hi = shock.c_low, shock.c_high
    partial, perfect, consolidation = oracle.spillover_thresholds(hi)
    print(f"cost regime (c_low < 1/3 <= c_high): {oracle.cost_regime_check(lo, hi)}")
    print(f"triangle resilience onset d >= {float(oracle.resilience_onset_threshold(hi)):g}")
    print(f"mixed resilience onset d + e >= {float(oracle.mixed_onset_threshold(hi)):g}")
    print(f"spillover partial onset e >= {float(partial):g}, perfect e >= {float(perfect):g}, "
          f"HH consolidation e > {float(consolidation):g}")
    print(f"random spillover baseline (n={sim.n}): {float(oracle.random_spillover_baseline(sim.n)):.5f}")
    rows = oracle.enumerate_ego_states(args.max_t, args.kind, c_low=lo, c_high=hi,
                                       include_empty=args.include_empty)
    print(f"{len(rows)} ego states ({args.kind}, max_t={args.max_t})")
    if args.ego_table:
        with open(args.ego_table, "w") as fh:
            oracle.write_ego_table(rows, fh, inc.d, inc.e)
    if args.transitions:
        p_lo = IncentiveParams.make(lo, d=inc.d, e=inc.e)
        p_hi = IncentiveParams.make(hi, d=inc.d, e=inc.e)
        edges = oracle.favored_transitions(rows, p_lo, p_hi)
        Path(args.transitions).write_text(oracle.transitions_dot(edges))
    return 0


def _noise(args, sim, inc, shock) -> int:
    nus = [float(x) for x in args.nus.split(",")]
    reps = args.noise_replicates
    values, _ = harness.parse_values(_config_text(args))
    band = values.get("band", 0.1)
    rows = run_noise_study(sim, inc, nus, replicates=reps, c_low=shock.c_low,
                           c_high=shock.c_high, band=band, base_seed=sim.seed)
    print("nu,median_rounds,nu_times_median,censored,hh_mean")
    for r in rows:
        med = "" if r.median_rounds is None else f"{r.median_rounds:g}"
        scaled = "" if r.median_rounds is None else f"{r.median_rounds * r.nu:.3f}"
        print(f"{r.nu:g},{med},{scaled},{r.censored},{r.hh_mean:.4f}")
    try:
        print(f"log-log slope: {harness.noise_slope(rows):.3f}")
    except ValueError:
        pass
    return 0


def _export(args, sim, inc, shock) -> int:
    res = run_condition(sim, inc, shock, random.Random(sim.seed))
    text = export_network(res, args.phase, args.format)
    if args.output:
        Path(args.output).write_text(text)
    else:
        sys.stdout.write(text)
    return 0


def build_parser() -> argparse.ArgumentParser:
    ap = argparse.ArgumentParser(prog="entrench", description=__doc__.splitlines()[0])
    sub = ap.add_subparsers(dest="command", required=True)

    p = sub.add_parser("run", help="one two-phase experiment")
    _add_config_flags(p)
    p.add_argument("--events", help="write per-round event CSV here")
    p.add_argument("--out-dir", help="write pre/post edge lists here")

    p = sub.add_parser("sweep", help="replicated grid sweep to CSV")
    _add_config_flags(p)
    p.add_argument("--out-dir", default=".")
    p.add_argument("-v", "--verbose", action="store_true")

    p = sub.add_parser("oracle", help="analytic thresholds, ego tables, transition graph")
    _add_config_flags(p)
    p.add_argument("--kind", choices=oracle.KINDS, default="spillover")
    p.add_argument("--max-t", type=int, default=4)
    p.add_argument("--include-empty", action="store_true")
    p.add_argument("--ego-table", help="CSV output path")
    p.add_argument("--transitions", help="DOT output path")

    p = sub.add_parser("noise", help="post-shock reversion time under noise")
    _add_config_flags(p)
    p.add_argument("--nus", default="0.01,0.001", help="comma-separated noise levels")
    p.add_argument("--noise-replicates", type=int, default=10)

    p = sub.add_parser("export", help="run one experiment and export a snapshot")
    _add_config_flags(p)
    p.add_argument("--phase", choices=("pre", "post"), default="post")
    p.add_argument("--format", choices=harness.FORMATS, default="edgelist")
    p.add_argument("-o", "--output")
    return ap


def main(argv: Optional[List[str]] = None) -> int:
    args = build_parser().parse_args(argv)
    try:
        sim, inc, shock, sweep = parse_config(_config_text(args))
    except (ConfigError, OSError) as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return 2
    if args.command == "run":
        return _run(args, sim, inc, shock)
    if args.command == "sweep":
        return _sweep(args, sweep)
    if args.command == "oracle":
        return _oracle(args, sim, inc, shock)
    if args.command == "noise":
        return _noise(args, sim, inc, shock)
    return _export(args, sim, inc, shock)


if __name__ == "__main__":
    sys.exit(main())
