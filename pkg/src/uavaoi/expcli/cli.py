"""Command-line entry point: ``uavaoi <subcommand> [options]``."""
from __future__ import annotations

import argparse
import csv
import io
import json
import logging
import sys
from pathlib import Path

import numpy as np

from ..errors import ConfigError
from ..mfhppo.train import evaluate, learners_from_state
from ..neural.checkpoint import load_checkpoint
from .bench import bench_scaling
from .chart import emit_chart
from .config import PROFILES, load_config, override, parse_value
from .experiment import (csv_text, format_rows, output_dir, read_csv, run_experiment,
                         write_atomic)
from .fpkcheck import CASES, fpk_convergence


def _ints(text: str) -> tuple:
    return tuple(int(t) for t in text.split(",") if t.strip())


def _floats(text: str) -> tuple:
    return tuple(float(t) for t in text.split(",") if t.strip())


def _parse_set(items) -> dict:
    """``section.key=value`` strings into nested overrides (values stay text)."""
    out: dict = {}
    for item in items or ():
        if "=" not in item or "." not in item.split("=", 1)[0]:
            raise ConfigError(f"--set expects section.key=value, got {item!r}")
        lhs, value = item.split("=", 1)
        section, key = lhs.split(".", 1)
        out.setdefault(section.strip(), {})[key.strip()] = value.strip()
    return out


def _config(args, algorithm: str | None = None):
    raw = _parse_set(args.set)
    overrides = {s: {k: parse_value(s, k, v) for k, v in kv.items()} for s, kv in raw.items()}
    exp = overrides.setdefault("experiment", {})
    if algorithm is not None:
        exp["algorithm"] = algorithm
    if args.seed:
        exp["seeds"] = tuple(args.seed)
    if getattr(args, "episodes", None):
        exp["episodes"] = args.episodes
    if args.timing:
        exp["timing"] = True
    return load_config(args.config, args.profile, overrides)


def _common(p: argparse.ArgumentParser) -> None:
    p.add_argument("--profile", choices=PROFILES, default="desk")
    p.add_argument("--config", help="INI file layered over the profile")
    p.add_argument("--seed", type=int, action="append",
                   help="seed to run (repeat for several); default from the config")
    p.add_argument("--out", help="output directory (default $UAVAOI_OUTPUT_DIR or ./results)")
    p.add_argument("--set", action="append", metavar="SECTION.KEY=VALUE",
                   help="override one config value")
    p.add_argument("--timing", action="store_true",
                   help="record wall-clock milliseconds (CSV no longer byte-reproducible)")


def _print_summary(summary: dict) -> None:
    print(f"{summary['algorithm']}: final-window mean cost {summary['mean_final']:.4f}")
    for seed, v in summary["per_seed"].items():
        print(f"  seed {seed}: {v:.4f}")
    for b, info in summary.get("baselines", {}).items():
        print(f"  vs {b}: {info['mean_final']:.4f}, relative improvement "
              f"{100 * info['relative_improvement']:.1f}%")


def cmd_train(args) -> int:
    cfg = _config(args, "mfhppo")
    res = run_experiment(cfg, args.out, compare=not args.no_compare)
    _print_summary(res.summary)
    print(f"wrote {res.csv_path} and {res.summary_path}")
    return 0


def cmd_baseline(args) -> int:
    cfg = _config(args, args.policy)
    res = run_experiment(cfg, args.out, compare=False)
    _print_summary(res.summary)
    print(f"wrote {res.csv_path}")
    return 0


def cmd_eval(args) -> int:
    cfg = _config(args)
    state, meta = load_checkpoint(args.checkpoint)
    learners = learners_from_state(cfg.env, cfg.train, state)
    rows = []
    for seed in cfg.experiment.seeds:
        metrics = evaluate(cfg.env, learners, seed, args.episodes, cfg.experiment.episode_length)
        rows += format_rows(seed, metrics, cfg.experiment.moving_average, cfg.experiment.timing)
        print(f"seed {seed}: mean cost {np.mean([m.mean_cost for m in metrics]):.4f}")
    path = output_dir(args.out) / "eval.csv"
    write_atomic(path, csv_text(rows))
    print(f"wrote {path}")
    return 0


def cmd_fpk(args) -> int:
    ok = True
    rows = []
    for case in args.case or sorted(CASES):
        res = fpk_convergence(case, args.cells)
        ratios = ("",) + tuple(f"{r:.6g}" for r in res.ratios)
        for n, resid, ratio in zip(res.cells, res.residuals, ratios):
            rows.append((case, n, f"{resid:.10g}", ratio))
        print(f"{case}: residuals " + ", ".join(f"{r:.3e}" for r in res.residuals))
        print(f"{case}: ratios per halving " + ", ".join(f"{r:.2f}" for r in res.ratios))
        ok &= all(r >= 3.0 for r in res.ratios)
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(("case", "cells", "residual", "ratio"))
    w.writerows(rows)
    path = output_dir(args.out) / "fpk_check.csv"
    write_atomic(path, buf.getvalue())
    print(f"wrote {path}")
    return 0 if ok else 1


def cmd_sweep(args) -> int:
    """Clip-threshold by LSTM on/off grid; one experiment directory per cell."""
    base = _config(args, "mfhppo")
    out = output_dir(args.out)
    table = []
    for clip in args.clips:
        for lstm in args.lstm:
            cfg = override(base, {"mfhppo": {"clip": clip, "use_lstm": lstm == "on"}})
            cell = out / f"clip{clip:g}_lstm-{lstm}"
            res = run_experiment(cfg, cell, compare=False)
            stds = []
            for s in cfg.experiment.seeds:
                costs = [r["mean_cost"] for r in read_csv(res.csv_path) if r["seed"] == s]
                stds.append(float(np.std(costs[-args.tail:])))
            row = {"clip": clip, "lstm": lstm, "mean_final": res.summary["mean_final"],
                   "tail_std": float(np.mean(stds))}
            table.append(row)
            print(f"clip {clip:g} lstm {lstm}: final mean {row['mean_final']:.4f}, "
                  f"last-{args.tail} std {row['tail_std']:.4f}")
    write_atomic(out / "sweep_summary.json", json.dumps(table, indent=2, sort_keys=True) + "\n")
    return 0


def cmd_bench(args) -> int:
    cfg = _config(args, "mfhppo")
    res = bench_scaling(cfg, args.counts, episodes=args.bench_episodes,
                        episode_length=args.episode_length, repeats=args.repeats)
    print(res.table(), end="")
    print(f"fitted exponent of time vs UAV count: {res.exponent:.3f}")
    return 0


def cmd_chart(args) -> int:
    path = emit_chart(args.csv, args.output, title=args.title or Path(args.csv).stem)
    print(f"wrote {path}")
    return 0


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="uavaoi",
                                     description="UAV age-of-information experiments")
    parser.add_argument("-v", "--verbose", action="store_true")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("train", help="train MF-HPPO on every configured seed")
    _common(p)
    p.add_argument("--episodes", type=int)
    p.add_argument("--no-compare", action="store_true", help="skip the baseline runs")
    p.set_defaults(func=cmd_train)

    p = sub.add_parser("baseline", help="run a comparison policy")
    _common(p)
    p.add_argument("--policy", choices=("rstd", "namas", "madqn"), required=True)
    p.add_argument("--episodes", type=int)
    p.set_defaults(func=cmd_baseline)

    p = sub.add_parser("eval", help="play a trained checkpoint without learning")
    _common(p)
    p.add_argument("--checkpoint", required=True)
    p.add_argument("--episodes", type=int, default=20)
    p.set_defaults(func=cmd_eval)

    p = sub.add_parser("fpk-check", help="grid-refinement check of the FPK residual")
    p.add_argument("--case", action="append", choices=sorted(CASES))
    p.add_argument("--cells", type=_ints, default=(16, 32, 64))
    p.add_argument("--out", help="output directory (default $UAVAOI_OUTPUT_DIR or ./results)")
    p.set_defaults(func=cmd_fpk)

    p = sub.add_parser("sweep", help="clip threshold by LSTM on/off grid")
    _common(p)
    p.add_argument("--episodes", type=int)
    p.add_argument("--clips", type=_floats, default=(0.1, 0.2, 0.3))
    p.add_argument("--lstm", type=lambda t: tuple(t.split(",")), default=("on", "off"))
    p.add_argument("--tail", type=int, default=100, help="episodes in the stability window")
    p.set_defaults(func=cmd_sweep)

    p = sub.add_parser("bench", help="training time against the number of UAVs")
    _common(p)
    p.add_argument("--counts", type=_ints, default=(2, 4, 8))
    p.add_argument("--bench-episodes", type=int, default=2)
    p.add_argument("--episode-length", type=int)
    p.add_argument("--repeats", type=int, default=1)
    p.set_defaults(func=cmd_bench)

    p = sub.add_parser("chart", help="SVG chart of a metrics CSV")
    p.add_argument("csv")
    p.add_argument("output")
    p.add_argument("--title")
    p.set_defaults(func=cmd_chart)
    return parser


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    logging.basicConfig(level=logging.DEBUG if args.verbose else logging.WARNING)
    if getattr(args, "lstm", None):
        bad = [v for v in args.lstm if v not in ("on", "off")]
        if bad:
            parser.error(f"--lstm takes on/off values, got {bad}")
    try:
        return args.func(args)
    except (ConfigError, ValueError, OSError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2


if __name__ == "__main__":
    sys.exit(main())
