"""Run one algorithm over a list of seeds and write CSV, JSON and checkpoints.

Layout under the output directory, for algorithm ``alg``::

    alg.csv                  merged per-episode metrics for every seed
    alg_summary.json         final-window means, baseline comparison, config echo
    seeds/alg_seed<k>.csv    per-seed metrics (written by the worker for that seed)
    alg_seed<k>.params.json  trained parameters (MF-HPPO only)
    alg.resume.json          present only while a run is incomplete

Rerunning after an interruption skips seeds already listed in the resume
marker and merges their existing per-seed files.
"""
from __future__ import annotations

import csv
import io
import json
import os
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from ..baselines import run_namas, run_rstd
from ..baselines.madqn import madqn_train
from ..errors import ConfigError
from ..mfhppo.train import train
from ..neural.checkpoint import save_checkpoint
from ..rollout import EpisodeMetrics
from .config import ExperimentConfig

CSV_COLUMNS = ("seed", "episode", "mean_cost", "moving_avg_cost", "wall_ms")
OUTPUT_ENV = "UAVAOI_OUTPUT_DIR"


class ArtifactIOError(OSError):
    """A result file could not be read or written; ``path`` names it."""

    def __init__(self, path, exc: Exception):
        self.path = str(path)
        super().__init__(f"{path}: {exc}")


def output_dir(explicit: str | os.PathLike | None = None) -> Path:
    """``explicit`` if given, else ``$UAVAOI_OUTPUT_DIR``, else ``./results``."""
    return Path(explicit or os.environ.get(OUTPUT_ENV) or "results")


def moving_average(values, window: int) -> np.ndarray:
    """Trailing mean over at most ``window`` most recent values."""
    v = np.asarray(values, dtype=float)
    c = np.concatenate([[0.0], np.cumsum(v)])
    idx = np.arange(1, len(v) + 1)
    lo = np.maximum(0, idx - window)
    return (c[idx] - c[lo]) / (idx - lo)


def relative_improvement(baseline: float, ours: float) -> float:
    """Fractional cost reduction of ``ours`` relative to ``baseline``."""
    if baseline == 0:
        raise ZeroDivisionError("baseline cost is zero")
    return (baseline - ours) / baseline


def final_window_mean(costs, window: int) -> float:
    c = np.asarray(costs, dtype=float)
    return float(c[-min(window, len(c)):].mean())


def run_algorithm(cfg: ExperimentConfig, seed: int, algorithm: str | None = None,
                  on_episode=None):
    """Per-episode metrics for one seed, plus trained parameters when applicable."""
    alg = algorithm or cfg.experiment.algorithm
    exp = cfg.experiment
    if alg == "mfhppo":
        res = train(cfg.env, cfg.train, seed, on_episode)
        return res.metrics, res.state_dict()
    if alg == "rstd":
        return run_rstd(cfg.env, seed, exp.episodes, exp.episode_length), None
    if alg == "namas":
        return run_namas(cfg.env, seed, exp.episodes, exp.episode_length, cfg.namas_radius), None
    if alg == "madqn":
        return madqn_train(cfg.env, cfg.dqn, seed, on_episode).metrics, None
    raise ConfigError(f"unknown algorithm {alg!r}")


def format_rows(seed: int, metrics: list[EpisodeMetrics], window: int, timing: bool) -> list:
    costs = [m.mean_cost for m in metrics]
    ma = moving_average(costs, window)
    return [(seed, m.episode, f"{m.mean_cost:.10g}", f"{a:.10g}",
             f"{m.wall_ms:.3f}" if timing else "0")
            for m, a in zip(metrics, ma)]


def csv_text(rows) -> str:
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(CSV_COLUMNS)
    w.writerows(rows)
    return buf.getvalue()


def write_atomic(path: Path, text: str) -> None:
    try:
        path.parent.mkdir(parents=True, exist_ok=True)
        tmp = path.with_name(path.name + ".tmp")
        tmp.write_text(text, encoding="utf-8")
        tmp.replace(path)
    except OSError as exc:
        raise ArtifactIOError(path, exc) from exc


def read_csv(path) -> list[dict]:
    """Rows of a metrics CSV as dicts of floats (``seed`` and ``episode`` as ints)."""
    path = Path(path)
    try:
        text = path.read_text(encoding="utf-8")
    except OSError as exc:
        raise ArtifactIOError(path, exc) from exc
    reader = csv.reader(io.StringIO(text))
    header = next(reader, None)
    if header is None or tuple(header) != CSV_COLUMNS:
        raise ValueError(f"{path}:1: expected header {','.join(CSV_COLUMNS)}")
    rows = []
    for lineno, rec in enumerate(reader, start=2):
        if len(rec) != len(CSV_COLUMNS):
            raise ValueError(f"{path}:{lineno}: expected {len(CSV_COLUMNS)} fields, got {len(rec)}")
        try:
            rows.append({"seed": int(rec[0]), "episode": int(rec[1]),
                         "mean_cost": float(rec[2]), "moving_avg_cost": float(rec[3]),
                         "wall_ms": float(rec[4])})
        except ValueError as exc:
            raise ValueError(f"{path}:{lineno}: {exc}") from exc
    return rows


def _seed_job(args):
    cfg, seed, seed_csv, ckpt = args
    metrics, params = run_algorithm(cfg, seed)
    rows = format_rows(seed, metrics, cfg.experiment.moving_average, cfg.experiment.timing)
    write_atomic(Path(seed_csv), csv_text(rows))
    if params is not None:
        try:
            save_checkpoint(ckpt, params, {"seed": seed, "config": cfg.to_dict()})
        except OSError as exc:
            raise ArtifactIOError(ckpt, exc) from exc
    return seed


@dataclass
class ExperimentResult:
    csv_path: Path
    summary_path: Path
    summary: dict


def run_experiment(cfg: ExperimentConfig, out_dir=None, compare: bool = True) -> ExperimentResult:
    """Run every seed, merge the CSVs and write the JSON summary.

    With ``compare`` the baselines named in the config are run on the same
    seeds (or read back from their CSVs when present) and the summary reports
    ``(baseline - ours) / baseline`` for each.
    """
    exp = cfg.experiment
    if not exp.seeds:
        raise ConfigError("need at least one seed")
    out = output_dir(out_dir)
    alg = exp.algorithm
    marker = out / f"{alg}.resume.json"
    done: list[int] = []
    if marker.exists():
        try:
            state = json.loads(marker.read_text(encoding="utf-8"))
        except (OSError, ValueError) as exc:
            raise ArtifactIOError(marker, exc) from exc
        if state.get("config") == cfg.to_dict():
            done = [s for s in state.get("completed", [])
                    if (out / "seeds" / f"{alg}_seed{s}.csv").exists()]
    todo = [s for s in exp.seeds if s not in done]

    def mark():
        write_atomic(marker, json.dumps({"config": cfg.to_dict(), "completed": sorted(done)},
                                  sort_keys=True, indent=2))

    mark()
    jobs = [(cfg, s, out / "seeds" / f"{alg}_seed{s}.csv", out / f"{alg}_seed{s}.params.json")
            for s in todo]
    if exp.workers > 1 and len(jobs) > 1:
        with ProcessPoolExecutor(max_workers=exp.workers) as pool:
            for seed in pool.map(_seed_job, jobs):
                done.append(seed)
                mark()
    else:
        for job in jobs:
            done.append(_seed_job(job))
            mark()

    # single-writer merge, in configured seed order
    merged = []
    for s in exp.seeds:
        merged.extend(read_csv(out / "seeds" / f"{alg}_seed{s}.csv"))
    rows = [(r["seed"], r["episode"], f"{r['mean_cost']:.10g}", f"{r['moving_avg_cost']:.10g}",
             f"{r['wall_ms']:.3f}" if exp.timing else "0") for r in merged]
    csv_path = out / f"{alg}.csv"
    write_atomic(csv_path, csv_text(rows))

    summary = summarize(cfg, merged)
    if compare:
        summary["baselines"] = {}
        for b in exp.baselines:
            if b == alg:
                continue
            b_means = _baseline_means(cfg, b, out)
            ours = summary["per_seed"]
            summary["baselines"][b] = {
                "per_seed_final_mean": b_means,
                "mean_final": float(np.mean(list(b_means.values()))),
                "relative_improvement": relative_improvement(
                    float(np.mean(list(b_means.values()))), summary["mean_final"]),
                "per_seed_relative_improvement": {
                    k: relative_improvement(b_means[k], ours[k]) for k in ours},
            }
    summary_path = out / f"{alg}_summary.json"
    write_atomic(summary_path, json.dumps(summary, sort_keys=True, indent=2) + "\n")
    try:
        marker.unlink()
    except OSError as exc:
        raise ArtifactIOError(marker, exc) from exc
    return ExperimentResult(csv_path, summary_path, summary)


def summarize(cfg: ExperimentConfig, rows: list[dict]) -> dict:
    w = cfg.experiment.window
    per_seed = {}
    for s in cfg.experiment.seeds:
        costs = [r["mean_cost"] for r in rows if r["seed"] == s]
        per_seed[str(s)] = final_window_mean(costs, w)
    return {"algorithm": cfg.experiment.algorithm, "window": w, "per_seed": per_seed,
            "mean_final": float(np.mean(list(per_seed.values()))), "config": cfg.to_dict()}


def _baseline_means(cfg: ExperimentConfig, name: str, out: Path) -> dict:
    path = out / f"{name}.csv"
    means = {}
    rows = []
    # reuse an earlier baseline run only when it was made with the same settings
    try:
        prior = json.loads((out / f"{name}_summary.json").read_text(encoding="utf-8"))
        if prior.get("config") == cfg.with_algorithm(name).to_dict() and path.exists():
            rows = read_csv(path)
    except (OSError, ValueError):
        rows = []
    for s in cfg.experiment.seeds:
        costs = [r["mean_cost"] for r in rows if r["seed"] == s]
        if len(costs) != cfg.experiment.episodes:
            metrics, _ = run_algorithm(cfg, s, name)
            costs = [m.mean_cost for m in metrics]
        means[str(s)] = final_window_mean(costs, cfg.experiment.window)
    return means
