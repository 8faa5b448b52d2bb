"""Multi-seed experiment driver: CSV logs, checkpoints, resume, manifest.

A run directory holds, per seed, a telemetry CSV (one row per iteration) and
a checkpoint refreshed every ``checkpoint_interval`` iterations, plus the
resolved config, an across-seed aggregate CSV, a JSON manifest, and
optionally an SVG of the learning curves.

Runs are resumable: with an existing checkpoint the trainer restarts from the
last saved iteration and any CSV rows past it (from a crash mid-interval) are
dropped, so a resumed run converges to the same files as an uninterrupted
one. Floats are written with ``repr`` so same-seed reruns are byte-identical
when driven by a deterministic clock.
"""

from __future__ import annotations

import dataclasses
import json
import os
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass
from typing import Callable, Sequence

import numpy as np

from marppo.config import ExperimentConfig
from marppo.nn import ContractError
from marppo.plot import plot_learning_curves
from marppo.trainer import Trainer, TrainStats


def _fmt_value(v) -> str:
    if isinstance(v, bool):
        return "true" if v else "false"
    if isinstance(v, float):
        return repr(v)
    return str(v)


def write_config_file(config: ExperimentConfig, path: str) -> None:
    with open(path, "w", encoding="utf-8") as fh:
        for f in dataclasses.fields(config):
            fh.write(f"{f.name} = {_fmt_value(getattr(config, f.name))}\n")


def write_stats_csv(path: str, rows: Sequence[TrainStats]) -> None:
    with open(path, "w", encoding="utf-8", newline="") as fh:
        fh.write(",".join(TrainStats.CSV_FIELDS) + "\n")
        for row in rows:
            fh.write(",".join(_fmt_value(v) for v in row.row()) + "\n")


def read_stats_csv(path: str) -> list[TrainStats]:
    with open(path, "r", encoding="utf-8") as fh:
        header = fh.readline().strip().split(",")
        if tuple(header) != TrainStats.CSV_FIELDS:
            raise ContractError(f"{path}: unexpected CSV header {header}")
        rows = []
        for line in fh:
            if not line.strip():
                continue
            vals = line.strip().split(",")
            rows.append(TrainStats(int(vals[0]), *[float(v) for v in vals[1:]]))
    return rows


@dataclass
class RunManifest:
    """What an experiment directory contains; stored as manifest.json."""

    out_dir: str
    config: dict
    seeds: list[int]
    iterations: int
    seed_csvs: dict[str, str]
    checkpoints: dict[str, str]
    aggregate_csv: str
    plot_svg: str | None = None

    def save(self, path: str) -> None:
        with open(path, "w", encoding="utf-8") as fh:
            json.dump(dataclasses.asdict(self), fh, indent=2, sort_keys=True)
            fh.write("\n")

    @classmethod
    def load(cls, path: str) -> "RunManifest":
        with open(path, "r", encoding="utf-8") as fh:
            return cls(**json.load(fh))


def run_seed(config: ExperimentConfig, out_dir: str, seed: int,
             clock: Callable[[], float] | None = None,
             log: Callable[[str], None] | None = None,
             resume: bool = True) -> list[TrainStats]:
    """Trains one seed to config.iterations, writing CSV and checkpoints."""
    cfg = config.replace(seed=seed).validate()
    csv_path = os.path.join(out_dir, f"seed{seed}.csv")
    ck_path = os.path.join(out_dir, f"seed{seed}.ckpt")
    trainer = Trainer(cfg) if clock is None else Trainer(cfg, clock=clock)

    rows: list[TrainStats] = []
    if resume and os.path.exists(ck_path):
        trainer.load_checkpoint(ck_path)
        if os.path.exists(csv_path):
            rows = [r for r in read_stats_csv(csv_path) if r.iteration <= trainer.iteration]
        if log:
            log(f"[seed {seed}] resuming from iteration {trainer.iteration}")
    write_stats_csv(csv_path, rows)

    with open(csv_path, "a", encoding="utf-8", newline="") as fh:
        while trainer.iteration < cfg.iterations:
            stats = trainer.train_iteration()
            rows.append(stats)
            fh.write(",".join(_fmt_value(v) for v in stats.row()) + "\n")
            fh.flush()
            at_interval = trainer.iteration % cfg.checkpoint_interval == 0
            if at_interval or trainer.iteration == cfg.iterations:
                trainer.save_checkpoint(ck_path)
            if log and (at_interval or trainer.iteration == cfg.iterations):
                log(f"[seed {seed}] iteration {stats.iteration}/{cfg.iterations} "
                    f"return {stats.mean_eval_return:.3f}")
    return rows


AGG_FIELDS = ("iteration", "mean_return", "std_return", "min_return", "max_return")


def write_aggregate_csv(path: str, rows_per_seed: Sequence[Sequence[TrainStats]]) -> None:
    """Across-seed summary of the evaluation returns, one row per iteration."""
    counts = {len(rows) for rows in rows_per_seed}
    if len(counts) != 1:
        raise ContractError(f"seeds disagree on iteration count: {sorted(counts)}")
    returns = np.array([[r.mean_eval_return for r in rows] for rows in rows_per_seed])
    with open(path, "w", encoding="utf-8", newline="") as fh:
        fh.write(",".join(AGG_FIELDS) + "\n")
        for t in range(returns.shape[1]):
            col = returns[:, t]
            vals = [rows_per_seed[0][t].iteration, float(col.mean()), float(col.std()),
                    float(col.min()), float(col.max())]
            fh.write(",".join(_fmt_value(v) for v in vals) + "\n")


def run_experiment(config: ExperimentConfig, out_dir: str, seeds: Sequence[int],
                   clock: Callable[[], float] | None = None,
                   log: Callable[[str], None] | None = None,
                   resume: bool = True, plot: bool = False,
                   parallel_seeds: bool = False) -> RunManifest:
    """Runs every seed, then writes the aggregate CSV, manifest, and plot.

    Seeds run sequentially unless parallel_seeds is set; per-seed output
    files are disjoint, so parallel execution changes nothing but wall time.
    """
    config.validate()
    if not seeds:
        raise ContractError("need at least one seed")
    if len(set(seeds)) != len(seeds):
        raise ContractError(f"duplicate seeds: {list(seeds)}")
    os.makedirs(out_dir, exist_ok=True)
    write_config_file(config, os.path.join(out_dir, "config.txt"))

    if parallel_seeds and len(seeds) > 1:
        with ThreadPoolExecutor(max_workers=len(seeds)) as pool:
            futures = [pool.submit(run_seed, config, out_dir, s,
                                   clock=clock, log=log, resume=resume)
                       for s in seeds]
            rows_per_seed = [f.result() for f in futures]
    else:
        rows_per_seed = [run_seed(config, out_dir, s, clock=clock, log=log, resume=resume)
                         for s in seeds]
    agg_path = os.path.join(out_dir, "aggregate.csv")
    write_aggregate_csv(agg_path, rows_per_seed)

    plot_path = None
    if plot and rows_per_seed[0]:
        plot_path = os.path.join(out_dir, "curves.svg")
        iters = np.array([r.iteration for r in rows_per_seed[0]])
        returns = np.array([[r.mean_eval_return for r in rows] for rows in rows_per_seed])
        label = f"{config.variant} beta={config.beta:g} ({len(seeds)} seeds)"
        plot_learning_curves(
            [(label, iters, returns.mean(axis=0), returns.std(axis=0))],
            plot_path, title=f"{config.env}: evaluation return")

    manifest = RunManifest(
        out_dir=out_dir,
        config=dataclasses.asdict(config),
        seeds=list(seeds),
        iterations=config.iterations,
        seed_csvs={str(s): f"seed{s}.csv" for s in seeds},
        checkpoints={str(s): f"seed{s}.ckpt" for s in seeds
                     if os.path.exists(os.path.join(out_dir, f"seed{s}.ckpt"))},
        aggregate_csv="aggregate.csv",
        plot_svg="curves.svg" if plot_path else None,
    )
    manifest.save(os.path.join(out_dir, "manifest.json"))
    return manifest
