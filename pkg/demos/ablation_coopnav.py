"""Run the navigation ablation: full variant vs no-sharing baselines.

Three arms on cooperative navigation (3 agents), several seeds each:

  icf-b1    recurrent nets, woven critic sequence, full reward sharing
  icf-b0    same wiring, sharing switched off
  ff-nic    feed-forward nets, independent per-agent critic

Arm settings come from configs/ablation-*.cfg (shared knobs; only variant
and mixing weight differ). Each arm writes per-seed telemetry CSVs plus an
aggregate under demo_runs/ablation/<arm>/, then a combined SVG compares
the evaluation curves (mean over seeds, +/- one standard deviation band).

By default this runs a shortened version (3 seeds x 60 iterations,
roughly 10 minutes). The full protocol used by the acceptance test is
5 seeds x 300 iterations:

  python3 demos/ablation_coopnav.py --seeds 0,1,2,3,4 --iterations 300
"""

import argparse
import os

import numpy as np

from marppo.config import parse_config
from marppo.harness import read_stats_csv, run_experiment
from marppo.plot import plot_learning_curves

ARMS = ("icf-b1", "icf-b0", "ff-nic")
CONFIG_DIR = os.path.join(os.path.dirname(__file__), os.pardir, "configs")


def main():
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--seeds", default="0,1,2", help="comma-separated seed list")
    ap.add_argument("--iterations", type=int, default=60)
    ap.add_argument("--out", default="demo_runs/ablation")
    args = ap.parse_args()
    seeds = [int(s) for s in args.seeds.split(",")]

    curves = []
    finals = {}
    for name in ARMS:
        cfg = parse_config(os.path.join(CONFIG_DIR, f"ablation-{name}.cfg"),
                           {"iterations": args.iterations})
        out_dir = os.path.join(args.out, name)
        print(f"=== {name}: {len(seeds)} seeds x {args.iterations} iterations -> {out_dir}")
        run_experiment(cfg, out_dir, seeds, log=print)
        per_seed = [read_stats_csv(os.path.join(out_dir, f"seed{s}.csv")) for s in seeds]
        returns = np.array([[row.mean_eval_return for row in rows] for rows in per_seed])
        iters = np.array([row.iteration for row in per_seed[0]])
        curves.append((name, iters, returns.mean(axis=0), returns.std(axis=0, ddof=1)))
        finals[name] = returns[:, -1]

    svg_path = os.path.join(args.out, "ablation.svg")
    plot_learning_curves(curves, svg_path, title="cooperative navigation ablation")
    print(f"\nwrote {svg_path}")

    print("\nfinal-iteration evaluation return (mean +/- standard error over seeds):")
    for name, vals in finals.items():
        se = vals.std(ddof=1) / np.sqrt(len(vals)) if len(vals) > 1 else 0.0
        print(f"  {name:<12} {vals.mean():8.2f} +/- {se:.2f}")


if __name__ == "__main__":
    main()
