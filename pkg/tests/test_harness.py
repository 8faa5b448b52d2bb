import json
import os

import numpy as np
import pytest

from marppo.cli import main
from marppo.config import ExperimentConfig, parse_config
from marppo.harness import (
    AGG_FIELDS,
    RunManifest,
    read_stats_csv,
    run_experiment,
    run_seed,
    write_config_file,
    write_stats_csv,
)
from marppo.nn import ContractError


def zero_clock() -> float:
    return 0.0


def small_cfg(**kw) -> ExperimentConfig:
    base = dict(env="diagnostic", n_agents=2, n_envs=2, horizon=6, iterations=4,
                variant="lstm-icf", epochs=2, batch_size=24, chunk_len=3,
                actor_hidden=8, critic_hidden=8, eval_episodes=8,
                checkpoint_interval=2, lr=1e-3)
    base.update(kw)
    return ExperimentConfig(**base).validate()


def test_config_file_round_trips(tmp_path):
    cfg = small_cfg(beta=0.25, normalize_advantages=False)
    path = tmp_path / "config.txt"
    write_config_file(cfg, str(path))
    assert parse_config(str(path)) == cfg


def test_stats_csv_round_trips_exactly(tmp_path):
    from marppo.trainer import Trainer
    tr = Trainer(small_cfg(), clock=zero_clock)
    rows = [tr.train_iteration() for _ in range(2)]
    path = tmp_path / "log.csv"
    write_stats_csv(str(path), rows)
    assert read_stats_csv(str(path)) == rows
    with pytest.raises(ContractError, match="header"):
        bad = tmp_path / "bad.csv"
        bad.write_text("nope,nope\n")
        read_stats_csv(str(bad))


def test_run_experiment_layout_and_aggregate(tmp_path):
    out = str(tmp_path / "run")
    manifest = run_experiment(small_cfg(), out, seeds=[0, 1], clock=zero_clock)
    for rel in ["config.txt", "manifest.json", "aggregate.csv",
                "seed0.csv", "seed1.csv", "seed0.ckpt", "seed1.ckpt"]:
        assert os.path.exists(os.path.join(out, rel)), rel
    assert manifest.seeds == [0, 1]
    assert RunManifest.load(os.path.join(out, "manifest.json")) == manifest

    rows0 = read_stats_csv(os.path.join(out, "seed0.csv"))
    rows1 = read_stats_csv(os.path.join(out, "seed1.csv"))
    assert [r.iteration for r in rows0] == [1, 2, 3, 4]
    with open(os.path.join(out, "aggregate.csv")) as fh:
        agg = [line.strip().split(",") for line in fh]
    assert agg[0] == ["iteration", "mean_return", "std_return", "min_return", "max_return"]
    assert len(agg) == 5
    got_mean = float(agg[1][1])
    want = np.mean([rows0[0].mean_eval_return, rows1[0].mean_eval_return])
    assert abs(got_mean - want) < 1e-12


def test_same_seed_reruns_are_byte_identical(tmp_path):
    out_a, out_b = str(tmp_path / "a"), str(tmp_path / "b")
    run_experiment(small_cfg(), out_a, seeds=[0], clock=zero_clock)
    run_experiment(small_cfg(), out_b, seeds=[0], clock=zero_clock)
    for rel in ("seed0.csv", "aggregate.csv", "seed0.ckpt", "config.txt"):
        a = open(os.path.join(out_a, rel), "rb").read()
        b = open(os.path.join(out_b, rel), "rb").read()
        assert a == b, rel


def test_threaded_rollouts_reproduce_serial_csv(tmp_path):
    out_a, out_b = str(tmp_path / "serial"), str(tmp_path / "threaded")
    run_experiment(small_cfg(rollout_workers=1), out_a, seeds=[0], clock=zero_clock)
    run_experiment(small_cfg(rollout_workers=3), out_b, seeds=[0], clock=zero_clock)
    a = open(os.path.join(out_a, "seed0.csv"), "rb").read()
    b = open(os.path.join(out_b, "seed0.csv"), "rb").read()
    assert a == b


def test_resume_after_interruption_matches_uninterrupted(tmp_path):
    cfg = small_cfg()
    straight = str(tmp_path / "straight")
    run_seed(cfg, os.makedirs(straight) or straight, 0, clock=zero_clock)

    resumed = str(tmp_path / "resumed")
    os.makedirs(resumed)
    run_seed(cfg.replace(iterations=2), resumed, 0, clock=zero_clock)
    # simulate a crash that logged one row past the last checkpoint
    with open(os.path.join(resumed, "seed0.csv"), "a") as fh:
        fh.write("3,9.9,0.0,0.0,0.0,0.0,0.0,0.0\n")
    run_seed(cfg, resumed, 0, clock=zero_clock)

    a = open(os.path.join(straight, "seed0.csv"), "rb").read()
    b = open(os.path.join(resumed, "seed0.csv"), "rb").read()
    assert a == b
    rows = read_stats_csv(os.path.join(resumed, "seed0.csv"))
    assert [r.iteration for r in rows] == [1, 2, 3, 4]
    assert all(r.mean_eval_return != 9.9 for r in rows)


# --- command line -----------------------------------------------------------


def write_cli_cfg(tmp_path) -> str:
    path = tmp_path / "small.cfg"
    lines = [f"{k} = {v}" for k, v in dict(
        env="diagnostic", n_agents=2, n_envs=2, horizon=6, iterations=4,
        variant="lstm-icf", epochs=2, batch_size=24, chunk_len=3,
        actor_hidden=8, critic_hidden=8, eval_episodes=8,
        checkpoint_interval=2, lr=0.001).items()]
    path.write_text("\n".join(lines) + "\n")
    return str(path)


def test_cli_runs_and_reports(tmp_path, capsys):
    out = str(tmp_path / "out")
    rc = main(["--config", write_cli_cfg(tmp_path), "--iterations", "2",
               "--seeds", "3,7", "--out", out])
    assert rc == 0
    captured = capsys.readouterr()
    assert "manifest.json" in captured.out
    assert "[seed 3]" in captured.out and "[seed 7]" in captured.out
    manifest = RunManifest.load(os.path.join(out, "manifest.json"))
    assert manifest.seeds == [3, 7]
    assert manifest.config["iterations"] == 2
    assert [r.iteration for r in read_stats_csv(os.path.join(out, "seed7.csv"))] == [1, 2]


def test_cli_single_seed_flag(tmp_path, capsys):
    out = str(tmp_path / "out")
    rc = main(["--config", write_cli_cfg(tmp_path), "--iterations", "1",
               "--seed", "5", "--out", out, "--quiet"])
    assert rc == 0
    assert RunManifest.load(os.path.join(out, "manifest.json")).seeds == [5]


def test_cli_plot_flag_writes_svg(tmp_path, capsys):
    out = str(tmp_path / "out")
    rc = main(["--config", write_cli_cfg(tmp_path), "--iterations", "1",
               "--out", out, "--plot", "--quiet"])
    assert rc == 0
    assert capsys.readouterr().out == ""
    assert os.path.exists(os.path.join(out, "curves.svg"))
    assert RunManifest.load(os.path.join(out, "manifest.json")).plot_svg == "curves.svg"


def test_cli_rejects_bad_arguments(tmp_path, capsys):
    with pytest.raises(SystemExit):
        main(["--variant", "made-up", "--out", str(tmp_path)])
    capsys.readouterr()

    rc = main(["--config", write_cli_cfg(tmp_path), "--beta", "7.0",
               "--out", str(tmp_path / "x")])
    assert rc == 2
    assert "beta" in capsys.readouterr().err

    with pytest.raises(SystemExit):
        main(["--config", write_cli_cfg(tmp_path), "--seeds", "a,b",
              "--out", str(tmp_path / "y")])
    assert "comma-separated" in capsys.readouterr().err

    rc = main(["--config", write_cli_cfg(tmp_path), "--seeds", "1,1",
               "--out", str(tmp_path / "z")])
    assert rc == 2
    assert "duplicate" in capsys.readouterr().err


def test_zero_iteration_run_is_header_only(tmp_path):
    out = str(tmp_path / "out")
    manifest = run_experiment(small_cfg(iterations=0), out, seeds=[0], clock=zero_clock)
    assert read_stats_csv(os.path.join(out, "seed0.csv")) == []
    with open(os.path.join(out, "aggregate.csv")) as fh:
        assert fh.read() == ",".join(AGG_FIELDS) + "\n"
    assert manifest.iterations == 0
    assert manifest.checkpoints == {}
    assert RunManifest.load(os.path.join(out, "manifest.json")) == manifest


def test_parallel_seeds_match_sequential(tmp_path):
    out_a, out_b = str(tmp_path / "a"), str(tmp_path / "b")
    run_experiment(small_cfg(), out_a, seeds=[0, 1, 2], clock=zero_clock)
    run_experiment(small_cfg(), out_b, seeds=[0, 1, 2], clock=zero_clock,
                   parallel_seeds=True)
    for name in ("seed0.csv", "seed1.csv", "seed2.csv", "aggregate.csv"):
        a = open(os.path.join(out_a, name), "rb").read()
        b = open(os.path.join(out_b, name), "rb").read()
        assert a == b, name
