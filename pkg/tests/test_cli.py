import csv

import pytest

from csirl import envs
from csirl.cli import main, run_dir_name, resolve_config
from csirl.data import load_trajectories
from csirl.trainer import auc, read_metrics

CONFIG = """# tiny run
env=point_umaze
total_steps=240
warmup_steps=60
warmup_fit=10
round_length=90
eval_every=120
eval_episodes=2
hidden=8,8
gen_hidden=8
n_critics=3
batch_agent=8
batch_expert=4
"""


@pytest.fixture
def config_file(tmp_path, expert_files):
    path = tmp_path / "tiny.cfg"
    path.write_text(CONFIG + f"expert_path={expert_files['point_umaze']}\n")
    return path


def run_train(config_file, runs, *overrides, capsys=None):
    argv = ["train", "--config", str(config_file), "--runs", str(runs), "--quiet"]
    for o in overrides:
        argv += ["--override", o]
    return main(argv)


def reached_goal(traj):
    return bool(envs.in_goal(envs.make(traj.env), traj.states[-1]))


def only_run(runs):
    dirs = [p for p in runs.iterdir() if p.is_dir()]
    assert len(dirs) == 1
    return dirs[0]


# ---- gen-expert -------------------------------------------------------------

def test_gen_expert_single_trajectory(tmp_path, capsys):
    out = tmp_path / "one.jsonl"
    assert main(["gen-expert", "--env", "point_umaze", "--n", "1", "--out", str(out)]) == 0
    trajs = load_trajectories(out)
    assert len(trajs) == 1 and reached_goal(trajs[0])
    assert "env=point_umaze" in capsys.readouterr().out


def test_gen_expert_unknown_env(tmp_path):
    with pytest.raises(SystemExit) as exc:
        main(["gen-expert", "--env", "bogus", "--out", str(tmp_path / "x.jsonl")])
    assert exc.value.code == 1


def test_gen_expert_nonpositive_n(tmp_path):
    assert main(["gen-expert", "--env", "point_umaze", "--n", "0",
                 "--out", str(tmp_path / "x.jsonl")]) == 1


def test_expert_files_are_all_successful(expert_files):
    trajs = load_trajectories(expert_files["point_umaze"])
    assert len(trajs) == 25
    assert all(reached_goal(t) and t.dones[-1] for t in trajs)


# ---- argument handling ------------------------------------------------------

def test_unknown_flag_is_usage_error(config_file):
    with pytest.raises(SystemExit) as exc:
        main(["train", "--config", str(config_file), "--bogus"])
    assert exc.value.code == 1


def test_unknown_config_key_is_usage_error(config_file, tmp_path):
    assert run_train(config_file, tmp_path / "runs", "learning_speed=3") == 1


def test_malformed_override_is_usage_error(config_file, tmp_path):
    assert run_train(config_file, tmp_path / "runs", "seed") == 1


def test_missing_config_file_is_usage_error(tmp_path):
    assert main(["train", "--config", str(tmp_path / "none.cfg")]) == 1


def test_overrides_win_over_file(config_file):
    cfg = resolve_config(config_file, ["mode=csirl_b", "seed=9", "seed=11"])
    assert (cfg.mode, cfg.seed, cfg.total_steps) == ("csirl_b", 11, 240)


# ---- train --------------------------------------------------------------------

def test_train_zero_steps_writes_artifacts(config_file, tmp_path, capsys):
    runs = tmp_path / "runs"
    assert run_train(config_file, runs, "total_steps=0") == 0
    run = only_run(runs)
    cfg = resolve_config(config_file, ["total_steps=0"])
    assert run.name == run_dir_name(cfg) and run.name.endswith("-seed0")
    assert {p.name for p in run.iterdir()} == {"config.txt", "metrics.csv", "subgoals.jsonl",
                                              "checkpoint.npz"}
    assert [m["step"] for m in read_metrics(run / "metrics.csv")] == [0]
    out = capsys.readouterr().out
    # the resolved config is echoed, and it is exactly what was written
    for line in (run / "config.txt").read_text().splitlines():
        assert line in out.splitlines()


def test_existing_run_directory_is_error(config_file, tmp_path):
    runs = tmp_path / "runs"
    assert run_train(config_file, runs, "total_steps=0") == 0
    before = (only_run(runs) / "metrics.csv").read_bytes()
    assert run_train(config_file, runs, "total_steps=0") == 2
    assert (only_run(runs) / "metrics.csv").read_bytes() == before


def test_missing_dataset_is_runtime_error(config_file, tmp_path, capsys):
    assert run_train(config_file, tmp_path / "runs",
                     f"expert_path={tmp_path / 'nope.jsonl'}") == 2
    assert "error [trainer]" in capsys.readouterr().err
    assert not any((tmp_path / "runs").iterdir())


def test_same_config_twice_gives_identical_metrics(config_file, tmp_path):
    a, b = tmp_path / "a", tmp_path / "b"
    assert run_train(config_file, a) == 0
    assert run_train(config_file, b) == 0
    ra, rb = only_run(a), only_run(b)
    assert ra.name == rb.name

    def without_wall(path):
        rows = list(csv.reader(path.read_text().splitlines()))
        return [r[:-1] for r in rows]

    assert without_wall(ra / "metrics.csv") == without_wall(rb / "metrics.csv")
    assert (ra / "subgoals.jsonl").read_bytes() == (rb / "subgoals.jsonl").read_bytes()
    assert (ra / "config.txt").read_bytes() == (rb / "config.txt").read_bytes()


def test_ablation_override(config_file, tmp_path):
    runs = tmp_path / "runs"
    assert run_train(config_file, runs, "mode=csirl_b", "total_steps=120") == 0
    assert {m["mode"] for m in read_metrics(only_run(runs) / "metrics.csv")} == {"csirl_b"}


# ---- eval -------------------------------------------------------------------

def test_eval_prints_rate(config_file, tmp_path, capsys):
    runs = tmp_path / "runs"
    run_train(config_file, runs, "total_steps=0")
    ck = only_run(runs) / "checkpoint.npz"
    capsys.readouterr()
    assert main(["eval", "--checkpoint", str(ck), "--episodes", "2", "--seed", "100000"]) == 0
    line = [l for l in capsys.readouterr().out.splitlines() if l.startswith("accomplish_rate=")]
    first = read_metrics(only_run(runs) / "metrics.csv")[0]["accomplish_rate"]
    assert float(line[0].split("=")[1]) == first


def test_eval_missing_checkpoint(tmp_path):
    assert main(["eval", "--checkpoint", str(tmp_path / "none.npz")]) == 2


# ---- export-plots -----------------------------------------------------------

def test_export_plots_single_run(config_file, tmp_path):
    runs = tmp_path / "runs"
    assert run_train(config_file, runs, "mode=bc", "total_steps=30", "eval_every=15") == 0
    run = only_run(runs)
    out = tmp_path / "plots"
    assert main(["export-plots", "--run", str(run), "--out", str(out)]) == 0
    rows = (out / "accomplish_rate.csv").read_text().splitlines()
    assert len(rows) == 3
    metrics = read_metrics(run / "metrics.csv")
    summary = list(csv.DictReader((out / "summary.csv").open()))
    assert len(summary) == 1
    assert float(summary[0]["auc"]) == auc([m["step"] for m in metrics],
                                           [m["accomplish_rate"] for m in metrics])
    assert float(summary[0]["final_accomplish_rate"]) == metrics[-1]["accomplish_rate"]


def test_export_plots_side_by_side_sorted(config_file, tmp_path):
    runs = tmp_path / "runs"
    assert run_train(config_file, runs, "mode=sqil", "total_steps=120", "warmup_steps=60") == 0
    assert run_train(config_file, runs, "mode=csirl_b", "total_steps=120") == 0
    out = tmp_path / "plots"
    dirs = sorted(p for p in runs.iterdir() if p.is_dir())
    assert main(["export-plots", "--out", str(out)] +
                [a for d in dirs for a in ("--run", str(d))]) == 0
    summary = list(csv.DictReader((out / "summary.csv").open()))
    assert [r["mode"] for r in summary] == ["csirl_b", "sqil"]
    for d in dirs:
        assert (out / d.name / "accomplish_rate.csv").exists()


def test_export_plots_missing_metrics(tmp_path):
    (tmp_path / "empty").mkdir()
    assert main(["export-plots", "--run", str(tmp_path / "empty"), "--out",
                 str(tmp_path / "o")]) == 2
