import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from csirl import envs
from csirl.data import ExpertDataset, load_trajectories
from csirl.sac import Actor
from csirl.trainer import (ConfigError, TrainConfig, auc, bc_train, evaluate, evaluate_policy,
                           load_actor, metrics_csv, parse_config_text, random_baseline,
                           read_metrics, scan_states, train, write_artifacts)


def small_config(path, **kw):
    base = dict(env="point_umaze", expert_path=str(path), total_steps=240, warmup_steps=60,
                warmup_fit=10, round_length=90, eval_every=120, eval_episodes=2,
                hidden="8,8", gen_hidden="8", n_critics=3, batch_agent=8, batch_expert=4)
    base.update(kw)
    return TrainConfig(**base)


@pytest.fixture(scope="module")
def umaze(expert_files):
    return ExpertDataset(load_trajectories(expert_files["point_umaze"]))


# ---- config -----------------------------------------------------------------

def test_defaults_follow_the_documented_values():
    cfg = TrainConfig()
    assert (cfg.warmup_steps, cfg.n_critics, cfg.delta, cfg.sigma, cfg.gamma, cfg.alpha) == \
        (1280, 5, 5.0, 0.2, 0.99, 0.2)
    assert (cfg.lr_actor, cfg.lr_critic, cfg.lr1, cfg.lr2, cfg.lr3) == (3e-4, 3e-4, 1e-3, 1e-3, 1e-2)
    assert (cfg.batch_agent, cfg.batch_expert, cfg.buffer_capacity) == (64, 32, 1_000_000)
    assert (cfg.target_soft, cfg.eval_every, cfg.eval_episodes) == (0.05, 2000, 20)


def test_text_round_trip():
    cfg = TrainConfig(mode="sqil", seed=4, delta=3.5, hidden="16,16", identical_critics=True)
    assert TrainConfig.from_pairs(parse_config_text(cfg.to_text())) == cfg


def test_coercion_and_comments():
    pairs = parse_config_text("# header\ntotal_steps = 2e3\nbuffer_capacity=10_000\n"
                              "identical_critics=yes  # inline\n")
    cfg = TrainConfig.from_pairs(pairs)
    assert (cfg.total_steps, cfg.buffer_capacity, cfg.identical_critics) == (2000, 10_000, True)


@pytest.mark.parametrize("text", ["bogus_key=1", "total_steps=1.5", "identical_critics=maybe",
                                  "mode=gail", "env=cartpole", "lr1=0", "sigma=1.0",
                                  "round_length=0", "hidden=8,x", "total_steps=-5"])
def test_bad_config_rejected(text):
    with pytest.raises(ConfigError):
        TrainConfig.from_pairs(parse_config_text(text))


def test_line_without_equals_rejected():
    with pytest.raises(ConfigError, match="line 2"):
        parse_config_text("seed=1\nnonsense\n")


def test_digest_ignores_seed_only():
    a = TrainConfig(seed=1)
    assert a.digest() == TrainConfig(seed=2).digest()
    assert a.digest() != TrainConfig(seed=1, delta=4.0).digest()


# ---- auc --------------------------------------------------------------------

def test_auc_constant_and_ramp():
    assert auc([0, 10, 20], [0.5, 0.5, 0.5]) == pytest.approx(0.5)
    assert auc([0, 100], [0.0, 1.0]) == pytest.approx(0.5)


def test_auc_needs_two_points():
    with pytest.raises(ValueError):
        auc([0], [0.3])


@given(st.integers(0, 10_000))
def test_auc_matches_rectangle_rule(seed):
    rng = np.random.default_rng(seed)
    n = int(rng.integers(2, 12))
    steps = np.cumsum(rng.integers(1, 2000, n)).astype(float)
    rates = rng.random(n)
    m = 200_000
    mid = steps[0] + (np.arange(m) + 0.5) * (steps[-1] - steps[0]) / m
    rect = float(np.interp(mid, steps, rates).mean())
    assert abs(auc(steps, rates) - rect) <= 1e-3


# ---- behavioural cloning ------------------------------------------------------

def test_bc_singleton_converges():
    rng = np.random.default_rng(0)
    actor = Actor.create(2, 2, (16,), rng)
    s, a = np.array([[0.4, -0.2]]), np.array([[0.3, -0.6]])
    trace = bc_train(actor, s, a, 3000, lr=1e-2, batch_size=None)
    assert trace[-1] < 1e-7
    np.testing.assert_allclose(actor.mean_action(s), a, atol=1e-3)


def test_bc_loss_non_increasing_with_small_lr(umaze):
    actor = Actor.create(4, 2, (16,), np.random.default_rng(1), envs.make("point_umaze").obs_scale)
    s, a = umaze.states[:200], umaze.actions[:200]
    trace = np.array(bc_train(actor, s, a, 200, lr=1e-3, batch_size=None, optimizer="sgd"))
    assert np.all(np.diff(trace) <= 1e-6)
    assert trace[-1] < trace[0]


def test_bc_zero_steps_leaves_params():
    actor = Actor.create(2, 2, (4,), np.random.default_rng(2))
    before = actor.params.copy()
    assert bc_train(actor, np.ones((3, 2)), np.zeros((3, 2)), 0) == []
    np.testing.assert_array_equal(actor.params, before)


def test_bc_empty_dataset_rejected():
    with pytest.raises(ValueError):
        bc_train(Actor.create(2, 2, (4,), np.random.default_rng(3)), np.zeros((0, 2)),
                 np.zeros((0, 2)), 5)


# ---- evaluation -------------------------------------------------------------

def expert_policy(spec):
    return lambda S: np.stack([envs.expert_action(spec, s) for s in S])


@pytest.mark.parametrize("env", ["point_umaze", "lane_merge"])
def test_expert_controller_scores_near_one(env):
    spec = envs.make(env)
    assert evaluate_policy(spec, expert_policy(spec), 20, 100_000) >= 0.99


def test_random_actor_on_merge_is_low():
    spec = envs.make("lane_merge")
    actor = Actor.create(spec.state_dim, 2, (64, 64), np.random.default_rng(0), spec.obs_scale)
    assert evaluate(actor, spec, 20, 100_000) <= 0.2


def test_standing_still_scores_zero():
    spec = envs.make("point_umaze")
    assert evaluate_policy(spec, lambda S: np.zeros((len(S), 2)), 5) == pytest.approx(0.0,
                                                                                      abs=1e-9)


def test_evaluation_is_deterministic():
    spec = envs.make("point_umaze")
    actor = Actor.create(4, 2, (8,), np.random.default_rng(4), spec.obs_scale)
    assert evaluate(actor, spec, 4, 7) == evaluate(actor, spec, 4, 7)


# ---- scan positions -----------------------------------------------------------

@given(st.integers(1, 300), st.integers(1, 40))
def test_scan_states_cover_the_final_state(T, stride):
    idx = scan_states(np.zeros((T + 1, 2)), stride)
    assert idx[0] == 0 and idx[-1] == T and np.all(np.diff(idx) > 0)
    assert np.all(np.diff(idx)[:-1] == stride)


# ---- training runs --------------------------------------------------------

def test_total_steps_zero_initialises(umaze, tmp_path):
    cfg = small_config("x", total_steps=0)
    res = train(cfg, umaze, tmp_path / "run")
    assert [m["step"] for m in res.metrics] == [0] and res.steps_done == 0
    assert sorted(p.name for p in (tmp_path / "run").iterdir()) == \
        ["checkpoint.npz", "config.txt", "metrics.csv", "subgoals.jsonl"]
    actor, meta = load_actor(tmp_path / "run" / "checkpoint.npz")
    np.testing.assert_array_equal(actor.params, res.actor.params)
    assert meta["mode"] == "csirl"


def test_csirl_run_records_in_bounds_subgoals(umaze):
    res = train(small_config("x"), umaze)
    assert res.meta_updates > 0 and not res.halted
    assert [m["step"] for m in res.metrics] == [0, 120, 240]
    assert len(res.subgoals) == 2
    for rec in res.subgoals:
        traj = umaze.trajectories[rec["trajectory_id"]]
        assert 0 <= rec["index"] <= len(traj)
    for m in res.metrics:
        assert 0.0 <= m["accomplish_rate"] <= 1.0


def test_runs_are_deterministic(umaze):
    a = train(small_config("x", seed=3), umaze)
    b = train(small_config("x", seed=3), umaze)
    assert metrics_csv(a.metrics, wall=False) == metrics_csv(b.metrics, wall=False)
    assert a.subgoals == b.subgoals
    np.testing.assert_array_equal(a.actor.params, b.actor.params)


def test_csirl_b_never_updates_generator(umaze):
    res = train(small_config("x", mode="csirl_b"), umaze)
    assert res.meta_updates == 0
    np.testing.assert_array_equal(res.generator.params, res.generator_init)


def test_csirl_updates_generator(umaze):
    res = train(small_config("x"), umaze)
    assert not np.array_equal(res.generator.params, res.generator_init)


@pytest.mark.parametrize("mode", ["sqil", "sac_oracle", "bc"])
def test_baseline_modes_have_no_curriculum(umaze, mode):
    res = train(small_config("x", mode=mode), umaze)
    assert res.subgoals == [] and res.generator is None and res.meta_updates == 0
    assert all(m["subgoal_index"] == -1 for m in res.metrics)
    assert res.metrics[-1]["step"] == 240


def test_identical_critics_halt_in_first_round(umaze):
    res = train(small_config("x", identical_critics=True), umaze)
    assert res.halted and res.steps_done == 60
    assert res.subgoals == [{"round": 1, "trajectory_id": res.subgoals[0]["trajectory_id"],
                             "index": None, "uncertainty": None, "ratio": None}]
    assert res.meta_updates == 0


def test_env_mismatch_is_config_error(expert_files):
    merge = ExpertDataset(load_trajectories(expert_files["lane_merge"]))
    with pytest.raises(ConfigError, match="expert dataset"):
        train(small_config("x"), merge)


def test_missing_dataset(tmp_path):
    with pytest.raises(FileNotFoundError):
        train(small_config(tmp_path / "nope.jsonl"))


def test_n_expert_limits_dataset(expert_files):
    res = train(small_config(expert_files["point_umaze"], n_expert=1, total_steps=150))
    assert {r["trajectory_id"] for r in res.subgoals} == {0}


def test_artifacts_round_trip(umaze, tmp_path):
    cfg = small_config("x", mode="bc", total_steps=30, eval_every=10)
    res = train(cfg, umaze)
    write_artifacts(tmp_path, cfg, res)
    back = read_metrics(tmp_path / "metrics.csv")
    assert [m["step"] for m in back] == [0, 10, 20, 30]
    assert (tmp_path / "metrics.csv").read_text().splitlines()[0] == \
        "step,mode,accomplish_rate,subgoal_index,wall_ms"
    assert [m["accomplish_rate"] for m in back] == [m["accomplish_rate"] for m in res.metrics]
    assert TrainConfig.from_pairs(parse_config_text((tmp_path / "config.txt").read_text())) == cfg


def test_stop_rate_ends_training_at_first_qualifying_eval(umaze):
    full = train(small_config("x", mode="sac_oracle"), umaze)
    first = next(m for m in full.metrics[1:] if m["accomplish_rate"] > 0)
    res = train(small_config("x", mode="sac_oracle", stop_rate=first["accomplish_rate"]), umaze)
    assert res.steps_done == first["step"]
    strip = lambda ms: [(m["step"], m["accomplish_rate"]) for m in ms]  # noqa: E731
    assert strip(res.metrics) == strip(full.metrics[:len(res.metrics)])
