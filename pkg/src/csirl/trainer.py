"""Training loop, baselines and evaluation.

Modes
    ``csirl``       curricular subgoals, matching reward plus meta-learned intrinsic reward.
    ``csirl_b``     as ``csirl`` with the intrinsic reward fixed at zero.
    ``bc``          behavioural cloning on the expert pairs; no interaction.
    ``sqil``        SAC on 64 agent transitions (reward 0) plus 32 expert transitions (reward 1).
    ``sac_oracle``  SAC on the true task reward; a sanity ceiling.

``total_steps`` counts environment steps including the random warmup (for
``bc`` it counts gradient steps).  A positive ``stop_rate`` ends RL training
early at the first evaluation that reaches it.  Rounds of ``round_length`` steps start at
the end of warmup; at each round start an expert trajectory is drawn and the
subgoal is re-selected, and training stops when no subgoal qualifies.

Terminal handling.  Episode timeouts are never terminal.  For the shaped
curricular rewards a terminal next state (goal reached or crash) is treated
as absorbing: it keeps paying ``(1 - gamma) psi`` forever, which is worth
``psi(s', target)``.  A value of zero would make crashing attractive, because
the shaped values are negative.  The other modes bootstrap terminals with 0.
"""
from __future__ import annotations

import csv
import hashlib
import io
import json
import time
from dataclasses import dataclass, fields, asdict
from pathlib import Path

import numpy as np

from . import curriculum as cur
from . import envs
from .data import ExpertDataset, ReplayBuffer, load_trajectories
from .diffnet import Adam, MLPSpec, save_checkpoint
from .metareward import RewardGenerator, build_problem, combined_reward, meta_loss_grad, \
    meta_update
from .sac import Actor, SACAgent

MODES = ("csirl", "csirl_b", "bc", "sqil", "sac_oracle")
METRIC_FIELDS = ("step", "mode", "accomplish_rate", "subgoal_index", "wall_ms")


class ConfigError(ValueError):
    """Invalid or inconsistent training configuration."""


@dataclass
class TrainConfig:
    env: str = "point_umaze"
    expert_path: str = ""
    mode: str = "csirl"
    seed: int = 0
    total_steps: int = 100_000
    round_length: int = 10_000
    warmup_steps: int = 1280
    warmup_fit: int = 1000
    n_critics: int = 5
    delta: float = 5.0
    sigma: float = 0.2
    gamma: float = 0.99
    alpha: float = 0.2
    lr_actor: float = 3e-4
    lr_critic: float = 3e-4
    lr1: float = 1e-3
    lr2: float = 1e-3
    lr3: float = 1e-2
    target_soft: float = 0.05
    batch_agent: int = 64
    batch_expert: int = 32
    buffer_capacity: int = 1_000_000
    hidden: str = "256,256"
    gen_hidden: str = "256,256"
    c_r: float = 1.0
    q_agg: str = "mean"
    uncertainty_action: str = "mean"
    meta_sample: bool = False
    meta_optimizer: str = "adam"
    n_expert: int = 0
    eval_every: int = 2000
    eval_episodes: int = 20
    eval_seed_base: int = 100_000
    reward_scale: float = 10.0
    identical_critics: bool = False
    subgoal_rule: str = "frontier"
    scan_stride: int = 1
    prior_scale: float = 0.0
    max_advance: int = 0
    stop_rate: float = 0.0

    def __post_init__(self):
        self.validate()

    def validate(self):
        if self.mode not in MODES:
            raise ConfigError(f"mode must be one of {MODES}, got {self.mode!r}")
        try:
            envs.make(self.env)
        except ValueError as exc:
            raise ConfigError(str(exc)) from None
        for name in ("gamma", "alpha", "lr_actor", "lr_critic", "lr1", "lr2", "lr3",
                     "target_soft", "delta", "c_r", "reward_scale"):
            if not getattr(self, name) > 0:
                raise ConfigError(f"{name} must be positive")
        if not 0.0 <= self.stop_rate <= 1.0:
            raise ConfigError("stop_rate must lie in [0, 1]")
        if not 0.0 <= self.sigma < 1.0:
            raise ConfigError("sigma must lie in [0, 1)")
        if self.scan_stride < 1:
            raise ConfigError("scan_stride must be >= 1")
        if self.prior_scale < 0:
            raise ConfigError("prior_scale must be non-negative")
        if self.round_length < 1 or self.eval_every < 1 or self.eval_episodes < 1:
            raise ConfigError("round_length, eval_every and eval_episodes must be >= 1")
        if min(self.total_steps, self.warmup_steps, self.warmup_fit, self.n_expert,
               self.max_advance) < 0:
            raise ConfigError("step counts must be non-negative")
        if self.n_critics < 1 or self.batch_agent < 1 or self.batch_expert < 1:
            raise ConfigError("n_critics and batch sizes must be >= 1")
        if self.q_agg not in ("mean", "min"):
            raise ConfigError("q_agg must be mean or min")
        if self.uncertainty_action not in ("mean", "sample"):
            raise ConfigError("uncertainty_action must be mean or sample")
        if self.subgoal_rule not in ("strict", "frontier"):
            raise ConfigError("subgoal_rule must be strict or frontier")
        if self.meta_optimizer not in ("adam", "sgd"):
            raise ConfigError("meta_optimizer must be adam or sgd")
        self.hidden_dims
        self.gen_hidden_dims

    @property
    def hidden_dims(self) -> tuple[int, ...]:
        return _parse_dims(self.hidden, "hidden")

    @property
    def gen_hidden_dims(self) -> tuple[int, ...]:
        return _parse_dims(self.gen_hidden, "gen_hidden")

    # ---- flat key=value text ------------------------------------------
    @classmethod
    def from_pairs(cls, pairs: dict[str, str]) -> "TrainConfig":
        types = {f.name: f.type for f in fields(cls)}
        kwargs = {}
        for key, raw in pairs.items():
            if key not in types:
                raise ConfigError(f"unknown config key {key!r}")
            kwargs[key] = _coerce(key, raw, cls.__dataclass_fields__[key].default)
        return cls(**kwargs)

    def to_text(self) -> str:
        return "".join(f"{k}={_fmt(v)}\n" for k, v in asdict(self).items())

    def digest(self) -> str:
        """Hash of everything except the seed (the seed is part of the run name)."""
        text = "".join(f"{k}={_fmt(v)}\n" for k, v in asdict(self).items() if k != "seed")
        return hashlib.sha256(text.encode()).hexdigest()[:12]


def _parse_dims(text, name):
    try:
        dims = tuple(int(x) for x in str(text).split(",") if x.strip())
    except ValueError:
        raise ConfigError(f"{name} must be comma-separated ints, got {text!r}") from None
    if not dims or min(dims) <= 0:
        raise ConfigError(f"{name} must list positive layer widths")
    return dims


def _coerce(key, raw, default):
    raw = raw.strip()
    try:
        if isinstance(default, bool):
            low = raw.lower()
            if low not in ("true", "false", "1", "0", "yes", "no"):
                raise ValueError
            return low in ("true", "1", "yes")
        if isinstance(default, int):
            value = float(raw.replace("_", ""))
            if not value.is_integer():
                raise ValueError
            return int(value)
        if isinstance(default, float):
            return float(raw)
    except ValueError:
        raise ConfigError(f"config key {key!r}: cannot parse {raw!r}") from None
    return raw


def _fmt(v):
    if isinstance(v, bool):
        return "true" if v else "false"
    return repr(v) if isinstance(v, float) else str(v)


def parse_config_text(text: str) -> dict[str, str]:
    pairs = {}
    for lineno, line in enumerate(text.splitlines(), start=1):
        line = line.split("#", 1)[0].strip()
        if not line:
            continue
        if "=" not in line:
            raise ConfigError(f"line {lineno}: expected key=value, got {line!r}")
        k, v = line.split("=", 1)
        pairs[k.strip()] = v.strip()
    return pairs


# ---------------------------------------------------------------------------
# evaluation
# ---------------------------------------------------------------------------

def evaluate_policy(spec: envs.EnvSpec, policy, episodes: int = 20, seed_base: int = 0) -> float:
    """Mean final progress of ``policy(states) -> actions`` over a batch of episodes.

    Episodes run in lock step; finished ones are frozen.  Success counts as 1.
    """
    states = np.stack([envs.reset(spec, seed_base + k) for k in range(episodes)])
    alive = np.ones(episodes, dtype=bool)
    final = np.asarray(envs.progress(spec, states), dtype=np.float64).copy()
    for _ in range(spec.max_steps):
        idx = np.flatnonzero(alive)
        if idx.size == 0:
            break
        a = np.asarray(policy(states[idx]), dtype=np.float64)
        res = envs.step(spec, states[idx], a)
        states[idx] = res.next_state
        final[idx] = np.where(res.success, 1.0, res.progress)
        alive[idx] = ~res.done
    return float(final.mean())


def evaluate(actor: Actor, env: str | envs.EnvSpec, episodes: int = 20, seed_base: int = 0) -> float:
    """Accomplish rate of the deterministic (mean-action) policy."""
    spec = envs.make(env) if isinstance(env, str) else env
    return evaluate_policy(spec, actor.mean_action, episodes, seed_base)


def random_baseline(env: str, episodes: int = 20, seed_base: int = 0, seed: int = 0) -> float:
    """Accomplish rate of uniformly random actions."""
    spec = envs.make(env)
    rng = np.random.default_rng(seed)
    return evaluate_policy(spec, lambda s: rng.uniform(-1, 1, (len(s), spec.action_dim)),
                           episodes, seed_base)


def auc(steps, rates) -> float:
    """Trapezoidal mean of the accomplish-rate curve over its step range."""
    steps = np.asarray(steps, dtype=np.float64)
    rates = np.asarray(rates, dtype=np.float64)
    if len(steps) < 2:
        raise ValueError("auc needs at least two points")
    span = steps[-1] - steps[0]
    if span <= 0:
        raise ValueError("auc needs increasing steps")
    return float(np.sum(0.5 * (rates[1:] + rates[:-1]) * np.diff(steps)) / span)


# ---------------------------------------------------------------------------
# behavioural cloning
# ---------------------------------------------------------------------------

def bc_train(actor: Actor, states, actions, steps: int, lr: float = 3e-4, batch_size: int | None = 32,
             rng=None, optimizer: str = "adam", callback=None) -> list[float]:
    """Minimise the BC loss on ``(states, actions)`` in place; returns the loss trace.

    ``batch_size=None`` uses the full dataset each step (deterministic).
    ``callback(step, actor)`` runs after each step.
    """
    states = np.asarray(states, dtype=np.float64)
    actions = np.asarray(actions, dtype=np.float64)
    if len(states) == 0:
        raise ValueError("behavioural cloning needs a non-empty dataset")
    opt = Adam(actor.params, lr) if optimizer == "adam" else None
    xs_all = actor.normalise(states)
    trace = []
    for k in range(steps):
        if batch_size is None:
            xs, acts = xs_all, actions
        else:
            idx = rng.integers(0, len(states), size=batch_size)
            xs, acts = xs_all[idx], actions[idx]
        loss, grad = meta_loss_grad(actor.spec, actor.params, xs, acts)
        trace.append(float(loss))
        if opt is None:
            actor.params -= lr * grad
        else:
            opt.step(actor.params, grad)
        if callback is not None:
            callback(k + 1, actor)
    return trace


# ---------------------------------------------------------------------------
# the main loop
# ---------------------------------------------------------------------------

@dataclass
class TrainResult:
    metrics: list[dict]
    subgoals: list[dict]
    agent: SACAgent | None
    actor: Actor
    generator: RewardGenerator | None
    generator_init: np.ndarray | None
    halted: bool
    steps_done: int
    meta_updates: int

    @property
    def final_rate(self) -> float:
        return self.metrics[-1]["accomplish_rate"]


def load_expert(config: TrainConfig) -> ExpertDataset:
    if not config.expert_path:
        raise ConfigError("expert_path is required")
    path = Path(config.expert_path)
    if not path.exists():
        raise FileNotFoundError(f"expert dataset {path} does not exist")
    trajs = load_trajectories(path)
    if not trajs:
        raise ConfigError(f"expert dataset {path} is empty")
    wrong = {t.env for t in trajs} - {config.env}
    if wrong:
        raise ConfigError(f"expert dataset is for {sorted(wrong)}, config env is {config.env!r}")
    if config.n_expert:
        if config.n_expert > len(trajs):
            raise ConfigError(f"n_expert={config.n_expert} but dataset has {len(trajs)} trajectories")
        trajs = trajs[:config.n_expert]
    return ExpertDataset(trajs)


def metrics_csv(metrics: list[dict], wall: bool = True) -> str:
    buf = io.StringIO()
    cols = METRIC_FIELDS if wall else METRIC_FIELDS[:-1]
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(cols)
    for m in metrics:
        w.writerow([_metric_str(m[c]) for c in cols])
    return buf.getvalue()


def _metric_str(v):
    return repr(v) if isinstance(v, float) else str(v)


def read_metrics(path) -> list[dict]:
    with open(path, newline="") as fh:
        rows = list(csv.DictReader(fh))
    if rows and set(rows[0]) != set(METRIC_FIELDS):
        raise ValueError(f"{path}: unexpected metrics header {list(rows[0])}")
    return [{"step": int(r["step"]), "mode": r["mode"],
             "accomplish_rate": float(r["accomplish_rate"]),
             "subgoal_index": int(r["subgoal_index"]), "wall_ms": float(r["wall_ms"])}
            for r in rows]


def scan_states(states, stride: int) -> np.ndarray:
    """Indices of the expert states visited by the subgoal scan.

    Every ``stride``-th state from the start, always ending on the final state.
    """
    T = len(states) - 1
    idx = np.arange(0, T + 1, max(1, int(stride)))
    if idx[-1] != T:
        idx = np.append(idx, T)
    return idx


class _Trainer:
    def __init__(self, config: TrainConfig, expert: ExpertDataset | None, log):
        self.cfg = config
        self.spec = envs.make(config.env)
        self.log = log or (lambda msg: None)
        self.rng = np.random.default_rng(config.seed)
        self.expert = expert
        self.t0 = time.perf_counter()
        self.metrics: list[dict] = []
        self.subgoal_log = cur.SubgoalLog()
        self.goal_index = -1
        self.meta_updates = 0
        spec, cfg = self.spec, config
        if cfg.mode == "bc":
            self.agent = None
            self.actor = Actor.create(spec.state_dim, spec.action_dim, cfg.hidden_dims,
                                      self.rng, spec.obs_scale)
        else:
            self.agent = SACAgent(spec.state_dim, spec.action_dim, self.rng, cfg.hidden_dims,
                                  cfg.n_critics, spec.obs_scale, cfg.lr_actor, cfg.lr_critic,
                                  cfg.gamma, cfg.alpha, cfg.target_soft, cfg.q_agg,
                                  cfg.identical_critics, cfg.prior_scale)
            self.actor = self.agent.actor
        self.gen = None
        self.gen_init = None
        self.gen_opt = None
        if cfg.mode in ("csirl", "csirl_b"):
            self.gen = RewardGenerator.create(spec.state_dim, spec.action_dim, 2,
                                              cfg.gen_hidden_dims, self.rng, spec.obs_scale,
                                              cfg.c_r)
            self.gen_init = self.gen.params.copy()
            if cfg.mode == "csirl" and cfg.meta_optimizer == "adam":
                self.gen_opt = Adam(self.gen.params, cfg.lr3)
        self.traj = None
        self.traj_id = None
        self.h_traj = None

    # ---- bookkeeping ----------------------------------------------------
    def record(self, step):
        rate = evaluate(self.actor, self.spec, self.cfg.eval_episodes, self.cfg.eval_seed_base)
        wall = (time.perf_counter() - self.t0) * 1000.0
        m = {"step": int(step), "mode": self.cfg.mode, "accomplish_rate": rate,
             "subgoal_index": int(self.goal_index), "wall_ms": round(wall, 3)}
        self.metrics.append(m)
        self.log(f"step {step:>7d}  accomplish {rate:.3f}  subgoal {self.goal_index}")

    # ---- curriculum ---------------------------------------------------
    def select(self, round_no) -> bool:
        cfg = self.cfg
        k, traj = self.expert.sample_trajectory(self.rng)
        urng = self.rng if cfg.uncertainty_action == "sample" else None
        scan = scan_states(traj.states, cfg.scan_stride)
        prof = cur.trajectory_uncertainty(self.agent.pool, self.actor, traj.states[scan],
                                          cfg.sigma, urng)
        if cfg.subgoal_rule == "strict":
            j, relaxed = cur.select_subgoal(prof, cfg.delta), False
        else:
            cap = -(-cfg.max_advance // cfg.scan_stride) if cfg.max_advance else None
            j, relaxed = cur.select_subgoal_frontier(prof, cfg.delta, self.scan_start(traj, scan),
                                                     cap)
        if j is None:
            self.subgoal_log.append(round_no, k, None, None, None)
            self.log(f"round {round_no}: no subgoal qualifies; stopping")
            return False
        ratio = (cur.frontier_ratios(prof) if relaxed else cur.scan_ratios(prof))[j - 1]
        idx = int(scan[j])
        self.subgoal_log.append(round_no, k, idx, prof.values[j], ratio)
        self.traj, self.traj_id, self.goal_index = traj, k, idx
        self.h_traj = envs.h_position(self.spec, traj.states)
        self.log(f"round {round_no}: trajectory {k}, subgoal index {idx}/{len(traj)} "
                 f"(U={prof.values[j]:.3g}, ratio={ratio:.3g}{', frontier' if relaxed else ''})")
        return True

    def scan_start(self, traj, scan) -> int:
        """Scan position of the previous subgoal mapped onto ``traj`` (0 in round 1)."""
        if self.goal_index < 0:
            return 0
        h_new = envs.h_position(self.spec, traj.states[scan])
        return cur.nearest_expert_index(self.h_traj[self.goal_index], h_new)

    def fit_critics(self, buffer):
        """Fit the pool to the warmup data before the first subgoal scan.

        Untrained critics disagree at random, so a scan run on them picks
        noise.  ``warmup_fit`` critic-only steps with the final-state matching
        reward make the pool agree on the warmup region first.
        """
        cfg = self.cfg
        _, traj = self.expert.sample_trajectory(self.rng)
        self.h_traj = envs.h_position(self.spec, traj.states)
        self.goal_index = len(traj)
        for _ in range(cfg.warmup_fit):
            batch = buffer.sample(cfg.batch_agent, self.rng)
            r_m, v_term = self.shaped(batch)
            self.agent.update_critics(batch, r_m, self.rng, v_term)
        self.h_traj, self.goal_index = None, -1

    # ---- rewards --------------------------------------------------------
    def shaped(self, batch):
        s, a, s_next, done = batch
        hs = envs.h_position(self.spec, s)
        hs2 = envs.h_position(self.spec, s_next)
        r_m, tgt = cur.matching_reward(hs, hs2, self.h_traj, self.goal_index, self.cfg.gamma)
        v_term = cur.potential(hs2, tgt)
        return r_m, v_term

    def oracle_reward(self, batch):
        s, _, s_next, _ = batch
        dprog = envs.progress(self.spec, s_next) - envs.progress(self.spec, s)
        crash = envs.merge_collisions(s_next) if self.spec.name == "lane_merge" \
            else np.zeros(len(s), dtype=bool)
        goal = envs.in_goal(self.spec, s_next) & ~crash
        return self.cfg.reward_scale * (dprog - 1.0 * crash + 1.0 * goal)

    # ---- updates --------------------------------------------------------
    def update(self, buffer):
        cfg, agent, rng = self.cfg, self.agent, self.rng
        batch = buffer.sample(cfg.batch_agent, rng)
        if cfg.mode in ("csirl", "csirl_b"):
            r_m, v_term = self.shaped(batch)
            hg = envs.h_position(self.spec, self.traj.states[self.goal_index])
            if cfg.mode == "csirl":
                k = int(rng.integers(0, agent.pool.n))
                es, ea = self.expert.sample_batch(cfg.batch_expert, rng)
                prob = build_problem(agent, k, self.gen, batch, r_m, hg, (es, ea), rng,
                                     v_term, cfg.lr1, cfg.lr2, cfg.meta_sample)
                new, _ = meta_update(self.gen, prob, cfg.lr3, self.gen_opt)
                self.gen.params[...] = new
                self.meta_updates += 1
                r = combined_reward(r_m, self.gen, batch[0], batch[1], hg)
            else:
                r = r_m
            agent.update(batch, r, rng, v_term)
        elif cfg.mode == "sqil":
            es, ea, en, ed = self.expert.sample_transitions(cfg.batch_expert, rng)
            s, a, sn, d = batch
            mixed = (np.concatenate([s, es]), np.concatenate([a, ea]),
                     np.concatenate([sn, en]), np.concatenate([d, ed]))
            r = np.concatenate([np.zeros(len(s)), np.ones(len(es))])
            agent.update(mixed, r, rng)
        else:
            agent.update(batch, self.oracle_reward(batch), rng)

    # ---- loops ----------------------------------------------------------
    def run_bc(self):
        cfg = self.cfg
        self.record(0)

        def cb(k, actor):
            if k % cfg.eval_every == 0 and k < cfg.total_steps:
                self.record(k)

        if cfg.total_steps > 0:
            bc_train(self.actor, self.expert.states, self.expert.actions, cfg.total_steps,
                     cfg.lr_actor, cfg.batch_expert, self.rng, callback=cb)
            self.record(cfg.total_steps)
        return False, cfg.total_steps

    def run_rl(self):
        cfg, spec, rng = self.cfg, self.spec, self.rng
        buffer = ReplayBuffer(spec.state_dim, spec.action_dim, cfg.buffer_capacity)
        curricular = cfg.mode in ("csirl", "csirl_b")
        self.record(0)
        ep_seed = cfg.seed * 1_000_003
        s = envs.reset(spec, ep_seed)
        ep_t = 0
        halted = False
        t = 0
        round_no = 0
        while t < cfg.total_steps:
            learning = t >= cfg.warmup_steps
            if learning and curricular and (t - cfg.warmup_steps) % cfg.round_length == 0:
                if round_no == 0 and len(buffer) and cfg.warmup_fit:
                    self.fit_critics(buffer)
                round_no += 1
                if not self.select(round_no):
                    halted = True
                    break
            if learning:
                a = self.actor.sample_action(s, rng)[0]
            else:
                a = rng.uniform(-1.0, 1.0, spec.action_dim)
            res = envs.step(spec, s, a)
            buffer.push(s, a, res.next_state, res.done)
            ep_t += 1
            if res.done or ep_t >= spec.max_steps:
                ep_seed += 1
                s = envs.reset(spec, ep_seed)
                ep_t = 0
            else:
                s = res.next_state
            if learning:
                self.update(buffer)
            t += 1
            if t % cfg.eval_every == 0 and t < cfg.total_steps:
                self.record(t)
                if cfg.stop_rate and self.metrics[-1]["accomplish_rate"] >= cfg.stop_rate:
                    break
        if self.metrics[-1]["step"] != t:
            self.record(t)
        return halted, t

    def run(self):
        if self.cfg.mode == "bc":
            halted, t = self.run_bc()
        else:
            halted, t = self.run_rl()
        return TrainResult(self.metrics, self.subgoal_log.records, self.agent, self.actor,
                           self.gen, self.gen_init, halted, t, self.meta_updates)


def train(config: TrainConfig, expert: ExpertDataset | None = None, run_dir=None,
          log=None) -> TrainResult:
    """Run one training job; when ``run_dir`` is given, write its artifacts there.

    Artifacts: ``config.txt``, ``metrics.csv``, ``subgoals.jsonl`` and
    ``checkpoint.npz``.
    """
    config.validate()
    if expert is None:
        expert = load_expert(config)
    if expert.env != config.env:
        raise ConfigError(f"expert dataset is for {expert.env!r}, config env is {config.env!r}")
    if expert.states.shape[1] != envs.make(config.env).state_dim:
        raise ConfigError("expert state dimension does not match the environment")
    result = _Trainer(config, expert, log).run()
    if run_dir is not None:
        write_artifacts(Path(run_dir), config, result)
    return result


def checkpoint_nets(result: TrainResult) -> dict[str, tuple[MLPSpec, np.ndarray]]:
    nets = {"actor": (result.actor.spec, result.actor.params)}
    if result.agent is not None:
        pool = result.agent.pool
        nets["critics"] = (pool.spec, pool.params)
        nets["critic_targets"] = (pool.spec, pool.target)
    if result.generator is not None:
        nets["generator"] = (result.generator.spec, result.generator.params)
    return nets


def write_artifacts(run_dir: Path, config: TrainConfig, result: TrainResult) -> None:
    run_dir.mkdir(parents=True, exist_ok=True)
    (run_dir / "config.txt").write_text(config.to_text())
    (run_dir / "metrics.csv").write_text(metrics_csv(result.metrics))
    with open(run_dir / "subgoals.jsonl", "w") as fh:
        for rec in result.subgoals:
            fh.write(json.dumps(rec) + "\n")
    meta = {"env": config.env, "mode": config.mode, "seed": config.seed,
            "steps": result.steps_done, "halted": result.halted,
            "obs_scale": envs.make(config.env).obs_scale.tolist(),
            "c_r": config.c_r}
    save_checkpoint(run_dir / "checkpoint.npz", checkpoint_nets(result), meta)


def load_actor(path) -> tuple[Actor, dict]:
    from .diffnet import load_checkpoint
    nets, meta = load_checkpoint(path)
    if "actor" not in nets:
        raise ValueError(f"{path}: checkpoint has no actor network")
    spec, params = nets["actor"]
    scale = np.asarray(meta.get("obs_scale", np.ones(spec.input_dim)), dtype=np.float64)
    return Actor(spec, params, scale), meta
