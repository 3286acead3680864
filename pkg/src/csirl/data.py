"""Trajectory files, the expert dataset and the replay buffer.

Trajectory file format (``.jsonl``): one JSON object per line::

    {"env": "point_umaze", "states": [[...], ...], "actions": [[...], ...]}

with ``T + 1`` states and ``T`` actions.  Floats are written with ``repr``
precision so a save/load round trip is bit-exact.  The last transition of a
stored trajectory is terminal.
"""
from __future__ import annotations

import json
import threading
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from . import envs


class TrajectoryFormatError(ValueError):
    """Malformed or inconsistent trajectory file."""


@dataclass
class Transition:
    s: np.ndarray
    a: np.ndarray
    s_next: np.ndarray
    done: bool


@dataclass
class Trajectory:
    env: str
    states: np.ndarray   # (T + 1, state_dim)
    actions: np.ndarray  # (T, action_dim)

    def __post_init__(self):
        self.states = np.asarray(self.states, dtype=np.float64)
        self.actions = np.asarray(self.actions, dtype=np.float64)
        if self.states.ndim != 2 or self.actions.ndim != 2:
            raise TrajectoryFormatError("states and actions must be 2-D")
        if len(self.states) != len(self.actions) + 1:
            raise TrajectoryFormatError(
                f"need T+1 states for T actions, got {len(self.states)} and {len(self.actions)}")

    def __len__(self):
        return len(self.actions)

    @property
    def transitions(self) -> list[Transition]:
        T = len(self)
        return [Transition(self.states[t], self.actions[t], self.states[t + 1], t == T - 1)
                for t in range(T)]

    @property
    def dones(self) -> np.ndarray:
        d = np.zeros(len(self), dtype=bool)
        d[-1] = True
        return d

    def validate(self, spec: envs.EnvSpec | None = None) -> None:
        spec = spec or envs.make(self.env)
        if self.states.shape[1] != spec.state_dim or self.actions.shape[1] != spec.action_dim:
            raise TrajectoryFormatError(
                f"{self.env}: expected state/action dims {spec.state_dim}/{spec.action_dim}, "
                f"got {self.states.shape[1]}/{self.actions.shape[1]}")
        if len(self) == 0:
            raise TrajectoryFormatError("empty trajectory")


def save_trajectories(path, trajectories: list[Trajectory]) -> Path:
    path = Path(path)
    with open(path, "w") as fh:
        for tr in trajectories:
            rec = {"env": tr.env, "states": tr.states.tolist(), "actions": tr.actions.tolist()}
            fh.write(json.dumps(rec) + "\n")
    return path


def load_trajectories(path, env: str | None = None) -> list[Trajectory]:
    """Read a ``.jsonl`` trajectory file; all-or-nothing on errors."""
    out = []
    with open(path) as fh:
        text = fh.read()
    lines = text.split("\n")
    if lines and lines[-1] == "":
        lines.pop()
    for lineno, line in enumerate(lines, start=1):
        if not line.strip():
            continue
        try:
            rec = json.loads(line)
            tr = Trajectory(rec["env"], rec["states"], rec["actions"])
        except (json.JSONDecodeError, KeyError, TypeError) as exc:
            raise TrajectoryFormatError(f"{path}:{lineno}: cannot parse trajectory ({exc})") from None
        except TrajectoryFormatError as exc:
            raise TrajectoryFormatError(f"{path}:{lineno}: {exc}") from None
        if env is not None and tr.env != env:
            raise TrajectoryFormatError(f"{path}:{lineno}: trajectory is for {tr.env!r}, expected {env!r}")
        try:
            tr.validate()
        except (TrajectoryFormatError, ValueError) as exc:
            raise TrajectoryFormatError(f"{path}:{lineno}: {exc}") from None
        out.append(tr)
    return out


class ExpertDataset:
    """Expert trajectories with flat (s, a, s', done) views for batch sampling."""

    def __init__(self, trajectories: list[Trajectory]):
        if not trajectories:
            raise ValueError("expert dataset is empty")
        self.trajectories = list(trajectories)
        self.env = trajectories[0].env
        self.states = np.concatenate([t.states[:-1] for t in trajectories])
        self.actions = np.concatenate([t.actions for t in trajectories])
        self.next_states = np.concatenate([t.states[1:] for t in trajectories])
        self.dones = np.concatenate([t.dones for t in trajectories])

    def __len__(self):
        return len(self.actions)

    def sample_batch(self, n: int, rng: np.random.Generator):
        """Uniform (with replacement) over all expert state-action pairs."""
        idx = rng.integers(0, len(self), size=n)
        return self.states[idx], self.actions[idx]

    def sample_transitions(self, n: int, rng: np.random.Generator):
        idx = rng.integers(0, len(self), size=n)
        return self.states[idx], self.actions[idx], self.next_states[idx], self.dones[idx]

    def sample_trajectory(self, rng: np.random.Generator) -> tuple[int, Trajectory]:
        k = int(rng.integers(0, len(self.trajectories)))
        return k, self.trajectories[k]


def sample_expert_batch(dataset: ExpertDataset, n: int, rng: np.random.Generator):
    return dataset.sample_batch(n, rng)


def sample_expert_trajectory(dataset: ExpertDataset, rng: np.random.Generator) -> Trajectory:
    return dataset.sample_trajectory(rng)[1]


class ReplayBuffer:
    """FIFO ring buffer of transitions; rewards are not stored."""

    def __init__(self, state_dim: int, action_dim: int, capacity: int = 1_000_000):
        if capacity < 1:
            raise ValueError("capacity must be positive")
        self.state_dim, self.action_dim, self.capacity = state_dim, action_dim, capacity
        self.s = np.zeros((capacity, state_dim))
        self.a = np.zeros((capacity, action_dim))
        self.s_next = np.zeros((capacity, state_dim))
        self.done = np.zeros(capacity, dtype=bool)
        self.ptr = 0
        self.size = 0
        self._lock = threading.Lock()

    def __len__(self):
        return self.size

    def push(self, s, a, s_next, done: bool) -> None:
        s, a, s_next = (np.asarray(x, dtype=np.float64) for x in (s, a, s_next))
        if s.shape != (self.state_dim,) or s_next.shape != (self.state_dim,) \
                or a.shape != (self.action_dim,):
            raise ValueError(f"transition dims {s.shape}/{a.shape}/{s_next.shape} do not match "
                             f"buffer ({self.state_dim}, {self.action_dim})")
        with self._lock:
            i = self.ptr
            self.s[i], self.a[i], self.s_next[i], self.done[i] = s, a, s_next, done
            self.ptr = (i + 1) % self.capacity
            self.size = min(self.size + 1, self.capacity)

    def push_transition(self, tr: Transition) -> None:
        self.push(tr.s, tr.a, tr.s_next, tr.done)

    def sample(self, n: int, rng: np.random.Generator):
        """Uniform with replacement; returns arrays ``(s, a, s_next, done)``."""
        with self._lock:
            if self.size == 0:
                raise ValueError("cannot sample from an empty replay buffer")
            idx = rng.integers(0, self.size, size=n)
            return self.s[idx], self.a[idx], self.s_next[idx], self.done[idx]

    def sample_transitions(self, n: int, rng: np.random.Generator) -> list[Transition]:
        s, a, sn, d = self.sample(n, rng)
        return [Transition(*row) for row in zip(s, a, sn, d)]

    def items(self) -> list[Transition]:
        """Stored transitions, oldest first."""
        with self._lock:
            order = [(self.ptr + k) % self.capacity for k in range(self.size)] \
                if self.size == self.capacity else list(range(self.size))
            return [Transition(self.s[i].copy(), self.a[i].copy(), self.s_next[i].copy(),
                               bool(self.done[i])) for i in order]


def buffer_push(buffer: ReplayBuffer, transition: Transition) -> None:
    buffer.push_transition(transition)


def buffer_sample(buffer: ReplayBuffer, n: int, rng: np.random.Generator) -> list[Transition]:
    return buffer.sample_transitions(n, rng)


def generate_expert(env_name: str, n: int, seed: int = 0, log=None) -> tuple[list[Trajectory], list[int]]:
    """Roll out the scripted expert until ``n`` successes; returns (trajectories, failed seeds)."""
    spec = envs.make(env_name)
    trajs, failed = [], []
    s = seed
    while len(trajs) < n:
        if s - seed >= 10 * n:
            raise RuntimeError(f"expert reached only {len(trajs)}/{n} successes in {10 * n} seeds; "
                               f"failed seeds: {failed}")
        states, actions, info = envs.rollout(spec, s)
        if info["success"]:
            trajs.append(Trajectory(env_name, states, actions))
        else:
            failed.append(s)
            if log:
                log(f"seed {s}: expert failed (progress {info['progress']:.3f}); skipped")
        s += 1
    return trajs, failed
