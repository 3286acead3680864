"""Decision uncertainty over expert trajectories, subgoal selection, matching reward.

Uncertainty of a state is the population variance of the critic pool at the
actor's deterministic action.  Scanning an expert trajectory front to back
with the soft average::

    avg[0] = U[0],   avg[p] = sigma * avg[p-1] + (1 - sigma) * U[p]

the subgoal is the first ``p >= 1`` with ``U[p] / avg[p-1] > delta``.  A
positive value over a zero average counts as an infinite ratio; ``0 / 0``
does not qualify.

The matching reward is potential-based shaping with the potential
``psi(s, g) = -||h(s) - h(g)||^2`` (non-positive, zero at the target)::

    r_m = psi(s', target) - gamma * psi(s, target)

where ``target`` is the subgoal until the state nearest to ``s`` on the expert
trajectory lies past it, and the trajectory's final state afterwards.
"""
from __future__ import annotations

import json
from dataclasses import dataclass, asdict
from pathlib import Path

import numpy as np

from .sac import Actor, CriticPool


@dataclass
class UncertaintyProfile:
    values: np.ndarray
    soft_avg_trace: np.ndarray
    sigma: float = 0.2


@dataclass
class Subgoal:
    state: np.ndarray
    index: int
    round: int = 0
    trajectory_id: int = 0
    uncertainty: float = 0.0
    ratio: float = 0.0


def pool_variance(q: np.ndarray) -> np.ndarray:
    """Population variance over axis 0 (the critic axis).

    Values are shifted by the first critic's before the two-pass formula, so
    identical critics give exactly 0 (the mean of ``n`` equal floats need not
    round back to the value itself).
    """
    q = np.asarray(q, dtype=np.float64)
    d = q - q[:1]
    return ((d - d.mean(axis=0)) ** 2).mean(axis=0)


def state_uncertainty(pool: CriticPool, actor: Actor, s, rng=None) -> np.ndarray | float:
    """Variance of the pool's Q-values at ``(s, a)``.

    ``a`` is the deterministic mean action, or a sampled action when a
    generator is passed.  ``s`` may be one state or a batch.
    """
    a = actor.mean_action(s) if rng is None else actor.sample_action(s, rng)[0]
    var = pool_variance(pool.q(s, a))
    return float(var) if np.ndim(var) == 0 else var


def soft_average(values, sigma: float = 0.2) -> np.ndarray:
    values = np.asarray(values, dtype=np.float64)
    trace = np.empty_like(values)
    acc = values[0]
    trace[0] = acc
    for p in range(1, len(values)):
        acc = sigma * acc + (1.0 - sigma) * values[p]
        trace[p] = acc
    return trace


def trajectory_uncertainty(pool: CriticPool, actor: Actor, states, sigma: float = 0.2,
                           rng=None) -> UncertaintyProfile:
    states = np.asarray(states, dtype=np.float64)
    if len(states) == 0:
        raise ValueError("trajectory has no states")
    values = np.atleast_1d(state_uncertainty(pool, actor, states, rng))
    return UncertaintyProfile(values, soft_average(values, sigma), sigma)


def scan_ratios(profile: UncertaintyProfile) -> np.ndarray:
    """``U[p] / avg[p-1]`` for ``p >= 1`` (inf for x/0 with x > 0, 0 for 0/0)."""
    num = profile.values[1:]
    den = profile.soft_avg_trace[:-1]
    with np.errstate(divide="ignore", invalid="ignore"):
        r = num / den
    r = np.where(den == 0.0, np.where(num > 0.0, np.inf, 0.0), r)
    return r


def select_subgoal(profile: UncertaintyProfile, delta: float = 5.0) -> int | None:
    """Smallest qualifying index, or ``None`` when no state qualifies."""
    hits = np.flatnonzero(scan_ratios(profile) > delta)
    return int(hits[0]) + 1 if hits.size else None


def frontier_ratios(profile: UncertaintyProfile) -> np.ndarray:
    """``U[p] / min(avg[0..p-1])`` for ``p >= 1``, same zero conventions as :func:`scan_ratios`."""
    num = profile.values[1:]
    den = np.minimum.accumulate(profile.soft_avg_trace[:-1])
    with np.errstate(divide="ignore", invalid="ignore"):
        r = num / den
    return np.where(den == 0.0, np.where(num > 0.0, np.inf, 0.0), r)


def select_subgoal_frontier(profile: UncertaintyProfile, delta: float = 5.0, start: int = 0,
                            max_advance: int | None = None) -> tuple[int | None, bool]:
    """Strict scan with a cumulative fallback, restricted to indices past ``start``.

    On a trajectory sampled every few centimetres the uncertainty climbs
    smoothly, so no single step beats the soft average by ``delta`` even
    where it has risen many-fold overall.  The fallback compares ``U[p]``
    with the lowest soft average seen before ``p`` (:func:`frontier_ratios`).

    The first ``p > start`` passing the strict test is returned, else the
    first passing the cumulative one.  If neither fires past ``start`` but
    one does fire earlier, the agent has not settled the region it was sent
    to, and ``start`` itself is returned (flagged as fallback).  Only when no
    test fires anywhere does no subgoal qualify: ``(None, False)``.
    ``max_advance`` caps the result at ``start + max_advance``.

    Returns ``(index, used_fallback)``; a kept or capped index counts as fallback.
    """
    tests = ((scan_ratios(profile), False), (frontier_ratios(profile), True))
    for ratios, fallback in tests:
        hits = np.flatnonzero(ratios[start:] > delta)
        if hits.size:
            p = int(hits[0]) + start + 1
            if max_advance is not None and p > start + max_advance:
                return start + max_advance, True
            return p, fallback
    if start > 0 and any((ratios[:start] > delta).any() for ratios, _ in tests):
        return start, True
    return None, False


def nearest_expert_index(hs, h_traj) -> np.ndarray | int:
    """Index of the closest expert representation for each row of ``hs``.

    ``np.argmin`` returns the first minimum, so ties go to the smallest index.
    """
    hs = np.asarray(hs, dtype=np.float64)
    single = hs.ndim == 1
    hs2 = hs[None] if single else hs
    d2 = ((hs2[:, None, :] - h_traj[None, :, :]) ** 2).sum(axis=-1)
    idx = np.argmin(d2, axis=1)
    return int(idx[0]) if single else idx


def potential(hs, hg) -> np.ndarray | float:
    """``-||hs - hg||^2`` along the last axis."""
    d = np.asarray(hs, dtype=np.float64) - np.asarray(hg, dtype=np.float64)
    out = -(d * d).sum(axis=-1)
    return float(out) if np.ndim(out) == 0 else out


def matching_targets(hs, h_traj, goal_index: int) -> np.ndarray:
    """Representation of the active target for each state in ``hs``."""
    p = np.atleast_1d(nearest_expert_index(hs, h_traj))
    past = p > goal_index
    return np.where(past[:, None], h_traj[-1][None, :], h_traj[goal_index][None, :]), past


def matching_reward(hs, hs_next, h_traj, goal_index: int, gamma: float):
    """Shaped reward for a batch of representations; also returns the targets used."""
    hs = np.atleast_2d(np.asarray(hs, dtype=np.float64))
    hs_next = np.atleast_2d(np.asarray(hs_next, dtype=np.float64))
    tgt, _ = matching_targets(hs, h_traj, goal_index)
    r = potential(hs_next, tgt) - gamma * potential(hs, tgt)
    return np.atleast_1d(r), tgt


class SubgoalLog:
    """Append-only record of subgoal selections, one JSON object per line."""

    FIELDS = ("round", "trajectory_id", "index", "uncertainty", "ratio")

    def __init__(self, path=None):
        self.path = Path(path) if path is not None else None
        self.records: list[dict] = []

    def append(self, round_: int, trajectory_id: int, index, uncertainty, ratio) -> dict:
        rec = {"round": int(round_), "trajectory_id": int(trajectory_id),
               "index": None if index is None else int(index),
               "uncertainty": None if uncertainty is None else float(uncertainty),
               "ratio": None if ratio is None else _json_float(ratio)}
        self.records.append(rec)
        if self.path is not None:
            with open(self.path, "a") as fh:
                fh.write(json.dumps(rec) + "\n")
        return rec

    @staticmethod
    def read(path) -> list[dict]:
        with open(path) as fh:
            return [json.loads(line) for line in fh if line.strip()]


def _json_float(x):
    x = float(x)
    return "inf" if np.isinf(x) else x


def subgoal_record(sg: Subgoal) -> dict:
    d = asdict(sg)
    d["state"] = np.asarray(sg.state).tolist()
    return d
