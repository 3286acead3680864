"""Two small multi-stage continuous-control tasks and their scripted experts.

Both tasks are point-mass kinematics with semi-implicit Euler integration::

    v   <- clip(v + a * dt * a_scale, -v_max, v_max)     (per axis)
    pos <- pos + v * dt

``step`` is a pure function of ``(state, action)``; all functions also accept
a batch of states with shape ``(N, state_dim)``.

point_umaze
    State ``(x, y, vx, vy)``.  Arena ``[0, 20] x [0, 20]`` with an inner wall
    block ``x in [0, 14], y in [8, 12]``, leaving a U-shaped corridor.
    Centerline ``(2, 4) -> (17, 4) -> (17, 16) -> (2, 16)`` (length 42).
    Start at ``(2, 4)`` at rest.  Goal region ``x <= 3, y >= 12``.
    Walls stop motion along their normal and are not fatal.
    ``a_scale = 4``, ``v_max = 2``, ``dt = 0.1``, 300 steps.

lane_merge
    State ``(x, y, vx, vy)`` of the ego followed by ``(dx, dy, dvx, dvy)`` of
    three scripted cars relative to the ego.  Road centerline
    ``(0, -4) -> (25, -4) -> (45, 0) -> (75, 0) -> (95, 4) -> (115, 4)``:
    on-ramp, merge taper, main lane, exit taper, exit lane.  The scripted cars
    drive the main lane (``y = 0``) at one constant, seed-dependent speed, so
    their future is a function of the current relative state alone.
    Leaving the road (``|y - c(x)| > 2.5``) or overlapping a car
    (``|dx| < 4.5`` and ``|dy| < 2``) ends the episode with ``collision``.
    Goal region ``x >= 110, y >= 2``.  Ego starts at ``(0, -4)`` moving at
    6 m/s.  ``a_scale = (4, 4)``, ``v_max = (12, 3)``, ``dt = 0.1``, 200 steps.
"""
from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .diffnet import NumericError


@dataclass(frozen=True)
class EnvSpec:
    name: str
    state_dim: int
    action_dim: int
    max_steps: int
    dt: float
    a_scale: tuple[float, float]
    v_max: tuple[float, float]
    centerline: np.ndarray = field(repr=False, compare=False)
    # scale applied to states before they enter a network
    obs_scale: np.ndarray = field(repr=False, compare=False)
    # scale applied to ego position for the representation h(s)
    h_scale: float = 1.0


@dataclass
class StepResult:
    next_state: np.ndarray
    done: np.ndarray | bool
    success: np.ndarray | bool
    collision: np.ndarray | bool
    progress: np.ndarray | float


UMAZE_CENTERLINE = np.array([[2.0, 4.0], [17.0, 4.0], [17.0, 16.0], [2.0, 16.0]])
UMAZE_WALL = (0.0, 14.0, 8.0, 12.0)  # x0, x1, y0, y1
UMAZE_ARENA = (0.0, 20.0)

MERGE_CENTERLINE = np.array([[0.0, -4.0], [25.0, -4.0], [45.0, 0.0], [75.0, 0.0],
                             [95.0, 4.0], [115.0, 4.0]])
MERGE_HALF_WIDTH = 2.5
CAR_HALF_LENGTH = 4.5
CAR_HALF_WIDTH = 2.0
N_CARS = 3
MERGE_START_SPEED = 6.0

ENVS = {
    "point_umaze": EnvSpec(
        "point_umaze", 4, 2, 300, 0.1, (4.0, 4.0), (2.0, 2.0),
        UMAZE_CENTERLINE, np.array([10.0, 10.0, 2.0, 2.0]), 0.5),
    "lane_merge": EnvSpec(
        "lane_merge", 16, 2, 200, 0.1, (4.0, 4.0), (12.0, 3.0),
        MERGE_CENTERLINE,
        np.array([60.0, 4.0, 12.0, 3.0] + [30.0, 4.0, 12.0, 3.0] * N_CARS), 0.1),
}


def make(name: str) -> EnvSpec:
    try:
        return ENVS[name]
    except KeyError:
        raise ValueError(f"unknown env {name!r}; choose from {sorted(ENVS)}") from None


# ---------------------------------------------------------------------------
# centerline geometry

def _segments(line):
    a, b = line[:-1], line[1:]
    seg = b - a
    length = np.linalg.norm(seg, axis=1)
    cum = np.concatenate([[0.0], np.cumsum(length)])
    return a, seg, length, cum


def route_length(spec: EnvSpec) -> float:
    return float(_segments(spec.centerline)[3][-1])


def project(line: np.ndarray, pos: np.ndarray):
    """Arc length of the nearest centerline point and the distance to it."""
    a, seg, length, cum = _segments(line)
    p = np.asarray(pos, dtype=np.float64)[..., None, :]
    t = np.clip(((p - a) * seg).sum(-1) / (length ** 2), 0.0, 1.0)
    closest = a + t[..., None] * seg
    d = np.linalg.norm(p - closest, axis=-1)
    k = np.argmin(d, axis=-1)
    arc = np.take_along_axis(cum[:-1] + t * length, k[..., None], -1)[..., 0]
    return arc, np.take_along_axis(d, k[..., None], -1)[..., 0]


def point_at(line: np.ndarray, arc):
    a, seg, length, cum = _segments(line)
    arc = np.clip(arc, 0.0, cum[-1])
    k = np.clip(np.searchsorted(cum, arc, side="right") - 1, 0, len(length) - 1)
    t = (arc - cum[k]) / length[k]
    return a[k] + t[..., None] * seg[k]


def _merge_center_y(x):
    line = MERGE_CENTERLINE
    return np.interp(x, line[:, 0], line[:, 1])


def _merge_center_slope(x):
    line = MERGE_CENTERLINE
    slopes = np.diff(line[:, 1]) / np.diff(line[:, 0])
    k = np.clip(np.searchsorted(line[:, 0], x, side="right") - 1, 0, len(slopes) - 1)
    return slopes[k]


# ---------------------------------------------------------------------------
# core API

def reset(spec: EnvSpec, seed: int) -> np.ndarray:
    if spec.name == "point_umaze":
        return np.array([2.0, 4.0, 0.0, 0.0])
    rng = np.random.default_rng([seed, 7919])
    speed = rng.uniform(6.5, 8.5)
    lead = rng.uniform(-15.0, 15.0)
    gaps = rng.uniform(12.0, 22.0, size=N_CARS - 1)
    xs = lead - np.concatenate([[0.0], np.cumsum(gaps)])
    ego = np.array([0.0, -4.0, MERGE_START_SPEED, 0.0])
    cars = np.stack([xs - ego[0], np.zeros(N_CARS) - ego[1],
                     np.full(N_CARS, speed) - ego[2], np.zeros(N_CARS) - ego[3]], axis=1)
    return np.concatenate([ego, cars.reshape(-1)])


def in_goal(spec: EnvSpec, state) -> np.ndarray | bool:
    s = np.asarray(state)
    x, y = s[..., 0], s[..., 1]
    if spec.name == "point_umaze":
        return (x <= 3.0) & (y >= 12.0)
    return (x >= 110.0) & (y >= 2.0)


def progress(spec: EnvSpec, state) -> np.ndarray | float:
    """Fraction of the route centerline covered, in ``[0, 1]``."""
    s = np.asarray(state, dtype=np.float64)
    arc, _ = project(spec.centerline, s[..., :2])
    frac = np.clip(arc / route_length(spec), 0.0, 1.0)
    frac = np.where(in_goal(spec, s), 1.0, frac)
    return float(frac) if np.ndim(frac) == 0 else frac


def _umaze_move(pos, vel, dt):
    x0, x1, y0, y1 = UMAZE_WALL
    lo, hi = UMAZE_ARENA
    pos = pos.copy()
    vel = vel.copy()
    # x first, then y; each axis stops at the first face it would cross
    nx = pos[:, 0] + vel[:, 0] * dt
    y = pos[:, 1]
    in_band = (y > y0) & (y < y1)
    hit_wall = in_band & (nx < x1) & (pos[:, 0] >= x1)
    nx = np.where(hit_wall, x1, nx)
    hit_arena = (nx < lo) | (nx > hi)
    nx = np.clip(nx, lo, hi)
    vel[:, 0] = np.where(hit_wall | hit_arena, 0.0, vel[:, 0])
    pos[:, 0] = nx

    ny = pos[:, 1] + vel[:, 1] * dt
    x = pos[:, 0]
    in_cols = (x >= x0) & (x < x1)
    from_below = in_cols & (pos[:, 1] <= y0) & (ny > y0)
    from_above = in_cols & (pos[:, 1] >= y1) & (ny < y1)
    ny = np.where(from_below, y0, np.where(from_above, y1, ny))
    hit_arena = (ny < lo) | (ny > hi)
    ny = np.clip(ny, lo, hi)
    vel[:, 1] = np.where(from_below | from_above | hit_arena, 0.0, vel[:, 1])
    pos[:, 1] = ny
    return pos, vel


def merge_collisions(state):
    s = np.atleast_2d(state)
    cars = s[:, 4:].reshape(len(s), N_CARS, 4)
    overlap = (np.abs(cars[:, :, 0]) < CAR_HALF_LENGTH) & (np.abs(cars[:, :, 1]) < CAR_HALF_WIDTH)
    off_road = np.abs(s[:, 1] - _merge_center_y(s[:, 0])) > MERGE_HALF_WIDTH
    off_road |= s[:, 0] < -1.0
    return overlap.any(axis=1) | off_road


def step(spec: EnvSpec, state, action) -> StepResult:
    """Advance one ``dt``.  Batched when ``state`` is 2-D."""
    s = np.asarray(state, dtype=np.float64)
    single = s.ndim == 1
    s = np.atleast_2d(s)
    if not np.all(np.isfinite(s)):
        raise NumericError("non-finite state passed to step")
    a = np.clip(np.atleast_2d(np.asarray(action, dtype=np.float64)), -1.0, 1.0)
    if not np.all(np.isfinite(a)):
        raise NumericError("non-finite action passed to step")
    a_scale = np.asarray(spec.a_scale)
    v_max = np.asarray(spec.v_max)
    dt = spec.dt
    vel = np.clip(s[:, 2:4] + a * dt * a_scale, -v_max, v_max)
    if spec.name == "point_umaze":
        pos, vel = _umaze_move(s[:, :2], vel, dt)
        nxt = np.concatenate([pos, vel], axis=1)
        collision = np.zeros(len(s), dtype=bool)
    else:
        pos = s[:, :2] + vel * dt
        ego_old = s[:, :4]
        cars = s[:, 4:].reshape(len(s), N_CARS, 4)
        abs_pos = cars[:, :, :2] + ego_old[:, None, :2]
        abs_vel = cars[:, :, 2:] + ego_old[:, None, 2:]
        abs_pos = abs_pos + abs_vel * dt
        rel = np.concatenate([abs_pos - pos[:, None, :], abs_vel - vel[:, None, :]], axis=2)
        nxt = np.concatenate([pos, vel, rel.reshape(len(s), -1)], axis=1)
        collision = merge_collisions(nxt)
    success = in_goal(spec, nxt) & ~collision
    done = success | collision
    prog = progress(spec, nxt)
    if single:
        return StepResult(nxt[0], bool(done[0]), bool(success[0]), bool(collision[0]), float(prog[0]))
    return StepResult(nxt, done, success, collision, prog)


# ---------------------------------------------------------------------------
# scripted experts

UMAZE_SPEED = 1.8
UMAZE_LOOKAHEAD = 0.6
UMAZE_GAIN = 2.0


def _umaze_expert(spec, s):
    pos, vel = s[:, :2], s[:, 2:4]
    arc, _ = project(spec.centerline, pos)
    direction = point_at(spec.centerline, arc + UMAZE_LOOKAHEAD) - pos
    norm = np.linalg.norm(direction, axis=1, keepdims=True)
    v_des = UMAZE_SPEED * direction / np.maximum(norm, 1e-9)
    return np.clip(UMAZE_GAIN * (v_des - vel), -1.0, 1.0)


MERGE_SPEEDS = np.arange(3.0, 12.01, 0.5)
MERGE_CRUISE = 10.0
MERGE_HORIZON = 60
MERGE_LAT_KP = 1.0
MERGE_LAT_KD = 1.2
MERGE_LON_K = 1.0


def _merge_track(s, v_target):
    """Controller following the centerline at longitudinal speed ``v_target``."""
    x, y, vx, vy = s[:, 0], s[:, 1], s[:, 2], s[:, 3]
    y_ref = _merge_center_y(x)
    vy_ref = _merge_center_slope(x) * vx
    ay = MERGE_LAT_KP * (y_ref - y) + MERGE_LAT_KD * (vy_ref - vy)
    ax = MERGE_LON_K * (v_target - vx)
    return np.clip(np.stack([ax, ay], axis=1), -1.0, 1.0)


def _merge_choose_speed(spec, s):
    """Pick the target speed closest to cruise whose rollout stays collision free.

    Candidate speeds are simulated with the tracking controller against the
    cars' constant-velocity futures; if none is safe the one that survives
    longest wins.
    """
    speeds = MERGE_SPEEDS
    a_scale = np.asarray(spec.a_scale)
    v_max = np.asarray(spec.v_max)
    dt = spec.dt
    ego = np.repeat(s[None, :4], len(speeds), axis=0)
    cars = s[4:].reshape(N_CARS, 4)
    car_pos = cars[:, :2] + s[:2]
    car_vel = cars[:, 2:] + s[2:4]
    alive = np.ones(len(speeds), dtype=bool)
    survived = np.zeros(len(speeds))
    for t in range(1, MERGE_HORIZON + 1):
        a = _merge_track(ego, speeds)
        vel = np.clip(ego[:, 2:] + a * dt * a_scale, -v_max, v_max)
        pos = ego[:, :2] + vel * dt
        ego = np.concatenate([pos, vel], axis=1)
        cp = car_pos + car_vel * (t * dt)
        d = cp[None, :, :] - pos[:, None, :]
        crash = ((np.abs(d[:, :, 0]) < CAR_HALF_LENGTH)
                 & (np.abs(d[:, :, 1]) < CAR_HALF_WIDTH)).any(axis=1)
        crash |= np.abs(pos[:, 1] - _merge_center_y(pos[:, 0])) > MERGE_HALF_WIDTH
        finished = in_goal(spec, ego)
        alive &= ~crash
        survived += alive
        if not (alive & ~finished).any():
            break
    if alive.any():
        cand = np.where(alive)[0]
        return speeds[cand[np.argmin(np.abs(speeds[cand] - MERGE_CRUISE))]]
    return speeds[np.argmax(survived)]


def expert_action(spec: EnvSpec, state) -> np.ndarray:
    """Scripted demonstrator action (privileged knowledge of the route)."""
    s = np.asarray(state, dtype=np.float64)
    single = s.ndim == 1
    s = np.atleast_2d(s)
    if spec.name == "point_umaze":
        a = _umaze_expert(spec, s)
    else:
        v = np.array([_merge_choose_speed(spec, row) for row in s])
        a = _merge_track(s, v)
    return a[0] if single else a


def rollout(spec: EnvSpec, seed: int, policy=None):
    """Run one episode; ``policy(state) -> action`` defaults to the expert.

    Returns ``(states, actions, info)`` with ``len(states) == len(actions) + 1``.
    """
    policy = policy or (lambda st: expert_action(spec, st))
    s = reset(spec, seed)
    states, actions = [s], []
    info = {"success": False, "collision": False, "progress": progress(spec, s)}
    for _ in range(spec.max_steps):
        a = np.clip(np.asarray(policy(s), dtype=np.float64), -1.0, 1.0)
        res = step(spec, s, a)
        actions.append(a)
        states.append(res.next_state)
        s = res.next_state
        info["progress"] = res.progress
        if res.done:
            info["success"], info["collision"] = res.success, res.collision
            break
    return np.array(states), np.array(actions), info


def h_position(spec: EnvSpec, state) -> np.ndarray:
    """Representation for the matching potential: scaled ego position."""
    return np.asarray(state)[..., :2] * spec.h_scale
