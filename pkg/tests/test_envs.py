import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from csirl import envs
from csirl.diffnet import NumericError

UMAZE = envs.make("point_umaze")
MERGE = envs.make("lane_merge")


def test_spec_dimensions():
    assert (UMAZE.state_dim, UMAZE.action_dim, UMAZE.max_steps, UMAZE.dt) == (4, 2, 300, 0.1)
    assert (MERGE.state_dim, MERGE.action_dim, MERGE.max_steps, MERGE.dt) == (16, 2, 200, 0.1)


def test_unknown_env():
    with pytest.raises(ValueError, match="unknown env"):
        envs.make("bogus")


@given(st.integers(0, 2**31 - 1))
def test_umaze_reset_at_rest(seed):
    s = envs.reset(UMAZE, seed)
    assert s[2] == 0.0 and s[3] == 0.0


@pytest.mark.parametrize("spec", [UMAZE, MERGE], ids=lambda s: s.name)
def test_reset_deterministic(spec):
    np.testing.assert_array_equal(envs.reset(spec, 11), envs.reset(spec, 11))


def test_merge_seeds_change_traffic():
    assert not np.array_equal(envs.reset(MERGE, 0)[4:], envs.reset(MERGE, 1)[4:])


def test_zero_action_at_rest_stays_put():
    s = envs.reset(UMAZE, 0)
    res = envs.step(UMAZE, s, np.zeros(2))
    np.testing.assert_array_equal(res.next_state[:2], s[:2])
    assert res.done is False


def test_euler_arithmetic():
    res = envs.step(UMAZE, np.array([0.0, 0.0, 1.0, 0.0]), np.zeros(2))
    np.testing.assert_allclose(res.next_state[:2], [0.1, 0.0], atol=1e-15)


def test_actions_are_clipped():
    s = np.array([5.0, 5.0, 0.0, 0.0])
    big = envs.step(UMAZE, s, np.array([50.0, -50.0])).next_state
    unit = envs.step(UMAZE, s, np.array([1.0, -1.0])).next_state
    np.testing.assert_array_equal(big, unit)


def test_wall_blocks_motion_from_below():
    s = np.array([5.0, 7.95, 0.0, 2.0])
    res = envs.step(UMAZE, s, np.zeros(2))
    assert res.next_state[1] == 8.0 and res.next_state[3] == 0.0


def test_merge_overlap_is_collision():
    s = envs.reset(MERGE, 0).copy()
    s[4:8] = [1.0, 0.5, 0.0, 0.0]  # first car right next to the ego
    res = envs.step(MERGE, s, np.zeros(2))
    assert res.collision and res.done and not res.success


def test_merge_off_road_is_collision():
    s = envs.reset(MERGE, 0).copy()
    s[1] = -7.0
    assert envs.step(MERGE, s, np.zeros(2)).collision


def test_non_finite_state_rejected():
    with pytest.raises(NumericError):
        envs.step(UMAZE, np.array([np.nan, 0, 0, 0]), np.zeros(2))


@settings(max_examples=50, deadline=None)
@given(st.integers(0, 1000), st.sampled_from(["point_umaze", "lane_merge"]))
def test_success_and_collision_imply_done(seed, name):
    spec = envs.make(name)
    rng = np.random.default_rng(seed)
    s = envs.reset(spec, seed)
    for _ in range(40):
        res = envs.step(spec, s, rng.uniform(-1, 1, 2))
        assert (not res.success or res.done) and (not res.collision or res.done)
        assert 0.0 <= res.progress <= 1.0
        if res.done:
            break
        s = res.next_state


def test_batched_step_matches_single():
    rng = np.random.default_rng(0)
    S = np.stack([envs.reset(MERGE, k) for k in range(4)])
    A = rng.uniform(-1, 1, (4, 2))
    batch = envs.step(MERGE, S, A)
    for k in range(4):
        single = envs.step(MERGE, S[k], A[k])
        np.testing.assert_array_equal(batch.next_state[k], single.next_state)
        assert batch.done[k] == single.done


# ---- progress ---------------------------------------------------------------

@pytest.mark.parametrize("spec", [UMAZE, MERGE], ids=lambda s: s.name)
def test_progress_zero_at_reset(spec):
    assert envs.progress(spec, envs.reset(spec, 0)) == pytest.approx(0.0, abs=1e-12)


def test_progress_one_in_goal():
    assert envs.progress(UMAZE, np.array([2.5, 15.0, 0, 0])) == 1.0
    s = envs.reset(MERGE, 0).copy()
    s[:2] = [112.0, 4.0]
    assert envs.progress(MERGE, s) == 1.0


def test_progress_at_route_midpoint():
    # centerline length 15 + 12 + 15 = 42; arc 21 is six units up the right leg
    assert envs.route_length(UMAZE) == pytest.approx(42.0)
    assert envs.progress(UMAZE, np.array([17.0, 10.0, 0, 0])) == pytest.approx(0.5, abs=0.02)


@given(st.floats(0.0, 41.0), st.floats(0.01, 1.0))
def test_progress_monotone_along_centerline(arc, extra):
    p0 = envs.point_at(UMAZE.centerline, arc)
    p1 = envs.point_at(UMAZE.centerline, min(arc + extra, 42.0))
    s0 = np.array([*p0, 0, 0])
    s1 = np.array([*p1, 0, 0])
    assert envs.progress(UMAZE, s1) >= envs.progress(UMAZE, s0)


# ---- scripted expert ------------------------------------------------------

def test_expert_near_zero_on_track_at_speed():
    # on the first leg, heading +x at the cruise speed
    s = np.array([8.0, 4.0, envs.UMAZE_SPEED, 0.0])
    assert np.all(np.abs(envs.expert_action(UMAZE, s)) <= 0.05)


def test_expert_accelerates_forward_from_rest():
    assert envs.expert_action(UMAZE, envs.reset(UMAZE, 0))[0] > 0


def test_umaze_expert_succeeds():
    states, actions, info = envs.rollout(UMAZE, 0)
    assert info["success"] and len(actions) < 300
    assert len(states) == len(actions) + 1


def test_merge_expert_succeeds_on_several_seeds():
    wins = [envs.rollout(MERGE, s)[2]["success"] for s in range(5)]
    assert all(wins)


def test_h_position_scaled():
    np.testing.assert_allclose(envs.h_position(UMAZE, np.array([4.0, 6.0, 1, 1])), [2.0, 3.0])
