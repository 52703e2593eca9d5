import math

import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from rocus.env2d import (
    DEFAULT_PARAMS,
    EnvParams,
    Task2D,
    Trajectory,
    env_field,
    field_gradient,
    is_obstacle,
    occupancy_grid,
    rollout,
    sample_prior_task,
    start_goal_free,
    step,
    straight_policy,
    grid_axis,
)

from conftest import far_task

coord = st.floats(-0.7, 0.7, allow_nan=False)
points15 = st.lists(st.tuples(coord, coord), min_size=15, max_size=15)
action = st.tuples(st.floats(-0.2, 0.2), st.floats(-0.2, 0.2))


def brute_field(points, gamma, p):
    return sum(math.exp(-gamma * ((p[0] - a) ** 2 + (p[1] - b) ** 2)) for a, b in points)


def test_field_single_point_is_one(params):
    assert env_field(far_task((0.2, 0.3)), params, [0.2, 0.3]) == 1.0


def test_field_at_distance_matches_closed_form(params):
    # exp(-25 * 0.1^2) by hand
    v = env_field(far_task((0.0, 0.0)), params, [0.1, 0.0])
    assert v == pytest.approx(0.7788007830714049, abs=1e-15)


def test_field_all_coincident(params):
    t = Task2D(np.tile([0.1, -0.2], (15, 1)))
    assert env_field(t, params, [0.1, -0.2]) == 15.0


@given(points15, st.tuples(st.floats(-1.2, 1.2), st.floats(-1.2, 1.2)))
def test_field_matches_bruteforce(pts, p):
    t = Task2D(np.array(pts))
    ref = brute_field(pts, 25.0, p)
    assert env_field(t, DEFAULT_PARAMS, p) == pytest.approx(ref, rel=1e-12, abs=1e-300)
    # array path agrees with the scalar path
    assert env_field(t, DEFAULT_PARAMS, np.array([p, p]))[0] == pytest.approx(ref, rel=1e-12, abs=1e-300)


def test_gradient_matches_finite_difference(prior_tasks, params):
    rng = np.random.default_rng(0)
    for t in prior_tasks[:10]:
        p = rng.uniform(-1, 1, 2)
        h = 1e-6
        fd = [(env_field(t, params, p + e * h) - env_field(t, params, p - e * h)) / (2 * h) for e in np.eye(2)]
        np.testing.assert_allclose(field_gradient(t, params, p), fd, rtol=1e-5, atol=1e-7)


def test_is_obstacle_cases(params):
    assert is_obstacle(far_task((0.0, 0.0)), params, [0.0, 0.0])
    # every point at least 1.0 away
    t = Task2D(np.tile([0.7, 0.7], (15, 1)))
    p = np.array([-0.3, 0.7])
    assert 15 * math.exp(-25) < 0.9
    assert not is_obstacle(t, params, p)


def test_is_obstacle_strict_at_threshold():
    # single point at distance r with exp(-gamma r^2) == eta for a contrived eta
    p = EnvParams(eta=math.exp(-25 * 0.25 ** 2))
    t = far_task((0.0, 0.0))
    x = np.array([0.25, 0.0])
    assert env_field(t, p, x) == p.eta
    assert not is_obstacle(t, p, x)


def test_step_free_move(empty_task, params):
    out = step(empty_task, params, [-1.0, -1.0], [0.02, 0.01])
    np.testing.assert_allclose(out, [-0.98, -0.99], atol=1e-15)


def test_step_clamps_action(empty_task, params):
    out = step(empty_task, params, [0.0, 0.0], [0.1, 0.0])
    np.testing.assert_array_equal(out, [0.03, 0.0])


def test_step_wall_clip(empty_task, params):
    out = step(empty_task, params, [1.19, 0.0], [0.03, 0.03])
    np.testing.assert_allclose(out, [1.2, 0.03])


def test_head_on_collision_does_not_move(params):
    r = math.sqrt(math.log(1 / params.eta) / params.gamma)
    t = far_task((0.0, 0.0))
    start = np.array([-(r + 1e-3), 0.0])
    out = step(t, params, start, [0.03, 0.0])
    np.testing.assert_array_equal(out, start)


@given(points15, action, st.floats(-1.2, 1.2), st.floats(-1.2, 1.2))
def test_step_properties(pts, a, x, y):
    t = Task2D(np.array(pts))
    p = np.array([x, y])
    out = step(t, DEFAULT_PARAMS, p, a)
    d = out - p
    assert np.all(np.abs(d) <= 0.03 + 1e-12)
    if not is_obstacle(t, DEFAULT_PARAMS, p):
        assert not is_obstacle(t, DEFAULT_PARAMS, out)
    a_cl = np.clip(a, -0.03, 0.03)
    assert np.dot(d, a_cl) >= -1e-15


def test_prior_sampler(params):
    rng = np.random.default_rng(7)
    tasks = [sample_prior_task(rng) for _ in range(10_000)]
    allpts = np.stack([t.points for t in tasks])
    assert np.all(np.abs(allpts) <= 0.7)
    assert np.all(np.abs(allpts.reshape(-1, 2).mean(axis=0)) < 0.02)
    assert all(start_goal_free(t) for t in tasks[:500])
    again = sample_prior_task(np.random.default_rng(7))
    assert again == tasks[0]


def test_task_support_and_roundtrip(params):
    t = sample_prior_task(np.random.default_rng(0))
    assert t.in_support(params)
    assert Task2D.from_list(t.to_list()) == t
    assert hash(Task2D.from_list(t.to_list())) == hash(t)
    assert not far_task((0.0, 0.0)).in_support(params)
    with pytest.raises(ValueError):
        t.points[0, 0] = 1.0


def test_straight_rollout_step_count(empty_task, params):
    # 2*sqrt(2) at 0.03 per step; the last step lands within the 0.05 tolerance
    tr = rollout(straight_policy(params), empty_task, params)
    dist = math.hypot(2, 2)
    n_oracle = math.ceil((dist - params.goal_tol) / 0.03)
    assert len(tr) - 1 == n_oracle == 93
    assert tr.reached_goal
    np.testing.assert_array_equal(tr.positions[0], params.start)


def test_rollout_zero_steps(empty_task):
    p = EnvParams(max_steps=0)
    tr = rollout(straight_policy(p), empty_task, p)
    assert len(tr) == 1 and not tr.reached_goal


def test_rollout_determinism_and_nonpenetration(prior_tasks, params):
    for t in prior_tasks[:20]:
        a = rollout(straight_policy(params), t, params)
        b = rollout(straight_policy(params), t, params)
        np.testing.assert_array_equal(a.positions, b.positions)
        assert not np.any(env_field(t, params, a.positions) > params.eta)
        steps = np.diff(a.positions, axis=0)
        assert np.all(np.hypot(steps[:, 0], steps[:, 1]) <= math.sqrt(2) * 0.03 + 1e-12)


def test_occupancy_grid_matches_pointwise(prior_tasks, params):
    ax = grid_axis(params, 60)
    for t in prior_tasks[:5]:
        occ = occupancy_grid(t, params, 60)
        xx, yy = np.meshgrid(ax, ax, indexing="ij")
        ref = env_field(t, params, np.stack([xx, yy], -1)) > params.eta
        # the separable product can differ by rounding exactly at the threshold
        assert (occ != ref).sum() <= 1


def test_trajectory_roundtrip():
    tr = Trajectory(np.array([[0.0, 0.1], [0.2, 0.3]]), True)
    back = Trajectory.from_list(tr.to_list(), True)
    np.testing.assert_array_equal(back.positions, tr.positions)
