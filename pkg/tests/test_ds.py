import math

import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from rocus import ds
from rocus.ds import (
    DSController,
    StarObstacle,
    aggregate,
    ds_policy,
    ds_rollout,
    extract_obstacles,
    from_kappa,
    gamma_value,
    modulate_single,
    obstacle_weights,
    to_kappa,
)
from rocus.env2d import env_field, grid_axis, occupancy_grid, rollout, sample_prior_task

from conftest import far_task


def union_find_components(occ):
    """4-connected labelling by union-find, as a set of frozensets of cells."""
    parent = {}

    def find(a):
        while parent[a] != a:
            parent[a] = parent[parent[a]]
            a = parent[a]
        return a

    cells = list(zip(*np.nonzero(occ)))
    for c in cells:
        parent[c] = c
    for i, j in cells:
        for nb in ((i + 1, j), (i, j + 1)):
            if nb in parent:
                ra, rb = find((i, j)), find(nb)
                if ra != rb:
                    parent[ra] = rb
    groups = {}
    for c in cells:
        groups.setdefault(find(c), set()).add(c)
    return {frozenset(g) for g in groups.values()}


def scipy_components(occ):
    from scipy import ndimage

    lab, n = ndimage.label(occ)
    return {frozenset(zip(*np.nonzero(lab == k))) for k in range(1, n + 1)}


def test_flood_fill_matches_union_find(prior_tasks, params):
    for t in prior_tasks[:10]:
        occ = occupancy_grid(t, params)
        assert scipy_components(occ) == union_find_components(occ)
        assert len(extract_obstacles(t, params, occ=occ)) == len(union_find_components(occ))


def test_single_point_component_centroid(params):
    t = far_task((0.13, -0.27))
    obs = extract_obstacles(t, params)
    assert len(obs) == 1
    # brute-force centroid of occupied cells
    ax = grid_axis(params)
    occ = occupancy_grid(t, params)
    ii, jj = np.nonzero(occ)
    ref = np.array([ax[ii].mean(), ax[jj].mean()])
    np.testing.assert_allclose(obs[0].reference_point, ref)
    assert np.hypot(*(obs[0].reference_point - [0.13, -0.27])) < 0.016


def test_two_separated_clusters(params):
    sep = 2 * math.sqrt(math.log(15 / 0.1) / 25)
    a = [(-0.5, -0.5)] * 7
    b = [(-0.5 + sep + 0.05, -0.5)] * 8
    t = far_task(*(a + b))
    assert len(extract_obstacles(t, params)) == 2


def test_empty_field_gives_no_obstacles(empty_task, params):
    assert extract_obstacles(empty_task, params) == []


def test_star_obstacle_structure(prior_tasks, params):
    for t in prior_tasks[:10]:
        occ = occupancy_grid(t, params)
        for o in extract_obstacles(t, params, occ=occ):
            assert o.n_rays == 50
            assert np.all(np.diff(o.ray_angles) > 0)
            assert np.all(o.boundary_radii > 0)
            # reference point inside its component
            h = (params.hi - params.lo) / 150
            i, j = ((o.reference_point - params.lo) // h).astype(int)
            assert occ[i, j]


def test_gamma_values_on_rays():
    o = StarObstacle(np.array([0.1, 0.2]), np.linspace(0.1, 0.3, 50))
    for k in (0, 7, 31):
        v = o.vertices[k]
        assert gamma_value(o, v) == pytest.approx(1.0, abs=1e-12)
        assert gamma_value(o, 0.5 * (v + o.reference_point)) == pytest.approx(0.5, abs=1e-12)
        assert gamma_value(o, 2 * v - o.reference_point) == pytest.approx(2.0, abs=1e-12)


@given(st.floats(0, 2 * math.pi), st.integers(0, 10_000))
def test_gamma_monotone_along_ray(theta, seed):
    radii = np.random.default_rng(seed).uniform(0.05, 0.4, 50)
    o = StarObstacle(np.zeros(2), radii)
    r = np.linspace(0, 1, 100)
    pts = r[:, None] * [math.cos(theta), math.sin(theta)]
    g = o.gamma(pts)
    assert np.all(np.diff(g) >= -1e-12)
    assert np.allclose(g, o.gamma(pts))  # vectorised == scalar path below
    assert g[40] == pytest.approx(o.gamma(pts[40]), rel=1e-12)


def test_far_field_identity():
    o = StarObstacle.circle([0.0, 0.0], 0.2)
    x = np.array([200.0, 30.0])
    u = np.array([-1.0, 0.3])
    assert o.gamma(x) > 1e3
    out = modulate_single(o, x, u)
    assert np.linalg.norm(out - u) <= 1e-3 * np.linalg.norm(u)


def test_radial_component_vanishes_at_boundary():
    o = StarObstacle.circle([0.0, 0.0], 0.2)
    for eps in (1e-2, 1e-4, 1e-6):
        x = np.array([0.2 * (1 + eps), 0.0])
        out = modulate_single(o, x, [-1.0, 0.0])
        assert abs(out[0]) <= 2 * eps


def test_circle_tangent_amplification():
    # analytic circle Gamma = |x|/R; tangent velocity scaled by 1 + 1/Gamma
    R = 0.2
    o = StarObstacle.circle([0.0, 0.0], R)
    for ang in np.linspace(0.05, 6.2, 9):
        x = 0.3 * np.array([math.cos(ang), math.sin(ang)])
        u = np.array([-math.sin(ang), math.cos(ang)])
        out = modulate_single(o, x, u)
        g = 0.3 / R
        np.testing.assert_allclose(out, (1 + 1 / g) * u, rtol=0.05, atol=1e-9)
        assert abs(out[0] * u[1] - out[1] * u[0]) < 1e-6


def test_inside_obstacle_pushes_out():
    o = StarObstacle.circle([0.0, 0.0], 0.2)
    out = modulate_single(o, [0.05, 0.0], [-2.0, 0.0])
    np.testing.assert_allclose(out, [2.0, 0.0])


def test_single_obstacle_aggregate_is_exact(prior_tasks, params):
    rng = np.random.default_rng(3)
    for t in prior_tasks[:10]:
        obs = extract_obstacles(t, params)[:1]
        if not obs:
            continue
        x = rng.uniform(-1.1, 1.1, 2)
        u = params.goal_arr - x
        np.testing.assert_array_equal(aggregate(obs, x, params.goal_arr), modulate_single(obs[0], x, u))


def test_weights_on_boundary_and_normalised():
    w = obstacle_weights([1.0, 3.0, 2.0])
    np.testing.assert_allclose(w, [1.0, 0.0, 0.0], atol=1e-9)
    rng = np.random.default_rng(0)
    for _ in range(100):
        g = rng.uniform(1.0, 20.0, rng.integers(2, 8))
        assert obstacle_weights(g).sum() == pytest.approx(1.0, abs=1e-12)


def test_boundary_aggregate_follows_that_obstacle():
    a = StarObstacle.circle([0.0, 0.5], 0.2)
    b = StarObstacle.circle([0.0, -0.5], 0.2)
    x = np.array([0.0, 0.3])
    goal = np.array([1.0, 1.0])
    ua = modulate_single(a, x, goal - x)
    out = aggregate([a, b], x, goal)
    assert abs(out[0] * ua[1] - out[1] * ua[0]) <= 1e-12 * np.linalg.norm(out) * np.linalg.norm(ua) + 1e-15
    assert np.dot(out, ua) > 0


def test_symmetric_pair_has_no_perpendicular_component():
    # obstacles mirrored across the line y = x; x on that line heading to the goal
    a = StarObstacle.circle([0.3, -0.3], 0.2)
    b = StarObstacle.circle([-0.3, 0.3], 0.2)
    for s in (-0.8, -0.5, 0.5):
        x = np.array([s, s])
        out = aggregate([a, b], x, np.array([1.0, 1.0]))
        perp = (out[0] - out[1]) / math.sqrt(2)
        assert abs(perp) <= 1e-9 * np.linalg.norm(out)


@given(st.floats(-math.pi / 2 + 1e-6, math.pi / 2 - 1e-6))
def test_kappa_roundtrip(ang):
    u = np.array([[math.cos(ang), math.sin(ang)]])
    np.testing.assert_allclose(from_kappa(to_kappa(u)), u, atol=1e-9)


def test_kappa_zero_tail():
    assert to_kappa([1.0, 0.0])[0] == 0.0


def test_empty_env_policy_is_attractor(empty_task, params):
    pol = ds_policy(empty_task, params)
    x = np.array([0.3, -0.2])
    np.testing.assert_array_equal(pol.velocity(x), params.goal_arr - x)


def test_compiled_rollout_matches_python_loop(prior_tasks, params):
    for t in prior_tasks[:10]:
        a = rollout(ds_policy(t, params), t, params)
        b = ds_rollout(t, params)
        np.testing.assert_array_equal(a.positions, b.positions)
        assert a.reached_goal == b.reached_goal


def test_ds_reaches_goal_on_prior(params):
    rng = np.random.default_rng(11)
    reached = 0
    for _ in range(200):
        t = sample_prior_task(rng)
        tr = DSController().run(t, params)
        assert not np.any(env_field(t, params, tr.positions) > params.eta)
        reached += tr.reached_goal
    assert reached >= 190


def test_tail_effect_goes_around(params):
    t = far_task(*([(0.0, 0.0)] * 3))
    tr = ds_rollout(t, params)
    assert tr.reached_goal
    dev = np.abs(tr.positions[:, 0] - tr.positions[:, 1]) / math.sqrt(2)
    assert dev.max() > 0.1
    assert not np.any(env_field(t, params, tr.positions) > params.eta)


def test_debug_json_shape(prior_tasks, params):
    import json

    doc = json.loads(ds.obstacles_debug_json(prior_tasks[0], params))
    assert len(doc["occupancy"]) == 150
    assert all(len(o["vertices"]) == 50 for o in doc["obstacles"])
