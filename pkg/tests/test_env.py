import math

import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from elcgen.env import (OBS_DIM, SENTINEL, EpisodeLog, LaneKeepPolicy, ScenarioConfig, VehicleSpec, VehicleState,
                        WorldState, analytic_trigger_step, bicycle_step, check_collision, closing_scenario,
                        denormalize, load_episode, observe, pairwise_ttc, rect_overlap_depth, run_episode,
                        standard_scenarios, step, ttc, ttc_kernel)
from elcgen.env.world import WHEELBASE


def _world(*vehicles, dt=0.05):
    return WorldState(dt=dt, vehicles=list(vehicles))


def _ego(**kw):
    return VehicleState(role="ego", vid=0, **{"x": 0.0, "y": 1.75, "v": 20.0, **kw})


def _target(**kw):
    return VehicleState(role="target", vid=1, **{"x": 50.0, "y": 1.75, "v": 20.0, **kw})


def test_straight_line_step():
    w = _world(_ego(), _target())
    nxt = step(w, {0: (0.0, 0.0), 1: (0.0, 0.0)})
    assert nxt.ego.x == pytest.approx(1.0, abs=1e-15)
    assert nxt.ego.y == 1.75
    assert nxt.time == pytest.approx(0.05)


def test_step_halving_is_second_order():
    s0 = np.array([[0.0, 0.0, 0.1, 15.0]])
    a, d = np.array([1.5]), np.array([0.05])
    errs = []
    for dt in (0.1, 0.05, 0.025):
        one = bicycle_step(s0, a, d, dt, WHEELBASE)
        two = bicycle_step(bicycle_step(s0, a, d, dt / 2, WHEELBASE), a, d, dt / 2, WHEELBASE)
        errs.append(np.abs(one - two).max())
    assert errs[1] <= 0.3 * errs[0] and errs[2] <= 0.3 * errs[1]
    assert errs[0] <= 5.0 * 0.1 ** 2


def test_turning_radius():
    delta, v, dt = 0.1, 10.0, 0.001
    R = WHEELBASE / math.tan(delta)
    s = np.array([[0.0, 0.0, 0.0, v]])
    steps = int(round(2 * math.pi * R / (v * dt)))
    pts = np.empty((steps, 2))
    for k in range(steps):
        s = bicycle_step(s, np.zeros(1), np.full(1, delta), dt, WHEELBASE)
        pts[k] = s[0, :2]
    radius = np.hypot(pts[:, 0], pts[:, 1] - R)
    assert np.all(np.abs(radius - R) / R < 0.01)


def test_actuator_clamp_counted():
    w = _world(_ego(), _target())
    nxt = step(w, {0: (50.0, 0.0)})
    assert nxt.ego.a == w.limits.a_max
    assert nxt.clamp_count == 1
    with pytest.raises(ValueError):
        step(w, {}, dt=0.0)


def test_world_validation():
    with pytest.raises(ValueError):
        _world(_ego(), _ego())
    with pytest.raises(ValueError):
        VehicleState(x=0, y=0, v=-1)


def test_ttc_examples():
    w = _world(_ego(x=0.0, y=0.0, v=28.0), _target(x=20.0, y=0.0, v=20.0))
    assert ttc(w) == pytest.approx(2.5, abs=1e-12)
    w = _world(_ego(v=20.0), _target(v=25.0))
    assert math.isinf(ttc(w))
    # neighbor abeam of the ego (bearing − ψ = 90°): cos term is zero
    w = _world(_ego(x=0.0, y=0.0, v=20.0), _target(x=0.0, y=3.5, v=20.0, psi=-0.2))
    assert math.isinf(ttc(w))


@given(st.floats(1, 80), st.floats(-5, 5), st.floats(0.1, 15))
def test_ttc_collinear_formula(gap, lateral, dv):
    w = _world(_ego(x=0.0, y=1.75, v=20.0 + dv), _target(x=gap, y=1.75 + lateral, v=20.0))
    d = math.hypot(gap, lateral)
    assert ttc(w) == pytest.approx(d ** 3 / (dv * gap * gap), rel=1e-12)


def test_ttc_kernel_matches_python_path():
    rng = np.random.default_rng(0)
    xs, ys = rng.uniform(-50, 50, 20), rng.uniform(-8, 8, 20)
    vx, vy = rng.uniform(0, 30, 20), rng.uniform(-2, 2, 20)
    a = ttc_kernel(0.0, 0.0, 0.1, 25.0, 1.0, xs, ys, vx, vy)
    b = ttc_kernel.py_func(0.0, 0.0, 0.1, 25.0, 1.0, xs, ys, vx, vy)
    np.testing.assert_array_equal(a, b)


def test_collision_examples():
    assert rect_overlap_depth(0, 0, 0.3, 4.5, 1.8, 0, 0, 0.3, 4.5, 1.8) > 0
    assert rect_overlap_depth(0, 0, 0.0, 4.5, 1.8, 4.6, 0, 0.0, 4.5, 1.8) < 0
    w = _world(_ego(x=0.0), _target(x=3.0))
    hit = check_collision(w)
    assert hit is not None and hit.other_id == 1
    assert check_collision(_world(_ego(x=0.0), _target(x=10.0))) is None


def _inside(px, py, cx, cy, psi, length, width):
    dx, dy = px - cx, py - cy
    c, s = math.cos(psi), math.sin(psi)
    return (np.abs(c * dx + s * dy) <= length / 2) & (np.abs(-s * dx + c * dy) <= width / 2)


def test_collision_point_sampling_oracle():
    rng = np.random.default_rng(3)
    u = rng.uniform(-0.5, 0.5, size=(10_000, 2))
    checked = 0
    for _ in range(1000):
        a = (0.0, 0.0, rng.uniform(-np.pi, np.pi), rng.uniform(2, 6), rng.uniform(1, 2.5))
        b = (rng.uniform(-6, 6), rng.uniform(-6, 6), rng.uniform(-np.pi, np.pi), rng.uniform(2, 6),
             rng.uniform(1, 2.5))
        depth = rect_overlap_depth(*a, *b)
        if abs(depth) < 0.05:
            continue  # marginal contact: point sampling cannot resolve it
        ca, sa = math.cos(a[2]), math.sin(a[2])
        lx, ly = u[:, 0] * a[3], u[:, 1] * a[4]
        px, py = a[0] + ca * lx - sa * ly, a[1] + sa * lx + ca * ly
        sampled = bool(_inside(px, py, *b).any())
        assert sampled == (depth > 0)
        checked += 1
    assert checked > 900


def test_observe_lone_ego_and_tiebreak():
    w = _world(_ego(), _target(x=5000.0))
    obs = observe(w, w.ego)
    assert obs.shape == (OBS_DIM,)
    for slot in range(1, 4):
        assert tuple(obs[5 + 3 * slot:8 + 3 * slot]) == SENTINEL
    vs = [_ego(x=0.0, y=5.25), VehicleState(x=10.0, y=5.25, v=20, role="background", vid=3),
          VehicleState(x=-10.0, y=5.25, v=20, role="background", vid=2), _target(x=100.0)]
    obs = observe(_world(*vs))
    assert obs[5] == pytest.approx(-10.0 / 50.0)
    assert obs[8] == pytest.approx(10.0 / 50.0)


@given(st.floats(-100, 500), st.floats(0, 10.5), st.floats(0, 40), st.floats(-5, 5), st.floats(-0.5, 0.5),
       st.floats(1, 80), st.floats(-7, 7))
def test_observe_denormalize_roundtrip(x, y, v, a, psi, dx, dy):
    e = _ego(x=x, y=y, v=v, a=a, psi=psi)
    t = _target(x=x + dx, y=y + dy, v=v + 1.0)
    ego, nb = denormalize(observe(_world(e, t)))
    for f in ("x", "y", "v", "a", "psi"):
        assert ego[f] == pytest.approx(getattr(e, f), abs=1e-9)
    assert nb[0] == pytest.approx((t.x - e.x, t.y - e.y, 1.0), abs=1e-9)
    assert nb[1:] == [None, None, None]


def _scenario(**kw):
    return closing_scenario(**kw)


def test_no_trigger_runs_to_timeout():
    sc = closing_scenario(gap=30.0, dv=-2.0)
    log = run_episode(sc.to_world(), LaneKeepPolicy(), None, np.random.default_rng(0))
    assert log.trigger_step is None and log.terminal == "timeout"
    assert len(log) == round(10.0 / 0.05)
    assert not any(r["triggered"] for r in log.records)


@pytest.mark.parametrize("gap,dv,lateral", [(61.3, 8.0, 0.0), (45.0, 5.2, 0.0), (80.0, 12.5, 3.5), (52.1, 9.0, 3.5)])
def test_trigger_matches_analytic(gap, dv, lateral):
    sc = closing_scenario(gap=gap, dv=dv, lateral=lateral)
    log = run_episode(sc.to_world(), LaneKeepPolicy(), None, np.random.default_rng(0))
    assert log.trigger_step == analytic_trigger_step(gap, dv, 0.05, lateral=lateral)
    pre = [r for r in log.records if r["step"] < log.trigger_step]
    assert all(r["ttc"] >= 2.5 for r in pre)
    assert not any(r["triggered"] for r in pre)


def test_collision_terminates_episode():
    sc = closing_scenario(gap=8.0, dv=10.0)
    log = run_episode(sc.to_world(), LaneKeepPolicy(), None, np.random.default_rng(0))
    assert log.terminal == "collision"
    assert len(log) == log.collision["step"]


def test_episode_write_load_roundtrip(tmp_path):
    sc = standard_scenarios(1, 4)[0]
    log = run_episode(sc.to_world(), LaneKeepPolicy(), None, np.random.default_rng(0))
    log.write(str(tmp_path / "ep"))
    back = load_episode(str(tmp_path / "ep"))
    assert back.summary() == log.summary()
    assert len(back) == len(log)
    np.testing.assert_array_equal(back.ego_ttc(), log.ego_ttc())


def test_scenario_config_strict():
    with pytest.raises(Exception):
        ScenarioConfig(vehicles=[], bogus=1)
    with pytest.raises(Exception):
        VehicleSpec(role="ego", x=0, y=0, v=-1)
    scs = standard_scenarios(5, 9)
    assert [s.model_dump() for s in scs] == [s.model_dump() for s in standard_scenarios(5, 9)]
    assert scs[0].max_steps == 200


def test_empty_log_summary():
    assert EpisodeLog(dt=0.05).summary()["min_ttc"] is None


def test_numba_and_python_bicycle_agree():
    rng = np.random.default_rng(1)
    s = rng.uniform(0, 20, size=(6, 4))
    a, d = rng.uniform(-3, 3, 6), rng.uniform(-0.3, 0.3, 6)
    np.testing.assert_array_equal(bicycle_step(s, a, d, 0.05, WHEELBASE),
                                  bicycle_step.py_func(s, a, d, 0.05, WHEELBASE))
    args = (0.0, 0.1, 0.2, 4.5, 1.8, 1.0, 0.5, -0.4, 4.0, 2.0)
    assert rect_overlap_depth(*args) == rect_overlap_depth.py_func(*args)
