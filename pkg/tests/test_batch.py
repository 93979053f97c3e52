import numpy as np
import pytest

from tacshear.baselines import FotsParams, PenaltyParams
from tacshear.batch import (
    MODELS,
    BatchSim,
    BenchReport,
    benchmark,
    press_slide_twist,
    scaling_exponent,
    time_steps,
)
from tacshear.core import HydroParams, Pose
from tacshear.tracker import HydroShearModel

R = 0.0175
HP = HydroParams(3e4, 2e4, 2e6, 0.5)
FP = FotsParams(3e4, 1.5e4, 1e4, 1e-3, 0.1)
PP = PenaltyParams(100.0, 2.0, 0.5)


def make(model, n, sphere, grid, surface, **kw):
    return BatchSim(n, model, sphere, grid, surface=surface, params=HP, fots_params=FP, penalty_params=PP, **kw)


@pytest.mark.parametrize("model", MODELS)
def test_lane_equals_single_env_and_order(model, sphere, grid, small_surface):
    B, T = 24, 14
    q, t = press_slide_twist(B, T, R, seed=3)
    big = make(model, B, sphere, grid, small_surface).run(q, t)
    perm = np.random.default_rng(0).permutation(B)
    shuffled = make(model, B, sphere, grid, small_surface).run(q[:, perm], t[:, perm])
    np.testing.assert_array_equal(shuffled, big[:, perm])
    for b in (0, 11, 23):
        one = make(model, 1, sphere, grid, small_surface).run(q[:, b:b + 1], t[:, b:b + 1])
        np.testing.assert_array_equal(one[:, 0], big[:, b])
    assert np.abs(big).max() > 0


def test_identical_lanes_identical_fields(sphere, grid, small_surface):
    q, t = press_slide_twist(1, 10, R, seed=1)
    sim = make("hydroshear", 4, sphere, grid, small_surface)
    out = sim.run(np.repeat(q, 4, axis=1), np.repeat(t, 4, axis=1))
    for b in range(1, 4):
        np.testing.assert_array_equal(out[:, b], out[:, 0])


def test_batch_of_one_matches_sequential_model(sphere, grid, small_surface):
    q, t = press_slide_twist(1, 12, R, seed=2)
    g = Pose.from_translation([0, 0, -5e-4])
    for grav in (None, g):
        sim = make("hydroshear", 1, sphere, grid, small_surface, gravity_xf=grav)
        ref = HydroShearModel(sphere, small_surface, grid, HP, gravity_xf=grav)
        for k in range(len(q)):
            out = sim.batch_step([Pose(q[k, 0], t[k, 0])])[0]
            np.testing.assert_array_equal(out.vectors, ref.step(Pose(q[k, 0], t[k, 0])).vectors)


@pytest.mark.parametrize("model", MODELS)
def test_reset_isolated(model, sphere, grid, small_surface):
    B, T = 3, 12
    q, t = press_slide_twist(B, T, R, seed=5)
    sim = make(model, B, sphere, grid, small_surface)
    ref = make(model, B, sphere, grid, small_surface)
    for k in range(8):
        sim.step((q[k], t[k]))
        ref.step((q[k], t[k]))
    sim.reset([1])
    fresh = make(model, 1, sphere, grid, small_surface)
    for k in range(8, T):
        a = sim.step((q[k], t[k]))
        b = ref.step((q[k], t[k]))
        np.testing.assert_array_equal(a[[0, 2]], b[[0, 2]])
        np.testing.assert_array_equal(a[1], fresh.step((q[k, 1:2], t[k, 1:2]))[0])


def test_pose_count_mismatch(sphere, grid, small_surface):
    sim = make("fots_reimpl", 3, sphere, grid, small_surface)
    with pytest.raises(ValueError):
        sim.step([Pose.identity()] * 2)
    with pytest.raises(ValueError):
        sim.step((np.zeros((2, 4)), np.zeros((2, 3))))
    with pytest.raises(ValueError):
        BatchSim(1, "bogus", sphere, grid)
    with pytest.raises(ValueError):
        BatchSim(1, "hydroshear", sphere, grid)


def test_field_shape_and_units(sphere, grid, small_surface):
    sim = make("hydroshear", 2, sphere, grid, small_surface)
    q, t = press_slide_twist(2, 6, R)
    out = sim.step((q[0], t[0]))
    assert out.shape == (2, grid.rows, grid.cols, 2)
    fields = sim.batch_step([Pose(q[1, b], t[1, b]) for b in range(2)])
    assert all(f.unit == "m" for f in fields)


def test_scaling_exponent_fit():
    n = np.array([256, 512, 1024])
    assert scaling_exponent(n, 3.0 * n**0.8) == pytest.approx(0.8, abs=1e-12)
    assert np.isnan(scaling_exponent([1], [1.0]))


def test_single_env_no_contact_benchmark(sphere, grid, small_surface):
    sim = make("hydroshear", 1, sphere, grid, small_surface)
    q = np.tile([1.0, 0, 0, 0], (8, 1, 1))
    t = np.tile([0, 0, 0.05], (8, 1, 1))
    ms = time_steps(sim, q, t, warmup=2)
    assert len(ms) == 6 and all(0 < m < 1e3 for m in ms)


def test_benchmark_report(sphere, grid, small_surface, tmp_path):
    rep = benchmark(lambda m, n: make(m, n, sphere, grid, small_surface), env_counts=(4, 8), steps=5, warmup=2,
                    models=["fots_reimpl", "penalty"])
    assert isinstance(rep, BenchReport)
    assert {r.model for r in rep.records} == {"fots_reimpl", "penalty"}
    assert set(rep.beta) == {"fots_reimpl", "penalty"}
    assert "scaling exponent" in rep.table()
    rep.write(tmp_path / "bench.json")
    assert (tmp_path / "bench.json").read_text().startswith("{")


def test_doubling_steps_doubles_time(sphere, grid, surface):
    import time

    def total(steps):
        sim = make("hydroshear", 64, sphere, grid, surface)
        q, t = press_slide_twist(64, steps, R, seed=0)
        # keep the workload per step comparable: all steps in contact after the first few
        q, t = q[-steps:], t[-steps:]
        sim.step((q[0], t[0]))
        t0 = time.perf_counter()
        for k in range(1, steps):
            sim.step((q[k], t[k]))
        return time.perf_counter() - t0

    total(4)
    ratios = []
    for _ in range(3):
        a = total(21)
        b = total(41)
        ratios.append(b / a)
    assert 1.6 <= float(np.median(ratios)) <= 2.4
