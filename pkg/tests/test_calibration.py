import math
import warnings

import numpy as np
import pytest

import oracles
from tacshear.calibration import (
    FRICTIONLESS_MU,
    CalibrationError,
    CalibrationSample,
    CalibrationSetup,
    DegenerateObjective,
    calibrate,
    calibrate_K,
    calibrate_fots,
    calibrate_lambda_d,
    calibrate_lambda_s,
    calibrate_mu,
    calibrate_penalty,
    cosine_similarity,
    golden_section,
    grid_search,
    make_synthetic_dataset,
    motion_trajectory,
    press_trajectory,
    read_dataset,
    rescale_factor,
    rmse,
    synthetic_trajectories,
    write_dataset,
)
from tacshear.core import HydroParams, MarkerField, PIXEL_SCALE, TactileGrid
from tacshear.geometry import sample_surface
from tacshear.io import DataError, Trajectory

R = 0.0175
TRUTH = HydroParams(3e4, 2e4, 2e6, 0.5)


@pytest.fixture(scope="module")
def setup(sphere, grid):
    return CalibrationSetup(sphere, sample_surface(sphere, 512, seed=5), grid)


@pytest.fixture(scope="module")
def dataset(setup):
    return make_synthetic_dataset(setup, TRUTH, R, seed=2, n_dilation=4, n_shear=4, n_twist=2, n_slip=3)


def rand_field(grid, rng, scale=1.0):
    return MarkerField(grid, rng.normal(0, scale, (grid.rows, grid.cols, 2)), "px")


# --- metrics -------------------------------------------------------------------


def test_rmse_examples(grid, rng):
    a = rand_field(grid, rng)
    assert rmse(a, a) == 0.0
    z = MarkerField.zeros(grid, "px")
    u = MarkerField(grid, np.broadcast_to([3.0, 4.0], (grid.rows, grid.cols, 2)).copy(), "px")
    assert rmse(u, z) == 5.0
    with pytest.raises(ValueError):
        rmse(a, MarkerField.zeros(TactileGrid.centered(3, 3), "px"))


def test_rmse_converts_units(grid, rng):
    a = rand_field(grid, rng)
    b = rand_field(grid, rng)
    assert rmse(a.to_meters(), b) == pytest.approx(rmse(a, b), rel=1e-12)


def test_metrics_match_scalar_oracle(grid, rng):
    for _ in range(100):
        a = rand_field(grid, rng, rng.uniform(0.1, 3))
        b = rand_field(grid, rng, rng.uniform(0.1, 3))
        la = [tuple(v) for v in a.flat()]
        lb = [tuple(v) for v in b.flat()]
        assert abs(rmse(a, b) - oracles.rmse(la, lb)) <= 1e-12
        c = cosine_similarity(a, b, 0.3)
        ref = oracles.cosine(la, lb, 0.3)
        if ref is None:
            assert not c.defined
        else:
            assert abs(c.value - ref) <= 1e-12


def test_cosine_trivial_cases(grid, rng):
    a = rand_field(grid, rng) + MarkerField(grid, np.full((grid.rows, grid.cols, 2), 2.0), "px")
    assert float(cosine_similarity(a, a)) == 1.0
    assert float(cosine_similarity(a, MarkerField(grid, -a.vectors, "px"))) == -1.0
    ux = MarkerField(grid, np.broadcast_to([1.0, 0.0], (grid.rows, grid.cols, 2)).copy(), "px")
    uy = MarkerField(grid, np.broadcast_to([0.0, 1.0], (grid.rows, grid.cols, 2)).copy(), "px")
    assert float(cosine_similarity(ux, uy)) == 0.0
    c = cosine_similarity(MarkerField.zeros(grid, "px"), ux)
    assert not c.defined and c.count == 0 and math.isnan(c.value)


# --- solver ----------------------------------------------------------------------


@pytest.mark.parametrize("x0", [3.0, 47.0, 2.2e3, 9.9e5])
def test_golden_section_beats_grid_oracle(x0):
    f = lambda x: (math.log(x) - math.log(x0)) ** 2 + 0.1 * abs(math.sin(5 * math.log(x)))
    res = golden_section(f, 1.0, 1e6)
    _, gv = grid_search(f, 1.0, 1e6, 200)
    assert res.residual <= gv * 1.005 + 1e-15
    assert res.residual <= min(res.endpoint_residuals)
    assert all(b <= a for a, b in zip(res.history, res.history[1:]))


def test_golden_section_flat_and_bounds():
    res = golden_section(lambda x: 7.0, 10.0, 1000.0)
    assert res.flags == ("flat",) and res.value == pytest.approx(100.0)
    assert "at_lower_bound" in golden_section(lambda x: x, 10.0, 1000.0).flags
    assert "at_upper_bound" in golden_section(lambda x: -x, 10.0, 1000.0).flags
    with pytest.raises(CalibrationError):
        golden_section(lambda x: math.nan, 1.0, 2.0)
    with pytest.raises(ValueError):
        golden_section(lambda x: x, 2.0, 1.0)


# --- stages ------------------------------------------------------------------------


def test_rescale_identity(rng):
    v = rng.normal(size=(20, 2))
    mask = np.ones(20, bool)
    assert rescale_factor(v, v, mask) == 1.0
    assert rescale_factor(2 * v, v, mask) == pytest.approx(2.0, rel=1e-14)
    with pytest.raises(DegenerateObjective):
        rescale_factor(v, np.zeros_like(v), mask)


def test_lambda_d_recovery_and_zero_residual(setup, dataset):
    dil = [s for s in dataset if s.kind == "dilation"]
    res = calibrate_lambda_d(setup, dil)
    assert res.value == pytest.approx(TRUTH.lambda_d, rel=1e-2)
    assert res.residual <= 1e-12 * sum(float(np.sum(s.observed.vectors ** 2)) for s in dil)
    assert res.residual <= min(res.endpoint_residuals)


def test_lambda_d_flat_without_contact(setup, grid):
    tr = Trajectory(np.array([0.0, 0.1]), [p for _, p in press_trajectory((0, 0), -2e-3, R, steps=1)])
    s = CalibrationSample(tr, MarkerField.zeros(grid, "px"), "dilation")
    res = calibrate_lambda_d(setup, [s])
    assert "flat" in res.flags
    assert res.value == pytest.approx(math.sqrt(1e2 * 1e7), rel=1e-9)


def test_empty_stage_is_an_error(setup):
    with pytest.raises(CalibrationError):
        calibrate_lambda_d(setup, [])
    with pytest.raises(CalibrationError):
        calibrate(setup, [])


def test_large_mu_never_clips(setup, dataset):
    shear = [s for s in dataset if s.kind in ("shear", "twist", "roll")]
    _, clips = setup.shear_state(shear, 1.0, 1.0, FRICTIONLESS_MU, FRICTIONLESS_MU)
    assert not clips.any()
    res = calibrate_lambda_s(setup, shear, TRUTH.lambda_d)
    assert "clip_active" not in res.flags
    assert res.value == pytest.approx(TRUTH.lambda_s, rel=1e-2)


def test_K_doubles_with_shear_magnitude(setup, dataset):
    shear = [s for s in dataset if s.kind in ("shear", "twist")]
    K1 = calibrate_K(setup, shear, TRUTH.lambda_d, TRUTH.lambda_s)
    dil = setup.dilation(shear, TRUTH.lambda_d) * PIXEL_SCALE
    doubled = []
    for s, d in zip(shear, dil):
        d = d.reshape(s.observed.vectors.shape)
        v = d + 2.0 * (s.observed.vectors - d)
        doubled.append(CalibrationSample(s.trajectory, MarkerField(s.observed.grid, v, "px"), s.kind))
    K2 = calibrate_K(setup, doubled, TRUTH.lambda_d, TRUTH.lambda_s)
    assert K2.value == pytest.approx(2 * K1.value, rel=1e-3)


def test_K_zero_observation_hits_lower_bound(setup, dataset):
    shear = [s for s in dataset if s.kind == "shear"]
    dil = setup.dilation(shear, TRUTH.lambda_d) * PIXEL_SCALE
    zeroed = [CalibrationSample(s.trajectory, MarkerField(s.observed.grid, d.reshape(s.observed.vectors.shape), "px"),
                                s.kind) for s, d in zip(shear, dil)]
    res = calibrate_K(setup, zeroed, TRUTH.lambda_d, TRUTH.lambda_s)
    assert "at_lower_bound" in res.flags


def test_mu_flags(setup, dataset):
    shear = [s for s in dataset if s.kind == "shear"]
    with pytest.warns(UserWarning):
        res = calibrate_mu(setup, shear, TRUTH.lambda_d, TRUTH.lambda_s, TRUTH.K)
    assert "unidentifiable" in res.flags
    # every candidate above the largest ratio any point needs gives the same field
    slip = [s for s in dataset if s.kind == "slip"]
    setup2 = CalibrationSetup(setup.indenter, setup.surface, setup.grid,
                              brackets={**setup.brackets, "mu": (1e3, 1e4)})
    with warnings.catch_warnings():
        warnings.simplefilter("error")
        res = calibrate_mu(setup2, slip, TRUTH.lambda_d, TRUTH.lambda_s, TRUTH.K)
    assert "flat" in res.flags


def test_full_recovery_small(setup, dataset):
    res = calibrate(setup, dataset)
    p = res.params
    assert p.lambda_d == pytest.approx(TRUTH.lambda_d, rel=1e-2)
    assert p.lambda_s == pytest.approx(TRUTH.lambda_s, rel=1e-2)
    assert p.K == pytest.approx(TRUTH.K, rel=1e-2)
    assert p.mu == pytest.approx(TRUTH.mu, rel=2e-2)
    assert not res.degenerate
    again = calibrate(setup, dataset)
    assert again.params == res.params
    rep = res.report()
    assert set(rep["residuals_px2"]) == {"lambda_d", "lambda_s", "K", "mu"}


def test_refine_2d_never_worse(setup, dataset):
    a = calibrate(setup, dataset)
    b = calibrate(setup, dataset, refine_2d=True)
    assert b.per_stage_residuals["K"] <= a.per_stage_residuals["K"]


# --- comparison models -------------------------------------------------------------------


def test_baseline_fits_run(setup, dataset):
    fots = calibrate_fots(setup, dataset, 1e-3, 0.1)
    assert all(math.isfinite(r.value) for r in fots.values())
    pen = calibrate_penalty(setup, dataset)
    assert all(r.value > 0 for r in pen.values())


# --- synthetic data and files ------------------------------------------------------------


def test_synthetic_trajectories_are_valid():
    trajs, kinds = synthetic_trajectories(R, seed=4)
    assert len(trajs) == len(kinds) == 23
    for tr in trajs:
        assert np.all(np.diff(tr.times) > 0)
    tr = motion_trajectory((0, 0), 1e-3, R, shift=(1e-3, 0))
    np.testing.assert_allclose(tr.poses[-1].translation, [1e-3, 0, R - 1e-3], atol=1e-15)


def test_dataset_round_trip(tmp_path, dataset):
    write_dataset(tmp_path / "ds", dataset)
    back = read_dataset(tmp_path / "ds")
    assert [s.kind for s in back] == [s.kind for s in dataset]
    for a, b in zip(dataset, back):
        np.testing.assert_array_equal(a.observed.vectors, b.observed.vectors)
        np.testing.assert_array_equal(a.trajectory.times, b.trajectory.times)
        assert all(p == q for p, q in zip(a.trajectory.poses, b.trajectory.poses))
    with pytest.raises(DataError):
        read_dataset(tmp_path / "missing")


def test_sample_validation(grid):
    tr = Trajectory(np.array([0.0]), [press_trajectory((0, 0), 1e-3, R)[0][1]])
    with pytest.raises(ValueError):
        CalibrationSample(tr, MarkerField.zeros(grid, "px"), "wobble")
