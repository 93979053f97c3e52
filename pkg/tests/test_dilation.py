import math

import numpy as np
import pytest

import oracles
from tacshear.core import MarkerField, Pose, TactileGrid
from tacshear.dilation import (
    ContactSet,
    dilation_at_pose,
    dilation_field,
    find_contacts,
    indenter_sdf_at_taxels,
    taxel_sdf_batch,
)
from tacshear.geometry import Box, Sphere

R = 0.0175


def test_no_contact_far_above(grid, sphere):
    c = find_contacts(grid, sphere, Pose.from_translation([0, 0, 0.1]))
    assert len(c) == 0
    assert dilation_field(grid, c, 1e4) == MarkerField.zeros(grid)


def test_center_at_plane_includes_disc(grid, sphere):
    c = find_contacts(grid, sphere, Pose.from_translation([0.001, -0.002, 0.0]))
    xy = grid.xy()
    expect = np.flatnonzero(np.hypot(xy[:, 0] - 0.001, xy[:, 1] + 0.002) < R)
    np.testing.assert_array_equal(c.indices, expect)
    assert np.all(c.penetrations > 0)


def test_surface_point_is_excluded():
    g = TactileGrid(1, 1, (0.0, 0.0), (1e-3, 1e-3))
    # a box face exactly on the taxel
    c = find_contacts(g, Box((0.01, 0.01, 0.01)), Pose.from_translation([0, 0, 0.01]))
    assert indenter_sdf_at_taxels(g, Box((0.01, 0.01, 0.01)), Pose.from_translation([0, 0, 0.01]))[0] == 0.0
    assert len(c) == 0


def test_sdf_at_taxels_matches_pose_inverse(grid, sphere, rng):
    for _ in range(5):
        pose = Pose(rng.normal(size=4), rng.normal(size=3) * 0.01)
        ref = sphere.eval(pose.inverse().apply(grid.points()))
        np.testing.assert_allclose(indenter_sdf_at_taxels(grid, sphere, pose), ref, atol=1e-15)


def test_batched_sdf_is_lane_independent(grid, sphere, rng):
    q = rng.normal(size=(16, 4))
    q /= np.linalg.norm(q, axis=1, keepdims=True)
    t = rng.normal(size=(16, 3)) * 0.01
    full = taxel_sdf_batch(grid, sphere, q, t)
    for b in (0, 7, 15):
        np.testing.assert_array_equal(full[b], taxel_sdf_batch(grid, sphere, q[b:b + 1], t[b:b + 1])[0])


def test_centered_press_symmetry():
    g = TactileGrid.centered(7, 7)
    f = dilation_at_pose(g, Sphere(R), Pose.from_translation([0, 0, R - 1e-3]), 2e4)
    np.testing.assert_allclose(f.vectors[3, 3], 0, atol=1e-20)
    np.testing.assert_allclose(f.flat().sum(axis=0), 0, atol=1e-18)
    assert f.norm() > 0


def test_single_contact_closed_form(grid):
    k = grid.size // 2
    c = ContactSet(np.array([k]), np.array([1e-3]))
    lam = 3e4
    f = dilation_field(grid, c, lam).flat()
    xy = grid.xy()
    v = xy - xy[k]
    ref = 1e-3 * v * np.exp(-lam * np.sum(v * v, axis=1))[:, None]
    np.testing.assert_allclose(f, ref, rtol=1e-12, atol=1e-22)


def test_matches_scalar_oracle(grid, sphere, rng):
    for _ in range(5):
        pose = Pose.from_axis_angle([0, 0, 1], rng.uniform(-1, 1), [*rng.uniform(-0.01, 0.01, 2), R - 1.5e-3])
        c = find_contacts(grid, sphere, pose)
        xy = grid.xy()
        contacts = [(xy[i, 0], xy[i, 1], p) for i, p in zip(c.indices, c.penetrations)]
        ref = oracles.dilation([tuple(v) for v in xy], contacts, 2.5e4)
        np.testing.assert_allclose(dilation_field(grid, c, 2.5e4).flat(), ref, rtol=1e-12, atol=1e-20)


def test_linearity_and_order_independence(grid, rng):
    idx = rng.choice(grid.size, 12, replace=False)
    pen = rng.uniform(1e-4, 2e-3, 12)
    base = dilation_field(grid, ContactSet(idx, pen), 2e4).flat()
    np.testing.assert_allclose(dilation_field(grid, ContactSet(idx, 2.5 * pen), 2e4).flat(), 2.5 * base, rtol=1e-12)
    perm = rng.permutation(12)
    np.testing.assert_allclose(dilation_field(grid, ContactSet(idx[perm], pen[perm]), 2e4).flat(), base,
                               rtol=1e-12, atol=1e-22)


def test_gaussian_falloff_monotone():
    g = TactileGrid(1, 40, (0.0, 0.0), (5e-4, 5e-4))
    f = dilation_field(g, ContactSet(np.array([0]), np.array([1e-3])), 1e3)
    mag = f.magnitudes()[0, 1:]
    d = np.arange(1, 40) * 5e-4
    # |v| exp(-lam |v|^2) decreases once past its peak at 1/sqrt(2 lam)
    past = d > 1 / math.sqrt(2e3)
    assert np.all(np.diff(mag[past]) < 0)


def test_centroid(grid):
    c = ContactSet(np.array([0, 1]), np.array([1.0, 3.0]))
    xy = grid.xy()
    np.testing.assert_allclose(c.centroid(grid), (xy[0] + 3 * xy[1]) / 4)
    assert ContactSet(np.array([], int), np.array([])).centroid(grid) is None
