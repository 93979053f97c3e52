"""Instantaneous dilation field from taxels that sit inside the indenter."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from . import _kernels
from .core import MarkerField, Pose, TactileGrid, quat_matrices as _quat_mats
from .geometry import SdfField


@dataclass(frozen=True, eq=False)
class ContactSet:
    """Taxel indices with negative indenter SDF and their penetration depths."""

    indices: np.ndarray
    penetrations: np.ndarray

    def __len__(self):
        return len(self.indices)

    def centroid(self, grid: TactileGrid) -> np.ndarray | None:
        """Penetration-weighted mean taxel position, or None when empty."""
        if len(self) == 0:
            return None
        xy = grid.xy()[self.indices]
        w = self.penetrations
        return (w[:, None] * xy).sum(axis=0) / w.sum()


def taxels_in_indenter_frame(points: np.ndarray, quats: np.ndarray, trans: np.ndarray) -> np.ndarray:
    """(B, N, 3) taxel positions expressed in each environment's indenter frame.

    Written out elementwise (no matrix products) so every environment's
    result is the same bits regardless of how many environments are stacked.
    """
    R = _quat_mats(np.asarray(quats, dtype=np.float64).reshape(-1, 4))
    d = points[None, :, :] - np.asarray(trans, dtype=np.float64).reshape(-1, 1, 3)
    out = np.empty_like(d)
    for i in range(3):
        out[..., i] = (d[..., 0] * R[:, None, 0, i] + d[..., 1] * R[:, None, 1, i]) + d[..., 2] * R[:, None, 2, i]
    return out


def taxel_sdf_batch(grid: TactileGrid, indenter: SdfField, quats: np.ndarray, trans: np.ndarray) -> np.ndarray:
    """(B, N) indenter SDF at the taxels for B indenter poses."""
    local = taxels_in_indenter_frame(grid.points(), quats, trans)
    B, N = local.shape[:2]
    return np.asarray(indenter.eval(local.reshape(B * N, 3)), dtype=np.float64).reshape(B, N)


def penetration_weights(phi: np.ndarray) -> np.ndarray:
    """Penetration depth where the SDF is strictly negative, zero elsewhere."""
    return np.where(phi < 0, -phi, 0.0)


def indenter_sdf_at_taxels(grid: TactileGrid, indenter: SdfField, pose: Pose) -> np.ndarray:
    """Indenter SDF at every taxel, with the indenter placed by ``pose`` (elastomer <- indenter)."""
    return taxel_sdf_batch(grid, indenter, pose.quat[None], pose.translation[None])[0]


def find_contacts(grid: TactileGrid, indenter: SdfField, pose: Pose) -> ContactSet:
    phi = indenter_sdf_at_taxels(grid, indenter, pose)
    idx = np.flatnonzero(phi < 0)
    return ContactSet(idx, -phi[idx])


def dilation_vectors(qxy: np.ndarray, weights: np.ndarray, centers: np.ndarray, lam: float) -> np.ndarray:
    """Batched ``sum_c w_c (q - c) exp(-lam |q - c|^2)``.

    ``weights`` is (B, C) with zeros for unused slots, ``centers`` (B, C, 2).
    Returns (B, N, 2).
    """
    B = weights.shape[0]
    out = np.zeros((B, len(qxy), 2))
    cx = np.ascontiguousarray(centers[..., 0])
    cy = np.ascontiguousarray(centers[..., 1])
    _kernels.gauss_sum(np.ascontiguousarray(qxy, dtype=np.float64), np.ascontiguousarray(weights, dtype=np.float64),
                       cx, cy, cx, cy, _kernels.MODE_RADIAL, float(lam), out)
    return out


def dilation_field(grid: TactileGrid, contacts: ContactSet, lambda_d: float) -> MarkerField:
    """Dilation displacement (meters) at every taxel for one contact set."""
    if len(contacts) == 0:
        return MarkerField.zeros(grid)
    xy = grid.xy()
    w = np.zeros((1, grid.size))
    w[0, contacts.indices] = contacts.penetrations
    centers = xy[None].copy()
    v = dilation_vectors(xy, w, centers, lambda_d)
    return MarkerField(grid, v[0].reshape(grid.rows, grid.cols, 2))


def dilation_at_pose(grid: TactileGrid, indenter: SdfField, pose: Pose, lambda_d: float) -> MarkerField:
    return dilation_field(grid, find_contacts(grid, indenter, pose), lambda_d)
