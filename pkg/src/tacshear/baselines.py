"""Comparison models: the SE(2) marker-motion model (two centering variants) and a penalty field.

The SE(2) model adds three Gaussian-attenuated terms to the rest marker
positions: a dilation term from the penetration height map, a clamped
translation term and a clamped twist term, both centered on a reference
point ``G``. In ``object_frame`` mode ``G`` is the indenter origin projected
onto the sensor plane; in ``initial_contact_patch`` mode it is the
penetration-weighted centroid of the first non-empty contact set and stays
fixed while contact persists.

Translation and twist are accumulated from the pose at first contact.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, replace

import numpy as np

from . import _kernels
from .core import MarkerField, Pose, TactileGrid
from .dilation import ContactSet, dilation_vectors, find_contacts, penetration_weights, taxel_sdf_batch
from .geometry import SdfField

OBJECT_FRAME = "object_frame"
CONTACT_PATCH = "initial_contact_patch"


class FotsStateError(RuntimeError):
    pass


@dataclass(frozen=True)
class FotsParams:
    lambda_d: float
    lambda_s: float
    lambda_t: float
    shear_max: float
    twist_max: float

    def __post_init__(self):
        for k in ("lambda_d", "lambda_s", "lambda_t", "shear_max", "twist_max"):
            if not getattr(self, k) > 0:
                raise ValueError(f"{k} must be positive")


@dataclass(frozen=True, eq=False)
class FotsState:
    center_mode: str
    base_markers: np.ndarray
    reference_center: np.ndarray | None = None
    contact_pose: Pose | None = None

    def __post_init__(self):
        if self.center_mode not in (OBJECT_FRAME, CONTACT_PATCH):
            raise ValueError(f"unknown center mode {self.center_mode!r}")

    @classmethod
    def initial(cls, grid: TactileGrid, center_mode: str = CONTACT_PATCH) -> FotsState:
        return cls(center_mode, grid.xy())


def clamp_vector(v: np.ndarray, vmax: float) -> np.ndarray:
    """Scale ``v`` down to length ``vmax`` when it is longer."""
    n = math.hypot(v[0], v[1])
    return v * (vmax / n) if n > vmax else np.asarray(v, dtype=np.float64)


def clamp_angle(theta: float, tmax: float) -> float:
    return math.copysign(min(abs(theta), tmax), theta)


def _single_term(markers0, center, vec, lam, mode) -> np.ndarray:
    w = np.ones((1, 1))
    out = np.zeros((1, len(markers0), 2))
    _kernels.gauss_sum(np.ascontiguousarray(markers0, dtype=np.float64), w,
                       np.array([[vec[0]]], dtype=np.float64), np.array([[vec[1]]], dtype=np.float64),
                       np.array([[center[0]]], dtype=np.float64), np.array([[center[1]]], dtype=np.float64),
                       mode, float(lam), out)
    return out[0]


def fots_dilate(contacts: ContactSet, markers0: np.ndarray, lambda_d: float) -> np.ndarray:
    """(N, 2) dilation displacement: sum_i dh_i (M0 - C_i) exp(-lambda_d |M0 - C_i|^2)."""
    if len(contacts) == 0:
        return np.zeros((len(markers0), 2))
    w = np.zeros((1, len(markers0)))
    w[0, contacts.indices] = contacts.penetrations
    return dilation_vectors(markers0, w, np.asarray(markers0)[None], lambda_d)[0]


def _center(state: FotsState):
    if state.reference_center is None:
        raise FotsStateError("reference center is unset while in contact")
    return state.reference_center


def fots_shear(delta_s, state: FotsState, markers0: np.ndarray, lambda_s: float, shear_max: float) -> np.ndarray:
    ds = clamp_vector(np.asarray(delta_s, dtype=np.float64), shear_max)
    if not ds.any():
        return np.zeros((len(markers0), 2))
    return _single_term(markers0, _center(state), ds, lambda_s, _kernels.MODE_VECTOR)


def fots_twist(delta_theta: float, state: FotsState, markers0: np.ndarray, lambda_t: float, twist_max: float) -> np.ndarray:
    """Clamped twist times the radial vector turned 90 degrees, so the field circulates about G."""
    th = clamp_angle(float(delta_theta), twist_max)
    if th == 0.0:
        return np.zeros((len(markers0), 2))
    out = np.zeros((1, len(markers0), 2))
    c = _center(state)
    _kernels.gauss_sum(np.ascontiguousarray(markers0, dtype=np.float64), np.array([[th]]), np.zeros((1, 1)),
                       np.zeros((1, 1)), np.array([[c[0]]]), np.array([[c[1]]]), _kernels.MODE_SWIRL,
                       float(lambda_t), out)
    return out[0]


def planar_motion(start: Pose, now: Pose) -> tuple[np.ndarray, float]:
    """In-plane translation and z-rotation of ``now`` relative to ``start``."""
    ds = now.translation[:2] - start.translation[:2]
    R = now.rotation @ start.rotation.T
    return ds, math.atan2(R[1, 0], R[0, 0])


def fots_update_state(state: FotsState, pose: Pose, contacts: ContactSet, grid: TactileGrid) -> FotsState:
    """Track first-contact pose and reference center across a step."""
    if len(contacts) == 0:
        return replace(state, reference_center=None, contact_pose=None)
    if state.contact_pose is not None:
        if state.center_mode == OBJECT_FRAME:
            return replace(state, reference_center=pose.translation[:2].copy())
        return state
    center = pose.translation[:2].copy() if state.center_mode == OBJECT_FRAME else contacts.centroid(grid)
    return replace(state, reference_center=center, contact_pose=pose)


def fots_compose(params: FotsParams, state: FotsState, delta_s, delta_theta: float, contacts: ContactSet) -> np.ndarray:
    """(N, 2) displacement M1 - M0 for given accumulated motion and contacts."""
    M0 = state.base_markers
    d = fots_dilate(contacts, M0, params.lambda_d)
    if len(contacts) == 0:
        return d
    return (d + fots_shear(delta_s, state, M0, params.lambda_s, params.shear_max)
            + fots_twist(delta_theta, state, M0, params.lambda_t, params.twist_max))


def _fots_arrays(state: FotsState):
    has = np.array([state.contact_pose is not None])
    cq = np.array([[1.0, 0.0, 0.0, 0.0]])
    ct = np.zeros((1, 3))
    ref = np.zeros((1, 2))
    if state.contact_pose is not None:
        cq[0] = state.contact_pose.quat
        ct[0] = state.contact_pose.translation
    if state.reference_center is not None:
        ref[0] = state.reference_center
    return has, cq, ct, ref


def fots_step(params: FotsParams, state: FotsState, pose: Pose, contacts: ContactSet,
              grid: TactileGrid) -> tuple[MarkerField, FotsState]:
    """Advance one step; returns the marker displacement field M1 - M0 and the new state.

    Runs the same compiled per-environment routine as :class:`FotsBatch`, so a
    sequence of calls reproduces a batched lane bit for bit.
    """
    w = np.zeros((1, grid.size))
    w[0, contacts.indices] = contacts.penetrations
    has, cq, ct, ref = _fots_arrays(state)
    out = np.zeros((1, grid.size, 2))
    _kernels.fots_batch(np.ascontiguousarray(state.base_markers, dtype=np.float64), w, pose.quat[None].copy(),
                        pose.translation[None].copy(), np.ones(1, bool), state.center_mode == CONTACT_PATCH,
                        params.lambda_d, params.lambda_s, params.lambda_t, params.shear_max, params.twist_max,
                        has, cq, ct, ref, out)
    if has[0]:
        new = replace(state, reference_center=ref[0].copy(), contact_pose=Pose(cq[0], ct[0]))
    else:
        new = replace(state, reference_center=None, contact_pose=None)
    return MarkerField(grid, out[0].reshape(grid.rows, grid.cols, 2)), new


def fots_reference_step(params: FotsParams, state: FotsState, pose: Pose, contacts: ContactSet,
                        grid: TactileGrid) -> tuple[MarkerField, FotsState]:
    """Same step assembled from the separate dilation, shear and twist terms."""
    state = fots_update_state(state, pose, contacts, grid)
    if state.contact_pose is None:
        ds, dth = np.zeros(2), 0.0
    else:
        ds, dth = planar_motion(state.contact_pose, pose)
    v = fots_compose(params, state, ds, dth, contacts)
    return MarkerField(grid, v.reshape(grid.rows, grid.cols, 2)), state


class FotsModel:
    """Single-environment SE(2) marker model."""

    def __init__(self, indenter: SdfField, grid: TactileGrid, params: FotsParams, center_mode: str = CONTACT_PATCH):
        self.indenter = indenter
        self.grid = grid
        self.params = params
        self.center_mode = center_mode
        self.state = FotsState.initial(grid, center_mode)

    def reset(self):
        self.state = FotsState.initial(self.grid, self.center_mode)

    def step(self, pose: Pose) -> MarkerField:
        contacts = find_contacts(self.grid, self.indenter, pose)
        f, self.state = fots_step(self.params, self.state, pose, contacts, self.grid)
        return f

    def run(self, poses) -> list[MarkerField]:
        return [self.step(p) for p in poses]


class FotsBatch:
    """SE(2) marker model for ``env_count`` independent environments, stored as flat arrays."""

    def __init__(self, env_count: int, indenter: SdfField, grid: TactileGrid, params: FotsParams,
                 center_mode: str = CONTACT_PATCH):
        if center_mode not in (OBJECT_FRAME, CONTACT_PATCH):
            raise ValueError(f"unknown center mode {center_mode!r}")
        self.env_count = int(env_count)
        self.indenter = indenter
        self.grid = grid
        self.params = params
        self.center_mode = center_mode
        self._qxy = np.ascontiguousarray(grid.xy(), dtype=np.float64)
        B = self.env_count
        self.has_contact = np.zeros(B, bool)
        self.contact_quat = np.tile([1.0, 0.0, 0.0, 0.0], (B, 1))
        self.contact_trans = np.zeros((B, 3))
        self.reference = np.zeros((B, 2))

    def reset(self, envs=None) -> None:
        sel = slice(None) if envs is None else np.atleast_1d(np.asarray(envs))
        self.has_contact[sel] = False
        self.contact_quat[sel] = [1.0, 0.0, 0.0, 0.0]
        self.contact_trans[sel] = 0.0
        self.reference[sel] = 0.0

    def step(self, quats: np.ndarray, trans: np.ndarray, active=None) -> np.ndarray:
        """Advance all active environments; returns (B, N, 2) displacements in meters."""
        q = np.ascontiguousarray(quats, dtype=np.float64).reshape(self.env_count, 4)
        t = np.ascontiguousarray(trans, dtype=np.float64).reshape(self.env_count, 3)
        act = np.ones(self.env_count, bool) if active is None else np.asarray(active, bool)
        w = penetration_weights(taxel_sdf_batch(self.grid, self.indenter, q, t))
        out = np.zeros((self.env_count, self.grid.size, 2))
        p = self.params
        _kernels.fots_batch(self._qxy, w, q, t, act, self.center_mode == CONTACT_PATCH, p.lambda_d, p.lambda_s,
                            p.lambda_t, p.shear_max, p.twist_max, self.has_contact, self.contact_quat,
                            self.contact_trans, self.reference, out)
        return out


# --- penalty comparator -----------------------------------------------------------


@dataclass(frozen=True)
class PenaltyParams:
    k_n: float
    k_t: float
    mu: float

    def __post_init__(self):
        for k in ("k_n", "k_t", "mu"):
            if not getattr(self, k) > 0:
                raise ValueError(f"{k} must be positive")


def penalty_batch(grid: TactileGrid, indenter: SdfField, quats: np.ndarray, trans: np.ndarray, velocities: np.ndarray,
                  gains: PenaltyParams) -> np.ndarray:
    """(B, N, 2) penalty field for B indenter poses and spatial twists, computed elementwise."""
    q = np.asarray(quats, dtype=np.float64).reshape(-1, 4)
    t = np.asarray(trans, dtype=np.float64).reshape(-1, 3)
    v = np.asarray(velocities, dtype=np.float64).reshape(-1, 6)
    pen = penetration_weights(taxel_sdf_batch(grid, indenter, q, t))
    r = grid.points()[None] - t[:, None, :]
    wx, wy, wz = (v[:, None, k] for k in (3, 4, 5))
    vx = v[:, None, 0] + (wy * r[..., 2] - wz * r[..., 1])
    vy = v[:, None, 1] + (wz * r[..., 0] - wx * r[..., 2])
    vt = np.stack([vx * gains.k_t, vy * gains.k_t], axis=-1)
    lim = gains.mu * gains.k_n * pen
    n = np.sqrt(vt[..., 0] * vt[..., 0] + vt[..., 1] * vt[..., 1])
    scale = np.where(n > lim, lim / np.where(n > 0, n, 1.0), 1.0)
    out = vt * scale[..., None]
    out[pen == 0] = 0.0
    return out


def penalty_field(grid: TactileGrid, indenter: SdfField, pose: Pose, velocity, gains: PenaltyParams) -> MarkerField:
    """Per-taxel friction response from penetration and relative velocity, with no spatial spreading.

    ``velocity`` is the indenter's spatial twist (vx, vy, vz, wx, wy, wz) in
    the elastomer frame, with the linear part taken at the indenter origin.
    At each in-contact taxel the tangential material velocity is scaled by
    ``k_t`` and clipped to ``mu * k_n * penetration``.
    """
    out = penalty_batch(grid, indenter, pose.quat[None], pose.translation[None], np.asarray(velocity)[None], gains)
    return MarkerField(grid, out[0].reshape(grid.rows, grid.cols, 2))


def twist_between(a: Pose, b: Pose, dt: float) -> np.ndarray:
    """Finite-difference spatial velocity (v, w) taking ``a`` to ``b`` over ``dt`` seconds."""
    v = (b.translation - a.translation) / dt
    dq = (b @ a.inverse()).quat
    if dq[0] < 0:
        dq = -dq
    s = math.sqrt(dq[1] ** 2 + dq[2] ** 2 + dq[3] ** 2)
    ang = 2.0 * math.atan2(s, dq[0])
    w = np.zeros(3) if s == 0 else dq[1:] / s * ang / dt
    return np.concatenate([v, w])
