"""Path-dependent shear from tracked contact forces on indenter surface points.

Each indenter surface point carries two recursively updated vectors:

* a contact force, grown from the in-contact part of the point's motion with
  normal stiffness ``E*A`` and tangential stiffness ``K*A``, with the normal
  part kept non-negative, the tangential part clipped to the Coulomb cone and
  both reset when the point leaves the gel;
* a projection offset, the same recursion with unit stiffness and friction
  ``mu_hat``, which moves the point back to where it touches the gel surface.

Sign convention: both vectors are stored as the *restoring* response of the
gel, i.e. opposite to the accumulated in-contact displacement. The normal
magnitude of a stored vector ``f`` is therefore ``-<f, n>`` for the outward
indenter normal ``n``, the attachment point is ``o + offset`` and a sticking
marker moves along ``-tangential(f)``, i.e. with the indenter.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np
from numba import njit, prange

from . import _kernels
from .core import HydroParams, MarkerField, Pose, TactileGrid, quat_matrices as _quat_mats, stack_poses
from .geometry import Halfspace, SdfField, SurfaceSamples

DEFAULT_MAX_SUBSTEP = 5e-3

FLAG_FORCE_CLIP = _kernels.FLAG_FORCE_CLIP
FLAG_OFFSET_CLIP = _kernels.FLAG_OFFSET_CLIP
FLAG_NORMAL_CLAMP = _kernels.FLAG_NORMAL_CLAMP


class ConfigurationError(ValueError):
    pass


def contact_fraction(phi_now: float, phi_prev: float) -> float:
    """Share of a straight segment between two SDF values that lies inside the gel."""
    return float(_kernels.contact_fraction(float(phi_now), float(phi_prev)))


@dataclass(frozen=True, eq=False)
class TrackerState:
    """Snapshot of one environment's tracker.

    ``flags`` records, per point, which limits were active in the last
    update (bit 1: force cone, bit 2: projection cone, bit 4: normal clamp).
    """

    forces: np.ndarray
    offsets: np.ndarray
    prev_pose: Pose | None
    prev_world_points: np.ndarray
    prev_phi: np.ndarray
    in_contact: np.ndarray
    flags: np.ndarray
    step_index: int = 0
    substeps: int = 0

    @classmethod
    def initial(cls, m: int) -> TrackerState:
        z3 = np.zeros((m, 3))
        return cls(z3, z3.copy(), None, z3.copy(), np.zeros(m), np.zeros(m, bool), np.zeros(m, np.int8))

    def __len__(self):
        return self.forces.shape[0]

    def projected_points(self) -> np.ndarray:
        return self.prev_world_points + self.offsets

    def identical(self, other: TrackerState) -> bool:
        """Bitwise equality of every array and scalar."""
        arrays = ("forces", "offsets", "prev_world_points", "prev_phi", "in_contact", "flags")
        same = all(
            getattr(self, a).dtype == getattr(other, a).dtype
            and getattr(self, a).tobytes() == getattr(other, a).tobytes()
            for a in arrays
        )
        return bool(
            same
            and self.step_index == other.step_index
            and self.substeps == other.substeps
            and (self.prev_pose == other.prev_pose if self.prev_pose is not None else other.prev_pose is None)
        )


def normal_tangential(vectors: np.ndarray, normals: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    """Split stored (restoring) vectors into normal magnitude and tangential part."""
    gn = np.sum(vectors * normals, axis=-1)
    return -gn, vectors - gn[..., None] * normals


@njit(cache=True, parallel=True)
def _shear_inputs(q, local_nrm, forces, offsets, pts, phi, w, mx, my, cx, cy):
    B = q.shape[0]
    for b in prange(B):
        R = np.empty((3, 3))
        _kernels._quat_mat(q[b], R)
        for j in range(local_nrm.shape[0]):
            if phi[b, j] < 0.0:
                ax, ay, az = local_nrm[j, 0], local_nrm[j, 1], local_nrm[j, 2]
                nx = R[0, 0] * ax + R[0, 1] * ay + R[0, 2] * az
                ny = R[1, 0] * ax + R[1, 1] * ay + R[1, 2] * az
                nz = R[2, 0] * ax + R[2, 1] * ay + R[2, 2] * az
                fx, fy, fz = forces[b, j, 0], forces[b, j, 1], forces[b, j, 2]
                fn = fx * nx + fy * ny + fz * nz
                w[b, j] = -phi[b, j]
                mx[b, j] = -(fx - fn * nx)
                my[b, j] = -(fy - fn * ny)
                cx[b, j] = pts[b, j, 0] + offsets[b, j, 0]
                cy[b, j] = pts[b, j, 1] + offsets[b, j, 1]
            else:
                w[b, j] = 0.0
                mx[b, j] = 0.0
                my[b, j] = 0.0
                cx[b, j] = 0.0
                cy[b, j] = 0.0


class TrackerBatch:
    """Structure-of-arrays tracker state for ``env_count`` independent environments."""

    def __init__(self, env_count: int, surface: SurfaceSamples, elastomer: SdfField, params: HydroParams,
                 max_substep: float = DEFAULT_MAX_SUBSTEP):
        if not isinstance(elastomer, Halfspace):
            raise NotImplementedError("only flat (halfspace) elastomers are supported")
        self.surface = surface
        self.elastomer = elastomer
        self.params = params
        self.max_substep = float(max_substep)
        self._areas = (
            np.full(len(surface), params.A_uniform) if params.A_uniform is not None else np.array(surface.areas)
        )
        B, M = int(env_count), len(surface)
        self.env_count = B
        self.forces = np.zeros((B, M, 3))
        self.offsets = np.zeros((B, M, 3))
        self.points = np.zeros((B, M, 3))
        self.phi = np.zeros((B, M))
        self.flags = np.zeros((B, M), np.int8)
        self.quat = np.tile([1.0, 0.0, 0.0, 0.0], (B, 1))
        self.trans = np.zeros((B, 3))
        self.started = np.zeros(B, bool)
        self.step_index = np.zeros(B, np.int64)
        self.substeps = np.zeros(B, np.int64)

    @property
    def m(self) -> int:
        return len(self.surface)

    def reset(self, envs=None) -> None:
        """Zero the state of the given environments (all when None)."""
        sel = slice(None) if envs is None else np.atleast_1d(np.asarray(envs))
        for a in (self.forces, self.offsets, self.points, self.phi, self.flags, self.trans,
                  self.step_index, self.substeps):
            a[sel] = 0
        self.quat[sel] = [1.0, 0.0, 0.0, 0.0]
        self.started[sel] = False

    def copy(self) -> TrackerBatch:
        new = object.__new__(TrackerBatch)
        new.__dict__.update(self.__dict__)
        for name in ("forces", "offsets", "points", "phi", "flags", "quat", "trans", "started", "step_index", "substeps"):
            setattr(new, name, getattr(self, name).copy())
        return new

    def step(self, quats: np.ndarray, trans: np.ndarray, active=None) -> None:
        q = np.ascontiguousarray(quats, dtype=np.float64).reshape(self.env_count, 4)
        t = np.ascontiguousarray(trans, dtype=np.float64).reshape(self.env_count, 3)
        act = np.ones(self.env_count, bool) if active is None else np.asarray(active, bool)
        fresh = act & ~self.started
        if fresh.any():
            _kernels.place_points(q, t, self.surface.points, self.elastomer.height, self.points, self.phi, fresh)
            self.flags[fresh] = 0
            self.substeps[fresh] = 0
        run = act & self.started
        if run.any():
            p = self.params
            _kernels.track_step(self.quat, self.trans, q, t, run, self.surface.points, self.surface.normals,
                                self._areas, self.elastomer.height, p.E, p.K, p.mu, p.mu_hat, self.max_substep,
                                self.forces, self.offsets, self.points, self.phi, self.flags, self.substeps)
        self.quat[act] = q[act]
        self.trans[act] = t[act]
        self.started[act] = True
        self.step_index[act] += 1

    def shear_inputs(self):
        B, M = self.env_count, self.m
        w, mx, my, cx, cy = (np.empty((B, M)) for _ in range(5))
        _shear_inputs(self.quat, self.surface.normals, self.forces, self.offsets, self.points, self.phi,
                      w, mx, my, cx, cy)
        return w, mx, my, cx, cy

    def shear(self, qxy: np.ndarray, lambda_s: float) -> np.ndarray:
        """(B, N, 2) shear displacement in meters at query points ``qxy``."""
        w, mx, my, cx, cy = self.shear_inputs()
        out = np.zeros((self.env_count, len(qxy), 2))
        _kernels.gauss_sum(np.ascontiguousarray(qxy, dtype=np.float64), w, mx, my, cx, cy, _kernels.MODE_VECTOR,
                           float(lambda_s), out)
        return out

    def world_normals(self) -> np.ndarray:
        return np.einsum("bij,mj->bmi", _quat_mats(self.quat), self.surface.normals)

    def env_state(self, b: int) -> TrackerState:
        pose = Pose(self.quat[b], self.trans[b]) if self.started[b] else None
        return TrackerState(
            self.forces[b].copy(), self.offsets[b].copy(), pose, self.points[b].copy(), self.phi[b].copy(),
            self.phi[b] < 0, self.flags[b].copy(), int(self.step_index[b]), int(self.substeps[b]),
        )

    def load_env_state(self, b: int, state: TrackerState) -> None:
        if len(state) != self.m:
            raise ValueError(f"state has {len(state)} points, surface has {self.m}")
        self.forces[b] = state.forces
        self.offsets[b] = state.offsets
        self.points[b] = state.prev_world_points
        self.phi[b] = state.prev_phi
        self.flags[b] = state.flags
        self.step_index[b] = state.step_index
        self.substeps[b] = state.substeps
        if state.prev_pose is None:
            self.started[b] = False
            self.quat[b] = [1.0, 0.0, 0.0, 0.0]
            self.trans[b] = 0.0
        else:
            self.started[b] = True
            self.quat[b] = state.prev_pose.quat
            self.trans[b] = state.prev_pose.translation


def _single(state: TrackerState, surface: SurfaceSamples, elastomer: SdfField, params: HydroParams,
            max_substep: float) -> TrackerBatch:
    if len(state) != len(surface):
        raise ValueError(f"state has {len(state)} points but the surface has {len(surface)}")
    tb = TrackerBatch(1, surface, elastomer, params, max_substep)
    tb.load_env_state(0, state)
    return tb


def step_tracker(state: TrackerState, pose_now: Pose, surface: SurfaceSamples, elastomer: SdfField,
                 params: HydroParams, max_substep: float = DEFAULT_MAX_SUBSTEP) -> TrackerState:
    """Advance one environment's tracker to ``pose_now``; the input state is not modified.

    The first call after :meth:`TrackerState.initial` only records the pose
    (the recursion starts from zero force). Steps whose largest point motion
    exceeds ``max_substep`` meters are split into equal slerp substeps;
    ``max_substep=0`` disables the guard.
    """
    tb = _single(state, surface, elastomer, params, max_substep)
    q, t = stack_poses([pose_now])
    tb.step(q, t)
    return tb.env_state(0)


def recover_forces_from_offsets(state: TrackerState, params: HydroParams) -> np.ndarray:
    """Contact forces from projection offsets when one tracker suffices (E = K, mu = mu_hat, uniform A)."""
    if not params.single_tracker:
        raise ConfigurationError("force recovery needs E == K, mu == mu_hat and a uniform area A_uniform")
    return (params.K * params.A_uniform) * state.offsets


def shear_field(state: TrackerState, pose_now: Pose, surface: SurfaceSamples, elastomer: SdfField,
                grid: TactileGrid, lambda_s: float) -> MarkerField:
    """Shear displacement (meters) at the taxels for a tracker already advanced to ``pose_now``."""
    if len(state) != len(surface):
        raise ValueError(f"state has {len(state)} points but the surface has {len(surface)}")
    if not isinstance(elastomer, Halfspace):
        raise NotImplementedError("only flat (halfspace) elastomers are supported")
    q = np.asarray(pose_now.quat, dtype=np.float64).reshape(1, 4)
    B, M = 1, len(surface)
    w, mx, my, cx, cy = (np.empty((B, M)) for _ in range(5))
    _shear_inputs(q, surface.normals, state.forces[None], state.offsets[None], state.prev_world_points[None],
                  state.prev_phi[None], w, mx, my, cx, cy)
    out = np.zeros((1, grid.size, 2))
    _kernels.gauss_sum(grid.xy(), w, mx, my, cx, cy, _kernels.MODE_VECTOR, float(lambda_s), out)
    return MarkerField(grid, out[0].reshape(grid.rows, grid.cols, 2))


def total_field(dilation: MarkerField, shear: MarkerField) -> MarkerField:
    """Elementwise sum of the dilation and shear fields."""
    return dilation + shear


def gravity_augmented_field(state: TrackerState, pose_now: Pose, gravity_xf: Pose, surface: SurfaceSamples,
                            elastomer: SdfField, grid: TactileGrid, params: HydroParams,
                            max_substep: float = DEFAULT_MAX_SUBSTEP) -> MarkerField:
    """Shear after one hypothetical step to ``gravity_xf @ pose_now``; ``state`` is left untouched."""
    if state.prev_pose is None:
        return MarkerField.zeros(grid)
    shifted = gravity_xf @ pose_now
    trial = step_tracker(state, shifted, surface, elastomer, params, max_substep)
    return shear_field(trial, shifted, surface, elastomer, grid, params.lambda_s)


def cone_violation(state: TrackerState, pose: Pose, normals_local: np.ndarray, mu: float) -> tuple[float, float]:
    """(max of |f_t| - mu f_n, min f_n) over all points; used by invariant checks."""
    n = pose.rotate(normals_local)
    fn, ft = normal_tangential(state.forces, n)
    tn = np.sqrt(np.sum(ft * ft, axis=-1))
    return float(np.max(tn - mu * fn, initial=-math.inf)), float(np.min(fn, initial=math.inf))


class HydroShearModel:
    """Stateful convenience wrapper: dilation plus tracked shear for one environment."""

    def __init__(self, indenter: SdfField, surface: SurfaceSamples, grid: TactileGrid, params: HydroParams,
                 max_substep: float = DEFAULT_MAX_SUBSTEP, gravity_xf: Pose | None = None):
        from .geometry import elastomer_sdf

        self.indenter = indenter
        self.surface = surface
        self.grid = grid
        self.params = params
        self.elastomer = elastomer_sdf(grid)
        self.max_substep = max_substep
        self.gravity_xf = gravity_xf
        self.state = TrackerState.initial(len(surface))
        self.pose: Pose | None = None

    def reset(self) -> None:
        self.state = TrackerState.initial(len(self.surface))
        self.pose = None

    def step(self, pose: Pose) -> MarkerField:
        from .dilation import dilation_at_pose

        self.state = step_tracker(self.state, pose, self.surface, self.elastomer, self.params, self.max_substep)
        self.pose = pose
        dil = dilation_at_pose(self.grid, self.indenter, pose, self.params.lambda_d)
        if self.gravity_xf is not None:
            sh = gravity_augmented_field(self.state, pose, self.gravity_xf, self.surface, self.elastomer,
                                         self.grid, self.params, self.max_substep)
        else:
            sh = shear_field(self.state, pose, self.surface, self.elastomer, self.grid, self.params.lambda_s)
        return total_field(dil, sh)

    def run(self, poses) -> list[MarkerField]:
        return [self.step(p) for p in poses]

    def with_params(self, params: HydroParams) -> HydroShearModel:
        m = HydroShearModel(self.indenter, self.surface, self.grid, params, self.max_substep, self.gravity_xf)
        return m


__all__ = [
    "TrackerState",
    "TrackerBatch",
    "contact_fraction",
    "step_tracker",
    "recover_forces_from_offsets",
    "shear_field",
    "total_field",
    "gravity_augmented_field",
    "HydroShearModel",
    "ConfigurationError",
    "normal_tangential",
]
