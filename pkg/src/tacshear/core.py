"""Shared value types: rigid poses, the tactile grid, marker fields and model parameters.

Frames and units:
    Everything is expressed in the sensor-plane (elastomer) frame: x to the
    right and y up in the marker image, z pointing out of the membrane toward
    the indenter. The undeformed membrane surface is the plane
    ``z = plane_height`` and the gel occupies ``z <= plane_height``.
    Lengths are meters unless a field is explicitly tagged as pixels.
"""

from __future__ import annotations

from dataclasses import dataclass, field, replace
from typing import Iterable, Sequence

import numpy as np

#: GelSight Mini camera scale used to report displacements in pixels [px/m].
PIXEL_SCALE = 1000.0 / 0.065

#: Width of the active sensing area implied by the pixel scale [m].
SENSOR_WIDTH = 0.065

_QUAT_TOL = 1e-9


def _frozen(a) -> np.ndarray:
    a = np.array(a, dtype=np.float64)
    a.setflags(write=False)
    return a


def quat_multiply(q1: np.ndarray, q2: np.ndarray) -> np.ndarray:
    """Hamilton product ``q1 * q2`` for [w, x, y, z] quaternions."""
    w1, x1, y1, z1 = q1
    w2, x2, y2, z2 = q2
    return np.array(
        [
            w1 * w2 - x1 * x2 - y1 * y2 - z1 * z2,
            w1 * x2 + x1 * w2 + y1 * z2 - z1 * y2,
            w1 * y2 - x1 * z2 + y1 * w2 + z1 * x2,
            w1 * z2 + x1 * y2 - y1 * x2 + z1 * w2,
        ]
    )


def quat_to_matrix(q: np.ndarray) -> np.ndarray:
    w, x, y, z = q
    return np.array(
        [
            [1.0 - 2.0 * (y * y + z * z), 2.0 * (x * y - w * z), 2.0 * (x * z + w * y)],
            [2.0 * (x * y + w * z), 1.0 - 2.0 * (x * x + z * z), 2.0 * (y * z - w * x)],
            [2.0 * (x * z - w * y), 2.0 * (y * z + w * x), 1.0 - 2.0 * (x * x + y * y)],
        ]
    )


def quat_matrices(q: np.ndarray) -> np.ndarray:
    """(B, 3, 3) rotation matrices from (B, 4) unit quaternions, computed elementwise."""
    w, x, y, z = q[:, 0], q[:, 1], q[:, 2], q[:, 3]
    return np.stack(
        [
            np.stack([1 - 2 * (y * y + z * z), 2 * (x * y - w * z), 2 * (x * z + w * y)], -1),
            np.stack([2 * (x * y + w * z), 1 - 2 * (x * x + z * z), 2 * (y * z - w * x)], -1),
            np.stack([2 * (x * z - w * y), 2 * (y * z + w * x), 1 - 2 * (x * x + y * y)], -1),
        ],
        1,
    )


def _normalize_quat(q) -> np.ndarray:
    q = np.asarray(q, dtype=np.float64)
    n = np.sqrt(q @ q)
    if not np.isfinite(n) or n < 1e-12:
        raise ValueError(f"degenerate quaternion {q!r}")
    return q / n


@dataclass(frozen=True, eq=False)
class Pose:
    """Rigid SE(3) transform stored as a unit quaternion [w, x, y, z] and a translation.

    ``Pose`` instances are immutable; ``a @ b`` composes so that
    ``(a @ b).apply(p) == a.apply(b.apply(p))``.
    """

    quat: np.ndarray = field(default_factory=lambda: _frozen([1.0, 0.0, 0.0, 0.0]))
    translation: np.ndarray = field(default_factory=lambda: _frozen([0.0, 0.0, 0.0]))

    def __post_init__(self):
        q = np.asarray(self.quat, dtype=np.float64).reshape(4)
        t = np.asarray(self.translation, dtype=np.float64).reshape(3)
        if abs(np.sqrt(q @ q) - 1.0) > _QUAT_TOL:
            q = _normalize_quat(q)
        if not np.all(np.isfinite(t)):
            raise ValueError("pose translation must be finite")
        object.__setattr__(self, "quat", _frozen(q))
        object.__setattr__(self, "translation", _frozen(t))

    @classmethod
    def identity(cls) -> Pose:
        return cls()

    @classmethod
    def from_translation(cls, t: Sequence[float]) -> Pose:
        return cls(translation=t)

    @classmethod
    def from_axis_angle(cls, axis: Sequence[float], angle: float, translation=(0.0, 0.0, 0.0)) -> Pose:
        axis = np.asarray(axis, dtype=np.float64)
        axis = axis / np.sqrt(axis @ axis)
        h = 0.5 * angle
        return cls(np.concatenate([[np.cos(h)], np.sin(h) * axis]), translation)

    @classmethod
    def from_matrix(cls, T: np.ndarray) -> Pose:
        """Build from a 4x4 homogeneous matrix (or 3x3 rotation plus zero translation)."""
        T = np.asarray(T, dtype=np.float64)
        R = T[:3, :3]
        t = T[:3, 3] if T.shape == (4, 4) else np.zeros(3)
        tr = R[0, 0] + R[1, 1] + R[2, 2]
        if tr > 0.0:
            s = np.sqrt(tr + 1.0) * 2.0
            q = [0.25 * s, (R[2, 1] - R[1, 2]) / s, (R[0, 2] - R[2, 0]) / s, (R[1, 0] - R[0, 1]) / s]
        elif R[0, 0] > R[1, 1] and R[0, 0] > R[2, 2]:
            s = np.sqrt(1.0 + R[0, 0] - R[1, 1] - R[2, 2]) * 2.0
            q = [(R[2, 1] - R[1, 2]) / s, 0.25 * s, (R[0, 1] + R[1, 0]) / s, (R[0, 2] + R[2, 0]) / s]
        elif R[1, 1] > R[2, 2]:
            s = np.sqrt(1.0 + R[1, 1] - R[0, 0] - R[2, 2]) * 2.0
            q = [(R[0, 2] - R[2, 0]) / s, (R[0, 1] + R[1, 0]) / s, 0.25 * s, (R[1, 2] + R[2, 1]) / s]
        else:
            s = np.sqrt(1.0 + R[2, 2] - R[0, 0] - R[1, 1]) * 2.0
            q = [(R[1, 0] - R[0, 1]) / s, (R[0, 2] + R[2, 0]) / s, (R[1, 2] + R[2, 1]) / s, 0.25 * s]
        return cls(_normalize_quat(q), t)

    @classmethod
    def from_array(cls, values: Sequence[float]) -> Pose:
        """Inverse of :meth:`as_array`: (qw, qx, qy, qz, tx, ty, tz)."""
        values = np.asarray(values, dtype=np.float64).reshape(7)
        return cls(values[:4], values[4:])

    def as_array(self) -> np.ndarray:
        return np.concatenate([self.quat, self.translation])

    @property
    def rotation(self) -> np.ndarray:
        return quat_to_matrix(self.quat)

    def matrix(self) -> np.ndarray:
        T = np.eye(4)
        T[:3, :3] = self.rotation
        T[:3, 3] = self.translation
        return T

    def compose(self, other: Pose) -> Pose:
        q = _normalize_quat(quat_multiply(self.quat, other.quat))
        t = self.rotation @ other.translation + self.translation
        return Pose(q, t)

    __matmul__ = compose

    def inverse(self) -> Pose:
        qc = self.quat * np.array([1.0, -1.0, -1.0, -1.0])
        return Pose(qc, -(quat_to_matrix(qc) @ self.translation))

    def apply(self, points) -> np.ndarray:
        """Transform points (..., 3): ``R p + t``."""
        p = np.asarray(points, dtype=np.float64)
        return p @ self.rotation.T + self.translation

    def rotate(self, vectors) -> np.ndarray:
        return np.asarray(vectors, dtype=np.float64) @ self.rotation.T

    def interpolate(self, other: Pose, s: float) -> Pose:
        """Slerp on rotation, lerp on translation; ``s=0`` gives self."""
        q0, q1 = self.quat, other.quat
        d = float(q0 @ q1)
        if d < 0.0:
            q1, d = -q1, -d
        if d > 0.9995:
            q = q0 + s * (q1 - q0)
        else:
            th = np.arccos(d)
            q = (np.sin((1.0 - s) * th) * q0 + np.sin(s * th) * q1) / np.sin(th)
        t = self.translation + s * (other.translation - self.translation)
        return Pose(_normalize_quat(q), t)

    def almost_equal(self, other: Pose, tol: float = 1e-9) -> bool:
        dq = min(np.max(np.abs(self.quat - other.quat)), np.max(np.abs(self.quat + other.quat)))
        return bool(dq <= tol and np.max(np.abs(self.translation - other.translation)) <= tol)

    def __eq__(self, other) -> bool:
        if not isinstance(other, Pose):
            return NotImplemented
        return bool(np.array_equal(self.quat, other.quat) and np.array_equal(self.translation, other.translation))

    def __hash__(self):
        return hash((self.quat.tobytes(), self.translation.tobytes()))

    def __repr__(self):
        q = ", ".join(f"{v:.6g}" for v in self.quat)
        t = ", ".join(f"{v:.6g}" for v in self.translation)
        return f"Pose(quat=[{q}], translation=[{t}])"


def pose_compose(a: Pose, b: Pose) -> Pose:
    return a.compose(b)


def transform_points(pose: Pose, local_points) -> np.ndarray:
    return pose.apply(local_points)


@dataclass(frozen=True)
class TactileGrid:
    """Regular grid of marker query points on the undeformed membrane.

    ``origin`` is the (x, y) position of taxel (row 0, col 0); rows advance
    along +y and columns along +x. Flattened arrays are row-major.
    """

    rows: int = 7
    cols: int = 9
    origin: tuple[float, float] = (-4 * SENSOR_WIDTH / 9, -3 * SENSOR_WIDTH / 9)
    spacing: tuple[float, float] = (SENSOR_WIDTH / 9, SENSOR_WIDTH / 9)
    plane_height: float = 0.0

    def __post_init__(self):
        if self.rows < 1 or self.cols < 1:
            raise ValueError("grid needs at least one row and column")
        if self.spacing[0] <= 0 or self.spacing[1] <= 0:
            raise ValueError("grid spacing must be positive")
        object.__setattr__(self, "origin", (float(self.origin[0]), float(self.origin[1])))
        object.__setattr__(self, "spacing", (float(self.spacing[0]), float(self.spacing[1])))
        object.__setattr__(self, "plane_height", float(self.plane_height))

    @classmethod
    def centered(cls, rows: int = 7, cols: int = 9, width: float = SENSOR_WIDTH, plane_height: float = 0.0) -> TactileGrid:
        """Square-celled grid with ``cols`` markers spread over ``width`` meters, centered at x = y = 0."""
        h = width / cols
        return cls(rows, cols, (-(cols - 1) * h / 2, -(rows - 1) * h / 2), (h, h), plane_height)

    @property
    def size(self) -> int:
        return self.rows * self.cols

    @property
    def shape(self) -> tuple[int, int]:
        return (self.rows, self.cols)

    def xy(self) -> np.ndarray:
        """(N, 2) query coordinates, row-major."""
        ys = self.origin[1] + self.spacing[1] * np.arange(self.rows)
        xs = self.origin[0] + self.spacing[0] * np.arange(self.cols)
        X, Y = np.meshgrid(xs, ys)
        return np.stack([X.ravel(), Y.ravel()], axis=1)

    def points(self) -> np.ndarray:
        """(N, 3) query points on the membrane plane."""
        xy = self.xy()
        return np.column_stack([xy, np.full(len(xy), self.plane_height)])

    def compatible(self, other: TactileGrid, tol: float = 1e-12) -> bool:
        return (
            self.rows == other.rows
            and self.cols == other.cols
            and np.allclose(self.origin, other.origin, rtol=0, atol=tol)
            and np.allclose(self.spacing, other.spacing, rtol=0, atol=tol)
            and abs(self.plane_height - other.plane_height) <= tol
        )


class GridMismatchError(ValueError):
    pass


@dataclass(frozen=True, eq=False)
class MarkerField:
    """Per-taxel 2-D marker displacement over a :class:`TactileGrid`."""

    grid: TactileGrid
    vectors: np.ndarray
    unit: str = "m"
    pixel_scale: float = PIXEL_SCALE

    def __post_init__(self):
        if self.unit not in ("m", "px"):
            raise ValueError(f"unknown unit {self.unit!r}")
        if self.pixel_scale <= 0:
            raise ValueError("pixel_scale must be positive")
        v = np.array(self.vectors, dtype=np.float64).reshape(self.grid.rows, self.grid.cols, 2)
        v.setflags(write=False)
        object.__setattr__(self, "vectors", v)

    @classmethod
    def zeros(cls, grid: TactileGrid, unit: str = "m", pixel_scale: float = PIXEL_SCALE) -> MarkerField:
        return cls(grid, np.zeros((grid.rows, grid.cols, 2)), unit, pixel_scale)

    def flat(self) -> np.ndarray:
        return self.vectors.reshape(-1, 2)

    def to_pixels(self) -> MarkerField:
        if self.unit == "px":
            return self
        return replace(self, vectors=self.vectors * self.pixel_scale, unit="px")

    def to_meters(self) -> MarkerField:
        if self.unit == "m":
            return self
        return replace(self, vectors=self.vectors / self.pixel_scale, unit="m")

    def to_unit(self, unit: str) -> MarkerField:
        return self.to_pixels() if unit == "px" else self.to_meters()

    def _check(self, other: MarkerField):
        if not self.grid.compatible(other.grid):
            raise GridMismatchError("marker fields live on different grids")

    def __add__(self, other: MarkerField) -> MarkerField:
        self._check(other)
        other = other.to_unit(self.unit)
        return replace(self, vectors=self.vectors + other.vectors)

    def __sub__(self, other: MarkerField) -> MarkerField:
        self._check(other)
        other = other.to_unit(self.unit)
        return replace(self, vectors=self.vectors - other.vectors)

    def scaled(self, s: float) -> MarkerField:
        return replace(self, vectors=self.vectors * s)

    def norm(self) -> float:
        return float(np.sqrt(np.sum(self.vectors**2)))

    def magnitudes(self) -> np.ndarray:
        return np.sqrt(self.vectors[..., 0] ** 2 + self.vectors[..., 1] ** 2)

    def __eq__(self, other):
        if not isinstance(other, MarkerField):
            return NotImplemented
        return (
            self.grid == other.grid
            and self.unit == other.unit
            and self.pixel_scale == other.pixel_scale
            and np.array_equal(self.vectors, other.vectors)
        )

    __hash__ = None


@dataclass(frozen=True)
class HydroParams:
    """Parameters of the hydroelastic shear model.

    ``E`` defaults to ``K`` and ``mu_hat`` to ``mu``, which is the configuration
    under which a single tracker suffices. ``A_uniform`` overrides the
    per-sample areas when set.
    """

    lambda_d: float
    lambda_s: float
    K: float
    mu: float
    E: float | None = None
    mu_hat: float | None = None
    A_uniform: float | None = None

    def __post_init__(self):
        if self.E is None:
            object.__setattr__(self, "E", self.K)
        if self.mu_hat is None:
            object.__setattr__(self, "mu_hat", self.mu)
        for name in ("lambda_d", "lambda_s", "K", "mu", "E", "mu_hat"):
            v = getattr(self, name)
            if not (np.isfinite(v) and v > 0):
                raise ValueError(f"{name} must be strictly positive, got {v!r}")
        if self.A_uniform is not None and not self.A_uniform > 0:
            raise ValueError("A_uniform must be strictly positive")

    @property
    def single_tracker(self) -> bool:
        return self.E == self.K and self.mu == self.mu_hat and self.A_uniform is not None

    def tied(self, **changes) -> HydroParams:
        """Replace values, keeping ``E = K`` and ``mu_hat = mu`` tied to the new values."""
        d = {
            "lambda_d": self.lambda_d,
            "lambda_s": self.lambda_s,
            "K": self.K,
            "mu": self.mu,
            "A_uniform": self.A_uniform,
        }
        d.update(changes)
        return HydroParams(**d)

    def as_dict(self) -> dict:
        return {
            "lambda_d": self.lambda_d,
            "lambda_s": self.lambda_s,
            "K": self.K,
            "mu": self.mu,
            "E": self.E,
            "mu_hat": self.mu_hat,
            "A_uniform": self.A_uniform,
        }


def stack_poses(poses: Iterable[Pose]) -> tuple[np.ndarray, np.ndarray]:
    """(B, 4) quaternions and (B, 3) translations for a sequence of poses."""
    poses = list(poses)
    q = np.array([p.quat for p in poses], dtype=np.float64).reshape(-1, 4)
    t = np.array([p.translation for p in poses], dtype=np.float64).reshape(-1, 3)
    return q, t
