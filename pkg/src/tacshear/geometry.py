"""Signed distance fields for indenters and the elastomer, plus surface sampling.

All SDFs are negative inside the solid. Analytic shapes are defined in their
own local frame (centered at the origin, symmetry axis along z); use a
:class:`~tacshear.core.Pose` to place them.
"""

from __future__ import annotations

import math
import struct
from dataclasses import dataclass, field

import numpy as np

from . import _kernels
from .core import TactileGrid

SURFACE_EPS = 1e-6
NEWTON_MAX_ITER = 32


class SdfBoundsError(ValueError):
    """Query outside a grid SDF whose extrapolation is disabled."""


class SamplingError(RuntimeError):
    pass


def _as_points(p) -> np.ndarray:
    p = np.asarray(p, dtype=np.float64)
    if p.shape[-1] != 3:
        raise ValueError("points must have a trailing dimension of 3")
    return p


def _normalize(v: np.ndarray) -> np.ndarray:
    n = np.sqrt(v[..., 0] ** 2 + v[..., 1] ** 2 + v[..., 2] ** 2)
    return v / np.where(n > 0, n, 1.0)[..., None]


class SdfField:
    """Base class. Subclasses implement ``_eval`` and optionally ``_grad``."""

    kind = "abstract"

    def eval(self, points) -> np.ndarray:
        p = _as_points(points)
        return self._eval(p)

    def gradient(self, points, normalized: bool = False) -> np.ndarray:
        p = _as_points(points)
        g = self._grad(p)
        return _normalize(g) if normalized else g

    def _grad(self, p: np.ndarray, h: float = 1e-7) -> np.ndarray:
        g = np.empty(p.shape)
        for i in range(3):
            e = np.zeros(3)
            e[i] = h
            g[..., i] = (self._eval(p + e) - self._eval(p - e)) / (2 * h)
        return g

    def bounds(self) -> tuple[np.ndarray, np.ndarray]:
        raise NotImplementedError

    def surface_area(self) -> float:
        raise NotImplementedError

    def spec(self) -> dict:
        raise NotImplementedError


def sdf_eval(field: SdfField, point) -> float | np.ndarray:
    """Signed distance at one point (returns a float) or at an array of points."""
    v = field.eval(point)
    return float(v) if np.ndim(v) == 0 else v


def sdf_gradient(field: SdfField, point, normalized: bool = False) -> np.ndarray:
    return field.gradient(point, normalized=normalized)


@dataclass(frozen=True)
class Sphere(SdfField):
    radius: float
    kind = "sphere"

    def _eval(self, p):
        return np.sqrt(p[..., 0] ** 2 + p[..., 1] ** 2 + p[..., 2] ** 2) - self.radius

    def _grad(self, p):
        return _normalize(p)

    def bounds(self):
        r = self.radius
        return np.full(3, -r), np.full(3, r)

    def surface_area(self):
        return 4.0 * math.pi * self.radius**2

    def spec(self):
        return {"shape": "sphere", "radius": self.radius}


@dataclass(frozen=True)
class Box(SdfField):
    half_extents: tuple[float, float, float]
    kind = "box"

    def _q(self, p):
        return np.abs(p) - np.asarray(self.half_extents)

    def _eval(self, p):
        q = self._q(p)
        qp = np.maximum(q, 0.0)
        outside = np.sqrt(qp[..., 0] ** 2 + qp[..., 1] ** 2 + qp[..., 2] ** 2)
        inside = np.minimum(np.maximum(q[..., 0], np.maximum(q[..., 1], q[..., 2])), 0.0)
        return outside + inside

    def _grad(self, p):
        q = self._q(p)
        sgn = np.where(p < 0, -1.0, 1.0)
        qp = np.maximum(q, 0.0)
        out = _normalize(qp) * sgn
        ax = np.argmax(q, axis=-1)
        ins = np.zeros(p.shape)
        np.put_along_axis(ins, ax[..., None], 1.0, axis=-1)
        ins = ins * sgn
        is_out = np.any(q > 0, axis=-1)
        return np.where(is_out[..., None], out, ins)

    def bounds(self):
        h = np.asarray(self.half_extents, dtype=float)
        return -h, h

    def surface_area(self):
        a, b, c = self.half_extents
        return 8.0 * (a * b + b * c + c * a)

    def spec(self):
        return {"shape": "box", "half_extents": list(self.half_extents)}


@dataclass(frozen=True)
class Cylinder(SdfField):
    """Capped cylinder along z."""

    radius: float
    half_height: float
    kind = "cylinder"

    def _eval(self, p):
        dr = np.sqrt(p[..., 0] ** 2 + p[..., 1] ** 2) - self.radius
        dz = np.abs(p[..., 2]) - self.half_height
        a = np.maximum(dr, 0.0)
        b = np.maximum(dz, 0.0)
        return np.minimum(np.maximum(dr, dz), 0.0) + np.sqrt(a * a + b * b)

    def _grad(self, p):
        rho = np.sqrt(p[..., 0] ** 2 + p[..., 1] ** 2)
        dr = rho - self.radius
        dz = np.abs(p[..., 2]) - self.half_height
        safe = np.where(rho > 0, rho, 1.0)
        er = np.stack([p[..., 0] / safe, p[..., 1] / safe, np.zeros_like(rho)], axis=-1)
        ez = np.zeros(p.shape)
        ez[..., 2] = np.where(p[..., 2] < 0, -1.0, 1.0)
        a = np.maximum(dr, 0.0)[..., None]
        b = np.maximum(dz, 0.0)[..., None]
        outside = _normalize(a * er + b * ez)
        inside = np.where((dr > dz)[..., None], er, ez)
        return np.where(((dr > 0) | (dz > 0))[..., None], outside, inside)

    def bounds(self):
        r, h = self.radius, self.half_height
        return np.array([-r, -r, -h]), np.array([r, r, h])

    def surface_area(self):
        return 2.0 * math.pi * self.radius * (2.0 * self.half_height) + 2.0 * math.pi * self.radius**2

    def spec(self):
        return {"shape": "cylinder", "radius": self.radius, "half_height": self.half_height}


@dataclass(frozen=True)
class Torus(SdfField):
    """Torus around the z axis: ring radius ``major``, tube radius ``minor``."""

    major: float
    minor: float
    kind = "torus"

    def __post_init__(self):
        if not 0 < self.minor < self.major:
            raise ValueError("torus needs 0 < minor < major")

    def _eval(self, p):
        rho = np.sqrt(p[..., 0] ** 2 + p[..., 1] ** 2)
        a = rho - self.major
        return np.sqrt(a * a + p[..., 2] ** 2) - self.minor

    def _grad(self, p):
        rho = np.sqrt(p[..., 0] ** 2 + p[..., 1] ** 2)
        safe = np.where(rho > 0, rho, 1.0)
        a = rho - self.major
        v = np.stack([a * p[..., 0] / safe, a * p[..., 1] / safe, p[..., 2]], axis=-1)
        return _normalize(v)

    def bounds(self):
        e = self.major + self.minor
        return np.array([-e, -e, -self.minor]), np.array([e, e, self.minor])

    def surface_area(self):
        return 4.0 * math.pi**2 * self.major * self.minor

    def spec(self):
        return {"shape": "torus", "major": self.major, "minor": self.minor}


@dataclass(frozen=True)
class Halfspace(SdfField):
    """Solid ``z <= height``; the flat elastomer."""

    height: float = 0.0
    kind = "halfspace"

    def _eval(self, p):
        return p[..., 2] - self.height

    def _grad(self, p):
        g = np.zeros(p.shape)
        g[..., 2] = 1.0
        return g

    def bounds(self):
        return np.array([-np.inf, -np.inf, -np.inf]), np.array([np.inf, np.inf, self.height])

    def surface_area(self):
        return math.inf

    def spec(self):
        return {"shape": "halfspace", "height": self.height}


def elastomer_sdf(grid: TactileGrid) -> Halfspace:
    return Halfspace(grid.plane_height)


@dataclass(frozen=True, eq=False)
class GridSdf(SdfField):
    """Signed distances sampled on a regular lattice, trilinearly interpolated.

    ``values[i, j, k]`` is the distance at ``lo + (i, j, k) * cell``. Queries
    outside the lattice raise :class:`SdfBoundsError` unless ``extrapolate``
    is set, in which case the point is clamped to the box and the clamp
    distance is added.
    """

    values: np.ndarray
    lo: np.ndarray
    hi: np.ndarray
    extrapolate: bool = True
    area: float | None = None
    kind = "grid"

    def __post_init__(self):
        v = np.ascontiguousarray(self.values, dtype=np.float64)
        if v.ndim != 3 or min(v.shape) < 2:
            raise ValueError("grid SDF needs a 3-D lattice with at least 2 nodes per axis")
        object.__setattr__(self, "values", v)
        object.__setattr__(self, "lo", np.asarray(self.lo, dtype=np.float64).reshape(3))
        object.__setattr__(self, "hi", np.asarray(self.hi, dtype=np.float64).reshape(3))

    @property
    def cell(self) -> np.ndarray:
        return (self.hi - self.lo) / (np.array(self.values.shape) - 1)

    @classmethod
    def from_sdf(cls, sdf: SdfField, resolution: float, padding: float | None = None, **kw) -> GridSdf:
        lo, hi = sdf.bounds()
        pad = 3 * resolution if padding is None else padding
        lo = lo - pad
        hi = hi + pad
        n = np.ceil((hi - lo) / resolution).astype(int) + 1
        hi = lo + (n - 1) * resolution
        axes = [lo[i] + resolution * np.arange(n[i]) for i in range(3)]
        P = np.stack(np.meshgrid(*axes, indexing="ij"), axis=-1)
        kw.setdefault("area", sdf.surface_area())
        return cls(sdf.eval(P), lo, hi, **kw)

    def out_of_bounds(self, points) -> np.ndarray:
        p = _as_points(points)
        return np.any((p < self.lo) | (p > self.hi), axis=-1)

    def _eval(self, p):
        oob = self.out_of_bounds(p)
        if np.any(oob) and not self.extrapolate:
            raise SdfBoundsError(f"{int(np.sum(oob))} queries outside grid bounds")
        pc = np.clip(p, self.lo, self.hi)
        u = (pc - self.lo) / self.cell
        shape = np.array(self.values.shape)
        i0 = np.clip(np.floor(u).astype(np.int64), 0, shape - 2)
        f = u - i0
        V = self.values
        i, j, k = i0[..., 0], i0[..., 1], i0[..., 2]
        fx, fy, fz = f[..., 0], f[..., 1], f[..., 2]
        c00 = V[i, j, k] * (1 - fx) + V[i + 1, j, k] * fx
        c10 = V[i, j + 1, k] * (1 - fx) + V[i + 1, j + 1, k] * fx
        c01 = V[i, j, k + 1] * (1 - fx) + V[i + 1, j, k + 1] * fx
        c11 = V[i, j + 1, k + 1] * (1 - fx) + V[i + 1, j + 1, k + 1] * fx
        c0 = c00 * (1 - fy) + c10 * fy
        c1 = c01 * (1 - fy) + c11 * fy
        d = c0 * (1 - fz) + c1 * fz
        if np.any(oob):
            e = p - pc
            d = d + np.sqrt(e[..., 0] ** 2 + e[..., 1] ** 2 + e[..., 2] ** 2)
        return d

    def _grad(self, p):
        return SdfField._grad(self, p, h=0.5 * float(np.min(self.cell)))

    def bounds(self):
        return self.lo.copy(), self.hi.copy()

    def surface_area(self):
        if self.area is not None:
            return self.area
        # smeared-delta estimate: integral of delta_eps(phi) |grad phi| dV
        h = self.cell
        eps = 1.5 * float(np.max(h))
        V = self.values
        g = np.gradient(V, *h)
        gn = np.sqrt(g[0] ** 2 + g[1] ** 2 + g[2] ** 2)
        x = V / eps
        delta = np.where(np.abs(x) < 1, (1 + np.cos(np.pi * x)) / (2 * eps), 0.0)
        return float(np.sum(delta * gn) * np.prod(h))

    def spec(self):
        return {"shape": "grid", "dims": list(self.values.shape), "lo": self.lo.tolist(), "hi": self.hi.tolist()}


# --- grid SDF lattice file -------------------------------------------------

_GRID_MAGIC = b"TSDF"
_GRID_VERSION = 1


def save_grid_sdf(path, sdf: GridSdf) -> None:
    nx, ny, nz = sdf.values.shape
    header = _GRID_MAGIC + struct.pack("<I3I6dI", _GRID_VERSION, nx, ny, nz, *sdf.lo, *sdf.hi, 4)
    payload = np.ascontiguousarray(sdf.values, dtype="<f4").tobytes()
    from .io import atomic_write_bytes

    atomic_write_bytes(path, header + payload)


def load_grid_sdf(path, extrapolate: bool = True) -> GridSdf:
    with open(path, "rb") as fh:
        data = fh.read()
    if data[:4] != _GRID_MAGIC:
        raise ValueError(f"{path}: not a grid SDF file")
    hsize = 4 + struct.calcsize("<I3I6dI")
    version, nx, ny, nz, *rest = struct.unpack("<I3I6dI", data[4:hsize])
    lo, hi, width = np.array(rest[:3]), np.array(rest[3:6]), rest[6]
    if version != _GRID_VERSION:
        raise ValueError(f"{path}: unsupported grid SDF version {version}")
    if width != 4:
        raise ValueError(f"{path}: unsupported float width {width}")
    vals = np.frombuffer(data[hsize:], dtype="<f4")
    if vals.size != nx * ny * nz:
        raise ValueError(f"{path}: expected {nx * ny * nz} samples, found {vals.size}")
    return GridSdf(vals.reshape(nx, ny, nz).astype(np.float64), lo, hi, extrapolate=extrapolate)


# --- triangle meshes ---------------------------------------------------------


def read_ascii_stl(path) -> tuple[np.ndarray, np.ndarray]:
    """Read an ASCII STL triangle soup; returns (vertices (V,3), faces (F,3)) with duplicates merged."""
    verts = []
    with open(path) as fh:
        for lineno, line in enumerate(fh, 1):
            tok = line.split()
            if tok and tok[0] == "vertex":
                if len(tok) != 4:
                    raise ValueError(f"{path}:{lineno}: malformed vertex line")
                verts.append([float(v) for v in tok[1:]])
    if not verts or len(verts) % 3:
        raise ValueError(f"{path}: vertex count {len(verts)} is not a positive multiple of 3")
    soup = np.array(verts)
    uniq, inv = np.unique(soup, axis=0, return_inverse=True)
    return uniq, inv.reshape(-1, 3)


def write_ascii_stl(path, vertices, faces, name: str = "mesh") -> None:
    V = np.asarray(vertices)
    lines = [f"solid {name}"]
    for f in np.asarray(faces):
        a, b, c = V[f]
        n = np.cross(b - a, c - a)
        nn = np.linalg.norm(n)
        n = n / nn if nn > 0 else n
        lines.append(f"  facet normal {n[0]:.9e} {n[1]:.9e} {n[2]:.9e}")
        lines.append("    outer loop")
        for v in (a, b, c):
            lines.append(f"      vertex {v[0]:.17g} {v[1]:.17g} {v[2]:.17g}")
        lines.append("    endloop")
        lines.append("  endfacet")
    lines.append(f"endsolid {name}")
    from .io import atomic_write_text

    atomic_write_text(path, "\n".join(lines) + "\n")


def uv_sphere_mesh(radius: float, n_lat: int = 24, n_lon: int = 48) -> tuple[np.ndarray, np.ndarray]:
    """Closed, outward-oriented triangle mesh of a sphere."""
    verts = [[0.0, 0.0, radius]]
    for i in range(1, n_lat):
        th = math.pi * i / n_lat
        for j in range(n_lon):
            ph = 2 * math.pi * j / n_lon
            verts.append([radius * math.sin(th) * math.cos(ph), radius * math.sin(th) * math.sin(ph), radius * math.cos(th)])
    verts.append([0.0, 0.0, -radius])
    faces = []
    ring = lambda i, j: 1 + (i - 1) * n_lon + (j % n_lon)  # noqa: E731
    for j in range(n_lon):
        faces.append([0, ring(1, j), ring(1, j + 1)])
    for i in range(1, n_lat - 1):
        for j in range(n_lon):
            a, b = ring(i, j), ring(i, j + 1)
            c, d = ring(i + 1, j), ring(i + 1, j + 1)
            faces.append([a, c, d])
            faces.append([a, d, b])
    s = len(verts) - 1
    for j in range(n_lon):
        faces.append([s, ring(n_lat - 1, j + 1), ring(n_lat - 1, j)])
    return np.array(verts), np.array(faces)


def mesh_area(vertices, faces) -> float:
    V = np.asarray(vertices)
    F = np.asarray(faces)
    return float(0.5 * np.sum(np.linalg.norm(np.cross(V[F[:, 1]] - V[F[:, 0]], V[F[:, 2]] - V[F[:, 0]]), axis=1)))


def _point_triangle_distance(P, A, B, C):
    """Unsigned distance from points P (n,3) to each triangle (A,B,C each (m,3)); returns (n, m)."""
    P = P[:, None, :]
    ab, ac, ap = B - A, C - A, P - A
    d1 = np.sum(ab * ap, -1)
    d2 = np.sum(ac * ap, -1)
    bp = P - B
    d3 = np.sum(ab * bp, -1)
    d4 = np.sum(ac * bp, -1)
    cp = P - C
    d5 = np.sum(ab * cp, -1)
    d6 = np.sum(ac * cp, -1)
    va = d3 * d6 - d5 * d4
    vb = d5 * d2 - d1 * d6
    vc = d1 * d4 - d3 * d2
    with np.errstate(divide="ignore", invalid="ignore"):
        denom = va + vb + vc
        v = vb / denom
        w = vc / denom
        closest = A + ab * v[..., None] + ac * w[..., None]
        # vertex and edge regions (Ericson, Real-Time Collision Detection 5.1.5)
        e_ab = d1 / (d1 - d3)
        e_ac = d2 / (d2 - d6)
        e_bc = (d4 - d3) / ((d4 - d3) + (d5 - d6))
    regions = [
        ((d1 <= 0) & (d2 <= 0), np.broadcast_to(A, closest.shape)),
        ((d3 >= 0) & (d4 <= d3), np.broadcast_to(B, closest.shape)),
        ((d6 >= 0) & (d5 <= d6), np.broadcast_to(C, closest.shape)),
        ((vc <= 0) & (d1 >= 0) & (d3 <= 0), A + ab * e_ab[..., None]),
        ((vb <= 0) & (d2 >= 0) & (d6 <= 0), A + ac * e_ac[..., None]),
        ((va <= 0) & ((d4 - d3) >= 0) & ((d5 - d6) >= 0), B + (C - B) * e_bc[..., None]),
    ]
    done = np.zeros(d1.shape, dtype=bool)
    out = closest.copy()
    for mask, pt in regions:
        m = mask & ~done
        out = np.where(m[..., None], pt, out)
        done |= m
    diff = P - out
    return np.sqrt(np.sum(diff * diff, -1))


def winding_number(P, vertices, faces) -> np.ndarray:
    """Generalized winding number of points w.r.t. a closed oriented triangle mesh."""
    V = np.asarray(vertices, dtype=np.float64)
    F = np.asarray(faces)
    a = V[F[:, 0]][None] - P[:, None]
    b = V[F[:, 1]][None] - P[:, None]
    c = V[F[:, 2]][None] - P[:, None]
    la, lb, lc = (np.linalg.norm(x, axis=-1) for x in (a, b, c))
    det = np.einsum("nmi,nmi->nm", a, np.cross(b, c))
    den = (
        la * lb * lc
        + np.einsum("nmi,nmi->nm", a, b) * lc
        + np.einsum("nmi,nmi->nm", b, c) * la
        + np.einsum("nmi,nmi->nm", c, a) * lb
    )
    return np.sum(2.0 * np.arctan2(det, den), axis=1) / (4.0 * math.pi)


def mesh_to_grid_sdf(vertices, faces, resolution: float, padding: float | None = None) -> GridSdf:
    """Exact unsigned distance to the mesh, signed by the winding number."""
    V = np.asarray(vertices, dtype=np.float64)
    F = np.asarray(faces, dtype=np.int64)
    pad = 3 * resolution if padding is None else padding
    lo = V.min(axis=0) - pad
    hi = V.max(axis=0) + pad
    n = np.ceil((hi - lo) / resolution).astype(int) + 1
    hi = lo + (n - 1) * resolution
    axes = [lo[i] + resolution * np.arange(n[i]) for i in range(3)]
    P = np.stack(np.meshgrid(*axes, indexing="ij"), axis=-1).reshape(-1, 3)
    out = np.empty(len(P))
    _kernels.mesh_sdf(np.ascontiguousarray(P), np.ascontiguousarray(V), np.ascontiguousarray(F), out)
    return GridSdf(out.reshape(tuple(n)), lo, hi, area=mesh_area(V, F))


# --- surface samples ---------------------------------------------------------


@dataclass(frozen=True, eq=False)
class SurfaceSamples:
    """On-surface points of an indenter in its local frame."""

    points: np.ndarray
    normals: np.ndarray
    areas: np.ndarray
    meta: dict = field(default_factory=dict)

    def __post_init__(self):
        for name in ("points", "normals", "areas"):
            a = np.ascontiguousarray(getattr(self, name), dtype=np.float64)
            a.setflags(write=False)
            object.__setattr__(self, name, a)
        if self.points.shape != self.normals.shape or self.points.shape[0] != self.areas.shape[0]:
            raise ValueError("points, normals and areas must agree in length")

    def __len__(self):
        return self.points.shape[0]

    @property
    def total_area(self) -> float:
        return float(np.sum(self.areas))


def project_to_surface(sdf: SdfField, p: np.ndarray, max_iter: int = NEWTON_MAX_ITER, tol: float = SURFACE_EPS):
    """Newton iterations along the SDF gradient; returns (points, converged mask)."""
    p = np.array(p, dtype=np.float64)
    conv = np.zeros(len(p), dtype=bool)
    for _ in range(max_iter):
        d = sdf.eval(p)
        conv = np.abs(d) < tol
        if conv.all():
            break
        g = sdf.gradient(p)
        g2 = np.sum(g * g, axis=-1)
        ok = (~conv) & (g2 > 1e-12)
        p[ok] -= (d[ok] / g2[ok])[:, None] * g[ok]
    d = sdf.eval(p)
    conv = np.abs(d) < tol
    return p, conv


def sample_surface(field: SdfField, target_count: int = 2048, seed: int = 0, band: float | None = None) -> SurfaceSamples:
    """Sample ``target_count`` points on the zero level set with outward normals.

    Candidates are drawn uniformly in the bounding box, kept when they lie in a
    thin shell just inside the surface, then projected onto it with Newton
    steps. Each point gets the uniform area ``surface_area / target_count``.
    """
    if target_count < 1:
        raise ValueError("target_count must be positive")
    lo, hi = field.bounds()
    if not (np.all(np.isfinite(lo)) and np.all(np.isfinite(hi))):
        raise SamplingError("cannot sample an unbounded SDF")
    ext = hi - lo
    if band is None:
        band = 0.02 * float(np.min(ext)) / 2
    rng = np.random.default_rng(seed)
    got: list[np.ndarray] = []
    n_got = 0
    tries = 0
    n_fail = 0
    while n_got < target_count:
        tries += 1
        if tries > 400:
            raise SamplingError(f"only {n_got}/{target_count} samples after {tries} batches")
        cand = lo + ext * rng.random((max(4096, 8 * target_count), 3))
        d = field.eval(cand)
        cand = cand[(d <= 0) & (d > -band)]
        if len(cand) == 0:
            continue
        proj, conv = project_to_surface(field, cand)
        n_fail += int(np.sum(~conv))
        proj = proj[conv]
        got.append(proj)
        n_got += len(proj)
        if n_fail > 10 * target_count and n_got < target_count // 10:
            raise SamplingError("Newton projection does not converge for this SDF")
    pts = np.concatenate(got)[:target_count]
    nrm = field.gradient(pts, normalized=True)
    area = field.surface_area()
    return SurfaceSamples(pts, nrm, np.full(target_count, area / target_count),
                          meta={"seed": seed, "shape": field.spec()})


def sdf_from_spec(spec: dict) -> SdfField:
    """Build an analytic SDF from its dict description (see each shape's ``spec()``)."""
    kind = spec.get("shape")
    if kind == "sphere":
        return Sphere(float(spec["radius"]))
    if kind == "box":
        return Box(tuple(float(v) for v in spec["half_extents"]))
    if kind == "cylinder":
        return Cylinder(float(spec["radius"]), float(spec["half_height"]))
    if kind == "torus":
        return Torus(float(spec["major"]), float(spec["minor"]))
    if kind == "halfspace":
        return Halfspace(float(spec.get("height", 0.0)))
    if kind == "grid":
        return load_grid_sdf(spec["path"], extrapolate=bool(spec.get("extrapolate", True)))
    if kind == "mesh":
        V, F = read_ascii_stl(spec["path"])
        return mesh_to_grid_sdf(V, F, float(spec.get("resolution", 1e-3)))
    raise ValueError(f"unknown indenter shape {kind!r}")
