"""File formats: trajectories, marker fields, surface samples, parameters and scenarios.

Text formats start with a ``#`` header line naming the format and schema
version, followed by ``key=value`` header lines and whitespace-separated
numeric records. Floats are written with ``repr`` precision so that
write -> read -> write is byte-identical.
"""

from __future__ import annotations

import json
import os
import struct
import tempfile
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from .core import PIXEL_SCALE, HydroParams, MarkerField, Pose, TactileGrid

TRAJECTORY_SCHEMA = "tacshear-trajectory v1"
FIELD_SCHEMA = "tacshear-field v1"
SAMPLES_SCHEMA = "tacshear-surface-samples v1"
PARAMS_SCHEMA = "tacshear-params v1"
BINARY_FIELD_MAGIC = b"TSFB"


class DataError(ValueError):
    """Malformed input file; message carries the file and line number."""


def atomic_write_bytes(path, data: bytes) -> None:
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    fd, tmp = tempfile.mkstemp(dir=path.parent, prefix=f".{path.name}.", suffix=".tmp")
    try:
        with os.fdopen(fd, "wb") as fh:
            fh.write(data)
        os.replace(tmp, path)
    except BaseException:
        if os.path.exists(tmp):
            os.unlink(tmp)
        raise


def atomic_write_text(path, text: str) -> None:
    atomic_write_bytes(path, text.encode())


def _fmt(v: float) -> str:
    return repr(float(v))


def _lines(path):
    with open(path) as fh:
        for lineno, line in enumerate(fh, 1):
            yield lineno, line.rstrip("\n")


def _parse_header(path, schema: str):
    """Returns (header dict, list of (lineno, tokens)) for a text file of the given schema."""
    it = iter(_lines(path))
    try:
        lineno, first = next(it)
    except StopIteration:
        raise DataError(f"{path}: empty file") from None
    if first.strip() != f"# {schema}":
        raise DataError(f"{path}:1: expected header '# {schema}', found {first.strip()!r}")
    header = {}
    rows = []
    for lineno, line in it:
        s = line.strip()
        if not s:
            continue
        if s.startswith("#"):
            body = s[1:].strip()
            if "=" in body:
                k, v = body.split("=", 1)
                header[k.strip()] = v.strip()
            continue
        rows.append((lineno, s.split()))
    return header, rows


def _floats(path, lineno, toks, n):
    if len(toks) != n:
        raise DataError(f"{path}:{lineno}: expected {n} values, found {len(toks)}")
    try:
        vals = [float(t) for t in toks]
    except ValueError as e:
        raise DataError(f"{path}:{lineno}: {e}") from None
    if not all(np.isfinite(vals)):
        raise DataError(f"{path}:{lineno}: non-finite value")
    return vals


# --- trajectories --------------------------------------------------------------


@dataclass
class Trajectory:
    times: np.ndarray
    poses: list[Pose]

    def __post_init__(self):
        self.times = np.asarray(self.times, dtype=np.float64)
        if len(self.times) != len(self.poses):
            raise ValueError("times and poses differ in length")
        if len(self.times) > 1 and np.any(np.diff(self.times) <= 0):
            raise ValueError("trajectory times must be strictly increasing")

    def __len__(self):
        return len(self.poses)


def write_trajectory(path, traj: Trajectory) -> None:
    out = [f"# {TRAJECTORY_SCHEMA}", "# frame=elastomer<-indenter", "# columns=time_s qw qx qy qz tx_m ty_m tz_m"]
    for t, p in zip(traj.times, traj.poses):
        out.append(" ".join(_fmt(v) for v in [t, *p.quat, *p.translation]))
    atomic_write_text(path, "\n".join(out) + "\n")


def read_trajectory(path) -> Trajectory:
    header, rows = _parse_header(path, TRAJECTORY_SCHEMA)
    frame = header.get("frame", "elastomer<-indenter")
    if frame != "elastomer<-indenter":
        raise DataError(f"{path}: unsupported frame {frame!r}")
    times, poses = [], []
    for lineno, toks in rows:
        v = _floats(path, lineno, toks, 8)
        q = np.array(v[1:5])
        if abs(np.linalg.norm(q) - 1.0) > 1e-6:
            raise DataError(f"{path}:{lineno}: quaternion is not unit length")
        if times and v[0] <= times[-1]:
            raise DataError(f"{path}:{lineno}: time is not strictly increasing")
        times.append(v[0])
        poses.append(Pose(q, v[5:8]))
    if not poses:
        raise DataError(f"{path}: no pose records")
    return Trajectory(np.array(times), poses)


# --- marker fields -------------------------------------------------------------


def _grid_header(grid: TactileGrid) -> list[str]:
    return [
        f"# rows={grid.rows}",
        f"# cols={grid.cols}",
        f"# origin={_fmt(grid.origin[0])} {_fmt(grid.origin[1])}",
        f"# spacing={_fmt(grid.spacing[0])} {_fmt(grid.spacing[1])}",
        f"# plane_height={_fmt(grid.plane_height)}",
    ]


def _grid_from_header(path, h) -> TactileGrid:
    try:
        ox, oy = (float(v) for v in h["origin"].split())
        sx, sy = (float(v) for v in h["spacing"].split())
        return TactileGrid(int(h["rows"]), int(h["cols"]), (ox, oy), (sx, sy), float(h.get("plane_height", 0.0)))
    except (KeyError, ValueError) as e:
        raise DataError(f"{path}: bad grid header ({e})") from None


def format_field(f: MarkerField, extra: dict | None = None) -> str:
    out = [f"# {FIELD_SCHEMA}", *_grid_header(f.grid), f"# unit={f.unit}", f"# pixel_scale={_fmt(f.pixel_scale)}"]
    for k, v in (extra or {}).items():
        out.append(f"# {k}={v}")
    xy = f.grid.xy()
    for (x, y), (dx, dy) in zip(xy, f.flat()):
        out.append(f"{_fmt(x)} {_fmt(y)} {_fmt(dx)} {_fmt(dy)}")
    return "\n".join(out) + "\n"


def write_field(path, f: MarkerField, extra: dict | None = None) -> None:
    atomic_write_text(path, format_field(f, extra))


def read_field(path) -> MarkerField:
    h, rows = _parse_header(path, FIELD_SCHEMA)
    grid = _grid_from_header(path, h)
    unit = h.get("unit")
    if unit not in ("m", "px"):
        raise DataError(f"{path}: unit must be 'm' or 'px', found {unit!r}")
    if len(rows) != grid.size:
        raise DataError(f"{path}: expected {grid.size} records, found {len(rows)}")
    vals = np.array([_floats(path, ln, toks, 4) for ln, toks in rows])
    return MarkerField(grid, vals[:, 2:].reshape(grid.rows, grid.cols, 2), unit, float(h.get("pixel_scale", PIXEL_SCALE)))


def read_field_header(path) -> dict:
    h, _ = _parse_header(path, FIELD_SCHEMA)
    return h


def write_fields_binary(path, fields: list[MarkerField]) -> None:
    """Binary variant for large batch outputs: header + float32 (count, rows, cols, 2) payload."""
    if not fields:
        raise ValueError("no fields to write")
    g = fields[0].grid
    unit = fields[0].unit
    for f in fields:
        if not g.compatible(f.grid) or f.unit != unit:
            raise ValueError("binary field batches must share grid and unit")
    head = BINARY_FIELD_MAGIC + struct.pack(
        "<IIII5dd2s", 1, len(fields), g.rows, g.cols, *g.origin, *g.spacing, g.plane_height,
        fields[0].pixel_scale, unit.encode().ljust(2)
    )
    payload = np.stack([f.vectors for f in fields]).astype("<f4").tobytes()
    atomic_write_bytes(path, head + payload)


def read_fields_binary(path) -> list[MarkerField]:
    data = Path(path).read_bytes()
    if data[:4] != BINARY_FIELD_MAGIC:
        raise DataError(f"{path}: not a binary field file")
    fmt = "<IIII5dd2s"
    n = struct.calcsize(fmt)
    version, count, rows, cols, ox, oy, sx, sy, ph, scale, unit = struct.unpack(fmt, data[4 : 4 + n])
    if version != 1:
        raise DataError(f"{path}: unsupported version {version}")
    grid = TactileGrid(rows, cols, (ox, oy), (sx, sy), ph)
    arr = np.frombuffer(data[4 + n :], dtype="<f4")
    if arr.size != count * rows * cols * 2:
        raise DataError(f"{path}: truncated payload")
    arr = arr.reshape(count, rows, cols, 2).astype(np.float64)
    u = unit.decode().strip()
    return [MarkerField(grid, a, u, scale) for a in arr]


# --- surface samples -----------------------------------------------------------


def write_samples(path, samples) -> None:
    out = [f"# {SAMPLES_SCHEMA}", f"# count={len(samples)}", "# columns=x y z nx ny nz area"]
    for p, n, a in zip(samples.points, samples.normals, samples.areas):
        out.append(" ".join(_fmt(v) for v in [*p, *n, a]))
    atomic_write_text(path, "\n".join(out) + "\n")


def read_samples(path):
    from .geometry import SurfaceSamples

    h, rows = _parse_header(path, SAMPLES_SCHEMA)
    vals = np.array([_floats(path, ln, toks, 7) for ln, toks in rows]).reshape(-1, 7)
    if "count" in h and int(h["count"]) != len(vals):
        raise DataError(f"{path}: header count {h['count']} != {len(vals)} records")
    return SurfaceSamples(vals[:, :3], vals[:, 3:6], vals[:, 6])


# --- parameters ----------------------------------------------------------------


def write_params(path, params: HydroParams, report: dict | None = None) -> None:
    doc = {"schema": PARAMS_SCHEMA, "params": params.as_dict()}
    if report:
        doc["report"] = report
    atomic_write_text(path, json.dumps(doc, indent=2, sort_keys=True) + "\n")


def read_params(path) -> HydroParams:
    try:
        doc = json.loads(Path(path).read_text())
    except json.JSONDecodeError as e:
        raise DataError(f"{path}:{e.lineno}: {e.msg}") from None
    if doc.get("schema") != PARAMS_SCHEMA:
        raise DataError(f"{path}: expected schema {PARAMS_SCHEMA!r}")
    try:
        return HydroParams(**doc["params"])
    except (TypeError, ValueError) as e:
        raise DataError(f"{path}: {e}") from None


# --- scenario config -----------------------------------------------------------


@dataclass
class ScenarioConfig:
    """Simulation setup read from a JSON config file."""

    indenter: dict = field(default_factory=lambda: {"shape": "sphere", "radius": 0.0175})
    samples: int = 2048
    seed: int = 0
    samples_path: str | None = None
    grid: dict = field(default_factory=dict)
    model: str = "hydroshear"
    params_path: str | None = None
    params: dict | None = None
    gravity: list[float] | None = None
    max_substep: float = 5e-3
    fots: dict | None = None
    penalty: dict | None = None
    base_dir: str = "."

    MODELS = ("hydroshear", "fots_original", "fots_reimpl", "penalty")

    @classmethod
    def load(cls, path) -> ScenarioConfig:
        path = Path(path)
        try:
            doc = json.loads(path.read_text())
        except json.JSONDecodeError as e:
            raise DataError(f"{path}:{e.lineno}: {e.msg}") from None
        known = set(cls.__dataclass_fields__) - {"base_dir"}
        unknown = set(doc) - known
        if unknown:
            raise DataError(f"{path}: unknown config keys {sorted(unknown)}")
        cfg = cls(**doc, base_dir=str(path.parent))
        cfg.validate(path)
        return cfg

    def resolve(self, p: str) -> Path:
        q = Path(p)
        return q if q.is_absolute() else Path(self.base_dir) / q

    def validate(self, path="config"):
        if self.model not in self.MODELS:
            raise DataError(f"{path}: model must be one of {self.MODELS}")
        if self.samples < 1:
            raise DataError(f"{path}: samples must be positive")
        if self.max_substep < 0:
            raise DataError(f"{path}: max_substep must be non-negative")
        if self.params_path is not None and not self.resolve(self.params_path).exists():
            raise DataError(f"{path}: params_path {self.params_path!r} does not exist")
        if self.samples_path is not None and not self.resolve(self.samples_path).exists():
            raise DataError(f"{path}: samples_path {self.samples_path!r} does not exist")
        if self.gravity is not None and len(self.gravity) not in (3, 7):
            raise DataError(f"{path}: gravity must have 3 (translation) or 7 (pose) values")
        for key in ("path",):
            if key in self.indenter and not self.resolve(self.indenter[key]).exists():
                raise DataError(f"{path}: indenter file {self.indenter[key]!r} does not exist")

    def tactile_grid(self) -> TactileGrid:
        g = dict(self.grid)
        if "origin" in g or "spacing" in g:
            return TactileGrid(
                int(g.get("rows", 7)), int(g.get("cols", 9)), tuple(g["origin"]), tuple(g["spacing"]),
                float(g.get("plane_height", 0.0)),
            )
        return TactileGrid.centered(
            int(g.get("rows", 7)), int(g.get("cols", 9)), float(g.get("width", 0.065)), float(g.get("plane_height", 0.0))
        )

    def hydro_params(self) -> HydroParams | None:
        if self.params_path is not None:
            return read_params(self.resolve(self.params_path))
        if self.params is not None:
            return HydroParams(**self.params)
        return None

    def indenter_sdf(self):
        from .geometry import sdf_from_spec

        spec = dict(self.indenter)
        if "path" in spec:
            spec["path"] = str(self.resolve(spec["path"]))
        return sdf_from_spec(spec)

    def surface_samples(self, indenter=None):
        """Surface samples from ``samples_path`` when given, otherwise sampled from the indenter."""
        if self.samples_path is not None:
            return read_samples(self.resolve(self.samples_path))
        from .geometry import sample_surface

        return sample_surface(indenter if indenter is not None else self.indenter_sdf(), self.samples, self.seed)

    def gravity_pose(self) -> Pose | None:
        """Gravity transform from a 3-value translation or a 7-value (qw, qx, qy, qz, tx, ty, tz) pose."""
        if self.gravity is None:
            return None
        if len(self.gravity) == 3:
            return Pose.from_translation(self.gravity)
        return Pose.from_array(self.gravity)
