"""Lock-step simulation of many independent environments and a timing harness.

Every model keeps its per-environment state in flat arrays and advances all
environments with one compiled call per step. Each environment is computed by
the same scalar routine in a fixed order, so the field an environment produces
does not depend on how many other environments share the batch or where it
sits in it.
"""

from __future__ import annotations

import json
import math
import statistics
import time
from dataclasses import asdict, dataclass, field

import numpy as np

from .baselines import CONTACT_PATCH, OBJECT_FRAME, FotsBatch, FotsParams, PenaltyParams, penalty_batch, twist_between
from .core import HydroParams, MarkerField, Pose, TactileGrid, stack_poses
from .dilation import dilation_vectors, penetration_weights, taxel_sdf_batch
from .geometry import SdfField, SurfaceSamples, elastomer_sdf
from .io import atomic_write_text
from .tracker import DEFAULT_MAX_SUBSTEP, TrackerBatch

MODELS = ("hydroshear", "fots_original", "fots_reimpl", "penalty")


class BatchSim:
    """``env_count`` environments sharing one indenter, surface sampling and grid.

    ``model`` picks the marker model: ``hydroshear`` (dilation plus tracked
    shear), ``fots_original`` and ``fots_reimpl`` (SE(2) marker model centered
    on the object origin or on the first contact patch) or ``penalty``.
    """

    def __init__(self, env_count: int, model: str, indenter: SdfField, grid: TactileGrid, *,
                 surface: SurfaceSamples | None = None, params: HydroParams | None = None,
                 fots_params: FotsParams | None = None, penalty_params: PenaltyParams | None = None,
                 max_substep: float = DEFAULT_MAX_SUBSTEP, gravity_xf: Pose | None = None, dt: float = 1.0 / 60.0):
        if model not in MODELS:
            raise ValueError(f"model must be one of {MODELS}, got {model!r}")
        if env_count < 1:
            raise ValueError("env_count must be positive")
        self.env_count = int(env_count)
        self.model = model
        self.indenter = indenter
        self.grid = grid
        self.qxy = np.ascontiguousarray(grid.xy(), dtype=np.float64)
        self.gravity_xf = gravity_xf
        self.dt = float(dt)
        self.params = params
        if model == "hydroshear":
            if surface is None or params is None:
                raise ValueError("hydroshear needs surface samples and HydroParams")
            self.tracker = TrackerBatch(self.env_count, surface, elastomer_sdf(grid), params, max_substep)
        elif model in ("fots_original", "fots_reimpl"):
            if fots_params is None:
                raise ValueError(f"{model} needs FotsParams")
            mode = OBJECT_FRAME if model == "fots_original" else CONTACT_PATCH
            self.fots = FotsBatch(self.env_count, indenter, grid, fots_params, mode)
        else:
            if penalty_params is None:
                raise ValueError("penalty needs PenaltyParams")
            self.penalty_params = penalty_params
            self._prev: list[Pose | None] = [None] * self.env_count

    # --- state ---

    def reset(self, envs=None) -> None:
        """Return the given environments (all when None) to their initial state."""
        if self.model == "hydroshear":
            self.tracker.reset(envs)
        elif self.model == "penalty":
            sel = range(self.env_count) if envs is None else np.atleast_1d(np.asarray(envs)).tolist()
            for b in sel:
                self._prev[b] = None
        else:
            self.fots.reset(envs)

    def _coerce(self, poses):
        if isinstance(poses, tuple) and len(poses) == 2 and not isinstance(poses[0], Pose):
            q = np.ascontiguousarray(poses[0], dtype=np.float64)
            t = np.ascontiguousarray(poses[1], dtype=np.float64)
            if q.shape != (self.env_count, 4) or t.shape != (self.env_count, 3):
                raise ValueError(f"expected ({self.env_count}, 4) quaternions and ({self.env_count}, 3) translations")
            return q, t, None
        poses = list(poses)
        if len(poses) != self.env_count:
            raise ValueError(f"got {len(poses)} poses for {self.env_count} environments")
        q, t = stack_poses(poses)
        return q, t, poses

    # --- stepping ---

    def step(self, poses) -> np.ndarray:
        """Advance every environment one step; returns (env_count, rows, cols, 2) displacements in meters.

        ``poses`` is either a sequence of :class:`Pose` or a pair of arrays
        ``(quats (B, 4), translations (B, 3))``.
        """
        q, t, plist = self._coerce(poses)
        if self.model == "hydroshear":
            out = self._step_hydro(q, t, plist)
        elif self.model == "penalty":
            out = self._step_penalty(q, t, plist)
        else:
            out = self.fots.step(q, t)
        return out.reshape(self.env_count, self.grid.rows, self.grid.cols, 2)

    def _step_hydro(self, q, t, plist):
        p = self.params
        self.tracker.step(q, t)
        w = penetration_weights(taxel_sdf_batch(self.grid, self.indenter, q, t))
        dil = dilation_vectors(self.qxy, w, np.broadcast_to(self.qxy, (self.env_count,) + self.qxy.shape), p.lambda_d)
        if self.gravity_xf is None:
            sh = self.tracker.shear(self.qxy, p.lambda_s)
        else:
            if plist is None:
                plist = [Pose(q[b], t[b]) for b in range(self.env_count)]
            gq, gt = stack_poses([self.gravity_xf @ pp for pp in plist])
            trial = self.tracker.copy()
            trial.step(gq, gt)
            sh = trial.shear(self.qxy, p.lambda_s)
        return dil + sh

    def _step_penalty(self, q, t, plist):
        if plist is None:
            plist = [Pose(q[b], t[b]) for b in range(self.env_count)]
        vel = np.zeros((self.env_count, 6))
        for b, pose in enumerate(plist):
            if self._prev[b] is not None:
                vel[b] = twist_between(self._prev[b], pose, self.dt)
            self._prev[b] = pose
        return penalty_batch(self.grid, self.indenter, q, t, vel, self.penalty_params)

    def batch_step(self, poses) -> list[MarkerField]:
        """Like :meth:`step` but returns one :class:`MarkerField` per environment."""
        out = self.step(poses)
        return [MarkerField(self.grid, out[b]) for b in range(self.env_count)]

    def run(self, quats: np.ndarray, trans: np.ndarray) -> np.ndarray:
        """Step through (T, B, 4) / (T, B, 3) pose arrays; returns (T, B, rows, cols, 2)."""
        return np.stack([self.step((quats[k], trans[k])) for k in range(len(quats))])


def batch_step(sim: BatchSim, poses) -> list[MarkerField]:
    return sim.batch_step(poses)


# --- benchmark ---------------------------------------------------------------


def press_slide_twist(env_count: int, steps: int, radius: float, seed: int = 0, depth: float = 1.2e-3,
                      slide: float = 3e-3, twist: float = 0.2) -> tuple[np.ndarray, np.ndarray]:
    """Synthetic (T, B, 4) quaternions and (T, B, 3) translations: approach, press, slide and twist.

    Each environment gets its own start position, slide direction and twist
    sign so lanes do not all do identical work.
    """
    rng = np.random.default_rng(seed)
    start = rng.uniform(-6e-3, 6e-3, (env_count, 2))
    ang = rng.uniform(0, 2 * math.pi, env_count)
    sign = rng.choice([-1.0, 1.0], env_count)
    n1 = max(steps // 4, 1)
    s = np.arange(steps, dtype=np.float64)
    press = np.clip((s + 1) / n1, 0, 1)
    move = np.clip((s + 1 - n1) / max(steps - n1, 1), 0, 1)
    z = radius + 1e-3 - press * (1e-3 + depth)
    tx = start[None, :, 0] + move[:, None] * slide * np.cos(ang)[None]
    ty = start[None, :, 1] + move[:, None] * slide * np.sin(ang)[None]
    trans = np.stack([tx, ty, np.broadcast_to(z[:, None], tx.shape)], -1)
    half = 0.5 * move[:, None] * twist * sign[None]
    quats = np.stack([np.cos(half), np.zeros_like(half), np.zeros_like(half), np.sin(half)], -1)
    return np.ascontiguousarray(quats), np.ascontiguousarray(trans)


@dataclass
class BenchRecord:
    model: str
    env_count: int
    steps: int
    mean_ms: float
    stdev_ms: float
    total_s: float


@dataclass
class BenchReport:
    records: list[BenchRecord]
    beta: dict[str, float] = field(default_factory=dict)
    threads: int = 1

    def table(self) -> str:
        lines = [f"{'model':<14} {'envs':>6} {'steps':>6} {'mean ms':>10} {'stdev ms':>10}"]
        for r in self.records:
            lines.append(f"{r.model:<14} {r.env_count:>6d} {r.steps:>6d} {r.mean_ms:>10.3f} {r.stdev_ms:>10.3f}")
        for m, b in self.beta.items():
            lines.append(f"scaling exponent {m}: beta = {b:.3f}")
        lines.append(f"threads: {self.threads}")
        return "\n".join(lines)

    def as_dict(self) -> dict:
        return {"records": [asdict(r) for r in self.records], "beta": dict(self.beta), "threads": self.threads}

    def write(self, path) -> None:
        atomic_write_text(path, json.dumps(self.as_dict(), indent=2) + "\n")


def scaling_exponent(env_counts, times) -> float:
    """Least-squares slope of log(time) against log(env_count)."""
    x = np.log(np.asarray(env_counts, dtype=np.float64))
    y = np.log(np.asarray(times, dtype=np.float64))
    if len(x) < 2:
        return math.nan
    return float(np.polyfit(x, y, 1)[0])


def time_steps(sim: BatchSim, quats: np.ndarray, trans: np.ndarray, warmup: int = 3) -> list[float]:
    """Per-step wall times in milliseconds, excluding the first ``warmup`` steps."""
    out = []
    for k in range(len(quats)):
        t0 = time.perf_counter()
        sim.step((quats[k], trans[k]))
        dt = (time.perf_counter() - t0) * 1e3
        if k >= warmup:
            out.append(dt)
    return out


def benchmark(make_sim, env_counts=(256, 512, 1024), steps: int = 40, warmup: int = 3, radius: float = 0.0175,
              models=None, seed: int = 0) -> BenchReport:
    """Time ``steps`` steps (after ``warmup`` untimed ones) for each model and environment count.

    ``make_sim(model, env_count)`` must return a fresh :class:`BatchSim`.
    """
    import numba

    models = list(models) if models is not None else ["hydroshear"]
    recs = []
    beta = {}
    for m in models:
        means = []
        for n in env_counts:
            sim = make_sim(m, int(n))
            q, t = press_slide_twist(int(n), steps + warmup, radius, seed)
            t0 = time.perf_counter()
            ms = time_steps(sim, q, t, warmup)
            total = time.perf_counter() - t0
            sd = statistics.stdev(ms) if len(ms) > 1 else 0.0
            recs.append(BenchRecord(m, int(n), len(ms), statistics.fmean(ms), sd, total))
            means.append(statistics.fmean(ms))
        if len(env_counts) > 1:
            beta[m] = scaling_exponent(env_counts, means)
    return BenchReport(recs, beta, numba.get_num_threads())


__all__ = [
    "BatchSim",
    "batch_step",
    "benchmark",
    "BenchReport",
    "BenchRecord",
    "scaling_exponent",
    "press_slide_twist",
    "time_steps",
    "MODELS",
]
