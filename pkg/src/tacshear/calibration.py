"""Staged parameter identification and field comparison metrics.

The four model parameters are fitted one at a time, each stage consuming the
values found by the previous ones:

1. ``lambda_d`` from press-only samples against the dilation term alone.
2. ``lambda_s`` from shear samples, with ``K = 1`` and a friction coefficient
   large enough that the cone never binds. Because ``K = 1`` gives the wrong
   magnitude, the observed shear residual (observation minus fitted dilation)
   is rescaled so its mean in-contact magnitude matches the simulated one.
3. ``K`` on the same samples without rescaling (friction still disabled).
4. ``mu`` from slip samples.

Each stage is a bounded scalar least-squares problem solved by a coarse
log-spaced scan followed by golden-section refinement.
"""

from __future__ import annotations

import json
import logging
import math
import warnings
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from . import _kernels
from .core import HydroParams, MarkerField, Pose, TactileGrid, stack_poses
from .dilation import dilation_vectors, penetration_weights, taxel_sdf_batch
from .geometry import SdfField, SurfaceSamples, elastomer_sdf
from .io import DataError, Trajectory, atomic_write_text, read_field, read_trajectory, write_field, write_trajectory
from .tracker import DEFAULT_MAX_SUBSTEP, TrackerBatch

log = logging.getLogger(__name__)

KINDS = ("dilation", "shear", "twist", "roll", "slip")
SHEAR_KINDS = ("shear", "twist", "roll")
FRICTIONLESS_MU = 1e5

DEFAULT_BRACKETS = {
    "lambda_d": (1e2, 1e7),
    "lambda_s": (1e2, 1e7),
    "K": (10.0, 1e7),
    "mu": (0.01, 5.0),
}

MANIFEST = "manifest.json"
DATASET_SCHEMA = "tacshear-dataset v1"


class CalibrationError(ValueError):
    """Raised when a stage cannot run on the given data."""


class DegenerateObjective(CalibrationError):
    pass


# --- data --------------------------------------------------------------------


@dataclass(frozen=True, eq=False)
class CalibrationSample:
    """A recorded pose sequence and the marker field observed at its last pose (pixels)."""

    trajectory: Trajectory
    observed: MarkerField
    kind: str
    name: str = ""

    def __post_init__(self):
        if self.kind not in KINDS:
            raise ValueError(f"unknown sample kind {self.kind!r}; expected one of {KINDS}")
        if len(self.trajectory) == 0:
            raise ValueError("empty trajectory")

    @property
    def final_pose(self) -> Pose:
        return self.trajectory.poses[-1]


@dataclass
class StageResult:
    value: float
    residual: float
    evaluations: int
    history: list[float]
    flags: tuple[str, ...] = ()
    endpoint_residuals: tuple[float, float] = (math.nan, math.nan)


@dataclass
class CalibrationResult:
    params: HydroParams
    per_stage_residuals: dict[str, float]
    iterations: dict[str, int]
    flags: dict[str, tuple[str, ...]] = field(default_factory=dict)
    stages: dict[str, StageResult] = field(default_factory=dict)

    @property
    def degenerate(self) -> bool:
        return any(f for f in self.flags.values())

    def report(self) -> dict:
        return {
            "residuals_px2": dict(self.per_stage_residuals),
            "evaluations": dict(self.iterations),
            "flags": {k: list(v) for k, v in self.flags.items()},
        }


# --- metrics -----------------------------------------------------------------


def _pixels(pred: MarkerField, truth: MarkerField) -> tuple[np.ndarray, np.ndarray]:
    truth._check(pred)
    return pred.to_pixels().flat(), truth.to_pixels().flat()


def rmse(pred: MarkerField, truth: MarkerField) -> float:
    """Root mean square per-taxel vector error in pixels."""
    a, b = _pixels(pred, truth)
    d = a - b
    return math.sqrt(float(np.mean(d[:, 0] * d[:, 0] + d[:, 1] * d[:, 1])))


@dataclass(frozen=True)
class CosineResult:
    value: float
    count: int

    @property
    def defined(self) -> bool:
        return self.count > 0

    def __float__(self):
        return self.value


def cosine_similarity(pred: MarkerField, truth: MarkerField, magnitude_floor: float = 0.3) -> CosineResult:
    """Mean per-taxel cosine over taxels where both vectors exceed ``magnitude_floor`` pixels.

    With no qualifying taxel the result has ``count == 0`` and value NaN.
    """
    a, b = _pixels(pred, truth)
    na = np.hypot(a[:, 0], a[:, 1])
    nb = np.hypot(b[:, 0], b[:, 1])
    keep = (na > magnitude_floor) & (nb > magnitude_floor)
    n = int(keep.sum())
    if n == 0:
        return CosineResult(math.nan, 0)
    cos = (a[keep, 0] * b[keep, 0] + a[keep, 1] * b[keep, 1]) / (na[keep] * nb[keep])
    return CosineResult(float(np.clip(np.mean(cos), -1.0, 1.0)), n)


# --- scalar solver -----------------------------------------------------------

GOLDEN = (math.sqrt(5.0) - 1.0) / 2.0


def golden_section(f, lo: float, hi: float, *, scan: int = 25, tol: float = 1e-7, flat_tol: float = 1e-12,
                   max_iter: int = 200) -> StageResult:
    """Minimize ``f`` on ``[lo, hi]`` in log coordinates.

    A log-spaced scan of ``scan`` points (endpoints included) locates the best
    cell; golden-section search then refines inside the two cells around it
    until the log-bracket is narrower than ``tol``. The returned residual is
    never worse than any evaluated point, so in particular it is no worse than
    either endpoint. A constant objective returns the geometric midpoint of
    the bracket with the ``flat`` flag.
    """
    if not (0 < lo < hi):
        raise ValueError("bracket must satisfy 0 < lo < hi")
    a, b = math.log(lo), math.log(hi)
    xs = np.linspace(a, b, max(scan, 3))
    fs = []
    history = []
    best = (math.inf, None)

    def ev(u):
        nonlocal best
        val = float(f(math.exp(u)))
        if not math.isfinite(val):
            raise CalibrationError(f"non-finite residual at {math.exp(u):g}")
        if val < best[0]:
            best = (val, u)
        history.append(best[0])
        return val

    for u in xs:
        fs.append(ev(u))
    fs = np.asarray(fs)
    ends = (float(fs[0]), float(fs[-1]))
    spread = float(fs.max() - fs.min())
    if spread <= flat_tol * max(1.0, abs(float(fs.min()))):
        mid = 0.5 * (a + b)
        val = ev(mid)
        return StageResult(math.exp(mid), val, len(history), history, ("flat",), ends)

    i = int(np.argmin(fs))
    u0, u1 = xs[max(i - 1, 0)], xs[min(i + 1, len(xs) - 1)]
    c = u1 - GOLDEN * (u1 - u0)
    d = u0 + GOLDEN * (u1 - u0)
    fc, fd = ev(c), ev(d)
    it = 0
    while (u1 - u0) > tol and it < max_iter:
        if fc <= fd:
            u1, d, fd = d, c, fc
            c = u1 - GOLDEN * (u1 - u0)
            fc = ev(c)
        else:
            u0, c, fc = c, d, fd
            d = u0 + GOLDEN * (u1 - u0)
            fd = ev(d)
        it += 1
    val, u = best
    flags = []
    if u - a <= 2 * tol:
        flags.append("at_lower_bound")
    elif b - u <= 2 * tol:
        flags.append("at_upper_bound")
    return StageResult(math.exp(u), val, len(history), history, tuple(flags), ends)


def grid_search(f, lo: float, hi: float, points: int = 200) -> tuple[float, float]:
    """Brute-force minimum of ``f`` over ``points`` log-spaced values (used as a check on the solver)."""
    xs = np.exp(np.linspace(math.log(lo), math.log(hi), points))
    vals = np.array([float(f(x)) for x in xs])
    i = int(np.argmin(vals))
    return float(xs[i]), float(vals[i])


# --- simulation of samples ---------------------------------------------------


@dataclass
class CalibrationSetup:
    """Everything fixed during calibration: geometry, sampling and solver settings."""

    indenter: SdfField
    surface: SurfaceSamples
    grid: TactileGrid
    max_substep: float = DEFAULT_MAX_SUBSTEP
    brackets: dict = field(default_factory=lambda: dict(DEFAULT_BRACKETS))
    scan: int = 25
    tol: float = 1e-7

    def __post_init__(self):
        self._cache = {}
        self.elastomer = elastomer_sdf(self.grid)
        self.qxy = np.ascontiguousarray(self.grid.xy(), dtype=np.float64)

    def _final_poses(self, samples):
        return stack_poses([s.final_pose for s in samples])

    def dilation_basis(self, samples) -> np.ndarray:
        """(S, N) penetration weights at each sample's last pose."""
        q, t = self._final_poses(samples)
        return penetration_weights(taxel_sdf_batch(self.grid, self.indenter, q, t))

    def dilation(self, samples, lambda_d: float, weights=None) -> np.ndarray:
        w = self.dilation_basis(samples) if weights is None else weights
        return dilation_vectors(self.qxy, w, np.broadcast_to(self.qxy, (len(w),) + self.qxy.shape), lambda_d)

    def shear_state(self, samples, E: float, K: float, mu: float, mu_hat: float):
        """Run every sample's trajectory as one batch; returns Gaussian-sum inputs and clip counts."""
        key = (tuple(id(s.trajectory) for s in samples), E, K, mu, mu_hat)
        hit = self._cache.get(key)
        if hit is not None:
            return hit[0]
        params = HydroParams(1.0, 1.0, K, mu, E=E, mu_hat=mu_hat)
        S = len(samples)
        tb = TrackerBatch(S, self.surface, self.elastomer, params, self.max_substep)
        L = max(len(s.trajectory) for s in samples)
        q = np.tile([1.0, 0.0, 0.0, 0.0], (S, 1))
        t = np.zeros((S, 3))
        clips = np.zeros(S, np.int64)
        for k in range(L):
            active = np.zeros(S, bool)
            for i, s in enumerate(samples):
                j = k - (L - len(s.trajectory))
                if j >= 0:
                    p = s.trajectory.poses[j]
                    q[i] = p.quat
                    t[i] = p.translation
                    active[i] = True
            tb.step(q, t, active)
            cone = (tb.flags & _kernels.FLAG_FORCE_CLIP) != 0
            clips += np.count_nonzero(cone & ((tb.flags & _kernels.FLAG_NORMAL_CLAMP) == 0), axis=1)
        out = (tb.shear_inputs(), clips)
        if len(self._cache) > 64:
            self._cache.clear()
        # the sample list is kept alive with the entry so the ids in the key stay unique
        self._cache[key] = (out, list(samples))
        return out

    def shear(self, inputs, lambda_s: float) -> np.ndarray:
        w, mx, my, cx, cy = inputs
        out = np.zeros((len(w), len(self.qxy), 2))
        _kernels.gauss_sum(self.qxy, w, mx, my, cx, cy, _kernels.MODE_VECTOR, float(lambda_s), out)
        return out


def _observed(samples) -> tuple[np.ndarray, np.ndarray]:
    """(S, N, 2) observations in pixels and the (S,) pixel scales."""
    ys = np.stack([s.observed.to_pixels().flat() for s in samples])
    scales = np.array([s.observed.pixel_scale for s in samples])
    return ys, scales


def _check(samples, grid: TactileGrid, kinds, stage: str):
    if len(samples) == 0:
        raise CalibrationError(f"stage {stage!r} needs at least one sample of kind {kinds}")
    for s in samples:
        if not grid.compatible(s.observed.grid):
            raise CalibrationError(f"sample {s.name!r}: observed grid does not match the configured grid")


def _sq(r: np.ndarray) -> float:
    return float(np.sum(r * r))


def _in_contact_mean(v: np.ndarray, mask: np.ndarray) -> float:
    if not mask.any():
        return 0.0
    m = v[mask]
    return float(np.mean(np.hypot(m[:, 0], m[:, 1])))


# --- stages ------------------------------------------------------------------


def calibrate_lambda_d(setup: CalibrationSetup, samples) -> StageResult:
    samples = list(samples)
    _check(samples, setup.grid, ("dilation",), "lambda_d")
    y, scale = _observed(samples)
    w = setup.dilation_basis(samples)

    def obj(lam):
        return _sq(y - setup.dilation(samples, lam, w) * scale[:, None, None])

    return golden_section(obj, *setup.brackets["lambda_d"], scan=setup.scan, tol=setup.tol)


def rescale_factor(simulated: np.ndarray, observed: np.ndarray, mask: np.ndarray) -> float:
    """Ratio of mean in-contact magnitudes, simulated over observed."""
    mo = _in_contact_mean(observed, mask)
    ms = _in_contact_mean(simulated, mask)
    if mo == 0.0 or ms == 0.0:
        raise DegenerateObjective("no in-contact shear signal to rescale")
    return ms / mo


def calibrate_lambda_s(setup: CalibrationSetup, samples, lambda_d: float) -> StageResult:
    samples = list(samples)
    _check(samples, setup.grid, SHEAR_KINDS, "lambda_s")
    y, scale = _observed(samples)
    w = setup.dilation_basis(samples)
    mask = w > 0
    if not mask.any():
        raise DegenerateObjective("stage 'lambda_s': no sample has in-contact taxels")
    resid = y - setup.dilation(samples, lambda_d, w) * scale[:, None, None]
    inputs, clips = setup.shear_state(samples, 1.0, 1.0, FRICTIONLESS_MU, FRICTIONLESS_MU)

    def obj(lam):
        sim = setup.shear(inputs, lam) * scale[:, None, None]
        total = 0.0
        for i in range(len(samples)):
            if not mask[i].any():
                continue
            try:
                f = rescale_factor(sim[i], resid[i], mask[i])
            except DegenerateObjective:
                f = 1.0
            # measured in observed units so shrinking both fields cannot lower the score
            total += _sq(resid[i] - sim[i] / f)
        return total

    res = golden_section(obj, *setup.brackets["lambda_s"], scan=setup.scan, tol=setup.tol)
    if clips.any():
        res.flags = res.flags + ("clip_active",)
    return res


def calibrate_K(setup: CalibrationSetup, samples, lambda_d: float, lambda_s: float) -> StageResult:
    samples = list(samples)
    _check(samples, setup.grid, SHEAR_KINDS, "K")
    y, scale = _observed(samples)
    resid = y - setup.dilation(samples, lambda_d) * scale[:, None, None]

    def obj(K):
        inputs, _ = setup.shear_state(samples, K, K, FRICTIONLESS_MU, FRICTIONLESS_MU)
        return _sq(resid - setup.shear(inputs, lambda_s) * scale[:, None, None])

    return golden_section(obj, *setup.brackets["K"], scan=setup.scan, tol=setup.tol)


def calibrate_mu(setup: CalibrationSetup, samples, lambda_d: float, lambda_s: float, K: float) -> StageResult:
    samples = list(samples)
    _check(samples, setup.grid, ("slip",), "mu")
    unident = False
    if not any(s.kind == "slip" for s in samples):
        warnings.warn("friction stage received no slip samples; the coefficient is not identifiable", stacklevel=2)
        unident = True
    y, scale = _observed(samples)
    resid = y - setup.dilation(samples, lambda_d) * scale[:, None, None]

    def obj(mu):
        inputs, _ = setup.shear_state(samples, K, K, mu, mu)
        return _sq(resid - setup.shear(inputs, lambda_s) * scale[:, None, None])

    res = golden_section(obj, *setup.brackets["mu"], scan=setup.scan, tol=setup.tol)
    _, clips = setup.shear_state(samples, K, K, res.value, res.value)
    if not clips.any():
        unident = True
    if unident:
        res.flags = res.flags + ("unidentifiable",)
    return res


def calibrate(setup: CalibrationSetup, samples, *, refine_2d: bool = False) -> CalibrationResult:
    """Run the four stages in order on a mixed list of samples."""
    samples = list(samples)
    by = {k: [s for s in samples if s.kind == k] for k in KINDS}
    shear = [s for s in samples if s.kind in SHEAR_KINDS]
    for stage, group, kinds in (("lambda_d", by["dilation"], "dilation"), ("lambda_s/K", shear, "shear/twist/roll"),
                                ("mu", by["slip"], "slip")):
        if not group:
            raise CalibrationError(f"no samples of kind {kinds}; stage {stage!r} cannot run")
    st = {}
    st["lambda_d"] = calibrate_lambda_d(setup, by["dilation"])
    st["lambda_s"] = calibrate_lambda_s(setup, shear, st["lambda_d"].value)
    st["K"] = calibrate_K(setup, shear, st["lambda_d"].value, st["lambda_s"].value)
    if refine_2d:
        lam, K, r = refine_lambda_s_K(setup, shear, st["lambda_d"].value, st["lambda_s"].value, st["K"].value)
        if r < st["K"].residual:
            st["lambda_s"].value, st["K"].value, st["K"].residual = lam, K, r
    st["mu"] = calibrate_mu(setup, by["slip"], st["lambda_d"].value, st["lambda_s"].value, st["K"].value)
    params = HydroParams(st["lambda_d"].value, st["lambda_s"].value, st["K"].value, st["mu"].value)
    return CalibrationResult(
        params,
        {k: v.residual for k, v in st.items()},
        {k: v.evaluations for k, v in st.items()},
        {k: v.flags for k, v in st.items()},
        st,
    )


def refine_lambda_s_K(setup: CalibrationSetup, samples, lambda_d: float, lambda_s: float, K: float,
                      span: float = 2.0, points: int = 9) -> tuple[float, float, float]:
    """Optional joint grid refinement of (lambda_s, K) around a staged estimate, on raw magnitudes."""
    y, scale = _observed(samples)
    resid = y - setup.dilation(samples, lambda_d) * scale[:, None, None]
    best = (math.inf, lambda_s, K)
    for Kc in K * np.exp(np.linspace(-math.log(span), math.log(span), points)):
        inputs, _ = setup.shear_state(samples, Kc, Kc, FRICTIONLESS_MU, FRICTIONLESS_MU)
        for lc in lambda_s * np.exp(np.linspace(-math.log(span), math.log(span), points)):
            r = _sq(resid - setup.shear(inputs, lc) * scale[:, None, None])
            if r < best[0]:
                best = (r, float(lc), float(Kc))
    return best[1], best[2], best[0]


# --- comparison models --------------------------------------------------------


def _end_aligned(samples):
    """Yield (active mask, quats, translations) per step with every trajectory ending on the last step."""
    S = len(samples)
    L = max(len(s.trajectory) for s in samples)
    q = np.tile([1.0, 0.0, 0.0, 0.0], (S, 1))
    t = np.zeros((S, 3))
    for k in range(L):
        active = np.zeros(S, bool)
        for i, s in enumerate(samples):
            j = k - (L - len(s.trajectory))
            if j >= 0:
                p = s.trajectory.poses[j]
                q[i] = p.quat
                t[i] = p.translation
                active[i] = True
        yield active, q, t


def fots_final_fields(setup: CalibrationSetup, samples, params, center_mode: str) -> np.ndarray:
    """(S, N, 2) SE(2) marker-model displacement (meters) at each sample's last pose."""
    from .baselines import FotsBatch

    fb = FotsBatch(len(samples), setup.indenter, setup.grid, params, center_mode)
    out = None
    for active, q, t in _end_aligned(samples):
        step = fb.step(q, t, active)
        out = step if out is None else np.where(active[:, None, None], step, out)
    return out


def calibrate_fots(setup: CalibrationSetup, samples, shear_max: float, twist_max: float,
                   center_mode: str = "initial_contact_patch") -> dict[str, StageResult]:
    """Fit the SE(2) model's three length scales one at a time (dilation, translation, twist samples).

    The clamps ``shear_max`` and ``twist_max`` are taken as given.
    """
    from .baselines import FotsParams

    samples = list(samples)
    dil = [s for s in samples if s.kind == "dilation"]
    sh = [s for s in samples if s.kind in ("shear", "slip")]
    tw = [s for s in samples if s.kind == "twist"]
    out = {"lambda_d": calibrate_lambda_d(setup, dil)}
    ld = out["lambda_d"].value
    lo, hi = setup.brackets["lambda_s"]

    def fit(group, name, make):
        _check(group, setup.grid, (name,), name)
        y, scale = _observed(group)

        def obj(lam):
            return _sq(y - fots_final_fields(setup, group, make(lam), center_mode) * scale[:, None, None])

        return golden_section(obj, lo, hi, scan=setup.scan, tol=setup.tol)

    out["lambda_s"] = fit(sh, "lambda_s", lambda lam: FotsParams(ld, lam, lam, shear_max, twist_max))
    ls = out["lambda_s"].value
    if tw:
        out["lambda_t"] = fit(tw, "lambda_t", lambda lam: FotsParams(ld, ls, lam, shear_max, twist_max))
    else:
        out["lambda_t"] = StageResult(ls, math.nan, 0, [], ("no_twist_samples",))
    return out


def _final_velocities(samples) -> np.ndarray:
    from .baselines import twist_between

    v = np.zeros((len(samples), 6))
    for i, s in enumerate(samples):
        tr = s.trajectory
        if len(tr) > 1:
            v[i] = twist_between(tr.poses[-2], tr.poses[-1], float(tr.times[-1] - tr.times[-2]))
    return v


def calibrate_penalty(setup: CalibrationSetup, samples, k_n: float = 1.0) -> dict[str, StageResult]:
    """Fit the penalty comparator's tangential gain on shear samples, then its friction on slip samples."""
    from .baselines import PenaltyParams, penalty_batch

    samples = list(samples)
    sh = [s for s in samples if s.kind in SHEAR_KINDS]
    sl = [s for s in samples if s.kind == "slip"]
    _check(sh, setup.grid, SHEAR_KINDS, "k_t")
    _check(sl, setup.grid, ("slip",), "penalty mu")

    def fit(group, make, bracket):
        y, scale = _observed(group)
        q, t = setup._final_poses(group)
        vel = _final_velocities(group)

        def obj(x):
            return _sq(y - penalty_batch(setup.grid, setup.indenter, q, t, vel, make(x)) * scale[:, None, None])

        return golden_section(obj, *bracket, scan=setup.scan, tol=setup.tol)

    out = {"k_t": fit(sh, lambda k: PenaltyParams(k_n, k, FRICTIONLESS_MU), (1e-6, 1e3))}
    kt = out["k_t"].value
    out["mu"] = fit(sl, lambda m: PenaltyParams(k_n, kt, m), setup.brackets["mu"])
    return out


# --- synthetic data ----------------------------------------------------------


def simulate_samples(setup: CalibrationSetup, trajectories, kinds, params: HydroParams,
                     dilation_only=None) -> list[CalibrationSample]:
    """Observed fields (pixels) produced by the model itself for each trajectory."""
    trajectories = list(trajectories)
    kinds = list(kinds)
    shells = [CalibrationSample(tr, MarkerField.zeros(setup.grid, "px"), k) for tr, k in zip(trajectories, kinds)]
    dil = setup.dilation(shells, params.lambda_d)
    inputs, _ = setup.shear_state(shells, params.E, params.K, params.mu, params.mu_hat)
    sh = setup.shear(inputs, params.lambda_s)
    out = []
    for i, (tr, k) in enumerate(zip(trajectories, kinds)):
        only_d = (k == "dilation") if dilation_only is None else dilation_only
        v = dil[i] if only_d else dil[i] + sh[i]
        f = MarkerField(setup.grid, v.reshape(setup.grid.rows, setup.grid.cols, 2)).to_pixels()
        out.append(CalibrationSample(tr, f, k, name=f"{k}_{i:03d}"))
    return out


def _line(p0: Pose, p1: Pose, n: int, t0: float, dt: float):
    return [(t0 + dt * (i + 1), p0.interpolate(p1, (i + 1) / n)) for i in range(n)]


def press_trajectory(xy, depth: float, radius: float, steps: int = 6, dt: float = 0.05, yaw: float = 0.0):
    """Approach from 1 mm above the surface down to ``depth`` of penetration at ``xy``."""
    top = Pose.from_axis_angle([0, 0, 1], yaw, [xy[0], xy[1], radius + 1e-3])
    bottom = Pose.from_axis_angle([0, 0, 1], yaw, [xy[0], xy[1], radius - depth])
    pts = [(0.0, top)] + _line(top, bottom, steps, 0.0, dt)
    return pts


def motion_trajectory(xy, depth: float, radius: float, shift=(0.0, 0.0), twist: float = 0.0, roll: float = 0.0,
                      press_steps: int = 6, move_steps: int = 12, dt: float = 0.05) -> Trajectory:
    """Press, then translate by ``shift``, rotate by ``twist`` about z and tilt by ``roll`` about x."""
    pts = press_trajectory(xy, depth, radius, press_steps, dt)
    start = pts[-1][1]
    c = start.translation
    R = Pose.from_axis_angle([0, 0, 1], twist) @ Pose.from_axis_angle([1, 0, 0], roll)
    end = Pose(R.quat, [c[0] + shift[0], c[1] + shift[1], c[2]])
    pts += _line(start, end, move_steps, pts[-1][0], dt)
    return Trajectory(np.array([p[0] for p in pts]), [p[1] for p in pts])


def synthetic_trajectories(radius: float, seed: int = 0, n_dilation: int = 10, n_shear: int = 6, n_twist: int = 3,
                           n_slip: int = 4, extent: float = 0.008):
    """Random press, shear, twist and slip motions for a round indenter of ``radius`` meters."""
    rng = np.random.default_rng(seed)
    trajs, kinds = [], []

    def pos():
        return rng.uniform(-extent, extent, 2)

    for _ in range(n_dilation):
        pts = press_trajectory(pos(), rng.uniform(5e-4, 1.5e-3), radius)
        trajs.append(Trajectory(np.array([p[0] for p in pts]), [p[1] for p in pts]))
        kinds.append("dilation")
    for _ in range(n_shear):
        ang = rng.uniform(0, 2 * math.pi)
        mag = rng.uniform(2e-5, 5e-5)
        trajs.append(motion_trajectory(pos(), rng.uniform(1e-3, 1.5e-3), radius,
                                       shift=(mag * math.cos(ang), mag * math.sin(ang))))
        kinds.append("shear")
    for _ in range(n_twist):
        trajs.append(motion_trajectory(pos(), rng.uniform(1e-3, 1.5e-3), radius, twist=rng.uniform(-0.005, 0.005)))
        kinds.append("twist")
    for _ in range(n_slip):
        ang = rng.uniform(0, 2 * math.pi)
        mag = rng.uniform(2e-3, 4e-3)
        trajs.append(motion_trajectory(pos(), rng.uniform(8e-4, 1.5e-3), radius,
                                       shift=(mag * math.cos(ang), mag * math.sin(ang)), move_steps=20))
        kinds.append("slip")
    return trajs, kinds


def make_synthetic_dataset(setup: CalibrationSetup, truth: HydroParams, radius: float, seed: int = 0,
                           **counts) -> list[CalibrationSample]:
    """Synthetic calibration set generated by the model with parameters ``truth``.

    Press samples carry the dilation term only, matching what the first stage
    fits; every other sample carries the full field.
    """
    trajs, kinds = synthetic_trajectories(radius, seed, **counts)
    return simulate_samples(setup, trajs, kinds, truth)


# --- dataset files -----------------------------------------------------------


def write_dataset(directory, samples) -> None:
    """Write one trajectory file and one field file per sample plus a JSON manifest."""
    d = Path(directory)
    d.mkdir(parents=True, exist_ok=True)
    entries = []
    for i, s in enumerate(samples):
        name = s.name or f"{s.kind}_{i:03d}"
        write_trajectory(d / f"{name}.traj", s.trajectory)
        write_field(d / f"{name}.field", s.observed)
        entries.append({"name": name, "kind": s.kind, "trajectory": f"{name}.traj", "observed": f"{name}.field"})
    atomic_write_text(d / MANIFEST, json.dumps({"schema": DATASET_SCHEMA, "samples": entries}, indent=2) + "\n")


def read_dataset(directory) -> list[CalibrationSample]:
    d = Path(directory)
    m = d / MANIFEST
    if not m.exists():
        raise DataError(f"{d}: no {MANIFEST} found")
    try:
        doc = json.loads(m.read_text())
    except json.JSONDecodeError as e:
        raise DataError(f"{m}:{e.lineno}: {e.msg}") from None
    if doc.get("schema") != DATASET_SCHEMA:
        raise DataError(f"{m}: unsupported schema {doc.get('schema')!r}")
    out = []
    for k, e in enumerate(doc.get("samples", [])):
        try:
            out.append(CalibrationSample(read_trajectory(d / e["trajectory"]), read_field(d / e["observed"]),
                                         e["kind"], e.get("name", "")))
        except KeyError as err:
            raise DataError(f"{m}: sample {k} is missing {err}") from None
        except ValueError as err:
            if isinstance(err, DataError):
                raise
            raise DataError(f"{m}: sample {k}: {err}") from None
    return out


__all__ = [
    "CalibrationSample",
    "CalibrationResult",
    "CalibrationSetup",
    "CalibrationError",
    "DegenerateObjective",
    "StageResult",
    "CosineResult",
    "rmse",
    "cosine_similarity",
    "golden_section",
    "grid_search",
    "calibrate",
    "calibrate_lambda_d",
    "calibrate_lambda_s",
    "calibrate_K",
    "calibrate_mu",
    "rescale_factor",
    "refine_lambda_s_K",
    "calibrate_fots",
    "calibrate_penalty",
    "fots_final_fields",
    "make_synthetic_dataset",
    "simulate_samples",
    "synthetic_trajectories",
    "motion_trajectory",
    "press_trajectory",
    "write_dataset",
    "read_dataset",
]
