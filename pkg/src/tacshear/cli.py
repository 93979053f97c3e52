"""Command-line interface.

Exit codes: 0 success, 1 usage error, 2 data error (bad or missing input),
3 numerical degeneracy (a calibration stage could not identify its value).
"""

from __future__ import annotations

import argparse
import json
import logging
import math
import os
import sys
import warnings
from pathlib import Path

import numpy as np

from .core import MarkerField
from .io import (
    DataError,
    ScenarioConfig,
    atomic_write_text,
    read_field,
    read_fields_binary,
    read_params,
    read_trajectory,
    write_field,
    write_fields_binary,
    write_params,
    write_samples,
)

EXIT_OK = 0
EXIT_USAGE = 1
EXIT_DATA = 2
EXIT_DEGENERATE = 3

CONFIG_ENV = "TACSHEAR_CONFIG"

log = logging.getLogger("tacshear")


class UsageError(Exception):
    pass


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        self.print_usage(sys.stderr)
        self.exit(EXIT_USAGE, f"{self.prog}: error: {message}\n")


def _config(args) -> ScenarioConfig:
    path = args.config or os.environ.get(CONFIG_ENV)
    if not path:
        raise UsageError(f"no config given (use --config or set {CONFIG_ENV})")
    if not Path(path).exists():
        raise DataError(f"config file {path!r} does not exist")
    return ScenarioConfig.load(path)


def _fots_params(cfg: ScenarioConfig):
    from .baselines import FotsParams

    if not cfg.fots:
        raise DataError("config needs a 'fots' section for the SE(2) marker models")
    try:
        return FotsParams(**cfg.fots)
    except (TypeError, ValueError) as e:
        raise DataError(f"fots section: {e}") from None


def _penalty_params(cfg: ScenarioConfig):
    from .baselines import PenaltyParams

    if not cfg.penalty:
        raise DataError("config needs a 'penalty' section for the penalty model")
    try:
        return PenaltyParams(**cfg.penalty)
    except (TypeError, ValueError) as e:
        raise DataError(f"penalty section: {e}") from None


def build_sim(cfg: ScenarioConfig, env_count: int = 1, model: str | None = None):
    """A :class:`~tacshear.batch.BatchSim` described by the config."""
    from .batch import BatchSim

    model = model or cfg.model
    indenter = cfg.indenter_sdf()
    grid = cfg.tactile_grid()
    kw = {"max_substep": cfg.max_substep, "gravity_xf": cfg.gravity_pose()}
    if model == "hydroshear":
        params = cfg.hydro_params()
        if params is None:
            raise DataError("hydroshear needs 'params' or 'params_path' in the config")
        kw.update(surface=cfg.surface_samples(indenter), params=params)
    elif model in ("fots_original", "fots_reimpl"):
        kw["fots_params"] = _fots_params(cfg)
    else:
        kw["penalty_params"] = _penalty_params(cfg)
    return BatchSim(env_count, model, indenter, grid, **kw)


# --- commands ----------------------------------------------------------------


def cmd_simulate(args) -> int:
    cfg = _config(args)
    traj = read_trajectory(args.trajectory)
    sim = build_sim(cfg)
    if sim.model == "penalty" and len(traj) > 1:
        sim.dt = float(np.min(np.diff(traj.times)))
    fields = []
    for k, pose in enumerate(traj.poses):
        if sim.model == "penalty" and k > 0:
            sim.dt = float(traj.times[k] - traj.times[k - 1])
        out = sim.step([pose])
        f = MarkerField(sim.grid, out[0])
        fields.append(f.to_unit(args.unit))
    out = Path(args.out)
    if args.binary:
        write_fields_binary(out, fields[-1:] if args.final_only else fields)
    elif args.final_only:
        write_field(out, fields[-1], {"time": repr(float(traj.times[-1])), "model": sim.model})
    else:
        out.mkdir(parents=True, exist_ok=True)
        for k, f in enumerate(fields):
            write_field(out / f"step_{k:05d}.field", f, {"time": repr(float(traj.times[k])), "model": sim.model})
    print(f"wrote {1 if args.final_only else len(fields)} field(s) to {out}")
    return EXIT_OK


def _radius(indenter) -> float:
    lo, _ = indenter.bounds()
    return float(-lo[2])


def cmd_calibrate(args) -> int:
    from .calibration import CalibrationError, CalibrationSetup, DegenerateObjective, calibrate, read_dataset

    cfg = _config(args)
    d = Path(args.dataset)
    if not d.is_dir():
        raise DataError(f"dataset directory {str(d)!r} does not exist")
    samples = read_dataset(d)
    if not samples:
        raise DataError(f"dataset {str(d)!r} contains no samples")
    indenter = cfg.indenter_sdf()
    setup = CalibrationSetup(indenter, cfg.surface_samples(indenter), cfg.tactile_grid(), cfg.max_substep)
    try:
        res = calibrate(setup, samples, refine_2d=args.refine_2d)
    except DegenerateObjective as e:
        print(f"error: {e}", file=sys.stderr)
        return EXIT_DEGENERATE
    except CalibrationError as e:
        raise DataError(str(e)) from None
    write_params(args.out, res.params, res.report())
    for stage, r in res.per_stage_residuals.items():
        val = getattr(res.params, stage)
        fl = ",".join(res.flags.get(stage, ())) or "-"
        print(f"{stage:<9} {val:.6g}  residual {r:.6g} px^2  evaluations {res.iterations[stage]}  flags {fl}")
    bad = {"flat", "unidentifiable", "at_lower_bound", "at_upper_bound"}
    if any(bad & set(v) for v in res.flags.values()):
        print("warning: at least one stage is degenerate; see flags", file=sys.stderr)
        return EXIT_DEGENERATE
    return EXIT_OK


def cmd_make_dataset(args) -> int:
    from .calibration import CalibrationSetup, make_synthetic_dataset, write_dataset

    cfg = _config(args)
    truth = read_params(args.truth)
    indenter = cfg.indenter_sdf()
    setup = CalibrationSetup(indenter, cfg.surface_samples(indenter), cfg.tactile_grid(), cfg.max_substep)
    samples = make_synthetic_dataset(setup, truth, _radius(indenter), seed=args.seed)
    write_dataset(args.out, samples)
    print(f"wrote {len(samples)} samples to {args.out}")
    return EXIT_OK


def _load_fields(path: Path) -> dict[str, MarkerField]:
    if path.is_dir():
        files = sorted(p for p in path.iterdir() if p.suffix == ".field")
        return {p.name: read_field(p) for p in files}
    if path.suffix == ".tsfb":
        return {f"{path.stem}[{i}]": f for i, f in enumerate(read_fields_binary(path))}
    return {path.name: read_field(path)}


def _group(name: str) -> str:
    stem = name.split(".")[0]
    return stem.split("_")[0] if "_" in stem else "all"


def compare_fields(pairs, floor: float = 0.3) -> dict:
    """Metrics per pair, per name-prefix group and over everything."""
    from .calibration import cosine_similarity, rmse

    rows = []
    groups: dict[str, list] = {}
    for name, pred, truth in pairs:
        cs = cosine_similarity(pred, truth, floor)
        row = {"name": name, "rmse_px": rmse(pred, truth), "cs": cs.value if cs.defined else None,
               "cs_taxels": cs.count}
        rows.append(row)
        groups.setdefault(_group(name), []).append((pred, truth))

    def pooled(items):
        a = np.concatenate([p.to_pixels().flat() for p, _ in items])
        b = np.concatenate([t.to_pixels().flat() for _, t in items])
        d = a - b
        r = math.sqrt(float(np.mean(np.sum(d * d, axis=1))))
        na, nb = np.hypot(*a.T), np.hypot(*b.T)
        keep = (na > floor) & (nb > floor)
        cs = float(np.mean(np.sum(a[keep] * b[keep], axis=1) / (na[keep] * nb[keep]))) if keep.any() else None
        return {"rmse_px": r, "cs": cs, "cs_taxels": int(keep.sum()), "pairs": len(items)}

    all_items = [it for v in groups.values() for it in v]
    return {"pairs": rows, "groups": {k: pooled(v) for k, v in sorted(groups.items())}, "overall": pooled(all_items)}


def plot_fields(path: Path, pred: MarkerField, truth: MarkerField, title: str = "") -> None:
    """Quiver plot of both fields (pixels) plus the plotted numbers as a text table."""
    import matplotlib

    matplotlib.use("Agg")
    import matplotlib.pyplot as plt

    xy = pred.grid.xy() * 1e3
    a, b = pred.to_pixels().flat(), truth.to_pixels().flat()
    peak = float(max(np.abs(a).max(), np.abs(b).max()))
    # a shared arrow scale keeps both fields comparable; all-zero fields get a nominal one
    scale = peak * 10.0 if peak > 0 else 1.0
    fig, ax = plt.subplots(figsize=(5, 4))
    ax.quiver(xy[:, 0], xy[:, 1], b[:, 0], b[:, 1], color="0.5", angles="xy", scale=scale, label="truth")
    ax.quiver(xy[:, 0], xy[:, 1], a[:, 0], a[:, 1], color="tab:red", angles="xy", scale=scale, label="pred")
    ax.set_aspect("equal")
    ax.set_xlabel("x [mm]")
    ax.set_ylabel("y [mm]")
    ax.set_title(title)
    ax.legend(loc="upper right", fontsize=7)
    fig.tight_layout()
    path.parent.mkdir(parents=True, exist_ok=True)
    fig.savefig(path, dpi=120)
    plt.close(fig)
    lines = ["x_mm y_mm pred_dx_px pred_dy_px truth_dx_px truth_dy_px"]
    lines += [" ".join(repr(float(v)) for v in (*p, *u, *w)) for p, u, w in zip(xy, a, b)]
    atomic_write_text(path.with_suffix(".txt"), "\n".join(lines) + "\n")


def cmd_compare(args) -> int:
    pred = _load_fields(Path(args.pred))
    truth = _load_fields(Path(args.truth))
    if len(pred) == 1 and len(truth) == 1:
        pairs = [(next(iter(truth)), next(iter(pred.values())), next(iter(truth.values())))]
    else:
        missing = sorted(set(truth) - set(pred))
        if missing:
            raise DataError(f"no prediction for {missing[:5]}")
        pairs = [(k, pred[k], truth[k]) for k in sorted(truth)]
    for name, p, t in pairs:
        if not p.grid.compatible(t.grid):
            raise DataError(f"{name}: prediction and truth grids differ")
    rep = compare_fields(pairs, args.floor)
    for r in rep["pairs"]:
        cs = "undefined" if r["cs"] is None else f"{r['cs']:.4f}"
        print(f"{r['name']:<30} RMSE {r['rmse_px']:.4f} px  CS {cs}")
    for g, r in rep["groups"].items():
        cs = "undefined" if r["cs"] is None else f"{r['cs']:.4f}"
        print(f"group {g:<24} RMSE {r['rmse_px']:.4f} px  CS {cs}  ({r['pairs']} pairs)")
    o = rep["overall"]
    cs = "undefined" if o["cs"] is None else f"{o['cs']:.4f}"
    print(f"{'overall':<30} RMSE {o['rmse_px']:.4f} px  CS {cs}")
    if args.json:
        atomic_write_text(args.json, json.dumps(rep, indent=2) + "\n")
    if args.plot:
        for name, p, t in pairs:
            plot_fields(Path(args.plot) / f"{Path(name).stem}.png", p, t, name)
    return EXIT_OK


def cmd_bench(args) -> int:
    from .batch import benchmark

    cfg = _config(args)
    models = args.models or [cfg.model]
    cache = {}

    def make(model, n):
        # geometry and surface sampling are shared across sizes; only the state is rebuilt
        if model not in cache:
            cache[model] = build_sim(cfg, 1, model)
        s = cache[model]
        from .batch import BatchSim

        return BatchSim(n, model, s.indenter, s.grid, surface=getattr(getattr(s, "tracker", None), "surface", None),
                        params=s.params, fots_params=getattr(getattr(s, "fots", None), "params", None),
                        penalty_params=getattr(s, "penalty_params", None), gravity_xf=s.gravity_xf,
                        max_substep=cfg.max_substep)

    rep = benchmark(make, args.env_counts, args.steps, args.warmup, _radius(cfg.indenter_sdf()), models, args.seed)
    print(rep.table())
    if args.records:
        rep.write(args.records)
    return EXIT_OK


def cmd_sample_surface(args) -> int:
    from .geometry import sample_surface, sdf_from_spec

    if args.shape:
        try:
            spec = json.loads(args.shape)
        except json.JSONDecodeError as e:
            raise DataError(f"--shape is not valid JSON: {e.msg}") from None
        field = sdf_from_spec(spec)
        count, seed = args.count or 2048, args.seed if args.seed is not None else 0
    else:
        cfg = _config(args)
        field = cfg.indenter_sdf()
        count = args.count or cfg.samples
        seed = args.seed if args.seed is not None else cfg.seed
    s = sample_surface(field, count, seed)
    write_samples(args.out, s)
    print(f"wrote {len(s)} surface samples to {args.out}")
    return EXIT_OK


# --- parser ------------------------------------------------------------------


def build_parser() -> argparse.ArgumentParser:
    p = _Parser(prog="tacshear", description="Tactile shear field simulation, calibration and comparison.")
    p.add_argument("-v", "--verbose", action="store_true")
    sub = p.add_subparsers(dest="command", parser_class=_Parser)

    def with_config(sp):
        sp.add_argument("--config", help=f"scenario JSON (default: ${CONFIG_ENV})")
        return sp

    s = with_config(sub.add_parser("simulate", help="run a trajectory and write marker fields"))
    s.add_argument("--trajectory", required=True)
    s.add_argument("--out", required=True, help="output directory, or a file with --final-only/--binary")
    s.add_argument("--final-only", action="store_true", help="write only the last field")
    s.add_argument("--binary", action="store_true", help="write one binary float32 batch file")
    s.add_argument("--unit", choices=("m", "px"), default="px")
    s.set_defaults(func=cmd_simulate)

    c = with_config(sub.add_parser("calibrate", help="fit model parameters to a dataset"))
    c.add_argument("--dataset", required=True)
    c.add_argument("--out", required=True)
    c.add_argument("--refine-2d", action="store_true", help="joint grid refinement of lambda_s and K")
    c.set_defaults(func=cmd_calibrate)

    m = with_config(sub.add_parser("make-dataset", help="generate a synthetic calibration dataset"))
    m.add_argument("--truth", required=True, help="parameter file used to generate observations")
    m.add_argument("--out", required=True)
    m.add_argument("--seed", type=int, default=0)
    m.set_defaults(func=cmd_make_dataset)

    k = sub.add_parser("compare", help="RMSE and cosine similarity between field files")
    k.add_argument("--pred", required=True, help="field file, binary batch or directory")
    k.add_argument("--truth", required=True)
    k.add_argument("--floor", type=float, default=0.3, help="cosine similarity magnitude floor in pixels")
    k.add_argument("--json", help="write the metrics report here")
    k.add_argument("--plot", help="directory for vector-field images")
    k.set_defaults(func=cmd_compare)

    b = with_config(sub.add_parser("bench", help="time batched stepping"))
    b.add_argument("--env-counts", type=int, nargs="+", default=[256, 512, 1024])
    b.add_argument("--steps", type=int, default=40)
    b.add_argument("--warmup", type=int, default=3)
    b.add_argument("--models", nargs="+", choices=ScenarioConfig.MODELS)
    b.add_argument("--seed", type=int, default=0)
    b.add_argument("--records", help="write timing records (JSON) here")
    b.set_defaults(func=cmd_bench)

    ss = with_config(sub.add_parser("sample-surface", help="sample an indenter surface to a file"))
    ss.add_argument("--shape", help='inline shape JSON, e.g. \'{"shape": "sphere", "radius": 0.0175}\'')
    ss.add_argument("--count", type=int)
    ss.add_argument("--seed", type=int)
    ss.add_argument("--out", required=True)
    ss.set_defaults(func=cmd_sample_surface)
    return p


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING, format="%(levelname)s %(message)s")
    if not getattr(args, "func", None):
        parser.print_help(sys.stderr)
        return EXIT_USAGE
    with warnings.catch_warnings():
        warnings.filterwarnings("ignore", module="numba")
        try:
            return args.func(args)
        except UsageError as e:
            print(f"usage error: {e}", file=sys.stderr)
            return EXIT_USAGE
        except DataError as e:
            print(f"data error: {e}", file=sys.stderr)
            return EXIT_DATA
        except (OSError, ValueError) as e:
            print(f"data error: {e}", file=sys.stderr)
            return EXIT_DATA


if __name__ == "__main__":
    sys.exit(main())
