"""Regenerate the press-slide fixture: inputs with the package, golden fields with the scalar oracle.

Run from the repository root: ``python tests/fixtures/make_golden.py``.
"""

import json
import math
import sys
from pathlib import Path

import numpy as np

HERE = Path(__file__).resolve().parent
sys.path.insert(0, str(HERE.parent))

import oracles  # noqa: E402

from tacshear.calibration import motion_trajectory  # noqa: E402
from tacshear.core import PIXEL_SCALE, HydroParams, MarkerField, TactileGrid  # noqa: E402
from tacshear.geometry import Sphere, sample_surface  # noqa: E402
from tacshear.io import read_samples, write_field, write_params, write_samples, write_trajectory  # noqa: E402

RADIUS = 0.0175
OUT = HERE / "press_slide"


def build_inputs():
    OUT.mkdir(exist_ok=True)
    write_samples(OUT / "samples.txt", sample_surface(Sphere(RADIUS), 256, seed=3))
    write_params(OUT / "params.json", HydroParams(3e4, 2e4, 2e6, 0.5))
    traj = motion_trajectory((1e-3, -5e-4), 1.2e-3, RADIUS, shift=(2.5e-3, 1e-3), press_steps=6, move_steps=10)
    write_trajectory(OUT / "trajectory.traj", traj)
    cfg = {"indenter": {"shape": "sphere", "radius": RADIUS}, "samples_path": "samples.txt",
           "params_path": "params.json", "model": "hydroshear", "max_substep": 0.005}
    (OUT / "config.json").write_text(json.dumps(cfg, indent=2) + "\n")
    return traj


def main():
    traj = build_inputs()
    s = read_samples(OUT / "samples.txt")
    p = HydroParams(3e4, 2e4, 2e6, 0.5)
    grid = TactileGrid.centered()
    qxy = [tuple(map(float, v)) for v in grid.xy()]
    tr = oracles.OracleTracker(s.points, s.normals, s.areas, p.E, p.K, p.mu, p.mu_hat)
    gold = OUT / "golden"
    gold.mkdir(exist_ok=True)
    for k, pose in enumerate(traj.poses):
        q, t = list(map(float, pose.quat)), list(map(float, pose.translation))
        tr.step(q, t)
        RT = list(zip(*oracles.qmat(q)))
        contacts = []
        for x, y in qxy:
            d = [x - t[0], y - t[1], 0.0 - t[2]]
            loc = [sum(RT[i][j] * d[j] for j in range(3)) for i in range(3)]
            phi = math.sqrt(sum(c * c for c in loc)) - RADIUS
            if phi < 0:
                contacts.append((x, y, -phi))
        dil = oracles.dilation(qxy, contacts, p.lambda_d)
        sh = tr.shear(qxy, p.lambda_s)
        vec = [[(a[0] + b[0]) * PIXEL_SCALE, (a[1] + b[1]) * PIXEL_SCALE] for a, b in zip(dil, sh)]
        f = MarkerField(grid, np.array(vec).reshape(grid.rows, grid.cols, 2), "px")
        write_field(gold / f"step_{k:05d}.field", f)


if __name__ == "__main__":
    main()
