"""The five-object calibration desk: meshes written as OBJ plus a matching config.

Sizes are in meters. Densities are deliberately heavy (weights of roughly
60 to 120 N) so that a 70 N per-contact force cap actually discriminates
between pairs; at household densities every antipodal pair holds the load.
"""

from __future__ import annotations

from pathlib import Path

import numpy as np
import yaml

from .geometry import primitives

# name: (generator, kwargs, density kg/m^3)
DESK = {
    "cube": (primitives.box, dict(extents=(0.06, 0.06, 0.06)), 40000.0),
    "sphere": (primitives.icosphere, dict(subdivisions=3, radius=0.035), 60000.0),
    "cylinder": (primitives.cylinder, dict(radius=0.03, height=0.2, sections=32), 20000.0),
    "lprism": (primitives.l_prism, dict(size=0.03), 80000.0),
    "bottle": (primitives.bottle, dict(), 18000.0),
}


def write_obj(path, vertices, faces) -> Path:
    """Plain OBJ with shortest round-tripping float text."""
    path = Path(path)
    lines = [f"v {x!r} {y!r} {z!r}" for x, y, z in np.asarray(vertices, dtype=np.float64).tolist()]
    lines += [f"f {a + 1} {b + 1} {c + 1}" for a, b, c in np.asarray(faces).tolist()]
    path.write_text("\n".join(lines) + "\n")
    return path


def desk_config(out_dir, n_grasps: int = 600, max_eval_pairs: int = 1000, seed: int = 0,
                names=None) -> dict:
    out_dir = Path(out_dir)
    names = list(DESK) if names is None else list(names)
    return {
        "objects": [dict(path=str(out_dir / f"{n}.obj"), density=DESK[n][2]) for n in names],
        "seed": seed,
        "mu": 0.5,
        "sampler": {"n_grasps": n_grasps},
        "pairing": {"budget": 4000, "max_eval_pairs": max_eval_pairs},
        "out": str(out_dir / "dataset"),
    }


def make_desk(out_dir, **config_kwargs) -> Path:
    """Write the meshes plus ``desk.yaml`` into ``out_dir``; returns the config path."""
    out_dir = Path(out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    for name, (gen, kwargs, _) in DESK.items():
        write_obj(out_dir / f"{name}.obj", *gen(**kwargs))
    cfg_path = out_dir / "desk.yaml"
    cfg_path.write_text(yaml.safe_dump(desk_config(out_dir, **config_kwargs), sort_keys=False))
    return cfg_path
