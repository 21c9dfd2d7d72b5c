"""Build the desk in a directory, then run the pairing ablation and a full generate on it.

    python3 scripts/run_ablation.py work/ [--n-grasps 600] [--seed 0]

Prints the FCE table (one row per mesh) and the per-object pass/fail counts.
"""

from __future__ import annotations

import argparse
import json
import time
from pathlib import Path

from dualgrasp.config import load_config
from dualgrasp.dataset_io import read_dataset, stats
from dualgrasp.desk import make_desk
from dualgrasp.runner import ablate, format_ablation, generate


def main() -> None:
    ap = argparse.ArgumentParser(description=__doc__, formatter_class=argparse.RawDescriptionHelpFormatter)
    ap.add_argument("work_dir", nargs="?", default="desk")
    ap.add_argument("--n-grasps", type=int, default=600)
    ap.add_argument("--seed", type=int, default=0)
    ap.add_argument("--skip-generate", action="store_true")
    args = ap.parse_args()

    cfg = load_config(make_desk(args.work_dir, n_grasps=args.n_grasps, seed=args.seed))
    t0 = time.perf_counter()
    report = ablate(cfg, lambda m: print(f"[ablate] {m}", flush=True))
    print(format_ablation(report))
    print(f"ablation: {time.perf_counter() - t0:.0f} s")
    (Path(args.work_dir) / "ablation.json").write_text(json.dumps(report, indent=2, sort_keys=True) + "\n")
    if args.skip_generate:
        return
    t0 = time.perf_counter()
    generate(cfg, cfg.out, lambda m: print(f"[generate] {m}", flush=True))
    print(f"generate: {time.perf_counter() - t0:.0f} s")
    _, records = read_dataset(cfg.out)
    for name, recs in records.items():
        s = stats(recs)
        print(f"{name:<10} total {s['total']:>5}  pass {s['pass']:>5}  unconverged {s['unconverged']:>3}  "
              f"median Q pass {s['q_median']['pass']:.3e}  fail {s['q_median']['fail']:.3e}")


if __name__ == "__main__":
    main()
