"""Write the five desk meshes (OBJ) and a matching pipeline config.

    python3 scripts/make_desk_meshes.py desk/
    dualgrasp generate --config desk/desk.yaml
"""

from __future__ import annotations

import argparse

from dualgrasp.desk import make_desk


def main() -> None:
    ap = argparse.ArgumentParser(description=__doc__, formatter_class=argparse.RawDescriptionHelpFormatter)
    ap.add_argument("out_dir", nargs="?", default="desk")
    ap.add_argument("--n-grasps", type=int, default=600)
    ap.add_argument("--max-eval-pairs", type=int, default=1000)
    ap.add_argument("--seed", type=int, default=0)
    args = ap.parse_args()
    print(make_desk(args.out_dir, n_grasps=args.n_grasps, max_eval_pairs=args.max_eval_pairs, seed=args.seed))


if __name__ == "__main__":
    main()
