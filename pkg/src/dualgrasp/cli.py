"""Command-line front end.

Exit codes: 0 success, 2 configuration error, 3 I/O or input-file error,
4 numerical failure (too many unconverged solves), 1 anything unexpected.
Errors are reported as one line on stderr::

    dualgrasp: error code=<n> kind=<kind> message=<json string>
"""

from __future__ import annotations

import argparse
import json
import logging
import sys
from pathlib import Path
from typing import Optional, get_args

from . import __version__
from .config import (
    ConfigError,
    ObjectSpec,
    PipelineConfig,
    dump_config,
    leaf_paths,
    load_config,
    with_overrides,
)
from .dataset_io import DatasetError, export_viz, format_stats, read_dataset, stats
from .force_closure.perturbation import WrenchSet
from .geometry.mesh import MeshError, load_mesh

EXIT_OK, EXIT_UNEXPECTED, EXIT_CONFIG, EXIT_IO, EXIT_NUMERIC = 0, 1, 2, 3, 4


def _progress(msg: str) -> None:
    print(f"[dualgrasp] {msg}", file=sys.stderr, flush=True)


def _add_config_flags(p: argparse.ArgumentParser) -> None:
    p.add_argument("--config", type=Path, help="YAML config file (flags override its values)")
    p.add_argument("--seed", type=int, help="master seed (sampling and subsampling)")
    p.add_argument("--out", help="output directory")
    p.add_argument("--threads", type=int, help="worker threads; results do not depend on it")
    p.add_argument("--mesh", action="append", default=[], metavar="PATH",
                   help="mesh file to process (repeatable); replaces the config's object list")
    p.add_argument("--mesh-scale", type=float, default=1.0, help="scale applied to --mesh files")
    g = p.add_argument_group("config leaves (dotted paths of the config file)")
    for path, tp in leaf_paths():
        if path in ("seed", "out", "threads"):
            continue
        base = [a for a in get_args(tp) if a is not type(None)] or [tp]
        g.add_argument(f"--{path}", dest=f"cfg:{path}", metavar=base[0].__name__.upper(), default=None)


def _merged_config(args) -> PipelineConfig:
    cfg = load_config(args.config) if args.config else PipelineConfig()
    overrides = {k[4:]: v for k, v in vars(args).items() if k.startswith("cfg:") and v is not None}
    for key in ("seed", "out", "threads"):
        if getattr(args, key) is not None:
            overrides[key] = getattr(args, key)
    cfg = with_overrides(cfg, overrides)
    if args.mesh:
        objs = tuple(ObjectSpec(path=m, scale=args.mesh_scale) for m in args.mesh)
        cfg = with_overrides(cfg, {"objects": [dict(path=o.path, scale=o.scale) for o in objs]})
    return cfg


def _header(command: str, cfg: Optional[PipelineConfig] = None, **extra) -> None:
    parts = [f"dualgrasp {__version__}", f"command={command}"]
    if cfg is not None:
        parts += [f"seed={cfg.seed}", f"config_hash={cfg.hash()}", f"threads={cfg.threads}"]
    parts += [f"{k}={v}" for k, v in extra.items()]
    print("# " + " ".join(parts), file=sys.stderr)
    if cfg is not None:
        print("# effective config:", file=sys.stderr)
        for line in dump_config(cfg).splitlines():
            print("#   " + line, file=sys.stderr)
    sys.stderr.flush()


def _need_objects(cfg: PipelineConfig) -> None:
    if not cfg.objects:
        raise ConfigError("no objects configured (use --mesh or an 'objects' list in --config)")


def cmd_sample(args) -> int:
    from .dataset_io import _pose_json  # noqa: PLC2701 - shared pose encoding
    from .runner import sample_only

    cfg = _merged_config(args)
    _need_objects(cfg)
    _header("sample", cfg)
    out = Path(cfg.out) / "grasps"
    reports = sample_only(cfg, _progress)
    try:
        out.mkdir(parents=True, exist_ok=True)
        for name, rep in reports.items():
            with open(out / f"{name}.grasps", "w", encoding="utf-8", newline="\n") as fh:
                for g in rep.grasps:
                    fh.write(json.dumps(_pose_json(g), sort_keys=True, separators=(",", ":")) + "\n")
    except OSError as exc:
        raise DatasetError(f"cannot write grasps under {out}: {exc}") from exc
    summary = {n: {"grasps": len(r.grasps), "attempts": r.attempts, "no_hit": r.no_hit,
                   "not_antipodal": r.not_antipodal, "too_wide": r.too_wide, "colliding": r.colliding}
               for n, r in reports.items()}
    print(json.dumps(summary, sort_keys=True))
    return EXIT_OK


def cmd_generate(args) -> int:
    from .runner import generate

    cfg = _merged_config(args)
    _need_objects(cfg)
    _header("generate", cfg)
    manifest = generate(cfg, cfg.out, _progress)
    print(json.dumps({"out": str(cfg.out), "config_hash": manifest.config_hash, "counts": manifest.counts},
                     sort_keys=True))
    return EXIT_OK


def cmd_ablate(args) -> int:
    from .runner import ablate, format_ablation

    cfg = _merged_config(args)
    _need_objects(cfg)
    _header("ablate", cfg)
    report = ablate(cfg, _progress)
    print(format_ablation(report))
    path = Path(cfg.out) / "ablation.json"
    try:
        path.parent.mkdir(parents=True, exist_ok=True)
        path.write_text(json.dumps(report, sort_keys=True, indent=2) + "\n")
    except OSError as exc:
        raise DatasetError(f"cannot write {path}: {exc}") from exc
    return EXIT_OK


def cmd_evaluate(args) -> int:
    from .runner import evaluate

    _header("evaluate", dataset=args.dataset)
    ws = None
    if args.perturbation:
        ws = WrenchSet(torque_fraction=args.torque_fraction, lever_arm=args.lever_arm)
    report = evaluate(args.dataset, mu=args.mu, f_high=args.f_high, mass_scale=args.mass_scale, wrench_set=ws,
                      max_perturbation=args.max_perturbation, progress=_progress)
    print(json.dumps(report, sort_keys=True, indent=2))
    return EXIT_OK


def cmd_stats(args) -> int:
    _header("stats", dataset=args.dataset)
    manifest, records = read_dataset(args.dataset)
    summary = {}
    for name, recs in records.items():
        if not recs:
            print(f"{name}: no records")
            continue
        s = stats(recs)
        summary[name] = s
        print(format_stats(name, s))
    if args.json:
        text = json.dumps(summary, sort_keys=True, indent=2) + "\n"
        if args.json == "-":
            sys.stdout.write(text)
        else:
            try:
                Path(args.json).write_text(text)
            except OSError as exc:
                raise DatasetError(f"cannot write {args.json}: {exc}") from exc
    return EXIT_OK


def cmd_viz(args) -> int:
    from .runner import default_viz_path

    _header("viz", dataset=args.dataset, object=args.object, index=args.index)
    manifest, records = read_dataset(args.dataset)
    name = args.object or manifest.objects[0].name
    try:
        entry = manifest.entry(name)
    except KeyError:
        raise ConfigError(f"dataset has no object {name!r}") from None
    recs = records[name]
    if not 0 <= args.index < len(recs):
        raise ConfigError(f"index {args.index} out of range for {name} ({len(recs)} records)")
    mesh = load_mesh(entry.path, entry.scale)
    out = Path(args.out) if args.out else default_viz_path(args.dataset, name, args.index)
    cfg = PipelineConfig()
    if manifest.config:
        from .config import from_dict

        cfg = from_dict(manifest.config)
    res = export_viz(recs[args.index], mesh, out, cfg.gripper_model())
    print(json.dumps({"path": str(res.path), "markers": res.n_markers}))
    return EXIT_OK


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="dualgrasp", description="Dual-arm grasp dataset generation")
    parser.add_argument("--version", action="version", version=f"dualgrasp {__version__}")
    parser.add_argument("-v", "--verbose", action="store_true", help="debug logging on stderr")
    sub = parser.add_subparsers(dest="command", required=True)

    for name, fn, text in (
        ("sample", cmd_sample, "antipodal sampling only; writes <out>/grasps/<name>.grasps"),
        ("generate", cmd_generate, "full pipeline; writes a dataset directory to --out"),
        ("ablate", cmd_ablate, "compare pairing strategies on shared samples"),
    ):
        p = sub.add_parser(name, help=text, description=text)
        _add_config_flags(p)
        p.set_defaults(func=fn)

    p = sub.add_parser("evaluate", help="re-label a dataset under new mu / f_high / load")
    p.add_argument("dataset", type=Path)
    p.add_argument("--mu", type=float)
    p.add_argument("--f-high", type=float)
    p.add_argument("--mass-scale", type=float, default=1.0, help="multiply object masses (gravity load)")
    p.add_argument("--perturbation", action="store_true", help="also run the 12-wrench disturbance proxy")
    p.add_argument("--torque-fraction", type=float, default=0.2)
    p.add_argument("--lever-arm", type=float, default=0.05, help="m; torque = fraction * m * g * lever arm")
    p.add_argument("--max-perturbation", type=int, default=200, help="pass records per object for the proxy")
    p.set_defaults(func=cmd_evaluate)

    p = sub.add_parser("stats", help="dataset summary as text (and JSON with --json)")
    p.add_argument("dataset", type=Path)
    p.add_argument("--json", metavar="PATH", help="write the machine-readable summary ('-' for stdout)")
    p.set_defaults(func=cmd_stats)

    p = sub.add_parser("viz", help="export one record as a colored PLY")
    p.add_argument("dataset", type=Path)
    p.add_argument("--object", help="object name (default: first)")
    p.add_argument("--index", type=int, default=0)
    p.add_argument("--out", help="output file (default <dataset>/viz/<name>_<index>.ply)")
    p.set_defaults(func=cmd_viz)
    return parser


def _fail(code: int, kind: str, exc: BaseException) -> int:
    msg = json.dumps(str(exc) or type(exc).__name__)
    print(f"dualgrasp: error code={code} kind={kind} message={msg}", file=sys.stderr)
    return code


def main(argv=None) -> int:
    from .runner import NumericalFailure

    parser = build_parser()
    args = parser.parse_args(argv)
    logging.basicConfig(level=logging.DEBUG if args.verbose else logging.WARNING,
                        format="[dualgrasp] %(levelname)s %(name)s: %(message)s", stream=sys.stderr)
    try:
        return args.func(args)
    except ConfigError as exc:
        return _fail(EXIT_CONFIG, "config", exc)
    except (DatasetError, MeshError, OSError) as exc:
        return _fail(EXIT_IO, "io", exc)
    except NumericalFailure as exc:
        return _fail(EXIT_NUMERIC, "numerical", exc)
    except Exception as exc:  # surfaced, not swallowed: nonzero exit plus the message
        return _fail(EXIT_UNEXPECTED, type(exc).__name__, exc)


if __name__ == "__main__":
    sys.exit(main())
