"""Config-driven runs over a set of mesh files: generation, ablation, re-evaluation."""

from __future__ import annotations

import logging
from dataclasses import dataclass
from pathlib import Path
from typing import Callable, Optional

import numpy as np

from . import __version__
from .config import PipelineConfig, from_dict
from .dataset_io import (
    DatasetManifest,
    file_sha256,
    manifest_object,
    read_dataset,
    write_dataset,
)
from .force_closure.perturbation import WrenchSet, perturbation_eval
from .force_closure.problem import ExternalWrench
from .force_closure.socp import solve_batch
from .geometry.mesh import MassProperties, TriangleMesh, load_mesh
from .pipeline import STRATEGIES, PipelineResult, fce_metric, run_pipeline
from .sampler import sample_antipodal_report
from .wrench import ContactFrame

log = logging.getLogger(__name__)

Progress = Callable[[str], None]


class NumericalFailure(RuntimeError):
    pass


def _quiet(_msg: str) -> None:
    pass


@dataclass
class LoadedObject:
    key: str
    path: str
    scale: float
    density: float
    mesh: TriangleMesh
    sha256: str


def load_objects(cfg: PipelineConfig) -> list[LoadedObject]:
    out = []
    for o in cfg.objects:
        mesh = load_mesh(o.path, o.scale)
        density = cfg.density if o.density is None else o.density
        out.append(LoadedObject(o.key, o.path, o.scale, density, mesh, file_sha256(o.path)))
    return out


def run_object(cfg: PipelineConfig, obj: LoadedObject, strategy: Optional[str] = None,
               grasps=None) -> PipelineResult:
    spec = next(o for o in cfg.objects if o.key == obj.key)
    return run_pipeline(
        obj.mesh, cfg.gripper_model(), cfg.sampler_config(), cfg.fc_config(spec),
        strategy=strategy or cfg.pairing.strategy, budget=cfg.pairing.budget, pairing=cfg.pairing_config(),
        threads=cfg.threads, grasps=grasps, config_hash=cfg.hash(),
    )


def snapshot(cfg: PipelineConfig) -> dict:
    d = cfg.to_dict()
    d.pop("out")
    d.pop("threads")
    return d


def generate(cfg: PipelineConfig, out_dir, progress: Progress = _quiet) -> DatasetManifest:
    """Full pipeline over every configured object, written to ``out_dir``.

    Raises NumericalFailure (after writing) when the unconverged share of
    solved pairs exceeds ``cfg.max_unconverged_fraction``.
    """
    objs = load_objects(cfg)
    records, entries = {}, []
    solved = unconverged = 0
    for obj in objs:
        progress(f"{obj.key}: sampling and labeling")
        res = run_object(cfg, obj)
        progress(f"{obj.key}: {res.diagnostics.get('passed', 0)} pass of {res.diagnostics.get('evaluated', 0)} "
                 f"evaluated, {len(res.records)} retained")
        records[obj.key] = res.records
        entries.append(manifest_object(obj.key, obj.path, obj.scale, obj.density, res.mass, obj.sha256,
                                       res.diagnostics))
        solved += res.diagnostics.get("evaluated", 0) - res.diagnostics.get("rank_failed", 0)
        unconverged += res.diagnostics.get("unconverged", 0)
    manifest = DatasetManifest(objects=entries, config=snapshot(cfg), config_hash=cfg.hash(),
                               generator={"package": "dualgrasp", "version": __version__})
    write_dataset(records, manifest, out_dir)
    if solved and unconverged / solved > cfg.max_unconverged_fraction:
        raise NumericalFailure(
            f"{unconverged} of {solved} solves did not converge "
            f"(limit {cfg.max_unconverged_fraction:.2%})"
        )
    return manifest


def sample_only(cfg: PipelineConfig, progress: Progress = _quiet) -> dict:
    """Sampled grasps per object: {name: (report, grasps)}."""
    out = {}
    for obj in load_objects(cfg):
        rep = sample_antipodal_report(obj.mesh, cfg.gripper_model(), cfg.sampler_config(), threads=cfg.threads)
        progress(f"{obj.key}: {len(rep.grasps)} grasps from {rep.attempts} attempts")
        out[obj.key] = rep
    return out


def ablate(cfg: PipelineConfig, progress: Progress = _quiet) -> dict:
    """All pairing strategies on shared samples; FCE per object and strategy.

    The force-closure strategy is scored on the pairs it emits (its pass
    records), each re-verified from its stored forces; the baselines on every
    pair they evaluate.
    """
    report = {}
    for obj in load_objects(cfg):
        rep = sample_antipodal_report(obj.mesh, cfg.gripper_model(), cfg.sampler_config(), threads=cfg.threads)
        progress(f"{obj.key}: {len(rep.grasps)} grasps")
        row = {}
        for strategy in STRATEGIES:
            res = run_object(cfg, obj, strategy, grasps=rep.grasps)
            if strategy == "force_closure":
                emitted = [r for r in res.records if r.label]
                com = res.mass.center_of_mass
                ok = [r.recheck_loss(com) <= cfg.loss_threshold for r in emitted]
                fce = float(np.mean(ok)) if ok else float("nan")
                n = len(emitted)
            else:
                fce = fce_metric(res.records) if res.records else float("nan")
                n = len(res.records)
            row[strategy] = {"fce": fce, "pairs": n, "evaluated": res.diagnostics.get("evaluated", 0),
                             "unconverged": res.diagnostics.get("unconverged", 0)}
            progress(f"{obj.key}: {strategy} FCE {fce:.4f} over {n} pairs")
        report[obj.key] = row
    return report


def format_ablation(report: dict) -> str:
    head = f"{'object':<16}" + "".join(f"{s:>16}" for s in STRATEGIES)
    lines = [head, "-" * len(head)]
    for name, row in report.items():
        lines.append(f"{name:<16}" + "".join(f"{row[s]['fce']:>16.4f}" for s in STRATEGIES))
    return "\n".join(lines)


def evaluate(dataset_dir, mu: Optional[float] = None, f_high: Optional[float] = None,
             mass_scale: float = 1.0, wrench_set: Optional[WrenchSet] = None, max_perturbation: int = 200,
             progress: Progress = _quiet) -> dict:
    """Re-label stored pairs under a new friction coefficient, force cap or load.

    With ``wrench_set`` the disturbance proxy is also evaluated on up to
    ``max_perturbation`` originally passing records per object.
    """
    manifest, records = read_dataset(dataset_dir)
    cfg = from_dict(manifest.config)
    opts = cfg.solver_options()
    threshold = cfg.loss_threshold
    out = {}
    for entry in manifest.objects:
        recs = records[entry.name]
        com = np.asarray(entry.center_of_mass, dtype=np.float64)
        mass = entry.mass * mass_scale
        w = ExternalWrench.gravity(mass)
        new_mu = [r.mu if mu is None else mu for r in recs]
        new_fh = [r.f_high if f_high is None else f_high for r in recs]
        solvable = [k for k, r in enumerate(recs) if r.rank_ok]
        new_label = [False] * len(recs)
        unconverged = 0
        if solvable:
            G = np.stack([recs[k].program(com).G.G for k in solvable])
            res = solve_batch(G, np.broadcast_to(w.w, (len(solvable), 6)), np.array([new_mu[k] for k in solvable]),
                              np.array([new_fh[k] for k in solvable]), opts)
            for i, k in enumerate(solvable):
                new_label[k] = bool(res.converged[i] and res.loss[i] <= threshold)
            unconverged = int((~res.converged).sum())
        row = {
            "records": len(recs),
            "pass_before": sum(r.label for r in recs),
            "pass_after": sum(new_label),
            "unconverged": unconverged,
            "mu": mu, "f_high": f_high, "mass_scale": mass_scale,
        }
        if wrench_set is not None:
            mp = MassProperties(volume=entry.volume, center_of_mass=com, mass=mass)
            picks = [r for r in recs if r.label][:max_perturbation]
            fr = []
            for r in picks:
                p, R = r.frames(com)
                frames = [ContactFrame(p[i], R[i]) for i in range(4)]
                fr.append(perturbation_eval(frames, mp, r.mu if mu is None else mu,
                                            r.f_high if f_high is None else f_high, wrench_set, opts, threshold))
            row["perturbation_mean"] = float(np.mean(fr)) if fr else None
            row["perturbation_evaluated"] = len(fr)
        progress(f"{entry.name}: pass {row['pass_before']} -> {row['pass_after']} of {len(recs)}")
        out[entry.name] = row
    return out


def default_viz_path(dataset_dir, name: str, index: int) -> Path:
    return Path(dataset_dir) / "viz" / f"{name}_{index}.ply"

