"""Dataset directory layout, record (de)serialization, summaries and viewer exports.

Layout::

    <out>/manifest                 JSON, format version, config snapshot, per-object entries
    <out>/objects/<name>.records   one JSON record per line
    <out>/viz/<name>_<idx>.ply     optional mesh exports

Floats are written with Python's shortest round-trip repr, so every double
(including the 16 transform entries, row-major) reads back bit-identical.
All JSON is written with sorted keys; output bytes depend only on content.
"""

from __future__ import annotations

import json
import os
from dataclasses import dataclass, field
from pathlib import Path
from typing import Optional

import numpy as np

from .force_closure.problem import ExternalWrench
from .geometry import primitives
from .geometry.mesh import TriangleMesh
from .gripper import GraspPose, GripperModel, box_arrays
from .pipeline import DualGraspRecord

FORMAT_VERSION = 1
MANIFEST = "manifest"
RECORD_SUFFIX = ".records"
# fixed log-spaced Q(G) bin edges; index 0 collects Q below the first edge (including 0)
Q_BIN_EDGES = tuple(10.0 ** (k / 2.0) for k in range(-24, 5))
LOSS_QUANTILES = (0.0, 0.05, 0.25, 0.5, 0.75, 0.95, 1.0)


class DatasetError(Exception):
    """Malformed or unreadable dataset; the message names the file (and line)."""


class FormatVersionError(DatasetError):
    pass


@dataclass
class ObjectEntry:
    name: str
    path: str
    scale: float
    density: float
    mass: float
    volume: float
    center_of_mass: list
    mesh_sha256: str = ""
    counts: dict = field(default_factory=dict)
    diagnostics: dict = field(default_factory=dict)

    @property
    def records_file(self) -> str:
        return f"objects/{self.name}{RECORD_SUFFIX}"


@dataclass
class DatasetManifest:
    objects: list[ObjectEntry]
    config: dict
    config_hash: str
    format_version: int = FORMAT_VERSION
    generator: dict = field(default_factory=dict)

    @property
    def counts(self) -> dict:
        keys = ("total", "pass", "fail", "unconverged", "rank_failed")
        return {k: sum(o.counts.get(k, 0) for o in self.objects) for k in keys}

    def entry(self, name: str) -> ObjectEntry:
        for o in self.objects:
            if o.name == name:
                return o
        raise KeyError(name)

    def to_json(self) -> dict:
        return {
            "format_version": self.format_version,
            "generator": self.generator,
            "config_hash": self.config_hash,
            "config": self.config,
            "counts": self.counts,
            "objects": [
                {
                    "name": o.name, "path": o.path, "scale": o.scale, "density": o.density, "mass": o.mass,
                    "volume": o.volume, "center_of_mass": [float(x) for x in o.center_of_mass],
                    "mesh_sha256": o.mesh_sha256, "records": o.records_file, "counts": o.counts,
                    "diagnostics": o.diagnostics,
                }
                for o in self.objects
            ],
        }


def count_records(records) -> dict:
    records = list(records)
    return {
        "total": len(records),
        "pass": sum(r.label for r in records),
        "fail": sum(not r.label for r in records),
        "unconverged": sum(r.converged is False for r in records),
        "rank_failed": sum(not r.rank_ok for r in records),
    }


# -- records <-> JSON ---------------------------------------------------------

def _floats(a) -> list:
    return [float(x) for x in np.asarray(a, dtype=np.float64).reshape(-1)]


def _pose_json(p: GraspPose) -> dict:
    return {
        "transform": _floats(p.transform),
        "contact_1": _floats(p.contact_1),
        "contact_2": _floats(p.contact_2),
        "normal_1": _floats(p.normal_1),
        "normal_2": _floats(p.normal_2),
        "width": float(p.width),
    }


def _pose_from(d: dict) -> GraspPose:
    return GraspPose(
        transform=_array(d["transform"], 16).reshape(4, 4),
        contact_1=_array(d["contact_1"], 3),
        contact_2=_array(d["contact_2"], 3),
        normal_1=_array(d["normal_1"], 3),
        normal_2=_array(d["normal_2"], 3),
        width=float(d["width"]),
    )


def _array(v, n: int) -> np.ndarray:
    a = np.asarray(v, dtype=np.float64)
    if a.shape != (n,):
        raise ValueError(f"expected {n} numbers, got shape {a.shape}")
    return a


def record_to_json(r: DualGraspRecord) -> dict:
    return {
        "pair": [int(r.pair[0]), int(r.pair[1])],
        "grasp_left": _pose_json(r.grasp_left),
        "grasp_right": _pose_json(r.grasp_right),
        "loss": None if r.loss is None else float(r.loss),
        "quality": float(r.quality),
        "rank_ok": bool(r.rank_ok),
        "label": "pass" if r.label else "fail",
        "converged": r.converged,
        "iterations": int(r.iterations),
        "forces": None if r.forces is None else _floats(r.forces),
        "w_ext": _floats(r.w_ext.w),
        "mu": float(r.mu),
        "f_high": float(r.f_high),
        "config_hash": r.config_hash,
    }


def record_from_json(d: dict) -> DualGraspRecord:
    if d["label"] not in ("pass", "fail"):
        raise ValueError(f"label must be 'pass' or 'fail', got {d['label']!r}")
    pair = d["pair"]
    if len(pair) != 2:
        raise ValueError("pair must hold two indices")
    return DualGraspRecord(
        grasp_left=_pose_from(d["grasp_left"]),
        grasp_right=_pose_from(d["grasp_right"]),
        loss=None if d["loss"] is None else float(d["loss"]),
        quality=float(d["quality"]),
        rank_ok=bool(d["rank_ok"]),
        label=d["label"] == "pass",
        converged=d["converged"],
        iterations=int(d["iterations"]),
        forces=None if d["forces"] is None else _array(d["forces"], 12),
        w_ext=ExternalWrench(_array(d["w_ext"], 6)),
        mu=float(d["mu"]),
        f_high=float(d["f_high"]),
        pair=(int(pair[0]), int(pair[1])),
        config_hash=str(d["config_hash"]),
    )


def _dumps(obj) -> str:
    return json.dumps(obj, sort_keys=True, separators=(",", ":"), allow_nan=False)


# -- files ----------------------------------------------------------------------

def write_dataset(records_by_object: dict[str, list[DualGraspRecord]], manifest: DatasetManifest,
                  out_dir) -> list[Path]:
    """Write the manifest and one record file per manifest object; returns written paths.

    Object counts in the manifest are recomputed from the records.
    """
    out = Path(out_dir)
    names = [o.name for o in manifest.objects]
    extra = sorted(set(records_by_object) - set(names))
    if extra:
        raise DatasetError(f"records given for objects missing from the manifest: {extra}")
    written = []
    try:
        (out / "objects").mkdir(parents=True, exist_ok=True)
        for o in manifest.objects:
            recs = records_by_object.get(o.name, [])
            o.counts = count_records(recs)
            path = out / o.records_file
            with open(path, "w", encoding="utf-8", newline="\n") as fh:
                for r in recs:
                    fh.write(_dumps(record_to_json(r)))
                    fh.write("\n")
            written.append(path)
        path = out / MANIFEST
        text = json.dumps(manifest.to_json(), sort_keys=True, indent=2, allow_nan=False) + "\n"
        path.write_text(text, encoding="utf-8")
        written.append(path)
    except OSError as exc:
        raise DatasetError(f"cannot write dataset under {out}: {exc}") from exc
    return written


def read_manifest(in_dir) -> DatasetManifest:
    path = Path(in_dir) / MANIFEST
    try:
        data = json.loads(path.read_text(encoding="utf-8"))
    except FileNotFoundError:
        raise DatasetError(f"missing manifest: {path}") from None
    except (OSError, json.JSONDecodeError) as exc:
        raise DatasetError(f"unreadable manifest {path}: {exc}") from exc
    version = data.get("format_version")
    if version != FORMAT_VERSION:
        raise FormatVersionError(
            f"{path}: format_version {version!r} is not supported (this reader handles {FORMAT_VERSION})"
        )
    try:
        objects = [
            ObjectEntry(name=o["name"], path=o["path"], scale=o["scale"], density=o["density"], mass=o["mass"],
                        volume=o["volume"], center_of_mass=o["center_of_mass"],
                        mesh_sha256=o.get("mesh_sha256", ""), counts=o.get("counts", {}),
                        diagnostics=o.get("diagnostics", {}))
            for o in data["objects"]
        ]
        return DatasetManifest(objects=objects, config=data["config"], config_hash=data["config_hash"],
                               format_version=version, generator=data.get("generator", {}))
    except (KeyError, TypeError) as exc:
        raise DatasetError(f"{path}: malformed manifest ({exc})") from exc


def read_records(path) -> list[DualGraspRecord]:
    path = Path(path)
    out = []
    try:
        fh = open(path, encoding="utf-8")
    except FileNotFoundError:
        raise DatasetError(f"missing record file: {path}") from None
    except OSError as exc:
        raise DatasetError(f"cannot read {path}: {exc}") from exc
    with fh:
        for lineno, line in enumerate(fh, start=1):
            if not line.endswith("\n"):
                raise DatasetError(f"{path}:{lineno}: truncated record (no line terminator)")
            try:
                out.append(record_from_json(json.loads(line)))
            except (json.JSONDecodeError, KeyError, TypeError, ValueError) as exc:
                raise DatasetError(f"{path}:{lineno}: corrupt record ({exc})") from exc
    return out


def read_dataset(in_dir) -> tuple[DatasetManifest, dict[str, list[DualGraspRecord]]]:
    manifest = read_manifest(in_dir)
    records = {o.name: read_records(Path(in_dir) / o.records_file) for o in manifest.objects}
    for o in manifest.objects:
        got = count_records(records[o.name])
        if o.counts and got != o.counts:
            raise DatasetError(f"{Path(in_dir) / o.records_file}: counts {got} disagree with manifest {o.counts}")
    return manifest, records


# -- summaries ------------------------------------------------------------------

def q_histogram(q) -> list[int]:
    """Counts over ``Q_BIN_EDGES``: bin 0 is below the first edge, the last bin
    is at or above the last edge."""
    q = np.asarray(q, dtype=np.float64).reshape(-1)
    idx = np.searchsorted(np.asarray(Q_BIN_EDGES), q, side="right")
    return np.bincount(idx, minlength=len(Q_BIN_EDGES) + 1).astype(int).tolist()


def stats(records) -> dict:
    records = list(records)
    if not records:
        raise ValueError("stats needs at least one record")
    passes = [r.quality for r in records if r.label]
    fails = [r.quality for r in records if not r.label]
    losses = np.array([r.loss for r in records if r.loss is not None], dtype=np.float64)
    c = count_records(records)
    return {
        **c,
        "fce": c["pass"] / c["total"],
        "q_bin_edges": list(Q_BIN_EDGES),
        "q_hist": {"pass": q_histogram(passes), "fail": q_histogram(fails)},
        "q_median": {
            "pass": float(np.median(passes)) if passes else None,
            "fail": float(np.median(fails)) if fails else None,
        },
        "loss_quantiles": (
            {str(p): float(np.quantile(losses, p)) for p in LOSS_QUANTILES} if losses.size else {}
        ),
    }


def format_stats(name: str, s: dict) -> str:
    lines = [
        f"{name}: {s['total']} records, {s['pass']} pass, {s['fail']} fail "
        f"({s['unconverged']} unconverged, {s['rank_failed']} rank-deficient), FCE {s['fce']:.4f}",
        f"  median Q  pass {s['q_median']['pass']}  fail {s['q_median']['fail']}",
    ]
    if s["loss_quantiles"]:
        lines.append("  loss quantiles  " + "  ".join(f"{k}:{v:.4g}" for k, v in s["loss_quantiles"].items()))
    edges = s["q_bin_edges"]
    for label in ("pass", "fail"):
        h = s["q_hist"][label]
        cells = [f"<{edges[0]:.0e}:{h[0]}"] + [
            f"[{edges[i - 1]:.0e},{edges[i]:.0e}):{h[i]}" for i in range(1, len(edges)) if h[i]
        ] + ([f">={edges[-1]:.0e}:{h[-1]}"] if h[-1] else [])
        lines.append(f"  Q hist {label}: " + " ".join(c for c in cells if not c.endswith(":0")))
    return "\n".join(lines)


# -- viewer export --------------------------------------------------------------

@dataclass
class VizExport:
    path: Path
    marker_transforms: list  # one 4x4 per gripper marker
    contact_centers: np.ndarray  # (4, 3)
    n_markers: int


_OBJECT_RGBA = (180, 180, 180, 255)
_PASS_RGBA = (40, 200, 60, 255)
_FAIL_RGBA = (220, 40, 40, 255)
_CONTACT_RGBA = (40, 90, 230, 255)


def _gripper_marker(pose: GraspPose, gripper: GripperModel):
    """Gripper boxes as triangles: built in the gripper frame, then placed by the pose transform."""
    local = np.eye(4)
    c, a, h = box_arrays(local, pose.width, gripper)
    verts, faces = [], []
    base = 0
    for k in range(3):
        v, f = primitives.box(2.0 * h[0, k], c[0, k])
        verts.append(v)
        faces.append(f + base)
        base += len(v)
    v = np.vstack(verts)
    H = pose.transform
    return v @ H[:3, :3].T + H[:3, 3], np.vstack(faces)


def export_viz(record: DualGraspRecord, mesh: TriangleMesh, out_path,
               gripper: GripperModel = GripperModel(), sphere_radius: float = 0.003) -> VizExport:
    """Write one PLY holding the object, both gripper markers and the four contact spheres.

    Marker color encodes the label (green pass, red fail).
    """
    import trimesh

    out_path = Path(out_path)
    parts = [(mesh.vertices, mesh.faces, _OBJECT_RGBA)]
    rgba = _PASS_RGBA if record.label else _FAIL_RGBA
    for pose in (record.grasp_left, record.grasp_right):
        v, f = _gripper_marker(pose, gripper)
        parts.append((v, f, rgba))
    centers = np.array([record.grasp_left.contact_1, record.grasp_left.contact_2,
                        record.grasp_right.contact_1, record.grasp_right.contact_2])
    for c in centers:
        v, f = primitives.icosphere(1, sphere_radius, c)
        parts.append((v, f, _CONTACT_RGBA))

    verts, faces, colors = [], [], []
    base = 0
    for v, f, col in parts:
        verts.append(np.asarray(v, dtype=np.float64))
        faces.append(np.asarray(f, dtype=np.int64) + base)
        colors.append(np.tile(np.array(col, dtype=np.uint8), (len(v), 1)))
        base += len(v)
    tm = trimesh.Trimesh(vertices=np.vstack(verts), faces=np.vstack(faces), vertex_colors=np.vstack(colors),
                         process=False)
    try:
        out_path.parent.mkdir(parents=True, exist_ok=True)
        tm.export(str(out_path), file_type="ply")
    except OSError as exc:
        raise DatasetError(f"cannot write {out_path}: {exc}") from exc
    return VizExport(path=out_path,
                     marker_transforms=[record.grasp_left.transform.copy(), record.grasp_right.transform.copy()],
                     contact_centers=centers, n_markers=6)


def file_sha256(path) -> str:
    import hashlib

    h = hashlib.sha256()
    with open(path, "rb") as fh:
        for block in iter(lambda: fh.read(1 << 20), b""):
            h.update(block)
    return h.hexdigest()


def tree_digest(root) -> dict[str, str]:
    """Relative path -> sha256 for every file under ``root`` (for byte-identity checks)."""
    root = Path(root)
    out = {}
    for dirpath, _, files in os.walk(root):
        for name in sorted(files):
            p = Path(dirpath) / name
            out[p.relative_to(root).as_posix()] = file_sha256(p)
    return dict(sorted(out.items()))


def manifest_object(name: str, path: str, scale: float, density: float, mass_props, mesh_sha256: str = "",
                    diagnostics: Optional[dict] = None) -> ObjectEntry:
    return ObjectEntry(name=name, path=str(path), scale=float(scale), density=float(density),
                       mass=float(mass_props.mass), volume=float(mass_props.volume),
                       center_of_mass=[float(x) for x in mass_props.center_of_mass], mesh_sha256=mesh_sha256,
                       diagnostics=dict(diagnostics or {}))
