"""Pipeline configuration: one dataclass tree, YAML on disk, hashed for provenance.

Every leaf has a default. ``out`` and ``threads`` only affect where and how
fast results are produced, so they are excluded from the hash.
"""

from __future__ import annotations

import dataclasses
from dataclasses import dataclass, field, fields
from pathlib import Path
from typing import Any, Optional, get_args, get_origin, get_type_hints

import yaml

from .force_closure.socp import SolverOptions
from .gripper import GripperModel
from .pipeline import STRATEGIES, ForceClosureConfig, PairingConfig, config_digest
from .sampler import SamplerConfig


class ConfigError(ValueError):
    pass


@dataclass(frozen=True)
class ObjectSpec:
    path: str
    scale: float = 1.0
    name: Optional[str] = None  # defaults to the file stem
    density: Optional[float] = None  # kg/m^3, overrides the global density

    @property
    def key(self) -> str:
        return self.name or Path(self.path).stem


@dataclass(frozen=True)
class GripperSection:
    max_opening: float = 0.08
    finger_length: float = 0.05
    finger_thickness: float = 0.01
    palm_depth: float = 0.02
    f_high: float = 70.0
    standoff: float = 0.05


@dataclass(frozen=True)
class SamplerSection:
    n_grasps: int = 500
    max_attempts: Optional[int] = None
    rolls_per_contact: int = 4


@dataclass(frozen=True)
class PairingSection:
    strategy: str = "force_closure"
    budget: int = 4000
    min_sep_ratio: float = 0.1
    fail_ratio: float = 1.0
    max_eval_pairs: Optional[int] = None


@dataclass(frozen=True)
class SolverSection:
    eps_abs: float = 1e-10
    max_iter: int = 10_000
    rho: float = 1.0
    adaptive_rho: bool = True
    adapt_every: int = 50
    adapt_threshold: float = 2.0
    rho_min: float = 1e-6
    rho_max: float = 1e6


@dataclass(frozen=True)
class PipelineConfig:
    objects: tuple[ObjectSpec, ...] = ()
    seed: int = 0
    mu: float = 0.5
    density: float = 1000.0
    loss_threshold: float = 1e-5
    rank_tol: float = 1e-8
    max_unconverged_fraction: float = 0.05
    gripper: GripperSection = field(default_factory=GripperSection)
    sampler: SamplerSection = field(default_factory=SamplerSection)
    pairing: PairingSection = field(default_factory=PairingSection)
    solver: SolverSection = field(default_factory=SolverSection)
    out: str = "dataset"
    threads: int = 1

    # views onto the module-level config types

    def gripper_model(self) -> GripperModel:
        return GripperModel(**dataclasses.asdict(self.gripper))

    def sampler_config(self) -> SamplerConfig:
        s = self.sampler
        return SamplerConfig(mu=self.mu, n_grasps=s.n_grasps, max_attempts=s.max_attempts,
                             rolls_per_contact=s.rolls_per_contact, rng_seed=self.seed)

    def solver_options(self) -> SolverOptions:
        return SolverOptions(**dataclasses.asdict(self.solver))

    def fc_config(self, obj: Optional[ObjectSpec] = None) -> ForceClosureConfig:
        density = self.density if obj is None or obj.density is None else obj.density
        return ForceClosureConfig(mu=self.mu, density=density, threshold=self.loss_threshold,
                                  rank_tol=self.rank_tol, solver=self.solver_options())

    def pairing_config(self) -> PairingConfig:
        p = self.pairing
        return PairingConfig(min_sep_ratio=p.min_sep_ratio, fail_ratio=p.fail_ratio,
                             max_eval_pairs=p.max_eval_pairs, seed=self.seed)

    def validate(self) -> "PipelineConfig":
        """Build every derived config once so bad values surface as ConfigError."""
        try:
            self.gripper_model()
            self.sampler_config()
            self.fc_config()
            self.pairing_config()
        except (ValueError, TypeError) as exc:
            raise ConfigError(str(exc)) from exc
        if self.pairing.strategy not in STRATEGIES:
            raise ConfigError(f"pairing.strategy must be one of {', '.join(STRATEGIES)}")
        if self.pairing.budget < 0 or self.threads < 1:
            raise ConfigError("pairing.budget must be >= 0 and threads >= 1")
        if not 0 <= self.max_unconverged_fraction <= 1:
            raise ConfigError("max_unconverged_fraction must lie in [0, 1]")
        keys = [o.key for o in self.objects]
        if len(set(keys)) != len(keys):
            raise ConfigError(f"object names must be unique, got {keys}")
        for o in self.objects:
            if not o.scale > 0:
                raise ConfigError(f"object {o.key}: scale must be positive")
            if o.density is not None and not o.density > 0:
                raise ConfigError(f"object {o.key}: density must be positive")
        return self

    def to_dict(self) -> dict:
        d = dataclasses.asdict(self)
        d["objects"] = [dict(o) for o in d["objects"]]
        return d

    def hash(self) -> str:
        d = self.to_dict()
        d.pop("out")
        d.pop("threads")
        return config_digest(d)


def _build(cls, data: Any, where: str):
    if not dataclasses.is_dataclass(cls):
        return data
    if data is None:
        data = {}
    if not isinstance(data, dict):
        raise ConfigError(f"{where or 'config'}: expected a mapping, got {type(data).__name__}")
    hints = get_type_hints(cls)
    known = {f.name for f in fields(cls)}
    unknown = sorted(set(data) - known)
    if unknown:
        raise ConfigError(f"{where or 'config'}: unknown key(s) {', '.join(unknown)}")
    kwargs = {}
    for name, value in data.items():
        path = f"{where}.{name}" if where else name
        tp = hints[name]
        if name == "objects" and cls is PipelineConfig:
            kwargs[name] = tuple(_object(v, f"{path}[{i}]") for i, v in enumerate(value or []))
        elif dataclasses.is_dataclass(tp):
            kwargs[name] = _build(tp, value, path)
        else:
            kwargs[name] = _coerce(tp, value, path)
    try:
        return cls(**kwargs)
    except (TypeError, ValueError) as exc:
        raise ConfigError(f"{where or 'config'}: {exc}") from exc


def _object(value, where: str) -> ObjectSpec:
    if isinstance(value, str):
        value = {"path": value}
    return _build(ObjectSpec, value, where)


def _coerce(tp, value, where: str):
    optional = get_origin(tp) is not None and type(None) in get_args(tp)
    if optional:
        if value is None or (isinstance(value, str) and value.lower() in ("none", "null")):
            return None
        tp = next(a for a in get_args(tp) if a is not type(None))
    try:
        if tp is bool:
            if isinstance(value, str):
                low = value.lower()
                if low in ("1", "true", "yes", "on"):
                    return True
                if low in ("0", "false", "no", "off"):
                    return False
                raise ValueError(value)
            return bool(value)
        if tp is int:
            if isinstance(value, float) and not value.is_integer():
                raise ValueError(value)
            return int(value)
        if tp is float:
            return float(value)
        if tp is str:
            return str(value)
    except (TypeError, ValueError):
        raise ConfigError(f"{where}: cannot read {value!r} as {tp.__name__}") from None
    return value


def from_dict(data: dict) -> PipelineConfig:
    return _build(PipelineConfig, data, "").validate()


def load_config(path) -> PipelineConfig:
    path = Path(path)
    try:
        text = path.read_text()
    except OSError as exc:
        raise ConfigError(f"cannot read config {path}: {exc}") from exc
    try:
        data = yaml.safe_load(text)
    except yaml.YAMLError as exc:
        raise ConfigError(f"{path}: invalid YAML: {exc}") from exc
    return from_dict(data or {})


def dump_config(cfg: PipelineConfig) -> str:
    return yaml.safe_dump(cfg.to_dict(), sort_keys=False)


def leaf_paths(cls=PipelineConfig, prefix: str = "") -> list[tuple[str, Any]]:
    """Dotted paths and types of every scalar leaf (objects excluded)."""
    out = []
    hints = get_type_hints(cls)
    for f in fields(cls):
        if f.name == "objects":
            continue
        tp = hints[f.name]
        path = f"{prefix}{f.name}"
        if dataclasses.is_dataclass(tp):
            out.extend(leaf_paths(tp, path + "."))
        else:
            out.append((path, tp))
    return out


def with_overrides(cfg: PipelineConfig, overrides: dict[str, Any]) -> PipelineConfig:
    """Apply dotted-path overrides (values may be strings) and revalidate."""
    data = cfg.to_dict()
    for path, value in overrides.items():
        node = data
        *parents, leaf = path.split(".")
        for p in parents:
            node = node[p]
        if leaf not in node:
            raise ConfigError(f"unknown config key {path}")
        node[leaf] = value
    return from_dict(data)
