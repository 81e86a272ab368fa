"""Pipeline configuration: one TOML file with full defaults.

``default_config()`` carries every threshold and parameter; ``config
init`` writes it out so no default hides in code paths.  TOML has no
null, so optional values are omitted when unset and ``max_depth = 0``
encodes an unlimited tree depth inside hyperparameter grids.
"""

from __future__ import annotations

import dataclasses
import hashlib
import json
from dataclasses import dataclass, field
from pathlib import Path
from typing import Dict, List, Optional, Union

import tomli

from .labels import FVI_NAMES, PROTECTED_NAMES, LabelThresholds
from .synthgen import CohortConfig, PersonaSpec, default_personas


class ConfigError(ValueError):
    """Carries every violation found, not just the first."""

    def __init__(self, problems: List[str]):
        self.problems = problems
        super().__init__("; ".join(problems))


@dataclass
class IngestConfig:
    min_months: int = 6
    min_txns_per_month: int = 10


@dataclass
class LearnConfig:
    train_fraction: float = 0.8
    test_fraction: float = 0.2
    cv_folds: int = 10
    kinds: List[str] = field(default_factory=lambda: ["LR", "RF", "GBT"])
    targets: List[str] = field(default_factory=lambda: FVI_NAMES + PROTECTED_NAMES)
    save_models: bool = False
    grids: Dict[str, List[dict]] = field(
        default_factory=lambda: {
            "LR": [{"l2": 0.01}, {"l2": 0.1}, {"l2": 1.0}],
            "RF": [
                {"n_trees": 200, "max_depth": 0},
                {"n_trees": 200, "max_depth": 8},
            ],
            "GBT": [
                {"n_trees": 200, "max_depth": 3, "shrinkage": 0.05},
                {"n_trees": 200, "max_depth": 3, "shrinkage": 0.1},
                {"n_trees": 200, "max_depth": 5, "shrinkage": 0.05},
                {"n_trees": 200, "max_depth": 5, "shrinkage": 0.1},
            ],
        }
    )

    def runtime_grids(self) -> Dict[str, List[dict]]:
        """Grid dicts with the 0-means-unlimited depth decoded."""
        out: Dict[str, List[dict]] = {}
        for kind, grid in self.grids.items():
            decoded = []
            for point in grid:
                point = dict(point)
                if point.get("max_depth") == 0:
                    point["max_depth"] = None
                decoded.append(point)
            out[kind] = decoded
        return out


@dataclass
class SegmentConfig:
    n_components: int = 15
    variance_target: Optional[float] = None  # overrides n_components when set
    k_min: int = 2
    k_max: int = 8
    cluster_k: int = 0  # 0: use the silhouette recommendation
    tsne_perplexity: float = 0.0  # 0: min(30, feasible bound)
    tsne_iters: int = 500
    restarts: int = 10


@dataclass
class AuditConfig:
    significance: float = 0.001
    lift_factor: float = 1.5
    direct_auroc: float = 0.8
    indirect_auroc: float = 0.7
    proxy_features: List[str] = field(default_factory=list)  # empty: benefit columns


@dataclass
class PipelineConfig:
    seed: int = 7
    jobs: int = 1
    output_dir: str = "out"
    input_file: str = ""  # empty: run the synthetic generator
    demographics_file: str = ""  # optional account_id,gender,age source
    rules_file: str = ""  # empty: built-in keyword rules
    taxonomy_file: str = ""  # empty: built-in flow classes
    ingest: IngestConfig = field(default_factory=IngestConfig)
    thresholds: LabelThresholds = field(default_factory=LabelThresholds)
    synth: CohortConfig = field(default_factory=CohortConfig)
    personas: List[PersonaSpec] = field(default_factory=default_personas)
    learn: LearnConfig = field(default_factory=LearnConfig)
    segment: SegmentConfig = field(default_factory=SegmentConfig)
    audit: AuditConfig = field(default_factory=AuditConfig)

    def to_dict(self) -> dict:
        out = dataclasses.asdict(self)
        return out

    @classmethod
    def from_dict(cls, obj: dict) -> "PipelineConfig":
        problems: List[str] = []
        known = {f.name for f in dataclasses.fields(cls)}
        for key in obj:
            if key not in known:
                problems.append(f"unknown config key {key!r}")

        def build(klass, section, name):
            if not isinstance(section, dict):
                problems.append(f"section {name!r} must be a table")
                return klass()
            fields = {f.name for f in dataclasses.fields(klass)}
            for key in section:
                if key not in fields:
                    problems.append(f"{name}.{key}: unknown key")
            kwargs = {k: v for k, v in section.items() if k in fields}
            try:
                return klass(**kwargs)
            except (TypeError, ValueError) as exc:
                problems.append(f"{name}: {exc}")
                return klass()

        cfg = cls(
            seed=obj.get("seed", 7),
            jobs=obj.get("jobs", 1),
            output_dir=obj.get("output_dir", "out"),
            input_file=obj.get("input_file", ""),
            demographics_file=obj.get("demographics_file", ""),
            rules_file=obj.get("rules_file", ""),
            taxonomy_file=obj.get("taxonomy_file", ""),
            ingest=build(IngestConfig, obj.get("ingest", {}), "ingest"),
            thresholds=build(LabelThresholds, obj.get("thresholds", {}), "thresholds"),
            synth=build(CohortConfig, obj.get("synth", {}), "synth"),
            personas=[
                build(PersonaSpec, p, f"personas[{i}]") for i, p in enumerate(obj["personas"])
            ]
            if "personas" in obj
            else default_personas(),
            learn=build(LearnConfig, obj.get("learn", {}), "learn"),
            segment=build(SegmentConfig, obj.get("segment", {}), "segment"),
            audit=build(AuditConfig, obj.get("audit", {}), "audit"),
        )
        problems.extend(cfg.validate())
        if problems:
            raise ConfigError(problems)
        return cfg

    def validate(self) -> List[str]:
        problems: List[str] = []
        if self.seed < 0:
            problems.append("seed must be non-negative")
        if self.jobs < 1:
            problems.append("jobs must be >= 1")
        if self.ingest.min_months < 1:
            problems.append("ingest.min_months must be >= 1")
        if self.ingest.min_txns_per_month < 0:
            problems.append("ingest.min_txns_per_month must be >= 0")
        if not (0 < self.learn.train_fraction < 1):
            problems.append("learn.train_fraction must lie in (0,1)")
        if not (0 < self.learn.test_fraction < 1):
            problems.append("learn.test_fraction must lie in (0,1)")
        if self.learn.cv_folds < 2:
            problems.append("learn.cv_folds must be >= 2")
        for kind in self.learn.kinds:
            if kind not in ("LR", "RF", "GBT"):
                problems.append(f"learn.kinds: unknown model kind {kind!r}")
        for target in self.learn.targets:
            if target not in FVI_NAMES + PROTECTED_NAMES:
                problems.append(f"learn.targets: unknown target {target!r}")
        if self.segment.k_min < 2 or self.segment.k_max > 12 or self.segment.k_min > self.segment.k_max:
            problems.append("segment k range must satisfy 2 <= k_min <= k_max <= 12")
        if self.segment.n_components < 1:
            problems.append("segment.n_components must be >= 1")
        if self.segment.tsne_iters < 1:
            problems.append("segment.tsne_iters must be >= 1")
        if not (0 < self.audit.significance < 1):
            problems.append("audit.significance must lie in (0,1)")
        problems.extend(self.synth.validate())
        for p in self.personas:
            problems.extend(p.validate())
        weight = sum(p.mix_weight for p in self.personas)
        if abs(weight - 1.0) > 1e-9:
            problems.append(f"persona mix weights sum to {weight!r}, expected 1")
        return problems


# ---------------------------------------------------------------------------
# TOML serialization (writer is local: needs only tables, arrays, scalars)


def _toml_scalar(v) -> str:
    if isinstance(v, bool):
        return "true" if v else "false"
    if isinstance(v, (int, float)):
        return repr(v)
    if isinstance(v, str):
        return json.dumps(v)
    raise TypeError(f"cannot serialize {type(v)} as TOML scalar")


def _toml_inline(d: dict) -> str:
    inner = ", ".join(f"{k} = {_toml_scalar(v)}" for k, v in d.items())
    return "{" + inner + "}"


def _write_table(lines: List[str], prefix: str, table: dict, array_item: bool = False) -> None:
    header = f"[[{prefix}]]" if array_item else f"[{prefix}]"
    lines.append(header)
    nested: List = []
    for key, value in table.items():
        if value is None:  # TOML has no null; absent key means default
            continue
        if isinstance(value, dict):
            nested.append((key, value))
        elif isinstance(value, list) and value and isinstance(value[0], dict):
            items = ", ".join(_toml_inline(d) for d in value)
            lines.append(f"{key} = [{items}]")
        elif isinstance(value, list):
            items = ", ".join(_toml_scalar(v) for v in value)
            lines.append(f"{key} = [{items}]")
        else:
            lines.append(f"{key} = {_toml_scalar(value)}")
    lines.append("")
    for key, value in nested:
        _write_table(lines, f"{prefix}.{key}", value)


def dumps_toml(config: PipelineConfig) -> str:
    obj = config.to_dict()
    personas = obj.pop("personas")
    lines: List[str] = []
    sections: List = []
    for key, value in obj.items():
        if isinstance(value, dict):
            sections.append((key, value))
        elif isinstance(value, list) and value and isinstance(value[0], dict):
            items = ", ".join(_toml_inline(d) for d in value)
            lines.append(f"{key} = [{items}]")
        elif isinstance(value, list):
            items = ", ".join(_toml_scalar(v) for v in value)
            lines.append(f"{key} = [{items}]")
        else:
            lines.append(f"{key} = {_toml_scalar(value)}")
    lines.append("")
    for key, value in sections:
        _write_table(lines, key, value)
    for persona in personas:
        _write_table(lines, "personas", persona, array_item=True)
    return "\n".join(lines).rstrip() + "\n"


def loads_toml(text: str) -> PipelineConfig:
    try:
        obj = tomli.loads(text)
    except tomli.TOMLDecodeError as exc:
        raise ConfigError([f"TOML parse error: {exc}"])
    return PipelineConfig.from_dict(obj)


def write_config(config: PipelineConfig, path: Union[str, Path]) -> None:
    Path(path).write_text(dumps_toml(config), encoding="utf-8")


def load_config(path: Union[str, Path]) -> PipelineConfig:
    return loads_toml(Path(path).read_text(encoding="utf-8"))


def config_hash(config: PipelineConfig) -> str:
    canonical = json.dumps(config.to_dict(), sort_keys=True, separators=(",", ":"))
    return hashlib.sha256(canonical.encode("utf-8")).hexdigest()


def apply_env_overrides(config: PipelineConfig, environ: Dict[str, str]) -> PipelineConfig:
    """Override scalar config values from FINVULN_* variables.

    ``FINVULN_SEED=11`` sets the top-level seed; ``FINVULN_LEARN__CV_FOLDS=3``
    reaches into a section.  Values parse as TOML scalars.
    """
    obj = config.to_dict()
    for name, raw in sorted(environ.items()):
        if not name.startswith("FINVULN_"):
            continue
        path = name[len("FINVULN_") :].lower().split("__")
        try:
            value = tomli.loads(f"v = {raw}")["v"]
        except tomli.TOMLDecodeError:
            value = raw
        cursor = obj
        for key in path[:-1]:
            if not isinstance(cursor.get(key), dict):
                raise ConfigError([f"{name}: no config section {'.'.join(path[:-1])!r}"])
            cursor = cursor[key]
        if path[-1] not in cursor:
            raise ConfigError([f"{name}: no config key {'.'.join(path)!r}"])
        cursor[path[-1]] = value
    return PipelineConfig.from_dict(obj)
