"""Application configuration: TOML file -> typed settings.

Every knob has a default, so an empty (or absent) config file yields a
fully working desk-scale setup.
"""

from __future__ import annotations

import os

try:
    import tomllib
except ModuleNotFoundError:  # Python 3.10
    import tomli as tomllib

from dataclasses import dataclass, field, fields
from pathlib import Path

from .perception import DEFAULT_CONFIDENCE_THRESHOLD, DEFAULT_VOLUME_ML
from .reconcile import DEFAULT_FUZZY_THRESHOLD, DEFAULT_RULES, SubstitutionRule, load_rules
from .sim import ControllerParams, FlowModel, FtSensorModel, SimConfig

BIND_ENV_VAR = "MIXCELL_BIND"
DEFAULT_BIND = "127.0.0.1:8000"


@dataclass(frozen=True)
class AppConfig:
    sim: SimConfig = field(default_factory=SimConfig)
    recipes_dir: Path | None = None
    rules: tuple[SubstitutionRule, ...] = DEFAULT_RULES
    fuzzy_threshold: float = DEFAULT_FUZZY_THRESHOLD
    confidence_threshold: float = DEFAULT_CONFIDENCE_THRESHOLD
    default_volume_ml: float = DEFAULT_VOLUME_ML
    volume_defaults: dict[str, float] = field(default_factory=dict)
    retrieval_min_score: float = 0.2
    unattended: bool = False
    pour_tolerance_rel: float = 0.01
    bind: str = DEFAULT_BIND
    console_dir: Path | None = None


def _build(cls, section: dict):
    known = {f.name for f in fields(cls)}
    unknown = set(section) - known
    if unknown:
        raise ValueError(f"unknown {cls.__name__} option(s): {', '.join(sorted(unknown))}")
    return cls(**section)


def load_config(path: Path | str | None = None) -> AppConfig:
    """Load settings from a TOML file; missing file or sections use defaults."""
    doc: dict = {}
    if path is not None:
        doc = tomllib.loads(Path(path).read_text(encoding="utf-8"))

    sim_doc = dict(doc.get("sim", {}))
    flow = _build(FlowModel, sim_doc.pop("flow", {}))
    sensor = _build(FtSensorModel, sim_doc.pop("sensor", {}))
    controller = _build(ControllerParams, sim_doc.pop("controller", {}))
    sim = _build(
        SimConfig,
        {"flow": flow, "sensor": sensor, "controller": controller, **sim_doc},
    )

    corpus_doc = doc.get("corpus", {})
    recipes_dir = corpus_doc.get("recipes_dir")

    perception_doc = dict(doc.get("perception", {}))
    volume_defaults = {
        str(k): float(v) for k, v in perception_doc.get("volume_defaults", {}).items()
    }

    reconcile_doc = doc.get("reconcile", {})
    rules: tuple[SubstitutionRule, ...] = DEFAULT_RULES
    if "rules_path" in reconcile_doc:
        rules = load_rules(Path(reconcile_doc["rules_path"]))
    elif "rules" in reconcile_doc:
        rules = tuple(
            SubstitutionRule(r["from"], r["to"], r.get("note", ""))
            for r in reconcile_doc["rules"]
        )

    orch_doc = doc.get("orchestrator", {})
    server_doc = doc.get("server", {})
    bind = server_doc.get("bind") or os.environ.get(BIND_ENV_VAR) or DEFAULT_BIND

    return AppConfig(
        sim=sim,
        recipes_dir=Path(recipes_dir) if recipes_dir else None,
        rules=rules,
        fuzzy_threshold=float(reconcile_doc.get("fuzzy_threshold", DEFAULT_FUZZY_THRESHOLD)),
        confidence_threshold=float(
            perception_doc.get("confidence_threshold", DEFAULT_CONFIDENCE_THRESHOLD)
        ),
        default_volume_ml=float(perception_doc.get("default_volume_ml", DEFAULT_VOLUME_ML)),
        volume_defaults=volume_defaults,
        retrieval_min_score=float(orch_doc.get("retrieval_min_score", 0.2)),
        unattended=bool(orch_doc.get("unattended", False)),
        pour_tolerance_rel=float(orch_doc.get("pour_tolerance_rel", 0.01)),
        bind=str(bind),
        console_dir=Path(server_doc["console_dir"]) if "console_dir" in server_doc else None,
    )
