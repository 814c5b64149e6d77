"""Desk-scale robotic drink-mixing pipeline.

Stages: recipe retrieval (trigram-hash embeddings + exact cosine search),
inventory ingestion (detection JSON -> table-plane back-projection),
recipe/inventory reconciliation with substitution dialogs, compilation to a
validated five-op arm program, and closed-loop simulated execution with a
force-sensor pour controller.
"""

from .config import AppConfig, load_config
from .corpus import (
    EMBEDDING_DIMS,
    IngredientReq,
    Recipe,
    RecipeIndex,
    RetrievalHit,
    cosine,
    embed,
    normalize_text,
)
from .orchestrate import Orchestrator, Session, SpeechAdapter, TextLoopback, parse_order
from .perception import (
    CameraModel,
    Detection,
    InventoryItem,
    InventorySnapshot,
    backproject,
    build_snapshot,
    parse_detections,
    snapshot_from_document,
)
from .plan import ActionProgram, compile_program, deserialize, serialize, validate
from .reconcile import (
    Anomaly,
    Resolver,
    ResolvedRecipe,
    SubstitutionRule,
    diff,
    propose_prompt,
    resolve,
)
from .sim import (
    CellState,
    ControllerParams,
    ExecutionReport,
    FlowModel,
    FtSensor,
    FtSensorModel,
    PourTrace,
    SimConfig,
    execute,
    pour_closed_loop,
    step_flow,
)

__version__ = "0.1.0"

__all__ = [
    "AppConfig",
    "load_config",
    "EMBEDDING_DIMS",
    "IngredientReq",
    "Recipe",
    "RecipeIndex",
    "RetrievalHit",
    "cosine",
    "embed",
    "normalize_text",
    "Orchestrator",
    "Session",
    "SpeechAdapter",
    "TextLoopback",
    "parse_order",
    "CameraModel",
    "Detection",
    "InventoryItem",
    "InventorySnapshot",
    "backproject",
    "build_snapshot",
    "parse_detections",
    "snapshot_from_document",
    "ActionProgram",
    "compile_program",
    "deserialize",
    "serialize",
    "validate",
    "Anomaly",
    "Resolver",
    "ResolvedRecipe",
    "SubstitutionRule",
    "diff",
    "propose_prompt",
    "resolve",
    "CellState",
    "ControllerParams",
    "ExecutionReport",
    "FlowModel",
    "FtSensor",
    "FtSensorModel",
    "PourTrace",
    "SimConfig",
    "execute",
    "pour_closed_loop",
    "step_flow",
]
