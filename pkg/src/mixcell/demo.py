"""Built-in demo corpus and scenes for the scripted end-to-end run.

Five desk-scale drink recipes, a fully stocked table scene, and a variant
scene where sugar is missing but honey is on the table. The demo drives the
orchestrator exactly the way the HTTP API would, answering the substitution
prompt with "honey".
"""

from __future__ import annotations

import json
from dataclasses import dataclass

from .config import AppConfig
from .corpus import Recipe, RecipeIndex, recipe_from_dict
from .orchestrate import AWAITING_USER, Orchestrator, Session
from .perception import InventorySnapshot, snapshot_from_document

DEMO_RECIPE_DOCS = [
    {
        "id": "mojito",
        "name": "Mojito",
        "ingredients": [
            {"label": "white rum", "quantity_ml": 50},
            {"label": "lime juice", "quantity_ml": 25},
            {"label": "sugar", "quantity_ml": 15, "density_g_per_ml": 1.3},
            {"label": "soda water", "quantity_ml": 60},
        ],
    },
    {
        "id": "daiquiri",
        "name": "Daiquiri",
        "ingredients": [
            {"label": "white rum", "quantity_ml": 60},
            {"label": "lime juice", "quantity_ml": 25},
            {"label": "sugar", "quantity_ml": 10, "density_g_per_ml": 1.3},
        ],
    },
    {
        "id": "margarita",
        "name": "Margarita",
        "ingredients": [
            {"label": "tequila", "quantity_ml": 50},
            {"label": "triple sec", "quantity_ml": 25},
            {"label": "lime juice", "quantity_ml": 25},
        ],
    },
    {
        "id": "cuba-libre",
        "name": "Cuba Libre",
        "ingredients": [
            {"label": "dark rum", "quantity_ml": 50},
            {"label": "cola", "quantity_ml": 100},
            {"label": "lime juice", "quantity_ml": 10},
        ],
    },
    {
        "id": "whiskey-sour",
        "name": "Whiskey Sour",
        "ingredients": [
            {"label": "bourbon", "quantity_ml": 45},
            {"label": "lemon juice", "quantity_ml": 30},
            {"label": "sugar", "quantity_ml": 15, "density_g_per_ml": 1.3},
        ],
    },
]

_TABLE_LABELS = [
    "white rum",
    "lime juice",
    "sugar",
    "soda water",
    "tequila",
    "triple sec",
    "dark rum",
    "cola",
    "bourbon",
    "lemon juice",
    "honey",
]


def demo_recipes() -> list[Recipe]:
    return [recipe_from_dict(doc) for doc in DEMO_RECIPE_DOCS]


def demo_index() -> RecipeIndex:
    index = RecipeIndex()
    for recipe in demo_recipes():
        index.add(recipe)
    return index


def demo_detection_document(*, exclude: tuple[str, ...] = ()) -> bytes:
    """A synthetic overhead-camera frame with one bottle per label."""
    detections = []
    col = 0
    for label in _TABLE_LABELS:
        if label in exclude:
            continue
        u = 120.0 + (col % 4) * 130.0
        v = 100.0 + (col // 4) * 110.0
        detections.append(
            {
                "label": "bottle",
                "text": label,
                "bbox": [u - 30.0, v - 60.0, u + 30.0, v + 60.0],
                "confidence": 0.9,
            }
        )
        col += 1
    doc = {
        "timestamp": "2026-01-01T12:00:00Z",
        "camera": {
            "fx": 600.0,
            "fy": 600.0,
            "cx": 320.0,
            "cy": 240.0,
            # Overhead camera 1.2 m above the table, optical axis straight down.
            "rotation": [1.0, 0.0, 0.0, 0.0, -1.0, 0.0, 0.0, 0.0, -1.0],
            "translation": [0.0, 0.0, 1.2],
        },
        "detections": detections,
    }
    return json.dumps(doc, indent=2).encode("utf-8")


def demo_snapshot(config: AppConfig, *, exclude: tuple[str, ...] = ()) -> InventorySnapshot:
    return snapshot_from_document(
        demo_detection_document(exclude=exclude),
        config.volume_defaults,
        confidence_threshold=config.confidence_threshold,
        default_volume_ml=config.default_volume_ml,
    )


@dataclass(frozen=True)
class DemoResult:
    session: Session
    order_text: str
    answered: list[tuple[str, str]]


def run_demo(config: AppConfig, *, seed: int = 0, sessions: int = 10) -> list[DemoResult]:
    """Scripted end-to-end run: stocked orders plus sugar-is-missing orders.

    Every third session uses the sugar-free scene and answers the
    substitution prompt with honey; the rest run straight through.
    """
    index = demo_index()
    scenes = {
        "stocked": demo_snapshot(config),
        "no-sugar": demo_snapshot(config, exclude=("sugar",)),
    }
    orders = [
        ("make me a Mojito", "stocked"),
        ("make a Margarita", "stocked"),
        ("make me a Daiquiri", "no-sugar"),
        ("make a Cuba Libre", "stocked"),
        ("make me a Whiskey Sour", "no-sugar"),
        ("make a Daiquiri", "stocked"),
        ("make me a Margarita", "stocked"),
        ("make a Mojito", "no-sugar"),
        ("make me a Cuba Libre", "stocked"),
        ("make a Whiskey Sour", "stocked"),
    ]
    current_scene = {"value": scenes["stocked"]}
    orch = Orchestrator(index, config, snapshot_provider=lambda: current_scene["value"])
    results = []
    for i, (text, scene) in enumerate(orders[:sessions]):
        current_scene["value"] = scenes[scene]
        session = orch.place_order(text, seed=seed + i)
        answered = []
        while session.state == AWAITING_USER:
            prompt = next(iter(session.prompts.values()))
            choice = "honey" if "honey" in prompt.options else prompt.options[0]
            orch.answer(session.session_id, prompt.anomaly_id, choice)
            answered.append((prompt.anomaly_id, choice))
        results.append(DemoResult(session=session, order_text=text, answered=answered))
    return results
