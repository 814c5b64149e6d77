from __future__ import annotations

import json
import math
import random

import numpy as np
import pytest

from mixcell.config import AppConfig
from mixcell.corpus import Recipe, RecipeIndex, recipe_from_dict
from mixcell.demo import DEMO_RECIPE_DOCS, demo_detection_document
from mixcell.perception import CameraModel, snapshot_from_document

# Ingredient pool with deliberate near-neighbors (lime/lemon juice, gin/dry gin,
# sugar/sugar syrup) so fuzzy suggestions and ambiguity paths get exercised.
LABEL_POOL = [
    "white rum",
    "dark rum",
    "gin",
    "dry gin",
    "vodka",
    "tequila",
    "bourbon",
    "triple sec",
    "lime juice",
    "lemon juice",
    "orange juice",
    "cranberry juice",
    "sugar",
    "sugar syrup",
    "honey",
    "soda water",
    "cola",
    "mint",
]

_NAME_PARTS = (
    ["ruby", "amber", "velvet", "midnight", "copper", "silver", "ivory", "neon",
     "crimson", "golden", "emerald", "cobalt", "dusky", "frosted", "island", "harbor",
     "lantern", "meadow", "onyx", "pearl", "quartz", "saffron", "tundra", "willow", "zephyr"],
    ["fizz", "sour", "punch", "cooler", "smash", "flip", "mule", "spritz",
     "julep", "rickey", "sling", "swizzle", "toddy", "buck", "daisy", "cobbler",
     "shrub", "tonic", "nectar", "blaze", "breeze", "crush", "twist", "frost", "glow"],
)


def synth_recipes(n: int, seed: int = 7) -> list[Recipe]:
    """Deterministic corpus of n distinct recipes drawn from the label pool.

    Each name word is used at most once so names stay distinctive, the way
    real drink menus are.
    """
    rng = random.Random(seed)
    firsts = _NAME_PARTS[0][:]
    seconds = _NAME_PARTS[1][:]
    rng.shuffle(firsts)
    rng.shuffle(seconds)
    names = [f"{a} {b}" for a, b in zip(firsts, seconds)]
    assert n <= len(names)
    recipes = []
    for i in range(n):
        k = rng.randint(2, 5)
        labels = rng.sample(LABEL_POOL, k)
        recipes.append(
            recipe_from_dict(
                {
                    "id": f"r{i:03d}",
                    "name": names[i],
                    "ingredients": [
                        {"label": lbl, "quantity_ml": rng.randint(10, 120)} for lbl in labels
                    ],
                }
            )
        )
    return recipes


@pytest.fixture
def demo_recipes() -> list[Recipe]:
    return [recipe_from_dict(doc) for doc in DEMO_RECIPE_DOCS]


@pytest.fixture
def demo_index(demo_recipes) -> RecipeIndex:
    index = RecipeIndex()
    for recipe in demo_recipes:
        index.add(recipe)
    return index


@pytest.fixture
def overhead_camera() -> CameraModel:
    # 1.2 m above the table, optical axis straight down.
    return CameraModel(
        fx=600.0,
        fy=600.0,
        cx=320.0,
        cy=240.0,
        rotation=np.array([[1.0, 0.0, 0.0], [0.0, -1.0, 0.0], [0.0, 0.0, -1.0]]),
        translation=np.array([0.0, 0.0, 1.2]),
    )


@pytest.fixture
def stocked_snapshot():
    return snapshot_from_document(demo_detection_document())


@pytest.fixture
def no_sugar_snapshot():
    return snapshot_from_document(demo_detection_document(exclude=("sugar",)))


@pytest.fixture
def app_config() -> AppConfig:
    return AppConfig()


def make_detection_doc(items: list[dict], camera: dict | None = None) -> bytes:
    """Detection document with sane defaults; items override per-detection fields."""
    detections = []
    for i, spec in enumerate(items):
        u = 100.0 + (i % 5) * 100.0
        v = 100.0 + (i // 5) * 100.0
        det = {
            "label": "bottle",
            "text": "",
            "bbox": [u - 20.0, v - 40.0, u + 20.0, v + 40.0],
            "confidence": 0.9,
        }
        det.update(spec)
        detections.append(det)
    doc = {
        "timestamp": "2026-01-01T00:00:00Z",
        "camera": camera
        or {
            "fx": 600.0,
            "fy": 600.0,
            "cx": 320.0,
            "cy": 240.0,
            "rotation": [1, 0, 0, 0, -1, 0, 0, 0, -1],
            "translation": [0, 0, 1.2],
        },
        "detections": detections,
    }
    return json.dumps(doc).encode("utf-8")


def look_at_camera(position, target, fx=600.0, fy=600.0, cx=320.0, cy=240.0) -> CameraModel:
    """Camera at `position` with its optical axis through `target` (both world)."""
    position = np.asarray(position, dtype=float)
    target = np.asarray(target, dtype=float)
    z_axis = target - position
    z_axis = z_axis / np.linalg.norm(z_axis)
    up = np.array([0.0, 0.0, 1.0])
    if abs(np.dot(z_axis, up)) > 0.999:
        up = np.array([0.0, 1.0, 0.0])
    x_axis = np.cross(up, z_axis)
    x_axis = x_axis / np.linalg.norm(x_axis)
    y_axis = np.cross(z_axis, x_axis)
    rotation = np.column_stack([x_axis, y_axis, z_axis])
    return CameraModel(fx=fx, fy=fy, cx=cx, cy=cy, rotation=rotation, translation=position)


def project_pinhole(point_world, cam: CameraModel):
    """Independent forward pinhole projection (test-side oracle).

    Returns (u, v, depth); depth <= 0 means the point is behind the camera.
    """
    p = np.asarray(point_world, dtype=float)
    p_cam = cam.rotation.T @ (p - cam.translation)
    z = p_cam[2]
    if z <= 0:
        return None, None, z
    u = cam.fx * p_cam[0] / z + cam.cx
    v = cam.fy * p_cam[1] / z + cam.cy
    return u, v, z


def count_trigram_cosine(a: str, b: str) -> float:
    """Collision-free trigram-count cosine (independent of the hashed index)."""
    from collections import Counter

    from mixcell.corpus import normalize_text

    def grams(text):
        t = normalize_text(text)
        return Counter(t[i : i + 3] for i in range(len(t) - 2))

    ca, cb = grams(a), grams(b)
    dot = sum(ca[g] * cb[g] for g in ca)
    na = math.sqrt(sum(x * x for x in ca.values()))
    nb = math.sqrt(sum(x * x for x in cb.values()))
    if na == 0 or nb == 0:
        return 0.0
    return dot / (na * nb)
