"""Recipe storage, deterministic local embeddings, and exact top-k retrieval.

Recipes are embedded as L2-normalized 256-dim vectors of hashed character
trigrams, so retrieval is plain cosine similarity over a dense matrix.
Search is exact (full scan); the corpus is desk-scale, and exactness is
what makes the oracle tests possible.
"""

from __future__ import annotations

import json
import threading
import unicodedata
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from .errors import DuplicateRecipeError, InvalidRecipeError, UnknownRecipeError

EMBEDDING_DIMS = 256

_FNV_OFFSET = 0xCBF29CE484222325
_FNV_PRIME = 0x100000001B3
_FNV_MASK = 0xFFFFFFFFFFFFFFFF


def normalize_text(raw: str) -> str:
    """Lowercase, strip punctuation, collapse Unicode whitespace to single spaces."""
    lowered = raw.lower()
    no_punct = "".join(
        ch for ch in lowered if not unicodedata.category(ch).startswith("P")
    )
    return " ".join(no_punct.split())


def _fnv1a64(data: bytes) -> int:
    h = _FNV_OFFSET
    for b in data:
        h ^= b
        h = (h * _FNV_PRIME) & _FNV_MASK
    return h


def embed(text: str) -> np.ndarray:
    """Deterministic trigram-hash embedding.

    Character trigrams of the normalized text are hashed (64-bit FNV-1a)
    into 256 buckets; the count vector is L2-normalized. Inputs shorter
    than 3 characters yield the all-zero vector.
    """
    normalized = normalize_text(text)
    vec = np.zeros(EMBEDDING_DIMS, dtype=np.float64)
    for i in range(len(normalized) - 2):
        trigram = normalized[i : i + 3]
        vec[_fnv1a64(trigram.encode("utf-8")) % EMBEDDING_DIMS] += 1.0
    norm = float(np.linalg.norm(vec))
    if norm > 0.0:
        vec /= norm
    return vec


def cosine(a: np.ndarray, b: np.ndarray) -> float:
    """Cosine similarity with the zero-vector convention (zero input -> 0.0)."""
    na = float(np.linalg.norm(a))
    nb = float(np.linalg.norm(b))
    if na == 0.0 or nb == 0.0:
        return 0.0
    return float(np.dot(a, b) / (na * nb))


@dataclass(frozen=True)
class IngredientReq:
    """One required ingredient: normalized label, volume, and mass density."""

    label: str
    quantity_ml: float
    density_g_per_ml: float = 1.0

    def __post_init__(self):
        if self.quantity_ml <= 0:
            raise InvalidRecipeError(f"quantity_ml must be > 0, got {self.quantity_ml}")
        if not (0.1 <= self.density_g_per_ml <= 2.0):
            raise InvalidRecipeError(
                f"density_g_per_ml must be in [0.1, 2.0], got {self.density_g_per_ml}"
            )


@dataclass(frozen=True)
class Recipe:
    id: str
    name: str
    ingredients: tuple[IngredientReq, ...]
    notes: str | None = None

    def __post_init__(self):
        if not self.ingredients:
            raise InvalidRecipeError(f"recipe {self.id!r} has no ingredients")
        labels = [normalize_text(req.label) for req in self.ingredients]
        if len(set(labels)) != len(labels):
            raise InvalidRecipeError(f"recipe {self.id!r} has duplicate ingredient labels")

    def retrieval_text(self) -> str:
        """Text embedded for retrieval: name plus all ingredient labels."""
        return " ".join([self.name] + [req.label for req in self.ingredients])


@dataclass(frozen=True)
class RetrievalHit:
    recipe_id: str
    score: float
    rank: int


def recipe_from_dict(doc: dict, *, recipe_id: str | None = None) -> Recipe:
    """Build a Recipe from its JSON document form, normalizing labels."""
    try:
        rid = recipe_id or doc["id"]
        name = doc["name"]
        raw_ingredients = doc["ingredients"]
    except (KeyError, TypeError) as exc:
        raise InvalidRecipeError(f"missing recipe field: {exc}") from exc
    if not isinstance(raw_ingredients, list):
        raise InvalidRecipeError("ingredients must be a list")
    ingredients = []
    for entry in raw_ingredients:
        try:
            ingredients.append(
                IngredientReq(
                    label=normalize_text(str(entry["label"])),
                    quantity_ml=float(entry["quantity_ml"]),
                    density_g_per_ml=float(entry.get("density_g_per_ml", 1.0)),
                )
            )
        except (KeyError, TypeError, ValueError) as exc:
            raise InvalidRecipeError(f"bad ingredient entry {entry!r}: {exc}") from exc
    return Recipe(id=str(rid), name=str(name), ingredients=tuple(ingredients), notes=doc.get("notes"))


def recipe_to_dict(recipe: Recipe) -> dict:
    doc = {
        "id": recipe.id,
        "name": recipe.name,
        "ingredients": [
            {
                "label": req.label,
                "quantity_ml": req.quantity_ml,
                "density_g_per_ml": req.density_g_per_ml,
            }
            for req in recipe.ingredients
        ],
    }
    if recipe.notes is not None:
        doc["notes"] = recipe.notes
    return doc


def load_recipe_file(path: Path) -> Recipe:
    try:
        doc = json.loads(path.read_text(encoding="utf-8"))
    except json.JSONDecodeError as exc:
        raise InvalidRecipeError(f"{path}: not valid JSON: {exc}") from exc
    return recipe_from_dict(doc)


@dataclass
class _IndexState:
    """Immutable-after-build retrieval snapshot; swapped atomically on mutation."""

    ids: tuple[str, ...] = ()
    matrix: np.ndarray = field(default_factory=lambda: np.zeros((0, EMBEDDING_DIMS)))


class RecipeIndex:
    """Exact cosine-similarity index over the recipe corpus.

    Readers always see a complete snapshot of the corpus; add/remove are
    serialized under a lock and publish a fresh snapshot, so retrieval is
    safe from any number of concurrent threads.
    """

    def __init__(self):
        self._lock = threading.RLock()
        self._recipes: dict[str, Recipe] = {}
        self._state = _IndexState()

    def __len__(self) -> int:
        return len(self._state.ids)

    def add(self, recipe: Recipe) -> None:
        with self._lock:
            if recipe.id in self._recipes:
                raise DuplicateRecipeError(f"recipe id {recipe.id!r} already indexed")
            self._recipes[recipe.id] = recipe
            self._rebuild()

    def remove(self, recipe_id: str) -> None:
        with self._lock:
            if recipe_id not in self._recipes:
                raise UnknownRecipeError(f"recipe id {recipe_id!r} not in index")
            del self._recipes[recipe_id]
            self._rebuild()

    def get(self, recipe_id: str) -> Recipe:
        recipe = self._recipes.get(recipe_id)
        if recipe is None:
            raise UnknownRecipeError(f"recipe id {recipe_id!r} not in index")
        return recipe

    def recipes(self) -> list[Recipe]:
        state = self._state
        return [self._recipes[rid] for rid in state.ids]

    def _rebuild(self) -> None:
        # Sorted ids give an insertion-order-independent layout.
        ids = tuple(sorted(self._recipes))
        if ids:
            matrix = np.stack([embed(self._recipes[rid].retrieval_text()) for rid in ids])
        else:
            matrix = np.zeros((0, EMBEDDING_DIMS))
        self._state = _IndexState(ids=ids, matrix=matrix)

    def retrieve(self, query: str, k: int) -> list[RetrievalHit]:
        """Top-k recipes by cosine similarity, ties broken by ascending id."""
        state = self._state
        if k <= 0 or not state.ids:
            return []
        qvec = embed(query)
        qnorm = float(np.linalg.norm(qvec))
        if qnorm == 0.0:
            scores = np.zeros(len(state.ids))
        else:
            # Stored rows are unit vectors (or zero rows, which score 0).
            scores = state.matrix @ qvec
        order = sorted(range(len(state.ids)), key=lambda i: (-scores[i], state.ids[i]))
        return [
            RetrievalHit(recipe_id=state.ids[i], score=float(scores[i]), rank=rank)
            for rank, i in enumerate(order[:k], start=1)
        ]

    def reload(self, directory: Path) -> int:
        """Replace the corpus with every ``*.json`` recipe document in a directory."""
        recipes = {}
        for path in sorted(Path(directory).glob("*.json")):
            recipe = load_recipe_file(path)
            if recipe.id in recipes:
                raise DuplicateRecipeError(f"duplicate recipe id {recipe.id!r} in {directory}")
            recipes[recipe.id] = recipe
        with self._lock:
            self._recipes = recipes
            self._rebuild()
        return len(recipes)

    def save(self, recipe: Recipe, directory: Path) -> Path:
        """Persist one recipe as ``<id>.json`` (one document per recipe)."""
        directory = Path(directory)
        directory.mkdir(parents=True, exist_ok=True)
        path = directory / f"{recipe.id}.json"
        path.write_text(json.dumps(recipe_to_dict(recipe), indent=2) + "\n", encoding="utf-8")
        return path
