"""HTTP surface over the pipeline: orders, sessions, events, recipes, inventory.

The event endpoint serves line-delimited JSON and long-polls: a request with
``since`` past the newest event blocks (bounded by ``timeout``) until
something arrives, so clients resume from their last seq with no gaps.
"""

from __future__ import annotations

import json
import threading

from fastapi import FastAPI, Request, Response
from fastapi.responses import JSONResponse, PlainTextResponse
from fastapi.staticfiles import StaticFiles

from .config import AppConfig
from .corpus import RecipeIndex, recipe_from_dict, recipe_to_dict
from .errors import (
    DuplicateRecipeError,
    IllegalStimulusError,
    MixcellError,
    UnknownRecipeError,
    UnknownSessionError,
)
from .orchestrate import LIST_RECIPES, Orchestrator, parse_order
from .perception import InventorySnapshot, snapshot_from_document, snapshot_to_dict

_STATUS = {
    UnknownSessionError: 404,
    UnknownRecipeError: 404,
    IllegalStimulusError: 409,
    DuplicateRecipeError: 409,
}


class InventoryStore:
    """Current snapshot holder; swap is atomic from the readers' view."""

    def __init__(self):
        self._lock = threading.Lock()
        self._snapshot: InventorySnapshot | None = None

    def get(self) -> InventorySnapshot | None:
        return self._snapshot

    def put(self, snapshot: InventorySnapshot) -> None:
        with self._lock:
            self._snapshot = snapshot


def create_app(config: AppConfig | None = None, index: RecipeIndex | None = None) -> FastAPI:
    config = config or AppConfig()
    index = index or RecipeIndex()
    if config.recipes_dir is not None and config.recipes_dir.is_dir():
        index.reload(config.recipes_dir)
    inventory = InventoryStore()
    orchestrator = Orchestrator(index, config, snapshot_provider=inventory.get)

    app = FastAPI(title="mixcell", version="0.1.0")
    app.state.index = index
    app.state.config = config
    app.state.orchestrator = orchestrator
    app.state.inventory = inventory

    @app.exception_handler(MixcellError)
    async def _mixcell_error(request: Request, exc: MixcellError):
        status = _STATUS.get(type(exc), 400)
        return JSONResponse(status_code=status, content=exc.payload())

    @app.post("/v1/orders")
    def post_order(body: dict):
        text = str(body.get("text", ""))
        intent = parse_order(text)
        if intent.kind == LIST_RECIPES:
            return {"recipes": [recipe_to_dict(r) for r in index.recipes()]}
        session = orchestrator.place_order(text)
        return {"session_id": session.session_id, "state": session.state}

    @app.get("/v1/sessions/{session_id}")
    def get_session(session_id: str):
        return orchestrator.get(session_id).snapshot_view()

    @app.post("/v1/sessions/{session_id}/answers")
    def post_answer(session_id: str, body: dict):
        choice = str(body.get("choice", ""))
        if choice == "abort":
            session = orchestrator.abort(session_id)
        else:
            session = orchestrator.answer(session_id, str(body.get("anomaly_id", "")), choice)
        return session.snapshot_view()

    @app.get("/v1/sessions/{session_id}/events")
    def get_events(session_id: str, since: int = 0, timeout: float = 10.0):
        session = orchestrator.get(session_id)
        events = session.wait_events(since, min(max(timeout, 0.0), 30.0))
        body = "".join(json.dumps(e.to_dict()) + "\n" for e in events)
        return PlainTextResponse(content=body, media_type="application/x-ndjson")

    @app.get("/v1/recipes")
    def get_recipes():
        return {"recipes": [recipe_to_dict(r) for r in index.recipes()]}

    @app.post("/v1/recipes")
    def post_recipe(body: dict):
        recipe = recipe_from_dict(body)
        index.add(recipe)
        if config.recipes_dir is not None:
            index.save(recipe, config.recipes_dir)
        return Response(status_code=201, content=json.dumps({"id": recipe.id}), media_type="application/json")

    @app.get("/v1/inventory")
    def get_inventory():
        snapshot = inventory.get()
        if snapshot is None:
            return JSONResponse(status_code=404, content={"error": "no-snapshot"})
        return snapshot_to_dict(snapshot)

    @app.put("/v1/inventory")
    def put_inventory(body: dict):
        snapshot = snapshot_from_document(
            json.dumps(body).encode("utf-8"),
            config.volume_defaults,
            confidence_threshold=config.confidence_threshold,
            default_volume_ml=config.default_volume_ml,
        )
        inventory.put(snapshot)
        return snapshot_to_dict(snapshot)

    if config.console_dir is not None and config.console_dir.is_dir():
        app.mount("/", StaticFiles(directory=config.console_dir, html=True), name="console")

    return app
