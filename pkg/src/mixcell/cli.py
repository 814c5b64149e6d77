"""Operator CLI: every pipeline stage runs standalone, without the service."""

from __future__ import annotations

import json
import random
import sys
from pathlib import Path

import click

from . import demo as demo_mod
from .config import AppConfig, load_config
from .corpus import RecipeIndex
from .errors import MixcellError, ValidationFailureError
from .orchestrate import SERVED
from .perception import snapshot_from_document, snapshot_to_dict
from .plan import compile_program, deserialize, serialize, validate
from .reconcile import Aborted, diff, resolve
from .sim import ExecutionFailure, execute, report_to_dict


def _die(exc: MixcellError) -> None:
    click.echo(json.dumps(exc.payload()), err=True)
    sys.exit(1)


def _load_snapshot(detections_path: Path, config: AppConfig):
    return snapshot_from_document(
        Path(detections_path).read_bytes(),
        config.volume_defaults,
        confidence_threshold=config.confidence_threshold,
        default_volume_ml=config.default_volume_ml,
    )


def _load_index(recipes_dir: Path) -> RecipeIndex:
    index = RecipeIndex()
    index.reload(recipes_dir)
    return index


@click.group()
@click.option("--config", "config_path", type=click.Path(exists=True, path_type=Path), default=None)
@click.pass_context
def main(ctx, config_path):
    """Desk-scale drink-mixing pipeline."""
    ctx.obj = load_config(config_path)


@main.command()
@click.argument("recipes_dir", type=click.Path(exists=True, file_okay=False, path_type=Path))
@click.pass_obj
def ingest(config: AppConfig, recipes_dir: Path):
    """Load and validate every recipe document in RECIPES_DIR."""
    try:
        index = _load_index(recipes_dir)
    except MixcellError as exc:
        _die(exc)
    click.echo(f"loaded {len(index)} recipes from {recipes_dir}")


@main.command()
@click.argument("query")
@click.option("-k", "top_k", type=int, default=5, show_default=True)
@click.option("--recipes", "recipes_dir", type=click.Path(exists=True, file_okay=False, path_type=Path), required=True)
def retrieve(query: str, top_k: int, recipes_dir: Path):
    """Top-k recipes for QUERY by cosine similarity."""
    try:
        index = _load_index(recipes_dir)
        hits = index.retrieve(query, top_k)
    except MixcellError as exc:
        _die(exc)
    click.echo(
        json.dumps(
            [{"recipe_id": h.recipe_id, "score": h.score, "rank": h.rank} for h in hits],
            indent=2,
        )
    )


@main.command()
@click.argument("detections", type=click.Path(exists=True, dir_okay=False, path_type=Path))
@click.pass_obj
def inventory(config: AppConfig, detections: Path):
    """Build the inventory snapshot from a detection document."""
    try:
        snapshot = _load_snapshot(detections, config)
    except MixcellError as exc:
        _die(exc)
    click.echo(json.dumps(snapshot_to_dict(snapshot), indent=2))


@main.command()
@click.argument("recipe_id")
@click.argument("detections", type=click.Path(exists=True, dir_okay=False, path_type=Path))
@click.option("--recipes", "recipes_dir", type=click.Path(exists=True, file_okay=False, path_type=Path), required=True)
@click.option("--unattended", is_flag=True, help="apply predefined substitution rules automatically")
@click.pass_obj
def reconcile(config: AppConfig, recipe_id: str, detections: Path, recipes_dir: Path, unattended: bool):
    """Diff RECIPE_ID against the detected inventory; optionally auto-resolve."""
    try:
        index = _load_index(recipes_dir)
        recipe = index.get(recipe_id)
        snapshot = _load_snapshot(detections, config)
        anomalies = diff(recipe, snapshot, config.rules, fuzzy_threshold=config.fuzzy_threshold)
        out = {
            "recipe_id": recipe_id,
            "anomalies": [
                {
                    "anomaly_id": a.anomaly_id,
                    "kind": a.kind,
                    "subject": a.subject_label,
                    "details": a.details,
                    "suggestions": list(a.suggestions),
                }
                for a in anomalies
            ],
        }
        if unattended:
            resolved = resolve(
                recipe, snapshot, anomalies, unattended=True,
                rules=config.rules, fuzzy_threshold=config.fuzzy_threshold,
            )
            if isinstance(resolved, Aborted):
                out["resolution"] = {"aborted": resolved.reason}
            else:
                out["resolution"] = {
                    "bindings": [
                        {
                            "label": b.requirement.label,
                            "quantity_ml": b.requirement.quantity_ml,
                            "item_id": b.item.item_id,
                        }
                        for b in resolved.bindings
                    ],
                    "applied_substitutions": [
                        {"from": s.from_label, "to": s.to_label}
                        for s in resolved.applied_substitutions
                    ],
                }
    except MixcellError as exc:
        _die(exc)
    click.echo(json.dumps(out, indent=2))


@main.command("compile")
@click.argument("recipe_id")
@click.argument("detections", type=click.Path(exists=True, dir_okay=False, path_type=Path))
@click.option("--recipes", "recipes_dir", type=click.Path(exists=True, file_okay=False, path_type=Path), required=True)
@click.option("-o", "output", type=click.Path(dir_okay=False, path_type=Path), required=True)
@click.pass_obj
def compile_cmd(config: AppConfig, recipe_id: str, detections: Path, recipes_dir: Path, output: Path):
    """Resolve RECIPE_ID against the inventory and compile an action program."""
    try:
        index = _load_index(recipes_dir)
        recipe = index.get(recipe_id)
        snapshot = _load_snapshot(detections, config)
        anomalies = diff(recipe, snapshot, config.rules, fuzzy_threshold=config.fuzzy_threshold)
        resolved = resolve(
            recipe, snapshot, anomalies, unattended=True,
            rules=config.rules, fuzzy_threshold=config.fuzzy_threshold,
        )
        if isinstance(resolved, Aborted):
            raise MixcellError(resolved.reason)
        program = compile_program(resolved, snapshot, tolerance_rel=config.pour_tolerance_rel)
        output.write_bytes(serialize(program))
    except MixcellError as exc:
        _die(exc)
    click.echo(f"wrote {program.program_id} ({len(program.actions)} actions) to {output}")


@main.command()
@click.argument("program_path", type=click.Path(exists=True, dir_okay=False, path_type=Path))
@click.argument("detections", type=click.Path(exists=True, dir_okay=False, path_type=Path))
@click.option("--seed", type=int, default=0, show_default=True)
@click.option("-o", "output", type=click.Path(dir_okay=False, path_type=Path), default=None)
@click.pass_obj
def simulate(config: AppConfig, program_path: Path, detections: Path, seed: int, output: Path | None):
    """Execute a serialized program on the simulated cell."""
    try:
        program = deserialize(program_path.read_bytes())
        snapshot = _load_snapshot(detections, config)
        violations = validate(program, snapshot)
        if violations:
            raise ValidationFailureError(violations)
        report = execute(program, snapshot, config.sim, random.Random(seed))
    except ExecutionFailure as exc:
        if output is not None:
            output.write_text(json.dumps(report_to_dict(exc.report), indent=2))
        _die(exc)
    except MixcellError as exc:
        _die(exc)
    if output is not None:
        output.write_text(json.dumps(report_to_dict(report), indent=2))
    summary = {
        "program_id": report.program_id,
        "ok": report.ok,
        "pours": [
            {
                "item_id": t.item_id,
                "target_g": t.target_mass_g,
                "final_g": t.outcome.final_mass_g,
                "within_tolerance": t.outcome.within_tolerance,
            }
            for t in report.traces
        ],
        "glass_mass_g": report.final_state["glass_mass_g"],
    }
    click.echo(json.dumps(summary, indent=2))


@main.command()
@click.option("--bind", default=None, help="host:port (default from config or MIXCELL_BIND)")
@click.pass_obj
def serve(config: AppConfig, bind: str | None):
    """Run the HTTP service."""
    import uvicorn

    from .service import create_app

    address = bind or config.bind
    host, _, port = address.partition(":")
    uvicorn.run(create_app(config), host=host or "127.0.0.1", port=int(port or 8000))


@main.command()
@click.option("--seed", type=int, default=0, show_default=True)
@click.pass_obj
def demo(config: AppConfig, seed: int):
    """Scripted end-to-end run: ten orders, including the missing-sugar flow."""
    results = demo_mod.run_demo(config, seed=seed)
    served = 0
    for result in results:
        session = result.session
        answers = "".join(f" [answered {c!r}]" for _, c in result.answered)
        click.echo(f"{session.session_id} {result.order_text!r} -> {session.state}{answers}")
        if session.state == SERVED:
            served += 1
    click.echo(f"demo: {served}/{len(results)} sessions Served")
    if served != len(results):
        sys.exit(1)


if __name__ == "__main__":
    main()
