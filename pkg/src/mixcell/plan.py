"""Compilation of resolved recipes into validated robot action programs.

The action vocabulary is the five-function arm API (take_glass, take_bottle,
left_bottle, pour_liquid, give_user). ``validate`` is the static safety
gate: it simulates the hold-state of both arms and the per-bottle volume
budget, and returns every violation instead of stopping at the first.
"""

from __future__ import annotations

import json
from dataclasses import dataclass

from .errors import MalformedDocumentError, UnresolvedRecipeError, ValidationFailureError
from .perception import InventorySnapshot
from .reconcile import ResolvedRecipe

DEFAULT_POUR_TOLERANCE = 0.01


@dataclass(frozen=True)
class TakeGlass:
    op = "take_glass"


@dataclass(frozen=True)
class TakeBottle:
    label: str
    item_id: str
    pose: tuple[float, float, float]
    op = "take_bottle"


@dataclass(frozen=True)
class LeftBottle:
    label: str
    op = "left_bottle"


@dataclass(frozen=True)
class PourLiquid:
    target_mass_g: float
    tolerance_rel: float
    density_g_per_ml: float = 1.0
    op = "pour_liquid"

    def __post_init__(self):
        if self.target_mass_g <= 0:
            raise ValueError(f"pour target must be > 0 g, got {self.target_mass_g}")
        if not (0 < self.tolerance_rel <= 0.1):
            raise ValueError(f"tolerance_rel must be in (0, 0.1], got {self.tolerance_rel}")


@dataclass(frozen=True)
class GiveUser:
    op = "give_user"


Action = TakeGlass | TakeBottle | LeftBottle | PourLiquid | GiveUser


@dataclass(frozen=True)
class ActionProgram:
    program_id: str
    recipe_id: str
    actions: tuple[Action, ...]
    provenance: tuple[dict, ...] = ()  # applied substitutions


@dataclass(frozen=True)
class Violation:
    code: str  # V1..V8
    index: int  # action index the violation anchors to (-1 for whole-program)
    message: str

    def describe(self) -> str:
        return f"{self.code}@{self.index}: {self.message}"


def compile_program(
    resolved: ResolvedRecipe,
    snapshot: InventorySnapshot,
    *,
    tolerance_rel: float = DEFAULT_POUR_TOLERANCE,
    program_id: str | None = None,
) -> ActionProgram:
    """Emit the canonical bottle-per-ingredient program: 3n + 2 actions.

    Pour targets are masses: quantity_ml x density_g_per_ml.
    """
    if not resolved.bindings:
        raise UnresolvedRecipeError(f"recipe {resolved.recipe_id!r} has no ingredient bindings")
    for binding in resolved.bindings:
        item = snapshot.by_id(binding.item.item_id)
        if item is None:
            raise UnresolvedRecipeError(
                f"binding for {binding.requirement.label!r} references item "
                f"{binding.item.item_id!r} absent from the snapshot"
            )
    actions: list[Action] = [TakeGlass()]
    for binding in resolved.bindings:
        req = binding.requirement
        actions.append(
            TakeBottle(label=binding.item.label, item_id=binding.item.item_id, pose=binding.item.pose_world)
        )
        actions.append(
            PourLiquid(
                target_mass_g=req.quantity_ml * req.density_g_per_ml,
                tolerance_rel=tolerance_rel,
                density_g_per_ml=req.density_g_per_ml,
            )
        )
        actions.append(LeftBottle(label=binding.item.label))
    actions.append(GiveUser())
    program = ActionProgram(
        program_id=program_id or f"prog-{resolved.recipe_id}",
        recipe_id=resolved.recipe_id,
        actions=tuple(actions),
        provenance=tuple(
            {"from": s.from_label, "to": s.to_label} for s in resolved.applied_substitutions
        ),
    )
    violations = validate(program, snapshot)
    if violations:
        raise ValidationFailureError(violations)
    return program


def validate(program: ActionProgram, snapshot: InventorySnapshot | None = None) -> list[Violation]:
    """Static checks V1-V8; returns [] when the program is safe.

    V7 (volume budget) and binding existence need the compile-time snapshot
    and are skipped when none is given; V1-V6 and V8 are structural.
    """
    violations: list[Violation] = []
    actions = program.actions

    if not actions or not isinstance(actions[0], TakeGlass):
        violations.append(Violation("V1", 0, "first action must be take_glass"))
    glass_count = sum(1 for a in actions if isinstance(a, TakeGlass))
    if glass_count != 1:
        violations.append(Violation("V1", -1, f"expected exactly one take_glass, found {glass_count}"))

    if not actions or not isinstance(actions[-1], GiveUser):
        violations.append(Violation("V2", len(actions) - 1, "last action must be give_user"))
    give_count = sum(1 for a in actions if isinstance(a, GiveUser))
    if give_count != 1:
        violations.append(Violation("V2", -1, f"expected exactly one give_user, found {give_count}"))

    held: TakeBottle | None = None
    unmatched_takes = 0
    poured_mass: dict[str, float] = {}
    pour_density: dict[str, float] = {}
    for i, action in enumerate(actions):
        if isinstance(action, TakeBottle):
            if held is not None:
                violations.append(
                    Violation("V3", i, f"take_bottle({action.label}) while still holding {held.label}")
                )
            held = action
            unmatched_takes += 1
        elif isinstance(action, LeftBottle):
            if held is None:
                violations.append(Violation("V4", i, f"left_bottle({action.label}) with no bottle held"))
            elif held.label != action.label:
                violations.append(
                    Violation("V4", i, f"left_bottle({action.label}) but holding {held.label}")
                )
                held = None
                unmatched_takes -= 1
            else:
                held = None
                unmatched_takes -= 1
        elif isinstance(action, PourLiquid):
            if held is None:
                violations.append(Violation("V5", i, "pour_liquid with no bottle held"))
            else:
                poured_mass[held.item_id] = poured_mass.get(held.item_id, 0.0) + action.target_mass_g
                pour_density[held.item_id] = action.density_g_per_ml
        elif isinstance(action, GiveUser):
            if held is not None:
                violations.append(Violation("V6", i, f"give_user while still holding {held.label}"))

    if unmatched_takes > 0:
        violations.append(
            Violation("V8", -1, f"{unmatched_takes} take_bottle action(s) without a matching left_bottle")
        )

    if snapshot is not None:
        for item_id, mass in sorted(poured_mass.items()):
            item = snapshot.by_id(item_id)
            if item is None:
                # Existence is execute's binding-mismatch concern, not V7's.
                continue
            budget = item.available_ml * pour_density[item_id]
            if mass > budget + 1e-9:
                violations.append(
                    Violation(
                        "V7",
                        -1,
                        f"cumulative pour of {mass:g} g from {item_id} exceeds "
                        f"available {budget:g} g",
                    )
                )
    return violations


def _action_to_dict(action: Action) -> dict:
    if isinstance(action, TakeGlass):
        return {"op": "take_glass"}
    if isinstance(action, TakeBottle):
        return {
            "op": "take_bottle",
            "label": action.label,
            "item_id": action.item_id,
            "pose": list(action.pose),
        }
    if isinstance(action, LeftBottle):
        return {"op": "left_bottle", "label": action.label}
    if isinstance(action, PourLiquid):
        return {
            "op": "pour_liquid",
            "target_mass_g": action.target_mass_g,
            "tolerance_rel": action.tolerance_rel,
            "density_g_per_ml": action.density_g_per_ml,
        }
    if isinstance(action, GiveUser):
        return {"op": "give_user"}
    raise TypeError(f"unknown action type {type(action).__name__}")


def _action_from_dict(doc: dict, index: int) -> Action:
    if not isinstance(doc, dict) or "op" not in doc:
        raise MalformedDocumentError(f"actions[{index}]: missing op")
    op = doc["op"]
    try:
        if op == "take_glass":
            return TakeGlass()
        if op == "take_bottle":
            pose = doc["pose"]
            if not isinstance(pose, list) or len(pose) != 3:
                raise MalformedDocumentError(f"actions[{index}]: pose must be [x, y, z]")
            return TakeBottle(
                label=str(doc["label"]),
                item_id=str(doc["item_id"]),
                pose=(float(pose[0]), float(pose[1]), float(pose[2])),
            )
        if op == "left_bottle":
            return LeftBottle(label=str(doc["label"]))
        if op == "pour_liquid":
            return PourLiquid(
                target_mass_g=float(doc["target_mass_g"]),
                tolerance_rel=float(doc["tolerance_rel"]),
                density_g_per_ml=float(doc.get("density_g_per_ml", 1.0)),
            )
        if op == "give_user":
            return GiveUser()
    except MalformedDocumentError:
        raise
    except (KeyError, TypeError, ValueError) as exc:
        raise MalformedDocumentError(f"actions[{index}]: {exc}") from exc
    raise MalformedDocumentError(f"actions[{index}]: unknown action name {op!r}")


def serialize(program: ActionProgram) -> bytes:
    doc = {
        "program_id": program.program_id,
        "recipe_id": program.recipe_id,
        "actions": [_action_to_dict(a) for a in program.actions],
        "provenance": list(program.provenance),
    }
    return (json.dumps(doc, indent=2) + "\n").encode("utf-8")


def deserialize(data: bytes | str) -> ActionProgram:
    """Parse and structurally re-validate a serialized program."""
    if isinstance(data, bytes):
        data = data.decode("utf-8")
    try:
        doc = json.loads(data)
    except json.JSONDecodeError as exc:
        raise MalformedDocumentError(f"not valid JSON: {exc}") from exc
    if not isinstance(doc, dict) or not isinstance(doc.get("actions"), list):
        raise MalformedDocumentError("program document must be an object with an actions list")
    try:
        actions = tuple(_action_from_dict(a, i) for i, a in enumerate(doc["actions"]))
    except ValueError as exc:
        raise MalformedDocumentError(str(exc)) from exc
    program = ActionProgram(
        program_id=str(doc.get("program_id", "")),
        recipe_id=str(doc.get("recipe_id", "")),
        actions=actions,
        provenance=tuple(doc.get("provenance", ())),
    )
    violations = validate(program)
    if violations:
        raise ValidationFailureError(violations)
    return program
