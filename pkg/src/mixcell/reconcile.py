"""Recipe-vs-inventory reconciliation: typed anomalies and their resolution.

``diff`` compares each required ingredient against the snapshot and emits at
most one anomaly per ingredient slot. ``Resolver`` owns the iterative state
(substitutions, quantity reductions, accepted unreadable bottles) so that
re-running diff after every answer converges instead of re-flagging what the
user already settled.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from .corpus import IngredientReq, Recipe, embed, normalize_text
from .errors import (
    IllegalOptionError,
    UnknownAnomalyError,
    UnresolvableError,
)
from .perception import InventoryItem, InventorySnapshot

MISSING = "MissingIngredient"
INSUFFICIENT = "InsufficientQuantity"
UNREADABLE = "UnreadableLabel"
AMBIGUOUS = "AmbiguousMatch"

ABORT = "abort"
REDUCE_TO_AVAILABLE = "reduce-to-available"

DEFAULT_FUZZY_THRESHOLD = 0.6


@dataclass(frozen=True)
class SubstitutionRule:
    from_label: str
    to_label: str
    note: str = ""

    def __post_init__(self):
        if self.from_label == self.to_label:
            raise ValueError(f"substitution rule maps {self.from_label!r} to itself")


DEFAULT_RULES = (SubstitutionRule("sugar", "honey", "default sweetener swap"),)


def load_rules(path: Path) -> tuple[SubstitutionRule, ...]:
    """Load the substitution rule table: JSON list of {"from", "to", "note"}."""
    entries = json.loads(Path(path).read_text(encoding="utf-8"))
    return tuple(
        SubstitutionRule(
            from_label=normalize_text(e["from"]),
            to_label=normalize_text(e["to"]),
            note=str(e.get("note", "")),
        )
        for e in entries
    )


@dataclass(frozen=True)
class Anomaly:
    anomaly_id: str
    kind: str
    subject_label: str
    details: dict
    suggestions: tuple[str, ...]


@dataclass(frozen=True)
class UserPrompt:
    anomaly_id: str
    text: str
    options: tuple[str, ...]


@dataclass(frozen=True)
class AppliedSubstitution:
    from_label: str
    to_label: str


@dataclass(frozen=True)
class Binding:
    requirement: IngredientReq  # effective (post-substitution/reduction)
    item: InventoryItem
    original_label: str


@dataclass(frozen=True)
class ResolvedRecipe:
    recipe_id: str
    bindings: tuple[Binding, ...]
    applied_substitutions: tuple[AppliedSubstitution, ...]


@dataclass(frozen=True)
class Aborted:
    reason: str = "user abort"


@dataclass
class _Slot:
    index: int
    original: IngredientReq
    label: str
    quantity_ml: float
    density_g_per_ml: float
    visited: set[str] = field(default_factory=set)
    accepted_unreadable: bool = False


def _exact_matches(label: str, snapshot: InventorySnapshot) -> list[InventoryItem]:
    return [item for item in snapshot.items if item.label == label]


def _choose(matches: list[InventoryItem]) -> InventoryItem:
    # Deterministic bottle choice: most volume, then smallest id.
    return min(matches, key=lambda it: (-it.available_ml, it.item_id))


def _fuzzy_candidates(
    label: str, snapshot: InventorySnapshot, threshold: float
) -> list[str]:
    """Snapshot labels within cosine distance of the wanted label, best first."""
    query = embed(label)
    scored: dict[str, float] = {}
    for item in snapshot.items:
        if item.label == label or item.label in scored:
            continue
        score = float(np.dot(query, embed(item.label)))
        if score >= threshold:
            scored[item.label] = score
    return [lbl for lbl, _ in sorted(scored.items(), key=lambda kv: (-kv[1], kv[0]))]


def _diff_slot(
    slot: _Slot,
    snapshot: InventorySnapshot,
    rules: tuple[SubstitutionRule, ...],
    threshold: float,
) -> Anomaly | None:
    matches = _exact_matches(slot.label, snapshot)
    if matches:
        best = _choose(matches)
        if not any(m.readable for m in matches) and not slot.accepted_unreadable:
            return Anomaly(
                anomaly_id=f"a{slot.index}-unreadable",
                kind=UNREADABLE,
                subject_label=slot.label,
                details={"item_id": best.item_id},
                suggestions=(slot.label,),
            )
        if best.available_ml < slot.quantity_ml:
            return Anomaly(
                anomaly_id=f"a{slot.index}-insufficient",
                kind=INSUFFICIENT,
                subject_label=slot.label,
                details={
                    "required_ml": slot.quantity_ml,
                    "available_ml": best.available_ml,
                    "item_id": best.item_id,
                },
                suggestions=(),
            )
        return None

    rule_targets = []
    for rule in rules:
        if rule.from_label == slot.label and rule.to_label not in rule_targets:
            rule_targets.append(rule.to_label)
    fuzzy = _fuzzy_candidates(slot.label, snapshot, threshold)
    if not rule_targets and len(fuzzy) >= 2:
        return Anomaly(
            anomaly_id=f"a{slot.index}-ambiguous",
            kind=AMBIGUOUS,
            subject_label=slot.label,
            details={},
            suggestions=tuple(fuzzy),
        )
    suggestions = rule_targets + [lbl for lbl in fuzzy if lbl not in rule_targets]
    return Anomaly(
        anomaly_id=f"a{slot.index}-missing",
        kind=MISSING,
        subject_label=slot.label,
        details={},
        suggestions=tuple(suggestions),
    )


def _slots_from_recipe(recipe: Recipe) -> list[_Slot]:
    return [
        _Slot(
            index=i,
            original=req,
            label=normalize_text(req.label),
            quantity_ml=req.quantity_ml,
            density_g_per_ml=req.density_g_per_ml,
            visited={normalize_text(req.label)},
        )
        for i, req in enumerate(recipe.ingredients)
    ]


def diff(
    recipe: Recipe,
    snapshot: InventorySnapshot,
    rules: tuple[SubstitutionRule, ...] = (),
    *,
    fuzzy_threshold: float = DEFAULT_FUZZY_THRESHOLD,
) -> list[Anomaly]:
    """Typed discrepancies between a recipe and the current snapshot.

    At most one anomaly per ingredient, in recipe order. A fully stocked
    recipe yields the empty list.
    """
    anomalies = []
    for slot in _slots_from_recipe(recipe):
        anomaly = _diff_slot(slot, snapshot, rules, fuzzy_threshold)
        if anomaly is not None:
            anomalies.append(anomaly)
    return anomalies


def propose_prompt(anomaly: Anomaly) -> UserPrompt:
    """Deterministic user-facing prompt for one anomaly; options end with abort."""
    subject = anomaly.subject_label.capitalize()
    if anomaly.kind == MISSING or anomaly.kind == AMBIGUOUS:
        if anomaly.suggestions:
            alternatives = " or ".join(anomaly.suggestions)
            text = f"{subject} is missing. Would you like to use {alternatives}?"
        else:
            text = f"{subject} is missing and no substitute is available."
        options = anomaly.suggestions + (ABORT,)
    elif anomaly.kind == INSUFFICIENT:
        required = anomaly.details["required_ml"]
        available = anomaly.details["available_ml"]
        text = (
            f"Only {available:g} ml of {anomaly.subject_label} detected, "
            f"but {required:g} ml is required. Pour the available amount instead?"
        )
        options = (REDUCE_TO_AVAILABLE, ABORT)
    elif anomaly.kind == UNREADABLE:
        text = (
            f"A bottle matching {anomaly.subject_label} was detected "
            f"but its label could not be read. Use it anyway?"
        )
        options = anomaly.suggestions + (ABORT,)
    else:
        raise ValueError(f"unknown anomaly kind {anomaly.kind!r}")
    return UserPrompt(anomaly_id=anomaly.anomaly_id, text=text, options=options)


class Resolver:
    """Iterative reconciliation state for one recipe/snapshot pair."""

    def __init__(
        self,
        recipe: Recipe,
        snapshot: InventorySnapshot,
        rules: tuple[SubstitutionRule, ...] = (),
        *,
        fuzzy_threshold: float = DEFAULT_FUZZY_THRESHOLD,
    ):
        self.recipe = recipe
        self.snapshot = snapshot
        self.rules = tuple(rules)
        self.fuzzy_threshold = fuzzy_threshold
        self.applied_substitutions: list[AppliedSubstitution] = []
        self.aborted: Aborted | None = None
        self._slots = _slots_from_recipe(recipe)

    def outstanding(self) -> list[Anomaly]:
        if self.aborted is not None:
            return []
        anomalies = []
        for slot in self._slots:
            anomaly = _diff_slot(slot, self.snapshot, self.rules, self.fuzzy_threshold)
            if anomaly is not None:
                anomalies.append(anomaly)
        return anomalies

    def prompts(self) -> list[UserPrompt]:
        return [propose_prompt(a) for a in self.outstanding()]

    def _slot_for(self, anomaly: Anomaly) -> _Slot:
        index = int(anomaly.anomaly_id[1:].split("-", 1)[0])
        return self._slots[index]

    def apply_answer(self, anomaly_id: str, choice: str) -> None:
        outstanding = {a.anomaly_id: a for a in self.outstanding()}
        anomaly = outstanding.get(anomaly_id)
        if anomaly is None:
            raise UnknownAnomalyError(f"no outstanding anomaly with id {anomaly_id!r}")
        if choice == ABORT:
            self.aborted = Aborted(reason=f"user aborted at {anomaly.kind} for {anomaly.subject_label}")
            return
        prompt = propose_prompt(anomaly)
        if choice not in prompt.options:
            raise IllegalOptionError(
                f"choice {choice!r} is not an option for anomaly {anomaly_id!r} "
                f"(options: {', '.join(prompt.options)})"
            )
        self._apply(anomaly, choice)

    def _apply(self, anomaly: Anomaly, choice: str) -> None:
        slot = self._slot_for(anomaly)
        if anomaly.kind in (MISSING, AMBIGUOUS):
            self._substitute(slot, choice)
        elif anomaly.kind == INSUFFICIENT:
            slot.quantity_ml = float(anomaly.details["available_ml"])
        elif anomaly.kind == UNREADABLE:
            slot.accepted_unreadable = True

    def _substitute(self, slot: _Slot, to_label: str) -> None:
        if to_label in slot.visited:
            raise UnresolvableError(
                f"substitution cycle: {slot.label!r} -> {to_label!r} was already tried "
                f"for ingredient {slot.original.label!r}"
            )
        self.applied_substitutions.append(AppliedSubstitution(slot.label, to_label))
        slot.visited.add(to_label)
        slot.label = to_label
        slot.accepted_unreadable = False

    def auto_pass(self) -> None:
        """One unattended pass: predefined rule per anomaly, or fail."""
        for anomaly in self.outstanding():
            slot = self._slot_for(anomaly)
            if anomaly.kind == MISSING:
                rule = next((r for r in self.rules if r.from_label == slot.label), None)
                if rule is None:
                    raise UnresolvableError(
                        f"{slot.label!r} is missing and no substitution rule applies"
                    )
                self._substitute(slot, rule.to_label)
            elif anomaly.kind == INSUFFICIENT:
                self._apply(anomaly, REDUCE_TO_AVAILABLE)
            elif anomaly.kind == UNREADABLE:
                slot.accepted_unreadable = True
            else:
                raise UnresolvableError(
                    f"{slot.label!r} has multiple candidate matches "
                    f"({', '.join(anomaly.suggestions)}); unattended mode cannot choose"
                )

    def run_unattended(self) -> None:
        """Apply predefined rules until clean, within |ingredients| passes."""
        for _ in range(len(self._slots)):
            if not self.outstanding():
                return
            self.auto_pass()
        if self.outstanding():
            raise UnresolvableError(
                "anomalies remain after the substitution pass budget was exhausted"
            )

    def result(self) -> ResolvedRecipe:
        if self.aborted is not None:
            raise UnresolvableError("session was aborted; no resolved recipe")
        remaining = self.outstanding()
        if remaining:
            raise UnresolvableError(
                f"{len(remaining)} anomalies outstanding: "
                + ", ".join(f"{a.kind}({a.subject_label})" for a in remaining)
            )
        bindings = []
        for slot in self._slots:
            item = _choose(_exact_matches(slot.label, self.snapshot))
            requirement = IngredientReq(
                label=slot.label,
                quantity_ml=slot.quantity_ml,
                density_g_per_ml=slot.density_g_per_ml,
            )
            bindings.append(Binding(requirement=requirement, item=item, original_label=slot.original.label))
        return ResolvedRecipe(
            recipe_id=self.recipe.id,
            bindings=tuple(bindings),
            applied_substitutions=tuple(self.applied_substitutions),
        )


def resolve(
    recipe: Recipe,
    snapshot: InventorySnapshot,
    anomalies: list[Anomaly],
    answers: dict[str, str] | None = None,
    *,
    unattended: bool = False,
    rules: tuple[SubstitutionRule, ...] = (),
    fuzzy_threshold: float = DEFAULT_FUZZY_THRESHOLD,
) -> ResolvedRecipe | Aborted:
    """Batch resolution: apply answers (or predefined rules), re-diff, succeed iff clean.

    Raises unknown-anomaly-id / illegal-option for bad answers and
    unresolvable when anomalies survive the pass budget.
    """
    resolver = Resolver(recipe, snapshot, rules, fuzzy_threshold=fuzzy_threshold)
    known_ids = {a.anomaly_id for a in anomalies}
    if answers:
        for anomaly_id in answers:
            if anomaly_id not in known_ids:
                raise UnknownAnomalyError(f"answer references unknown anomaly id {anomaly_id!r}")
        # Apply in diff order for determinism.
        for anomaly in anomalies:
            if anomaly.anomaly_id in answers:
                resolver.apply_answer(anomaly.anomaly_id, answers[anomaly.anomaly_id])
                if resolver.aborted is not None:
                    return resolver.aborted
    if unattended:
        resolver.run_unattended()
    return resolver.result()


def verify_resolved(
    resolved: ResolvedRecipe,
    snapshot: InventorySnapshot,
    rules: tuple[SubstitutionRule, ...] = (),
    *,
    fuzzy_threshold: float = DEFAULT_FUZZY_THRESHOLD,
) -> list[Anomaly]:
    """Re-run diff over the resolved bindings; a valid resolution yields []."""
    anomalies = []
    for i, binding in enumerate(resolved.bindings):
        slot = _Slot(
            index=i,
            original=binding.requirement,
            label=binding.requirement.label,
            quantity_ml=binding.requirement.quantity_ml,
            density_g_per_ml=binding.requirement.density_g_per_ml,
            accepted_unreadable=not binding.item.readable,
        )
        anomaly = _diff_slot(slot, snapshot, rules, fuzzy_threshold)
        if anomaly is not None:
            anomalies.append(anomaly)
    return anomalies
