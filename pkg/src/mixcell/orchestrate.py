"""Session state machine: from an order text to a served (simulated) drink.

Each session owns an append-only, gap-free event log. The machine advances
automatically through retrieval, reconciliation, compilation, and execution,
pausing in AwaitingUser whenever anomalies need a human answer. Stimuli for
one session are processed strictly serially under the session lock; distinct
sessions are independent.
"""

from __future__ import annotations

import random
import re
import threading
from dataclasses import dataclass, field
from datetime import datetime, timezone
from typing import Protocol

from .config import AppConfig
from .corpus import RecipeIndex, normalize_text
from .errors import (
    IllegalOptionError,
    IllegalStimulusError,
    UnknownAnomalyError,
    UnknownSessionError,
    UnresolvableError,
    ValidationFailureError,
)
from .perception import InventorySnapshot
from .plan import compile_program
from .reconcile import Resolver, UserPrompt, propose_prompt
from .sim import ExecutionFailure, execute, report_to_dict

ORDERED = "Ordered"
RETRIEVED = "Retrieved"
RECONCILING = "Reconciling"
AWAITING_USER = "AwaitingUser"
RESOLVED = "Resolved"
COMPILED = "Compiled"
EXECUTING = "Executing"
SERVED = "Served"
FAILED = "Failed"
ABORTED = "Aborted"

TERMINAL_STATES = frozenset({SERVED, FAILED, ABORTED})

MAKE_DRINK = "MakeDrink"
LIST_RECIPES = "ListRecipes"
UNKNOWN = "Unknown"

_ORDER_RE = re.compile(r"^\s*make\s+(?:me\s+)?(?:an?\s+)?(?P<name>.+?)\s*$", re.IGNORECASE)
_LIST_RE = re.compile(r"^\s*list\s+recipes\s*$", re.IGNORECASE)


@dataclass(frozen=True)
class Intent:
    kind: str
    name: str | None
    raw: str


def parse_order(text: str) -> Intent:
    """Tiny order grammar; unknown inputs keep the raw text for retrieval fallback."""
    if _LIST_RE.match(text):
        return Intent(kind=LIST_RECIPES, name=None, raw=text)
    m = _ORDER_RE.match(text)
    if m:
        return Intent(kind=MAKE_DRINK, name=normalize_text(m.group("name")), raw=text)
    return Intent(kind=UNKNOWN, name=None, raw=text)


class SpeechAdapter(Protocol):
    """Seam for text-to-speech backends.

    Every user-facing text is mirrored into the session event log as a
    "speech" event regardless of adapter; a real TTS engine can be plugged
    in here without touching the state machine.
    """

    def say(self, session_id: str, text: str) -> None: ...


class TextLoopback:
    """Default speech output: the event log itself is the channel."""

    def say(self, session_id: str, text: str) -> None:
        pass


@dataclass(frozen=True)
class SessionEvent:
    seq: int
    ts: str
    kind: str
    payload: dict

    def to_dict(self) -> dict:
        return {"seq": self.seq, "ts": self.ts, "kind": self.kind, "payload": self.payload}


@dataclass
class Session:
    session_id: str
    order_text: str
    seed: int
    snapshot: InventorySnapshot | None
    state: str = ORDERED
    recipe_id: str | None = None
    program_id: str | None = None
    events: list[SessionEvent] = field(default_factory=list)
    prompts: dict[str, UserPrompt] = field(default_factory=dict)
    resolver: Resolver | None = None
    program = None
    report = None
    # `lock` serializes stimuli; `cond` guards the event list so long-poll
    # readers can observe events while a pipeline run still holds `lock`.
    lock: threading.RLock = field(default_factory=threading.RLock)
    cond: threading.Condition = field(default_factory=threading.Condition)

    def append(self, kind: str, payload: dict) -> SessionEvent:
        with self.cond:
            event = SessionEvent(
                seq=len(self.events) + 1,
                ts=datetime.now(timezone.utc).isoformat(),
                kind=kind,
                payload=payload,
            )
            self.events.append(event)
            self.cond.notify_all()
        return event

    def speak(self, text: str) -> None:
        self.append("speech", {"text": text})

    def set_state(self, new_state: str) -> None:
        old = self.state
        self.state = new_state
        self.append("state", {"from": old, "to": new_state})

    def events_since(self, since: int) -> list[SessionEvent]:
        with self.cond:
            return [e for e in self.events if e.seq > since]

    def wait_events(self, since: int, timeout: float) -> list[SessionEvent]:
        """Long-poll helper: block until an event past `since` exists or timeout."""
        with self.cond:
            if not any(e.seq > since for e in self.events):
                self.cond.wait(timeout)
            return [e for e in self.events if e.seq > since]

    def snapshot_view(self) -> dict:
        with self.cond:
            view = {
                "session_id": self.session_id,
                "state": self.state,
                "order_text": self.order_text,
                "recipe_id": self.recipe_id,
                "program_id": self.program_id,
                "prompts": [
                    {"anomaly_id": p.anomaly_id, "text": p.text, "options": list(p.options)}
                    for p in self.prompts.values()
                ],
                "last_seq": len(self.events),
            }
            if self.report is not None:
                view["report"] = report_to_dict(self.report)
            return view


@dataclass(frozen=True)
class AnswerStimulus:
    anomaly_id: str
    choice: str


@dataclass(frozen=True)
class AbortStimulus:
    reason: str = "user abort"


class Orchestrator:
    """Creates sessions and drives their state machines."""

    def __init__(
        self,
        index: RecipeIndex,
        config: AppConfig,
        snapshot_provider=None,
        speech: SpeechAdapter | None = None,
    ):
        self.index = index
        self.config = config
        self.speech = speech or TextLoopback()
        self._snapshot_provider = snapshot_provider or (lambda: None)
        self._sessions: dict[str, Session] = {}
        self._lock = threading.Lock()
        self._counter = 0

    def _speak(self, session: Session, text: str) -> None:
        session.speak(text)
        self.speech.say(session.session_id, text)

    # -- session registry ------------------------------------------------

    def get(self, session_id: str) -> Session:
        session = self._sessions.get(session_id)
        if session is None:
            raise UnknownSessionError(f"no session {session_id!r}")
        return session

    def sessions(self) -> list[Session]:
        with self._lock:
            return list(self._sessions.values())

    # -- stimuli ----------------------------------------------------------

    def place_order(self, text: str, *, seed: int | None = None) -> Session:
        with self._lock:
            self._counter += 1
            session = Session(
                session_id=f"s-{self._counter:04d}",
                order_text=text,
                seed=self._counter if seed is None else seed,
                snapshot=self._snapshot_provider(),
            )
            self._sessions[session.session_id] = session
        with session.lock:
            session.append("order", {"text": text})
            session.append("state", {"from": None, "to": ORDERED})
            self._progress(session)
        return session

    def advance(self, session: Session, stimulus) -> Session:
        """Apply one external stimulus; internal transitions run automatically."""
        with session.lock:
            if isinstance(stimulus, AbortStimulus):
                if session.state in TERMINAL_STATES:
                    raise IllegalStimulusError(session.state, "abort")
                self._speak(session, "Order cancelled.")
                session.prompts.clear()
                session.set_state(ABORTED)
                return session
            if isinstance(stimulus, AnswerStimulus):
                if session.state != AWAITING_USER:
                    raise IllegalStimulusError(session.state, f"answer({stimulus.anomaly_id})")
                self._apply_answer(session, stimulus.anomaly_id, stimulus.choice)
                return session
            raise IllegalStimulusError(session.state, repr(stimulus))

    def answer(self, session_id: str, anomaly_id: str, choice: str) -> Session:
        return self.advance(self.get(session_id), AnswerStimulus(anomaly_id, choice))

    def abort(self, session_id: str) -> Session:
        return self.advance(self.get(session_id), AbortStimulus())

    # -- machine internals -------------------------------------------------

    def _fail(self, session: Session, message: str) -> None:
        self._speak(session, message)
        session.append("error", {"detail": message})
        session.set_state(FAILED)

    def _apply_answer(self, session: Session, anomaly_id: str, choice: str) -> None:
        if anomaly_id not in session.prompts:
            raise IllegalStimulusError(session.state, f"answer({anomaly_id}): prompt not open")
        prompt = session.prompts[anomaly_id]
        session.append("answer", {"anomaly_id": anomaly_id, "choice": choice})
        try:
            session.resolver.apply_answer(anomaly_id, choice)
        except (UnknownAnomalyError, IllegalOptionError) as exc:
            raise IllegalStimulusError(session.state, f"answer({anomaly_id}): {exc}") from exc
        except UnresolvableError as exc:
            self._fail(session, f"Cannot prepare the drink: {exc}")
            return
        session.prompts.pop(anomaly_id, None)
        if session.resolver.aborted is not None:
            self._speak(session, "Order cancelled.")
            session.prompts.clear()
            session.set_state(ABORTED)
            return
        session.prompts.clear()
        session.set_state(RECONCILING)
        self._progress(session)

    def _progress(self, session: Session) -> None:
        """Run automatic transitions until the machine blocks or terminates."""
        while session.state not in TERMINAL_STATES and session.state != AWAITING_USER:
            if session.state == ORDERED:
                self._do_retrieve(session)
            elif session.state == RETRIEVED:
                session.set_state(RECONCILING)
            elif session.state == RECONCILING:
                self._do_reconcile(session)
            elif session.state == RESOLVED:
                self._do_compile(session)
            elif session.state == COMPILED:
                session.set_state(EXECUTING)
            elif session.state == EXECUTING:
                self._do_execute(session)
            else:  # pragma: no cover - machine is closed over its states
                raise RuntimeError(f"unexpected state {session.state}")

    def _do_retrieve(self, session: Session) -> None:
        intent = parse_order(session.order_text)
        query = intent.name if intent.kind == MAKE_DRINK else intent.raw
        hits = self.index.retrieve(query, 1)
        if not hits or hits[0].score < self.config.retrieval_min_score:
            self._fail(session, "No matching recipe was found for your order.")
            return
        session.recipe_id = hits[0].recipe_id
        recipe = self.index.get(session.recipe_id)
        session.append(
            "recipe",
            {"recipe_id": recipe.id, "name": recipe.name, "score": hits[0].score},
        )
        self._speak(session, f"Preparing {recipe.name}.")
        session.set_state(RETRIEVED)

    def _do_reconcile(self, session: Session) -> None:
        if session.snapshot is None:
            self._fail(session, "No inventory snapshot is available.")
            return
        if session.resolver is None:
            recipe = self.index.get(session.recipe_id)
            session.resolver = Resolver(
                recipe,
                session.snapshot,
                self.config.rules,
                fuzzy_threshold=self.config.fuzzy_threshold,
            )
        anomalies = session.resolver.outstanding()
        if not anomalies:
            session.set_state(RESOLVED)
            return
        if self.config.unattended:
            try:
                session.resolver.run_unattended()
            except UnresolvableError as exc:
                self._fail(session, f"Cannot prepare the drink: {exc}")
                return
            session.set_state(RESOLVED)
            return
        for anomaly in anomalies:
            prompt = propose_prompt(anomaly)
            session.prompts[prompt.anomaly_id] = prompt
            session.append(
                "prompt",
                {
                    "anomaly_id": prompt.anomaly_id,
                    "kind": anomaly.kind,
                    "subject": anomaly.subject_label,
                    "text": prompt.text,
                    "options": list(prompt.options),
                },
            )
            self._speak(session, prompt.text)
        session.set_state(AWAITING_USER)

    def _do_compile(self, session: Session) -> None:
        resolved = session.resolver.result()
        try:
            program = compile_program(
                resolved,
                session.snapshot,
                tolerance_rel=self.config.pour_tolerance_rel,
                program_id=f"prog-{session.session_id}",
            )
        except ValidationFailureError as exc:
            self._fail(session, f"Plan validation failed: {exc}")
            return
        session.program = program
        session.program_id = program.program_id
        session.append(
            "program",
            {
                "program_id": program.program_id,
                "recipe_id": program.recipe_id,
                "actions": [a.op for a in program.actions],
                "provenance": list(program.provenance),
            },
        )
        session.set_state(COMPILED)

    def _do_execute(self, session: Session) -> None:
        rng = random.Random(session.seed)

        def event_cb(kind: str, payload: dict):
            session.append(kind, payload)

        try:
            report = execute(
                session.program,
                session.snapshot,
                self.config.sim,
                rng,
                event_cb=event_cb,
            )
        except ExecutionFailure as exc:
            session.report = exc.report
            self._fail(session, f"Execution failed: {exc.cause}")
            return
        session.report = report
        session.append("report", {"ok": report.ok, "final_state": report.final_state})
        if all(t.outcome.within_tolerance for t in report.traces):
            recipe = self.index.get(session.recipe_id)
            self._speak(session, f"Your {recipe.name} is ready.")
            session.set_state(SERVED)
        else:
            self._fail(session, "A pour missed its tolerance band.")


def replay_terminal_state(events: list[SessionEvent]) -> str | None:
    """Event-sourcing check: the state is fully determined by the event log."""
    state = None
    for event in events:
        if event.kind == "state":
            state = event.payload["to"]
    return state
