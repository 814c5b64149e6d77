"""Simulated bimanual cell: liquid outflow, FT-sensor model, pour control.

The bottle arm tilts a held bottle; outflow is linear in tilt above a
threshold angle and clipped by the remaining volume each step. The force
sensor reports the glass mass with latency and Gaussian noise, and the
closed-loop pour controller has to land the poured mass inside a relative
tolerance band using only those measurements.

Mass accounting is exact by construction: the glass's true mass is derived
from the per-bottle poured-mass accumulators, so bottle loss equals glass
gain bit-for-bit.
"""

from __future__ import annotations

import math
import random
from collections import deque
from dataclasses import dataclass, field

from .errors import (
    BindingMismatchError,
    BottleExhaustedError,
    MixcellError,
    NoBottleHeldError,
    PourTimeoutError,
    ValidationFailureError,
)
from .perception import InventorySnapshot
from .plan import ActionProgram, GiveUser, LeftBottle, PourLiquid, TakeBottle, TakeGlass, validate

PI_2 = math.pi / 2.0


@dataclass(frozen=True)
class FlowModel:
    """Outflow rate as a linear ramp in tilt angle above theta_min."""

    q_max_ml_per_s: float = 30.0
    theta_min_rad: float = 0.35

    def __post_init__(self):
        if self.q_max_ml_per_s <= 0:
            raise ValueError("q_max_ml_per_s must be > 0")
        if not (0 <= self.theta_min_rad < PI_2):
            raise ValueError("theta_min_rad must be in [0, pi/2)")

    def rate_ml_per_s(self, tilt_rad: float) -> float:
        return self.q_max_ml_per_s * max(0.0, (tilt_rad - self.theta_min_rad) / (PI_2 - self.theta_min_rad))


@dataclass(frozen=True)
class FtSensorModel:
    tare_g: float = 0.0
    noise_sigma_g: float = 0.5
    sample_period_s: float = 0.01
    latency_samples: int = 5

    def __post_init__(self):
        if self.noise_sigma_g < 0:
            raise ValueError("noise_sigma_g must be >= 0")
        if self.sample_period_s <= 0:
            raise ValueError("sample_period_s must be > 0")
        if self.latency_samples < 0:
            raise ValueError("latency_samples must be >= 0")


@dataclass(frozen=True)
class ControllerParams:
    """Pour-controller tuning. Defaults hold +/-1% over 20-200 g targets
    at sigma = 0.5 g / latency 5."""

    filter_window: int = 5
    settle_extra_samples: int = 10
    avg_samples: int = 600
    margin_frac: float = 0.2  # stop when measured deficit <= margin_frac * tol * target
    aim_frac: float = 0.1  # dribble bursts aim this fraction short of target
    guard_sigmas: float = 3.0
    max_trim_rounds: int = 50
    timeout_s: float = 120.0
    slow_tilt_offset_rad: float = 0.1


@dataclass(frozen=True)
class SimConfig:
    flow: FlowModel = field(default_factory=FlowModel)
    sensor: FtSensorModel = field(default_factory=FtSensorModel)
    controller: ControllerParams = field(default_factory=ControllerParams)
    take_duration_s: float = 2.0
    give_duration_s: float = 2.0
    progress_every_samples: int = 100


@dataclass
class BottleState:
    remaining_ml: float
    poured_mass_g: float = 0.0


@dataclass
class GlassArm:
    holding_glass: bool = False
    base_mass_g: float = 0.0


@dataclass
class BottleArm:
    held: str | None = None
    tilt_rad: float = 0.0


@dataclass
class CellState:
    glass_arm: GlassArm = field(default_factory=GlassArm)
    bottle_arm: BottleArm = field(default_factory=BottleArm)
    bottles: dict[str, BottleState] = field(default_factory=dict)
    clock_s: float = 0.0

    @property
    def glass_mass_g(self) -> float:
        # Derived from the pour accumulators so conservation is exact.
        return self.glass_arm.base_mass_g + sum(b.poured_mass_g for b in self.bottles.values())

    def total_poured_mass_g(self) -> float:
        return sum(b.poured_mass_g for b in self.bottles.values())


class FtSensor:
    """Latency + additive-noise sensor channel over the glass mass."""

    def __init__(self, model: FtSensorModel, rng: random.Random, initial_mass_g: float = 0.0):
        self.model = model
        self.rng = rng
        self._history: deque[float] = deque(
            [initial_mass_g] * (model.latency_samples + 1), maxlen=model.latency_samples + 1
        )

    def read_mass(self, true_mass_g: float) -> float:
        self._history.append(true_mass_g)
        delayed = self._history[0]
        noise = self.rng.gauss(0.0, self.model.noise_sigma_g) if self.model.noise_sigma_g > 0 else 0.0
        return self.model.tare_g + delayed + noise

    def read(self, state: CellState) -> float:
        return self.read_mass(state.glass_mass_g)


def read_sensor(state: CellState, sensor: FtSensor) -> float:
    return sensor.read(state)


def step_flow(state: CellState, dt: float, flow: FlowModel, density_g_per_ml: float = 1.0) -> float:
    """Advance the outflow by dt; returns the volume transferred (ml)."""
    held = state.bottle_arm.held
    if held is None:
        raise NoBottleHeldError("step_flow requires a held bottle")
    bottle = state.bottles[held]
    demand = flow.rate_ml_per_s(state.bottle_arm.tilt_rad) * dt
    poured = min(demand, bottle.remaining_ml)
    bottle.remaining_ml -= poured
    bottle.poured_mass_g += poured * density_g_per_ml
    state.clock_s += dt
    return poured


@dataclass(frozen=True)
class TraceSample:
    t_s: float
    true_mass_g: float
    measured_g: float
    tilt_rad: float


@dataclass(frozen=True)
class PourOutcome:
    final_mass_g: float  # mass gained by the glass during this pour
    within_tolerance: bool
    duration_s: float


@dataclass(frozen=True)
class PourTrace:
    item_id: str
    target_mass_g: float
    tolerance_rel: float
    samples: tuple[TraceSample, ...]
    outcome: PourOutcome


def pour_closed_loop(
    target_mass_g: float,
    tolerance_rel: float,
    state: CellState,
    ft: FtSensorModel,
    flow: FlowModel,
    rng: random.Random,
    *,
    density_g_per_ml: float = 1.0,
    controller: ControllerParams | None = None,
    progress_cb=None,
    progress_every: int = 100,
) -> PourTrace:
    """Closed-loop pour: fast fill, slow approach, then settle-and-trim rounds.

    The controller sees only sensor readings. It tares by averaging at rest,
    races to a guarded fraction of the target, creeps to just below the band,
    then alternates settle/average/dribble rounds until the measured deficit
    is inside the stop margin. Noise-robustness comes from the averaging: a
    5-sample moving average alone cannot place 20 g pours inside +/-1%.
    """
    if target_mass_g <= 0:
        raise ValueError("pour target must be > 0")
    held = state.bottle_arm.held
    if held is None:
        raise NoBottleHeldError("pour_liquid requires a held bottle")
    if not state.glass_arm.holding_glass:
        raise NoBottleHeldError("pour_liquid requires the glass to be held")

    params = controller or ControllerParams()
    dt = ft.sample_period_s
    sensor = FtSensor(ft, rng, initial_mass_g=state.glass_mass_g)
    window: deque[float] = deque(maxlen=params.filter_window)
    samples: list[TraceSample] = []
    start_mass = state.glass_mass_g
    start_clock = state.clock_s
    bottle = state.bottles[held]

    theta_slow = flow.theta_min_rad + params.slow_tilt_offset_rad
    q_slow = flow.rate_ml_per_s(theta_slow)
    quantum = q_slow * dt * density_g_per_ml  # grams per slow-phase sample
    fast_per_sample = flow.q_max_ml_per_s * dt * density_g_per_ml

    def gain() -> float:
        return state.glass_mass_g - start_mass

    def elapsed() -> float:
        return state.clock_s - start_clock

    def finish(within: bool) -> PourTrace:
        state.bottle_arm.tilt_rad = 0.0
        return PourTrace(
            item_id=held,
            target_mass_g=target_mass_g,
            tolerance_rel=tolerance_rel,
            samples=tuple(samples),
            outcome=PourOutcome(
                final_mass_g=gain(), within_tolerance=within, duration_s=elapsed()
            ),
        )

    def fail(exc: MixcellError):
        exc.trace = finish(False)  # partial trace travels with the error
        raise exc

    def step(tilt: float) -> float:
        state.bottle_arm.tilt_rad = tilt
        step_flow(state, dt, flow, density_g_per_ml)
        measured = sensor.read(state)
        window.append(measured)
        samples.append(
            TraceSample(
                t_s=round(elapsed(), 9),
                true_mass_g=state.glass_mass_g,
                measured_g=measured,
                tilt_rad=tilt,
            )
        )
        if progress_cb is not None and len(samples) % progress_every == 0:
            progress_cb(
                {
                    "t_s": samples[-1].t_s,
                    "measured_g": sum(window) / len(window) - baseline if baseline is not None else measured,
                    "target_g": target_mass_g,
                }
            )
        if elapsed() > params.timeout_s:
            fail(PourTimeoutError(f"pour exceeded {params.timeout_s:g} simulated seconds"))
        return measured

    def average_at_rest(n: int) -> float:
        acc = 0.0
        for _ in range(n):
            acc += step(0.0)
        return acc / n

    # Tare: flush the delay line, then average at rest.
    baseline = None
    for _ in range(ft.latency_samples + 1):
        step(0.0)
    baseline = average_at_rest(params.avg_samples)

    def filtered() -> float:
        return sum(window) / len(window) - baseline

    sigma_f = ft.noise_sigma_g / math.sqrt(params.filter_window)
    lag_slow = (ft.latency_samples + 2) * quantum
    lag_fast = (ft.latency_samples + 3) * fast_per_sample
    fast_stop = min(0.9 * target_mass_g, target_mass_g - (params.guard_sigmas * sigma_f + lag_fast))
    slow_stop = target_mass_g - max(
        params.guard_sigmas * sigma_f + lag_slow, tolerance_rel * target_mass_g
    )

    phase = "fast"
    while bottle.remaining_ml > 0:
        if phase == "fast":
            step(PI_2)
            if filtered() >= fast_stop:
                phase = "slow"
        else:
            step(theta_slow)
            if filtered() >= slow_stop:
                break

    # Settle-and-trim: average down the noise, dribble the measured deficit.
    sigma_est = ft.noise_sigma_g * math.sqrt(2.0 / params.avg_samples)
    margin = max(params.margin_frac * tolerance_rel * target_mass_g, 2.0 * sigma_est)
    lower_bound = target_mass_g - tolerance_rel * target_mass_g
    for _ in range(params.max_trim_rounds):
        for _ in range(ft.latency_samples + params.settle_extra_samples):
            step(0.0)
        measured_gain = average_at_rest(params.avg_samples) - baseline
        deficit = target_mass_g - measured_gain
        if deficit <= margin:
            break
        if bottle.remaining_ml <= 0:
            if gain() < lower_bound:
                fail(
                    BottleExhaustedError(
                        f"bottle {held} ran dry at {gain():.3f} g of {target_mass_g:g} g",
                        final_gain_g=gain(),
                    )
                )
            break
        burst = max(1, round((deficit - params.aim_frac * tolerance_rel * target_mass_g) / quantum))
        burst = min(burst, max(1, int(deficit / quantum)))
        for _ in range(burst):
            step(theta_slow)
            if bottle.remaining_ml <= 0:
                break
    else:
        fail(PourTimeoutError("trim loop exhausted its round budget"))

    if bottle.remaining_ml <= 0 and gain() < lower_bound:
        fail(
            BottleExhaustedError(
                f"bottle {held} ran dry at {gain():.3f} g of {target_mass_g:g} g",
                final_gain_g=gain(),
            )
        )

    within = abs(gain() - target_mass_g) <= tolerance_rel * target_mass_g
    trace = finish(within)
    if progress_cb is not None:
        progress_cb(
            {
                "t_s": trace.outcome.duration_s,
                "measured_g": trace.outcome.final_mass_g,
                "target_g": target_mass_g,
                "done": True,
            }
        )
    return trace


@dataclass(frozen=True)
class ExecutionReport:
    program_id: str
    ok: bool
    events: tuple[dict, ...]
    traces: tuple[PourTrace, ...]
    final_state: dict
    failure: dict | None = None


class ExecutionFailure(MixcellError):
    """Raised when execution aborts; carries the partial report."""

    kind = "execution-failure"

    def __init__(self, cause: MixcellError, report: ExecutionReport):
        super().__init__(str(cause))
        self.cause = cause
        self.report = report

    def payload(self) -> dict:
        return {"error": self.kind, "cause": self.cause.payload(), "detail": str(self)}


def _state_summary(state: CellState) -> dict:
    return {
        "glass_mass_g": state.glass_mass_g,
        "holding_glass": state.glass_arm.holding_glass,
        "held_bottle": state.bottle_arm.held,
        "bottles": {item_id: b.remaining_ml for item_id, b in state.bottles.items()},
        "clock_s": state.clock_s,
    }


def execute(
    program: ActionProgram,
    snapshot: InventorySnapshot,
    config: SimConfig,
    rng: random.Random,
    *,
    event_cb=None,
) -> ExecutionReport:
    """Interpret a validated program against a fresh cell state.

    Emits one event per action start/end; pour errors abort execution with
    an ExecutionFailure wrapping the partial report.
    """
    violations = validate(program, snapshot)
    if violations:
        raise ValidationFailureError(violations)

    state = CellState()
    events: list[dict] = []
    traces: list[PourTrace] = []

    def emit(kind: str, **payload):
        event = {"t_s": round(state.clock_s, 9), "kind": kind, **payload}
        events.append(event)
        if event_cb is not None:
            event_cb(kind, event)

    def abort(cause: MixcellError) -> ExecutionReport:
        emit("execution_failed", error=cause.payload())
        report = ExecutionReport(
            program_id=program.program_id,
            ok=False,
            events=tuple(events),
            traces=tuple(traces),
            final_state=_state_summary(state),
            failure=cause.payload(),
        )
        raise ExecutionFailure(cause, report)

    for i, action in enumerate(program.actions):
        emit("action_start", index=i, action=action.op, detail=_action_detail(action))
        if isinstance(action, TakeGlass):
            state.glass_arm.holding_glass = True
            state.clock_s += config.take_duration_s
        elif isinstance(action, TakeBottle):
            item = snapshot.by_id(action.item_id)
            if item is None:
                abort(BindingMismatchError(f"program references item {action.item_id!r} not in snapshot"))
            if action.item_id not in state.bottles:
                state.bottles[action.item_id] = BottleState(remaining_ml=item.available_ml)
            state.bottle_arm.held = action.item_id
            state.clock_s += config.take_duration_s
        elif isinstance(action, PourLiquid):
            progress_cb = None
            if event_cb is not None:
                progress_cb = lambda p: event_cb("pour_progress", {"kind": "pour_progress", **p})
            try:
                trace = pour_closed_loop(
                    action.target_mass_g,
                    action.tolerance_rel,
                    state,
                    config.sensor,
                    config.flow,
                    rng,
                    density_g_per_ml=action.density_g_per_ml,
                    controller=config.controller,
                    progress_cb=progress_cb,
                    progress_every=config.progress_every_samples,
                )
            except (BottleExhaustedError, PourTimeoutError, NoBottleHeldError) as exc:
                partial = getattr(exc, "trace", None)
                if partial is not None:
                    traces.append(partial)
                abort(exc)
            traces.append(trace)
            emit(
                "pour_done",
                index=i,
                item_id=trace.item_id,
                final_mass_g=trace.outcome.final_mass_g,
                target_g=trace.target_mass_g,
                within_tolerance=trace.outcome.within_tolerance,
                duration_s=trace.outcome.duration_s,
            )
        elif isinstance(action, LeftBottle):
            state.bottle_arm.held = None
            state.clock_s += config.take_duration_s
        elif isinstance(action, GiveUser):
            state.glass_arm.holding_glass = False
            state.clock_s += config.give_duration_s
        emit("action_end", index=i, action=action.op)

    return ExecutionReport(
        program_id=program.program_id,
        ok=True,
        events=tuple(events),
        traces=tuple(traces),
        final_state=_state_summary(state),
    )


def _action_detail(action) -> dict:
    if isinstance(action, TakeBottle):
        return {"label": action.label, "item_id": action.item_id}
    if isinstance(action, LeftBottle):
        return {"label": action.label}
    if isinstance(action, PourLiquid):
        return {"target_mass_g": action.target_mass_g, "tolerance_rel": action.tolerance_rel}
    return {}


def trace_to_dict(trace: PourTrace) -> dict:
    return {
        "item_id": trace.item_id,
        "target_mass_g": trace.target_mass_g,
        "tolerance_rel": trace.tolerance_rel,
        "samples": [[s.t_s, s.true_mass_g, s.measured_g, s.tilt_rad] for s in trace.samples],
        "outcome": {
            "final_mass_g": trace.outcome.final_mass_g,
            "within_tolerance": trace.outcome.within_tolerance,
            "duration_s": trace.outcome.duration_s,
        },
    }


def report_to_dict(report: ExecutionReport) -> dict:
    return {
        "program_id": report.program_id,
        "ok": report.ok,
        "events": list(report.events),
        "traces": [trace_to_dict(t) for t in report.traces],
        "final_state": report.final_state,
        "failure": report.failure,
    }
