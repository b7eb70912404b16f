"""Stage state machine over paired camera observations.

Each processing step consumes one synchronized frame pair (leading plus
auxiliary camera), checks the current stage's conditions, and either waits or
advances exactly one stage. Placement stages are satisfied when every
required (part, zone, count) is matched exactly by the detections of both
cameras combined; connection stages require both cameras to independently
select the required interconnection above the probability threshold.

Operator feedback is emitted as data (:class:`OperatorMessage`); rendering it
on a screen or projector is someone else's job. Consecutive frames that would
repeat the exact same alert set emit nothing, mirroring a display that simply
keeps showing the same message.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field
from typing import Iterable, Sequence

from .errors import InputError
from .evaluate import Timeline, timeline_from_starts
from .model import (
    CONNECTION,
    PLACEMENT,
    AssemblyPlan,
    EngineConfig,
    Rect,
    StageSpec,
    Zone,
    zone_overlap_fraction,
)

LEADING = "leading"
AUXILIARY = "auxiliary"

MISSING_DETAIL = "missing_detail"
EXTRA_DETAIL = "extra_detail"
WRONG_CONNECTION = "wrong_connection"
STAGE_INSTRUCTION = "stage_instruction"
PROCEED_NEXT_STAGE = "proceed_next_stage"


@dataclass(frozen=True)
class Detection:
    """One classified bounding box: a part, tool, hand, or foreign object."""

    object_class: str
    bbox: Rect
    confidence: float = 1.0

    def __post_init__(self) -> None:
        if not (0.0 <= self.confidence <= 1.0):
            raise InputError(f"confidence must be in [0,1], got {self.confidence}")


@dataclass(frozen=True)
class ConnectionHypothesis:
    """Candidate interconnection with its probability, computed over one zone crop."""

    connection_id: str
    probability: float
    source_zone_id: str

    def __post_init__(self) -> None:
        if not (0.0 <= self.probability <= 1.0):
            raise InputError(f"probability must be in [0,1], got {self.probability}")


@dataclass(frozen=True)
class FrameObservation:
    camera: str
    timestamp_ms: int
    detections: tuple[Detection, ...] = ()
    connection_hypotheses: tuple[ConnectionHypothesis, ...] = ()

    def __post_init__(self) -> None:
        if self.camera not in (LEADING, AUXILIARY):
            raise InputError(f"camera must be {LEADING!r} or {AUXILIARY!r}, got {self.camera!r}")
        if self.timestamp_ms < 0:
            raise InputError(f"timestamp_ms must be non-negative, got {self.timestamp_ms}")


@dataclass(frozen=True)
class OperatorMessage:
    kind: str
    timestamp_ms: int
    payload: dict

    def to_dict(self) -> dict:
        return {"timestamp_ms": self.timestamp_ms, "type": self.kind, "payload": self.payload}


@dataclass(frozen=True)
class StageTransition:
    """Start of the stage with the given index (index == stage count marks completion)."""

    stage_index: int
    start_timestamp_ms: int

    def to_dict(self) -> dict:
        return {"timestamp_ms": self.start_timestamp_ms, "type": "stage_transition",
                "payload": {"stage_index": self.stage_index}}


@dataclass(frozen=True)
class PlacementStatus:
    """Outcome of checking one placement stage against assigned detections.

    ``missing``/``extra`` list (part, zone, count) deficits and surpluses over
    the stage's required pairs. Satisfaction demands exact counts, so a
    surplus on a required pair implies unsatisfied.
    """

    satisfied: bool
    missing: tuple[tuple[str, str, int], ...]
    extra: tuple[tuple[str, str, int], ...]


@dataclass
class EngineState:
    """Mutable per-session state; owned by exactly one session at a time."""

    plan: AssemblyPlan
    config: EngineConfig
    current_stage_index: int = 0
    zone_occupancy: dict[tuple[str, str], int] = field(default_factory=dict)
    pending_leading_connection: str | None = None
    transitions: list[StageTransition] = field(default_factory=list)
    messages: list[OperatorMessage] = field(default_factory=list)
    events: list[OperatorMessage | StageTransition] = field(default_factory=list)

    _last_leading_ts: int = field(default=-1, repr=False)
    _last_aux_ts: int = field(default=-1, repr=False)
    # Alert dedup: last emitted (missing, extra) pair / wrong connection id.
    _last_placement_alerts: tuple | None = field(default=None, repr=False)
    _last_wrong_connection: str | None = field(default=None, repr=False)
    # Detection-assignment memo keyed on tuple identity of the frame pair;
    # holding the refs keeps id() stable for the comparison.
    _memo_lead_dets: tuple | None = field(default=None, repr=False)
    _memo_aux_dets: tuple | None = field(default=None, repr=False)
    _memo_counts: dict = field(default_factory=dict, repr=False)

    @property
    def completed(self) -> bool:
        return self.current_stage_index == len(self.plan.stages)

    def current_stage(self) -> StageSpec | None:
        if self.completed:
            return None
        return self.plan.stages[self.current_stage_index]

    def _emit(self, message: OperatorMessage) -> None:
        self.messages.append(message)
        self.events.append(message)


@dataclass(frozen=True)
class StepResult:
    messages: tuple[OperatorMessage, ...]
    transition: StageTransition | None


@dataclass(frozen=True)
class SessionResult:
    """Everything one replayed stream produced."""

    state: EngineState
    completed: bool
    timeline: Timeline | None


def init_state(plan: AssemblyPlan, config: EngineConfig | None = None,
               start_timestamp_ms: int = 0) -> EngineState:
    """Fresh session at stage 0 with its instruction already emitted."""
    state = EngineState(plan=plan, config=config or EngineConfig())
    stage = state.current_stage()
    if stage is not None:
        state._emit(OperatorMessage(STAGE_INSTRUCTION, start_timestamp_ms,
                                    {"text": stage.instruction}))
    return state


def assign_detections(detections: Sequence[Detection], zones: Sequence[Zone],
                      overlap_threshold: float) -> dict[tuple[str, str], int]:
    """Assign each detection to at most one zone; count per (zone id, class).

    A detection belongs to the zone with the greatest overlap fraction among
    those at or above the threshold; ties go to the lexicographically
    smallest zone id. Detections below the threshold everywhere are
    unassigned and counted nowhere.
    """
    counts: dict[tuple[str, str], int] = {}
    for det in detections:
        best_zone: str | None = None
        best_frac = 0.0
        for zone in zones:
            frac = zone_overlap_fraction(det.bbox, zone.rect)
            if frac < overlap_threshold:
                continue
            if best_zone is None or frac > best_frac or (frac == best_frac and zone.id < best_zone):
                best_zone = zone.id
                best_frac = frac
        if best_zone is not None:
            key = (best_zone, det.object_class)
            counts[key] = counts.get(key, 0) + 1
    return counts


def union_counts(a: dict[tuple[str, str], int],
                 b: dict[tuple[str, str], int]) -> dict[tuple[str, str], int]:
    """Multiset union of two per-camera assignment counts (element-wise max).

    One physical part seen by both cameras is still one part; a part occluded
    from one camera but visible to the other still counts.
    """
    merged = dict(a)
    for key, count in b.items():
        if count > merged.get(key, 0):
            merged[key] = count
    return merged


def _required_counts(stage: StageSpec) -> dict[tuple[str, str], int]:
    required: dict[tuple[str, str], int] = {}
    for req in stage.placements:
        key = (req.zone, req.part)
        required[key] = required.get(key, 0) + req.count
    return required


def _placement_status(counts: dict[tuple[str, str], int], stage: StageSpec) -> PlacementStatus:
    missing: list[tuple[str, str, int]] = []
    extra: list[tuple[str, str, int]] = []
    for (zone_id, part_id), required in sorted(_required_counts(stage).items()):
        have = counts.get((zone_id, part_id), 0)
        if have < required:
            missing.append((part_id, zone_id, required - have))
        elif have > required:
            extra.append((part_id, zone_id, have - required))
    return PlacementStatus(satisfied=not missing and not extra,
                           missing=tuple(missing), extra=tuple(extra))


def evaluate_placement(detections: Sequence[Detection], stage: StageSpec,
                       zones: Sequence[Zone], config: EngineConfig) -> PlacementStatus:
    """Check a placement stage's requirements against a set of detections."""
    if stage.kind != PLACEMENT:
        raise InputError(f"stage {stage.index} is not a placement stage")
    counts = assign_detections(detections, zones, config.overlap_threshold)
    return _placement_status(counts, stage)


def decide_connection_single(hypotheses: Sequence[ConnectionHypothesis],
                             threshold: float) -> str | None:
    """Single-camera verdict: the most probable connection strictly above threshold.

    Returns None when nothing clears the threshold; ties are broken by the
    lexicographically smallest connection id. Callers restrict hypotheses to
    the assembly zone first.
    """
    best_id: str | None = None
    best_prob = 0.0
    for hyp in hypotheses:
        if hyp.probability <= threshold:
            continue
        if (best_id is None or hyp.probability > best_prob
                or (hyp.probability == best_prob and hyp.connection_id < best_id)):
            best_id = hyp.connection_id
            best_prob = hyp.probability
    return best_id


def decide_connection(leading: FrameObservation, auxiliary: FrameObservation,
                      threshold: float, assembly_zone_id: str | None = None) -> str | None:
    """Two-camera confirmation protocol.

    The leading camera decides first; if it sees nothing above threshold the
    cycle simply moves on to the next frame (None). Otherwise the auxiliary
    camera runs the same procedure and a connection is returned only when
    both cameras independently selected the same one. Disagreement stalls
    (None) rather than erroring: the conservative outcome is to wait.
    """
    if leading.camera != LEADING:
        raise InputError(f"expected the leading camera first, got {leading.camera!r}")
    if auxiliary.camera != AUXILIARY:
        raise InputError(f"expected the auxiliary camera second, got {auxiliary.camera!r}")
    lead_choice = decide_connection_single(
        _zone_hypotheses(leading, assembly_zone_id), threshold)
    if lead_choice is None:
        return None
    aux_choice = decide_connection_single(
        _zone_hypotheses(auxiliary, assembly_zone_id), threshold)
    if aux_choice == lead_choice:
        return lead_choice
    return None


def _zone_hypotheses(frame: FrameObservation,
                     zone_id: str | None) -> tuple[ConnectionHypothesis, ...]:
    if zone_id is None:
        return frame.connection_hypotheses
    return tuple(h for h in frame.connection_hypotheses if h.source_zone_id == zone_id)


def step(state: EngineState, leading: FrameObservation,
         auxiliary: FrameObservation) -> StepResult:
    """Process one synchronized frame pair; advance at most one stage.

    Transition timestamps are the leading frame's timestamp: stage boundaries
    are defined by frame processing, not wall clock. Raises
    :class:`InputError` for completed sessions, camera-role mismatches, and
    frames older than the last processed pair.
    """
    if state.completed:
        raise InputError("session already completed")
    if leading.camera != LEADING:
        raise InputError(f"expected the leading camera first, got {leading.camera!r}")
    if auxiliary.camera != AUXILIARY:
        raise InputError(f"expected the auxiliary camera second, got {auxiliary.camera!r}")
    if leading.timestamp_ms < state._last_leading_ts:
        raise InputError(
            f"out-of-order leading frame: {leading.timestamp_ms} after {state._last_leading_ts}"
        )
    if auxiliary.timestamp_ms < state._last_aux_ts:
        raise InputError(
            f"out-of-order auxiliary frame: {auxiliary.timestamp_ms} after {state._last_aux_ts}"
        )
    state._last_leading_ts = leading.timestamp_ms
    state._last_aux_ts = auxiliary.timestamp_ms
    now = leading.timestamp_ms

    # Both cameras observe the same physical parts, so their views combine as
    # a multiset union: per (zone, part) the count is the max over cameras,
    # never the sum. Frame streams reuse detection tuples between world
    # changes; an identity hit skips reassignment.
    if (leading.detections is state._memo_lead_dets
            and auxiliary.detections is state._memo_aux_dets):
        counts = state._memo_counts
    else:
        counts = union_counts(
            assign_detections(leading.detections, state.plan.zones,
                              state.config.overlap_threshold),
            assign_detections(auxiliary.detections, state.plan.zones,
                              state.config.overlap_threshold))
        state._memo_lead_dets = leading.detections
        state._memo_aux_dets = auxiliary.detections
        state._memo_counts = counts
        part_ids = state.plan.part_ids
        state.zone_occupancy = {key: n for key, n in counts.items() if key[1] in part_ids}

    stage = state.plan.stages[state.current_stage_index]
    emitted: list[OperatorMessage] = []
    transition: StageTransition | None = None
    advance = False

    if stage.kind == PLACEMENT:
        state.pending_leading_connection = None
        status = _placement_status(counts, stage)
        if status.satisfied:
            advance = True
        else:
            alerts = (status.missing, status.extra)
            if alerts != state._last_placement_alerts:
                state._last_placement_alerts = alerts
                for part, zone, _deficit in status.missing:
                    emitted.append(OperatorMessage(MISSING_DETAIL, now,
                                                   {"part": part, "zone": zone}))
                for part, zone, _surplus in status.extra:
                    emitted.append(OperatorMessage(EXTRA_DETAIL, now,
                                                   {"part": part, "zone": zone}))
    else:
        zone_id = state.plan.assembly_zone.id
        state.pending_leading_connection = decide_connection_single(
            _zone_hypotheses(leading, zone_id), state.config.connection_threshold)
        decision = decide_connection(leading, auxiliary,
                                     state.config.connection_threshold, zone_id)
        if decision is None:
            state._last_wrong_connection = None
        elif decision == stage.connection:
            advance = True
        else:
            if decision != state._last_wrong_connection:
                state._last_wrong_connection = decision
                emitted.append(OperatorMessage(WRONG_CONNECTION, now,
                                               {"seen": decision, "expected": stage.connection}))

    if advance:
        next_index = state.current_stage_index + 1
        transition = StageTransition(stage_index=next_index, start_timestamp_ms=now)
        state.transitions.append(transition)
        state.events.append(transition)
        state.current_stage_index = next_index
        state._last_placement_alerts = None
        state._last_wrong_connection = None
        state.pending_leading_connection = None
        proceed = OperatorMessage(PROCEED_NEXT_STAGE, now, {"new_stage_index": next_index})
        emitted.append(proceed)
        state._emit(proceed)
        next_stage = state.current_stage()
        if next_stage is not None:
            instruction = OperatorMessage(STAGE_INSTRUCTION, now,
                                          {"text": next_stage.instruction})
            emitted.append(instruction)
            state._emit(instruction)
    else:
        for message in emitted:
            state._emit(message)

    return StepResult(messages=tuple(emitted), transition=transition)


def run_session(plan: AssemblyPlan, config: EngineConfig,
                frames: Iterable[tuple[FrameObservation, FrameObservation]],
                run_id: str = "run", cohort: str = "") -> SessionResult:
    """Fold :func:`step` over a paired frame stream.

    A pure function of its inputs: the same plan, config, and stream always
    produce an identical result, message for message. The predicted timeline
    places stage 0's start at time 0 and is only available for completed
    sessions. A completed session whose recorded boundaries are degenerate
    (a stage entered and left at the very same timestamp, possible only when
    noise completes a stage on the first frame) has no representable
    timeline and carries None; its transitions remain available.
    """
    state = init_state(plan, config)
    for leading, auxiliary in frames:
        step(state, leading, auxiliary)
        if state.completed:
            break
    timeline = None
    if state.completed:
        try:
            timeline = predicted_timeline(state, run_id=run_id, cohort=cohort)
        except InputError:
            timeline = None
    return SessionResult(state=state, completed=state.completed, timeline=timeline)


def predicted_timeline(state: EngineState, run_id: str = "run", cohort: str = "") -> Timeline:
    """Timeline recorded by the engine: stage starts from transitions, origin at 0."""
    if not state.completed:
        raise InputError("session has not completed; no full timeline to export")
    starts = [0] + [t.start_timestamp_ms for t in state.transitions[:-1]]
    completion = state.transitions[-1].start_timestamp_ms
    return timeline_from_starts(starts, completion, run_id=run_id, cohort=cohort)


def session_event_lines(state: EngineState) -> list[str]:
    """Session log as JSON lines: one object per message or transition, in order."""
    return [json.dumps(event.to_dict(), sort_keys=True) for event in state.events]
