"""Seeded discrete-event simulation of operator behavior and camera streams.

Three layers compose into one experiment run:

1. :func:`generate_scenario` scripts the operator: per stage, the minimal
   place/remove/show events that satisfy it, at instants drawn from a pace
   profile. The instants the stage conditions first become true are the
   ground-truth stage boundaries.
2. :func:`render_frames` turns the script into paired camera frames at a
   fixed frame period, optionally behind a detection-lag model and a noise
   model (dropped detections, spurious connection hypotheses).
3. :func:`simulate_run` feeds those frames to the control engine and returns
   the two label sets an efficiency experiment compares: true and predicted
   stage timelines.

Everything is deterministic per seed.

Scenario files are JSON arrays of events; see :func:`scenario_from_list`.
"""

from __future__ import annotations

import json
from bisect import bisect_right
from dataclasses import dataclass, replace
from pathlib import Path
from typing import Any, Iterable, Mapping, Sequence

import numpy as np

from .engine import (
    AUXILIARY,
    LEADING,
    ConnectionHypothesis,
    Detection,
    FrameObservation,
    SessionResult,
    run_session,
)
from .errors import FormatError, InputError
from .evaluate import Timeline, timeline_from_starts
from .model import CONNECTION, PLACEMENT, AssemblyPlan, EngineConfig, Rect, Zone

# Cohort pace means: desk-scale totals of 52 s and 129 s split over 12 stages.
FAST_STAGE_MS = 4333
SLOW_STAGE_MS = 10750

# How long a scripted connection demonstration stays visible, capped so it
# never lingers into the next stage's demonstration.
DEFAULT_SHOW_DURATION_MS = 2000


@dataclass(frozen=True)
class PlacePart:
    part: str
    zone: str
    bbox: Rect


@dataclass(frozen=True)
class RemovePart:
    part: str
    zone: str


@dataclass(frozen=True)
class ShowConnection:
    connection: str
    duration_ms: int
    leading_prob: float
    aux_prob: float

    def __post_init__(self) -> None:
        if self.duration_ms <= 0:
            raise InputError(f"duration_ms must be positive, got {self.duration_ms}")
        for prob in (self.leading_prob, self.aux_prob):
            if not (0.0 <= prob <= 1.0):
                raise InputError(f"probability must be in [0,1], got {prob}")


ScenarioAction = PlacePart | RemovePart | ShowConnection


@dataclass(frozen=True)
class ScenarioEvent:
    at_ms: int
    action: ScenarioAction

    def __post_init__(self) -> None:
        if self.at_ms < 0:
            raise InputError(f"at_ms must be non-negative, got {self.at_ms}")


@dataclass(frozen=True)
class PaceProfile:
    """Stage-duration distribution for one cohort of runs."""

    mean_stage_duration_ms: int
    jitter_fraction: float = 0.0
    cohort_label: str = "custom"

    def __post_init__(self) -> None:
        if self.mean_stage_duration_ms <= 0:
            raise InputError("mean_stage_duration_ms must be positive")
        if not (0.0 <= self.jitter_fraction < 1.0):
            raise InputError(f"jitter_fraction must be in [0,1), got {self.jitter_fraction}")


FAST_PACE = PaceProfile(FAST_STAGE_MS, 0.3, "fast")
SLOW_PACE = PaceProfile(SLOW_STAGE_MS, 0.3, "slow")


@dataclass(frozen=True)
class ConstantLag:
    """Fixed detection/processing delay."""

    lag_ms: int = 0

    def __post_init__(self) -> None:
        if self.lag_ms < 0:
            raise InputError(f"lag_ms must be non-negative, got {self.lag_ms}")

    @property
    def max_ms(self) -> int:
        return self.lag_ms

    def sample(self, rng: np.random.Generator) -> int:
        return self.lag_ms


@dataclass(frozen=True)
class UniformJitterLag:
    """Per-frame delay drawn independently and uniformly from [min_ms, max_ms]."""

    min_ms: int
    max_ms: int

    def __post_init__(self) -> None:
        if self.min_ms < 0 or self.max_ms < self.min_ms:
            raise InputError(
                f"need 0 <= min_ms <= max_ms, got min={self.min_ms}, max={self.max_ms}"
            )

    def sample(self, rng: np.random.Generator) -> int:
        return int(rng.integers(self.min_ms, self.max_ms + 1))


LagModel = ConstantLag | UniformJitterLag


@dataclass(frozen=True)
class NoiseModel:
    """Detector imperfections: dropped outputs and spurious hypotheses."""

    miss_rate: float = 0.0
    false_hypothesis_rate: float = 0.0
    seed: int | None = None

    def __post_init__(self) -> None:
        for rate in (self.miss_rate, self.false_hypothesis_rate):
            if not (0.0 <= rate < 1.0):
                raise InputError(f"noise rates must be in [0,1), got {rate}")


@dataclass(frozen=True)
class GroundTruth:
    """Manually-labeled analogue: true stage starts plus the completion instant."""

    stage_starts: tuple[int, ...]
    completion_ms: int

    def __post_init__(self) -> None:
        boundaries = list(self.stage_starts) + [self.completion_ms]
        for i in range(len(boundaries) - 1):
            if boundaries[i + 1] <= boundaries[i]:
                raise InputError("ground-truth timestamps must be strictly increasing")

    def timeline(self, run_id: str = "run", cohort: str = "") -> Timeline:
        return timeline_from_starts(self.stage_starts, self.completion_ms,
                                    run_id=run_id, cohort=cohort)


def part_bbox_in_zone(zone: Zone) -> Rect:
    """Deterministic bbox for a scripted part: centered, half the zone's extent."""
    rect = zone.rect
    return Rect(rect.x + rect.w / 4, rect.y + rect.h / 4, rect.w / 2, rect.h / 2)


def generate_scenario(plan: AssemblyPlan, pace: PaceProfile,
                      seed: int) -> tuple[list[ScenarioEvent], GroundTruth]:
    """Script one run: minimal events satisfying each stage, at paced instants.

    Stage boundaries are drawn as mean * (1 +/- jitter); each stage's events
    fire exactly at its boundary, which is therefore the instant its
    conditions first become true. A stage whose requirements are already met
    by the standing world state would make the boundary collapse into the
    previous one, so such plans are rejected.
    """
    rng = np.random.default_rng(seed)
    zones = {z.id: z for z in plan.zones}
    events: list[ScenarioEvent] = []
    world: dict[tuple[str, str], int] = {}

    boundaries: list[int] = []
    at = 0
    durations: list[int] = []
    for _ in plan.stages:
        jitter = pace.jitter_fraction * float(rng.uniform(-1.0, 1.0))
        duration = max(1, int(round(pace.mean_stage_duration_ms * (1.0 + jitter))))
        at += duration
        boundaries.append(at)
        durations.append(duration)

    for stage in plan.stages:
        boundary = boundaries[stage.index]
        stage_events: list[ScenarioEvent] = []
        if stage.kind == PLACEMENT:
            required: dict[tuple[str, str], int] = {}
            for req in stage.placements:
                key = (req.part, req.zone)
                required[key] = required.get(key, 0) + req.count
            for (part, zone_id), count in sorted(required.items()):
                have = world.get((part, zone_id), 0)
                for _ in range(count - have):
                    stage_events.append(ScenarioEvent(
                        boundary, PlacePart(part, zone_id, part_bbox_in_zone(zones[zone_id]))))
                for _ in range(have - count):
                    stage_events.append(ScenarioEvent(boundary, RemovePart(part, zone_id)))
                world[(part, zone_id)] = count
        else:
            assert stage.connection is not None
            next_gap = (durations[stage.index + 1]
                        if stage.index + 1 < len(plan.stages) else DEFAULT_SHOW_DURATION_MS + 1)
            duration = max(1, min(DEFAULT_SHOW_DURATION_MS, next_gap - 1))
            stage_events.append(ScenarioEvent(
                boundary, ShowConnection(stage.connection, duration, 1.0, 1.0)))
        if not stage_events:
            raise InputError(
                f"stage {stage.index} is already satisfied when it begins; its boundary "
                "would be indistinguishable from the previous one"
            )
        events.extend(stage_events)

    truth = GroundTruth(stage_starts=tuple([0] + boundaries[:-1]),
                        completion_ms=boundaries[-1])
    return events, truth


def render_frames(events: Sequence[ScenarioEvent], lag: LagModel, noise: NoiseModel,
                  frame_period_ms: int, horizon_ms: int, assembly_zone_id: str,
                  connection_ids: Sequence[str] = (),
                  connection_threshold: float = 0.6,
                  ) -> list[tuple[FrameObservation, FrameObservation]]:
    """Render the scripted world into paired leading/auxiliary frames.

    At each frame tick both cameras observe the world as it was one lag
    sample earlier (one shared sample per tick; the pair is a synchronized
    capture). The noise model independently drops each detection and
    hypothesis per camera and injects spurious hypotheses drawn from the
    connection catalog with probabilities above the decision threshold --
    below-threshold noise could never perturb a decision.
    """
    if frame_period_ms < 1:
        raise InputError(f"frame_period_ms must be >= 1, got {frame_period_ms}")
    last_event = max((e.at_ms for e in events), default=0)
    if horizon_ms < last_event:
        raise InputError(f"horizon {horizon_ms} does not cover events up to {last_event}")

    rng = np.random.default_rng(noise.seed if noise.seed is not None else 0)
    noisy = noise.miss_rate > 0.0 or noise.false_hypothesis_rate > 0.0

    # World snapshots after each placement change, as shared detection tuples.
    snapshot_times: list[int] = []
    snapshots: list[tuple[Detection, ...]] = []
    standing: list[tuple[str, str, Detection]] = []
    shows: list[tuple[int, int, ShowConnection]] = []
    for event in sorted(events, key=lambda e: e.at_ms):
        action = event.action
        if isinstance(action, PlacePart):
            standing.append((action.part, action.zone, Detection(action.part, action.bbox)))
        elif isinstance(action, RemovePart):
            for i, (part, zone, _det) in enumerate(standing):
                if part == action.part and zone == action.zone:
                    del standing[i]
                    break
            else:
                raise InputError(
                    f"remove event at {event.at_ms} for absent part {action.part!r} "
                    f"in zone {action.zone!r}")
        else:
            shows.append((event.at_ms, event.at_ms + action.duration_ms, action))
            continue
        snapshot_times.append(event.at_ms)
        snapshots.append(tuple(det for _part, _zone, det in standing))

    def world_at(visible_ms: int) -> tuple[Detection, ...]:
        idx = bisect_right(snapshot_times, visible_ms)
        return snapshots[idx - 1] if idx else ()

    def shows_at(visible_ms: int) -> list[ShowConnection]:
        return [show for start, end, show in shows if start <= visible_ms < end]

    frames: list[tuple[FrameObservation, FrameObservation]] = []
    for tick in range(0, horizon_ms + 1, frame_period_ms):
        visible = tick - lag.sample(rng)
        base = world_at(visible) if visible >= 0 else ()
        active = shows_at(visible) if visible >= 0 else []

        per_camera: list[tuple[tuple[Detection, ...], tuple[ConnectionHypothesis, ...]]] = []
        for probability_of in (lambda s: s.leading_prob, lambda s: s.aux_prob):
            detections = base
            if noisy and noise.miss_rate > 0.0 and base:
                kept = tuple(d for d in base if rng.random() >= noise.miss_rate)
                detections = kept
            hypotheses: list[ConnectionHypothesis] = []
            for show in active:
                if noisy and noise.miss_rate > 0.0 and rng.random() < noise.miss_rate:
                    continue
                hypotheses.append(ConnectionHypothesis(
                    show.connection, probability_of(show), assembly_zone_id))
            if (noisy and noise.false_hypothesis_rate > 0.0 and connection_ids
                    and rng.random() < noise.false_hypothesis_rate):
                spurious = connection_ids[int(rng.integers(0, len(connection_ids)))]
                prob = connection_threshold + (1.0 - connection_threshold) * (1.0 - float(rng.random()))
                hypotheses.append(ConnectionHypothesis(spurious, prob, assembly_zone_id))
            per_camera.append((detections, tuple(hypotheses)))

        (lead_dets, lead_hyps), (aux_dets, aux_hyps) = per_camera
        frames.append((
            FrameObservation(LEADING, tick, lead_dets, lead_hyps),
            FrameObservation(AUXILIARY, tick, aux_dets, aux_hyps),
        ))
    return frames


def simulate_run(plan: AssemblyPlan, config: EngineConfig, pace: PaceProfile,
                 lag: LagModel, noise: NoiseModel, seed: int,
                 run_id: str | None = None) -> tuple[GroundTruth, SessionResult]:
    """Script, render, and replay one run; returns the paired label sets."""
    events, truth = generate_scenario(plan, pace, seed)
    horizon = (truth.completion_ms + lag.max_ms + DEFAULT_SHOW_DURATION_MS
               + 3 * config.frame_period_ms)
    if noise.seed is None:
        noise = replace(noise, seed=seed + 1_000_003)
    frames = render_frames(events, lag, noise, config.frame_period_ms, horizon,
                           plan.assembly_zone.id,
                           connection_ids=sorted(plan.connection_ids),
                           connection_threshold=config.connection_threshold)
    if run_id is None:
        run_id = f"{pace.cohort_label}-{seed}"
    result = run_session(plan, config, frames, run_id=run_id, cohort=pace.cohort_label)
    return truth, result


def simulate_cohorts(plan: AssemblyPlan, config: EngineConfig, paces: Sequence[PaceProfile],
                     runs_per_cohort: int, lag: LagModel, noise: NoiseModel,
                     base_seed: int) -> tuple[list[Timeline], list[Timeline]]:
    """Run whole cohorts; per-run seeds are base_seed + run index.

    Returns (truth timelines, predicted timelines); predicted entries are
    omitted for runs the engine never completed (possible only under noise).
    """
    truths: list[Timeline] = []
    preds: list[Timeline] = []
    index = 0
    for pace in paces:
        for _ in range(runs_per_cohort):
            run_id = f"{pace.cohort_label}-{index:03d}"
            truth, result = simulate_run(plan, config, pace, lag, noise,
                                         seed=base_seed + index, run_id=run_id)
            truths.append(truth.timeline(run_id=run_id, cohort=pace.cohort_label))
            if result.timeline is not None:
                preds.append(result.timeline)
            index += 1
    return truths, preds


# ---------------------------------------------------------------------------
# Scenario files
# ---------------------------------------------------------------------------

def scenario_to_list(events: Sequence[ScenarioEvent]) -> list[dict[str, Any]]:
    out = []
    for event in events:
        action = event.action
        if isinstance(action, PlacePart):
            payload: dict[str, Any] = {"kind": "place_part", "part": action.part,
                                       "zone": action.zone,
                                       "bbox": {"x": action.bbox.x, "y": action.bbox.y,
                                                "w": action.bbox.w, "h": action.bbox.h}}
        elif isinstance(action, RemovePart):
            payload = {"kind": "remove_part", "part": action.part, "zone": action.zone}
        else:
            payload = {"kind": "show_connection", "connection": action.connection,
                       "duration_ms": action.duration_ms,
                       "leading_prob": action.leading_prob, "aux_prob": action.aux_prob}
        out.append({"at_ms": event.at_ms, "action": payload})
    return out


def scenario_from_list(doc: Any) -> list[ScenarioEvent]:
    """Parse a scenario document (JSON array of {at_ms, action} objects)."""
    if not isinstance(doc, list):
        raise FormatError("scenario: expected a JSON array of events")
    events = []
    for i, entry in enumerate(doc):
        ctx = f"events[{i}]"
        _expect(entry, ("at_ms", "action"), ctx)
        action = entry["action"]
        if not isinstance(action, Mapping) or "kind" not in action:
            raise FormatError(f"{ctx}.action: expected an object with a kind")
        kind = action["kind"]
        try:
            if kind == "place_part":
                _expect(action, ("kind", "part", "zone", "bbox"), ctx + ".action")
                bbox = action["bbox"]
                _expect(bbox, ("x", "y", "w", "h"), ctx + ".action.bbox")
                parsed: ScenarioAction = PlacePart(
                    action["part"], action["zone"],
                    Rect(bbox["x"], bbox["y"], bbox["w"], bbox["h"]))
            elif kind == "remove_part":
                _expect(action, ("kind", "part", "zone"), ctx + ".action")
                parsed = RemovePart(action["part"], action["zone"])
            elif kind == "show_connection":
                _expect(action, ("kind", "connection", "duration_ms",
                                 "leading_prob", "aux_prob"), ctx + ".action")
                parsed = ShowConnection(action["connection"], action["duration_ms"],
                                        action["leading_prob"], action["aux_prob"])
            else:
                raise FormatError(f"{ctx}.action: unknown kind {kind!r}")
            events.append(ScenarioEvent(entry["at_ms"], parsed))
        except (InputError, ValueError, TypeError) as exc:
            raise FormatError(f"{ctx}: {exc}") from exc
    return events


def _expect(obj: Any, keys: tuple[str, ...], context: str) -> None:
    if not isinstance(obj, Mapping):
        raise FormatError(f"{context}: expected an object")
    unknown = set(obj) - set(keys)
    if unknown:
        raise FormatError(f"{context}: unknown keys {sorted(unknown)}")
    missing = set(keys) - set(obj)
    if missing:
        raise FormatError(f"{context}: missing keys {sorted(missing)}")


def save_scenario(events: Sequence[ScenarioEvent], path: str | Path) -> None:
    Path(path).write_text(json.dumps(scenario_to_list(events), indent=2) + "\n",
                          encoding="utf-8")


def load_scenario(path: str | Path) -> list[ScenarioEvent]:
    try:
        doc = json.loads(Path(path).read_text(encoding="utf-8"))
    except json.JSONDecodeError as exc:
        raise FormatError(f"{path}: not valid JSON: {exc}") from exc
    return scenario_from_list(doc)
