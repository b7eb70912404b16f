"""Workspace geometry, part/connection catalogs, and assembly plan definitions.

All geometry lives in normalized coordinates: the camera-facing work surface
spans the unit square [0,1] x [0,1] regardless of physical table size, so
plans are portable across stations.

Plan documents are UTF-8 JSON with top-level keys ``plan_id``, ``zones``,
``parts``, ``connections`` and ``stages``; see :func:`plan_from_dict` for the
exact schema. Unknown keys are rejected.
"""

from __future__ import annotations

import json
from dataclasses import dataclass
from pathlib import Path
from typing import Any, Iterable, Mapping

from .errors import FormatError, GeometryError, InputError

DEFAULT_OVERLAP_THRESHOLD = 0.7
DEFAULT_CONNECTION_THRESHOLD = 0.6
DEFAULT_FRAME_PERIOD_MS = 100

# Tolerates float rounding of coordinates that are meant to sum to exactly 1.
_EDGE_EPS = 1e-9

PLACEMENT = "placement"
CONNECTION = "connection"


@dataclass(frozen=True)
class Rect:
    """Axis-aligned rectangle inside the unit workspace square."""

    x: float
    y: float
    w: float
    h: float

    def __post_init__(self) -> None:
        if not (self.w > 0 and self.h > 0):
            raise GeometryError(f"rect extents must be positive, got w={self.w}, h={self.h}")
        if self.x < 0 or self.y < 0:
            raise GeometryError(f"rect origin must be non-negative, got x={self.x}, y={self.y}")
        if self.x + self.w > 1 + _EDGE_EPS or self.y + self.h > 1 + _EDGE_EPS:
            raise GeometryError(
                f"rect exceeds the unit workspace: x+w={self.x + self.w}, y+h={self.y + self.h}"
            )

    @property
    def area(self) -> float:
        return self.w * self.h


@dataclass(frozen=True)
class Zone:
    id: str
    rect: Rect
    is_assembly_zone: bool = False


@dataclass(frozen=True)
class PartClass:
    id: str
    display_name: str


@dataclass(frozen=True)
class ConnectionClass:
    id: str
    display_name: str


@dataclass(frozen=True)
class PlacementRequirement:
    """Required count of one part class inside one zone."""

    part: str
    zone: str
    count: int = 1


@dataclass(frozen=True)
class StageSpec:
    """One step of the regulated sequence.

    ``kind`` is either ``"placement"`` (requirements is a list of
    :class:`PlacementRequirement`) or ``"connection"`` (``connection`` names
    the interconnection class the operator must demonstrate).
    """

    index: int
    kind: str
    placements: tuple[PlacementRequirement, ...] = ()
    connection: str | None = None
    instruction: str = ""


@dataclass(frozen=True)
class AssemblyPlan:
    plan_id: str
    zones: tuple[Zone, ...]
    parts: tuple[PartClass, ...]
    connections: tuple[ConnectionClass, ...]
    stages: tuple[StageSpec, ...]

    def zone(self, zone_id: str) -> Zone:
        for z in self.zones:
            if z.id == zone_id:
                return z
        raise InputError(f"unknown zone id: {zone_id!r}")

    @property
    def assembly_zone(self) -> Zone:
        for z in self.zones:
            if z.is_assembly_zone:
                return z
        raise InputError(f"plan {self.plan_id!r} has no assembly zone")

    @property
    def part_ids(self) -> frozenset[str]:
        return frozenset(p.id for p in self.parts)

    @property
    def connection_ids(self) -> frozenset[str]:
        return frozenset(c.id for c in self.connections)

    @property
    def stage_count(self) -> int:
        return len(self.stages)


@dataclass(frozen=True)
class EngineConfig:
    """Tunable decision parameters shared by the engine and simulator."""

    overlap_threshold: float = DEFAULT_OVERLAP_THRESHOLD
    connection_threshold: float = DEFAULT_CONNECTION_THRESHOLD
    frame_period_ms: int = DEFAULT_FRAME_PERIOD_MS

    def __post_init__(self) -> None:
        if not (0 < self.overlap_threshold <= 1):
            raise InputError(f"overlap_threshold must be in (0,1], got {self.overlap_threshold}")
        if not (0 < self.connection_threshold < 1):
            raise InputError(
                f"connection_threshold must be in (0,1), got {self.connection_threshold}"
            )
        if not (isinstance(self.frame_period_ms, int) and self.frame_period_ms > 0):
            raise InputError(f"frame_period_ms must be a positive integer, got {self.frame_period_ms}")


def rect_intersection_area(a: Rect, b: Rect) -> float:
    """Area of the geometric intersection of two rects; 0.0 when disjoint."""
    w = min(a.x + a.w, b.x + b.w) - max(a.x, b.x)
    h = min(a.y + a.h, b.y + b.h) - max(a.y, b.y)
    if w <= 0 or h <= 0:
        return 0.0
    return w * h


def zone_overlap_fraction(detail_bbox: Rect, zone: Rect) -> float:
    """Fraction of the detail's own area that falls inside the zone.

    Measured relative to the detail (not the zone): the question answered is
    "is this part in this zone", which should not depend on how large the
    zone is.
    """
    area = detail_bbox.area
    if area <= 0:
        raise GeometryError("detail bbox has zero area")
    # Containment is decided on coordinates so it yields exactly 1.0 rather
    # than drifting a few ulps below through the area ratio.
    if (detail_bbox.x >= zone.x and detail_bbox.y >= zone.y
            and detail_bbox.x + detail_bbox.w <= zone.x + zone.w
            and detail_bbox.y + detail_bbox.h <= zone.y + zone.h):
        return 1.0
    return min(1.0, rect_intersection_area(detail_bbox, zone) / area)


def validate_plan(plan: AssemblyPlan) -> list[str]:
    """Check every plan invariant; returns a list of violations (empty = ok).

    Violations are data, not faults: callers decide whether to refuse the
    plan or surface the list to the author.
    """
    violations: list[str] = []

    zone_ids = [z.id for z in plan.zones]
    for dup in _duplicates(zone_ids):
        violations.append(f"duplicate zone id: {dup!r}")
    assembly_zones = [z.id for z in plan.zones if z.is_assembly_zone]
    if len(assembly_zones) != 1:
        violations.append(
            f"plan must have exactly one assembly zone, found {len(assembly_zones)}"
        )

    for dup in _duplicates([p.id for p in plan.parts]):
        violations.append(f"duplicate part id: {dup!r}")
    for dup in _duplicates([c.id for c in plan.connections]):
        violations.append(f"duplicate connection id: {dup!r}")

    if len(plan.stages) == 0:
        violations.append("plan has no stages")
    for position, stage in enumerate(plan.stages):
        if stage.index != position:
            violations.append(
                f"stage at position {position} carries index {stage.index}; "
                "indices must be exactly 0..n-1 in order"
            )
        label = f"stage {stage.index}"
        if stage.kind == PLACEMENT:
            if stage.connection is not None:
                violations.append(f"{label}: placement stage must not name a connection")
            for req in stage.placements:
                if req.count < 1:
                    violations.append(f"{label}: requirement count must be >= 1, got {req.count}")
                if req.part not in plan.part_ids:
                    violations.append(f"{label}: unknown part id {req.part!r}")
                if req.zone not in set(zone_ids):
                    violations.append(f"{label}: unknown zone id {req.zone!r}")
        elif stage.kind == CONNECTION:
            if stage.placements:
                violations.append(f"{label}: connection stage must not carry placements")
            if stage.connection is None:
                violations.append(f"{label}: connection stage names no connection")
            elif stage.connection not in plan.connection_ids:
                violations.append(f"{label}: unknown connection id {stage.connection!r}")
        else:
            violations.append(f"{label}: unknown stage kind {stage.kind!r}")

    return violations


def _duplicates(items: Iterable[str]) -> list[str]:
    seen: set[str] = set()
    dups: list[str] = []
    for item in items:
        if item in seen and item not in dups:
            dups.append(item)
        seen.add(item)
    return dups


# ---------------------------------------------------------------------------
# Plan document (de)serialization
# ---------------------------------------------------------------------------

def _expect_keys(obj: Mapping[str, Any], required: tuple[str, ...],
                 optional: tuple[str, ...], context: str) -> None:
    if not isinstance(obj, Mapping):
        raise FormatError(f"{context}: expected an object, got {type(obj).__name__}")
    unknown = set(obj) - set(required) - set(optional)
    if unknown:
        raise FormatError(f"{context}: unknown keys {sorted(unknown)}")
    missing = set(required) - set(obj)
    if missing:
        raise FormatError(f"{context}: missing keys {sorted(missing)}")


def _coord(obj: Mapping[str, Any], key: str, context: str) -> float:
    value = obj[key]
    if isinstance(value, bool) or not isinstance(value, (int, float)):
        raise FormatError(f"{context}: {key} must be a number, got {value!r}")
    return float(value)


def plan_from_dict(doc: Mapping[str, Any]) -> AssemblyPlan:
    """Parse a plan document. Raises :class:`FormatError` on schema problems.

    Schema::

        {"plan_id": str,
         "zones": [{"id": str, "x": f, "y": f, "w": f, "h": f,
                    "is_assembly_zone": bool?}],
         "parts": [{"id": str, "display_name": str?}],
         "connections": [{"id": str, "display_name": str?}],
         "stages": [{"index": int, "kind": "placement"|"connection",
                     "requirements": [{"part": str, "zone": str, "count": int?}]
                                     | str,       # connection id
                     "instruction": str?}]}

    Parsing is structural only; cross-reference invariants are the job of
    :func:`validate_plan`.
    """
    _expect_keys(doc, ("plan_id", "zones", "parts", "connections", "stages"), (), "plan")
    if not isinstance(doc["plan_id"], str):
        raise FormatError("plan: plan_id must be a string")

    zones = []
    for i, z in enumerate(_as_list(doc["zones"], "plan.zones")):
        ctx = f"zones[{i}]"
        _expect_keys(z, ("id", "x", "y", "w", "h"), ("is_assembly_zone",), ctx)
        try:
            rect = Rect(_coord(z, "x", ctx), _coord(z, "y", ctx),
                        _coord(z, "w", ctx), _coord(z, "h", ctx))
        except GeometryError as exc:
            raise FormatError(f"{ctx}: {exc}") from exc
        zones.append(Zone(id=_as_str(z["id"], ctx + ".id"), rect=rect,
                          is_assembly_zone=bool(z.get("is_assembly_zone", False))))

    parts = [_catalog_entry(p, f"parts[{i}]", PartClass)
             for i, p in enumerate(_as_list(doc["parts"], "plan.parts"))]
    connections = [_catalog_entry(c, f"connections[{i}]", ConnectionClass)
                   for i, c in enumerate(_as_list(doc["connections"], "plan.connections"))]

    stages = []
    for i, s in enumerate(_as_list(doc["stages"], "plan.stages")):
        ctx = f"stages[{i}]"
        _expect_keys(s, ("index", "kind", "requirements"), ("instruction",), ctx)
        index = s["index"]
        if isinstance(index, bool) or not isinstance(index, int):
            raise FormatError(f"{ctx}: index must be an integer")
        kind = s["kind"]
        instruction = _as_str(s.get("instruction", ""), ctx + ".instruction")
        reqs = s["requirements"]
        if kind == PLACEMENT:
            placements = []
            for j, r in enumerate(_as_list(reqs, ctx + ".requirements")):
                rctx = f"{ctx}.requirements[{j}]"
                _expect_keys(r, ("part", "zone"), ("count",), rctx)
                count = r.get("count", 1)
                if isinstance(count, bool) or not isinstance(count, int):
                    raise FormatError(f"{rctx}: count must be an integer")
                placements.append(PlacementRequirement(
                    part=_as_str(r["part"], rctx + ".part"),
                    zone=_as_str(r["zone"], rctx + ".zone"),
                    count=count))
            stages.append(StageSpec(index=index, kind=PLACEMENT,
                                    placements=tuple(placements), instruction=instruction))
        elif kind == CONNECTION:
            if not isinstance(reqs, str):
                raise FormatError(
                    f"{ctx}.requirements: connection stages take a single connection id string"
                )
            stages.append(StageSpec(index=index, kind=CONNECTION,
                                    connection=reqs, instruction=instruction))
        else:
            raise FormatError(f"{ctx}: kind must be \"placement\" or \"connection\", got {kind!r}")

    return AssemblyPlan(plan_id=doc["plan_id"], zones=tuple(zones), parts=tuple(parts),
                        connections=tuple(connections), stages=tuple(stages))


def _as_list(value: Any, context: str) -> list:
    if not isinstance(value, list):
        raise FormatError(f"{context}: expected a list")
    return value


def _as_str(value: Any, context: str) -> str:
    if not isinstance(value, str):
        raise FormatError(f"{context}: expected a string, got {value!r}")
    return value


def _catalog_entry(obj: Mapping[str, Any], context: str, cls):
    _expect_keys(obj, ("id",), ("display_name",), context)
    entry_id = _as_str(obj["id"], context + ".id")
    return cls(id=entry_id, display_name=_as_str(obj.get("display_name", entry_id),
                                                 context + ".display_name"))


def plan_to_dict(plan: AssemblyPlan) -> dict[str, Any]:
    """Inverse of :func:`plan_from_dict`."""
    stages: list[dict[str, Any]] = []
    for s in plan.stages:
        if s.kind == PLACEMENT:
            reqs: Any = [{"part": r.part, "zone": r.zone, "count": r.count}
                         for r in s.placements]
        else:
            reqs = s.connection
        stages.append({"index": s.index, "kind": s.kind, "requirements": reqs,
                       "instruction": s.instruction})
    return {
        "plan_id": plan.plan_id,
        "zones": [{"id": z.id, "x": z.rect.x, "y": z.rect.y, "w": z.rect.w, "h": z.rect.h,
                   "is_assembly_zone": z.is_assembly_zone} for z in plan.zones],
        "parts": [{"id": p.id, "display_name": p.display_name} for p in plan.parts],
        "connections": [{"id": c.id, "display_name": c.display_name}
                        for c in plan.connections],
        "stages": stages,
    }


def load_plan(path: str | Path) -> AssemblyPlan:
    """Read and parse a plan JSON file."""
    try:
        doc = json.loads(Path(path).read_text(encoding="utf-8"))
    except json.JSONDecodeError as exc:
        raise FormatError(f"{path}: not valid JSON: {exc}") from exc
    return plan_from_dict(doc)


def save_plan(plan: AssemblyPlan, path: str | Path) -> None:
    Path(path).write_text(json.dumps(plan_to_dict(plan), indent=2) + "\n", encoding="utf-8")
