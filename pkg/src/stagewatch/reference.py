"""Bundled reference build: a 12-stage gearbox assembly of 7 physical parts.

Six stages place parts into zones and six demonstrate interconnections, in
alternating order. This is the plan the demos, the service default, and the
efficiency experiments all run against.
"""

from __future__ import annotations

from .model import (
    CONNECTION,
    PLACEMENT,
    AssemblyPlan,
    ConnectionClass,
    PartClass,
    PlacementRequirement,
    Rect,
    StageSpec,
    Zone,
)


def reference_plan() -> AssemblyPlan:
    zones = (
        Zone("z_staging_left", Rect(0.02, 0.25, 0.20, 0.50)),
        Zone("z_assembly", Rect(0.30, 0.20, 0.40, 0.60), is_assembly_zone=True),
        Zone("z_staging_right", Rect(0.78, 0.25, 0.20, 0.50)),
    )
    parts = (
        PartClass("p_base", "Base frame"),
        PartClass("p_axle", "Main axle"),
        PartClass("p_gear_small", "Small gear"),
        PartClass("p_gear_large", "Large gear"),
        PartClass("p_cover", "Housing cover"),
        PartClass("p_bolt", "Lock bolt"),
    )
    connections = (
        ConnectionClass("c_base_fixture", "Base locked to fixture"),
        ConnectionClass("c_axle_base", "Axle seated in base"),
        ConnectionClass("c_gear_small_axle", "Small gear on axle"),
        ConnectionClass("c_gear_mesh", "Gears meshed"),
        ConnectionClass("c_cover_base", "Cover latched on base"),
        ConnectionClass("c_bolts_tight", "Bolts tightened"),
    )

    def place(index: int, part: str, zone: str, count: int, text: str) -> StageSpec:
        return StageSpec(index=index, kind=PLACEMENT,
                         placements=(PlacementRequirement(part, zone, count),),
                         instruction=text)

    def connect(index: int, connection: str, text: str) -> StageSpec:
        return StageSpec(index=index, kind=CONNECTION, connection=connection,
                         instruction=text)

    stages = (
        place(0, "p_base", "z_assembly", 1, "Place the base frame in the assembly zone"),
        connect(1, "c_base_fixture", "Lock the base frame onto the fixture"),
        place(2, "p_axle", "z_assembly", 1, "Place the main axle in the assembly zone"),
        connect(3, "c_axle_base", "Seat the axle in the base bearings"),
        place(4, "p_gear_small", "z_staging_left", 1, "Stage the small gear in the left tray"),
        connect(5, "c_gear_small_axle", "Press the small gear onto the axle"),
        place(6, "p_gear_large", "z_assembly", 1, "Place the large gear in the assembly zone"),
        connect(7, "c_gear_mesh", "Mesh the large gear with the small gear"),
        place(8, "p_cover", "z_assembly", 1, "Place the housing cover in the assembly zone"),
        connect(9, "c_cover_base", "Latch the cover onto the base"),
        place(10, "p_bolt", "z_assembly", 2, "Place both lock bolts in the assembly zone"),
        connect(11, "c_bolts_tight", "Tighten both lock bolts"),
    )
    return AssemblyPlan(plan_id="gearbox-12", zones=zones, parts=parts,
                        connections=connections, stages=stages)
