"""Workspace geometry: rectangles, zones, and the part-in-zone rule.

Run:  python demos/01_zone_geometry.py
"""

from stagewatch import Rect, rect_intersection_area, zone_overlap_fraction, reference_plan

# ---------------------------------------------------------------------------
# The workspace is the unit square. Zones and detected part bounding boxes
# are axis-aligned rectangles inside it.
# ---------------------------------------------------------------------------
zone = Rect(0.30, 0.20, 0.40, 0.60)
part_inside = Rect(0.40, 0.35, 0.20, 0.30)
part_straddling = Rect(0.18, 0.35, 0.20, 0.30)  # only 40% inside the zone
part_outside = Rect(0.02, 0.05, 0.10, 0.10)

print("intersection areas with the zone:")
for name, bbox in [("inside", part_inside), ("straddling", part_straddling),
                   ("outside", part_outside)]:
    print(f"  {name:11s} {rect_intersection_area(bbox, zone):.4f}")

# ---------------------------------------------------------------------------
# What the engine actually uses is the overlap fraction measured against the
# PART's own area: "how much of this part lies inside the zone". A part fully
# inside scores exactly 1.0; a disjoint one scores 0.0.
# ---------------------------------------------------------------------------
print("\noverlap fractions (part area as the denominator):")
for name, bbox in [("inside", part_inside), ("straddling", part_straddling),
                   ("outside", part_outside)]:
    print(f"  {name:11s} {zone_overlap_fraction(bbox, zone):.4f}")

# ---------------------------------------------------------------------------
# A detection belongs to at most one zone: the one with the greatest overlap
# fraction among those clearing the configured threshold (default 0.7).
# The bundled reference plan has three zones; a part sitting in the middle of
# the assembly zone is assigned there and nowhere else.
# ---------------------------------------------------------------------------
from stagewatch.engine import Detection, assign_detections

plan = reference_plan()
print("\nzones in the reference plan:")
for z in plan.zones:
    marker = "  <- assembly zone" if z.is_assembly_zone else ""
    print(f"  {z.id:16s} x={z.rect.x:.2f} y={z.rect.y:.2f} "
          f"w={z.rect.w:.2f} h={z.rect.h:.2f}{marker}")

detections = [Detection("p_base", part_inside), Detection("p_axle", part_straddling)]
counts = assign_detections(detections, plan.zones, overlap_threshold=0.7)
print("\nassigned counts at threshold 0.7:", dict(counts))
print("(the straddling part clears no zone's threshold, so it is unassigned)")
