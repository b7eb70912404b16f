"""Stepping the control engine frame by frame and reading operator feedback.

Run:  python demos/02_engine_session.py
"""

from stagewatch import (
    AUXILIARY,
    LEADING,
    ConnectionHypothesis,
    Detection,
    EngineConfig,
    FrameObservation,
    init_state,
    reference_plan,
    step,
)
from stagewatch.simulate import part_bbox_in_zone

plan = reference_plan()
config = EngineConfig()
state = init_state(plan, config)

print(f"plan {plan.plan_id}: {plan.stage_count} stages")
print(f"stage 0 instruction: {state.messages[-1].payload['text']!r}\n")


def pair(ts, detections=(), lead_hyps=(), aux_hyps=()):
    return (FrameObservation(LEADING, ts, tuple(detections), tuple(lead_hyps)),
            FrameObservation(AUXILIARY, ts, tuple(detections), tuple(aux_hyps)))


def show(ts, result):
    for message in result.messages:
        print(f"  t={ts:5d}  {message.kind:20s} {message.payload}")
    if result.transition:
        print(f"  t={ts:5d}  -> now at stage {result.transition.stage_index}")


# Frame 1: empty table. The engine reports the missing detail and waits.
print("frame at t=0: empty table")
show(0, step(state, *pair(0)))

# Frame 2: the base frame appears in the assembly zone; stage 0 is satisfied.
base = Detection("p_base", part_bbox_in_zone(plan.zone("z_assembly")))
print("\nframe at t=1000: base frame placed in z_assembly")
show(1000, step(state, *pair(1000, [base])))

# Frame 3: the operator demonstrates the WRONG connection; both cameras are
# confident, so the engine flags it and refuses to advance.
wrong = ConnectionHypothesis("c_bolts_tight", 0.95, "z_assembly")
print("\nframe at t=2000: wrong connection demonstrated")
show(2000, step(state, *pair(2000, [base], [wrong], [wrong])))

# Frame 4: the right connection, but the auxiliary camera is not convinced
# (0.55 is below the 0.6 threshold) -- the two-camera protocol stalls.
lead_ok = ConnectionHypothesis("c_base_fixture", 0.9, "z_assembly")
aux_meh = ConnectionHypothesis("c_base_fixture", 0.55, "z_assembly")
print("\nframe at t=3000: leading camera sure, auxiliary below threshold")
show(3000, step(state, *pair(3000, [base], [lead_ok], [aux_meh])))
print(f"  (leading camera's own verdict was {state.pending_leading_connection!r})")

# Frame 5: both cameras above threshold on the required connection: advance.
aux_ok = ConnectionHypothesis("c_base_fixture", 0.7, "z_assembly")
print("\nframe at t=4000: both cameras confirm")
show(4000, step(state, *pair(4000, [base], [lead_ok], [aux_ok])))

print(f"\ntransitions so far: {[(t.stage_index, t.start_timestamp_ms) for t in state.transitions]}")
print(f"zone occupancy:     {dict(state.zone_occupancy)}")
