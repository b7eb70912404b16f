"""Supervised manual assembly: control engine, simulator, and efficiency evaluation."""

from .engine import (
    AUXILIARY,
    LEADING,
    ConnectionHypothesis,
    Detection,
    EngineState,
    FrameObservation,
    OperatorMessage,
    PlacementStatus,
    SessionResult,
    StageTransition,
    StepResult,
    decide_connection,
    decide_connection_single,
    evaluate_placement,
    init_state,
    predicted_timeline,
    run_session,
    session_event_lines,
    step,
)
from .errors import FormatError, GeometryError, InputError
from .evaluate import (
    EfficiencyReport,
    IoUVector,
    StageInterval,
    Timeline,
    aggregate,
    discretized_iou_oracle,
    interval_iou,
    read_report_json,
    read_timeline_csv,
    timeline_from_starts,
    timeline_iou,
    write_report_json,
    write_timeline_csv,
)
from .model import (
    AssemblyPlan,
    ConnectionClass,
    EngineConfig,
    PartClass,
    PlacementRequirement,
    Rect,
    StageSpec,
    Zone,
    load_plan,
    plan_from_dict,
    plan_to_dict,
    rect_intersection_area,
    save_plan,
    validate_plan,
    zone_overlap_fraction,
)
from .reference import reference_plan
from .simulate import (
    FAST_PACE,
    SLOW_PACE,
    ConstantLag,
    GroundTruth,
    NoiseModel,
    PaceProfile,
    PlacePart,
    RemovePart,
    ScenarioEvent,
    ShowConnection,
    UniformJitterLag,
    generate_scenario,
    load_scenario,
    render_frames,
    save_scenario,
    simulate_cohorts,
    simulate_run,
)

__version__ = "0.1.0"
