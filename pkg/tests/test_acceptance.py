"""Acceptance suite: one test per release criterion, at pinned tolerances.

Each criterion prints a single [PASS]/[FAIL] line (visible with ``pytest -s``
or in captured output) in addition to the usual pytest verdict.
"""

import json
import time
from contextlib import contextmanager

import numpy as np
import pytest
from click.testing import CliRunner

from stagewatch import (
    AssemblyPlan,
    ConnectionClass,
    ConstantLag,
    EngineConfig,
    FAST_PACE,
    IoUVector,
    NoiseModel,
    PaceProfile,
    PartClass,
    PlacementRequirement,
    Rect,
    SLOW_PACE,
    StageInterval,
    StageSpec,
    UniformJitterLag,
    Zone,
    aggregate,
    discretized_iou_oracle,
    generate_scenario,
    init_state,
    interval_iou,
    read_report_json,
    read_timeline_csv,
    render_frames,
    run_session,
    save_plan,
    session_event_lines,
    simulate_cohorts,
    simulate_run,
    step,
    timeline_iou,
    write_timeline_csv,
)
from stagewatch.cli import main as cli_main
from stagewatch.evaluate import report_from_dict, report_to_dict
from stagewatch.model import CONNECTION, PLACEMENT


@contextmanager
def criterion(name: str):
    started = time.monotonic()
    try:
        yield
    except BaseException:
        print(f"[FAIL] {name}")
        raise
    print(f"[PASS] {name} ({time.monotonic() - started:.1f}s)")


def random_interval(rng) -> StageInterval:
    start = int(rng.integers(0, 20_000))
    length = 0 if rng.random() < 0.05 else int(rng.integers(0, 10_000))
    return StageInterval(start, start + length)


def test_iou_oracle_equivalence(plan):
    """interval_iou matches the 1 ms mask oracle on >= 1000 random pairs."""
    with criterion("IoU oracle equivalence"):
        started = time.monotonic()
        rng = np.random.default_rng(101)
        resolution = 1
        for _ in range(1200):
            a = random_interval(rng)
            b = random_interval(rng)
            closed_form = interval_iou(a, b)
            rasterized = discretized_iou_oracle(a, b, resolution)
            overlap = max(0, min(a.end_ms, b.end_ms) - max(a.start_ms, b.start_ms))
            union = a.length_ms + b.length_ms - overlap
            if union == 0:
                assert closed_form == rasterized == 1.0
            else:
                assert abs(closed_form - rasterized) <= 2 * resolution / union
        assert time.monotonic() - started < 5.0


def test_closed_form_lag_law(plan):
    """Constant 1 s lag on exact 10 s stages: interior IoU = 9/11."""
    with criterion("closed-form lag law"):
        started = time.monotonic()
        config = EngineConfig(frame_period_ms=1)
        pace = PaceProfile(10_000, 0.0, "steady")
        truth, result = simulate_run(plan, config, pace, ConstantLag(1000),
                                     NoiseModel(), seed=42)
        assert result.completed
        vec = timeline_iou(result.timeline,
                           truth.timeline(run_id=result.timeline.run_id, cohort="steady"))
        expected = 9 / 11
        # Two frame periods of boundary quantization translated into IoU error.
        slack = 2 * config.frame_period_ms
        tolerance = expected - (9000 - slack) / (11_000 + slack)
        for value in vec.values[1:]:
            assert abs(value - expected) <= tolerance
        assert time.monotonic() - started < 10.0


def test_cohort_ordering(plan):
    """Slow assemblies always score above fast ones under the same lag."""
    with criterion("cohort ordering (slow > fast)"):
        started = time.monotonic()
        config = EngineConfig()
        for trial in range(10):
            base_seed = 10_000 * trial
            truths, preds = simulate_cohorts(plan, config, [FAST_PACE, SLOW_PACE], 30,
                                             ConstantLag(500), NoiseModel(), base_seed)
            assert len(preds) == 60
            truth_by_run = {t.run_id: t for t in truths}
            samples = {"fast": [], "slow": []}
            for pred in preds:
                vec = timeline_iou(pred, truth_by_run[pred.run_id])
                samples[pred.cohort].extend(vec.values)
            fast_mean = float(np.mean(samples["fast"]))
            slow_mean = float(np.mean(samples["slow"]))
            assert 0.5 < fast_mean < 1.0
            assert 0.5 < slow_mean < 1.0
            assert slow_mean > fast_mean
        assert time.monotonic() - started < 60.0


def test_stage_independence(plan):
    """Under i.i.d. per-frame lag, no stage is systematically worse."""
    with criterion("stage independence"):
        started = time.monotonic()
        config = EngineConfig()
        truths, preds = simulate_cohorts(plan, config, [FAST_PACE, SLOW_PACE], 30,
                                         UniformJitterLag(200, 800), NoiseModel(),
                                         base_seed=777)
        assert len(preds) == 60
        truth_by_run = {t.run_id: t for t in truths}
        vectors = [timeline_iou(p, truth_by_run[p.run_id]) for p in preds]
        report = aggregate(vectors)
        spread = max(report.per_stage_mean) - min(report.per_stage_mean)
        assert spread < 0.1
        assert time.monotonic() - started < 60.0


# ---------------------------------------------------------------------------
# State-machine safety fuzzing, with checkers independent of the engine code.
# ---------------------------------------------------------------------------

def _overlap_fraction(bbox: Rect, zone: Rect) -> float:
    if (bbox.x >= zone.x and bbox.y >= zone.y
            and bbox.x + bbox.w <= zone.x + zone.w and bbox.y + bbox.h <= zone.y + zone.h):
        return 1.0
    w = min(bbox.x + bbox.w, zone.x + zone.w) - max(bbox.x, zone.x)
    h = min(bbox.y + bbox.h, zone.y + zone.h) - max(bbox.y, zone.y)
    if w <= 0 or h <= 0:
        return 0.0
    return (w * h) / (bbox.w * bbox.h)


def _camera_counts(frame, zones, threshold):
    counts = {}
    for det in frame.detections:
        best = None
        best_frac = 0.0
        for zone in zones:
            frac = _overlap_fraction(det.bbox, zone.rect)
            if frac < threshold:
                continue
            if best is None or frac > best_frac or (frac == best_frac and zone.id < best):
                best, best_frac = zone.id, frac
        if best is not None:
            counts[(best, det.object_class)] = counts.get((best, det.object_class), 0) + 1
    return counts


def _placement_satisfied(plan, stage, leading, auxiliary, threshold):
    lead = _camera_counts(leading, plan.zones, threshold)
    aux = _camera_counts(auxiliary, plan.zones, threshold)
    union = {key: max(lead.get(key, 0), aux.get(key, 0)) for key in set(lead) | set(aux)}
    required = {}
    for req in stage.placements:
        required[(req.zone, req.part)] = required.get((req.zone, req.part), 0) + req.count
    return all(union.get(key, 0) == count for key, count in required.items())


def _camera_pick(frame, zone_id, threshold):
    best = None
    best_prob = 0.0
    for hyp in frame.connection_hypotheses:
        if hyp.source_zone_id != zone_id or hyp.probability <= threshold:
            continue
        if (best is None or hyp.probability > best_prob
                or (hyp.probability == best_prob and hyp.connection_id < best)):
            best, best_prob = hyp.connection_id, hyp.probability
    return best


def _connection_confirmed(plan, stage, leading, auxiliary, threshold):
    zone_id = plan.assembly_zone.id
    return (_camera_pick(leading, zone_id, threshold) == stage.connection
            and _camera_pick(auxiliary, zone_id, threshold) == stage.connection)


def _fuzz_plan(rng) -> AssemblyPlan:
    zones = (Zone("z0", Rect(0.05, 0.1, 0.25, 0.8)),
             Zone("z1", Rect(0.38, 0.1, 0.25, 0.8), is_assembly_zone=True),
             Zone("z2", Rect(0.71, 0.1, 0.25, 0.8)))
    stage_count = int(rng.integers(2, 6))
    parts = tuple(PartClass(f"p{i}", f"P{i}") for i in range(stage_count))
    connections = tuple(ConnectionClass(f"c{i}", f"C{i}") for i in range(3))
    stages = []
    for i in range(stage_count):
        if rng.random() < 0.5:
            zone = ("z0", "z1", "z2")[int(rng.integers(0, 3))]
            count = int(rng.integers(1, 3))
            stages.append(StageSpec(i, PLACEMENT,
                                    placements=(PlacementRequirement(f"p{i}", zone, count),)))
        else:
            stages.append(StageSpec(i, CONNECTION,
                                    connection=f"c{int(rng.integers(0, 3))}"))
    return AssemblyPlan("fuzz", zones, parts, connections, tuple(stages))


def test_state_machine_safety():
    """Fuzzed runs never advance without their stage's conditions holding."""
    with criterion("state-machine safety (1000 fuzzed runs)"):
        started = time.monotonic()
        master = np.random.default_rng(2024)
        for run_index in range(1000):
            rng = np.random.default_rng(master.integers(0, 2**63))
            fuzz = _fuzz_plan(rng)
            pace = PaceProfile(int(rng.integers(400, 1200)),
                               float(rng.uniform(0.0, 0.4)), "fuzz")
            if rng.random() < 0.5:
                lag = ConstantLag(int(rng.integers(0, 300)))
            else:
                low = int(rng.integers(0, 200))
                lag = UniformJitterLag(low, low + int(rng.integers(0, 300)))
            noise = NoiseModel(miss_rate=float(rng.uniform(0, 0.4)),
                               false_hypothesis_rate=float(rng.uniform(0, 0.3)),
                               seed=int(rng.integers(0, 2**31)))
            config = EngineConfig(frame_period_ms=int(rng.integers(50, 151)))
            events, truth = generate_scenario(fuzz, pace, seed=int(rng.integers(0, 2**31)))
            horizon = truth.completion_ms + lag.max_ms + 2500
            frames = render_frames(events, lag, noise, config.frame_period_ms, horizon,
                                   fuzz.assembly_zone.id,
                                   connection_ids=sorted(fuzz.connection_ids),
                                   connection_threshold=config.connection_threshold)

            state = init_state(fuzz, config)
            last_transition_ts = 0
            for leading, auxiliary in frames:
                if state.completed:
                    break
                before = state.current_stage_index
                result = step(state, leading, auxiliary)
                after = state.current_stage_index
                assert after in (before, before + 1)
                if result.transition is None:
                    assert after == before
                    continue
                assert result.transition.stage_index == before + 1
                assert result.transition.start_timestamp_ms == leading.timestamp_ms
                assert result.transition.start_timestamp_ms >= last_transition_ts
                last_transition_ts = result.transition.start_timestamp_ms
                left = fuzz.stages[before]
                if left.kind == PLACEMENT:
                    assert _placement_satisfied(fuzz, left, leading, auxiliary,
                                                config.overlap_threshold)
                else:
                    assert _connection_confirmed(fuzz, left, leading, auxiliary,
                                                 config.connection_threshold)

            replay_a = run_session(fuzz, config, frames)
            replay_b = run_session(fuzz, config, frames)
            assert session_event_lines(replay_a.state) == session_event_lines(replay_b.state)
            assert replay_a.state.transitions == replay_b.state.transitions
            assert replay_a.state.transitions == state.transitions
        assert time.monotonic() - started < 60.0


def test_boundary_conventions():
    """Ratio conventions at the degenerate corners, plus symmetry."""
    with criterion("interval-ratio boundary conventions"):
        assert interval_iou(StageInterval(0, 10), StageInterval(0, 10)) == 1.0
        assert interval_iou(StageInterval(0, 10), StageInterval(20, 30)) == 0.0
        assert interval_iou(StageInterval(5, 5), StageInterval(7, 7)) == 1.0
        assert interval_iou(StageInterval(5, 5), StageInterval(0, 10)) == 0.0
        assert interval_iou(StageInterval(0, 10), StageInterval(5, 5)) == 0.0
        rng = np.random.default_rng(55)
        for _ in range(10_000):
            a = random_interval(rng)
            b = random_interval(rng)
            assert interval_iou(a, b) == interval_iou(b, a)


def test_file_format_round_trips(plan, tmp_path):
    """parse(emit(x)) = x for both file formats; self-evaluation is exactly 1."""
    with criterion("file-format round-trips"):
        truths, preds = simulate_cohorts(plan, EngineConfig(), [FAST_PACE, SLOW_PACE], 4,
                                         ConstantLag(400), NoiseModel(), base_seed=5)
        truth_path = tmp_path / "truth.csv"
        write_timeline_csv(truths, truth_path)
        parsed = read_timeline_csv(truth_path)
        assert parsed == truths
        again = tmp_path / "again.csv"
        write_timeline_csv(parsed, again)
        assert again.read_bytes() == truth_path.read_bytes()

        truth_by_run = {t.run_id: t for t in truths}
        vectors = [timeline_iou(p, truth_by_run[p.run_id]) for p in preds]
        report = aggregate(vectors, cohorts={t.run_id: t.cohort for t in truths})
        assert report_from_dict(report_to_dict(report)) == report
        assert report_from_dict(json.loads(json.dumps(report_to_dict(report)))) == report

        runner = CliRunner()
        report_path = tmp_path / "self.json"
        result = runner.invoke(cli_main, ["evaluate", "--truth", str(truth_path),
                                          "--pred", str(truth_path),
                                          "--out", str(report_path)],
                               catch_exceptions=False)
        assert result.exit_code == 0
        assert read_report_json(report_path).overall_mean == 1.0


def test_full_pipeline_smoke(plan, tmp_path):
    """simulate (60 runs) -> evaluate -> report: 12-row table, 720 samples."""
    with criterion("full pipeline smoke"):
        started = time.monotonic()
        runner = CliRunner()
        plan_path = tmp_path / "plan.json"
        save_plan(plan, plan_path)
        sim_dir = tmp_path / "sim"
        result = runner.invoke(cli_main, ["simulate", "--plan", str(plan_path),
                                          "--runs", "30", "--pace", "both",
                                          "--lag-ms", "500", "--seed", "7",
                                          "--out", str(sim_dir)],
                               catch_exceptions=False)
        assert result.exit_code == 0, result.output

        report_path = tmp_path / "report.json"
        result = runner.invoke(cli_main, ["evaluate", "--truth", str(sim_dir / "truth.csv"),
                                          "--pred", str(sim_dir / "pred.csv"),
                                          "--out", str(report_path)],
                               catch_exceptions=False)
        assert result.exit_code == 0, result.output

        tables_dir = tmp_path / "tables"
        result = runner.invoke(cli_main, ["report", "--report", str(report_path),
                                          "--out", str(tables_dir)],
                               catch_exceptions=False)
        assert result.exit_code == 0, result.output

        stage_rows = (tables_dir / "per_stage.csv").read_text().strip().splitlines()
        assert len(stage_rows) == 1 + 12
        hist_rows = (tables_dir / "histogram.csv").read_text().strip().splitlines()[1:]
        assert sum(int(row.split(",")[2]) for row in hist_rows) == 720
        assert time.monotonic() - started < 120.0
