"""Command-line front door: simulate cohorts, replay scenarios, evaluate, report.

Exit codes: 0 success, 2 validation failure (bad plan, mismatched label
files, malformed documents), 3 I/O failure. Output files are written
atomically (temp + rename) so concurrent invocations on different out paths
cannot interleave.
"""

from __future__ import annotations

import json
import os
import sys
import tempfile
from pathlib import Path
from typing import Callable, Sequence

import click

from .engine import EngineState, run_session, session_event_lines
from .errors import FormatError, GeometryError, InputError
from .evaluate import (
    DEFAULT_HIST_BINS,
    EfficiencyReport,
    Timeline,
    aggregate,
    format_seconds,
    read_report_json,
    read_timeline_csv,
    report_from_dict,
    report_to_dict,
    timeline_csv_rows,
    timeline_iou,
    write_report_json,
    write_timeline_csv,
)
from .model import (
    DEFAULT_CONNECTION_THRESHOLD,
    DEFAULT_OVERLAP_THRESHOLD,
    AssemblyPlan,
    EngineConfig,
    load_plan,
    validate_plan,
)
from .simulate import (
    FAST_PACE,
    SLOW_PACE,
    ConstantLag,
    NoiseModel,
    UniformJitterLag,
    load_scenario,
    render_frames,
    simulate_cohorts,
)

EXIT_VALIDATION = 2
EXIT_IO = 3


def _fail(code: int, message: str) -> None:
    click.echo(f"error: {message}", err=True)
    sys.exit(code)


def _guarded(fn: Callable[[], None]) -> None:
    try:
        fn()
    except (FormatError, InputError, GeometryError) as exc:
        _fail(EXIT_VALIDATION, str(exc))
    except OSError as exc:
        _fail(EXIT_IO, str(exc))


def _load_valid_plan(path: str) -> AssemblyPlan:
    plan = load_plan(path)
    violations = validate_plan(plan)
    if violations:
        for violation in violations:
            click.echo(f"plan violation: {violation}", err=True)
        sys.exit(EXIT_VALIDATION)
    return plan


def _atomic_write(path: Path, write: Callable[[Path], None]) -> None:
    path.parent.mkdir(parents=True, exist_ok=True)
    fd, tmp_name = tempfile.mkstemp(dir=path.parent, prefix=path.name + ".", suffix=".tmp")
    os.close(fd)
    tmp = Path(tmp_name)
    try:
        write(tmp)
        os.replace(tmp, path)
    finally:
        tmp.unlink(missing_ok=True)


def _frame_period(fps: float) -> int:
    if fps <= 0:
        raise InputError(f"--fps must be positive, got {fps}")
    return max(1, int(round(1000.0 / fps)))


def _lag_model(lag_ms: int, lag_jitter: int):
    if lag_jitter < 0:
        raise InputError(f"--lag-jitter must be non-negative, got {lag_jitter}")
    if lag_jitter == 0:
        return ConstantLag(lag_ms)
    return UniformJitterLag(max(0, lag_ms - lag_jitter), lag_ms + lag_jitter)


@click.group()
def main() -> None:
    """Assembly supervision: simulate, replay, and evaluate stage timelines."""


@main.command()
@click.option("--plan", "plan_path", required=True, type=click.Path(), help="Plan JSON file.")
@click.option("--runs", default=30, show_default=True, help="Runs per cohort.")
@click.option("--pace", type=click.Choice(["fast", "slow", "both"]), default="both",
              show_default=True)
@click.option("--lag-ms", default=500, show_default=True, help="Mean detection lag.")
@click.option("--lag-jitter", default=0, show_default=True,
              help="Half-width of a uniform per-frame lag jitter (0 = constant lag).")
@click.option("--miss-rate", default=0.0, show_default=True,
              help="Probability a detection or hypothesis is dropped per frame per camera.")
@click.option("--fp-rate", default=0.0, show_default=True,
              help="Probability of a spurious connection hypothesis per frame per camera.")
@click.option("--seed", default=0, show_default=True)
@click.option("--fps", default=10.0, show_default=True, help="Camera frame rate.")
@click.option("--out", "out_dir", required=True, type=click.Path(),
              help="Directory for truth.csv and pred.csv.")
def simulate(plan_path: str, runs: int, pace: str, lag_ms: int, lag_jitter: int,
             miss_rate: float, fp_rate: float, seed: int, fps: float, out_dir: str) -> None:
    """Simulate cohorts of runs and write paired truth/predicted timeline CSVs."""

    def body() -> None:
        plan = _load_valid_plan(plan_path)
        config = EngineConfig(frame_period_ms=_frame_period(fps))
        paces = {"fast": [FAST_PACE], "slow": [SLOW_PACE], "both": [FAST_PACE, SLOW_PACE]}[pace]
        noise = NoiseModel(miss_rate=miss_rate, false_hypothesis_rate=fp_rate)
        truths, preds = simulate_cohorts(plan, config, paces, runs,
                                         _lag_model(lag_ms, lag_jitter), noise, seed)
        out = Path(out_dir)
        _atomic_write(out / "truth.csv", lambda p: write_timeline_csv(truths, p))
        _atomic_write(out / "pred.csv", lambda p: write_timeline_csv(preds, p))
        click.echo(f"simulated {len(truths)} runs ({len(preds)} completed) -> {out}")

    _guarded(body)


@main.command(name="run")
@click.option("--plan", "plan_path", required=True, type=click.Path())
@click.option("--scenario", "scenario_path", required=True, type=click.Path(),
              help="Scenario JSON file of operator events.")
@click.option("--overlap-threshold", default=DEFAULT_OVERLAP_THRESHOLD, show_default=True)
@click.option("--connection-threshold", default=DEFAULT_CONNECTION_THRESHOLD, show_default=True)
@click.option("--fps", default=10.0, show_default=True)
@click.option("--out", "out_dir", required=True, type=click.Path(),
              help="Directory for timeline.csv and events.jsonl.")
def run_scenario(plan_path: str, scenario_path: str, overlap_threshold: float,
                 connection_threshold: float, fps: float, out_dir: str) -> None:
    """Replay a scripted scenario through the engine (no lag, no noise)."""

    def body() -> None:
        plan = _load_valid_plan(plan_path)
        config = EngineConfig(overlap_threshold=overlap_threshold,
                              connection_threshold=connection_threshold,
                              frame_period_ms=_frame_period(fps))
        events = load_scenario(scenario_path)
        last_event = max((e.at_ms for e in events), default=0)
        horizon = last_event + 3 * config.frame_period_ms
        frames = render_frames(events, ConstantLag(0), NoiseModel(),
                               config.frame_period_ms, horizon, plan.assembly_zone.id,
                               connection_ids=sorted(plan.connection_ids),
                               connection_threshold=config.connection_threshold)
        result = run_session(plan, config, frames, run_id="scripted", cohort="scripted")
        out = Path(out_dir)
        _atomic_write(out / "timeline.csv",
                      lambda p: _write_timeline_or_partial(result.timeline, result.state, p))
        _atomic_write(out / "events.jsonl", lambda p: p.write_text(
            "".join(line + "\n" for line in session_event_lines(result.state)),
            encoding="utf-8"))
        click.echo(f"completed={str(result.completed).lower()} "
                   f"transitions={len(result.state.transitions)} -> {out}")

    _guarded(body)


def _write_timeline_or_partial(timeline: Timeline | None, state: EngineState,
                               path: Path) -> None:
    # Incomplete runs export the stage starts they reached, with no completion row.
    if timeline is not None:
        write_timeline_csv([timeline], path)
        return
    starts = [0] + [t.start_timestamp_ms for t in state.transitions]
    with open(path, "w", encoding="utf-8", newline="") as fh:
        fh.write("run_id,cohort,stage_index,start_s\n")
        for index, start in enumerate(starts):
            fh.write(f"scripted,scripted,{index},{format_seconds(start)}\n")


@main.command()
@click.option("--truth", "truth_path", required=True, type=click.Path())
@click.option("--pred", "pred_path", required=True, type=click.Path())
@click.option("--out", "out_path", required=True, type=click.Path(),
              help="Efficiency report JSON output path.")
@click.option("--hist-bins", default=DEFAULT_HIST_BINS, show_default=True)
def evaluate(truth_path: str, pred_path: str, out_path: str, hist_bins: int) -> None:
    """Compare truth and predicted timeline CSVs into an efficiency report."""

    def body() -> None:
        truths = {t.run_id: t for t in read_timeline_csv(truth_path)}
        preds = read_timeline_csv(pred_path)
        pred_ids = {p.run_id for p in preds}
        for run_id in truths:
            if run_id not in pred_ids:
                raise InputError(f"run {run_id!r} present in truth but missing from predictions")
        vectors = []
        for pred in preds:
            truth = truths.get(pred.run_id)
            if truth is None:
                raise InputError(f"run {pred.run_id!r} present in predictions but not in truth")
            vectors.append(timeline_iou(pred, truth))
        cohorts = {t.run_id: t.cohort for t in truths.values()}
        report = aggregate(vectors, cohorts=cohorts, hist_bins=hist_bins)
        _atomic_write(Path(out_path), lambda p: write_report_json(report, p))
        click.echo(f"evaluated {len(vectors)} runs, overall mean IoU "
                   f"{report.overall_mean:.4f} -> {out_path}")

    _guarded(body)


@main.command()
@click.option("--report", "report_path", required=True, type=click.Path())
@click.option("--format", "fmt", type=click.Choice(["csv", "json"]), default="csv",
              show_default=True)
@click.option("--out", "out_dir", type=click.Path(), default=None,
              help="Write tables here instead of stdout.")
def report(report_path: str, fmt: str, out_dir: str | None) -> None:
    """Flatten an efficiency report into plot-ready tables."""

    def body() -> None:
        rep = read_report_json(report_path)
        if fmt == "json":
            payload = json.dumps(report_to_dict(rep), indent=2) + "\n"
            if out_dir is None:
                click.echo(payload, nl=False)
            else:
                _atomic_write(Path(out_dir) / "report.json",
                              lambda p: p.write_text(payload, encoding="utf-8"))
                click.echo(f"wrote {Path(out_dir) / 'report.json'}")
            return
        tables = {
            "per_stage.csv": _per_stage_csv(rep),
            "histogram.csv": _histogram_csv(rep),
            "summary.csv": _summary_csv(rep),
        }
        if out_dir is None:
            for name, text in tables.items():
                click.echo(f"# {name}")
                click.echo(text, nl=False)
        else:
            for name, text in tables.items():
                _atomic_write(Path(out_dir) / name,
                              lambda p, t=text: p.write_text(t, encoding="utf-8"))
            click.echo(f"wrote {', '.join(tables)} -> {out_dir}")

    _guarded(body)


def _per_stage_csv(rep: EfficiencyReport) -> str:
    lines = ["stage_index,mean_iou,std_iou"]
    for i, (mean, std) in enumerate(zip(rep.per_stage_mean, rep.per_stage_std)):
        lines.append(f"{i},{mean!r},{std!r}")
    return "\n".join(lines) + "\n"


def _histogram_csv(rep: EfficiencyReport) -> str:
    lines = ["bin_lo,bin_hi,count"]
    for i, count in enumerate(rep.histogram_counts):
        lines.append(f"{rep.histogram_edges[i]!r},{rep.histogram_edges[i + 1]!r},{count}")
    return "\n".join(lines) + "\n"


def _summary_csv(rep: EfficiencyReport) -> str:
    lines = ["scope,mean_iou,samples", f"overall,{rep.overall_mean!r},{rep.sample_count}"]
    for label, mean in rep.cohort_means.items():
        lines.append(f"cohort:{label},{mean!r},")
    return "\n".join(lines) + "\n"


@main.command()
@click.option("--plan", "plan_paths", required=True, type=click.Path(), multiple=True,
              help="Plan JSON file(s) offered to clients; repeatable.")
@click.option("--port", default=8765, show_default=True)
@click.option("--host", default="127.0.0.1", show_default=True)
@click.option("--ui", "ui_dir", type=click.Path(), default=None,
              help="Static directory to serve at / (the workbench frontend).")
def serve(plan_paths: Sequence[str], port: int, host: str, ui_dir: str | None) -> None:
    """Serve live engine sessions over HTTP."""

    def body() -> None:
        import uvicorn

        from .service import create_app

        plans = [_load_valid_plan(p) for p in plan_paths]
        app = create_app(plans, ui_dir=ui_dir)
        click.echo(f"serving {len(plans)} plan(s) on http://{host}:{port}")
        uvicorn.run(app, host=host, port=port, log_level="warning")

    _guarded(body)


if __name__ == "__main__":
    main()
