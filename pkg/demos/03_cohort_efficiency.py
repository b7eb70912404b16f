"""The efficiency experiment end to end: cohorts, temporal IoU, aggregation.

Thirty fast and thirty slow simulated assemblies run under the same constant
detection lag; the per-stage IoU between predicted and true stage timelines
is aggregated the same way the stand experiments report it.

Run:  python demos/03_cohort_efficiency.py
"""

import numpy as np

from stagewatch import (
    ConstantLag,
    EngineConfig,
    FAST_PACE,
    NoiseModel,
    SLOW_PACE,
    aggregate,
    reference_plan,
    simulate_cohorts,
    timeline_iou,
)

plan = reference_plan()
config = EngineConfig()  # 10 fps, overlap 0.7, connection threshold 0.6

# ---------------------------------------------------------------------------
# 60 runs: 30 fast (mean stage 4.333 s) + 30 slow (mean stage 10.75 s),
# identical constant 500 ms detection lag, no detector noise.
# ---------------------------------------------------------------------------
truths, preds = simulate_cohorts(plan, config, [FAST_PACE, SLOW_PACE],
                                 runs_per_cohort=30, lag=ConstantLag(500),
                                 noise=NoiseModel(), base_seed=7)
truth_by_run = {t.run_id: t for t in truths}
vectors = [timeline_iou(p, truth_by_run[p.run_id]) for p in preds]
report = aggregate(vectors, cohorts={t.run_id: t.cohort for t in truths})

print(f"runs: {len(preds)}   samples: {report.sample_count}")
print(f"\noverall mean IoU: {report.overall_mean:.3f}")
for label, mean in report.cohort_means.items():
    print(f"  {label:5s} cohort mean: {mean:.3f}")
print("\n(slower work -> longer stages -> the same lag costs less overlap,")
print(" which is exactly the closed form below)")

# ---------------------------------------------------------------------------
# Per-stage means and deviations: no stage is systematically worse, because
# the lag does not care which stage it delays.
# ---------------------------------------------------------------------------
print("\nstage   mean IoU   std")
for i, (mean, std) in enumerate(zip(report.per_stage_mean, report.per_stage_std)):
    bar = "#" * int(round(mean * 40))
    print(f"{i:5d}   {mean:.3f}      {std:.3f}   {bar}")

# ---------------------------------------------------------------------------
# IoU distribution: mass concentrated near 1.
# ---------------------------------------------------------------------------
print("\nIoU histogram over all (run, stage) samples:")
for lo, hi, count in zip(report.histogram_edges, report.histogram_edges[1:],
                         report.histogram_counts):
    if count:
        print(f"  [{lo:.2f},{hi:.2f})  {'#' * max(1, count // 8)} {count}")

# ---------------------------------------------------------------------------
# The closed-form lag law: a constant lag L on a stage of duration D yields
# IoU = (D-L)/(D+L). Longer stages forgive the same lag more readily.
# ---------------------------------------------------------------------------
lag_ms = 500
print("\nclosed form (D-L)/(D+L) at L=500ms vs simulated cohort means:")
for pace, label in [(FAST_PACE, "fast"), (SLOW_PACE, "slow")]:
    d = pace.mean_stage_duration_ms
    predicted = (d - lag_ms) / (d + lag_ms)
    print(f"  {label}: closed form {predicted:.3f}   simulated {report.cohort_means[label]:.3f}")
