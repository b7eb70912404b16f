"""Temporal IoU, timeline construction, aggregation, and file formats."""

import numpy as np
import pytest

from stagewatch import (
    FormatError,
    InputError,
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
from stagewatch.evaluate import format_seconds, parse_seconds, report_from_dict, report_to_dict


class TestIntervalIoU:
    def test_identity(self):
        assert interval_iou(StageInterval(0, 10_000), StageInterval(0, 10_000)) == 1.0

    def test_disjoint(self):
        assert interval_iou(StageInterval(0, 1000), StageInterval(5000, 6000)) == 0.0

    def test_partial_overlap_matches_mask_oracle(self):
        a = StageInterval(0, 10_000)
        b = StageInterval(2000, 12_000)
        value = interval_iou(a, b)
        assert value == pytest.approx(8000 / 12_000)
        assert value == pytest.approx(discretized_iou_oracle(a, b, 1), abs=1e-12)

    def test_both_empty_is_one(self):
        assert interval_iou(StageInterval(5, 5), StageInterval(9, 9)) == 1.0

    def test_one_empty_is_zero(self):
        assert interval_iou(StageInterval(5, 5), StageInterval(0, 10)) == 0.0
        assert interval_iou(StageInterval(0, 10), StageInterval(5, 5)) == 0.0

    def test_symmetric_bounded_on_random_pairs(self):
        rng = np.random.default_rng(11)
        for _ in range(500):
            a = _random_interval(rng)
            b = _random_interval(rng)
            v = interval_iou(a, b)
            assert v == interval_iou(b, a)
            assert 0.0 <= v <= 1.0

    def test_equals_one_iff_equal_nonempty(self):
        a = StageInterval(10, 20)
        assert interval_iou(a, StageInterval(10, 20)) == 1.0
        assert interval_iou(a, StageInterval(10, 21)) < 1.0
        assert interval_iou(a, StageInterval(11, 20)) < 1.0

    def test_rejects_backwards_interval(self):
        with pytest.raises(InputError):
            StageInterval(10, 5)


def _random_interval(rng) -> StageInterval:
    start = int(rng.integers(0, 20_000))
    length = int(rng.integers(0, 10_000))
    return StageInterval(start, start + length)


class TestDiscretizedOracle:
    def test_identical(self):
        assert discretized_iou_oracle(StageInterval(3, 700), StageInterval(3, 700), 1) == 1.0

    def test_disjoint(self):
        assert discretized_iou_oracle(StageInterval(0, 10), StageInterval(50, 60), 1) == 0.0

    def test_coarse_resolution_still_close(self):
        a = StageInterval(0, 10_000)
        b = StageInterval(2000, 12_000)
        assert discretized_iou_oracle(a, b, 50) == pytest.approx(8000 / 12_000, abs=0.02)

    def test_rejects_bad_resolution(self):
        with pytest.raises(InputError):
            discretized_iou_oracle(StageInterval(0, 1), StageInterval(0, 1), 0)


class TestTimelineFromStarts:
    def test_basic_construction(self):
        tl = timeline_from_starts([0, 10_000, 20_000], 30_000)
        assert [iv.start_ms for iv in tl.intervals] == [0, 10_000, 20_000]
        assert [iv.end_ms for iv in tl.intervals] == [10_000, 20_000, 30_000]

    def test_single_stage(self):
        tl = timeline_from_starts([0], 5000)
        assert tl.intervals == (StageInterval(0, 5000),)

    def test_rejects_non_increasing_starts(self):
        with pytest.raises(InputError):
            timeline_from_starts([0, 0], 10)
        with pytest.raises(InputError):
            timeline_from_starts([5, 3], 10)

    def test_rejects_completion_before_last_start(self):
        with pytest.raises(InputError):
            timeline_from_starts([0, 10], 10)

    def test_timeline_contiguity_enforced(self):
        with pytest.raises(InputError):
            Timeline("r", "", (StageInterval(0, 10), StageInterval(11, 20)))


class TestTimelineIoU:
    def test_identity_yields_all_ones(self):
        tl = timeline_from_starts([0, 10_000, 20_000], 30_000, run_id="r1")
        assert timeline_iou(tl, tl).values == (1.0, 1.0, 1.0)

    def test_constant_shift_law(self):
        # 10 s stages shifted 1 s late: interior stages are (D-L)/(D+L) = 9/11.
        starts = [i * 10_000 for i in range(5)]
        truth = timeline_from_starts(starts, 50_000, run_id="r1")
        pred = timeline_from_starts([0] + [s + 1000 for s in starts[1:]], 51_000, run_id="r1")
        values = timeline_iou(pred, truth).values
        for v in values[1:]:
            assert v == pytest.approx(9 / 11)
        for p, t in zip(pred.intervals[1:], truth.intervals[1:]):
            assert interval_iou(p, t) == pytest.approx(
                discretized_iou_oracle(p, t, 1), abs=1e-12)

    def test_stage_count_mismatch(self):
        a = timeline_from_starts([0, 10], 20, run_id="r1")
        b = timeline_from_starts([0], 20, run_id="r1")
        with pytest.raises(InputError, match="stage-count"):
            timeline_iou(a, b)

    def test_run_id_mismatch(self):
        a = timeline_from_starts([0], 20, run_id="r1")
        b = timeline_from_starts([0], 20, run_id="r2")
        with pytest.raises(InputError, match="run mismatch"):
            timeline_iou(a, b)


class TestAggregate:
    def test_single_perfect_vector(self):
        report = aggregate([IoUVector("r1", (1.0, 1.0, 1.0))])
        assert report.overall_mean == 1.0
        assert report.per_stage_std == (0.0, 0.0, 0.0)
        assert report.sample_count == 3

    def test_hand_computed_statistics(self):
        vectors = [IoUVector("a", (0.8, 0.8)), IoUVector("b", (0.6, 0.6))]
        report = aggregate(vectors)
        assert report.per_stage_mean == (pytest.approx(0.7), pytest.approx(0.7))
        # Population standard deviation, not sample.
        assert report.per_stage_std == (pytest.approx(0.1), pytest.approx(0.1))
        assert report.overall_mean == pytest.approx(0.7)

    def test_cohort_means(self):
        vectors = [IoUVector("f1", (0.8,)), IoUVector("f2", (0.6,)), IoUVector("s1", (1.0,))]
        report = aggregate(vectors, cohorts={"f1": "fast", "f2": "fast", "s1": "slow"})
        assert report.cohort_means == {"fast": pytest.approx(0.7), "slow": pytest.approx(1.0)}

    def test_missing_cohort_label_rejected(self):
        with pytest.raises(InputError, match="cohort"):
            aggregate([IoUVector("x", (0.5,))], cohorts={})

    def test_histogram_conserves_samples(self):
        rng = np.random.default_rng(3)
        vectors = [IoUVector(f"r{i}", tuple(rng.random(4))) for i in range(25)]
        report = aggregate(vectors, hist_bins=13)
        assert sum(report.histogram_counts) == 100
        assert len(report.histogram_edges) == 14
        assert report.histogram_edges[0] == 0.0
        assert report.histogram_edges[-1] == 1.0

    def test_order_invariance(self):
        rng = np.random.default_rng(4)
        vectors = [IoUVector(f"r{i}", tuple(rng.random(3))) for i in range(10)]
        a = aggregate(vectors)
        b = aggregate(list(reversed(vectors)))
        assert a.per_stage_mean == pytest.approx(b.per_stage_mean)
        assert a.overall_mean == pytest.approx(b.overall_mean)
        assert a.histogram_counts == b.histogram_counts

    def test_empty_input_rejected(self):
        with pytest.raises(InputError):
            aggregate([])

    def test_ragged_input_rejected(self):
        with pytest.raises(InputError):
            aggregate([IoUVector("a", (1.0,)), IoUVector("b", (1.0, 1.0))])


class TestSecondsCodec:
    @pytest.mark.parametrize("ms,text", [(0, "0.000"), (1, "0.001"), (1000, "1.000"),
                                         (1234, "1.234"), (52_000, "52.000")])
    def test_exact_round_trip(self, ms, text):
        assert format_seconds(ms) == text
        assert parse_seconds(text) == ms

    def test_parse_plain_integers(self):
        assert parse_seconds("52") == 52_000

    def test_sub_millisecond_rejected(self):
        with pytest.raises(FormatError):
            parse_seconds("1.2345")

    def test_garbage_rejected(self):
        with pytest.raises(FormatError):
            parse_seconds("soon")


class TestTimelineCsv:
    def test_round_trip(self, tmp_path):
        timelines = [
            timeline_from_starts([0, 4000, 9000], 13_000, run_id="fast-000", cohort="fast"),
            timeline_from_starts([0, 11_000, 21_500], 33_000, run_id="slow-000", cohort="slow"),
        ]
        path = tmp_path / "truth.csv"
        write_timeline_csv(timelines, path)
        assert read_timeline_csv(path) == timelines
        # Byte-stable: re-emitting the parsed values reproduces the file.
        second = tmp_path / "again.csv"
        write_timeline_csv(read_timeline_csv(path), second)
        assert second.read_bytes() == path.read_bytes()

    def test_final_row_is_completion(self, tmp_path):
        tl = timeline_from_starts([0, 5000], 9000, run_id="r", cohort="c")
        path = tmp_path / "t.csv"
        write_timeline_csv([tl], path)
        rows = path.read_text().strip().splitlines()
        assert rows[0] == "run_id,cohort,stage_index,start_s"
        assert rows[-1] == "r,c,2,9.000"
        assert len(rows) == 1 + 3

    def test_incomplete_run_rejected(self, tmp_path):
        path = tmp_path / "partial.csv"
        path.write_text("run_id,cohort,stage_index,start_s\nr,c,0,0.000\n")
        with pytest.raises(FormatError, match="incomplete"):
            read_timeline_csv(path)

    def test_bad_header_rejected(self, tmp_path):
        path = tmp_path / "bad.csv"
        path.write_text("nope\n")
        with pytest.raises(FormatError, match="header"):
            read_timeline_csv(path)

    def test_out_of_order_stage_index_rejected(self, tmp_path):
        path = tmp_path / "bad.csv"
        path.write_text("run_id,cohort,stage_index,start_s\nr,c,1,0.000\n")
        with pytest.raises(FormatError, match="out of order"):
            read_timeline_csv(path)


class TestReportJson:
    def test_round_trip(self, tmp_path):
        vectors = [IoUVector("a", (0.9, 0.7)), IoUVector("b", (0.8, 0.6))]
        report = aggregate(vectors, cohorts={"a": "fast", "b": "slow"}, hist_bins=10)
        path = tmp_path / "report.json"
        write_report_json(report, path)
        assert read_report_json(path) == report
        assert report_from_dict(report_to_dict(report)) == report

    def test_malformed_rejected(self, tmp_path):
        path = tmp_path / "report.json"
        path.write_text("{\"overall\": 1.0}")
        with pytest.raises(FormatError):
            read_report_json(path)
