import dataclasses
import math

import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from ovgrasp.evaluation import (DegenerateBox, EmptyGroundTruth, EmptyTrials,
                                EvalError, GroundTruth, IncompleteTrace,
                                PublishedGas, TrialRow, average_precision,
                                evaluate_splits, format_ap_table,
                                format_consistency_table, format_gas_table,
                                gas_report, iou, load_ground_truth,
                                load_published_gas, read_trials_csv,
                                save_ground_truth, scenario_metrics,
                                verify_published_gas)
from ovgrasp.ovdetect import Detection, build_vocabulary


def ap_oracle(tp_flags: list[bool], n_gt: int) -> float:
    """All-points AP by interpolated precision at each recall step.

    For every true positive at rank k the recall rises by 1/n_gt and
    contributes (1/n_gt) * max over ranks j >= k of precision(j). This
    is a different formulation from envelope integration, so agreement
    is meaningful.
    """
    precisions = []
    tp_cum = 0
    for k, flag in enumerate(tp_flags, start=1):
        tp_cum += int(flag)
        precisions.append(tp_cum / k)
    ap = 0.0
    for k, flag in enumerate(tp_flags):
        if flag:
            ap += max(precisions[k:]) / n_gt
    return ap


def _gt(frame, label, box, split="seen"):
    return GroundTruth(frame_id=frame, label=label, box=box, split=split)


def _det(frame, label, score, box):
    return Detection(frame_id=frame, label=label, score=score, box=box)


# disjoint unit cells on a grid, so matching is unambiguous by construction
def _cell(i):
    x = float(i * 20)
    return (x, 0.0, x + 10.0, 10.0)


FAR_AWAY = (9000.0, 9000.0, 9010.0, 9010.0)


class TestIou:
    def test_worked_example(self):
        assert iou((0, 0, 2, 2), (1, 1, 3, 3)) == pytest.approx(1.0 / 7.0)

    def test_identical_and_disjoint(self):
        assert iou((0, 0, 5, 5), (0, 0, 5, 5)) == 1.0
        assert iou((0, 0, 5, 5), (10, 10, 15, 15)) == 0.0

    @given(st.tuples(st.floats(0, 50), st.floats(0, 50),
                     st.floats(1, 50), st.floats(1, 50)),
           st.tuples(st.floats(0, 50), st.floats(0, 50),
                     st.floats(1, 50), st.floats(1, 50)))
    @settings(max_examples=200)
    def test_range_and_symmetry(self, a, b):
        box_a = (a[0], a[1], a[0] + a[2], a[1] + a[3])
        box_b = (b[0], b[1], b[0] + b[2], b[1] + b[3])
        v = iou(box_a, box_b)
        assert 0.0 <= v <= 1.0
        assert v == iou(box_b, box_a)

    def test_degenerate_rejected(self):
        with pytest.raises(DegenerateBox):
            iou((0, 0, 0, 5), (0, 0, 5, 5))
        with pytest.raises(DegenerateBox):
            iou((0, 0, 5, 5), (3, 3, 3, 3))


class TestAveragePrecision:
    def test_worked_example_tp_fp_tp(self):
        gts = [_gt(0, "a", _cell(0)), _gt(0, "a", _cell(1))]
        dets = [_det(0, "a", 0.9, _cell(0)),
                _det(0, "a", 0.8, FAR_AWAY),
                _det(0, "a", 0.7, _cell(1))]
        assert average_precision(dets, gts) == pytest.approx(5.0 / 6.0, abs=1e-12)
        assert ap_oracle([True, False, True], 2) == pytest.approx(5.0 / 6.0)

    def test_perfect_detector(self):
        gts = [_gt(0, "a", _cell(i)) for i in range(5)]
        dets = [_det(0, "a", 0.9 - 0.1 * i, _cell(i)) for i in range(5)]
        assert average_precision(dets, gts) == 1.0

    def test_no_detections(self):
        assert average_precision([], [_gt(0, "a", _cell(0))]) == 0.0

    def test_all_false_positives(self):
        dets = [_det(0, "a", 0.9, FAR_AWAY)]
        assert average_precision(dets, [_gt(0, "a", _cell(0))]) == 0.0

    def test_empty_ground_truth_rejected(self):
        with pytest.raises(EmptyGroundTruth):
            average_precision([_det(0, "a", 0.9, _cell(0))], [])

    def test_duplicate_detection_is_fp(self):
        gts = [_gt(0, "a", _cell(0))]
        dets = [_det(0, "a", 0.9, _cell(0)), _det(0, "a", 0.8, _cell(0))]
        assert average_precision(dets, gts) == 1.0

    def test_rank_order_matters(self):
        # FP outscores the only TP: precision at full recall is 1/2
        gts = [_gt(0, "a", _cell(0))]
        dets = [_det(0, "a", 0.9, FAR_AWAY), _det(0, "a", 0.5, _cell(0))]
        assert average_precision(dets, gts) == 0.5

    def test_matching_is_per_frame(self):
        gts = [_gt(0, "a", _cell(0)), _gt(1, "a", _cell(0))]
        dets = [_det(0, "a", 0.9, _cell(0)), _det(2, "a", 0.8, _cell(0))]
        # frame 2 has no ground truth: that detection is a FP
        assert average_precision(dets, gts) == pytest.approx(0.5)

    def test_claims_best_iou_ground_truth(self):
        tight = (0.0, 0.0, 10.0, 10.0)
        loose = (0.0, 0.0, 14.0, 10.0)
        gts = [_gt(0, "a", loose), _gt(0, "a", tight)]
        dets = [_det(0, "a", 0.9, tight), _det(0, "a", 0.8, loose)]
        assert average_precision(dets, gts) == 1.0

    @given(st.lists(st.booleans(), min_size=1, max_size=12),
           st.integers(0, 5))
    @settings(max_examples=150)
    def test_matches_oracle_on_synthetic_streams(self, flags, extra_gt):
        n_gt = sum(flags) + extra_gt
        if n_gt == 0:
            return
        gts, dets = [], []
        cell_i = 0
        for rank, flag in enumerate(flags):
            score = 1.0 - rank * 1e-3
            if flag:
                gts.append(_gt(0, "a", _cell(cell_i)))
                dets.append(_det(0, "a", score, _cell(cell_i)))
                cell_i += 1
            else:
                dets.append(_det(0, "a", score, FAR_AWAY))
        for _ in range(extra_gt):  # never-recalled ground truth
            gts.append(_gt(0, "a", _cell(cell_i)))
            cell_i += 1
        assert average_precision(dets, gts) == pytest.approx(
            ap_oracle(flags, n_gt), abs=1e-12)

    @given(st.lists(st.booleans(), min_size=1, max_size=10))
    @settings(max_examples=100)
    def test_appending_fp_never_raises_ap(self, flags):
        n_gt = max(sum(flags), 1)
        assert ap_oracle(flags + [False], n_gt) <= ap_oracle(flags, n_gt) + 1e-12


class TestEvaluateSplits:
    def _tiny_dataset(self):
        gts = [_gt(0, "apple", _cell(0), "seen"),
               _gt(0, "cup", _cell(1), "unseen")]
        dets = [_det(0, "apple", 0.9, _cell(0))]
        return dets, gts

    def test_macro_averages_by_split(self):
        dets, gts = self._tiny_dataset()
        report = evaluate_splits(dets, gts)
        assert report.ap_seen == 1.0
        assert report.ap_unseen == 0.0
        assert report.map == 0.5
        assert report.per_category == {"apple": 1.0, "cup": 0.0}

    def test_pooled_ap_differs_from_macro(self):
        # high-scoring FP in one category drags the pooled ranking down
        # but leaves the other category's AP untouched
        gts = [_gt(0, "apple", _cell(0), "seen"),
               _gt(0, "cup", _cell(1), "seen")]
        dets = [_det(0, "cup", 0.95, FAR_AWAY),
                _det(0, "apple", 0.9, _cell(0))]
        report = evaluate_splits(dets, gts)
        assert report.map == 0.5
        assert report.ap_all == pytest.approx(0.25)

    def test_pooled_matching_is_label_aware(self):
        gts = [_gt(0, "apple", _cell(0), "seen")]
        dets = [_det(0, "cup", 0.9, _cell(0))]
        report = evaluate_splits(dets, gts)
        assert report.ap_all == 0.0

    def test_missing_split_reported_as_none(self):
        gts = [_gt(0, "apple", _cell(0), "seen")]
        report = evaluate_splits([_det(0, "apple", 0.9, _cell(0))], gts)
        assert report.ap_unseen is None
        assert report.ap_seen == 1.0
        assert "-" in format_ap_table(report)

    def test_vocabulary_overrides_split_tag(self):
        vocab = build_vocabulary([("apple", "unseen")], seed=1)
        gts = [_gt(0, "apple", _cell(0), "seen")]
        report = evaluate_splits([_det(0, "apple", 0.9, _cell(0))], gts, vocab)
        assert report.ap_seen is None
        assert report.ap_unseen == 1.0

    def test_conflicting_split_tags_rejected(self):
        gts = [_gt(0, "apple", _cell(0), "seen"),
               _gt(1, "apple", _cell(0), "unseen")]
        with pytest.raises(EvalError):
            evaluate_splits([], gts)

    def test_ground_truth_file_roundtrip(self, tmp_path):
        gts = [_gt(0, "apple", _cell(0), "seen"),
               _gt(1, "cup", _cell(1), "unseen")]
        path = tmp_path / "gt.json"
        save_ground_truth(gts, path)
        assert load_ground_truth(path) == gts

    def test_malformed_ground_truth(self, tmp_path):
        path = tmp_path / "bad.json"
        path.write_text('{"frames": [{"frame": "x"}]}')
        with pytest.raises(EvalError):
            load_ground_truth(path)


class TestGasReport:
    def test_worked_example(self):
        rows = [TrialRow("a", "pinch", 1.0, 1.0),
                TrialRow("a", "pinch", 0.0, 0.0),
                TrialRow("b", "spherical", 1.0, 1.0),
                TrialRow("b", "spherical", 1.0, 0.0),
                TrialRow("b", "spherical", 0.0, 1.0),
                TrialRow("c", "cylindrical", 1.0, 0.5)]
        report = gas_report(rows)
        assert report.per_type["pinch"].gas == pytest.approx(50.0)
        assert report.per_type["spherical"].gas == pytest.approx(200.0 / 3.0)
        assert report.per_type["cylindrical"].gas == pytest.approx(75.0)
        assert report.overall == pytest.approx((50.0 + 200.0 / 3.0 + 75.0) / 3.0)

    def test_missing_type_excluded_from_mean(self):
        rows = [TrialRow("a", "pinch", 1.0, 1.0)]
        report = gas_report(rows)
        assert set(report.per_type) == {"pinch"}
        assert report.overall == 100.0

    def test_empty_rejected(self):
        with pytest.raises(EmptyTrials):
            gas_report([])

    def test_csv_roundtrip_and_errors(self, tmp_path):
        good = tmp_path / "good.csv"
        good.write_text("object,grasp_type,grasping,maintaining\n"
                        "apple,spherical,1,0.5\n")
        rows = read_trials_csv(good)
        assert rows == [TrialRow("apple", "spherical", 1.0, 0.5)]

        bad_score = tmp_path / "score.csv"
        bad_score.write_text("object,grasp_type,grasping,maintaining\n"
                             "apple,spherical,0.7,1\n")
        with pytest.raises(EvalError, match="row 2"):
            read_trials_csv(bad_score)

        bad_type = tmp_path / "type.csv"
        bad_type.write_text("object,grasp_type,grasping,maintaining\n"
                            "apple,tripod,1,1\n")
        with pytest.raises(EvalError, match="tripod"):
            read_trials_csv(bad_type)

        bad_header = tmp_path / "header.csv"
        bad_header.write_text("object,grasping,maintaining\napple,1,1\n")
        with pytest.raises(EvalError, match="header"):
            read_trials_csv(bad_header)

        bad_value = tmp_path / "value.csv"
        bad_value.write_text("object,grasp_type,grasping,maintaining\n"
                             "apple,spherical,one,1\n")
        with pytest.raises(EvalError, match="row 2"):
            read_trials_csv(bad_value)

    def test_fixture_trials_match_reference_scores(self, fixtures_dir):
        report = gas_report(read_trials_csv(fixtures_dir / "table1_trials.csv"))
        assert report.per_type["pinch"].grasping_pct == pytest.approx(92.00, abs=0.005)
        assert report.per_type["pinch"].maintaining_pct == pytest.approx(83.33, abs=0.005)
        assert report.per_type["spherical"].gas == pytest.approx(89.67, abs=0.005)
        assert report.per_type["cylindrical"].gas == pytest.approx(83.67, abs=0.005)
        assert report.overall == pytest.approx(87.00, abs=0.005)

    def test_format_gas_table_smoke(self):
        text = format_gas_table(gas_report([TrialRow("a", "pinch", 1.0, 0.5)]))
        assert "pinch" in text and "overall" in text


class TestPublishedGas:
    def test_tolerance_boundary(self):
        ok = PublishedGas("m", "pinch", 50.0, 50.0, 50.015)
        off = PublishedGas("m", "pinch", 50.0, 50.0, 50.03)
        checks = verify_published_gas([ok, off], tol=0.02)
        assert checks[0]["consistent"] is True
        assert checks[1]["consistent"] is False

    def test_fixture_has_exactly_four_inconsistent_rows(self, fixtures_dir):
        rows = load_published_gas(fixtures_dir / "published_gas.json")
        assert len(rows) == 12
        checks = verify_published_gas(rows)
        flagged = {(c["method"], c["grasp_type"]) for c in checks
                   if not c["consistent"]}
        assert flagged == {("push_button", "cylindrical"),
                           ("force_sensing", "cylindrical"),
                           ("prior_glove", "spherical"),
                           ("prior_glove", "cylindrical")}

    def test_proposed_rows_all_consistent(self, fixtures_dir):
        rows = load_published_gas(fixtures_dir / "published_gas.json")
        for check in verify_published_gas(rows):
            if check["method"] == "proposed":
                assert check["consistent"], check

    def test_format_consistency_table_flags(self, fixtures_dir):
        rows = load_published_gas(fixtures_dir / "published_gas.json")
        text = format_consistency_table(verify_published_gas(rows))
        assert text.count("INCONSISTENT") == 4

    def test_malformed_file(self, tmp_path):
        path = tmp_path / "pub.json"
        path.write_text('{"rows": [{"method": "m"}]}')
        with pytest.raises(EvalError):
            load_published_gas(path)


@dataclasses.dataclass
class _Frame:
    index: int
    t: float
    command: str | None
    target_label: str | None
    gt_nearest_label: str | None
    gt_delta: float | None


@dataclasses.dataclass
class _Sample:
    t: float
    closure: float


@dataclasses.dataclass
class _Trace:
    frames: list
    telemetry: list
    outcome: dict | None
    activation_radius: float = 150.0
    open_threshold: float = 0.02


class TestScenarioMetrics:
    def test_counts_and_latency(self):
        frames = [
            _Frame(0, 0.0, None, None, "apple", 400.0),
            _Frame(1, 0.1, None, "apple", "apple", 120.0),
            _Frame(2, 0.2, None, "apple", "apple", 90.0),
            _Frame(3, 0.3, "G", "apple", "apple", 80.0),
            _Frame(4, 0.4, None, "apple", "apple", 80.0),
            _Frame(5, 0.5, "R", None, "apple", 80.0),
        ]
        telemetry = [_Sample(0.45, 0.96), _Sample(0.55, 0.50),
                     _Sample(0.80, 0.01)]
        metrics = scenario_metrics(_Trace(frames, telemetry, {"frames": 6}))
        assert metrics["frames_to_grip"] == 3
        assert metrics["grip_count"] == 1
        assert metrics["wrong_target_grips"] == 0
        assert metrics["release_latency_s"] == pytest.approx(0.30)
        assert metrics["commands"] == {"G": 1, "R": 1, "S": 0}

    def test_wrong_target_grip_counted(self):
        frames = [_Frame(0, 0.0, "G", "cup", "apple", 100.0)]
        metrics = scenario_metrics(_Trace(frames, [], {"frames": 1}))
        assert metrics["wrong_target_grips"] == 1

    def test_no_grip_yields_none(self):
        frames = [_Frame(0, 0.0, None, None, "apple", 500.0)]
        metrics = scenario_metrics(_Trace(frames, [], {"frames": 1}))
        assert metrics["frames_to_grip"] is None
        assert metrics["release_latency_s"] is None

    def test_incomplete_trace_rejected(self):
        with pytest.raises(IncompleteTrace):
            scenario_metrics(_Trace([], [], {"frames": 0}))
        with pytest.raises(IncompleteTrace):
            scenario_metrics(_Trace([_Frame(0, 0.0, None, None, None, None)],
                                    [], None))
