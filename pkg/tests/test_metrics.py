import math

import numpy as np
import pytest

from fusemot.geometry import Box3D, iou3d
from fusemot.metrics import (EvalConfig, EvaluationError, GtAnnotation,
                             PredRecord, amota, clear_mot, evaluate,
                             format_recall_table, format_report, hota,
                             match_frame, smota, HOTA_ALPHAS)
from oracles import (brute_clear_mot, brute_hota, brute_match_frame,
                     random_mot_sequence)


def _box(x, y=0.0, rng=None):
    return Box3D(x, y, 0.0, 1.0, 2.0, 1.0, 0.0)


def _gt(frame, gt_id, x, y=0.0, category=0):
    return GtAnnotation(frame=frame, gt_id=gt_id, category=category, box=_box(x, y))


def _pred(frame, pred_id, x, y=0.0, score=1.0, category=0):
    return PredRecord(frame=frame, pred_id=pred_id, category=category,
                      box=_box(x, y), score=score)


# ---------------------------------------------------------------------------
# match_frame


def test_match_frame_identical():
    matches, un_g, un_p = match_frame([_gt(0, 1, 0.0)], [_pred(0, 1, 0.0)], 0.25)
    assert len(matches) == 1
    assert matches[0][2] == pytest.approx(1.0)
    assert not un_g and not un_p


def test_match_frame_missing_pred():
    matches, un_g, un_p = match_frame([_gt(0, 1, 0.0)], [], 0.25)
    assert matches == [] and un_g == [0] and un_p == []


def test_match_frame_crossed_pairs_brute_force():
    # two gts, two preds with asymmetric overlaps; enumeration confirms
    gts = [_gt(0, 1, 0.0), _gt(0, 2, 2.0)]
    preds = [_pred(0, 10, 0.3), _pred(0, 11, 1.8)]
    matches, _, _ = match_frame(gts, preds, 0.05)
    got = sorted((i, j) for i, j, _ in matches)
    expected = brute_match_frame([g.box for g in gts], [p.box for p in preds],
                                 0.05, iou3d)
    assert got == expected


# ---------------------------------------------------------------------------
# CLEAR


def _single_object_sequence():
    """One object over frames 0..9; id A frames 0-2, gap 3-4, id B 5-9,
    one far FP at frame 7: GT=10, TP=8, FN=2, FP=1, IDS=1."""
    gts = [_gt(f, 1, float(f)) for f in range(10)]
    preds = [_pred(f, 100, float(f)) for f in range(3)]
    preds += [_pred(f, 200, float(f)) for f in range(5, 10)]
    preds.append(_pred(7, 300, 50.0))
    return gts, preds


def test_clear_perfect():
    gts = [_gt(f, 1, float(f)) for f in range(10)]
    preds = [_pred(f, 7, float(f)) for f in range(10)]
    res = clear_mot(gts, preds, 0.25)
    assert res.mota == pytest.approx(1.0)
    assert res.ids == 0
    assert res.motp == pytest.approx(1.0)
    assert res.mt == pytest.approx(1.0)


def test_clear_hand_traced_eq20():
    gts, preds = _single_object_sequence()
    res = clear_mot(gts, preds, 0.25)
    assert (res.fp, res.fn, res.ids) == (1, 2, 1)
    assert res.gt == 10
    assert res.mota == pytest.approx(0.6)


def test_clear_id_switch_still_mostly_tracked():
    gts = [_gt(f, 1, float(f)) for f in range(10)]
    preds = [_pred(f, 100, float(f)) for f in range(5)]
    preds += [_pred(f, 200, float(f)) for f in range(5, 10)]
    res = clear_mot(gts, preds, 0.25)
    assert res.ids == 1
    assert res.mt == pytest.approx(1.0)  # 100% coverage despite the switch
    assert res.ml == pytest.approx(0.0)


def test_clear_no_ground_truth_errors():
    with pytest.raises(EvaluationError):
        clear_mot([], [_pred(0, 1, 0.0)], 0.25)


def test_clear_sticky_keeps_existing_correspondence():
    # a second pred overlaps slightly better at frame 1, but the existing
    # correspondence stays while above threshold: no switch
    gts = [_gt(0, 1, 0.0), _gt(1, 1, 0.0)]
    preds = [_pred(0, 100, 0.1),
             _pred(1, 100, 0.1), _pred(1, 200, 0.05)]
    res = clear_mot(gts, preds, 0.25)
    assert res.ids == 0
    assert res.fp == 1


# ---------------------------------------------------------------------------
# HOTA


def test_hota_perfect():
    gts = [_gt(f, 1, float(f)) for f in range(8)]
    preds = [_pred(f, 9, float(f)) for f in range(8)]
    assert hota(gts, preds) == pytest.approx(1.0)


def test_hota_id_swap_halfway():
    gts = [_gt(f, 1, float(f)) for f in range(10)]
    preds = [_pred(f, 100, float(f)) for f in range(5)]
    preds += [_pred(f, 200, float(f)) for f in range(5, 10)]
    # detection perfect, association halved: A(c) = 0.5 at every alpha
    assert hota(gts, preds) == pytest.approx(math.sqrt(0.5))
    assert brute_hota(gts, preds, iou3d, HOTA_ALPHAS) == pytest.approx(math.sqrt(0.5))


def test_hota_all_false_positive():
    gts = [_gt(0, 1, 0.0)]
    preds = [_pred(0, 9, 50.0)]
    assert hota(gts, preds) == pytest.approx(0.0)


def test_hota_empty_conventions():
    assert hota([], []) == 1.0
    assert hota([], [_pred(0, 1, 0.0)]) == 0.0
    assert hota([_gt(0, 1, 0.0)], []) == 0.0


def test_hota_invariant_under_id_relabeling():
    rng = np.random.default_rng(21)
    gts, preds = _random_sequence(rng)
    base = hota(gts, preds)
    mapping = {pid: 1000 + k for k, pid in
               enumerate(sorted({p.pred_id for p in preds}))}
    relabeled = [PredRecord(p.frame, mapping[p.pred_id], p.category, p.box, p.score)
                 for p in preds]
    assert hota(gts, relabeled) == pytest.approx(base, abs=1e-12)


# ---------------------------------------------------------------------------
# randomized corpus vs brute force


_random_sequence = random_mot_sequence


@pytest.mark.parametrize("seed", range(40))
def test_clear_and_hota_match_brute_force(seed):
    rng = np.random.default_rng(1000 + seed)
    gts, preds = _random_sequence(rng)
    res = clear_mot(gts, preds, 0.25)
    ref = brute_clear_mot(gts, preds, 0.25, iou3d)
    assert (res.tp, res.fp, res.fn, res.ids) == (ref["tp"], ref["fp"],
                                                 ref["fn"], ref["ids"])
    assert res.mota == pytest.approx(ref["mota"], abs=1e-9)
    assert res.motp == pytest.approx(ref["motp"], abs=1e-9)
    assert res.mt == pytest.approx(ref["mt"], abs=1e-9)
    assert res.ml == pytest.approx(ref["ml"], abs=1e-9)
    alphas = (0.1, 0.3, 0.5)
    assert hota(gts, preds, alphas=alphas) == pytest.approx(
        brute_hota(gts, preds, iou3d, alphas), abs=1e-9)


# ---------------------------------------------------------------------------
# recall-averaged family


def test_smota_eq23_arithmetic():
    assert smota(0.3, 0.5) == pytest.approx(0.6)
    assert smota(-0.4, 0.5) == 0.0
    assert smota(0.2, 0.0) == 0.0


def test_amota_perfect_tracker_unity_scores():
    gts = [_gt(f, 1, float(f)) for f in range(10)]
    preds = [_pred(f, 7, float(f), score=1.0) for f in range(10)]
    res = amota(gts, preds, 0.25)
    assert res.samota == pytest.approx(1.0)
    assert res.amota == pytest.approx(1.0)
    assert all(p.smota == pytest.approx(1.0) for p in res.points)


def test_amota_unreachable_levels_contribute_zero():
    gts = [_gt(f, 1, float(f)) for f in range(10)]
    # only 4 of 10 frames detected: max recall 0.4
    preds = [_pred(f, 7, float(f), score=0.9) for f in range(4)]
    res = amota(gts, preds, 0.25, recall_levels=10)
    reachable = [p for p in res.points if p.recall <= 0.4 + 1e-9]
    unreachable = [p for p in res.points if p.recall > 0.4 + 1e-9]
    assert all(p.smota == 0.0 and p.mota == 0.0 for p in unreachable)
    assert len(reachable) == 4


def test_smota_points_within_unit_interval():
    rng = np.random.default_rng(31)
    for _ in range(10):
        gts, preds = _random_sequence(rng)
        res = amota(gts, preds, 0.25, recall_levels=10)
        for p in res.points:
            assert 0.0 <= p.smota <= 1.0 + 1e-12


def test_pure_fp_never_improves_metrics():
    rng = np.random.default_rng(32)
    for _ in range(5):
        gts, preds = _random_sequence(rng)
        base_clear = clear_mot(gts, preds, 0.25)
        base_hota = hota(gts, preds, alphas=(0.25,))
        base_am = amota(gts, preds, 0.25, recall_levels=10)
        extra = preds + [PredRecord(frame=0, pred_id=777, category=0,
                                    box=Box3D(80.0, 80.0, 0, 1, 2, 1, 0),
                                    score=1.0)]
        assert clear_mot(gts, extra, 0.25).mota <= base_clear.mota + 1e-12
        assert hota(gts, extra, alphas=(0.25,)) <= base_hota + 1e-12
        assert amota(gts, extra, 0.25, recall_levels=10).samota <= base_am.samota + 1e-12


# ---------------------------------------------------------------------------
# evaluate + report formatting


def test_evaluate_and_report():
    gts = [_gt(f, 1, float(f)) for f in range(6)]
    gts += [_gt(f, 2, float(f), y=5.0, category=1) for f in range(6)]
    preds = [_pred(f, 10, float(f)) for f in range(6)]
    preds += [_pred(f, 20, float(f), y=5.0, category=1) for f in range(6)]
    report = evaluate(gts, preds, EvalConfig(recall_levels=10),
                      category_names={0: "car", 1: "pedestrian"})
    assert set(report.per_category) == {"car", "pedestrian"}
    assert report.per_category["car"].hota == pytest.approx(1.0)
    assert report.per_category["car"].mota == pytest.approx(1.0)
    text = format_report(report)
    assert "car.hota=1.000000" in text
    assert "pedestrian.mota=1.000000" in text
    table = format_recall_table(report)
    assert "car" in table and "recall" in table


def test_evaluate_pred_only_category():
    gts = [_gt(0, 1, 0.0)]
    preds = [_pred(0, 10, 0.0), _pred(0, 11, 5.0, category=1)]
    report = evaluate(gts, preds, EvalConfig(recall_levels=5),
                      category_names={0: "car", 1: "pedestrian"})
    assert math.isnan(report.per_category["pedestrian"].mota)
    assert report.per_category["pedestrian"].hota == 0.0


def test_center_distance_similarity():
    cfg = EvalConfig(similarity="center_distance", match_threshold=1e-9,
                     center_distance_max=2.0)
    sim = cfg.similarity_fn()
    assert sim(_box(0.0), _box(0.0)) == pytest.approx(1.0)
    assert sim(_box(0.0), _box(1.0)) == pytest.approx(0.5)
    assert sim(_box(0.0), _box(5.0)) == 0.0
