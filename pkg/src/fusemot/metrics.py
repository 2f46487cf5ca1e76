"""Tracking evaluation: CLEAR-MOT, HOTA and the recall-averaged family.

Inputs are flat ground-truth and prediction records; evaluation is per
category. Per-frame matching maximizes total similarity among pairs at or
above the matching threshold (3D IoU by default, a normalized
center-distance similarity as the alternative).

CLEAR counting keeps an existing ground-truth/prediction correspondence
alive while it stays above the threshold, counts an identity switch when
a ground truth's matched prediction id differs from its last known one,
and reports

    MOTA = 1 - (FP + FN + IDS) / GT
    MOTP = mean similarity over matches

HOTA follows the association-aware definition: per localization threshold
alpha, every true positive c contributes A(c) = |TPA| / (|TPA|+|FNA|+|FPA|)
over same-id association sets, and HOTA(alpha) = sqrt(sum A(c) / (TP+FN+FP));
the final score averages alpha over 0.05..0.95 in steps of 0.05.

The recall sweep realizes L target recalls by score thresholds on true
positives, evaluates CLEAR at each operating point, and averages MOTA_r,
max(0, MOTA_r / r) and MOTP_r into AMOTA, sAMOTA and AMOTP. Unreachable
recall levels contribute zero.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Callable, Optional, Sequence

import numpy as np
from scipy.optimize import linear_sum_assignment

from .geometry import Box3D, iou3d

HOTA_ALPHAS = tuple(round(0.05 * k, 2) for k in range(1, 20))

SimilarityFn = Callable[[Box3D, Box3D], float]


@dataclass(frozen=True)
class GtAnnotation:
    frame: int
    gt_id: int
    category: int
    box: Box3D


@dataclass(frozen=True)
class PredRecord:
    frame: int
    pred_id: int
    category: int
    box: Box3D
    score: float


@dataclass(frozen=True)
class EvalConfig:
    """Similarity choice, matching threshold and recall-sweep resolution."""

    similarity: str = "iou3d"  # iou3d | center_distance
    match_threshold: float = 0.25
    center_distance_max: float = 2.0
    recall_levels: int = 40

    def __post_init__(self):
        if self.similarity not in ("iou3d", "center_distance"):
            raise ValueError(f"unknown similarity {self.similarity!r}")
        if self.recall_levels < 1:
            raise ValueError("at least one recall level required")

    def similarity_fn(self) -> SimilarityFn:
        if self.similarity == "iou3d":
            return iou3d
        dmax = self.center_distance_max

        def center_sim(a: Box3D, b: Box3D) -> float:
            d = math.hypot(a.x - b.x, a.y - b.y)
            return max(0.0, 1.0 - d / dmax)

        return center_sim


@dataclass
class ClearResult:
    mota: float
    motp: float
    ids: int
    mt: float
    ml: float
    fp: int
    fn: int
    tp: int
    gt: int


@dataclass
class RecallPoint:
    recall: float
    achieved_recall: float
    mota: float
    smota: float
    motp: float


@dataclass
class AmotaResult:
    samota: float
    amota: float
    amotp: float
    points: list[RecallPoint]


@dataclass
class CategoryMetrics:
    hota: float
    mota: float
    motp: float
    samota: float
    amota: float
    amotp: float
    mt: float
    ml: float
    fp: int
    fn: int
    ids: int
    tp: int
    recall_points: list[RecallPoint] = field(default_factory=list)


@dataclass
class MetricsReport:
    per_category: dict[str, CategoryMetrics]


class EvaluationError(ValueError):
    pass


def _group_by_frame(records):
    frames: dict[int, list] = {}
    for rec in records:
        frames.setdefault(rec.frame, []).append(rec)
    return frames


def match_frame(gts: Sequence[GtAnnotation], preds: Sequence[PredRecord],
                threshold: float, similarity: SimilarityFn = iou3d):
    """Optimal bipartite matching for one frame and one category.

    Maximizes total similarity over pairs with similarity >= threshold.
    Returns (matches, unmatched_gt_indices, unmatched_pred_indices) where
    matches are (gt_index, pred_index, similarity) triples.
    """
    if not gts or not preds:
        return [], list(range(len(gts))), list(range(len(preds)))
    sim = np.zeros((len(gts), len(preds)))
    for i, gt in enumerate(gts):
        for j, pred in enumerate(preds):
            sim[i, j] = similarity(gt.box, pred.box)
    eligible = sim >= threshold
    gain = np.where(eligible, sim, 0.0)
    rows, cols = linear_sum_assignment(-gain)
    matches = []
    for i, j in zip(rows, cols):
        if eligible[i, j]:
            matches.append((int(i), int(j), float(sim[i, j])))
    matched_g = {i for i, _, _ in matches}
    matched_p = {j for _, j, _ in matches}
    return (matches,
            [i for i in range(len(gts)) if i not in matched_g],
            [j for j in range(len(preds)) if j not in matched_p])


def clear_mot(gts: Sequence[GtAnnotation], preds: Sequence[PredRecord],
              threshold: float, similarity: SimilarityFn = iou3d) -> ClearResult:
    """CLEAR metrics over a frame-indexed single-category sequence."""
    if not gts:
        raise EvaluationError("CLEAR metrics undefined without ground truth")
    gt_frames = _group_by_frame(gts)
    pred_frames = _group_by_frame(preds)
    all_frames = sorted(set(gt_frames) | set(pred_frames))

    last_match: dict[int, int] = {}  # gt_id -> last matched pred_id
    tp = fp = fn = ids = 0
    motp_sum = 0.0
    gt_span: dict[int, int] = {}
    gt_hit: dict[int, int] = {}

    for frame in all_frames:
        frame_gts = gt_frames.get(frame, [])
        frame_preds = pred_frames.get(frame, [])
        for gt in frame_gts:
            gt_span[gt.gt_id] = gt_span.get(gt.gt_id, 0) + 1

        # Keep surviving correspondences from previous frames first.
        sticky: list[tuple[int, int, float]] = []
        used_g: set[int] = set()
        used_p: set[int] = set()
        pred_by_id = {}
        for j, pred in enumerate(frame_preds):
            pred_by_id[pred.pred_id] = j
        for i, gt in enumerate(frame_gts):
            prev = last_match.get(gt.gt_id)
            if prev is None or prev not in pred_by_id:
                continue
            j = pred_by_id[prev]
            if j in used_p:
                continue
            s = similarity(gt.box, frame_preds[j].box)
            if s >= threshold:
                sticky.append((i, j, s))
                used_g.add(i)
                used_p.add(j)

        rest_g = [i for i in range(len(frame_gts)) if i not in used_g]
        rest_p = [j for j in range(len(frame_preds)) if j not in used_p]
        sub_matches, sub_un_g, sub_un_p = match_frame(
            [frame_gts[i] for i in rest_g], [frame_preds[j] for j in rest_p],
            threshold, similarity)
        matches = sticky + [(rest_g[i], rest_p[j], s) for i, j, s in sub_matches]

        for i, j, s in matches:
            gt_id = frame_gts[i].gt_id
            pred_id = frame_preds[j].pred_id
            prev = last_match.get(gt_id)
            if prev is not None and prev != pred_id:
                ids += 1
            last_match[gt_id] = pred_id
            gt_hit[gt_id] = gt_hit.get(gt_id, 0) + 1
            motp_sum += s
        tp += len(matches)
        fn += len(frame_gts) - len(matches)
        fp += len(frame_preds) - len(matches)

    total_gt = sum(gt_span.values())
    mota = 1.0 - (fp + fn + ids) / total_gt
    motp = motp_sum / tp if tp else 0.0
    coverage = [gt_hit.get(g, 0) / n for g, n in gt_span.items()]
    mt = sum(1 for c in coverage if c >= 0.8) / len(coverage)
    ml = sum(1 for c in coverage if c <= 0.2) / len(coverage)
    return ClearResult(mota=mota, motp=motp, ids=ids, mt=mt, ml=ml,
                       fp=fp, fn=fn, tp=tp, gt=total_gt)


def hota(gts: Sequence[GtAnnotation], preds: Sequence[PredRecord],
         similarity: SimilarityFn = iou3d,
         alphas: Sequence[float] = HOTA_ALPHAS) -> float:
    """Association-aware accuracy averaged over localization thresholds."""
    if not gts and not preds:
        return 1.0
    if not gts or not preds:
        return 0.0
    gt_frames = _group_by_frame(gts)
    pred_frames = _group_by_frame(preds)
    all_frames = sorted(set(gt_frames) | set(pred_frames))

    scores = []
    for alpha in alphas:
        tp_pair: dict[tuple[int, int], int] = {}
        gt_tp: dict[int, int] = {}
        pred_tp: dict[int, int] = {}
        gt_fn: dict[int, int] = {}
        pred_fp: dict[int, int] = {}
        n_tp = n_fn = n_fp = 0
        for frame in all_frames:
            frame_gts = gt_frames.get(frame, [])
            frame_preds = pred_frames.get(frame, [])
            matches, un_g, un_p = match_frame(frame_gts, frame_preds, alpha, similarity)
            for i, j, _ in matches:
                g, p = frame_gts[i].gt_id, frame_preds[j].pred_id
                tp_pair[(g, p)] = tp_pair.get((g, p), 0) + 1
                gt_tp[g] = gt_tp.get(g, 0) + 1
                pred_tp[p] = pred_tp.get(p, 0) + 1
            for i in un_g:
                g = frame_gts[i].gt_id
                gt_fn[g] = gt_fn.get(g, 0) + 1
            for j in un_p:
                p = frame_preds[j].pred_id
                pred_fp[p] = pred_fp.get(p, 0) + 1
            n_tp += len(matches)
            n_fn += len(un_g)
            n_fp += len(un_p)

        if n_tp + n_fn + n_fp == 0:
            scores.append(1.0)
            continue
        acc_sum = 0.0
        for (g, p), pair_count in tp_pair.items():
            tpa = pair_count
            fna = gt_tp[g] - pair_count + gt_fn.get(g, 0)
            fpa = pred_tp[p] - pair_count + pred_fp.get(p, 0)
            acc_sum += pair_count * (tpa / (tpa + fna + fpa))
        scores.append(math.sqrt(acc_sum / (n_tp + n_fn + n_fp)))
    return float(np.mean(scores))


def smota(mota_r: float, recall: float) -> float:
    """Scaled MOTA at one recall point: max(0, MOTA_r / r)."""
    if recall <= 0.0:
        return 0.0
    return max(0.0, mota_r / recall)


def amota(gts: Sequence[GtAnnotation], preds: Sequence[PredRecord],
          threshold: float, similarity: SimilarityFn = iou3d,
          recall_levels: int = 40) -> AmotaResult:
    """Recall-averaged CLEAR metrics.

    Target recalls are 1/L .. 1. Each is realized by the loosest score
    threshold whose true-positive count reaches the target; CLEAR runs at
    that operating point and the scaled score divides by the recall it
    actually achieved, keeping every point in [0, 1]. Levels beyond the
    tracker's peak recall contribute zero.
    """
    if not gts:
        raise EvaluationError("recall sweep undefined without ground truth")
    full = clear_mot(gts, preds, threshold, similarity)
    total_gt_ids_frames = full.gt

    tp_scores = _matched_pred_scores(gts, preds, threshold, similarity)
    tp_scores.sort(reverse=True)

    points = []
    mota_sum = smota_sum = motp_sum = 0.0
    for level in range(1, recall_levels + 1):
        target = level / recall_levels
        needed = math.ceil(target * total_gt_ids_frames - 1e-12)
        if needed > len(tp_scores):
            points.append(RecallPoint(recall=target, achieved_recall=0.0,
                                      mota=0.0, smota=0.0, motp=0.0))
            continue
        cutoff = tp_scores[needed - 1] if needed > 0 else -math.inf
        subset = [p for p in preds if p.score >= cutoff]
        res = clear_mot(gts, subset, threshold, similarity)
        achieved = res.tp / res.gt if res.gt else 0.0
        point = RecallPoint(recall=target, achieved_recall=achieved,
                            mota=res.mota, smota=smota(res.mota, achieved),
                            motp=res.motp)
        points.append(point)
        mota_sum += point.mota
        smota_sum += point.smota
        motp_sum += point.motp
    n = float(recall_levels)
    return AmotaResult(samota=smota_sum / n, amota=mota_sum / n,
                       amotp=motp_sum / n, points=points)


def _matched_pred_scores(gts, preds, threshold, similarity):
    """Scores of predictions matched as true positives in the full run."""
    gt_frames = _group_by_frame(gts)
    pred_frames = _group_by_frame(preds)
    scores = []
    for frame in sorted(set(gt_frames) | set(pred_frames)):
        frame_gts = gt_frames.get(frame, [])
        frame_preds = pred_frames.get(frame, [])
        matches, _, _ = match_frame(frame_gts, frame_preds, threshold, similarity)
        scores.extend(frame_preds[j].score for _, j, _ in matches)
    return scores


def evaluate(gts: Sequence[GtAnnotation], preds: Sequence[PredRecord],
             config: EvalConfig = EvalConfig(),
             category_names: Optional[dict[int, str]] = None) -> MetricsReport:
    """Per-category metric stack over flat record lists.

    Categories present only in the predictions cannot be scored (CLEAR is
    undefined without ground truth) and are reported with NaN CLEAR fields
    and HOTA 0.
    """
    similarity = config.similarity_fn()
    categories = sorted({g.category for g in gts} | {p.category for p in preds})
    names = category_names or {}
    report: dict[str, CategoryMetrics] = {}
    for cat in categories:
        name = names.get(cat, str(cat))
        cat_gts = [g for g in gts if g.category == cat]
        cat_preds = [p for p in preds if p.category == cat]
        if not cat_gts:
            report[name] = CategoryMetrics(
                hota=hota(cat_gts, cat_preds, similarity),
                mota=math.nan, motp=math.nan, samota=math.nan, amota=math.nan,
                amotp=math.nan, mt=math.nan, ml=math.nan,
                fp=len(cat_preds), fn=0, ids=0, tp=0)
            continue
        clear = clear_mot(cat_gts, cat_preds, config.match_threshold, similarity)
        sweep = amota(cat_gts, cat_preds, config.match_threshold, similarity,
                      config.recall_levels)
        report[name] = CategoryMetrics(
            hota=hota(cat_gts, cat_preds, similarity),
            mota=clear.mota, motp=clear.motp,
            samota=sweep.samota, amota=sweep.amota, amotp=sweep.amotp,
            mt=clear.mt, ml=clear.ml, fp=clear.fp, fn=clear.fn,
            ids=clear.ids, tp=clear.tp, recall_points=sweep.points)
    return MetricsReport(per_category=report)


def format_report(report: MetricsReport) -> str:
    """Machine-parseable key=value lines, one metric per line."""
    lines = []
    for cat in sorted(report.per_category):
        m = report.per_category[cat]
        for key in ("hota", "mota", "motp", "samota", "amota", "amotp", "mt", "ml"):
            lines.append(f"{cat}.{key}={getattr(m, key):.6f}")
        for key in ("fp", "fn", "ids", "tp"):
            lines.append(f"{cat}.{key}={getattr(m, key)}")
    return "\n".join(lines) + "\n"


def format_recall_table(report: MetricsReport) -> str:
    """Column-aligned per-recall-level table for every category."""
    lines = [f"{'category':<12} {'recall':>8} {'achieved':>9} "
             f"{'mota':>9} {'smota':>9} {'motp':>9}"]
    for cat in sorted(report.per_category):
        for pt in report.per_category[cat].recall_points:
            lines.append(f"{cat:<12} {pt.recall:>8.3f} {pt.achieved_recall:>9.3f} "
                         f"{pt.mota:>9.4f} {pt.smota:>9.4f} {pt.motp:>9.4f}")
    return "\n".join(lines) + "\n"
