"""Gated bipartite association between detections and tracks.

Cross-category pairs receive an additive gate of 1e5 on top of the base
cost, so with any sane threshold they can never be matched. Assignment is
optimal (Jonker-Volgenant via scipy) with a post-hoc threshold: matched
pairs whose cost exceeds the stage threshold are split back into the
unmatched pools. The two-stage cascade associates on the motion matrix
first, then offers the leftovers to the appearance matrix.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Sequence

import numpy as np
from scipy.optimize import linear_sum_assignment

# Additive penalty for cross-category pairs; thresholds must stay below it.
GATE_COST = 1e5


@dataclass(frozen=True)
class AssignmentResult:
    """Partition of detection and track indices into matches and leftovers.

    ``match_stage`` records, per match, which cascade stage produced it
    (1-based; single-stage solves report 1).
    """

    matches: tuple[tuple[int, int], ...]
    unmatched_dets: tuple[int, ...]
    unmatched_tracks: tuple[int, ...]
    match_stage: tuple[int, ...] = ()

    def __post_init__(self):
        det_side = [i for i, _ in self.matches] + list(self.unmatched_dets)
        trk_side = [j for _, j in self.matches] + list(self.unmatched_tracks)
        if len(set(det_side)) != len(det_side) or len(set(trk_side)) != len(trk_side):
            raise ValueError("assignment result reuses an index")


def category_gate(det_categories: Sequence[int],
                  track_categories: Sequence[int]) -> np.ndarray:
    """Additive gate layer: 0 for same-category pairs, 1e5 otherwise."""
    dets = np.asarray(det_categories, dtype=int).reshape(-1, 1)
    tracks = np.asarray(track_categories, dtype=int).reshape(1, -1)
    if dets.shape[0] == 0 or tracks.shape[1] == 0:
        return np.zeros((dets.shape[0], tracks.shape[1]))
    return np.where(dets - tracks != 0, GATE_COST, 0.0)


def compose(base: np.ndarray, gate: np.ndarray) -> np.ndarray:
    """Elementwise sum of a base cost matrix and its gate layer."""
    base = np.asarray(base, dtype=float)
    gate = np.asarray(gate, dtype=float)
    if base.shape != gate.shape:
        raise ValueError(f"cost shapes disagree: {base.shape} vs {gate.shape}")
    return base + gate


def solve(cost: np.ndarray, threshold: float) -> AssignmentResult:
    """Minimum-cost assignment with a per-pair admission threshold.

    The optimum is computed on the full rectangular matrix; matched pairs
    with cost strictly above ``threshold`` are then released to the
    unmatched pools (Hungarian with a maximum association cost).
    """
    cost = np.asarray(cost, dtype=float)
    if not np.all(np.isfinite(cost)):
        raise ValueError("cost matrix must be finite")
    if threshold >= GATE_COST:
        raise ValueError("threshold must stay below the category gate constant")
    n_dets, n_tracks = cost.shape
    if n_dets == 0 or n_tracks == 0:
        return AssignmentResult(matches=(), unmatched_dets=tuple(range(n_dets)),
                                unmatched_tracks=tuple(range(n_tracks)))
    rows, cols = linear_sum_assignment(cost)
    matches = []
    for i, j in zip(rows, cols):
        if cost[i, j] <= threshold:
            matches.append((int(i), int(j)))
    matches.sort()
    matched_dets = {i for i, _ in matches}
    matched_tracks = {j for _, j in matches}
    return AssignmentResult(
        matches=tuple(matches),
        unmatched_dets=tuple(i for i in range(n_dets) if i not in matched_dets),
        unmatched_tracks=tuple(j for j in range(n_tracks) if j not in matched_tracks),
        match_stage=(1,) * len(matches),
    )


def two_stage_associate(motion_cost: np.ndarray,
                        appearance_cost: np.ndarray,
                        motion_threshold: float,
                        appearance_threshold: float,
                        motion_first: bool = True) -> AssignmentResult:
    """Cascade association: solve one matrix, then offer the remaining
    detections and tracks to the other.

    Both matrices must already include the category gate. No index is
    matched twice; stage numbers in the result follow execution order.
    """
    motion_cost = np.asarray(motion_cost, dtype=float)
    appearance_cost = np.asarray(appearance_cost, dtype=float)
    if motion_cost.shape != appearance_cost.shape:
        raise ValueError("motion and appearance cost shapes disagree")
    if motion_first:
        stages = ((motion_cost, motion_threshold), (appearance_cost, appearance_threshold))
    else:
        stages = ((appearance_cost, appearance_threshold), (motion_cost, motion_threshold))

    first = solve(stages[0][0], stages[0][1])
    matches = list(first.matches)
    stage_tags = [1] * len(matches)

    rest_dets = list(first.unmatched_dets)
    rest_tracks = list(first.unmatched_tracks)
    if rest_dets and rest_tracks:
        sub = stages[1][0][np.ix_(rest_dets, rest_tracks)]
        second = solve(sub, stages[1][1])
        for i, j in second.matches:
            matches.append((rest_dets[i], rest_tracks[j]))
            stage_tags.append(2)
        rest_dets = [rest_dets[i] for i in second.unmatched_dets]
        rest_tracks = [rest_tracks[j] for j in second.unmatched_tracks]

    order = sorted(range(len(matches)), key=lambda k: matches[k])
    return AssignmentResult(
        matches=tuple(matches[k] for k in order),
        unmatched_dets=tuple(sorted(rest_dets)),
        unmatched_tracks=tuple(sorted(rest_tracks)),
        match_stage=tuple(stage_tags[k] for k in order),
    )
