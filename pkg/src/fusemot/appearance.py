"""Occlusion-tagged appearance memory and feature selection.

Each track keeps a bounded history of (embedding, occlusion level, frame)
records. Three selection strategies turn that history into one matching
feature:

    OCC     - the single best-visibility feature over the whole history
    LTF     - unweighted mean of the last few frames
    LTF_OCC - occlusion-weighted mean of the last few frames

The reference appearance cost is cosine distance, 1 - cos in [0, 2]; an
external provider can substitute precomputed cost matrices per frame.
"""

from __future__ import annotations

from collections import deque
from dataclasses import dataclass
from enum import IntEnum
from typing import Optional, Sequence

import numpy as np


class OcclusionState(IntEnum):
    FULLY_VISIBLE = 0
    PARTLY_OCCLUDED = 1
    LARGELY_OCCLUDED = 2
    FULLY_OCCLUDED = 3


DEFAULT_OCCLUSION_WEIGHTS = (1.0, 0.7, 0.3, 0.0)


@dataclass(frozen=True)
class AppearanceFeature:
    embedding: np.ndarray
    occlusion: OcclusionState
    frame: int


@dataclass(frozen=True)
class FeatureStrategy:
    """How a track's history is reduced to one matching feature.

    ``occlusion_weights`` index by occlusion level and must not increase
    with it; ``window`` bounds the LTF variants to the most recent frames.
    """

    variant: str = "OCC"  # OCC | LTF | LTF_OCC
    occlusion_weights: tuple[float, float, float, float] = DEFAULT_OCCLUSION_WEIGHTS
    window: int = 3

    def __post_init__(self):
        if self.variant not in ("OCC", "LTF", "LTF_OCC"):
            raise ValueError(f"unknown feature strategy variant {self.variant!r}")
        if len(self.occlusion_weights) != 4:
            raise ValueError("exactly four occlusion weights required")
        if any(b > a for a, b in zip(self.occlusion_weights, self.occlusion_weights[1:])):
            raise ValueError("occlusion weights must be non-increasing with level")
        if self.window < 1:
            raise ValueError("window must be at least 1")


class TrackMemory:
    """Ring buffer of appearance features for one track."""

    def __init__(self, depth: int = 16):
        if depth < 1:
            raise ValueError("memory depth must be at least 1")
        self._features: deque[AppearanceFeature] = deque(maxlen=depth)
        self._dim: Optional[int] = None

    def __len__(self) -> int:
        return len(self._features)

    @property
    def features(self) -> tuple[AppearanceFeature, ...]:
        return tuple(self._features)

    def record(self, feature: AppearanceFeature) -> None:
        emb = np.asarray(feature.embedding, dtype=float)
        if emb.ndim != 1 or emb.size == 0:
            raise ValueError("embedding must be a non-empty 1-D vector")
        if self._dim is None:
            self._dim = emb.size
        elif emb.size != self._dim:
            raise ValueError(
                f"embedding dimension {emb.size} does not match memory dimension {self._dim}")
        self._features.append(feature)


def select_feature(memory: TrackMemory, strategy: FeatureStrategy) -> np.ndarray:
    """Reduce a track's history to one embedding per the strategy.

    OCC picks a stored feature (never a blend): minimal occlusion level,
    most recent frame on ties. LTF averages the last ``window`` features
    uniformly. LTF_OCC weights that window by occlusion, renormalized,
    falling back to OCC when every weight is zero.
    """
    feats = memory.features
    if not feats:
        raise ValueError("cannot select a feature from an empty history")
    if strategy.variant == "OCC":
        best = min(feats, key=lambda f: (int(f.occlusion), -f.frame))
        return np.asarray(best.embedding, dtype=float)
    recent = feats[-strategy.window:]
    stack = np.stack([np.asarray(f.embedding, dtype=float) for f in recent])
    if strategy.variant == "LTF":
        return stack.mean(axis=0)
    weights = np.array([strategy.occlusion_weights[int(f.occlusion)] for f in recent])
    total = weights.sum()
    if total <= 0.0:
        return select_feature(memory, FeatureStrategy(variant="OCC",
                                                      occlusion_weights=strategy.occlusion_weights,
                                                      window=strategy.window))
    return (weights[:, None] * stack).sum(axis=0) / total


def appearance_cost_matrix(det_features: Sequence[np.ndarray],
                           track_features: Sequence[np.ndarray]) -> np.ndarray:
    """Cosine-distance matrix, entry (i, j) = 1 - cos(det_i, track_j) in [0, 2]."""
    cost = np.zeros((len(det_features), len(track_features)))
    if cost.size == 0:
        return cost
    dets = np.stack([np.asarray(v, dtype=float) for v in det_features])
    tracks = np.stack([np.asarray(v, dtype=float) for v in track_features])
    if dets.shape[1] != tracks.shape[1]:
        raise ValueError("embedding dimensions disagree between detections and tracks")
    dn = np.linalg.norm(dets, axis=1)
    tn = np.linalg.norm(tracks, axis=1)
    if np.any(dn == 0.0) or np.any(tn == 0.0):
        raise ValueError("zero-norm embeddings are not allowed")
    sim = (dets / dn[:, None]) @ (tracks / tn[:, None]).T
    return 1.0 - sim


class PrecomputedAppearanceProvider:
    """Replays externally computed appearance cost matrices, keyed by
    frame index. Shape must match the live detection/track counts."""

    def __init__(self, matrices: dict[int, np.ndarray]):
        self._matrices = {k: np.asarray(v, dtype=float) for k, v in matrices.items()}

    def __call__(self, frame: int, detections, tracks) -> np.ndarray:
        if frame not in self._matrices:
            raise KeyError(f"no precomputed appearance costs for frame {frame}")
        mat = self._matrices[frame]
        if mat.shape != (len(detections), len(tracks)):
            raise ValueError(
                f"frame {frame}: cost matrix shape {mat.shape} does not match "
                f"{len(detections)} detections x {len(tracks)} tracks")
        return mat
