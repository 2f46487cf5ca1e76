"""Frame-stepped tracking pipeline.

Per frame: confidence-filter and NMS the detections, advance every track's
filter, build the gated motion and appearance cost matrices, run the
two-stage association, update matched tracks, birth new tracks from
leftover detections, coast unmatched tracks (emitting their predicted
state at a decayed score for a bounded number of frames), and retire
tracks that missed too long or whose score fell to the deletion threshold.
Deaths are evaluated after emission, so a track's last predicted state can
appear in its death frame.

A tracker instance is a serial state machine; run one instance per
sequence.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Callable, Optional, Sequence

import numpy as np

from . import association, motion
from .appearance import (AppearanceFeature, FeatureStrategy, OcclusionState,
                         TrackMemory, appearance_cost_matrix, select_feature)
from .geometry import Box3D, Detection, nms
from .motion import KalmanState, MotionConfig, TrackScore

# Appearance cost assigned when either side has no usable embedding;
# matches the category gate so such pairs never clear a sane threshold.
MISSING_APPEARANCE_COST = association.GATE_COST

ASSOCIATION_MODES = ("mo_ap", "ap_mo", "mo", "ap")


@dataclass
class TrackerConfig:
    theta_nms: float = 0.1
    theta_csf: float = 0.0
    theta_mo: float = 0.01
    theta_app: float = 1.4
    theta_del: float = 0.0
    max_age: int = 15
    max_predicted_emission: int = 2
    predicted_score_factor: float = 0.05
    output_nms_threshold: float = 1.0
    memory_depth: int = 16
    feature_strategy: FeatureStrategy = field(default_factory=FeatureStrategy)
    motion: MotionConfig = field(default_factory=MotionConfig)
    categories: dict[str, int] = field(default_factory=lambda: dict(DEFAULT_CATEGORIES))
    association_mode: str = "mo_ap"
    category_gating: bool = True

    def validate(self) -> "TrackerConfig":
        if self.max_age < 1:
            raise ValueError("max_age must be at least 1")
        if self.max_predicted_emission < 0:
            raise ValueError("max_predicted_emission must be non-negative")
        if not 0.0 < self.predicted_score_factor <= 1.0:
            raise ValueError("predicted_score_factor must be in (0, 1]")
        for name in ("theta_nms", "theta_csf", "theta_mo", "theta_app",
                     "theta_del", "output_nms_threshold"):
            if getattr(self, name) < 0:
                raise ValueError(f"{name} must be non-negative")
        for gate_threshold in (self.theta_mo, self.theta_app):
            if gate_threshold >= association.GATE_COST:
                raise ValueError("association thresholds must stay below the category gate")
        if self.memory_depth < self.feature_strategy.window:
            raise ValueError("memory_depth must cover the feature strategy window")
        if self.association_mode not in ASSOCIATION_MODES:
            raise ValueError(f"unknown association_mode {self.association_mode!r}")
        if len(set(self.categories.values())) != len(self.categories):
            raise ValueError("category ids must be unique")
        return self

    def category_names(self) -> dict[int, str]:
        return {v: k for k, v in self.categories.items()}


DEFAULT_CATEGORIES = {"car": 0, "pedestrian": 1, "cyclist": 2}

NUSCENES_CATEGORIES = {"car": 0, "pedestrian": 1, "bicycle": 2, "motorcycle": 3,
                       "bus": 4, "trailer": 5, "truck": 6}


def _kitti_profile() -> TrackerConfig:
    return TrackerConfig(
        theta_nms=0.1, theta_csf=0.0, theta_mo=0.01, theta_app=1.4,
        theta_del=0.0, max_age=15, max_predicted_emission=15,
        predicted_score_factor=0.05, output_nms_threshold=1.0,
        motion=MotionConfig(dt=0.1),
        categories=dict(DEFAULT_CATEGORIES))


def _nuscenes_profile() -> TrackerConfig:
    return TrackerConfig(
        theta_nms=0.08, theta_csf=0.03, theta_mo=0.02, theta_app=1.4,
        theta_del=0.0, max_age=15, max_predicted_emission=2,
        predicted_score_factor=0.05, output_nms_threshold=0.08,
        motion=MotionConfig(dt=0.5),
        categories=dict(NUSCENES_CATEGORIES))


def _synthetic_profile() -> TrackerConfig:
    # Harness default: gIoU-scale association thresholds and a flat
    # trajectory score, tuned for the synthetic scenario generator.
    return TrackerConfig(
        theta_nms=0.1, theta_csf=0.0, theta_mo=1.1, theta_app=0.2,
        theta_del=0.0, max_age=15, max_predicted_emission=0,
        predicted_score_factor=0.05, output_nms_threshold=1.0,
        motion=MotionConfig(dt=0.1, theta=0.0),
        categories=dict(DEFAULT_CATEGORIES))


PROFILES: dict[str, Callable[[], TrackerConfig]] = {
    "kitti": _kitti_profile,
    "nuscenes": _nuscenes_profile,
    "synthetic": _synthetic_profile,
}


@dataclass
class Track:
    """One trajectory under track: identity, filter state, reliability
    score, appearance memory and lifecycle counters."""

    id: int
    category: int
    kalman: KalmanState
    score: TrackScore
    memory: TrackMemory
    hits: int = 1
    misses_in_a_row: int = 0
    age: int = 0
    last_output_score: float = 0.0


@dataclass(frozen=True)
class TrackOutput:
    track_id: int
    category: int
    box: Box3D
    score: float
    source: str  # "updated" | "predicted"


@dataclass(frozen=True)
class FrameResult:
    frame: int
    outputs: tuple[TrackOutput, ...]
    born: tuple[int, ...]
    died: tuple[int, ...]


def preprocess(detections: Sequence[Detection], cfg: TrackerConfig) -> list[Detection]:
    """Confidence filter then class-aware NMS; survivors ordered by
    descending score."""
    kept = [d for d in detections if d.score >= cfg.theta_csf]
    kept = nms(kept, cfg.theta_nms)
    kept.sort(key=lambda d: -d.score)
    return kept


class Tracker:
    """Serial tracking state machine over time-ordered frames."""

    def __init__(self, config: TrackerConfig,
                 appearance_provider: Optional[Callable] = None):
        self.config = config.validate()
        self.appearance_provider = appearance_provider
        self.tracks: list[Track] = []
        self.cross_category_matches = 0
        self._next_id = 1
        self._last_frame: Optional[int] = None

    def step(self, detections: Sequence[Detection],
             frame: Optional[int] = None) -> FrameResult:
        cfg = self.config
        if frame is None:
            frame = 0 if self._last_frame is None else self._last_frame + 1
        if self._last_frame is not None and frame <= self._last_frame:
            raise ValueError(
                f"frames must be strictly increasing: got {frame} after {self._last_frame}")
        self._last_frame = frame

        dets = preprocess(detections, cfg)

        for track in self.tracks:
            track.kalman = motion.predict(track.kalman, cfg.motion)
            track.age += 1
        predicted_boxes = [motion.state_box(t.kalman) for t in self.tracks]

        result = self._associate(dets, predicted_boxes, frame)
        for i, j in result.matches:
            if dets[i].category != self.tracks[j].category:
                self.cross_category_matches += 1

        outputs: list[TrackOutput] = []
        for i, j in result.matches:
            det, track = dets[i], self.tracks[j]
            track.kalman = motion.update(track.kalman, det, cfg.motion)
            track.score = motion.update_score(track.score, det.score, cfg.motion)
            track.hits += 1
            track.misses_in_a_row = 0
            track.last_output_score = det.score
            self._record_appearance(track, det, frame)
            outputs.append(TrackOutput(track.id, track.category,
                                       motion.state_box(track.kalman),
                                       det.score, "updated"))

        born = []
        for i in result.unmatched_dets:
            track = self._birth(dets[i], frame)
            born.append(track.id)
            outputs.append(TrackOutput(track.id, track.category,
                                       motion.state_box(track.kalman),
                                       dets[i].score, "updated"))

        for j in result.unmatched_tracks:
            track = self.tracks[j]
            track.misses_in_a_row += 1
            track.score = motion.update_score(track.score, 0.0, cfg.motion)
            if track.misses_in_a_row <= cfg.max_predicted_emission:
                outputs.append(TrackOutput(
                    track.id, track.category, motion.state_box(track.kalman),
                    cfg.predicted_score_factor * track.last_output_score,
                    "predicted"))

        outputs = self._output_nms(outputs)

        died = tuple(t.id for t in self.tracks
                     if t.misses_in_a_row > cfg.max_age
                     or t.last_output_score <= cfg.theta_del)
        dead_ids = set(died)
        self.tracks = [t for t in self.tracks if t.id not in dead_ids]

        return FrameResult(frame=frame, outputs=tuple(outputs),
                           born=tuple(born), died=died)

    def run_sequence(self, frames) -> list[FrameResult]:
        return [self.step(dets) for dets in frames]

    def _associate(self, dets, predicted_boxes, frame) -> association.AssignmentResult:
        cfg = self.config
        n_dets, n_tracks = len(dets), len(self.tracks)
        if n_dets == 0 or n_tracks == 0:
            return association.AssignmentResult(
                matches=(), unmatched_dets=tuple(range(n_dets)),
                unmatched_tracks=tuple(range(n_tracks)))

        mode = cfg.association_mode
        if cfg.category_gating:
            gate = association.category_gate([d.category for d in dets],
                                             [t.category for t in self.tracks])
        else:
            gate = np.zeros((n_dets, n_tracks))

        mo_cost = app_cost = None
        if mode in ("mo_ap", "ap_mo", "mo"):
            base = motion.motion_cost_matrix(dets, predicted_boxes,
                                             [t.score.gamma for t in self.tracks])
            mo_cost = association.compose(base, gate)
        if mode in ("mo_ap", "ap_mo", "ap"):
            app_cost = association.compose(self._appearance_costs(dets, frame), gate)

        if mode == "mo":
            return association.solve(mo_cost, cfg.theta_mo)
        if mode == "ap":
            return association.solve(app_cost, cfg.theta_app)
        return association.two_stage_associate(
            mo_cost, app_cost, cfg.theta_mo, cfg.theta_app,
            motion_first=(mode == "mo_ap"))

    def _appearance_costs(self, dets, frame) -> np.ndarray:
        if self.appearance_provider is not None:
            return np.asarray(self.appearance_provider(frame, dets, self.tracks),
                              dtype=float)
        strategy = self.config.feature_strategy
        track_feats = []
        for track in self.tracks:
            track_feats.append(select_feature(track.memory, strategy)
                               if len(track.memory) else None)
        cost = np.full((len(dets), len(self.tracks)), MISSING_APPEARANCE_COST)
        det_idx = [i for i, d in enumerate(dets) if d.embedding is not None]
        trk_idx = [j for j, f in enumerate(track_feats) if f is not None]
        if det_idx and trk_idx:
            sub = appearance_cost_matrix([dets[i].embedding for i in det_idx],
                                         [track_feats[j] for j in trk_idx])
            cost[np.ix_(det_idx, trk_idx)] = sub
        return cost

    def _record_appearance(self, track: Track, det: Detection, frame: int) -> None:
        if det.embedding is not None:
            track.memory.record(AppearanceFeature(
                embedding=np.asarray(det.embedding, dtype=float),
                occlusion=OcclusionState(det.occlusion), frame=frame))

    def _birth(self, det: Detection, frame: int) -> Track:
        cfg = self.config
        track = Track(
            id=self._next_id,
            category=det.category,
            kalman=motion.init_state(det, cfg.motion),
            score=TrackScore(gamma=cfg.motion.gamma_init, last_confidence=det.score),
            memory=TrackMemory(depth=cfg.memory_depth),
            last_output_score=det.score)
        self._next_id += 1
        self._record_appearance(track, det, frame)
        self.tracks.append(track)
        return track

    def _output_nms(self, outputs: list[TrackOutput]) -> list[TrackOutput]:
        """Class-aware NMS over the frame's emissions. Updated outputs are
        listed before predicted ones, so score ties resolve in their favor."""
        proxies = [Detection(box=o.box, score=min(o.score, 1.0), category=o.category)
                   for o in outputs]
        kept = nms(proxies, self.config.output_nms_threshold)
        kept_ids = {id(p) for p in kept}
        return [o for o, p in zip(outputs, proxies) if id(p) in kept_ids]
