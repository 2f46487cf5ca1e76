"""Constant-acceleration Kalman filtering and the motion cost matrix.

State layout (dimension 13 + extras):

    [x, y, z, vx, vy, vz, ax, ay, az, l, w, h, yaw, *extras]

The transition integrates position <- position + dt*velocity +
0.5*dt^2*acceleration and velocity <- velocity + dt*acceleration; the
dims/yaw block is carried unchanged. The measurement observes position,
dims and yaw, plus planar velocity when the detection supplies it.

Each track also carries a reliability score gamma that divides its column
of the motion cost matrix: unreliable tracks cost more to match.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Sequence

import numpy as np

from .geometry import Box3D, Detection, giou3d, wrap_angle

POS = slice(0, 3)
VEL = slice(3, 6)
ACC = slice(6, 9)
DIMS = slice(9, 12)  # l, w, h
YAW = 12
BASE_DIM = 13


@dataclass(frozen=True)
class MotionConfig:
    """Filter timing, noise levels and trajectory-score parameters.

    Noise is diagonal per block; R mirrors the observed channels. The
    score update adds ``theta * confidence`` per matched frame and resets
    to ``gamma_init`` after a gap, clamped to [gamma_min, gamma_max].
    """

    dt: float = 0.1
    q_pos: float = 1.0
    q_vel: float = 10.0
    q_acc: float = 10.0
    q_dims: float = 0.01
    q_yaw: float = 0.01
    r_pos: float = 1.0
    r_dims: float = 0.01
    r_yaw: float = 0.01
    r_vel: float = 10.0
    init_cov_inflation: float = 100.0
    theta: float = 0.1
    gamma_init: float = 1.0
    gamma_min: float = 0.1
    gamma_max: float = 10.0
    extra_dims: int = 0

    def __post_init__(self):
        if self.dt <= 0:
            raise ValueError(f"dt must be positive, got {self.dt}")
        if self.gamma_min <= 0 or self.gamma_max < self.gamma_min:
            raise ValueError("gamma clamp must satisfy 0 < min <= max")
        for name in ("q_pos", "q_vel", "q_acc", "q_dims", "q_yaw",
                     "r_pos", "r_dims", "r_yaw", "r_vel"):
            if getattr(self, name) < 0:
                raise ValueError(f"{name} must be non-negative")

    @property
    def state_dim(self) -> int:
        return BASE_DIM + self.extra_dims

    def process_noise(self) -> np.ndarray:
        q = np.zeros(self.state_dim)
        q[POS] = self.q_pos
        q[VEL] = self.q_vel
        q[ACC] = self.q_acc
        q[DIMS] = self.q_dims
        q[YAW] = self.q_yaw
        return np.diag(q)


@dataclass(frozen=True)
class KalmanState:
    """Filter mean and covariance for one track."""

    mean: np.ndarray
    cov: np.ndarray

    def __post_init__(self):
        if self.mean.ndim != 1 or self.cov.shape != (len(self.mean), len(self.mean)):
            raise ValueError("state mean/covariance dimensions disagree")


@dataclass(frozen=True)
class TrackScore:
    """Trajectory reliability: current gamma plus the confidence seen at
    the previous moment (zero on unmatched frames)."""

    gamma: float = 1.0
    last_confidence: float = 1.0


def transition_matrix(cfg: MotionConfig) -> np.ndarray:
    dim = cfg.state_dim
    dt = cfg.dt
    a = np.eye(dim)
    for i in range(3):
        a[i, 3 + i] = dt
        a[i, 6 + i] = 0.5 * dt * dt
        a[3 + i, 6 + i] = dt
    return a


def init_state(det: Detection, cfg: MotionConfig) -> KalmanState:
    """Newborn state: measured channels from the detection, zero velocity
    and acceleration with inflated covariance so early updates dominate."""
    box = det.box
    mean = np.zeros(cfg.state_dim)
    mean[POS] = (box.x, box.y, box.z)
    mean[DIMS] = (box.l, box.w, box.h)
    mean[YAW] = box.yaw
    if box.vx is not None and box.vy is not None:
        mean[3], mean[4] = box.vx, box.vy
    cov = np.zeros(cfg.state_dim)
    cov[POS] = cfg.r_pos
    cov[VEL] = cfg.q_vel * cfg.init_cov_inflation
    cov[ACC] = cfg.q_acc * cfg.init_cov_inflation
    cov[DIMS] = cfg.r_dims
    cov[YAW] = cfg.r_yaw
    if cfg.extra_dims:
        cov[BASE_DIM:] = 1.0
    return KalmanState(mean=mean, cov=np.diag(cov))


def predict(state: KalmanState, cfg: MotionConfig) -> KalmanState:
    """One prediction step: mean <- A mean, cov <- A cov A^T + Q."""
    a = transition_matrix(cfg)
    mean = a @ state.mean
    mean[YAW] = wrap_angle(mean[YAW])
    cov = a @ state.cov @ a.T + cfg.process_noise()
    return KalmanState(mean=mean, cov=0.5 * (cov + cov.T))


def _measurement_model(det: Detection, cfg: MotionConfig):
    """Measurement vector, H and R for a detection. Observes position,
    (l, w, h), yaw, and planar velocity when present."""
    box = det.box
    with_velocity = box.vx is not None and box.vy is not None
    m = 9 if with_velocity else 7
    z = np.empty(m)
    z[0:3] = (box.x, box.y, box.z)
    z[3:6] = (box.l, box.w, box.h)
    z[6] = box.yaw
    h = np.zeros((m, cfg.state_dim))
    h[0:3, POS] = np.eye(3)
    h[3:6, DIMS] = np.eye(3)
    h[6, YAW] = 1.0
    r = np.empty(m)
    r[0:3] = cfg.r_pos
    r[3:6] = cfg.r_dims
    r[6] = cfg.r_yaw
    if with_velocity:
        z[7:9] = (box.vx, box.vy)
        h[7, 3] = 1.0
        h[8, 4] = 1.0
        r[7:9] = cfg.r_vel
    return z, h, np.diag(r)


def update(state: KalmanState, det: Detection, cfg: MotionConfig) -> KalmanState:
    """Standard linear Kalman correction with wrapped yaw innovation.

    Joseph-form covariance update keeps the posterior symmetric PSD.
    """
    z, h, r = _measurement_model(det, cfg)
    innovation = z - h @ state.mean
    innovation[6] = wrap_angle(innovation[6])
    s = h @ state.cov @ h.T + r
    gain = np.linalg.solve(s.T, (state.cov @ h.T).T).T
    mean = state.mean + gain @ innovation
    mean[YAW] = wrap_angle(mean[YAW])
    ikh = np.eye(cfg.state_dim) - gain @ h
    cov = ikh @ state.cov @ ikh.T + gain @ r @ gain.T
    return KalmanState(mean=mean, cov=0.5 * (cov + cov.T))


def yaw_innovation(predicted_yaw: float, measured_yaw: float) -> float:
    """Wrapped yaw residual used by the update step."""
    return wrap_angle(measured_yaw - predicted_yaw)


def state_box(state: KalmanState) -> Box3D:
    """Box view of a filter state (velocity channels included)."""
    m = state.mean
    return Box3D(x=m[0], y=m[1], z=m[2], l=m[9], w=m[10], h=m[11],
                 yaw=m[12], vx=m[3], vy=m[4])


def update_score(score: TrackScore, confidence: float, cfg: MotionConfig) -> TrackScore:
    """Trajectory score update: reset to gamma_init when a confidence
    arrives right after a zero-confidence moment, otherwise accumulate
    theta * confidence; always clamped."""
    if not 0.0 <= confidence <= 1.0:
        raise ValueError(f"confidence must be in [0, 1], got {confidence}")
    if score.last_confidence == 0.0 and confidence != 0.0:
        gamma = cfg.gamma_init
    else:
        gamma = score.gamma + cfg.theta * confidence
    gamma = min(max(gamma, cfg.gamma_min), cfg.gamma_max)
    return TrackScore(gamma=gamma, last_confidence=confidence)


def motion_cost_matrix(detections: Sequence[Detection],
                       predicted_boxes: Sequence[Box3D],
                       gammas: Sequence[float]) -> np.ndarray:
    """Entry (i, j) = (1 - gIoU3D(det_i, track_j)) / gamma_j.

    Base cost lies in [0, 2); dividing by gamma makes low-reliability
    tracks (small gamma) more expensive to claim.
    """
    if len(predicted_boxes) != len(gammas):
        raise ValueError("one gamma per predicted track required")
    cost = np.zeros((len(detections), len(predicted_boxes)))
    for j, (box, gamma) in enumerate(zip(predicted_boxes, gammas)):
        if gamma <= 0:
            raise ValueError("track score gamma must be positive")
        for i, det in enumerate(detections):
            cost[i, j] = (1.0 - giou3d(det.box, box)) / gamma
    return cost
