"""Synthetic scenario generation with an exact ground-truth oracle.

A scenario scripts object lifespans and kinematics on the ground plane,
occlusion episodes, sudden displacements, and a noise model (position
jitter, dropout, false positives). Generation is fully deterministic for
a (scenario, seed) pair and produces three aligned artifacts: per-frame
detections, the embedding sidecar, and the ground-truth annotations.

Embeddings are unit vectors, one base per identity (objects may share a
base via ``embedding_group`` to script appearance aliasing). Occluded
frames blend the base toward a shared distractor vector by the complement
of the standard occlusion weights (0, 0.3, 0.7); fully occluded frames
drop the detection entirely while the ground truth persists.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Optional

import numpy as np
import yaml

from .appearance import OcclusionState
from .geometry import Box3D, Detection, wrap_angle
from .metrics import GtAnnotation
from .tracker import DEFAULT_CATEGORIES

OCCLUSION_BLEND = (0.0, 0.3, 0.7, 1.0)

SCRIPT_KINDS = ("constant_velocity", "constant_acceleration", "turn", "stop_and_go")


@dataclass(frozen=True)
class MotionScript:
    kind: str = "constant_velocity"
    velocity: tuple[float, float] = (0.0, 0.0)
    acceleration: tuple[float, float] = (0.0, 0.0)
    speed: float = 0.0       # turn
    yaw_rate: float = 0.0    # turn (rad/s)
    period: int = 5          # stop_and_go frame count per phase

    def __post_init__(self):
        if self.kind not in SCRIPT_KINDS:
            raise ValueError(f"unknown motion script {self.kind!r}")
        if self.period < 1:
            raise ValueError("stop_and_go period must be at least 1")


@dataclass(frozen=True)
class ScriptedObject:
    category: str
    birth: int = 0
    death: Optional[int] = None  # exclusive; None runs to the last frame
    start: tuple[float, float, float] = (0.0, 0.0, 0.75)
    size: tuple[float, float, float] = (1.8, 4.2, 1.5)  # w, l, h
    yaw: float = 0.0
    motion: MotionScript = field(default_factory=MotionScript)
    embedding_group: Optional[int] = None


@dataclass(frozen=True)
class OcclusionEvent:
    object_index: int
    start: int
    end: int  # exclusive
    level: int

    def __post_init__(self):
        if not 0 <= self.level <= 3:
            raise ValueError("occlusion level must be in 0..3")


@dataclass(frozen=True)
class Jump:
    """Permanent positional offset applied from ``frame`` on."""

    object_index: int
    frame: int
    offset: tuple[float, float]


@dataclass(frozen=True)
class NoiseModel:
    position_sigma: float = 0.0
    dropout: float = 0.0
    fp_rate: float = 0.0
    fp_score: tuple[float, float] = (0.05, 0.3)
    det_score: tuple[float, float] = (1.0, 1.0)


@dataclass(frozen=True)
class Scenario:
    name: str
    frames: int
    dt: float = 0.1
    objects: tuple[ScriptedObject, ...] = ()
    occlusions: tuple[OcclusionEvent, ...] = ()
    jumps: tuple[Jump, ...] = ()
    noise: NoiseModel = field(default_factory=NoiseModel)
    embedding_dim: int = 16
    emit_velocity: bool = False
    bounds: tuple[tuple[float, float], tuple[float, float]] = ((-40.0, 40.0),
                                                               (-40.0, 40.0))

    def __post_init__(self):
        if self.frames < 1:
            raise ValueError("scenario needs at least one frame")
        for event in self.occlusions:
            if not 0 <= event.object_index < len(self.objects):
                raise ValueError(f"occlusion event references object {event.object_index}")
        for jump in self.jumps:
            if not 0 <= jump.object_index < len(self.objects):
                raise ValueError(f"jump references object {jump.object_index}")


@dataclass
class GeneratedData:
    """Aligned outputs of one generation run."""

    frames: list[list[Detection]]
    ground_truth: list[GtAnnotation]
    embeddings: np.ndarray
    embedding_indices: dict[int, list[Optional[int]]]


def object_pose(obj: ScriptedObject, frame: int, dt: float) -> tuple[float, float, float]:
    """Scripted (x, y, yaw) of an object at a frame, before jumps."""
    t = (frame - obj.birth) * dt
    x0, y0, _ = obj.start
    script = obj.motion
    if script.kind == "constant_velocity":
        return (x0 + script.velocity[0] * t, y0 + script.velocity[1] * t, obj.yaw)
    if script.kind == "constant_acceleration":
        ax, ay = script.acceleration
        return (x0 + script.velocity[0] * t + 0.5 * ax * t * t,
                y0 + script.velocity[1] * t + 0.5 * ay * t * t, obj.yaw)
    if script.kind == "turn":
        omega = script.yaw_rate
        yaw = wrap_angle(obj.yaw + omega * t)
        if abs(omega) < 1e-12:
            return (x0 + script.speed * math.cos(obj.yaw) * t,
                    y0 + script.speed * math.sin(obj.yaw) * t, yaw)
        radius = script.speed / omega
        return (x0 + radius * (math.sin(obj.yaw + omega * t) - math.sin(obj.yaw)),
                y0 - radius * (math.cos(obj.yaw + omega * t) - math.cos(obj.yaw)),
                yaw)
    # stop_and_go: alternate moving/stopped phases of `period` frames
    age = frame - obj.birth
    moving = sum(1 for f in range(age) if (f // script.period) % 2 == 0)
    t_moving = moving * dt
    return (x0 + script.velocity[0] * t_moving,
            y0 + script.velocity[1] * t_moving, obj.yaw)


def object_box(scenario: Scenario, index: int, frame: int) -> Box3D:
    obj = scenario.objects[index]
    x, y, yaw = object_pose(obj, frame, scenario.dt)
    for jump in scenario.jumps:
        if jump.object_index == index and frame >= jump.frame:
            x += jump.offset[0]
            y += jump.offset[1]
    w, l, h = obj.size
    vx = vy = None
    if scenario.emit_velocity:
        nxt = object_pose(obj, frame + 1, scenario.dt)
        vx = (nxt[0] - x) / scenario.dt
        vy = (nxt[1] - y) / scenario.dt
    return Box3D(x=x, y=y, z=obj.start[2], w=w, l=l, h=h, yaw=yaw, vx=vx, vy=vy)


def occlusion_level(scenario: Scenario, index: int, frame: int) -> int:
    level = 0
    for event in scenario.occlusions:
        if event.object_index == index and event.start <= frame < event.end:
            level = max(level, event.level)
    return level


def _unit(vec: np.ndarray) -> np.ndarray:
    return vec / np.linalg.norm(vec)


def generate(scenario: Scenario, seed: int,
             categories: dict[str, int] = DEFAULT_CATEGORIES) -> GeneratedData:
    """Deterministic detections + embeddings + ground truth for a seed."""
    for obj in scenario.objects:
        if obj.category not in categories:
            raise ValueError(f"scenario object category {obj.category!r} not in table")
    rng = np.random.default_rng(seed)
    dim = scenario.embedding_dim

    group_bases: dict[int, np.ndarray] = {}
    bases = []
    for i, obj in enumerate(scenario.objects):
        key = obj.embedding_group if obj.embedding_group is not None else -(i + 1)
        if key not in group_bases:
            group_bases[key] = _unit(rng.standard_normal(dim))
        bases.append(group_bases[key])
    distractor = _unit(rng.standard_normal(dim))

    noise = scenario.noise
    frames: list[list[Detection]] = []
    gts: list[GtAnnotation] = []
    vectors: list[np.ndarray] = []
    indices: dict[int, list[Optional[int]]] = {}

    for frame in range(scenario.frames):
        dets: list[Detection] = []
        det_indices: list[Optional[int]] = []
        for i, obj in enumerate(scenario.objects):
            death = obj.death if obj.death is not None else scenario.frames
            if not obj.birth <= frame < death:
                continue
            box = object_box(scenario, i, frame)
            gts.append(GtAnnotation(frame=frame, gt_id=i, category=categories[obj.category],
                                    box=box))
            level = occlusion_level(scenario, i, frame)
            # Draw the full noise budget every frame to keep the stream
            # independent of occlusion/dropout branching.
            jitter = rng.normal(0.0, 1.0, size=2)
            drop = rng.random()
            score = rng.uniform(noise.det_score[0], noise.det_score[1])
            if level >= OcclusionState.FULLY_OCCLUDED:
                continue
            if noise.dropout > 0.0 and drop < noise.dropout:
                continue
            beta = OCCLUSION_BLEND[level]
            embedding = _unit((1.0 - beta) * bases[i] + beta * distractor)
            det_box = Box3D(x=box.x + jitter[0] * noise.position_sigma,
                            y=box.y + jitter[1] * noise.position_sigma,
                            z=box.z, w=box.w, l=box.l, h=box.h, yaw=box.yaw,
                            vx=box.vx, vy=box.vy)
            vectors.append(embedding)
            det_indices.append(len(vectors) - 1)
            dets.append(Detection(box=det_box, score=score,
                                  category=categories[obj.category],
                                  embedding=embedding, occlusion=level))

        n_fp = int(rng.poisson(noise.fp_rate)) if noise.fp_rate > 0 else 0
        fp_categories = sorted({categories[o.category] for o in scenario.objects}) \
            or [min(categories.values())]
        for _ in range(n_fp):
            (x0, x1), (y0, y1) = scenario.bounds
            x = rng.uniform(x0, x1)
            y = rng.uniform(y0, y1)
            w = rng.uniform(0.5, 2.5)
            l = rng.uniform(0.5, 4.5)
            h = rng.uniform(0.8, 2.0)
            yaw = rng.uniform(-math.pi, math.pi)
            category = fp_categories[int(rng.integers(len(fp_categories)))]
            score = rng.uniform(noise.fp_score[0], noise.fp_score[1])
            embedding = _unit(rng.standard_normal(dim))
            vectors.append(embedding)
            det_indices.append(len(vectors) - 1)
            dets.append(Detection(box=Box3D(x=x, y=y, z=h / 2.0, w=w, l=l, h=h, yaw=yaw),
                                  score=score, category=category,
                                  embedding=embedding, occlusion=0))
        frames.append(dets)
        indices[frame] = det_indices

    embeddings = (np.stack(vectors) if vectors
                  else np.empty((0, dim)))
    return GeneratedData(frames=frames, ground_truth=gts, embeddings=embeddings,
                         embedding_indices=indices)


def scenario_from_mapping(data: dict) -> Scenario:
    """Build a Scenario from parsed YAML."""
    known = {"name", "frames", "dt", "objects", "occlusions", "jumps", "noise",
             "embedding_dim", "emit_velocity", "bounds"}
    unknown = set(data) - known
    if unknown:
        raise ValueError(f"unknown scenario key {sorted(unknown)[0]!r}")

    objects = []
    for spec in data.get("objects", []):
        spec = dict(spec)
        motion_spec = dict(spec.pop("motion", {}))
        for key in ("velocity", "acceleration"):
            if key in motion_spec:
                motion_spec[key] = tuple(motion_spec[key])
        for key in ("start", "size"):
            if key in spec:
                spec[key] = tuple(spec[key])
        objects.append(ScriptedObject(motion=MotionScript(**motion_spec), **spec))
    occlusions = [OcclusionEvent(**dict(spec)) for spec in data.get("occlusions", [])]
    jumps = []
    for spec in data.get("jumps", []):
        spec = dict(spec)
        spec["offset"] = tuple(spec["offset"])
        jumps.append(Jump(**spec))
    noise_spec = dict(data.get("noise", {}))
    for key in ("fp_score", "det_score"):
        if key in noise_spec:
            noise_spec[key] = tuple(noise_spec[key])
    bounds = data.get("bounds")
    return Scenario(
        name=data.get("name", "scenario"),
        frames=data["frames"],
        dt=data.get("dt", 0.1),
        objects=tuple(objects),
        occlusions=tuple(occlusions),
        jumps=tuple(jumps),
        noise=NoiseModel(**noise_spec),
        embedding_dim=data.get("embedding_dim", 16),
        emit_velocity=data.get("emit_velocity", False),
        bounds=tuple(tuple(b) for b in bounds) if bounds else Scenario.bounds)


def load_scenario(path) -> Scenario:
    with open(path, "r", encoding="utf-8") as fh:
        data = yaml.safe_load(fh)
    if not isinstance(data, dict):
        raise ValueError(f"{path}: scenario file must be a mapping")
    try:
        return scenario_from_mapping(data)
    except (TypeError, ValueError, KeyError) as exc:
        raise ValueError(f"{path}: {exc}") from None
