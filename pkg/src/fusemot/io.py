"""Plain-text file formats and configuration loading.

All data files are whitespace-delimited text with ``#`` comment lines;
floats are written with 12 significant digits so that write/load
round-trips are lossless. Absent optional fields are written as ``-``.

detections (14 columns)::

    frame category score x y z w l h yaw vx vy emb occ

``emb`` is a row index into the embeddings sidecar, ``occ`` an occlusion
level 0-3. The sidecar is binary: a one-line ASCII header ``dim count``
followed by count*dim little-endian float32 values.

ground truth (10 columns)::

    frame gt_id category x y z w l h yaw

tracks (12 columns)::

    frame track_id category score x y z w l h yaw source

``source`` is ``U`` for updated, ``P`` for predicted states. Rows are
sorted by (frame, track_id).

Tracker configuration is YAML: a ``profile`` name (kitti, nuscenes or
synthetic) plus per-key overrides, validated against the config
invariants.
"""

from __future__ import annotations

from dataclasses import replace
from typing import Optional, Sequence

import numpy as np
import yaml

from .geometry import Box3D, Detection
from .metrics import GtAnnotation, PredRecord
from .tracker import PROFILES, FrameResult, TrackerConfig

FLOAT_FMT = "%.12g"


class FileFormatError(ValueError):
    """Malformed row, with file path and 1-based line number."""

    def __init__(self, path, line_number, message):
        super().__init__(f"{path}:{line_number}: {message}")
        self.path = path
        self.line_number = line_number


def _fmt(value: float) -> str:
    return FLOAT_FMT % value


def _data_lines(path):
    with open(path, "r", encoding="utf-8") as fh:
        for number, raw in enumerate(fh, start=1):
            line = raw.strip()
            if not line or line.startswith("#"):
                continue
            yield number, line.split()


def _parse_float(path, number, token, name):
    try:
        return float(token)
    except ValueError:
        raise FileFormatError(path, number, f"bad {name} value {token!r}") from None


def _parse_int(path, number, token, name):
    try:
        return int(token)
    except ValueError:
        raise FileFormatError(path, number, f"bad {name} value {token!r}") from None


def _parse_category(path, number, token, categories):
    if token not in categories:
        known = ", ".join(sorted(categories))
        raise FileFormatError(path, number,
                              f"unknown category {token!r} (known: {known})")
    return categories[token]


def load_detections(path, categories: dict[str, int],
                    embeddings: Optional[np.ndarray] = None) -> list[list[Detection]]:
    """Detections grouped by frame, empty lists filling frame gaps."""
    frames: dict[int, list[Detection]] = {}
    for number, fields in _data_lines(path):
        if len(fields) != 14:
            raise FileFormatError(path, number,
                                  f"expected 14 fields, got {len(fields)}")
        frame = _parse_int(path, number, fields[0], "frame")
        if frame < 0:
            raise FileFormatError(path, number, "frame must be non-negative")
        category = _parse_category(path, number, fields[1], categories)
        score = _parse_float(path, number, fields[2], "score")
        if not 0.0 <= score <= 1.0:
            raise FileFormatError(path, number, f"score {score} outside [0, 1]")
        x, y, z, w, l, h, yaw = (_parse_float(path, number, t, n) for t, n in
                                 zip(fields[3:10], ("x", "y", "z", "w", "l", "h", "yaw")))
        vx = vy = None
        if fields[10] != "-" or fields[11] != "-":
            vx = _parse_float(path, number, fields[10], "vx")
            vy = _parse_float(path, number, fields[11], "vy")
        embedding = None
        if fields[12] != "-":
            index = _parse_int(path, number, fields[12], "embedding index")
            if embeddings is None:
                raise FileFormatError(path, number,
                                      "row references an embedding but no embeddings were loaded")
            if not 0 <= index < len(embeddings):
                raise FileFormatError(path, number,
                                      f"embedding index {index} out of range")
            embedding = embeddings[index]
        occlusion = 0
        if fields[13] != "-":
            occlusion = _parse_int(path, number, fields[13], "occlusion")
            if not 0 <= occlusion <= 3:
                raise FileFormatError(path, number,
                                      f"occlusion level {occlusion} outside 0..3")
        try:
            box = Box3D(x=x, y=y, z=z, w=w, l=l, h=h, yaw=yaw, vx=vx, vy=vy)
            det = Detection(box=box, score=score, category=category,
                            embedding=embedding, occlusion=occlusion)
        except ValueError as exc:
            raise FileFormatError(path, number, str(exc)) from None
        frames.setdefault(frame, []).append(det)
    if not frames:
        return []
    max_frame = max(frames)
    return [frames.get(f, []) for f in range(max_frame + 1)]


def write_detections(frames: Sequence[Sequence[Detection]], path,
                     categories: dict[str, int],
                     embedding_indices: Optional[dict[int, list[Optional[int]]]] = None) -> None:
    """Inverse of load_detections. ``embedding_indices`` maps frame index
    to one sidecar row index (or None) per detection."""
    tokens = {v: k for k, v in categories.items()}
    with open(path, "w", encoding="utf-8") as fh:
        fh.write("# frame category score x y z w l h yaw vx vy emb occ\n")
        for frame, dets in enumerate(frames):
            for i, det in enumerate(dets):
                b = det.box
                vx = _fmt(b.vx) if b.vx is not None else "-"
                vy = _fmt(b.vy) if b.vy is not None else "-"
                emb = "-"
                if embedding_indices is not None:
                    index = embedding_indices.get(frame, [None] * len(dets))[i]
                    if index is not None:
                        emb = str(index)
                fh.write(" ".join([
                    str(frame), tokens[det.category], _fmt(det.score),
                    _fmt(b.x), _fmt(b.y), _fmt(b.z),
                    _fmt(b.w), _fmt(b.l), _fmt(b.h), _fmt(b.yaw),
                    vx, vy, emb, str(det.occlusion)]) + "\n")


def write_embeddings(vectors: np.ndarray, path) -> None:
    """Binary sidecar: one-line ASCII header ``dim count`` then float32 LE."""
    arr = np.asarray(vectors, dtype="<f4")
    if arr.ndim != 2:
        raise ValueError("embeddings must be a 2-D (count, dim) array")
    with open(path, "wb") as fh:
        fh.write(f"{arr.shape[1]} {arr.shape[0]}\n".encode("ascii"))
        fh.write(arr.tobytes())


def load_embeddings(path) -> np.ndarray:
    with open(path, "rb") as fh:
        header = fh.readline().decode("ascii").split()
        if len(header) != 2:
            raise FileFormatError(path, 1, "embedding header must be 'dim count'")
        dim, count = int(header[0]), int(header[1])
        data = np.frombuffer(fh.read(), dtype="<f4")
    if data.size != dim * count:
        raise FileFormatError(path, 1,
                              f"expected {dim * count} floats, found {data.size}")
    return data.reshape(count, dim).astype(float)


def load_ground_truth(path, categories: dict[str, int]) -> list[GtAnnotation]:
    records = []
    for number, fields in _data_lines(path):
        if len(fields) != 10:
            raise FileFormatError(path, number,
                                  f"expected 10 fields, got {len(fields)}")
        frame = _parse_int(path, number, fields[0], "frame")
        gt_id = _parse_int(path, number, fields[1], "gt_id")
        category = _parse_category(path, number, fields[2], categories)
        x, y, z, w, l, h, yaw = (_parse_float(path, number, t, n) for t, n in
                                 zip(fields[3:10], ("x", "y", "z", "w", "l", "h", "yaw")))
        try:
            box = Box3D(x=x, y=y, z=z, w=w, l=l, h=h, yaw=yaw)
        except ValueError as exc:
            raise FileFormatError(path, number, str(exc)) from None
        records.append(GtAnnotation(frame=frame, gt_id=gt_id, category=category, box=box))
    _check_unique(path, [(r.frame, r.gt_id) for r in records], "(frame, gt_id)")
    records.sort(key=lambda r: (r.frame, r.gt_id))
    return records


def write_ground_truth(records: Sequence[GtAnnotation], path,
                       categories: dict[str, int]) -> None:
    tokens = {v: k for k, v in categories.items()}
    rows = sorted(records, key=lambda r: (r.frame, r.gt_id))
    with open(path, "w", encoding="utf-8") as fh:
        fh.write("# frame gt_id category x y z w l h yaw\n")
        for r in rows:
            b = r.box
            fh.write(" ".join([str(r.frame), str(r.gt_id), tokens[r.category],
                               _fmt(b.x), _fmt(b.y), _fmt(b.z),
                               _fmt(b.w), _fmt(b.l), _fmt(b.h), _fmt(b.yaw)]) + "\n")


SOURCE_FLAGS = {"updated": "U", "predicted": "P"}
FLAG_SOURCES = {v: k for k, v in SOURCE_FLAGS.items()}


def write_tracks(results: Sequence[FrameResult], path,
                 categories: dict[str, int]) -> None:
    """Track output rows sorted by (frame, track_id)."""
    tokens = {v: k for k, v in categories.items()}
    rows = []
    for result in results:
        for out in result.outputs:
            rows.append((result.frame, out.track_id, out))
    rows.sort(key=lambda r: (r[0], r[1]))
    with open(path, "w", encoding="utf-8") as fh:
        fh.write("# frame track_id category score x y z w l h yaw source\n")
        for frame, track_id, out in rows:
            b = out.box
            fh.write(" ".join([str(frame), str(track_id), tokens[out.category],
                               _fmt(out.score),
                               _fmt(b.x), _fmt(b.y), _fmt(b.z),
                               _fmt(b.w), _fmt(b.l), _fmt(b.h), _fmt(b.yaw),
                               SOURCE_FLAGS[out.source]]) + "\n")


def load_tracks(path, categories: dict[str, int]) -> list[tuple[PredRecord, str]]:
    """Track rows as (record, source) pairs, source 'updated'/'predicted'."""
    records = []
    for number, fields in _data_lines(path):
        if len(fields) != 12:
            raise FileFormatError(path, number,
                                  f"expected 12 fields, got {len(fields)}")
        frame = _parse_int(path, number, fields[0], "frame")
        track_id = _parse_int(path, number, fields[1], "track_id")
        category = _parse_category(path, number, fields[2], categories)
        score = _parse_float(path, number, fields[3], "score")
        x, y, z, w, l, h, yaw = (_parse_float(path, number, t, n) for t, n in
                                 zip(fields[4:11], ("x", "y", "z", "w", "l", "h", "yaw")))
        if fields[11] not in FLAG_SOURCES:
            raise FileFormatError(path, number, f"bad source flag {fields[11]!r}")
        try:
            box = Box3D(x=x, y=y, z=z, w=w, l=l, h=h, yaw=yaw)
        except ValueError as exc:
            raise FileFormatError(path, number, str(exc)) from None
        records.append((PredRecord(frame=frame, pred_id=track_id, category=category,
                                   box=box, score=score),
                        FLAG_SOURCES[fields[11]]))
    _check_unique(path, [(r.frame, r.pred_id) for r, _ in records], "(frame, track_id)")
    records.sort(key=lambda rec: (rec[0].frame, rec[0].pred_id))
    return records


def _check_unique(path, keys, what):
    seen = set()
    for key in keys:
        if key in seen:
            raise FileFormatError(path, 0, f"duplicate {what} pair {key}")
        seen.add(key)


_STRATEGY_KEYS = {"variant", "occlusion_weights", "window"}
_MOTION_KEYS = {"dt", "q_pos", "q_vel", "q_acc", "q_dims", "q_yaw", "r_pos",
                "r_dims", "r_yaw", "r_vel", "init_cov_inflation", "theta",
                "gamma_init", "gamma_min", "gamma_max", "extra_dims"}
_TOP_KEYS = {"profile", "theta_nms", "theta_csf", "theta_mo", "theta_app",
             "theta_del", "max_age", "max_predicted_emission",
             "predicted_score_factor", "output_nms_threshold", "memory_depth",
             "feature_strategy", "motion", "categories", "association_mode",
             "category_gating"}


def config_from_mapping(data: dict) -> TrackerConfig:
    """Build a validated TrackerConfig from a profile plus overrides."""
    if not isinstance(data, dict):
        raise ValueError("config must be a mapping")
    unknown = set(data) - _TOP_KEYS
    if unknown:
        raise ValueError(f"unknown config key {sorted(unknown)[0]!r}")
    profile = data.get("profile", "kitti")
    if profile not in PROFILES:
        raise ValueError(f"unknown profile {profile!r} (known: {sorted(PROFILES)})")
    cfg = PROFILES[profile]()

    if "feature_strategy" in data:
        spec = dict(data["feature_strategy"])
        unknown = set(spec) - _STRATEGY_KEYS
        if unknown:
            raise ValueError(f"unknown feature_strategy key {sorted(unknown)[0]!r}")
        if "occlusion_weights" in spec:
            spec["occlusion_weights"] = tuple(spec["occlusion_weights"])
        cfg.feature_strategy = replace(cfg.feature_strategy, **spec)
    if "motion" in data:
        spec = dict(data["motion"])
        unknown = set(spec) - _MOTION_KEYS
        if unknown:
            raise ValueError(f"unknown motion key {sorted(unknown)[0]!r}")
        cfg.motion = replace(cfg.motion, **spec)
    if "categories" in data:
        table = data["categories"]
        if (not isinstance(table, dict) or not table
                or not all(isinstance(v, int) for v in table.values())):
            raise ValueError("categories must map tokens to integer ids")
        cfg.categories = dict(table)

    for key in _TOP_KEYS - {"profile", "feature_strategy", "motion", "categories"}:
        if key in data:
            setattr(cfg, key, data[key])
    try:
        return cfg.validate()
    except ValueError as exc:
        raise ValueError(f"invalid config: {exc}") from None


def load_config(path) -> TrackerConfig:
    with open(path, "r", encoding="utf-8") as fh:
        data = yaml.safe_load(fh) or {}
    return config_from_mapping(data)
