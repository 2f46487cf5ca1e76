"""Ablation grid over association modules, feature strategies, cascade
order and category gating.

Each cell rewrites the base tracker configuration, runs the tracker over
every (scenario, seed) pair, evaluates HOTA/MOTA/IDS against the scenario
ground truth, and reports medians across runs. Cells are independent and
may execute in parallel; results are keyed and sorted, so output is
identical regardless of scheduling.
"""

from __future__ import annotations

import concurrent.futures
import statistics
from dataclasses import dataclass, replace
from typing import Optional, Sequence

from . import metrics as metrics_mod
from .metrics import GtAnnotation, PredRecord
from .scenario import Scenario, generate
from .tracker import FrameResult, Tracker, TrackerConfig

MODULE_CHOICES = ("mo", "ap", "mo_ap", "mo_ap_occ")


@dataclass(frozen=True)
class AblationCell:
    """One grid point: which modules run, how track features are chosen,
    the cascade order, and whether the category gate is active."""

    label: str
    modules: str = "mo_ap_occ"
    strategy: str = "OCC"
    order: str = "mo_ap"  # "mo_ap" = motion first
    gating: bool = True

    def configure(self, base: TrackerConfig) -> TrackerConfig:
        if self.modules not in MODULE_CHOICES:
            raise ValueError(f"unknown module selection {self.modules!r}")
        cfg = replace(base)
        cfg.category_gating = self.gating
        if self.modules == "mo":
            cfg.association_mode = "mo"
        elif self.modules == "ap":
            cfg.association_mode = "ap"
            cfg.feature_strategy = replace(cfg.feature_strategy, variant=self.strategy)
        elif self.modules == "mo_ap":
            # Fused but occlusion-blind: plain last-frames averaging.
            cfg.association_mode = self.order
            cfg.feature_strategy = replace(cfg.feature_strategy, variant="LTF")
        else:
            cfg.association_mode = self.order
            cfg.feature_strategy = replace(cfg.feature_strategy, variant=self.strategy)
        return cfg.validate()


def default_grid() -> list[AblationCell]:
    return [
        AblationCell(label="MO", modules="mo"),
        AblationCell(label="AP", modules="ap"),
        AblationCell(label="AP+MO", modules="mo_ap"),
        AblationCell(label="AP+MO+OCC", modules="mo_ap_occ", strategy="OCC"),
        AblationCell(label="AP+MO+OCC/LTF+OCC", modules="mo_ap_occ", strategy="LTF_OCC"),
        AblationCell(label="AP+MO+OCC/AP>MO", modules="mo_ap_occ", order="ap_mo"),
        AblationCell(label="AP+MO+OCC/NCL", modules="mo_ap_occ", gating=False),
    ]


@dataclass
class RunMetrics:
    hota: float
    mota: float
    ids: int


@dataclass
class AblationRow:
    label: str
    hota: float
    mota: float
    ids: float
    runs: int


@dataclass
class AblationTable:
    rows: list[AblationRow]

    def format_text(self) -> str:
        lines = [f"{'cell':<20} {'HOTA':>8} {'MOTA':>8} {'IDS':>6} {'runs':>5}"]
        for row in self.rows:
            lines.append(f"{row.label:<20} {row.hota:>8.4f} {row.mota:>8.4f} "
                         f"{row.ids:>6.1f} {row.runs:>5d}")
        return "\n".join(lines) + "\n"

    def to_tsv(self) -> str:
        lines = ["cell\thota\tmota\tids\truns"]
        for row in self.rows:
            lines.append(f"{row.label}\t{row.hota:.6f}\t{row.mota:.6f}\t"
                         f"{row.ids:.1f}\t{row.runs}")
        return "\n".join(lines) + "\n"


def pred_records_from_results(results: Sequence[FrameResult]) -> list[PredRecord]:
    """Flatten tracker frame results into evaluation records."""
    records = []
    for result in results:
        for out in result.outputs:
            records.append(PredRecord(frame=result.frame, pred_id=out.track_id,
                                      category=out.category, box=out.box,
                                      score=out.score))
    return records


def run_tracker(frames, config: TrackerConfig) -> list[FrameResult]:
    return Tracker(config).run_sequence(frames)


def evaluate_run(gts: Sequence[GtAnnotation], preds: Sequence[PredRecord],
                 match_threshold: float = 0.25) -> RunMetrics:
    """Category-macro HOTA/MOTA and summed identity switches for one run."""
    categories = sorted({g.category for g in gts})
    hotas, motas, ids = [], [], 0
    for cat in categories:
        cat_gts = [g for g in gts if g.category == cat]
        cat_preds = [p for p in preds if p.category == cat]
        clear = metrics_mod.clear_mot(cat_gts, cat_preds, match_threshold)
        hotas.append(metrics_mod.hota(cat_gts, cat_preds))
        motas.append(clear.mota)
        ids += clear.ids
    n = max(len(categories), 1)
    return RunMetrics(hota=sum(hotas) / n if hotas else 0.0,
                      mota=sum(motas) / n if motas else 0.0, ids=ids)


def _run_cell_task(args):
    cell, scenario, seed, base_config, match_threshold = args
    config = cell.configure(base_config)
    data = generate(scenario, seed, categories=config.categories)
    results = run_tracker(data.frames, config)
    run = evaluate_run(data.ground_truth, pred_records_from_results(results),
                       match_threshold)
    return (cell.label, scenario.name, seed), run


def run_ablation(scenarios: Sequence[Scenario], seeds: Sequence[int],
                 base_config: TrackerConfig,
                 grid: Optional[Sequence[AblationCell]] = None,
                 match_threshold: float = 0.25,
                 jobs: int = 1) -> AblationTable:
    """Run every grid cell over every (scenario, seed) pair and aggregate
    medians per cell."""
    grid = list(grid) if grid is not None else default_grid()
    tasks = [(cell, scenario, seed, base_config, match_threshold)
             for cell in grid for scenario in scenarios for seed in seeds]
    results: dict[tuple, RunMetrics] = {}
    if jobs > 1:
        with concurrent.futures.ProcessPoolExecutor(max_workers=jobs) as pool:
            for key, run in pool.map(_run_cell_task, tasks):
                results[key] = run
    else:
        for task in tasks:
            key, run = _run_cell_task(task)
            results[key] = run

    rows = []
    for cell in grid:
        runs = [run for key, run in sorted(results.items())
                if key[0] == cell.label]
        rows.append(AblationRow(
            label=cell.label,
            hota=statistics.median(r.hota for r in runs),
            mota=statistics.median(r.mota for r in runs),
            ids=statistics.median(r.ids for r in runs),
            runs=len(runs)))
    return AblationTable(rows=rows)
