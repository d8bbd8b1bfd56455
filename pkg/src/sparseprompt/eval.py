"""Episode pipeline and dataset evaluation.

``run_episode`` wires the stages together:

    encode -> match (per reference, union) -> project -> prune ->
    density lookup -> sparsify -> segment -> refine

Each stage appends its surviving point count to the trace, so prompt
attrition is observable and testable (counts never increase).
"""

from __future__ import annotations

import csv
import io
from dataclasses import dataclass
from pathlib import Path
from typing import Optional, Sequence, Tuple, Union

import numpy as np

from .backend import BackendError, EncoderBackend, SegmenterBackend
from .core import (
    BinaryMask,
    EmptyPointSetError,
    Episode,
    Image,
    PointSet,
    iou,
    point_in_mask,
)
from .density import (
    DensityCandidates,
    DensityVerdict,
    filter_foreground,
    lookup_reference_density,
    sample_reference_grid,
)
from .geometry import DEFAULT_MIN_KEEP, prune_boundary, sparsify
from .manifest import EpisodeRecord
from .matching import MatchConfig, match_points, project_to_image
from .pngio import atomic_write_bytes
from .refine import DEFAULT_KERNEL, StructuringElement, refine_mask

__all__ = [
    "SparsifyMode",
    "PipelineConfig",
    "EpisodeTrace",
    "EpisodeResult",
    "PipelineError",
    "run_episode",
    "EpisodeRow",
    "DatasetResult",
    "evaluate_dataset",
    "summarize_rows",
    "point_accuracy",
    "StudyRow",
    "density_sensitivity_study",
    "RESULT_COLUMNS",
    "write_results_csv",
    "write_class_summary_csv",
    "write_study_csv",
]

RESULT_COLUMNS = ("episode_id", "class", "selected_density", "n_matched", "n_pruned", "n_sparse", "iou")


@dataclass(frozen=True)
class SparsifyMode:
    """Sparsification toggle: ``off``, ``fixed`` (given density), or ``adaptive``."""

    kind: str = "adaptive"
    density: Optional[int] = None

    def __post_init__(self) -> None:
        if self.kind not in ("off", "fixed", "adaptive"):
            raise ValueError(f"kind must be off, fixed, or adaptive, got {self.kind!r}")
        if self.kind == "fixed":
            if self.density is None or self.density < 1:
                raise ValueError("fixed sparsification needs a density >= 1")
        elif self.density is not None:
            raise ValueError(f"{self.kind} sparsification takes no density")

    @classmethod
    def parse(cls, text: str) -> "SparsifyMode":
        """Parse ``off``, ``adaptive``, or ``fixed:<D>``."""
        if text == "off":
            return cls(kind="off")
        if text == "adaptive":
            return cls(kind="adaptive")
        if text.startswith("fixed:"):
            try:
                return cls(kind="fixed", density=int(text.split(":", 1)[1]))
            except ValueError:
                raise ValueError(f"bad fixed density in {text!r}") from None
        raise ValueError(f"sparsify mode must be off, adaptive, or fixed:<D>, got {text!r}")


@dataclass(frozen=True, eq=False)
class PipelineConfig:
    """Everything the pipeline needs besides the episode and backends."""

    match: MatchConfig = MatchConfig()
    candidates: DensityCandidates = DensityCandidates()
    kernel: StructuringElement = DEFAULT_KERNEL
    pruning: bool = True
    sparsification: SparsifyMode = SparsifyMode(kind="adaptive")
    refinement: bool = True
    min_keep: int = DEFAULT_MIN_KEEP


@dataclass(frozen=True)
class EpisodeTrace:
    """Ordered stage log: point counts leaving each point-bearing stage."""

    stages: Tuple[Tuple[str, int], ...]
    selected_density: Optional[int]

    def count_of(self, stage: str) -> int:
        for name, count in self.stages:
            if name == stage:
                return count
        raise KeyError(stage)

    @property
    def n_matched(self) -> int:
        return self.count_of("match")

    @property
    def n_pruned(self) -> int:
        return self.count_of("prune")

    @property
    def n_sparse(self) -> int:
        return self.count_of("sparsify")

    def to_dict(self) -> dict:
        return {
            "stages": [[name, count] for name, count in self.stages],
            "selected_density": self.selected_density,
        }


@dataclass(frozen=True, eq=False)
class EpisodeResult:
    mask: BinaryMask
    verdict: Optional[DensityVerdict]
    trace: EpisodeTrace
    iou_vs_gt: Optional[float]


class PipelineError(RuntimeError):
    """A pipeline stage failed; ``stage`` names the culprit."""

    def __init__(self, stage: str, message: str):
        super().__init__(f"{stage}: {message}")
        self.stage = stage


def _union_pointsets(sets: Sequence[PointSet]) -> PointSet:
    # concatenate in reference order, drop exact duplicates keeping first
    space = sets[0].space
    seen: set[tuple[float, float]] = set()
    rows = []
    for ps in sets:
        if ps.space != space:
            raise ValueError(f"cannot union point sets from {ps.space} and {space}")
        for p in ps:
            key = (p.x, p.y)
            if key not in seen:
                seen.add(key)
                rows.append(key)
    return PointSet(np.array(rows, dtype=np.float64).reshape(-1, 2), space)


def run_episode(
    episode: Episode,
    cfg: PipelineConfig,
    encoder: EncoderBackend,
    segmenter: SegmenterBackend,
) -> EpisodeResult:
    """Segment the episode's target; see the module docstring for the stages.

    Raises ``PipelineError`` labelled with the failing stage; matching
    that finds zero points and backend failures both surface this way.
    """

    def guard(stage: str, fn, *args, **kwargs):
        try:
            return fn(*args, **kwargs)
        except Exception as e:
            raise PipelineError(stage, str(e)) from e

    f_refs = [guard("encode", encoder.encode, img) for img, _ in episode.references]
    f_tgt = guard("encode", encoder.encode, episode.target)

    per_ref = [
        guard("match", match_points, f_ref, m_ref, f_tgt, cfg.match)
        for f_ref, (_, m_ref) in zip(f_refs, episode.references)
    ]
    matched = guard("match", _union_pointsets, per_ref)
    stages: list[tuple[str, int]] = [("match", len(matched))]

    projected = guard(
        "project", project_to_image, matched, episode.target.height, episode.target.width
    )

    pruned = guard("prune", prune_boundary, projected, cfg.min_keep) if cfg.pruning else projected
    stages.append(("prune", len(pruned)))

    verdict: Optional[DensityVerdict] = None
    selected: Optional[int] = None
    if cfg.sparsification.kind == "adaptive":
        verdict = guard(
            "density", lookup_reference_density, episode.references, cfg.candidates, segmenter
        )
        selected = verdict.selected
    elif cfg.sparsification.kind == "fixed":
        selected = cfg.sparsification.density

    prompts = guard("sparsify", sparsify, pruned, selected) if selected is not None else pruned
    stages.append(("sparsify", len(prompts)))

    mask = guard("segment", segmenter.segment, episode.target, prompts)
    if cfg.refinement:
        mask = guard("refine", refine_mask, mask, cfg.kernel)

    score = iou(mask, episode.target_gt) if episode.target_gt is not None else None
    trace = EpisodeTrace(stages=tuple(stages), selected_density=selected)
    return EpisodeResult(mask=mask, verdict=verdict, trace=trace, iou_vs_gt=score)


@dataclass(frozen=True)
class EpisodeRow:
    """One results-CSV row."""

    episode_id: str
    class_label: str
    selected_density: Optional[int]
    n_matched: int
    n_pruned: int
    n_sparse: int
    iou: Optional[float]

    @classmethod
    def from_result(cls, record: EpisodeRecord, result: EpisodeResult) -> "EpisodeRow":
        t = result.trace
        return cls(
            episode_id=record.episode_id,
            class_label=record.class_label,
            selected_density=t.selected_density,
            n_matched=t.n_matched,
            n_pruned=t.n_pruned,
            n_sparse=t.n_sparse,
            iou=result.iou_vs_gt,
        )


@dataclass(frozen=True, eq=False)
class DatasetResult:
    """Per-episode rows plus dataset and per-class aggregates (IoU as fractions)."""

    rows: Tuple[EpisodeRow, ...]
    mean_iou: float
    per_class: Tuple[Tuple[str, int, float], ...]  # (class, episode count, mean IoU)

    @property
    def miou_percent(self) -> float:
        return 100.0 * self.mean_iou


def summarize_rows(rows: Sequence[EpisodeRow]) -> DatasetResult:
    """Aggregate scored rows into dataset mean and per-class means."""
    if not rows:
        raise ValueError("nothing to summarize: no rows")
    missing = [r.episode_id for r in rows if r.iou is None]
    if missing:
        raise ValueError(f"episodes without ground truth cannot be scored: {missing}")
    mean = float(np.mean([r.iou for r in rows]))
    per_class: dict[str, list[float]] = {}
    for r in rows:
        per_class.setdefault(r.class_label, []).append(r.iou)
    classes = tuple(
        (name, len(scores), float(np.mean(scores))) for name, scores in sorted(per_class.items())
    )
    return DatasetResult(rows=tuple(rows), mean_iou=mean, per_class=classes)


def evaluate_dataset(
    records: Sequence[EpisodeRecord],
    cfg: PipelineConfig,
    encoder: EncoderBackend,
    segmenter: SegmenterBackend,
) -> DatasetResult:
    """Run every episode and aggregate. All episodes must carry ground truth."""
    missing = [r.episode_id for r in records if r.episode.target_gt is None]
    if missing:
        raise ValueError(f"evaluation requires target ground truth; missing for: {missing}")
    rows = [
        EpisodeRow.from_result(rec, run_episode(rec.episode, cfg, encoder, segmenter))
        for rec in records
    ]
    return summarize_rows(rows)


def point_accuracy(points: PointSet, gt: BinaryMask) -> float:
    """Fraction of points landing inside the ground truth."""
    if len(points) == 0:
        raise EmptyPointSetError("point accuracy of an empty point set")
    inside = sum(1 for p in points if point_in_mask(p, gt))
    return inside / len(points)


@dataclass(frozen=True)
class StudyRow:
    density: int
    n_points: int
    iou: float


def density_sensitivity_study(
    image: Image,
    gt: BinaryMask,
    densities: DensityCandidates,
    seg: SegmenterBackend,
) -> list[StudyRow]:
    """IoU as a function of prompt-grid density on one annotated image.

    Same per-density semantics as scoring a reference: grid, keep
    foreground points, segment, IoU against the annotation; densities
    whose filtered grid is empty score 0.0 without touching the backend.
    """
    rows = []
    for d in densities:
        grid = sample_reference_grid(image.height, image.width, d)
        prompts = filter_foreground(grid, gt)
        if len(prompts) == 0:
            rows.append(StudyRow(density=d, n_points=0, iou=0.0))
            continue
        try:
            predicted = seg.segment(image, prompts)
        except BackendError as e:
            raise BackendError(f"segmenter failed at density {d}: {e}") from e
        rows.append(StudyRow(density=d, n_points=len(prompts), iou=iou(predicted, gt)))
    return rows


def _fmt_float(v: Optional[float]) -> str:
    return "" if v is None else f"{v:.6f}"


def _csv_bytes(header: Sequence[str], rows: Sequence[Sequence]) -> bytes:
    buf = io.StringIO()
    writer = csv.writer(buf, lineterminator="\n")
    writer.writerow(header)
    writer.writerows(rows)
    return buf.getvalue().encode("ascii")


def write_results_csv(rows: Sequence[EpisodeRow], path: Union[str, Path]) -> None:
    """Fixed-column per-episode results, sorted by episode_id; bytes are
    deterministic for fixed inputs regardless of execution order."""
    out = [
        (
            r.episode_id,
            r.class_label,
            "" if r.selected_density is None else r.selected_density,
            r.n_matched,
            r.n_pruned,
            r.n_sparse,
            _fmt_float(r.iou),
        )
        for r in sorted(rows, key=lambda r: r.episode_id)
    ]
    atomic_write_bytes(_csv_bytes(RESULT_COLUMNS, out), path)


def write_class_summary_csv(result: DatasetResult, path: Union[str, Path]) -> None:
    rows = [(name, count, _fmt_float(mean)) for name, count, mean in result.per_class]
    rows.append(("__all__", len(result.rows), _fmt_float(result.mean_iou)))
    atomic_write_bytes(_csv_bytes(("class", "n_episodes", "mean_iou"), rows), path)


def write_study_csv(rows: Sequence[StudyRow], path: Union[str, Path]) -> None:
    out = [(r.density, r.n_points, _fmt_float(r.iou)) for r in rows]
    atomic_write_bytes(_csv_bytes(("density", "n_points", "iou"), out), path)
