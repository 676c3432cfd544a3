"""Well-formedness metrics, validation-calibrated filtering and reranking,
grid snapping, and layout-similarity measures.

Overlap / IoU / Alignment are lower-is-better. Filtering drops candidates
that exceed the validation mean on any metric; reranking multiplies the
per-metric survival probabilities (1 - empirical CDF) so better-formed
candidates score higher, then keeps the top half.
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass, replace
from typing import Sequence

import numpy as np
from scipy.optimize import linear_sum_assignment

from .core import ElementBox, MockupCandidate

GRID = 32

METRIC_NAMES = ("overlap", "iou", "alignment")


@dataclass(frozen=True)
class QualityScores:
    overlap: float
    iou: float
    alignment: float
    rerank_score: float = 0.0


def _bounds(elements: Sequence[ElementBox]):
    a = np.array([[el.x, el.y, el.x + el.w, el.y + el.h] for el in elements], dtype=np.float64)
    return a


def metric_overlap(elements: Sequence[ElementBox]) -> float:
    """Fraction of the unit screen covered by two or more elements.

    Exact: coordinate compression into cells, counting coverage per cell.
    """
    if len(elements) < 2:
        return 0.0
    b = _bounds(elements)
    xs = np.unique(np.concatenate([b[:, 0], b[:, 2]]))
    ys = np.unique(np.concatenate([b[:, 1], b[:, 3]]))
    counts = np.zeros((len(xs) - 1, len(ys) - 1), dtype=np.int32)
    for x0, y0, x1, y1 in b:
        i0, i1 = np.searchsorted(xs, x0), np.searchsorted(xs, x1)
        j0, j1 = np.searchsorted(ys, y0), np.searchsorted(ys, y1)
        counts[i0:i1, j0:j1] += 1
    cell_w = np.diff(xs)[:, None]
    cell_h = np.diff(ys)[None, :]
    return float(((counts >= 2) * cell_w * cell_h).sum())


def _pair_iou(a: np.ndarray, b: np.ndarray) -> float:
    ix = max(0.0, min(a[2], b[2]) - max(a[0], b[0]))
    iy = max(0.0, min(a[3], b[3]) - max(a[1], b[1]))
    inter = ix * iy
    if inter <= 0.0:
        return 0.0
    area_a = (a[2] - a[0]) * (a[3] - a[1])
    area_b = (b[2] - b[0]) * (b[3] - b[1])
    return inter / (area_a + area_b - inter)


def metric_iou(elements: Sequence[ElementBox]) -> float:
    """Mean intersection-over-union across all unordered element pairs."""
    n = len(elements)
    if n < 2:
        return 0.0
    b = _bounds(elements)
    total = 0.0
    for i in range(n):
        for j in range(i + 1, n):
            total += _pair_iou(b[i], b[j])
    return total / (n * (n - 1) / 2)


def metric_alignment(elements: Sequence[ElementBox]) -> float:
    """Mean over elements of the distance to the nearest alignment line of
    any other element (left/center/right and top/middle/bottom)."""
    n = len(elements)
    if n < 2:
        return 0.0
    lines = np.empty((n, 6), dtype=np.float64)
    for i, el in enumerate(elements):
        lines[i] = (el.x, el.x + el.w / 2.0, el.x + el.w,
                    el.y, el.y + el.h / 2.0, el.y + el.h)
    total = 0.0
    for i in range(n):
        diffs = np.abs(lines[i][None, :] - lines)  # same line type vs same line type
        diffs[i] = np.inf
        total += diffs.min()
    return total / n


def score_elements(elements: Sequence[ElementBox]) -> QualityScores:
    return QualityScores(
        overlap=metric_overlap(elements),
        iou=metric_iou(elements),
        alignment=metric_alignment(elements),
    )


# --- calibration ----------------------------------------------------------------


class MetricCalibration:
    """Validation-split statistics: per-metric mean (the filter threshold)
    and sorted sample (the empirical CDF support)."""

    def __init__(self, samples: dict[str, Sequence[float]]):
        for name in METRIC_NAMES:
            if name not in samples or len(samples[name]) == 0:
                raise ValueError(f"calibration needs a nonempty sample for {name!r}")
        self.samples = {k: np.sort(np.asarray(v, dtype=np.float64)) for k, v in samples.items()}
        self.means = {k: float(v.mean()) for k, v in self.samples.items()}
        self._supports = {}
        for name, vals in self.samples.items():
            uniq, inverse = np.unique(vals, return_inverse=True)
            if len(vals) == 1 or uniq.size == 1:
                self._supports[name] = (uniq, None)  # degenerate: step CDF
                continue
            positions = np.linspace(0.0, 1.0, len(vals))
            levels = np.zeros(uniq.size)
            np.add.at(levels, inverse, positions)
            levels /= np.bincount(inverse)
            self._supports[name] = (uniq, levels)

    def cdf(self, name: str, x: float) -> float:
        """Fraction of validation values <= x, linearly interpolated between
        support points (min maps to 0, max to 1); degenerate supports step."""
        uniq, levels = self._supports[name]
        if levels is None:
            return 0.0 if x < uniq[0] else 1.0
        return float(np.interp(x, uniq, levels))

    def to_json(self) -> str:
        return json.dumps({k: list(v) for k, v in self.samples.items()})

    @classmethod
    def from_json(cls, text: str) -> "MetricCalibration":
        return cls(json.loads(text))


def calibrate(leaf_views: Sequence[Sequence[ElementBox]]) -> MetricCalibration:
    """Metric statistics over validation leaf views."""
    if not leaf_views:
        raise ValueError("cannot calibrate on an empty validation split")
    samples = {name: [] for name in METRIC_NAMES}
    for elements in leaf_views:
        s = score_elements(elements)
        samples["overlap"].append(s.overlap)
        samples["iou"].append(s.iou)
        samples["alignment"].append(s.alignment)
    return MetricCalibration(samples)


def _scored(candidate: MockupCandidate) -> MockupCandidate:
    if candidate.scores is not None:
        return candidate
    return replace(candidate, scores=score_elements(candidate.elements))


def filter_candidates(candidates: Sequence[MockupCandidate],
                      cal: MetricCalibration) -> list[MockupCandidate]:
    """Keep candidates at or below the validation mean on every metric."""
    out = []
    for cand in candidates:
        cand = _scored(cand)
        s = cand.scores
        if (s.overlap <= cal.means["overlap"] and s.iou <= cal.means["iou"]
                and s.alignment <= cal.means["alignment"]):
            out.append(cand)
    return out


def rerank_candidates(candidates: Sequence[MockupCandidate],
                      cal: MetricCalibration) -> list[MockupCandidate]:
    """Score by the product of per-metric survival values (1 - CDF), sort
    descending, keep the top half (ceil)."""
    scored = []
    for cand in candidates:
        cand = _scored(cand)
        s = cand.scores
        score = 1.0
        for name in METRIC_NAMES:
            score *= 1.0 - cal.cdf(name, getattr(s, name))
        scored.append(replace(cand, scores=replace(s, rerank_score=score)))
    scored.sort(key=lambda c: -c.scores.rerank_score)
    return scored[: math.ceil(len(scored) / 2)] if scored else []


def snap_to_grid(candidate: MockupCandidate, grid: int = GRID) -> MockupCandidate:
    """Round geometry to the nearest 1/grid, flooring extents at one cell and
    keeping boxes on screen. Idempotent."""
    snapped = []
    for el in candidate.elements:
        w = max(math.floor(el.w * grid + 0.5), 1) / grid
        h = max(math.floor(el.h * grid + 0.5), 1) / grid
        w = min(w, 1.0)
        h = min(h, 1.0)
        x = math.floor(el.x * grid + 0.5) / grid
        y = math.floor(el.y * grid + 0.5) / grid
        x = min(max(x, 0.0), 1.0 - w)
        y = min(max(y, 0.0), 1.0 - h)
        snapped.append(replace(el, x=x, y=y, w=w, h=h))
    return replace(candidate, elements=tuple(snapped))


def postprocess(candidates: Sequence[MockupCandidate], cal: MetricCalibration,
                ) -> tuple[list[MockupCandidate], bool]:
    """filter -> rerank -> snap. When filtering removes everything, falls
    back to rerank-only and flags it."""
    kept = filter_candidates(candidates, cal)
    fallback = not kept and bool(candidates)
    pool = list(candidates) if fallback else kept
    reranked = rerank_candidates(pool, cal)
    return [snap_to_grid(c) for c in reranked], fallback


# --- layout similarity -------------------------------------------------------------


def _pair_weight(a: ElementBox, b: ElementBox, shape_coeff: float = 2.0) -> float:
    if a.class_id != b.class_id:
        return 0.0
    area = math.sqrt(min(a.area, b.area))
    pos = math.hypot(a.cx - b.cx, a.cy - b.cy)
    shape = abs(a.w - b.w) + abs(a.h - b.h)
    return area * (2.0 ** (-pos - shape_coeff * shape))


def docsim(a: Sequence[ElementBox], b: Sequence[ElementBox],
           shape_coeff: float = 2.0) -> float:
    """Maximum-weight matching similarity between two layouts.

    Same-class element pairs weigh sqrt(min area) * 2^(-distance - 2*shape
    difference); the matched total is normalized by the larger element count.
    """
    if not a or not b:
        return 0.0
    weights = np.zeros((len(a), len(b)))
    for i, ea in enumerate(a):
        for j, eb in enumerate(b):
            weights[i, j] = _pair_weight(ea, eb, shape_coeff)
    rows, cols = linear_sum_assignment(weights, maximize=True)
    return float(weights[rows, cols].sum()) / max(len(a), len(b))


def diversity(candidates: Sequence[MockupCandidate]) -> float:
    """Mean pairwise similarity within a set; lower means more diverse."""
    n = len(candidates)
    if n < 2:
        raise ValueError("diversity needs at least 2 candidates")
    total = 0.0
    for i in range(n):
        for j in range(i + 1, n):
            total += docsim(candidates[i].elements, candidates[j].elements)
    return total / (n * (n - 1) / 2)


def relevance(candidates: Sequence[MockupCandidate],
              ground_truth: Sequence[ElementBox]) -> float:
    """Best similarity between any candidate and the ground-truth layout."""
    if not candidates:
        raise ValueError("relevance needs at least 1 candidate")
    return max(docsim(c.elements, ground_truth) for c in candidates)


def metrics_table_tsv(rows: list[tuple[str, dict]]) -> str:
    """Well-formedness report: one method per row with IoU, Overlap,
    Alignment, Diversity and Relevance columns."""
    header = "method\tIoU\tOverlap\tAlignment\tDiversity\tRelevance"
    lines = [header]
    for label, vals in rows:
        cells = []
        for key in ("iou", "overlap", "alignment", "diversity", "relevance"):
            v = vals.get(key)
            cells.append("-" if v is None else f"{v:.4f}")
        lines.append(label + "\t" + "\t".join(cells))
    return "\n".join(lines) + "\n"
