"""Example-based bundle segmentation by rectangular linear assignment.

For each example bundle the target tractogram is pruned to a candidate
superset, three cost blocks are built (mean-of-closest ``D``, endpoint
``E``, ROI-based ``R``), normalized, fused with weights and solved as a
rectangular assignment. Runs over several examples are merged by vote.
"""
from __future__ import annotations

import logging
import math
from collections import Counter
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from typing import Sequence

import numpy as np

from . import metrics
from .core import Bundle, Tractogram
from .errors import DataError, ShapeError
from .lap import solve_rlap
from .metrics import RoiSet

logger = logging.getLogger(__name__)

NORMALIZATIONS = ("max", "range", "none")
_ALIASES = {"max-scale": "max", "range-scale": "range"}
STRICT_MAJORITY = "strict-majority"


@dataclass(frozen=True)
class CostWeights:
    lambda_d: float = 1.0
    lambda_e: float = 0.4
    lambda_r: float = 1.6

    def __post_init__(self):
        w = (self.lambda_d, self.lambda_e, self.lambda_r)
        if any(not math.isfinite(x) or x < 0 for x in w):
            raise ValueError(f"weights must be finite and non-negative, got {w}")
        if not any(x > 0 for x in w):
            raise ValueError("at least one weight must be positive")

    @classmethod
    def parse(cls, text: str) -> "CostWeights":
        parts = [p.strip() for p in text.split(",")]
        if len(parts) != 3:
            raise ValueError(f"expected three comma-separated weights, got {text!r}")
        return cls(*(float(p) for p in parts))

    def scaled(self, alpha: float) -> "CostWeights":
        return CostWeights(self.lambda_d * alpha, self.lambda_e * alpha, self.lambda_r * alpha)

    def __str__(self):
        return f"{self.lambda_d:g},{self.lambda_e:g},{self.lambda_r:g}"


BASELINE_WEIGHTS = CostWeights(1.0, 0.0, 0.0)


def normalize_mode(mode: str) -> str:
    mode = _ALIASES.get(mode, mode)
    if mode not in NORMALIZATIONS:
        raise ValueError(f"unknown normalization {mode!r}; choose from {NORMALIZATIONS}")
    return mode


@dataclass(frozen=True)
class SegmentationConfig:
    weights: CostWeights = field(default_factory=CostWeights)
    knn: int = 20
    normalization: str = "max"
    majority_threshold: int | str = STRICT_MAJORITY
    seed: int = 0

    def __post_init__(self):
        if int(self.knn) != self.knn or self.knn < 1:
            raise ValueError(f"knn must be a positive integer, got {self.knn}")
        object.__setattr__(self, "normalization", normalize_mode(self.normalization))
        t = self.majority_threshold
        if t != STRICT_MAJORITY and (isinstance(t, bool) or not isinstance(t, (int, np.integer)) or t < 1):
            raise ValueError(f"majority_threshold must be a positive int or {STRICT_MAJORITY!r}")

    @classmethod
    def baseline(cls, **kw) -> "SegmentationConfig":
        """Geometry-only configuration: weights (1, 0, 0), no normalization."""
        return cls(weights=BASELINE_WEIGHTS, normalization="none", **kw)

    def threshold_for(self, n_examples: int) -> int:
        if self.majority_threshold == STRICT_MAJORITY:
            return math.ceil(n_examples / 2)
        if self.majority_threshold > n_examples:
            raise ValueError(
                f"majority_threshold {self.majority_threshold} exceeds the number of examples ({n_examples})")
        return int(self.majority_threshold)


@dataclass(frozen=True)
class CostBlocks:
    """Raw ``D``, ``E``, ``R`` blocks for one example against its candidates."""

    candidates: np.ndarray
    D: np.ndarray
    E: np.ndarray
    R: np.ndarray


@dataclass(frozen=True)
class SingleResult:
    ids: frozenset
    total_cost: float
    candidates: tuple

    @property
    def candidate_count(self) -> int:
        return len(self.candidates)


@dataclass(frozen=True)
class SegmentationResult:
    selected_ids: frozenset
    per_example_ids: tuple
    per_example_cost: tuple
    per_example_candidates: tuple
    candidate_count: int
    threshold: int


# -- candidates ----------------------------------------------------------------

def _knn_union(dist: np.ndarray, k: int, knn: int) -> np.ndarray:
    m = dist.shape[1]
    order = np.argsort(dist, axis=1, kind="stable")
    while True:
        if knn >= m:
            return np.arange(m)
        union = np.unique(order[:, :knn])
        if union.size >= k:
            return union
        knn *= 2


def candidate_superset(t: Tractogram, example: Bundle, knn: int, *, kernels=None) -> list[int]:
    """Union of each example streamline's ``knn`` nearest tractogram streamlines
    under ``d_mc``, sorted by id. ``knn`` doubles until the union holds at
    least as many streamlines as the example."""
    if knn < 1:
        raise ValueError("knn must be >= 1")
    rows = example.resolve()
    dist = metrics.mc_matrix_packed(rows, t.packed, kernels=kernels)
    return _knn_union(dist, len(rows), int(knn)).tolist()


# -- cost blocks ---------------------------------------------------------------

def build_cost_blocks(example: Bundle, candidates: Sequence[int], t: Tractogram,
                      rois: RoiSet | None, *, kernels=None) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
    """``D``, ``E``, ``R`` blocks of shape ``(k, len(candidates))``.

    ``rois=None`` yields an all-zero ``R``.
    """
    if len(candidates) == 0:
        raise ShapeError("candidate list is empty")
    rows = example.resolve()
    cols = t.subset(candidates)
    D = metrics.mc_matrix(rows, cols, kernels=kernels)
    E = metrics.end_matrix(rows, cols)
    if rois is None:
        R = np.zeros_like(D)
    else:
        R = metrics.rois_matrix(rows, cols, rois)
    return D, E, R


def prepare_blocks(example: Bundle, t: Tractogram, rois: RoiSet | None, knn: int,
                   *, kernels=None) -> CostBlocks:
    """Candidate pruning plus block construction, reusing the full ``d_mc`` rows."""
    rows = example.resolve()
    dist = metrics.mc_matrix_packed(rows, t.packed, kernels=kernels)
    cand = _knn_union(dist, len(rows), int(knn))
    cols = t.subset(cand)
    D = np.ascontiguousarray(dist[:, cand])
    E = metrics.end_matrix(rows, cols)
    R = np.zeros_like(D) if rois is None else metrics.rois_matrix(rows, cols, rois)
    return CostBlocks(cand, D, E, R)


def normalize_block(m, mode: str = "max") -> np.ndarray:
    """Rescale a block: ``max`` divides by the maximum, ``range`` maps to
    ``[0, 1]``; degenerate blocks (max 0 / constant) pass through unchanged."""
    mode = normalize_mode(mode)
    m = np.asarray(m, dtype=np.float64)
    if mode == "none":
        return m
    if mode == "max":
        top = m.max()
        return m if top == 0 else m / top
    lo, hi = m.min(), m.max()
    return m if hi == lo else (m - lo) / (hi - lo)


def fuse(D, E, R, w: CostWeights, normalization: str = "max") -> np.ndarray:
    """Weighted sum of the normalized blocks."""
    D, E, R = (np.asarray(b, dtype=np.float64) for b in (D, E, R))
    if not (D.shape == E.shape == R.shape):
        raise ShapeError(f"block shapes differ: {D.shape}, {E.shape}, {R.shape}")
    # zero-weight blocks are skipped so the geometry-only case returns D itself
    c = w.lambda_d * normalize_block(D, normalization)
    if w.lambda_e:
        c = c + w.lambda_e * normalize_block(E, normalization)
    if w.lambda_r:
        c = c + w.lambda_r * normalize_block(R, normalization)
    return c


# -- segmentation --------------------------------------------------------------

def _check_rois(rois, cfg: SegmentationConfig):
    if rois is None and cfg.weights.lambda_r > 0:
        raise DataError("ROI set required when lambda_r > 0")


def assign_blocks(blocks: CostBlocks, cfg: SegmentationConfig, *, kernels=None) -> SingleResult:
    """Fuse precomputed blocks under ``cfg`` and solve the assignment."""
    C = fuse(blocks.D, blocks.E, blocks.R, cfg.weights, cfg.normalization)
    a = solve_rlap(C, kernels=kernels)
    ids = frozenset(int(blocks.candidates[j]) for j in a.row_to_col)
    return SingleResult(ids, a.total_cost, tuple(blocks.candidates.tolist()))


def segment_single(example: Bundle, t: Tractogram, rois: RoiSet | None,
                   cfg: SegmentationConfig, *, kernels=None) -> SingleResult:
    """Segment one bundle from ``t`` using a single example; returns exactly ``k`` ids."""
    _check_rois(rois, cfg)
    blocks = prepare_blocks(example, t, rois, cfg.knn, kernels=kernels)
    return assign_blocks(blocks, cfg, kernels=kernels)


def majority_vote(id_sets: Sequence[frozenset], threshold: int) -> frozenset:
    votes = Counter(i for s in id_sets for i in s)
    return frozenset(i for i, n in votes.items() if n >= threshold)


def segment_multi(examples: Sequence[Bundle], t: Tractogram, rois: RoiSet | None,
                  cfg: SegmentationConfig, *, jobs: int = 1, kernels=None) -> SegmentationResult:
    """Run :func:`segment_single` per example and keep ids chosen by at least
    ``cfg.threshold_for(len(examples))`` runs.

    Runs are independent; ``jobs > 1`` spreads them over threads (the compiled
    kernels release the GIL). Results do not depend on ``jobs``.
    """
    if not examples:
        raise DataError("at least one example bundle is required")
    _check_rois(rois, cfg)
    threshold = cfg.threshold_for(len(examples))

    def run(ex):
        return segment_single(ex, t, rois, cfg, kernels=kernels)

    if jobs > 1 and len(examples) > 1:
        with ThreadPoolExecutor(max_workers=min(jobs, len(examples))) as pool:
            runs = list(pool.map(run, examples))
    else:
        runs = [run(ex) for ex in examples]
    for i, r in enumerate(runs):
        logger.debug("example %d: cost=%.6g candidates=%d", i, r.total_cost, r.candidate_count)
    per_ids = tuple(r.ids for r in runs)
    return SegmentationResult(
        selected_ids=majority_vote(per_ids, threshold),
        per_example_ids=per_ids,
        per_example_cost=tuple(r.total_cost for r in runs),
        per_example_candidates=tuple(r.candidate_count for r in runs),
        candidate_count=len(set().union(*(r.candidates for r in runs))),
        threshold=threshold,
    )
