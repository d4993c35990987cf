"""Streamline distances: mean of closest points, endpoint, and ROI-based.

The scalar functions are written directly from their definitions and serve
as the reference; the ``*_matrix`` functions compute whole blocks and are
what the segmentation pipeline uses.
"""
from __future__ import annotations

from dataclasses import dataclass
from typing import Sequence

import numpy as np
from scipy.spatial import cKDTree

from . import _backend
from .core import RoiMask, Streamline, pack
from .errors import EmptyRoi, InvalidStreamline


@dataclass(frozen=True)
class RoiSet:
    """Ordered, non-empty collection of ROI masks describing one bundle."""

    rois: tuple

    def __post_init__(self):
        rois = tuple(self.rois)
        if not rois:
            raise EmptyRoi("a RoiSet needs at least one ROI")
        for r in rois:
            if not isinstance(r, RoiMask):
                raise TypeError(f"expected RoiMask, got {type(r).__name__}")
        object.__setattr__(self, "rois", rois)

    def __len__(self):
        return len(self.rois)

    def __iter__(self):
        return iter(self.rois)


def _points(s) -> np.ndarray:
    if isinstance(s, Streamline):
        return s.points
    return Streamline(s).points


def _pairwise(a: np.ndarray, b: np.ndarray) -> np.ndarray:
    diff = a[:, None, :] - b[None, :, :]
    return np.sqrt((diff ** 2).sum(axis=-1))


def directed_mean_closest(sa, sb) -> float:
    """Mean over the points of ``sa`` of the distance to the nearest point of ``sb``."""
    return float(_pairwise(_points(sa), _points(sb)).min(axis=1).mean())


def d_mc(sa, sb) -> float:
    """Symmetric mean-of-closest-points distance (mm)."""
    a, b = _points(sa), _points(sb)
    dist = _pairwise(a, b)
    return 0.5 * (float(dist.min(axis=1).mean()) + float(dist.min(axis=0).mean()))


def d_end(sa, sb) -> float:
    """Endpoint distance.

    In each direction, every endpoint of one streamline takes its nearer
    endpoint of the other independently (both may pick the same one) and
    the two minima are averaged. The result is the mean of both directions,
    which makes it symmetric.
    """
    a, b = _points(sa), _points(sb)
    diff = a[[0, -1], None, :] - b[None, [0, -1], :]
    dist = np.sqrt((diff ** 2).sum(axis=-1))
    return float((dist.min(axis=1).sum() + dist.min(axis=0).sum()) / 4.0)


def d_min_roi(s, roi: RoiMask) -> float:
    """Smallest distance between any point of ``s`` and any voxel centre of ``roi``."""
    if not isinstance(roi, RoiMask) or len(roi) == 0:
        raise EmptyRoi("ROI mask has no voxels")
    return float(_pairwise(_points(s), roi.centers).min())


def roi_score(s, rois: RoiSet) -> float:
    """Mean of :func:`d_min_roi` over the ROIs of the set."""
    return float(np.mean([d_min_roi(s, r) for r in rois]))


def d_rois(sa, sb, rois: RoiSet) -> float:
    """Absolute difference of the two streamlines' mean ROI distances."""
    if not isinstance(rois, RoiSet):
        rois = RoiSet(tuple(rois))
    return abs(roi_score(sa, rois) - roi_score(sb, rois))


# -- block versions ---------------------------------------------------------

def _packed(streamlines: Sequence[Streamline]):
    for s in streamlines:
        if not isinstance(s, Streamline):
            raise InvalidStreamline(f"expected Streamline, got {type(s).__name__}")
    return pack(streamlines)


def mc_matrix(rows: Sequence[Streamline], cols: Sequence[Streamline], kernels=None) -> np.ndarray:
    """``D[i, j] = d_mc(rows[i], cols[j])`` via the active kernel backend."""
    kernels = kernels or _backend.kernels
    pa, oa = _packed(rows)
    pb, ob = _packed(cols)
    return kernels.mc_block(pa, oa, pb, ob)


def mc_matrix_packed(rows: Sequence[Streamline], packed_cols, kernels=None) -> np.ndarray:
    """Like :func:`mc_matrix` but against an already packed column set."""
    kernels = kernels or _backend.kernels
    pa, oa = _packed(rows)
    return kernels.mc_block(pa, oa, *packed_cols)


def _endpoints(streamlines: Sequence[Streamline]) -> np.ndarray:
    return np.stack([s.points[[0, -1]] for s in streamlines])


def end_matrix(rows: Sequence[Streamline], cols: Sequence[Streamline]) -> np.ndarray:
    """``E[i, j] = d_end(rows[i], cols[j])``."""
    ea, eb = _endpoints(rows), _endpoints(cols)
    # dist[i, j, p, q]: endpoint p of row i to endpoint q of column j
    diff = ea[:, None, :, None, :] - eb[None, :, None, :, :]
    dist = np.sqrt((diff ** 2).sum(axis=-1))
    return (dist.min(axis=3).sum(axis=2) + dist.min(axis=2).sum(axis=2)) / 4.0


def roi_profile(streamlines: Sequence[Streamline], rois: RoiSet) -> np.ndarray:
    """Mean ROI distance of every streamline (the scalar that ``d_rois`` compares)."""
    if not isinstance(rois, RoiSet):
        rois = RoiSet(tuple(rois))
    points, offsets = _packed(streamlines)
    starts = offsets[:-1]
    acc = np.zeros(len(streamlines))
    for roi in rois:
        nearest, _ = cKDTree(roi.centers).query(points, k=1)
        acc += np.minimum.reduceat(nearest, starts)
    return acc / len(rois)


def rois_matrix(rows: Sequence[Streamline], cols: Sequence[Streamline], rois: RoiSet) -> np.ndarray:
    """``R[i, j] = d_rois(rows[i], cols[j], rois)``."""
    fa = roi_profile(rows, rois)
    fb = roi_profile(cols, rois)
    return np.abs(fa[:, None] - fb[None, :])
