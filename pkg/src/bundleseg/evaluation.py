"""Voxelization of bundles and the Dice similarity coefficient."""
from __future__ import annotations

from dataclasses import dataclass
from typing import Sequence

import numpy as np

from .core import Bundle, Streamline, Tractogram, VoxelGrid
from .errors import BothEmpty, GridMismatch, InvalidBundle


@dataclass(frozen=True, eq=False)
class VoxelSet:
    """Voxels of ``grid`` stored as sorted unique linear (C-order) indices."""

    grid: VoxelGrid
    linear: np.ndarray

    def __post_init__(self):
        lin = np.unique(np.asarray(self.linear, dtype=np.int64))
        if lin.size and (lin[0] < 0 or lin[-1] >= np.prod(self.grid.shape)):
            raise ValueError("voxel index outside grid")
        lin.setflags(write=False)
        object.__setattr__(self, "linear", lin)

    @classmethod
    def from_indices(cls, grid: VoxelGrid, ijk) -> "VoxelSet":
        ijk = np.asarray(ijk, dtype=np.int64).reshape(-1, 3)
        if not np.all(grid.contains(ijk)):
            raise ValueError("voxel index outside grid")
        return cls(grid, np.ravel_multi_index(ijk.T, grid.shape))

    @property
    def voxels(self) -> np.ndarray:
        return np.column_stack(np.unravel_index(self.linear, self.grid.shape))

    def __len__(self):
        return int(self.linear.size)

    def __eq__(self, other):
        if not isinstance(other, VoxelSet):
            return NotImplemented
        return self.grid == other.grid and np.array_equal(self.linear, other.linear)

    def __or__(self, other: "VoxelSet") -> "VoxelSet":
        _same_grid(self, other)
        return VoxelSet(self.grid, np.union1d(self.linear, other.linear))

    def issubset(self, other: "VoxelSet") -> bool:
        _same_grid(self, other)
        return bool(np.isin(self.linear, other.linear).all())


def _same_grid(a: VoxelSet, b: VoxelSet):
    if a.grid != b.grid:
        raise GridMismatch("voxel sets live on different grids")


def sample_points(s: Streamline, spacing: float) -> np.ndarray:
    """Original points plus points interpolated so that consecutive samples
    are at most ``spacing`` apart."""
    pts = s.points
    seg = np.diff(pts, axis=0)
    lengths = np.linalg.norm(seg, axis=1)
    n_sub = np.maximum(np.ceil(lengths / spacing).astype(np.int64), 1)
    # fractions 0, 1/n, ..., (n-1)/n for each segment, then the last point
    seg_idx = np.repeat(np.arange(len(seg)), n_sub)
    starts = np.cumsum(n_sub) - n_sub
    frac = (np.arange(seg_idx.size) - np.repeat(starts, n_sub)) / np.repeat(n_sub, n_sub)
    samples = pts[seg_idx] + frac[:, None] * seg[seg_idx]
    return np.vstack([samples, pts[-1:]])


def voxelize_streamlines(streamlines: Sequence[Streamline], grid: VoxelGrid,
                         spacing: float | None = None) -> VoxelSet:
    """Voxels containing at least one sample of any streamline.

    ``spacing`` defaults to half the smallest voxel edge. Samples outside the
    grid are ignored.
    """
    if spacing is None:
        spacing = 0.5 * float(grid.voxel_sizes.min())
    if spacing <= 0:
        raise ValueError("sampling spacing must be positive")
    if not streamlines:
        return VoxelSet(grid, np.zeros(0, dtype=np.int64))
    samples = np.vstack([sample_points(s, spacing) for s in streamlines])
    ijk = grid.to_index(samples)
    ijk = ijk[grid.contains(ijk)]
    return VoxelSet(grid, np.ravel_multi_index(ijk.T, grid.shape))


def voxelize(b: Bundle, t: Tractogram | None, grid: VoxelGrid, spacing: float | None = None) -> VoxelSet:
    """Set of voxels crossed by the streamlines of bundle ``b``."""
    if b.k == 0:
        raise InvalidBundle("cannot voxelize an empty bundle")
    return voxelize_streamlines(b.resolve(t), grid, spacing)


def dsc(a: VoxelSet, b: VoxelSet) -> float:
    """Dice coefficient ``2|a & b| / (|a| + |b|)``; undefined (error) if both are empty."""
    _same_grid(a, b)
    total = len(a) + len(b)
    if total == 0:
        raise BothEmpty("Dice coefficient is undefined for two empty sets")
    shared = np.intersect1d(a.linear, b.linear, assume_unique=True).size
    return 2.0 * shared / total
