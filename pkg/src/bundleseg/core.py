"""Domain types: streamlines, tractograms, bundles and voxel geometry.

All objects are immutable once built. Point arrays are stored as read-only
float64 ``(n, 3)`` arrays in millimetres (world space).
"""
from __future__ import annotations

from dataclasses import dataclass, field
from functools import cached_property
from typing import Iterable, Sequence

import numpy as np

from .errors import EmptyRoi, EmptyTractogram, InvalidBundle, InvalidStreamline, VoxelOutOfMask

# voxel (i, j, k) spans [i, i+1) in index space; its centre sits at i + 0.5
VOXEL_CENTER_OFFSET = 0.5


def _frozen(a: np.ndarray) -> np.ndarray:
    a.setflags(write=False)
    return a


def _as_points(points) -> np.ndarray:
    pts = np.array(points, dtype=np.float64, copy=True)
    if pts.ndim != 2 or pts.shape[1] != 3:
        raise InvalidStreamline(f"expected an (n, 3) point array, got shape {pts.shape}")
    return pts


def validate_streamline(s) -> list[str]:
    """Check a streamline (or raw point array) and return non-fatal warnings.

    Raises
    ------
    InvalidStreamline
        If there are fewer than two points or any coordinate is not finite.
    """
    pts = s.points if isinstance(s, Streamline) else _as_points(s)
    if pts.shape[0] < 2:
        raise InvalidStreamline(f"a streamline needs at least 2 points, got {pts.shape[0]}")
    if not np.all(np.isfinite(pts)):
        raise InvalidStreamline("streamline has non-finite coordinates")
    warnings = []
    seg = np.linalg.norm(np.diff(pts, axis=0), axis=1)
    n_zero = int(np.count_nonzero(seg == 0.0))
    if n_zero:
        warnings.append(f"zero-length segment ({n_zero} occurrence{'s' if n_zero > 1 else ''})")
    return warnings


class Streamline:
    """An ordered 3D polyline with at least two finite points."""

    __slots__ = ("points",)

    def __init__(self, points):
        pts = _as_points(points)
        validate_streamline(pts)
        object.__setattr__(self, "points", _frozen(pts))

    def __setattr__(self, name, value):
        raise AttributeError("Streamline is immutable")

    def __len__(self):
        return self.points.shape[0]

    def __eq__(self, other):
        if not isinstance(other, Streamline):
            return NotImplemented
        return np.array_equal(self.points, other.points)

    def __hash__(self):
        return hash(self.points.tobytes())

    def __repr__(self):
        return f"Streamline(n={len(self)})"

    @property
    def endpoints(self) -> np.ndarray:
        return self.points[[0, -1]]

    def reversed(self) -> "Streamline":
        return Streamline(self.points[::-1])

    @property
    def length(self) -> float:
        return float(np.linalg.norm(np.diff(self.points, axis=0), axis=1).sum())


def resample(s: Streamline, n: int) -> Streamline:
    """Resample to ``n`` points equally spaced in arclength.

    Only meant for performance experiments; no metric calls this implicitly.
    """
    if n < 2:
        raise ValueError("n must be >= 2")
    pts = s.points
    cum = np.concatenate([[0.0], np.cumsum(np.linalg.norm(np.diff(pts, axis=0), axis=1))])
    if cum[-1] == 0.0:
        return Streamline(np.repeat(pts[:1], n, axis=0))
    t = np.linspace(0.0, cum[-1], n)
    return Streamline(np.column_stack([np.interp(t, cum, pts[:, d]) for d in range(3)]))


def pack(streamlines: Sequence[Streamline]) -> tuple[np.ndarray, np.ndarray]:
    """Concatenate point arrays; returns ``(points, offsets)`` with
    ``offsets[i]:offsets[i+1]`` delimiting streamline ``i``."""
    lengths = np.fromiter((len(s) for s in streamlines), dtype=np.int64, count=len(streamlines))
    offsets = np.zeros(len(streamlines) + 1, dtype=np.int64)
    np.cumsum(lengths, out=offsets[1:])
    if len(streamlines):
        points = np.concatenate([s.points for s in streamlines])
    else:
        points = np.zeros((0, 3))
    return _frozen(np.ascontiguousarray(points)), _frozen(offsets)


class Tractogram:
    """Non-empty, indexed collection of streamlines (index = streamline id)."""

    def __init__(self, streamlines: Iterable, source: str | None = None):
        sl = tuple(s if isinstance(s, Streamline) else Streamline(s) for s in streamlines)
        if not sl:
            raise EmptyTractogram("a tractogram needs at least one streamline")
        self._streamlines = sl
        self.source = source

    def __len__(self):
        return len(self._streamlines)

    def __getitem__(self, i):
        return self._streamlines[i]

    def __iter__(self):
        return iter(self._streamlines)

    def __eq__(self, other):
        if not isinstance(other, Tractogram):
            return NotImplemented
        return len(self) == len(other) and all(a == b for a, b in zip(self, other))

    def __repr__(self):
        return f"Tractogram(M={len(self)}, source={self.source!r})"

    @property
    def streamlines(self) -> tuple[Streamline, ...]:
        return self._streamlines

    @cached_property
    def packed(self) -> tuple[np.ndarray, np.ndarray]:
        return pack(self._streamlines)

    def subset(self, ids) -> list[Streamline]:
        return [self._streamlines[int(i)] for i in ids]


@dataclass(frozen=True)
class Bundle:
    """Named group of streamlines.

    Either ``ids`` refer into a tractogram, or ``streamlines`` carries the
    geometry directly (loaded example bundles).
    """

    name: str
    ids: frozenset | None = None
    streamlines: tuple | None = None

    def __post_init__(self):
        if (self.ids is None) == (self.streamlines is None):
            raise InvalidBundle("a bundle holds either member ids or streamlines, not both")
        if self.ids is not None:
            ids = list(self.ids)
            if any(int(i) != i or i < 0 for i in ids):
                raise InvalidBundle("bundle ids must be non-negative integers")
            object.__setattr__(self, "ids", frozenset(int(i) for i in ids))
            if not self.ids:
                raise InvalidBundle(f"bundle {self.name!r} is empty")
        else:
            sl = tuple(s if isinstance(s, Streamline) else Streamline(s) for s in self.streamlines)
            if not sl:
                raise InvalidBundle(f"bundle {self.name!r} is empty")
            object.__setattr__(self, "streamlines", sl)

    @classmethod
    def from_ids(cls, name: str, ids) -> "Bundle":
        ids = list(ids)
        if len(set(ids)) != len(ids):
            raise InvalidBundle("bundle ids must be distinct")
        return cls(name, ids=frozenset(ids))

    @property
    def k(self) -> int:
        return len(self.ids) if self.ids is not None else len(self.streamlines)

    def sorted_ids(self) -> list[int]:
        if self.ids is None:
            raise InvalidBundle(f"bundle {self.name!r} has no ids")
        return sorted(self.ids)

    def resolve(self, t: Tractogram | None = None) -> list[Streamline]:
        """Member streamlines in ascending-id order (or stored order)."""
        if self.streamlines is not None:
            return list(self.streamlines)
        if t is None:
            raise InvalidBundle(f"bundle {self.name!r} is id-based; a tractogram is required")
        m = len(t)
        bad = [i for i in self.ids if i >= m]
        if bad:
            raise InvalidBundle(f"bundle {self.name!r} references ids >= M={m}: {sorted(bad)[:5]}")
        return t.subset(self.sorted_ids())


def _check_affine(affine) -> np.ndarray:
    aff = np.array(affine, dtype=np.float64, copy=True)
    if aff.shape != (4, 4) or not np.all(np.isfinite(aff)):
        raise ValueError("affine must be a finite 4x4 matrix")
    if abs(np.linalg.det(aff)) < 1e-12:
        raise ValueError("affine not invertible")
    return _frozen(aff)


def _check_shape(shape) -> tuple[int, int, int]:
    shape = tuple(int(s) for s in shape)
    if len(shape) != 3 or min(shape) <= 0:
        raise ValueError(f"grid shape must be 3 positive integers, got {shape}")
    return shape


@dataclass(frozen=True, eq=False)
class VoxelGrid:
    """A voxel lattice: ``shape`` plus the index-to-mm ``affine``."""

    shape: tuple
    affine: np.ndarray

    def __post_init__(self):
        object.__setattr__(self, "shape", _check_shape(self.shape))
        object.__setattr__(self, "affine", _check_affine(self.affine))

    def __eq__(self, other):
        if not isinstance(other, VoxelGrid):
            return NotImplemented
        return self.shape == other.shape and np.array_equal(self.affine, other.affine)

    def __hash__(self):
        return hash((self.shape, self.affine.tobytes()))

    @classmethod
    def isotropic(cls, shape, voxel_size: float, origin=(0.0, 0.0, 0.0)) -> "VoxelGrid":
        aff = np.diag([voxel_size, voxel_size, voxel_size, 1.0])
        aff[:3, 3] = origin
        return cls(tuple(shape), aff)

    @property
    def voxel_sizes(self) -> np.ndarray:
        return np.linalg.norm(self.affine[:3, :3], axis=0)

    @cached_property
    def inverse(self) -> np.ndarray:
        return _frozen(np.linalg.inv(self.affine))

    def centers(self, ijk) -> np.ndarray:
        """World coordinates of voxel centres for an ``(m, 3)`` index array."""
        ijk = np.asarray(ijk, dtype=np.float64).reshape(-1, 3) + VOXEL_CENTER_OFFSET
        return ijk @ self.affine[:3, :3].T + self.affine[:3, 3]

    def to_index(self, points) -> np.ndarray:
        """Integer voxel indices containing each world point (may lie outside)."""
        pts = np.asarray(points, dtype=np.float64).reshape(-1, 3)
        ijk = pts @ self.inverse[:3, :3].T + self.inverse[:3, 3]
        return np.floor(ijk).astype(np.int64)

    def contains(self, ijk) -> np.ndarray:
        ijk = np.asarray(ijk).reshape(-1, 3)
        return np.all((ijk >= 0) & (ijk < np.asarray(self.shape)), axis=1)


@dataclass(frozen=True, eq=False)
class RoiMask:
    """Non-empty set of voxels on a grid, stored as a sorted unique ``(m, 3)`` array."""

    shape: tuple
    affine: np.ndarray
    voxels: np.ndarray = field(repr=False)

    def __post_init__(self):
        grid = VoxelGrid(self.shape, self.affine)
        vox = np.asarray(self.voxels)
        if vox.size == 0:
            raise EmptyRoi("ROI mask has no voxels")
        vox = vox.reshape(-1, 3)
        if not np.issubdtype(vox.dtype, np.integer):
            if not np.all(vox == np.round(vox)):
                raise ValueError("voxel indices must be integers")
        vox = np.unique(vox.astype(np.int64), axis=0)
        if not np.all(grid.contains(vox)):
            raise ValueError("voxel index outside mask shape")
        object.__setattr__(self, "shape", grid.shape)
        object.__setattr__(self, "affine", grid.affine)
        object.__setattr__(self, "voxels", _frozen(vox))

    def __eq__(self, other):
        if not isinstance(other, RoiMask):
            return NotImplemented
        return (self.shape == other.shape and np.array_equal(self.affine, other.affine)
                and np.array_equal(self.voxels, other.voxels))

    def __hash__(self):
        return hash((self.shape, self.affine.tobytes(), self.voxels.tobytes()))

    def __len__(self):
        return self.voxels.shape[0]

    @property
    def grid(self) -> VoxelGrid:
        return VoxelGrid(self.shape, self.affine)

    @cached_property
    def centers(self) -> np.ndarray:
        return _frozen(self.grid.centers(self.voxels))

    def __contains__(self, v) -> bool:
        v = np.asarray(v, dtype=np.int64).reshape(3)
        return bool(np.any(np.all(self.voxels == v, axis=1)))


def voxel_center(mask: RoiMask, v) -> np.ndarray:
    """World coordinate of the centre of voxel ``v``, which must belong to ``mask``."""
    if v not in mask:
        raise VoxelOutOfMask(f"voxel {tuple(v)} is not part of the mask")
    return mask.grid.centers(v)[0]
