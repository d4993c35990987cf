"""File formats for tractograms, ROI masks, bundle labels and grids.

Tractogram (``.bseg``, binary, little-endian)::

    b"BSEG"  u32 version (=1)  u32 streamline_count
    repeated: u32 n  then 3*n f32 (x, y, z interleaved, mm)

ROI mask (text)::

    # bundleseg roi v1
    shape <i> <j> <k>
    affine <16 reals, row-major>
    voxels <count>
    <i> <j> <k>            (one voxel per line)

Bundle labels (text): the bundle name on the first line, then one
streamline id per line in ascending order.

Voxel grid (text): the ROI header lines (``shape`` and ``affine``) only.

Points are float32 on disk and float64 in memory.
"""
from __future__ import annotations

import os
import struct
from pathlib import Path

import numpy as np

from .core import Bundle, RoiMask, Streamline, Tractogram, VoxelGrid
from .errors import (BadMagic, BadVersion, CorruptCount, DuplicateId, EmptyRoi, ParseError,
                     TruncatedFile, VoxelOutOfShape)

MAGIC = b"BSEG"
VERSION = 1
_HEADER = struct.Struct("<4sII")
_U32 = struct.Struct("<I")
ROI_BANNER = "# bundleseg roi v1"


# -- tractogram ----------------------------------------------------------------

def encode_tractogram(t: Tractogram) -> bytes:
    parts = [_HEADER.pack(MAGIC, VERSION, len(t))]
    for s in t:
        parts.append(_U32.pack(len(s)))
        parts.append(np.ascontiguousarray(s.points, dtype="<f4").tobytes())
    return b"".join(parts)


def decode_tractogram(data: bytes, source: str | None = None) -> Tractogram:
    if len(data) < _HEADER.size:
        if len(data) >= 4 and data[:4] != MAGIC:
            raise BadMagic(f"bad magic {data[:4]!r}")
        raise TruncatedFile("file shorter than the header")
    magic, version, count = _HEADER.unpack_from(data, 0)
    if magic != MAGIC:
        raise BadMagic(f"bad magic {magic!r}")
    if version != VERSION:
        raise BadVersion(f"unsupported version {version}")
    if count == 0:
        raise CorruptCount("file declares zero streamlines")
    pos = _HEADER.size
    streamlines = []
    for i in range(count):
        if pos + _U32.size > len(data):
            raise TruncatedFile(f"streamline {i}: missing point count")
        (n,) = _U32.unpack_from(data, pos)
        pos += _U32.size
        if n < 2:
            raise CorruptCount(f"streamline {i}: declares {n} points (need >= 2)")
        nbytes = 12 * n
        if pos + nbytes > len(data):
            raise TruncatedFile(f"streamline {i}: declares {n} points, file ends early")
        pts = np.frombuffer(data, dtype="<f4", count=3 * n, offset=pos).reshape(n, 3)
        pos += nbytes
        streamlines.append(Streamline(pts.astype(np.float64)))
    if pos != len(data):
        raise CorruptCount(f"{len(data) - pos} trailing bytes after {count} streamlines")
    return Tractogram(streamlines, source=source)


def write_tractogram(path, t: Tractogram) -> None:
    Path(path).write_bytes(encode_tractogram(t))


def read_tractogram(path) -> Tractogram:
    return decode_tractogram(Path(path).read_bytes(), source=os.fspath(path))


# -- grid / ROI ----------------------------------------------------------------

def _fmt(x: float) -> str:
    return repr(float(x))


def _grid_lines(shape, affine) -> list[str]:
    return [
        "shape " + " ".join(str(int(s)) for s in shape),
        "affine " + " ".join(_fmt(v) for v in np.asarray(affine).ravel()),
    ]


def _parse_header(lines: list[str], where: str) -> tuple[tuple, np.ndarray, int]:
    """Parse banner/shape/affine; returns (shape, affine, index of next line)."""
    body = [(i, ln.strip()) for i, ln in enumerate(lines) if ln.strip()]
    if not body:
        raise ParseError(f"{where}: empty file")
    k = 0
    if body[0][1].startswith("#"):
        k = 1
    try:
        _, shape_line = body[k]
        _, affine_line = body[k + 1]
    except IndexError:
        raise ParseError(f"{where}: missing shape/affine header") from None
    key, *vals = shape_line.split()
    if key != "shape" or len(vals) != 3:
        raise ParseError(f"{where}: expected 'shape i j k', got {shape_line!r}")
    try:
        shape = tuple(int(v) for v in vals)
    except ValueError:
        raise ParseError(f"{where}: non-integer shape {shape_line!r}") from None
    if min(shape) <= 0:
        raise ParseError(f"{where}: shape must be positive")
    key, *vals = affine_line.split()
    if key != "affine" or len(vals) != 16:
        raise ParseError(f"{where}: expected 'affine' followed by 16 reals")
    try:
        affine = np.array([float(v) for v in vals]).reshape(4, 4)
    except ValueError:
        raise ParseError(f"{where}: non-numeric affine") from None
    if not np.all(np.isfinite(affine)) or abs(np.linalg.det(affine)) < 1e-12:
        raise ParseError("affine not invertible")
    return shape, affine, body[k + 1][0] + 1


def format_roi(mask: RoiMask) -> str:
    lines = [ROI_BANNER, *_grid_lines(mask.shape, mask.affine), f"voxels {len(mask)}"]
    lines.extend(f"{i} {j} {k}" for i, j, k in mask.voxels.tolist())
    return "\n".join(lines) + "\n"


def parse_roi(text: str, where: str = "<roi>") -> RoiMask:
    lines = text.splitlines()
    shape, affine, nxt = _parse_header(lines, where)
    rest = [ln.strip() for ln in lines[nxt:] if ln.strip()]
    if not rest:
        raise ParseError(f"{where}: missing 'voxels' section")
    key, *vals = rest[0].split()
    if key != "voxels" or len(vals) != 1 or not vals[0].isdigit():
        raise ParseError(f"{where}: expected 'voxels <count>', got {rest[0]!r}")
    count = int(vals[0])
    rows = rest[1:]
    if len(rows) != count:
        raise ParseError(f"{where}: declared {count} voxels, found {len(rows)}")
    if count == 0:
        raise ParseError(f"{where}: ROI has no voxels")
    try:
        vox = np.array([[int(v) for v in r.split()] for r in rows], dtype=np.int64)
    except ValueError:
        raise ParseError(f"{where}: voxel lines must be three integers") from None
    if vox.ndim != 2 or vox.shape[1] != 3:
        raise ParseError(f"{where}: voxel lines must be three integers")
    bad = np.any((vox < 0) | (vox >= np.asarray(shape)), axis=1)
    if bad.any():
        raise VoxelOutOfShape(f"{where}: voxel {tuple(vox[bad][0])} outside shape {shape}")
    try:
        return RoiMask(shape, affine, vox)
    except EmptyRoi as e:
        raise ParseError(f"{where}: {e}") from None


def write_roi(path, mask: RoiMask) -> None:
    Path(path).write_text(format_roi(mask))


def read_roi(path) -> RoiMask:
    return parse_roi(Path(path).read_text(), where=os.fspath(path))


def format_grid(grid: VoxelGrid) -> str:
    return "\n".join(["# bundleseg grid v1", *_grid_lines(grid.shape, grid.affine)]) + "\n"


def write_grid(path, grid: VoxelGrid) -> None:
    Path(path).write_text(format_grid(grid))


def read_grid(path) -> VoxelGrid:
    shape, affine, _ = _parse_header(Path(path).read_text().splitlines(), os.fspath(path))
    return VoxelGrid(shape, affine)


# -- bundle labels -------------------------------------------------------------

def format_bundle_labels(b: Bundle) -> str:
    return "\n".join([b.name, *(str(i) for i in b.sorted_ids())]) + "\n"


def parse_bundle_labels(text: str, where: str = "<labels>") -> Bundle:
    lines = text.splitlines()
    if not lines or not lines[0].strip():
        raise ParseError(f"{where}: missing bundle name")
    name = lines[0].strip()
    ids = []
    seen = set()
    for n, ln in enumerate(lines[1:], start=2):
        ln = ln.strip()
        if not ln:
            continue
        try:
            i = int(ln)
        except ValueError:
            raise ParseError(f"{where}:{n}: not an integer id: {ln!r}") from None
        if i < 0:
            raise ParseError(f"{where}:{n}: negative id {i}")
        if i in seen:
            raise DuplicateId(f"{where}:{n}: duplicate id {i}")
        seen.add(i)
        ids.append(i)
    if not ids:
        raise ParseError(f"{where}: bundle {name!r} lists no ids")
    return Bundle(name, ids=frozenset(ids))


def write_bundle_labels(path, b: Bundle) -> None:
    Path(path).write_text(format_bundle_labels(b))


def read_bundle_labels(path) -> Bundle:
    return parse_bundle_labels(Path(path).read_text(), where=os.fspath(path))
