"""Deterministic synthetic tractograms with labeled bundles and waypoint ROIs.

A study shares one anatomical *template* across subjects (bundle centerlines,
per-streamline cross-section offsets and endpoint fanning, distractor paths).
Each subject then gets its own smooth polynomial warp and its own per-point
jitter, so two subjects differ the way registered brains do: same anatomy,
locally displaced.

Randomness is counter-based: every streamline draws from a Philox generator
keyed by ``(seed, subject, bundle, streamline)``, so output does not depend on
generation order or worker count.
"""
from __future__ import annotations

import json
from dataclasses import asdict, dataclass, field, replace
from typing import Sequence

import numpy as np

from .core import Bundle, RoiMask, Streamline, Tractogram, VoxelGrid
from .errors import InvalidSpec
from .metrics import RoiSet

FAMILIES = ("arc", "helix", "line")
ROI_RADIUS = 2.0  # mm around the centerline waypoint
ROI_FRACTIONS = (1.0 / 3.0, 2.0 / 3.0)
MIN_BUNDLE_CLEARANCE = 25.0  # mm between bundle centerlines

# stream tags for the generator keys
_TEMPLATE = 0
_SUBJECT = 1
_WARP = 2
_PERTURB = 3
_DISTRACTOR_BUNDLE = 10_000
_LAYOUT = 20_000


def _rng(*key) -> np.random.Generator:
    return np.random.Generator(np.random.Philox(np.random.SeedSequence([int(k) for k in key])))


@dataclass(frozen=True)
class BundleSpec:
    name: str
    family: str = "arc"
    k: int = 20
    jitter: float = 0.6
    endpoint_spread: float = 6.0
    radius: float = 2.0
    # clearance between the bundle core and its shell of neighbor streamlines
    neighbor_gap: float = 5.0

    def validate(self):
        if self.family not in FAMILIES:
            raise InvalidSpec(f"bundle {self.name!r}: unknown family {self.family!r}")
        if int(self.k) != self.k or self.k < 1:
            raise InvalidSpec(f"bundle {self.name!r}: k must be a positive integer")
        for attr in ("jitter", "endpoint_spread", "radius", "neighbor_gap"):
            v = getattr(self, attr)
            if not np.isfinite(v) or v < 0:
                raise InvalidSpec(f"bundle {self.name!r}: {attr} must be >= 0")


def default_grid() -> VoxelGrid:
    return VoxelGrid.isotropic((96, 96, 96), 1.25)


@dataclass(frozen=True)
class SynthSpec:
    seed: int = 0
    bundles: tuple = (
        BundleSpec("small", "arc", 20, radius=1.0, neighbor_gap=2.5),
        BundleSpec("large", "line", 200, radius=4.0, neighbor_gap=6.0),
    )
    distractors: int = 400
    deformation: float = 3.0
    grid: VoxelGrid = field(default_factory=default_grid)
    # distractors placed as a shell around each bundle (taken from ``distractors``)
    neighbors_per_bundle: int = 60

    def __post_init__(self):
        object.__setattr__(self, "bundles", tuple(
            b if isinstance(b, BundleSpec) else BundleSpec(**b) for b in self.bundles))

    def validate(self):
        if not self.bundles:
            raise InvalidSpec("at least one bundle is required")
        names = [b.name for b in self.bundles]
        if len(set(names)) != len(names):
            raise InvalidSpec("bundle names must be unique")
        for b in self.bundles:
            b.validate()
        if int(self.distractors) != self.distractors or self.distractors < 0:
            raise InvalidSpec("distractor count must be a non-negative integer")
        if not np.isfinite(self.deformation) or self.deformation < 0:
            raise InvalidSpec("deformation amplitude must be >= 0")
        if int(self.neighbors_per_bundle) != self.neighbors_per_bundle or self.neighbors_per_bundle < 0:
            raise InvalidSpec("neighbors_per_bundle must be a non-negative integer")

    def to_json(self) -> str:
        d = asdict(self)
        d["grid"] = {"shape": list(self.grid.shape), "affine": self.grid.affine.tolist()}
        return json.dumps(d, indent=2)

    @classmethod
    def from_json(cls, text: str) -> "SynthSpec":
        try:
            d = json.loads(text)
            if "grid" in d:
                d["grid"] = VoxelGrid(tuple(d["grid"]["shape"]), np.array(d["grid"]["affine"]))
            if "bundles" in d:
                d["bundles"] = tuple(BundleSpec(**b) for b in d["bundles"])
            spec = cls(**d)
        except (KeyError, TypeError, ValueError) as e:
            raise InvalidSpec(f"invalid synthetic spec: {e}") from e
        spec.validate()
        return spec


@dataclass(frozen=True)
class Subject:
    tractogram: Tractogram
    bundles: dict
    rois: dict
    centerlines: dict

    def bundle_geometry(self, name: str) -> Bundle:
        """Ground-truth bundle carrying its own streamlines (usable as an example)."""
        return Bundle(name, streamlines=tuple(self.bundles[name].resolve(self.tractogram)))


# -- geometry ------------------------------------------------------------------

def _random_rotation(rng) -> np.ndarray:
    q = rng.normal(size=4)
    q /= np.linalg.norm(q)
    w, x, y, z = q
    return np.array([
        [1 - 2 * (y * y + z * z), 2 * (x * y - z * w), 2 * (x * z + y * w)],
        [2 * (x * y + z * w), 1 - 2 * (x * x + z * z), 2 * (y * z - x * w)],
        [2 * (x * z - y * w), 2 * (y * z + x * w), 1 - 2 * (x * x + y * y)],
    ])


def _centerline_fn(family: str, rng, center: np.ndarray):
    """Return ``c(t)`` for t in [0, 1]: a curve of roughly 60-90 mm."""
    rot = _random_rotation(rng)
    if family == "line":
        length = rng.uniform(60, 80)
        bow = rng.uniform(3, 8)

        def local(t):
            return np.column_stack([(t - 0.5) * length, bow * np.sin(np.pi * t), np.zeros_like(t)])
    elif family == "arc":
        radius = rng.uniform(22, 30)
        span = rng.uniform(0.55, 0.8) * np.pi

        def local(t):
            a = (t - 0.5) * span
            return np.column_stack([radius * np.sin(a), radius * (np.cos(a) - 1.0), np.zeros_like(t)])
    else:
        radius = rng.uniform(6, 9)
        turns = rng.uniform(0.8, 1.3)
        height = rng.uniform(50, 70)

        def local(t):
            a = 2 * np.pi * turns * t
            return np.column_stack([radius * np.cos(a), radius * np.sin(a), (t - 0.5) * height])

    def c(t):
        return local(np.atleast_1d(np.asarray(t, dtype=np.float64))) @ rot.T + center

    return c


_FINE = np.linspace(0.0, 1.0, 1001)
_frame_cache: dict = {}


def _transport(c):
    key = id(c)
    hit = _frame_cache.get(key)
    if hit is not None and hit[0] is c:
        return hit[1], hit[2]
    tan = np.gradient(c(_FINE), axis=0)
    tan /= np.linalg.norm(tan, axis=1, keepdims=True)
    ref = np.eye(3)[int(np.argmin(np.abs(tan[0])))]
    n1 = np.empty_like(tan)
    n = np.cross(tan[0], ref)
    n1[0] = n / np.sqrt(n @ n)
    for i in range(1, _FINE.size):
        n = n1[i - 1] - (n1[i - 1] @ tan[i]) * tan[i]
        n1[i] = n / np.sqrt(n @ n)
    if len(_frame_cache) > 4096:
        _frame_cache.clear()
    _frame_cache[key] = (c, tan, n1)
    return tan, n1


def _frames(c, t: np.ndarray):
    """Unit tangent and two normals along ``c`` at parameters ``t``.

    Normals are parallel-transported on a fixed fine grid and interpolated,
    so every streamline of a bundle sees the same frame field.
    """
    fine = _FINE
    tan, n1 = _transport(c)
    tan_t = np.column_stack([np.interp(t, fine, tan[:, d]) for d in range(3)])
    tan_t /= np.linalg.norm(tan_t, axis=1, keepdims=True)
    n1_t = np.column_stack([np.interp(t, fine, n1[:, d]) for d in range(3)])
    n1_t -= (n1_t * tan_t).sum(axis=1, keepdims=True) * tan_t
    n1_t /= np.linalg.norm(n1_t, axis=1, keepdims=True)
    return tan_t, n1_t, np.cross(tan_t, n1_t)


def _smooth_noise(rng, t: np.ndarray, sigma: float) -> np.ndarray:
    """Low-frequency 3D displacement along a streamline (``t`` in [0, 1]).

    RMS displacement is about ``sigma``; each point is clamped to ``4 * sigma``.
    """
    if sigma == 0:
        return np.zeros((t.size, 3))
    modes = np.arange(1, 4)
    # per-coordinate variance: 1/6 from the constant term + 3 * (1/9) / 2 from the waves
    base = rng.normal(size=3) / np.sqrt(6.0)
    amp = rng.normal(size=(modes.size, 3)) / 3.0
    phase = rng.uniform(0, 2 * np.pi, size=(modes.size, 3))
    waves = np.sin(np.pi * modes[None, :, None] * t[:, None, None] + phase[None, :, :])
    disp = sigma * (base + (waves * amp[None, :, :]).sum(axis=1))
    norm = np.linalg.norm(disp, axis=1, keepdims=True)
    cap = 4.0 * sigma
    return np.where(norm > cap, disp * (cap / np.maximum(norm, 1e-300)), disp)


class Warp:
    """Smooth polynomial displacement field of degree <= 2.

    The constant part has norm exactly ``amplitude`` (random direction); the
    linear and quadratic part is rescaled to an RMS of ``amplitude / 2`` over
    the central region of the volume where bundles live. Subject 0 is the
    template frame and is never warped.
    """

    def __init__(self, seed: int, subject: int, amplitude: float, center, half_extent: float):
        rng = _rng(seed, _WARP, subject)
        self.amplitude = 0.0 if subject == 0 else float(amplitude)
        self.center = np.asarray(center, dtype=np.float64)
        self.half_extent = float(half_extent)
        shift = rng.normal(size=3)
        self.shift = shift / np.linalg.norm(shift)
        self.coef = rng.normal(size=(3, 9))
        lattice = np.linspace(-0.6, 0.6, 9)
        u = np.stack(np.meshgrid(lattice, lattice, lattice, indexing="ij"), axis=-1).reshape(-1, 3)
        rms = np.sqrt(np.mean(np.sum((self._basis(u) @ self.coef.T) ** 2, axis=1)))
        self.coef *= 0.5 / rms

    @staticmethod
    def _basis(u: np.ndarray) -> np.ndarray:
        x, y, z = u.T
        return np.column_stack([x, y, z, x * x, y * y, z * z, x * y, x * z, y * z])

    def __call__(self, pts: np.ndarray) -> np.ndarray:
        if self.amplitude == 0:
            return pts
        u = (pts - self.center) / self.half_extent
        return pts + self.amplitude * (self.shift + self._basis(u) @ self.coef.T)


@dataclass(frozen=True)
class _Template:
    """Subject-independent part of one streamline."""

    curve: int  # index into the curve list
    t: np.ndarray
    offset: np.ndarray  # (n, 3) displacement from the curve in the template


def _streamline_params(rng, n_lo=20, n_hi=40, trim=0.04):
    n = int(rng.integers(n_lo, n_hi + 1))
    a, b = rng.uniform(0, trim, size=2)
    return np.linspace(a, 1.0 - b, n)


def _member_offset(rng, c, t, radius: float, spread: float) -> np.ndarray:
    _, n1, n2 = _frames(c, t)
    r = radius * np.sqrt(rng.uniform())
    phi = rng.uniform(0, 2 * np.pi)
    fan_phi = rng.uniform(0, 2 * np.pi)
    fan = spread * rng.uniform() * (2.0 * t - 1.0) ** 4
    a1 = r * np.cos(phi) + fan * np.cos(fan_phi)
    a2 = r * np.sin(phi) + fan * np.sin(fan_phi)
    return a1[:, None] * n1 + a2[:, None] * n2


def _neighbor_offset(rng, c, t, radius: float, gap: float) -> np.ndarray:
    """A streamline running beside the bundle, outside its core by ``gap``,
    that peels away towards one end."""
    _, n1, n2 = _frames(c, t)
    r = radius + gap + rng.uniform(0.0, 3.0)
    phi = rng.uniform(0, 2 * np.pi)
    peel = rng.uniform(6.0, 14.0) * np.where(rng.uniform() < 0.5, t, 1.0 - t) ** 3
    rr = r + peel
    return (rr * np.cos(phi))[:, None] * n1 + (rr * np.sin(phi))[:, None] * n2


class _Study:
    """Template shared by every subject of one spec."""

    def __init__(self, spec: SynthSpec):
        spec.validate()
        self.spec = spec
        grid = spec.grid
        corner_lo = grid.centers(np.zeros((1, 3)))[0]
        corner_hi = grid.centers(np.array([s - 1 for s in grid.shape]))[0]
        self.center = (corner_lo + corner_hi) / 2.0
        self.half_extent = float(np.min(np.abs(corner_hi - corner_lo)) / 2.0)
        layout = _rng(spec.seed, _LAYOUT)
        self.curves = []
        probe = np.linspace(0.0, 1.0, 60)
        for b in spec.bundles:
            for _ in range(200):
                pos = self.center + layout.uniform(-0.3, 0.3, size=3) * self.half_extent
                c = _centerline_fn(b.family, layout, pos)
                pts = c(probe)
                clear = all(
                    np.min(np.linalg.norm(pts[:, None] - other(probe)[None], axis=-1)) > MIN_BUNDLE_CLEARANCE
                    for other in self.curves)
                if clear:
                    break
            self.curves.append(c)
        n_bundles = len(spec.bundles)
        self.templates: list[_Template] = []
        self.labels: list[int] = []  # bundle index, or -1 for distractors
        for bi, b in enumerate(spec.bundles):
            c = self.curves[bi]
            for j in range(b.k):
                rng = _rng(spec.seed, _TEMPLATE, bi, j)
                t = _streamline_params(rng)
                self.templates.append(_Template(bi, t, _member_offset(rng, c, t, b.radius, b.endpoint_spread)))
                self.labels.append(bi)
        # neighbor shells, then free background paths
        per = min(int(spec.neighbors_per_bundle), spec.distractors // len(spec.bundles))
        n_neighbors = [per] * len(spec.bundles)
        d = 0
        for bi, b in enumerate(spec.bundles):
            c = self.curves[bi]
            for _ in range(n_neighbors[bi]):
                rng = _rng(spec.seed, _TEMPLATE, _DISTRACTOR_BUNDLE, d)
                t = _streamline_params(rng)
                self.templates.append(_Template(bi, t, _neighbor_offset(rng, c, t, b.radius, b.neighbor_gap)))
                self.labels.append(-1)
                d += 1
        while d < spec.distractors:
            rng = _rng(spec.seed, _TEMPLATE, _DISTRACTOR_BUNDLE, d)
            pos = self.center + rng.uniform(-0.55, 0.55, size=3) * self.half_extent
            fam = FAMILIES[int(rng.integers(len(FAMILIES)))]
            self.curves.append(_centerline_fn(fam, rng, pos))
            t = _streamline_params(rng)
            self.templates.append(_Template(len(self.curves) - 1, t, np.zeros((t.size, 3))))
            self.labels.append(-1)
            d += 1
        self.n_bundles = n_bundles
        # fixed shuffle so ids carry no positional hint; independent of subject
        self.order = _rng(spec.seed, _LAYOUT, 1).permutation(len(self.templates))

    def jitter_for(self, idx: int) -> float:
        bi = self.labels[idx]
        if bi >= 0:
            return self.spec.bundles[bi].jitter
        return float(np.mean([b.jitter for b in self.spec.bundles]))

    def subject(self, subject_index: int) -> Subject:
        spec = self.spec
        warp = Warp(spec.seed, subject_index, spec.deformation, self.center, self.half_extent)
        streamlines = []
        for pos in self.order:
            tpl = self.templates[pos]
            base = self.curves[tpl.curve](tpl.t) + tpl.offset
            rng = _rng(spec.seed, _SUBJECT, subject_index, int(pos))
            noise = _smooth_noise(rng, tpl.t, self.jitter_for(int(pos)))
            streamlines.append(Streamline(warp(base + noise)))
        tract = Tractogram(streamlines, source=f"synthetic seed={spec.seed} subject={subject_index}")
        inv = np.empty_like(self.order)
        inv[self.order] = np.arange(self.order.size)
        labels = np.asarray(self.labels)
        bundles, rois, centerlines = {}, {}, {}
        for bi, b in enumerate(spec.bundles):
            ids = sorted(int(i) for i in inv[np.flatnonzero(labels == bi)])
            bundles[b.name] = Bundle(b.name, ids=frozenset(ids))
            tt = np.linspace(0.0, 1.0, 101)
            center_pts = warp(self.curves[bi](tt))
            centerlines[b.name] = Streamline(center_pts)
            rois[b.name] = RoiSet(tuple(
                waypoint_roi(spec.grid, _arclength_point(center_pts, f)) for f in ROI_FRACTIONS))
        return Subject(tract, bundles, rois, centerlines)


def _arclength_point(pts: np.ndarray, frac: float) -> np.ndarray:
    cum = np.concatenate([[0.0], np.cumsum(np.linalg.norm(np.diff(pts, axis=0), axis=1))])
    target = frac * cum[-1]
    return np.array([np.interp(target, cum, pts[:, d]) for d in range(3)])


def waypoint_roi(grid: VoxelGrid, point, radius: float = ROI_RADIUS) -> RoiMask:
    """Voxels of ``grid`` whose centres lie within ``radius`` mm of ``point``."""
    point = np.asarray(point, dtype=np.float64)
    vs = grid.voxel_sizes
    center_idx = grid.to_index(point[None, :])[0]
    reach = int(np.ceil(radius / vs.min())) + 1
    rng_ = np.arange(-reach, reach + 1)
    ijk = center_idx + np.stack(np.meshgrid(rng_, rng_, rng_, indexing="ij"), axis=-1).reshape(-1, 3)
    ijk = ijk[grid.contains(ijk)]
    keep = np.linalg.norm(grid.centers(ijk) - point, axis=1) <= radius
    ijk = ijk[keep]
    if ijk.size == 0:
        # point off-grid or radius below half a voxel: use the nearest voxel
        ijk = np.clip(center_idx, 0, np.array(grid.shape) - 1)[None, :]
    return RoiMask(grid.shape, grid.affine, ijk)


def generate_subject(spec: SynthSpec, subject_index: int) -> tuple[Tractogram, dict, dict]:
    """Tractogram, ground-truth bundles by name, and ROI sets by name."""
    s = _Study(spec).subject(subject_index)
    return s.tractogram, s.bundles, s.rois


def generate_study(spec: SynthSpec, subjects: Sequence[int] = (0, 1)) -> list[Subject]:
    study = _Study(spec)
    return [study.subject(i) for i in subjects]


def perturb_example(b: Bundle, sigma: float, seed: int, t: Tractogram | None = None) -> Bundle:
    """Add smooth correlated jitter of scale ``sigma`` to every streamline.

    Each point moves at most ``4 * sigma``. ``sigma = 0`` returns the same geometry.
    """
    if sigma < 0:
        raise ValueError("sigma must be >= 0")
    out = []
    for j, s in enumerate(b.resolve(t)):
        if sigma == 0:
            out.append(s)
            continue
        rng = _rng(seed, _PERTURB, j)
        tt = np.linspace(0.0, 1.0, len(s))
        out.append(Streamline(s.points + _smooth_noise(rng, tt, sigma)))
    return Bundle(b.name, streamlines=tuple(out))


def with_defaults(**overrides) -> SynthSpec:
    return replace(SynthSpec(), **overrides)
