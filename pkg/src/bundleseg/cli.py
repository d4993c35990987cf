"""Command-line interface.

Commands
--------
segment    segment one bundle from a tractogram using example bundles
evaluate   Dice coefficient between estimated and true bundles
gen        write a synthetic two-subject study
dist       pairwise streamline distances between two files
lap-solve  solve an assignment problem read from CSV

Exit codes: 0 success, 1 data error (the message names the file), 2 usage error.
Results go to stdout or the output directory; diagnostics go to stderr.
"""
from __future__ import annotations

import argparse
import csv
import io as _stdio
import logging
import sys
from pathlib import Path

import numpy as np

from . import __version__, evaluation, io, lap, metrics, segmentation, synth
from ._backend import BACKEND
from .core import Bundle, Tractogram
from .errors import BundleSegError

logger = logging.getLogger("bundleseg")

REPORT_HEADER = ("example_index", "total_cost", "candidates")
EVAL_HEADER = ("bundle", "dsc", "voxels_est", "voxels_truth")
DIST_HEADER = ("index", "d_mc", "d_end", "d_rois")
N_GEN_EXAMPLES = 5
GEN_EXAMPLE_SIGMA = 1.0


class UsageError(Exception):
    """Bad flag combination detected before any computation."""


class InputError(Exception):
    """Data problem tied to a specific input file."""

    def __init__(self, path, err):
        super().__init__(f"{path}: {err}")


def _load(reader, path):
    try:
        return reader(path)
    except (BundleSegError, OSError, UnicodeDecodeError) as e:
        raise InputError(path, e) from e


def _fmt(x: float) -> str:
    return format(float(x), ".17g")


def _load_rois(paths):
    if not paths:
        return None
    return metrics.RoiSet(tuple(_load(io.read_roi, p) for p in paths))


# -- segment -------------------------------------------------------------------

def _segment_config(args) -> segmentation.SegmentationConfig:
    try:
        if args.baseline:
            if args.weights is not None or args.normalization is not None:
                raise UsageError("--baseline cannot be combined with --weights or --normalization")
            weights, norm = segmentation.BASELINE_WEIGHTS, "none"
        else:
            weights = segmentation.CostWeights.parse(args.weights) if args.weights else segmentation.CostWeights()
            norm = args.normalization or "max"
        threshold = segmentation.STRICT_MAJORITY if args.threshold is None else args.threshold
        cfg = segmentation.SegmentationConfig(weights=weights, knn=args.knn, normalization=norm,
                                              majority_threshold=threshold)
        cfg.threshold_for(len(args.example))
    except ValueError as e:
        raise UsageError(str(e)) from e
    if cfg.weights.lambda_r > 0 and not args.rois:
        raise UsageError("ROI set required when lambda_r > 0 (pass --rois or set the third weight to 0)")
    if args.jobs < 1:
        raise UsageError("--jobs must be >= 1")
    return cfg


def cmd_segment(args) -> int:
    cfg = _segment_config(args)
    t = _load(io.read_tractogram, args.tractogram)
    name = args.name or Path(args.example[0]).stem
    examples = [Bundle(name, streamlines=tuple(_load(io.read_tractogram, p))) for p in args.example]
    rois = _load_rois(args.rois)
    result = segmentation.segment_multi(examples, t, rois, cfg, jobs=args.jobs)
    if not result.selected_ids:
        print(f"warning: no streamline reached the vote threshold {result.threshold}", file=sys.stderr)

    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    labels = "\n".join([name, *(str(i) for i in sorted(result.selected_ids))]) + "\n"
    (out / f"{name}.txt").write_text(labels)

    buf = _stdio.StringIO()
    buf.write(f"# weights={cfg.weights} normalization={cfg.normalization} knn={cfg.knn} "
              f"threshold={result.threshold} examples={len(examples)}\n")
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(REPORT_HEADER)
    for i, (c, n) in enumerate(zip(result.per_example_cost, result.per_example_candidates)):
        w.writerow((i, _fmt(c), n))
    (out / "report.csv").write_text(buf.getvalue())
    logger.info("selected %d streamlines (threshold %d)", len(result.selected_ids), result.threshold)
    return 0


# -- evaluate ------------------------------------------------------------------

def cmd_evaluate(args) -> int:
    if len(args.estimate) != len(args.truth):
        raise UsageError("--estimate and --truth must be given the same number of times")
    t = _load(io.read_tractogram, args.tractogram)
    grid = _load(io.read_grid, args.grid)
    w = csv.writer(sys.stdout, lineterminator="\n")
    w.writerow(EVAL_HEADER)
    for pe, pt in zip(args.estimate, args.truth):
        est_b = _load(io.read_bundle_labels, pe)
        tru_b = _load(io.read_bundle_labels, pt)
        try:
            est = evaluation.voxelize(est_b, t, grid)
        except BundleSegError as e:
            raise InputError(pe, e) from e
        try:
            tru = evaluation.voxelize(tru_b, t, grid)
        except BundleSegError as e:
            raise InputError(pt, e) from e
        w.writerow((tru_b.name, _fmt(evaluation.dsc(est, tru)), len(est), len(tru)))
    return 0


# -- gen -----------------------------------------------------------------------

def cmd_gen(args) -> int:
    if args.spec:
        text = _load(lambda p: Path(p).read_text(), args.spec)
        spec = _load(lambda _: synth.SynthSpec.from_json(text), args.spec)
    else:
        spec = synth.SynthSpec(seed=args.seed)
    try:
        spec.validate()
    except BundleSegError as e:
        raise InputError(args.spec or "<default spec>", e) from e
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    (out / "spec.json").write_text(spec.to_json() + "\n")
    io.write_grid(out / "grid.txt", spec.grid)
    subjects = synth.generate_study(spec, (0, 1))
    for label, s in zip(("A", "B"), subjects):
        d = out / label
        d.mkdir(exist_ok=True)
        io.write_tractogram(d / "tractogram.bseg", s.tractogram)
        for name, b in s.bundles.items():
            io.write_bundle_labels(d / f"{name}.txt", b)
            for r, roi in enumerate(s.rois[name], start=1):
                io.write_roi(d / f"{name}_roi{r}.txt", roi)
    ex_dir = out / "examples"
    ex_dir.mkdir(exist_ok=True)
    a = subjects[0]
    for b in spec.bundles:
        geom = a.bundle_geometry(b.name)
        for e in range(N_GEN_EXAMPLES):
            ex = synth.perturb_example(geom, GEN_EXAMPLE_SIGMA, spec.seed * 100 + e)
            io.write_tractogram(ex_dir / f"{b.name}_{e}.bseg", _as_tractogram(ex))
    print(out)
    return 0


def _as_tractogram(b: Bundle) -> Tractogram:
    return Tractogram(b.resolve(), source=b.name)


# -- dist ----------------------------------------------------------------------

def cmd_dist(args) -> int:
    ta = _load(io.read_tractogram, args.a)
    tb = _load(io.read_tractogram, args.b)
    if len(ta) != len(tb):
        raise InputError(args.b, f"holds {len(tb)} streamlines, {args.a} holds {len(ta)}")
    rois = _load_rois(args.rois)
    w = csv.writer(sys.stdout, lineterminator="\n")
    w.writerow(DIST_HEADER)
    for i, (sa, sb) in enumerate(zip(ta, tb)):
        r = _fmt(metrics.d_rois(sa, sb, rois)) if rois is not None else ""
        w.writerow((i, _fmt(metrics.d_mc(sa, sb)), _fmt(metrics.d_end(sa, sb)), r))
    return 0


# -- lap-solve -----------------------------------------------------------------

def _read_matrix(path) -> np.ndarray:
    rows = []
    with open(path, newline="") as fh:
        for n, row in enumerate(csv.reader(fh), start=1):
            if not row or (row[0].lstrip().startswith("#")):
                continue
            try:
                rows.append([float(x) for x in row])
            except ValueError:
                raise ValueError(f"line {n}: non-numeric entry") from None
    if rows and len({len(r) for r in rows}) != 1:
        raise ValueError("rows have different lengths")
    return np.array(rows, dtype=np.float64)


def cmd_lap_solve(args) -> int:
    try:
        m = _read_matrix(args.matrix)
        a = lap.solve_rlap(m)
    except OSError as e:
        raise InputError(args.matrix, e) from e
    except (BundleSegError, ValueError) as e:
        raise InputError(args.matrix, e) from e
    print("row_to_col," + ",".join(str(j) for j in a.row_to_col))
    print("total_cost," + _fmt(a.total_cost))
    return 0


# -- parser --------------------------------------------------------------------

def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="bundleseg", description=__doc__.split("\n\n")[0],
                                formatter_class=argparse.RawDescriptionHelpFormatter)
    p.add_argument("--version", action="version", version=f"%(prog)s {__version__} ({BACKEND} kernels)")
    p.add_argument("-v", "--verbose", action="count", default=0, help="more diagnostics on stderr")
    sub = p.add_subparsers(dest="command", required=True, metavar="COMMAND")

    s = sub.add_parser("segment", help="segment a bundle using example bundles",
                       description="Writes OUT/<name>.txt (bundle labels) and OUT/report.csv with "
                                   "header example_index,total_cost,candidates, preceded by a '#' "
                                   "provenance line.")
    s.add_argument("--tractogram", required=True, help="target tractogram (.bseg)")
    s.add_argument("--example", action="append", required=True,
                   help="example bundle as a .bseg file; repeat for several examples")
    s.add_argument("--rois", nargs="+", help="ROI mask files defining the bundle")
    s.add_argument("--weights", help="lambda_D,lambda_E,lambda_R (default 1,0.4,1.6)")
    s.add_argument("--knn", type=int, default=20, help="candidate neighbours per example streamline")
    s.add_argument("--normalization", choices=("max", "range", "none", "max-scale", "range-scale"),
                   help="per-block normalization (default max)")
    s.add_argument("--threshold", type=int, help="votes needed to keep a streamline (default strict majority)")
    s.add_argument("--baseline", action="store_true", help="weights 1,0,0 with no normalization")
    s.add_argument("--jobs", type=int, default=1, help="worker threads for per-example solves")
    s.add_argument("--name", help="bundle name (default: stem of the first example)")
    s.add_argument("--out", required=True, help="output directory")
    s.set_defaults(func=cmd_segment)

    e = sub.add_parser("evaluate", help="Dice coefficient between label files",
                       description="Prints CSV with header bundle,dsc,voxels_est,voxels_truth.")
    e.add_argument("--estimate", action="append", required=True, help="estimated labels; repeatable")
    e.add_argument("--truth", action="append", required=True, help="ground-truth labels; repeatable")
    e.add_argument("--tractogram", required=True)
    e.add_argument("--grid", required=True, help="grid file (shape and affine)")
    e.set_defaults(func=cmd_evaluate)

    g = sub.add_parser("gen", help="write a synthetic two-subject study")
    g.add_argument("--spec", help="SynthSpec JSON (default: built-in defaults)")
    g.add_argument("--seed", type=int, default=0, help="seed when --spec is not given")
    g.add_argument("--out", required=True)
    g.set_defaults(func=cmd_gen)

    d = sub.add_parser("dist", help="pairwise distances between matching streamlines",
                       description="Prints CSV with header index,d_mc,d_end,d_rois "
                                   "(d_rois empty without --rois).")
    d.add_argument("--a", required=True)
    d.add_argument("--b", required=True)
    d.add_argument("--rois", nargs="+")
    d.set_defaults(func=cmd_dist)

    ls = sub.add_parser("lap-solve", help="solve an assignment problem",
                        description="Reads a CSV cost matrix (rows <= columns) and prints "
                                    "'row_to_col,...' and 'total_cost,...'.")
    ls.add_argument("--matrix", required=True)
    ls.set_defaults(func=cmd_lap_solve)
    return p


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    logging.basicConfig(level=logging.WARNING - 10 * min(args.verbose, 2), stream=sys.stderr,
                        format="%(levelname)s: %(message)s")
    try:
        return args.func(args)
    except UsageError as e:
        parser.exit(2, f"{parser.prog} {args.command}: error: {e}\n")
    except InputError as e:
        print(f"{parser.prog} {args.command}: error: {e}", file=sys.stderr)
        return 1
    except BundleSegError as e:
        print(f"{parser.prog} {args.command}: error: {e}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
