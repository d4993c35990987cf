import subprocess
import sys

import numpy as np
import pytest

from bundleseg import cli, io
from bundleseg.core import Streamline, Tractogram


@pytest.fixture(scope="module")
def study(tmp_path_factory):
    out = tmp_path_factory.mktemp("study")
    assert cli.main(["gen", "--seed", "4", "--out", str(out)]) == 0
    return out


def _segment_args(study, out, extra=()):
    args = ["segment", "--tractogram", str(study / "B" / "tractogram.bseg"), "--name", "small",
            "--out", str(out)]
    for e in range(5):
        args += ["--example", str(study / "examples" / f"small_{e}.bseg")]
    return args + list(extra)


def test_gen_layout(study):
    for rel in ["spec.json", "grid.txt", "A/tractogram.bseg", "B/small.txt", "B/large_roi2.txt",
                "examples/large_4.bseg"]:
        assert (study / rel).is_file(), rel


def test_segment_and_evaluate(study, tmp_path, capsys):
    rois = ["--rois", str(study / "B" / "small_roi1.txt"), str(study / "B" / "small_roi2.txt")]
    assert cli.main(_segment_args(study, tmp_path, rois)) == 0
    labels = io.read_bundle_labels(tmp_path / "small.txt")
    report = (tmp_path / "report.csv").read_text().splitlines()
    assert report[0].startswith("# weights=1,0.4,1.6 normalization=max knn=20 threshold=3")
    assert report[1] == "example_index,total_cost,candidates"
    assert len(report) == 7
    capsys.readouterr()
    assert cli.main(["evaluate", "--estimate", str(tmp_path / "small.txt"), "--truth", str(study / "B" / "small.txt"),
                     "--tractogram", str(study / "B" / "tractogram.bseg"), "--grid", str(study / "grid.txt")]) == 0
    lines = capsys.readouterr().out.splitlines()
    assert lines[0] == "bundle,dsc,voxels_est,voxels_truth"
    assert lines[1].startswith("small,") and 0.0 < float(lines[1].split(",")[1]) <= 1.0
    assert labels.k >= 1


def test_evaluate_identity(study, capsys):
    truth = str(study / "B" / "large.txt")
    assert cli.main(["evaluate", "--estimate", truth, "--truth", truth, "--tractogram",
                     str(study / "B" / "tractogram.bseg"), "--grid", str(study / "grid.txt")]) == 0
    assert capsys.readouterr().out.splitlines()[1].split(",")[1] == "1"


def test_baseline_flag(study, tmp_path):
    assert cli.main(_segment_args(study, tmp_path / "a", ["--baseline"])) == 0
    assert cli.main(_segment_args(study, tmp_path / "b", ["--weights", "1,0,0", "--normalization", "none"])) == 0
    assert (tmp_path / "a" / "small.txt").read_text() == (tmp_path / "b" / "small.txt").read_text()
    assert "normalization=none" in (tmp_path / "a" / "report.csv").read_text()


def test_missing_rois_is_usage_error(study, tmp_path, capsys):
    with pytest.raises(SystemExit) as e:
        cli.main(_segment_args(study, tmp_path))
    assert e.value.code == 2
    assert "ROI set required" in capsys.readouterr().err
    assert not (tmp_path / "small.txt").exists()


@pytest.mark.parametrize("extra", [["--weights", "1,2"], ["--threshold", "6"], ["--knn", "0"], ["--jobs", "0"],
                                   ["--baseline", "--weights", "1,0,0"]])
def test_bad_flags(study, tmp_path, extra):
    with pytest.raises(SystemExit) as e:
        cli.main(_segment_args(study, tmp_path, extra + ["--rois", str(study / "B" / "small_roi1.txt")]))
    assert e.value.code == 2


def test_data_error_names_file(study, tmp_path, capsys):
    bad = tmp_path / "bad.bseg"
    bad.write_bytes(b"XXXX0000")
    rc = cli.main(["segment", "--tractogram", str(bad), "--example", str(study / "examples" / "small_0.bseg"),
                   "--baseline", "--out", str(tmp_path / "o")])
    assert rc == 1
    assert str(bad) in capsys.readouterr().err


def test_dist_identical(tmp_path, capsys):
    p = tmp_path / "t.bseg"
    io.write_tractogram(p, Tractogram([Streamline(np.arange(12.0).reshape(4, 3)), Streamline([[0, 0, 0], [1, 1, 1]])]))
    roi = tmp_path / "r.txt"
    roi.write_text("shape 4 4 4\naffine 1 0 0 0 0 1 0 0 0 0 1 0 0 0 0 1\nvoxels 1\n1 1 1\n")
    assert cli.main(["dist", "--a", str(p), "--b", str(p), "--rois", str(roi)]) == 0
    out = capsys.readouterr().out.splitlines()
    assert out == ["index,d_mc,d_end,d_rois", "0,0,0,0", "1,0,0,0"]


def test_lap_solve(tmp_path, capsys):
    m = tmp_path / "m.csv"
    m.write_text("4,1\n2,3\n")
    assert cli.main(["lap-solve", "--matrix", str(m)]) == 0
    assert capsys.readouterr().out.splitlines() == ["row_to_col,1,0", "total_cost,3"]
    m.write_text("1,2\n3\n")
    assert cli.main(["lap-solve", "--matrix", str(m)]) == 1
    assert str(m) in capsys.readouterr().err


def test_module_entry_point(tmp_path):
    m = tmp_path / "m.csv"
    m.write_text("1,5,3\n6,4,9\n")
    r = subprocess.run([sys.executable, "-m", "bundleseg", "lap-solve", "--matrix", str(m)],
                       capture_output=True, text=True)
    assert r.returncode == 0
    assert r.stdout.splitlines() == ["row_to_col,0,1", "total_cost,5"]
    assert r.stderr == ""
