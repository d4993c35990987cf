import json

import numpy as np
import pytest

from bundleseg import metrics, synth
from bundleseg.errors import InvalidSpec


@pytest.fixture(scope="module")
def study():
    spec = synth.SynthSpec(seed=3)
    return spec, synth.generate_study(spec)


def test_deterministic():
    spec = synth.SynthSpec(seed=7)
    t1, b1, r1 = synth.generate_subject(spec, 1)
    t2, b2, r2 = synth.generate_subject(spec, 1)
    assert t1 == t2 and b1 == b2 and r1 == r2
    assert all(np.array_equal(a.points, b.points) for a, b in zip(t1, t2))


def test_single_bundle_no_distractors():
    spec = synth.SynthSpec(bundles=(synth.BundleSpec("only", k=10),), distractors=0, neighbors_per_bundle=0)
    t, bundles, rois = synth.generate_subject(spec, 0)
    assert len(t) == 10 and bundles["only"].sorted_ids() == list(range(10))
    assert len(rois["only"]) == 2


def test_identity_warp_without_jitter():
    b = tuple(synth.BundleSpec(x.name, x.family, x.k, jitter=0.0, endpoint_spread=x.endpoint_spread,
                               radius=x.radius, neighbor_gap=x.neighbor_gap)
              for x in synth.SynthSpec().bundles)
    spec = synth.SynthSpec(seed=2, bundles=b, deformation=0.0)
    a, bb = synth.generate_study(spec)
    assert a.tractogram == bb.tractogram
    assert a.bundles == bb.bundles


def test_subjects_differ(study):
    _, (a, b) = study
    assert a.tractogram != b.tractogram
    assert a.bundles["small"] == b.bundles["small"]


def test_perturb_examples(study):
    _, (a, _) = study
    geom = a.bundle_geometry("large")
    assert synth.perturb_example(geom, 0.0, 1) == geom
    p1 = synth.perturb_example(geom, 1.0, 5)
    assert p1 == synth.perturb_example(geom, 1.0, 5)
    assert p1 != synth.perturb_example(geom, 1.0, 6)
    disp = np.concatenate([np.linalg.norm(x.points - y.points, axis=1)
                           for x, y in zip(p1.resolve(), geom.resolve())])
    assert disp.size >= 1000
    assert disp.max() <= 4.0 + 1e-9
    assert 0.2 <= disp.mean() <= 2.0
    with pytest.raises(ValueError):
        synth.perturb_example(geom, -1.0, 0)


def test_rois_are_waypoints(study):
    spec, (a, _) = study
    for name, rs in a.rois.items():
        cl = a.centerlines[name]
        for roi in rs:
            # voxel centres within the ROI radius of a centerline point
            d = np.linalg.norm(roi.centers[:, None] - cl.points[None], axis=-1).min(axis=1)
            assert d.max() <= synth.ROI_RADIUS + 1.0
            assert roi.grid == spec.grid


def test_roi_relevance(study):
    _, subjects = study
    for s in subjects:
        for name, b in s.bundles.items():
            prof = metrics.roi_profile(list(s.tractogram), s.rois[name])
            members = np.array(b.sorted_ids())
            others = np.setdiff1d(np.arange(len(s.tractogram)), members)
            assert prof[members].max() < np.percentile(prof[others], 90)


def test_separation_margin(study):
    _, subjects = study
    for s in subjects:
        for name, b in s.bundles.items():
            cl = [s.centerlines[name]]
            d = metrics.mc_matrix(list(s.tractogram), cl)[:, 0]
            members = np.array(b.sorted_ids())
            others = np.setdiff1d(np.arange(len(s.tractogram)), members)
            margin = float(d[others].min() - d[members].max())
            assert margin >= 5.0, f"{name}: margin {margin:.2f} mm"



def test_spec_json_roundtrip():
    spec = synth.SynthSpec(seed=11, deformation=2.5)
    back = synth.SynthSpec.from_json(spec.to_json())
    assert back.to_json() == spec.to_json()
    assert back.grid == spec.grid and back.bundles == spec.bundles


@pytest.mark.parametrize("patch", [
    {"bundles": []},
    {"bundles": [{"name": "x", "family": "zigzag"}]},
    {"bundles": [{"name": "x", "k": 0}]},
    {"bundles": [{"name": "x", "jitter": -1}]},
    {"distractors": -3},
    {"deformation": -1},
])
def test_invalid_specs(patch):
    d = json.loads(synth.SynthSpec().to_json())
    d.update(patch)
    with pytest.raises(InvalidSpec):
        synth.SynthSpec.from_json(json.dumps(d)).validate()


def test_bad_json():
    with pytest.raises(InvalidSpec):
        synth.SynthSpec.from_json("{not json")
