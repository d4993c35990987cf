import numpy as np
import pytest
from hypothesis import strategies as st

from bundleseg import _backend, _pykernels
from bundleseg.core import RoiMask, Streamline, Tractogram

BACKENDS = [_pykernels]
try:
    from bundleseg import _ckernels
    BACKENDS.append(_ckernels)
except ImportError:  # extension not built
    pass


@pytest.fixture(params=BACKENDS, ids=lambda k: k.NAME)
def kernels(request):
    return request.param


def random_streamline(rng, n_lo=2, n_hi=12, scale=10.0):
    n = int(rng.integers(n_lo, n_hi + 1))
    return Streamline(rng.uniform(-scale, scale, size=(n, 3)))


def random_walk(rng, n=20, start=None, step=1.0):
    start = np.zeros(3) if start is None else np.asarray(start, dtype=float)
    return Streamline(start + np.cumsum(rng.normal(scale=step, size=(n, 3)), axis=0))


def random_roi(rng, shape=(8, 8, 8), size=1.0, m=3):
    vox = np.column_stack([rng.integers(0, s, size=m) for s in shape])
    return RoiMask(shape, np.diag([size, size, size, 1.0]), vox)


def random_tractogram(rng, m=10, n=10):
    return Tractogram([random_walk(rng, n, start=rng.uniform(-20, 20, 3)) for _ in range(m)])


finite = st.floats(min_value=-50, max_value=50, allow_nan=False, allow_infinity=False, width=64)


@st.composite
def streamlines(draw, min_points=2, max_points=8):
    n = draw(st.integers(min_points, max_points))
    pts = draw(st.lists(st.tuples(finite, finite, finite), min_size=n, max_size=n))
    return Streamline(np.array(pts))


# one line per acceptance criterion, printed after the test run
ACCEPTANCE = {}


def pytest_terminal_summary(terminalreporter):
    if not ACCEPTANCE:
        return
    terminalreporter.section("acceptance criteria")
    for n in sorted(ACCEPTANCE):
        terminalreporter.write_line(ACCEPTANCE[n])
