import os
import subprocess
import sys

import numpy as np
import pytest

from mfattitude import BACKEND, _kernels_py

try:
    from mfattitude import _kernels
except ImportError:
    _kernels = None

needs_ext = pytest.mark.skipif(_kernels is None, reason="compiled kernels not built")


def random_points(rng, n=200):
    scale = 10 ** rng.uniform(-2, 3.5, size=(n, 1))
    s = rng.uniform(-1, 1, size=(n, 3)) * scale
    return s


@needs_ext
def test_compiled_backend_selected_by_default():
    assert BACKEND == "compiled"


@needs_ext
def test_backends_agree_on_moments(rng):
    for s in random_points(rng):
        a = _kernels_py.moments_hess(*s)
        b = _kernels.moments_hess(*s)
        assert a[0] == pytest.approx(b[0], rel=1e-13, abs=1e-13)
        np.testing.assert_allclose(a[1], b[1], atol=1e-13)
        np.testing.assert_allclose(a[2], b[2], rtol=1e-10, atol=1e-13)
        c = _kernels.moments(*s)
        assert c[0] == pytest.approx(b[0], rel=1e-14, abs=1e-14)
        np.testing.assert_allclose(c[1:], b[1], atol=1e-15)


@needs_ext
def test_backends_agree_on_fit(rng):
    for s in random_points(rng, 100):
        d = _kernels_py.moments(*s)[1:]
        a = _kernels_py.fit_s(*d)
        b = _kernels.fit_s(*d)
        assert a[5] and b[5]
        np.testing.assert_allclose(a[:3], b[:3], rtol=1e-9, atol=1e-9)


def test_fit_inverts_moments(rng):
    for s in random_points(rng, 100):
        s = np.abs(s)
        s = np.sort(s)[::-1]
        d = _kernels_py.moments(*s)[1:]
        res = _kernels_py.fit_s(*d)
        assert res[5]
        np.testing.assert_allclose(res[:3], s, rtol=1e-7, atol=1e-7)


def test_env_forces_python_fallback():
    code = "from mfattitude import BACKEND, _backend; print(BACKEND, _backend.kernels.__name__)"
    out = subprocess.run([sys.executable, "-c", code], capture_output=True, text=True, check=True,
                         env={**os.environ, "MFATTITUDE_PUREPY": "1"})
    assert out.stdout.split() == ["python", "mfattitude._kernels_py"]
