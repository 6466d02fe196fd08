import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from fingerunet import _pykernels as py
from fingerunet import kernels

ck = pytest.importorskip("fingerunet._ckernels")


def test_backend_selected():
    assert kernels.BACKEND in ("python", "cython")


@pytest.mark.parametrize("dtype", [np.float32, np.float64])
@pytest.mark.parametrize("k,stride", [(3, 1), (3, 2), (1, 1), (5, 1)])
def test_im2col_col2im_equal(dtype, k, stride, gen):
    x = gen.standard_normal((2, 3, 9, 8)).astype(dtype)
    a, b = py.im2col(x, k, stride), ck.im2col(x, k, stride)
    assert np.array_equal(a, b)
    oh, ow = (9 - k) // stride + 1, (8 - k) // stride + 1
    cols = gen.standard_normal(a.shape).astype(dtype)
    assert np.allclose(py.col2im(cols, x.shape, k, stride, oh, ow), ck.col2im(cols, x.shape, k, stride, oh, ow),
                       rtol=1e-5 if dtype == np.float32 else 1e-12)


def test_col2im_is_adjoint_of_im2col(gen):
    x = gen.standard_normal((1, 2, 7, 7))
    cols = py.im2col(x, 3, 1)
    c = gen.standard_normal(cols.shape)
    assert np.sum(cols * c) == pytest.approx(np.sum(x * py.col2im(c, x.shape, 3, 1, 5, 5)))


@pytest.mark.parametrize("dtype", [np.float32, np.float64])
def test_depthwise_equal(dtype, gen):
    xp = gen.standard_normal((2, 4, 10, 9)).astype(dtype)
    w = gen.standard_normal((4, 3, 3)).astype(dtype)
    tol = 1e-5 if dtype == np.float32 else 1e-12
    a, b = py.depthwise_forward(xp, w), ck.depthwise_forward(xp, w)
    assert np.allclose(a, b, rtol=tol, atol=tol)
    g = gen.standard_normal(a.shape).astype(dtype)
    for u, v in zip(py.depthwise_backward(xp, w, g), ck.depthwise_backward(xp, w, g)):
        assert np.allclose(u, v, rtol=tol, atol=tol)


@settings(max_examples=25, deadline=None)
@given(st.integers(0, 2**31), st.booleans())
def test_maxpool_equal(seed, ties):
    g = np.random.default_rng(seed)
    x = g.integers(0, 3, (2, 3, 6, 8)).astype(np.float64) if ties else g.standard_normal((2, 3, 6, 8))
    (oa, ia), (ob, ib) = py.maxpool2_forward(x), ck.maxpool2_forward(x)
    assert np.array_equal(oa, ob) and np.array_equal(ia, ib)
    gout = g.standard_normal(oa.shape)
    assert np.array_equal(py.maxpool2_backward(gout, ia), ck.maxpool2_backward(gout, ib))


@settings(max_examples=25, deadline=None)
@given(st.integers(0, 2**31), st.floats(0.3, 0.7))
def test_thinning_equal(seed, density):
    from scipy.ndimage import binary_opening
    b = (np.random.default_rng(seed).random((24, 30)) < density)
    b = binary_opening(b).astype(np.uint8)
    s1, s2 = py.zhang_suen(b), ck.zhang_suen(b)
    assert np.array_equal(s1, s2)
    assert np.array_equal(py.crossing_numbers(s1), ck.crossing_numbers(s2))


def test_python_backend_forced_by_env():
    import subprocess, sys
    out = subprocess.run([sys.executable, "-c", "from fingerunet import kernels; print(kernels.BACKEND)"],
                         env={"FUNET_KERNELS": "python", "PATH": ""}, capture_output=True, text=True, check=True)
    assert out.stdout.strip() == "python"
