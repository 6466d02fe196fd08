"""Compiled vs numpy kernel timings.

    python benchmarks/bench_kernels.py [--repeat N]

Both backends are imported directly, so ``FUNET_KERNELS`` is irrelevant here.
Outputs are checked for agreement before timing.
"""
import argparse
import timeit

import numpy as np

from fingerunet import _pykernels

try:
    from fingerunet import _ckernels
except ImportError:
    _ckernels = None


def cases(gen):
    x = gen.standard_normal((4, 16, 66, 66)).astype(np.float32)
    w = gen.standard_normal((16, 3, 3)).astype(np.float32)
    gout = gen.standard_normal((4, 16, 64, 64)).astype(np.float32)
    pool = gen.standard_normal((4, 16, 64, 64)).astype(np.float32)
    binary = (gen.random((128, 128)) < 0.5).astype(np.uint8)
    cols_x = np.ascontiguousarray(x[:, :4])
    cols = _pykernels.im2col(cols_x, 3, 1)
    _, idx = _pykernels.maxpool2_forward(pool)
    pool_g = gen.standard_normal((4, 16, 32, 32)).astype(np.float32)
    return {
        "im2col 4x4x66x66 k3": lambda b: b.im2col(cols_x, 3, 1),
        "col2im 4x4x66x66 k3": lambda b: b.col2im(cols, cols_x.shape, 3, 1, 64, 64),
        "depthwise fwd 4x16x64x64": lambda b: b.depthwise_forward(x, w),
        "depthwise bwd 4x16x64x64": lambda b: b.depthwise_backward(x, w, gout),
        "maxpool2 fwd 4x16x64x64": lambda b: b.maxpool2_forward(pool),
        "maxpool2 bwd 4x16x64x64": lambda b: b.maxpool2_backward(pool_g, idx),
        "zhang_suen 128x128": lambda b: b.zhang_suen(binary),
    }


def _flat(out):
    return out if isinstance(out, tuple) else (out,)


def main(argv=None):
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--repeat", type=int, default=5)
    args = ap.parse_args(argv)
    if _ckernels is None:
        print("compiled extension not built; only the numpy backend is available")
    print(f"{'kernel':<28}{'numpy ms':>12}{'cython ms':>12}{'speedup':>10}")
    for name, fn in cases(np.random.default_rng(0)).items():
        t_py = min(timeit.repeat(lambda: fn(_pykernels), number=1, repeat=args.repeat)) * 1e3
        if _ckernels is None:
            print(f"{name:<28}{t_py:>12.2f}{'-':>12}{'-':>10}")
            continue
        for a, b in zip(_flat(fn(_pykernels)), _flat(fn(_ckernels))):
            np.testing.assert_allclose(np.asarray(a), np.asarray(b), rtol=1e-4, atol=1e-4, err_msg=name)  # float32 sums, order differs
        t_c = min(timeit.repeat(lambda: fn(_ckernels), number=1, repeat=args.repeat)) * 1e3
        print(f"{name:<28}{t_py:>12.2f}{t_c:>12.2f}{t_py / t_c:>9.1f}x")


if __name__ == "__main__":
    main()
