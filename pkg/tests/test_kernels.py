"""The numba and numpy conv kernels must agree to float rounding."""

import numpy as np
import pytest

from glyphdiff import kernels
from glyphdiff.kernels import numpy_ops

RNG = np.random.default_rng(7)

CASES = [
    (1, 1, 1, 4, 4, 1),
    (2, 3, 4, 6, 8, 1),
    (2, 3, 4, 6, 8, 2),
    (3, 8, 5, 12, 20, 1),
    (3, 8, 5, 12, 20, 2),
    (1, 2, 2, 5, 7, 2),  # odd spatial sizes
]


@pytest.mark.parametrize("b,c,o,h,w,stride", CASES)
def test_backends_agree(b, c, o, h, w, stride):
    if "numba" not in kernels.available_backends():
        pytest.skip("numba unavailable")
    from glyphdiff.kernels import numba_ops

    x = RNG.standard_normal((b, c, h, w))
    wt = RNG.standard_normal((o, c, 3, 3))
    y_np = numpy_ops.conv2d_forward(x, wt, stride)
    y_nb = numba_ops.conv2d_forward(x, wt, stride)
    np.testing.assert_allclose(y_nb, y_np, rtol=1e-12, atol=1e-12)

    dy = RNG.standard_normal(y_np.shape)
    np.testing.assert_allclose(
        numba_ops.conv2d_backward_input(dy, wt, stride, (h, w)),
        numpy_ops.conv2d_backward_input(dy, wt, stride, (h, w)),
        rtol=1e-12, atol=1e-12,
    )
    np.testing.assert_allclose(
        numba_ops.conv2d_backward_weight(dy, x, stride),
        numpy_ops.conv2d_backward_weight(dy, x, stride),
        rtol=1e-11, atol=1e-11,
    )


def test_numpy_forward_matches_direct_loops():
    # independent scalar reference implementation
    x = RNG.standard_normal((2, 2, 5, 6))
    wt = RNG.standard_normal((3, 2, 3, 3))
    for stride in (1, 2):
        got = numpy_ops.conv2d_forward(x, wt, stride)
        b, o, ho, wo = got.shape
        xp = np.pad(x, ((0, 0), (0, 0), (1, 1), (1, 1)))
        want = np.zeros_like(got)
        for bi in range(b):
            for oi in range(o):
                for hi in range(ho):
                    for wi in range(wo):
                        acc = 0.0
                        for ci in range(x.shape[1]):
                            for ky in range(3):
                                for kx in range(3):
                                    acc += xp[bi, ci, hi * stride + ky, wi * stride + kx] * wt[oi, ci, ky, kx]
                        want[bi, oi, hi, wi] = acc
        np.testing.assert_allclose(got, want, rtol=1e-12, atol=1e-12)


def test_env_flag_selects_backend(monkeypatch):
    old = kernels.active_backend()
    try:
        kernels.set_backend("numpy")
        assert kernels.active_backend() == "numpy"
        x = RNG.standard_normal((1, 1, 4, 4)).astype(np.float32)
        wt = RNG.standard_normal((1, 1, 3, 3)).astype(np.float32)
        assert kernels.conv2d_forward(x, wt, 1).shape == (1, 1, 4, 4)
    finally:
        kernels.set_backend(old)
    with pytest.raises(RuntimeError):
        kernels.set_backend("cuda")
