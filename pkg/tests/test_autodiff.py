"""Substrate tests: forward examples against hand oracles, gradients against
central finite differences in float64."""

import numpy as np
import pytest

from glyphdiff import autodiff as ad
from glyphdiff import kernels
from glyphdiff.errors import DeterminismError, NumericStateError, ShapeMismatch

RNG = np.random.default_rng(20240911)


def fd_grad(f, x, h=1e-6):
    """Central finite differences of a scalar-valued closure w.r.t. array x."""
    g = np.zeros_like(x)
    flat = x.reshape(-1)
    gf = g.reshape(-1)
    for i in range(flat.size):
        orig = flat[i]
        flat[i] = orig + h
        up = f()
        flat[i] = orig - h
        down = f()
        flat[i] = orig
        gf[i] = (up - down) / (2.0 * h)
    return g


def check_op(build, *arrays, tol=1e-6):
    """Compare backward() gradients of loss = mean(build(*tensors) * R) to FD."""
    tensors = [ad.Tensor(a, requires_grad=True) for a in arrays]
    out = build(*tensors)
    r = RNG.standard_normal(out.data.shape)

    def loss_value():
        return ad.mean(ad.mul(build(*[ad.Tensor(a) for a in arrays]), ad.Tensor(r))).item()

    loss = ad.mean(ad.mul(out, ad.Tensor(r)))
    ad.backward(loss)
    for t, a in zip(tensors, arrays):
        fd = fd_grad(loss_value, a)
        got = t.grad if t.grad is not None else np.zeros_like(a)
        np.testing.assert_allclose(got, fd, rtol=tol, atol=tol)


# ---------------------------------------------------------------------------
# forward examples


def test_matmul_identity():
    a = RNG.standard_normal((3, 5))
    out = ad.matmul(ad.Tensor(np.eye(3)), ad.Tensor(a))
    np.testing.assert_array_equal(out.data, a)


def test_softmax_symmetry():
    out = ad.softmax(ad.Tensor(np.zeros(3)))
    np.testing.assert_allclose(out.data, np.full(3, 1.0 / 3.0))


def test_softmax_rows_sum_to_one():
    x = ad.Tensor(RNG.standard_normal((4, 7)) * 5)
    out = ad.softmax(x).data
    np.testing.assert_allclose(out.sum(axis=-1), np.ones(4), atol=1e-6)
    assert np.all(out > 0) and np.all(out < 1)


def test_softmax_rejects_nonfinite():
    with pytest.raises(NumericStateError):
        ad.softmax(ad.Tensor(np.array([0.0, np.inf])))


def test_conv_ones_kernel_constant_image():
    # all-ones 3x3 kernel over a constant image: interior pixels see 9c,
    # edges see fewer taps because of the zero padding
    c = 0.37
    x = ad.Tensor(np.full((1, 1, 5, 6), c))
    w = ad.Tensor(np.ones((1, 1, 3, 3)))
    out = ad.conv2d(x, w).data[0, 0]
    assert out[2, 3] == pytest.approx(9 * c, rel=1e-12)
    assert out[0, 0] == pytest.approx(4 * c, rel=1e-12)
    assert out[0, 3] == pytest.approx(6 * c, rel=1e-12)


def test_conv_shape_contracts():
    x = ad.Tensor(np.zeros((2, 3, 8, 8)))
    w = ad.Tensor(np.zeros((4, 3, 3, 3)))
    assert ad.conv2d(x, w, stride=1).shape == (2, 4, 8, 8)
    assert ad.conv2d(x, w, stride=2).shape == (2, 4, 4, 4)
    with pytest.raises(ShapeMismatch):
        ad.conv2d(ad.Tensor(np.zeros((2, 5, 8, 8))), w)


def test_concat_then_slice_roundtrip():
    a = RNG.standard_normal((2, 3, 4, 5))
    b = RNG.standard_normal((2, 2, 4, 5))
    cat = ad.concat_channels([ad.Tensor(a), ad.Tensor(b)])
    np.testing.assert_array_equal(ad.slice_channels(cat, 0, 3).data, a)
    np.testing.assert_array_equal(ad.slice_channels(cat, 3, 5).data, b)


def test_upsample_nearest():
    x = np.arange(4.0).reshape(1, 1, 2, 2)
    out = ad.upsample2x(ad.Tensor(x)).data
    assert out.shape == (1, 1, 4, 4)
    np.testing.assert_array_equal(out[0, 0], x[0, 0].repeat(2, 0).repeat(2, 1))


def test_forward_bit_identical():
    x = RNG.standard_normal((2, 4, 8, 8)).astype(np.float32)
    w = RNG.standard_normal((4, 4, 3, 3)).astype(np.float32)
    a = ad.conv2d(ad.Tensor(x), ad.Tensor(w)).data
    b = ad.conv2d(ad.Tensor(x), ad.Tensor(w)).data
    assert a.tobytes() == b.tobytes()


# ---------------------------------------------------------------------------
# backward examples


def test_square_gradient():
    x = ad.Tensor(np.asarray(3.0), requires_grad=True)
    ad.backward(ad.mean(ad.mul(x, x)))
    assert x.grad == pytest.approx(6.0)


def test_mse_zero_at_match():
    a = RNG.standard_normal((3, 4))
    t = ad.Tensor(a.copy(), requires_grad=True)
    loss = ad.mse(t, ad.Tensor(a.copy()))
    assert loss.item() == 0.0
    ad.backward(loss)
    np.testing.assert_array_equal(t.grad, np.zeros_like(a))


def test_backward_requires_scalar():
    t = ad.Tensor(np.zeros((2, 2)), requires_grad=True)
    with pytest.raises(ShapeMismatch):
        ad.backward(ad.add(t, t))


# ---------------------------------------------------------------------------
# gradient checks per op (finite-difference oracle)


def test_grad_add_broadcast():
    check_op(ad.add, RNG.standard_normal((3, 4, 5)), RNG.standard_normal((4, 1)))


def test_grad_sub():
    check_op(ad.sub, RNG.standard_normal((2, 6)), RNG.standard_normal((2, 6)))


def test_grad_mul_broadcast():
    check_op(ad.mul, RNG.standard_normal((2, 3, 4)), RNG.standard_normal((3, 4)))


def test_grad_scale_reshape_transpose():
    check_op(lambda t: ad.scale(t, -1.7), RNG.standard_normal((3, 4)))
    check_op(lambda t: ad.reshape(t, (6, 2)), RNG.standard_normal((3, 4)))
    check_op(lambda t: ad.transpose(t, (1, 0, 2)), RNG.standard_normal((2, 3, 4)))


def test_grad_matmul_2d_3d():
    check_op(ad.matmul, RNG.standard_normal((4, 3)), RNG.standard_normal((3, 5)))
    check_op(ad.matmul, RNG.standard_normal((2, 4, 3)), RNG.standard_normal((2, 3, 5)))
    check_op(ad.matmul, RNG.standard_normal((2, 4, 3)), RNG.standard_normal((3, 5)))


@pytest.mark.parametrize("backend", kernels.available_backends())
@pytest.mark.parametrize("stride", [1, 2])
def test_grad_conv2d(backend, stride):
    old = kernels.set_backend(backend)
    try:
        check_op(
            lambda x, w, b: ad.conv2d(x, w, bias=b, stride=stride),
            RNG.standard_normal((2, 3, 6, 8)),
            RNG.standard_normal((4, 3, 3, 3)),
            RNG.standard_normal(4),
            tol=1e-5,
        )
    finally:
        kernels.set_backend(old)


def test_grad_upsample():
    check_op(ad.upsample2x, RNG.standard_normal((2, 3, 4, 5)))


def test_grad_concat_slice():
    check_op(
        lambda a, b: ad.slice_channels(ad.concat_channels([a, b]), 1, 4),
        RNG.standard_normal((2, 3, 2, 2)),
        RNG.standard_normal((2, 2, 2, 2)),
    )


def test_grad_group_norm():
    check_op(
        lambda x, g, b: ad.group_norm(x, g, b, num_groups=2),
        RNG.standard_normal((2, 4, 3, 3)),
        RNG.standard_normal(4),
        RNG.standard_normal(4),
        tol=1e-5,
    )


def test_grad_layer_norm():
    check_op(
        lambda x, g, b: ad.layer_norm(x, g, b),
        RNG.standard_normal((2, 5, 6)),
        RNG.standard_normal(6),
        RNG.standard_normal(6),
        tol=1e-5,
    )


def test_grad_silu_softmax():
    check_op(ad.silu, RNG.standard_normal((3, 4)))
    check_op(ad.softmax, RNG.standard_normal((3, 4)))


def test_grad_embedding():
    ids = np.array([[0, 2, 2], [1, 0, 3]])
    check_op(lambda t: ad.embedding(t, ids), RNG.standard_normal((4, 5)))


def test_grad_mean_axes_and_mse():
    check_op(lambda t: ad.mean(t, axis=(2, 3)), RNG.standard_normal((2, 3, 4, 5)))
    check_op(ad.mse, RNG.standard_normal((3, 4)), RNG.standard_normal((3, 4)))


def test_two_layer_net_sampled_params():
    # random two-layer network: analytic gradients vs central differences on
    # a sampled subset of 64 parameters, 64-bit, rel err < 1e-3
    params = ad.ParamSet()
    params.add("w1", RNG.standard_normal((6, 16)) * 0.5)
    params.add("b1", RNG.standard_normal(16) * 0.1)
    params.add("w2", RNG.standard_normal((16, 3)) * 0.5)
    params.add("b2", RNG.standard_normal(3) * 0.1)
    x = RNG.standard_normal((5, 6))
    y = RNG.standard_normal((5, 3))

    def loss():
        h = ad.silu(ad.add(ad.matmul(ad.Tensor(x), params["w1"]), params["b1"]))
        out = ad.add(ad.matmul(h, params["w2"]), params["b2"])
        return ad.mse(out, ad.Tensor(y))

    report = ad.grad_check(loss, params, n_samples=64, seed=3)
    assert report.passed, repr(report)
    assert report.max_rel_err < 1e-3


# ---------------------------------------------------------------------------
# grad_check harness itself


def test_grad_check_sum_exact():
    # integer values and an exact-arithmetic step make the FD quotient exact,
    # so a correct gradient of sum() yields a literal zero error
    params = ad.ParamSet()
    params.add("x", np.arange(8, dtype=np.float64))

    def loss():
        return ad.mean(ad.scale(params["x"], 8.0))  # == sum(x)

    report = ad.grad_check(loss, params, h=0.5)
    assert report.max_rel_err == 0.0
    assert report.passed


def test_grad_check_detects_wrong_gradient():
    params = ad.ParamSet()
    params.add("good", np.array([1.5, -0.5]))
    params.add("evil", np.array([0.25, 1.25]))

    def broken(t):
        # forward is t*t but the registered gradient is deliberately wrong
        def grad(g):
            return (np.zeros_like(t.data),)

        return ad.Tensor(t.data * t.data, requires_grad=True, parents=(t,), grad_fn=grad)

    def loss():
        return ad.mean(ad.add(ad.mul(params["good"], params["good"]), broken(params["evil"])))

    report = ad.grad_check(loss, params)
    assert not report.passed
    assert report.worst_param == "evil"


def test_grad_check_rejects_nondeterminism():
    params = ad.ParamSet()
    params.add("x", np.ones(2))
    state = {"n": 0}

    def loss():
        state["n"] += 1
        return ad.mean(ad.scale(params["x"], float(state["n"])))

    with pytest.raises(DeterminismError):
        ad.grad_check(loss, params)


# ---------------------------------------------------------------------------
# ParamSet contracts


def test_paramset_unique_names_and_frozen_shapes():
    ps = ad.ParamSet()
    ps.add("w", np.zeros((2, 2)))
    with pytest.raises(ValueError):
        ps.add("w", np.zeros(3))
    with pytest.raises(ShapeMismatch):
        ps.load_arrays({"w": np.zeros((3, 3))})


def test_paramset_iteration_order_stable():
    ps = ad.ParamSet()
    for name in ["zeta", "alpha", "mid"]:
        ps.add(name, np.zeros(1))
    assert ps.names() == ["zeta", "alpha", "mid"]
