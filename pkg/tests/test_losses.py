import math

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from fingerunet.gradcheck import finite_difference_check
from fingerunet.losses import (LossWeights, minutia_loss_bce, orientation_decode, orientation_encode,
                               orientation_loss_mse, reconstruction_loss_l1, reconstruction_loss_l2, total_loss)
from fingerunet.tensor import ShapeError, Tensor, backward

FD_EPS = 3e-5


def t64(a, grad=False):
    return Tensor(np.asarray(a, dtype=np.float64), requires_grad=grad)


def test_l1_examples(gen):
    x = gen.random((1, 1, 4, 4))
    y = gen.random((1, 1, 4, 4))
    assert reconstruction_loss_l1(t64(x), x).item() == 0.0
    assert reconstruction_loss_l1(t64(np.zeros((2, 3))), np.ones((2, 3))).item() == 1.0
    assert reconstruction_loss_l1(t64(x), y).item() == reconstruction_loss_l1(t64(y), x).item()
    with pytest.raises(ShapeError):
        reconstruction_loss_l1(t64(x), np.zeros((1, 1, 4, 3)))


def test_l1_tie_subgradient_zero():
    p = t64([1.0, 2.0], grad=True)
    backward(reconstruction_loss_l1(p, np.array([1.0, 0.0])))
    assert np.array_equal(p.grad, [0.0, 0.5])


def test_l2_value(gen):
    x, y = gen.random(10), gen.random(10)
    assert reconstruction_loss_l2(t64(x), y).item() == pytest.approx(np.mean((x - y) ** 2))


def test_orientation_mse_examples():
    target = np.zeros((1, 2, 3, 3))
    target[:, 1] = 1.0
    full = np.ones((1, 1, 3, 3))
    assert orientation_loss_mse(t64(np.zeros((1, 2, 3, 3))), target, full).item() == 0.5
    assert orientation_loss_mse(t64(target), target, full).item() == 0.0
    assert orientation_loss_mse(t64(np.zeros((1, 2, 3, 3))), target, np.zeros((1, 1, 3, 3))).item() == 0.0
    with pytest.raises(ShapeError):
        orientation_loss_mse(t64(target), target, np.ones((1, 2, 3, 3)))


def test_orientation_mse_ignores_background(gen):
    pred, target = gen.standard_normal((2, 2, 4, 4)), gen.standard_normal((2, 2, 4, 4))
    mask = (gen.random((2, 1, 4, 4)) > 0.5).astype(float)
    ref = np.sum(((pred - target) * mask) ** 2) / (mask.sum() * 2)
    assert orientation_loss_mse(t64(pred), target, mask).item() == pytest.approx(ref)
    pred2 = pred + (1 - mask) * 100
    assert orientation_loss_mse(t64(pred2), target, mask).item() == pytest.approx(ref)


def test_bce_examples(gen):
    y = (gen.random((1, 1, 5, 5)) > 0.5).astype(float)
    assert minutia_loss_bce(t64(np.full(y.shape, 0.5)), y).item() == pytest.approx(math.log(2))
    assert minutia_loss_bce(t64(y), y).item() < 1e-6
    losses = [minutia_loss_bce(t64([[p]]), np.array([[1.0]])).item() for p in (0.2, 0.5, 0.9, 0.99)]
    assert all(a > b for a, b in zip(losses, losses[1:]))
    assert np.isfinite(minutia_loss_bce(t64([0.0, 1.0]), np.array([1.0, 0.0])).item())


def test_total_loss_examples():
    one, two, three = t64(1.0), t64(2.0), t64(3.0)
    _, bd = total_loss(one, two, three, LossWeights())
    assert bd.l_total == pytest.approx(1.3)
    _, bd = total_loss(one, two, three, LossWeights(1, 0, 0))
    assert bd.l_total == 1.0
    _, a = total_loss(one, two, three, LossWeights(0.3, 0.2, 0.5))
    _, b = total_loss(one, two, three, LossWeights(0.6, 0.4, 1.0))
    assert b.l_total == pytest.approx(2 * a.l_total)
    _, single = total_loss(two, None, None, LossWeights())
    assert single.as_dict() == {"l_r": 2.0, "l_total": pytest.approx(1.6)}


def test_weights_validation():
    assert LossWeights() == LossWeights(0.8, 0.1, 0.1)
    assert LossWeights.parse("1,0,0.5") == LossWeights(1.0, 0.0, 0.5)
    with pytest.raises(ValueError):
        LossWeights(-0.1, 0.1, 0.1)
    with pytest.raises(ValueError):
        LossWeights.parse("1,2")


def test_total_gradient_is_weighted_sum(gen):
    p = gen.random((1, 1, 4, 4))
    y = gen.random((1, 1, 4, 4))
    w = LossWeights(0.7, 0.2, 0.1)

    def grad(weights):
        x = t64(p, grad=True)
        t, _ = total_loss(reconstruction_loss_l1(x, y), minutia_loss_bce(x, np.round(y)), None, weights)
        backward(t)
        return x.grad

    g_r, g_m = grad(LossWeights(1, 0, 0)), grad(LossWeights(0, 1, 0))
    assert np.allclose(grad(w), 0.7 * g_r + 0.2 * g_m, atol=1e-12)


def test_orientation_encode_examples():
    assert np.allclose(orientation_encode(0.0), [0, 1])
    assert np.allclose(orientation_encode(np.pi / 4), [1, 0])
    assert np.allclose(orientation_encode(np.pi / 2), [0, -1])
    assert orientation_decode(np.zeros((2, 3))).tolist() == [0.0, 0.0, 0.0]


def test_decode_encode_grid():
    theta = np.arange(180) * np.pi / 180
    back = orientation_decode(orientation_encode(theta))
    err = np.abs(np.angle(np.exp(2j * (back - theta)))) / 2
    assert err.max() < 1e-6
    assert np.all((back >= 0) & (back < np.pi))


@settings(max_examples=50, deadline=None)
@given(st.floats(-20, 20), st.floats(0.1, 10))
def test_decode_scale_invariant(theta, r):
    enc = orientation_encode(np.array([theta])) * r
    d = orientation_decode(enc)[0]
    assert 0 <= d < np.pi
    assert abs(np.angle(np.exp(2j * (d - theta)))) < 1e-9


@settings(max_examples=30, deadline=None)
@given(st.integers(0, 2**31))
def test_losses_nonnegative_and_zero_at_target(seed):
    g = np.random.default_rng(seed)
    a, b = g.random((1, 1, 3, 3)), g.random((1, 1, 3, 3))
    for fn in (reconstruction_loss_l1, reconstruction_loss_l2):
        assert fn(t64(a), b).item() >= 0
        assert fn(t64(a), a).item() == 0
    assert minutia_loss_bce(t64(a), np.round(b)).item() >= 0


def test_fd_losses(gen):
    p = gen.random((2, 1, 3, 3)) * 0.8 + 0.1
    y = gen.random((2, 1, 3, 3)) + 2.0
    assert finite_difference_check(lambda x: reconstruction_loss_l1(x, y), [t64(p)], eps=FD_EPS) < 1e-5
    assert finite_difference_check(lambda x: reconstruction_loss_l2(x, y), [t64(p)], eps=FD_EPS) < 1e-5
    yb = np.round(gen.random(p.shape))
    assert finite_difference_check(lambda x: minutia_loss_bce(x, yb), [t64(p)], eps=FD_EPS) < 1e-5
    o = gen.standard_normal((2, 2, 3, 3))
    ot = gen.standard_normal(o.shape)
    mask = np.ones((2, 1, 3, 3))
    mask[0, 0, 0] = 0
    assert finite_difference_check(lambda x: orientation_loss_mse(x, ot, mask), [t64(o)], eps=FD_EPS) < 1e-5
