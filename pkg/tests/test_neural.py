"""Layer forward/backward vs finite differences, Adam behavior."""

import numpy as np
import pytest

from toothfill.errors import DivergedGradient, ToothfillError
from toothfill.neural import (
    AdamState,
    DenseLayer,
    adam_step,
    backward,
    backward_input_only,
    forward,
    init_dense_stack,
)


def test_identity_layer():
    layer = DenseLayer(np.eye(4), np.zeros(4), "none")
    x = np.array([1.0, -2.0, 3.0, 0.5])
    y, _ = forward([layer], x)
    assert np.array_equal(y, x)


def test_scalar_affine():
    layer = DenseLayer(np.array([[2.0]]), np.array([1.0]), "none")
    y, _ = forward([layer], np.array([3.0]))
    assert y[0] == 7.0


def test_two_layers_match_straight_line_recomputation(rng):
    sizes = [5, 7, 3]
    stack = init_dense_stack(sizes, ["relu", "none"], rng)
    x = rng.standard_normal(5)
    y, _ = forward(stack, x)
    h = np.maximum(stack[0].weights @ x + stack[0].bias, 0.0)
    ref = stack[1].weights @ h + stack[1].bias
    assert np.abs(y - ref).max() < 1e-12


def test_identity_backward():
    layer = DenseLayer(np.eye(3), np.zeros(3), "none")
    x = np.array([1.0, 2.0, 3.0])
    _, tape = forward([layer], x)
    e1 = np.array([1.0, 0.0, 0.0])
    grads, dx = backward(tape, e1)
    assert np.array_equal(dx.ravel(), e1)
    assert np.array_equal(grads[0][0], np.outer(e1, x))
    assert np.array_equal(grads[0][1], e1)


def test_zero_cotangent_zero_gradients(rng):
    stack = init_dense_stack([4, 6, 2], ["relu", "tanh"], rng)
    x = rng.standard_normal(4)
    _, tape = forward(stack, x)
    grads, dx = backward(tape, np.zeros(2))
    assert np.abs(dx).max() == 0.0
    assert all(np.abs(dw).max() == 0.0 and np.abs(db).max() == 0.0 for dw, db in grads)


def finite_difference_check(stack, x, h=1e-4):
    """Max relative error between analytic and central-difference grads."""
    y, tape = forward(stack, x)
    cot = np.ones_like(np.atleast_1d(y))
    grads, dx = backward(tape, cot)

    def loss_at(x_probe):
        out, _ = forward(stack, x_probe)
        return np.sum(out)

    worst = 0.0
    for j in range(len(x)):
        xp = x.copy()
        xp[j] += h
        xm = x.copy()
        xm[j] -= h
        num = (loss_at(xp) - loss_at(xm)) / (2 * h)
        denom = max(abs(num), abs(dx.ravel()[j]), 1e-6)
        worst = max(worst, abs(num - dx.ravel()[j]) / denom)
    # parameter spot checks
    for li, layer in enumerate(stack):
        flat = layer.weights.ravel()
        for j in range(0, flat.size, max(1, flat.size // 7)):
            old = flat[j]
            flat[j] = old + h
            up = loss_at(x)
            flat[j] = old - h
            dn = loss_at(x)
            flat[j] = old
            num = (up - dn) / (2 * h)
            ana = grads[li][0].ravel()[j]
            denom = max(abs(num), abs(ana), 1e-6)
            worst = max(worst, abs(num - ana) / denom)
    return worst


def test_three_layer_gradients_match_finite_differences(rng):
    stack = init_dense_stack([6, 8, 8, 2], ["relu", "tanh", "none"], rng)
    x = rng.standard_normal(6)
    assert finite_difference_check(stack, x) < 1e-4


def test_sigmoid_gradients(rng):
    stack = init_dense_stack([3, 5, 1], ["sigmoid", "sigmoid"], rng)
    x = rng.standard_normal(3)
    assert finite_difference_check(stack, x) < 1e-4


def test_batched_equals_rowwise_bitwise(rng):
    stack = init_dense_stack([5, 9, 4], ["relu", "tanh"], rng)
    xs = rng.standard_normal((13, 5))
    batched, _ = forward(stack, xs, rowwise=True)
    for i in range(13):
        yi, _ = forward(stack, xs[i])
        assert np.array_equal(yi, batched[i])


def test_forward_deterministic(rng):
    stack = init_dense_stack([4, 4, 1], ["relu", "none"], rng)
    x = rng.standard_normal((8, 4))
    a, _ = forward(stack, x)
    b, _ = forward(stack, x)
    assert np.array_equal(a, b)


def test_dimension_mismatch_rejected(rng):
    stack = init_dense_stack([4, 4], ["none"], rng)
    with pytest.raises(ToothfillError):
        forward(stack, np.zeros(5))


def test_batched_backward_sums_rows(rng):
    stack = init_dense_stack([3, 6, 2], ["relu", "none"], rng)
    xs = rng.standard_normal((4, 3))
    cot = rng.standard_normal((4, 2))
    _, tape = forward(stack, xs)
    grads, dx = backward(tape, cot)
    # accumulate one row at a time
    acc = [np.zeros_like(dw) for dw, _ in grads]
    for i in range(4):
        _, t1 = forward(stack, xs[i])
        g1, _ = backward(t1, cot[i])
        for a, (dw, _) in zip(acc, g1):
            a += dw
    for a, (dw, _) in zip(acc, grads):
        assert np.abs(a - dw).max() < 1e-12


def test_backward_input_only_matches_full(rng):
    stack = init_dense_stack([4, 7, 3], ["relu", "tanh"], rng)
    xs = rng.standard_normal((5, 4))
    cot = rng.standard_normal((5, 3))
    _, tape = forward(stack, xs)
    _, dx_full = backward(tape, cot)
    dx_fast = backward_input_only(tape, cot)
    assert np.array_equal(dx_full, dx_fast)


# ---------------------------------------------------------------------------
# Adam
# ---------------------------------------------------------------------------

def test_adam_zero_gradient_no_motion():
    p = [np.array([1.0, -2.0])]
    st = AdamState.for_params(p)
    adam_step(p, [np.zeros(2)], st, lr=0.1)
    assert np.array_equal(p[0], np.array([1.0, -2.0]))


def test_adam_lr_zero_identity(rng):
    p = [rng.standard_normal((3, 3))]
    before = p[0].copy()
    st = AdamState.for_params(p)
    adam_step(p, [rng.standard_normal((3, 3))], st, lr=0.0)
    assert np.array_equal(p[0], before)


def test_adam_quadratic_convergence():
    w = np.array([1.0])
    p = [w]
    st = AdamState.for_params(p)
    for _ in range(500):
        adam_step(p, [2.0 * w], st, lr=0.1)
    assert abs(w[0]) < 1e-3


def test_adam_quadratic_matches_scalar_recurrence():
    # independent scalar implementation of the same recurrence
    w_ref, m, v, t = 1.0, 0.0, 0.0, 0
    for _ in range(100):
        g = 2.0 * w_ref
        t += 1
        m = 0.9 * m + 0.1 * g
        v = 0.999 * v + 0.001 * g * g
        mhat = m / (1 - 0.9 ** t)
        vhat = v / (1 - 0.999 ** t)
        w_ref -= 0.1 * mhat / (np.sqrt(vhat) + 1e-8)

    w = np.array([1.0])
    p = [w]
    st = AdamState.for_params(p)
    for _ in range(100):
        adam_step(p, [2.0 * w], st, lr=0.1)
    assert abs(w[0] - w_ref) < 1e-12


def test_adam_first_step_is_signed_lr(rng):
    g = rng.standard_normal(6) * 3.0
    w = np.zeros(6)
    p = [w]
    st = AdamState.for_params(p)
    adam_step(p, [g.copy()], st, lr=0.01)
    assert np.abs(w + 0.01 * np.sign(g)).max() < 1e-6


def test_adam_rejects_non_finite():
    p = [np.zeros(2)]
    st = AdamState.for_params(p)
    with pytest.raises(DivergedGradient):
        adam_step(p, [np.array([np.nan, 0.0])], st, lr=0.1)
