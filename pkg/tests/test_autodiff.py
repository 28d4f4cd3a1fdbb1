"""Reverse-mode gradients against central finite differences."""

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from flowjump.autodiff import Var, backward, sigmoid, silu, vclip, vconcat, vlog, vmean, vsum


def grad_of(f, x0):
    v = Var(x0)
    out = f(v)
    backward(out)
    return out.value, v.grad


def fd_grad(f, x0, h=1e-6):
    x0 = np.asarray(x0, dtype=np.float64)
    g = np.zeros_like(x0)
    for i in range(x0.size):
        e = np.zeros_like(x0)
        e.flat[i] = h
        g.flat[i] = (f(Var(x0 + e)).value - f(Var(x0 - e)).value) / (2 * h)
    return g


CASES = {
    "affine": lambda v: vsum(2.0 * v + 1.0),
    "product": lambda v: vsum(v * v * 3.0),
    "quotient": lambda v: vsum(v / (v * v + 1.0)),
    "rdiv": lambda v: vsum(1.0 / (v * v + 2.0)),
    "neg_sub": lambda v: vsum(-v - 0.5),
    "rsub": lambda v: vsum(1.5 - v),
    "silu": lambda v: vsum(silu(v)),
    "sigmoid": lambda v: vsum(sigmoid(v)),
    "log": lambda v: vsum(vlog(v * v + 1.0)),
    "clip": lambda v: vsum(vclip(v, -0.5, 0.5) * v),
    "mean": lambda v: vmean(v * v),
    "slice": lambda v: vsum(v[1:] * 2.0),
    "reshape": lambda v: vsum(v.reshape(2, 2) @ np.ones((2, 1))),
    "concat": lambda v: vsum(vconcat([v, v * 2.0, np.ones(4)]) * 0.5),
}


@pytest.mark.parametrize("name", sorted(CASES))
def test_matches_finite_differences(name):
    f = CASES[name]
    x0 = np.array([0.3, -0.7, 1.2, 0.05])
    _, got = grad_of(f, x0)
    want = fd_grad(f, x0)
    np.testing.assert_allclose(got, want, rtol=1e-6, atol=1e-9)


def test_matmul_both_sides():
    a0 = np.array([[0.5, -0.2], [0.1, 0.9]])
    b0 = np.array([[1.0, 2.0], [3.0, -1.0]])
    va, vb = Var(a0), Var(b0)
    out = vsum(va @ vb)
    backward(out)
    np.testing.assert_allclose(va.grad, np.ones((2, 2)) @ b0.T)
    np.testing.assert_allclose(vb.grad, a0.T @ np.ones((2, 2)))

    v = Var(b0)
    out = vsum(a0 @ v)
    backward(out)
    np.testing.assert_allclose(v.grad, a0.T @ np.ones((2, 2)))


def test_broadcast_unreduction():
    # (4,1) * (3,) broadcasts to (4,3); gradients reduce back to operand shapes.
    a0 = np.array([[1.0], [2.0], [3.0], [4.0]])
    b0 = np.array([0.5, -1.0, 2.0])
    va, vb = Var(a0), Var(b0)
    out = vsum(va * vb)
    backward(out)
    assert va.grad.shape == (4, 1)
    assert vb.grad.shape == (3,)
    np.testing.assert_allclose(va.grad[:, 0], b0.sum())
    np.testing.assert_allclose(vb.grad, a0.sum())


def test_constants_are_transparent():
    v = Var(np.array([1.0, 2.0]))
    out = vsum(v * np.array([2.0, 3.0]) + 5.0)
    backward(out)
    np.testing.assert_allclose(v.grad, [2.0, 3.0])


def test_reuse_accumulates():
    v = Var(np.array(2.0))
    out = v * v + v  # d/dv = 2v + 1 = 5
    backward(out)
    assert v.grad == pytest.approx(5.0)


def test_backward_requires_scalar():
    v = Var(np.array([1.0, 2.0]))
    with pytest.raises(ValueError):
        backward(v * 2.0)


def test_vsum_axis():
    v = Var(np.arange(6.0).reshape(2, 3))
    out = vsum(vsum(v, axis=1) * np.array([1.0, 2.0]))
    backward(out)
    np.testing.assert_allclose(v.grad, [[1.0, 1.0, 1.0], [2.0, 2.0, 2.0]])


def test_getitem_routes_gradient():
    v = Var(np.array([1.0, 2.0, 3.0]))
    out = vsum(v[::2] * 2.0)
    backward(out)
    np.testing.assert_allclose(v.grad, [2.0, 0.0, 2.0])


def test_numpy_ops_defer_to_var():
    # ndarray * Var must hit Var.__rmul__, not ndarray's elementwise protocol.
    v = Var(np.array([1.0, 2.0]))
    out = np.array([3.0, 4.0]) * v
    assert isinstance(out, Var)
    np.testing.assert_allclose(out.value, [3.0, 8.0])


@given(st.lists(st.floats(min_value=-3.0, max_value=3.0), min_size=2, max_size=6))
@settings(max_examples=40, deadline=None)
def test_silu_chain_property(xs):
    x0 = np.asarray(xs)

    def f(v):
        return vmean(silu(v * 0.7 - 0.2) * v)

    _, got = grad_of(f, x0)
    want = fd_grad(f, x0)
    np.testing.assert_allclose(got, want, rtol=1e-5, atol=1e-8)
