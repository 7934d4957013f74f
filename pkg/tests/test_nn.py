import numpy as np
import pytest
from numpy.testing import assert_allclose

from hbnode.nn import (
    ACTIVATION_KINDS,
    Activation,
    IDENTITY,
    Mlp,
    TANH,
    flatten_params,
    jacobian_wrt_input,
    make_rng,
    mlp_forward,
    mlp_init,
    mlp_vjp,
    set_flat_params,
    unflatten_params,
)


# ---------------------------------------------------------------------------
# independent oracles, written before the assertions that use them

def straight_line_two_layer_tanh(flat, dims, x):
    """Duplicate evaluator for a 2-layer tanh net, written without reusing any
    package code: unpack [W1, b1, W2, b2] from the flat vector and evaluate
    tanh(W1 x + b1) fed through the affine output layer."""
    n_in, n_h, n_out = dims
    k = 0
    W1 = flat[k:k + n_h * n_in].reshape(n_h, n_in); k += n_h * n_in
    b1 = flat[k:k + n_h]; k += n_h
    W2 = flat[k:k + n_out * n_h].reshape(n_out, n_h); k += n_out * n_h
    b2 = flat[k:k + n_out]; k += n_out
    assert k == flat.size
    hidden = np.tanh(W1.dot(x) + b1)
    return W2.dot(hidden) + b2


def fd_grad(f, x0, eps=1e-5):
    """Central finite differences of a scalar-or-vector function, column per
    input component."""
    x0 = np.asarray(x0, dtype=np.float64)
    cols = []
    for i in range(x0.size):
        xp = x0.copy(); xp[i] += eps
        xm = x0.copy(); xm[i] -= eps
        cols.append((np.asarray(f(xp)) - np.asarray(f(xm))) / (2 * eps))
    return np.stack(cols, axis=-1)


# ---------------------------------------------------------------------------
# forward evaluation

def test_forward_zero_parameters_give_zero_output():
    net = mlp_init([3, 4, 2], TANH, rng=make_rng(0))
    set_flat_params(net, np.zeros(net.n_params))
    out = mlp_forward(net, np.array([0.3, -1.2, 5.0]))
    assert_allclose(out, np.zeros(2), atol=0.0)


def test_forward_affine_identity_single_layer():
    net = Mlp([(np.array([[2.0]]), np.array([1.0]), IDENTITY)])
    assert_allclose(mlp_forward(net, np.array([3.0]), t=0.0), [7.0])


def test_forward_matches_straight_line_evaluator():
    rng = make_rng(42)
    dims = (3, 5, 2)
    net = mlp_init(list(dims), TANH, rng=rng)
    for _ in range(20):
        x = rng.standard_normal(3)
        got = mlp_forward(net, x)
        want = straight_line_two_layer_tanh(flatten_params(net), dims, x)
        assert_allclose(got, want, rtol=0.0, atol=1e-15)


def test_forward_rejects_shape_mismatch():
    net = mlp_init([3, 4, 2], TANH, rng=make_rng(1))
    with pytest.raises(ValueError):
        mlp_forward(net, np.zeros(4))


def test_time_augmentation_appends_scalar_t():
    rng = make_rng(7)
    net = mlp_init([2, 4, 2], TANH, rng=rng, time_augmented=True)
    x = rng.standard_normal(2)
    W1, b1, act = net.layers[0]
    t = 0.37
    manual = act.value(W1 @ np.concatenate([x, [t]]) + b1)
    W2, b2, act2 = net.layers[1]
    manual = act2.value(W2 @ manual + b2)
    assert_allclose(mlp_forward(net, x, t), manual, atol=0.0)
    assert net.input_dim == 2
    assert net.layers[0][0].shape[1] == 3


# ---------------------------------------------------------------------------
# vector-Jacobian products

def test_vjp_zero_cotangent_gives_zero_gradients():
    net = mlp_init([3, 6, 2], TANH, rng=make_rng(2))
    gx, gp = mlp_vjp(net, np.array([0.1, 0.2, 0.3]), 0.0, np.zeros(2))
    assert gx.shape == (3,)
    assert gp.shape == (net.n_params,)
    assert np.all(gx == 0.0) and np.all(gp == 0.0)


def test_vjp_affine_closed_form():
    rng = make_rng(3)
    W = rng.standard_normal((3, 2))
    b = rng.standard_normal(3)
    net = Mlp([(W, b, IDENTITY)])
    x = rng.standard_normal(2)
    v = rng.standard_normal(3)
    gx, gp = mlp_vjp(net, x, 0.0, v)
    assert_allclose(gx, W.T @ v, atol=1e-15)
    assert_allclose(gp, np.concatenate([np.outer(v, x).ravel(), v]), atol=1e-15)


def test_vjp_matches_finite_differences():
    rng = make_rng(4)
    net = mlp_init([3, 5, 4, 2], TANH, rng=rng)
    x = rng.standard_normal(3)
    v = rng.standard_normal(2)
    gx, gp = mlp_vjp(net, x, 0.0, v)

    fd_x = fd_grad(lambda xx: v @ mlp_forward(net, xx), x)
    assert_allclose(gx, fd_x, rtol=1e-6, atol=1e-10)

    theta0 = flatten_params(net)
    fd_p = fd_grad(lambda th: v @ mlp_forward(unflatten_params(net, th), x),
                   theta0)
    assert_allclose(gp, fd_p, rtol=1e-6, atol=1e-10)


def test_vjp_time_augmented_input_gradient_drops_time_slot():
    rng = make_rng(5)
    net = mlp_init([2, 5, 3], TANH, rng=rng, time_augmented=True)
    x = rng.standard_normal(2)
    v = rng.standard_normal(3)
    t = 1.3
    gx, _ = mlp_vjp(net, x, t, v)
    assert gx.shape == (2,)
    fd_x = fd_grad(lambda xx: v @ mlp_forward(net, xx, t), x)
    assert_allclose(gx, fd_x, rtol=1e-6, atol=1e-10)


def test_vjp_is_linear_in_cotangent():
    rng = make_rng(6)
    net = mlp_init([4, 6, 3], Activation("elu"), rng=rng)
    x = rng.standard_normal(4)
    v1 = rng.standard_normal(3)
    v2 = rng.standard_normal(3)
    gx1, gp1 = mlp_vjp(net, x, 0.0, v1)
    gx2, gp2 = mlp_vjp(net, x, 0.0, v2)
    gxs, gps = mlp_vjp(net, x, 0.0, v1 + v2)
    assert_allclose(gxs, gx1 + gx2, atol=1e-12)
    assert_allclose(gps, gp1 + gp2, atol=1e-12)


def test_vjp_rejects_bad_cotangent_shape():
    net = mlp_init([3, 4, 2], TANH, rng=make_rng(8))
    with pytest.raises(ValueError):
        mlp_vjp(net, np.zeros(3), 0.0, np.zeros(3))


# ---------------------------------------------------------------------------
# input Jacobians

def test_jacobian_linear_layer_equals_weight_matrix():
    rng = make_rng(9)
    W = rng.standard_normal((4, 3))
    net = Mlp([(W, np.zeros(4), IDENTITY)])
    assert_allclose(jacobian_wrt_input(net, rng.standard_normal(3)), W,
                    atol=1e-15)


def test_jacobian_identity_net():
    net = Mlp([(np.eye(3), np.zeros(3), IDENTITY)])
    assert_allclose(jacobian_wrt_input(net, np.array([1.0, -2.0, 0.5])),
                    np.eye(3), atol=0.0)


def test_jacobian_matches_finite_differences():
    rng = make_rng(10)
    net = mlp_init([3, 7, 3], TANH, rng=rng)
    x = rng.standard_normal(3)
    J = jacobian_wrt_input(net, x)
    J_fd = fd_grad(lambda xx: mlp_forward(net, xx), x)
    assert_allclose(J, J_fd, rtol=1e-6, atol=1e-8)


# ---------------------------------------------------------------------------
# activations

def _make_activation(kind):
    if kind == "leaky_relu":
        return Activation("leaky_relu", slope=0.3)
    if kind == "hardtanh":
        return Activation("hardtanh", lo=-5.0, hi=5.0)
    return Activation(kind)


def _kinks(act):
    if act.kind in ("relu", "leaky_relu", "elu"):
        return [0.0]
    if act.kind == "hardtanh":
        return [act.lo, act.hi]
    return []


@pytest.mark.parametrize("kind", ACTIVATION_KINDS)
def test_activation_derivative_matches_finite_differences(kind):
    act = _make_activation(kind)
    rng = make_rng(hash(kind) % 2**32)
    eps = 1e-5
    xs = rng.uniform(-8.0, 8.0, size=1000)
    kinks = _kinks(act)
    if kinks:
        near = np.zeros(xs.shape, dtype=bool)
        for k in kinks:
            near |= np.abs(xs - k) < 1e-4
        xs = xs[~near]
    fd = (act.value(xs + eps) - act.value(xs - eps)) / (2 * eps)
    assert np.max(np.abs(act.derivative(xs) - fd)) <= 1e-6


def test_activation_kink_conventions():
    relu = Activation("relu")
    assert relu.derivative(np.array([0.0]))[0] == 0.0
    ht = Activation("hardtanh", lo=-5.0, hi=5.0)
    assert ht.derivative(np.array([-5.0]))[0] == 1.0
    assert ht.derivative(np.array([5.0]))[0] == 0.0
    assert ht.value(np.array([12.0]))[0] == 5.0
    lk = Activation("leaky_relu", slope=0.3)
    assert lk.derivative(np.array([0.0]))[0] == 0.3


# ---------------------------------------------------------------------------
# parameter flattening

def test_flatten_unflatten_roundtrip_is_bit_exact():
    rng = make_rng(11)
    net = mlp_init([4, 9, 9, 2], Activation("relu"), rng=rng,
                   time_augmented=True)
    flat = flatten_params(net)
    net2 = unflatten_params(net, flat)
    for (W1, b1, _), (W2, b2, _) in zip(net.layers, net2.layers):
        assert np.array_equal(W1, W2)
        assert np.array_equal(b1, b2)
    assert np.array_equal(flatten_params(net2), flat)


def test_set_flat_params_roundtrip():
    rng = make_rng(12)
    net = mlp_init([3, 5, 2], TANH, rng=rng)
    target = rng.standard_normal(net.n_params)
    set_flat_params(net, target)
    assert np.array_equal(flatten_params(net), target)


def test_init_bounds_and_zero_biases():
    rng = make_rng(13)
    net = mlp_init([10, 20, 5], TANH, rng=rng)
    for W, b, _ in net.layers:
        bound = 1.0 / np.sqrt(W.shape[1])
        assert np.all(np.abs(W) <= bound)
        assert np.all(b == 0.0)
