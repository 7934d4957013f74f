"""Dense feed-forward networks with exact vector-Jacobian products.

Everything is float64 numpy. Networks are small stacks of affine layers with
elementwise activations; gradients with respect to both inputs and parameters
are computed by a hand-rolled backward sweep, so there is no computation-graph
machinery anywhere in the package.
"""

import numpy as np

# The universal numeric carrier is a float64 numpy array (row-major).
Tensor = np.ndarray

ACTIVATION_KINDS = (
    "identity",
    "tanh",
    "relu",
    "leaky_relu",
    "elu",
    "sigmoid",
    "softplus",
    "hardtanh",
)


def make_rng(seed):
    """Seeded generator with a fixed algorithm (PCG64) so seeds are portable."""
    return np.random.Generator(np.random.PCG64(np.random.SeedSequence(seed)))


def split_rngs(seed, n):
    """n independent child generators derived from one seed."""
    return [np.random.Generator(np.random.PCG64(s))
            for s in np.random.SeedSequence(seed).spawn(n)]


def _sigmoid(x):
    # two-branch form, stable for large |x|
    out = np.empty_like(x)
    pos = x >= 0
    out[pos] = 1.0 / (1.0 + np.exp(-x[pos]))
    ex = np.exp(x[~pos])
    out[~pos] = ex / (1.0 + ex)
    return out


class Activation:
    """Elementwise activation with a value and an exact derivative.

    Kink conventions: relu derivative at 0 is 0; hardtanh derivative is 1 at
    the lower bound and 0 at the upper bound; leaky_relu takes its slope at 0.
    """

    def __init__(self, kind, slope=0.01, lo=-1.0, hi=1.0):
        if kind not in ACTIVATION_KINDS:
            raise ValueError("unknown activation kind: %r" % (kind,))
        if kind == "hardtanh" and not lo < hi:
            raise ValueError("hardtanh needs lo < hi")
        self.kind = kind
        self.slope = float(slope)
        self.lo = float(lo)
        self.hi = float(hi)

    def __repr__(self):
        if self.kind == "leaky_relu":
            return "Activation('leaky_relu', slope=%g)" % self.slope
        if self.kind == "hardtanh":
            return "Activation('hardtanh', lo=%g, hi=%g)" % (self.lo, self.hi)
        return "Activation(%r)" % (self.kind,)

    def value(self, x):
        x = np.asarray(x, dtype=np.float64)
        k = self.kind
        if k == "identity":
            return x.copy()
        if k == "tanh":
            return np.tanh(x)
        if k == "relu":
            return np.where(x > 0.0, x, 0.0)
        if k == "leaky_relu":
            return np.where(x > 0.0, x, self.slope * x)
        if k == "elu":
            return np.where(x > 0.0, x, np.expm1(np.minimum(x, 0.0)))
        if k == "sigmoid":
            return _sigmoid(x)
        if k == "softplus":
            return np.logaddexp(0.0, x)
        # hardtanh
        return np.clip(x, self.lo, self.hi)

    def derivative(self, x):
        x = np.asarray(x, dtype=np.float64)
        k = self.kind
        if k == "identity":
            return np.ones_like(x)
        if k == "tanh":
            t = np.tanh(x)
            return 1.0 - t * t
        if k == "relu":
            return np.where(x > 0.0, 1.0, 0.0)
        if k == "leaky_relu":
            return np.where(x > 0.0, 1.0, self.slope)
        if k == "elu":
            return np.where(x > 0.0, 1.0, np.exp(np.minimum(x, 0.0)))
        if k == "sigmoid":
            s = _sigmoid(x)
            return s * (1.0 - s)
        if k == "softplus":
            return _sigmoid(x)
        # hardtanh: 1 on [lo, hi), 0 at hi and outside
        return np.where((x >= self.lo) & (x < self.hi), 1.0, 0.0)


IDENTITY = Activation("identity")
TANH = Activation("tanh")


class Mlp:
    """Stack of (weight, bias, activation) layers over flat float64 vectors.

    ``input_dim`` counts only the caller-supplied input; when
    ``time_augmented`` is set the scalar time is appended before layer 1 and
    the first weight matrix has one extra column.
    """

    def __init__(self, layers, time_augmented=False):
        self.layers = [(np.array(W, dtype=np.float64),
                        np.array(b, dtype=np.float64),
                        act) for W, b, act in layers]
        self.time_augmented = bool(time_augmented)
        first_cols = self.layers[0][0].shape[1]
        self.input_dim = first_cols - (1 if self.time_augmented else 0)
        self.output_dim = self.layers[-1][0].shape[0]
        for i in range(len(self.layers) - 1):
            out_i = self.layers[i][0].shape[0]
            in_next = self.layers[i + 1][0].shape[1]
            if out_i != in_next:
                raise ValueError(
                    "layer %d output %d does not feed layer %d input %d"
                    % (i, out_i, i + 1, in_next))
        for W, b, _ in self.layers:
            if b.shape != (W.shape[0],):
                raise ValueError("bias shape does not match weight rows")

    @property
    def n_params(self):
        return sum(W.size + b.size for W, b, _ in self.layers)

    def copy(self):
        return Mlp([(W.copy(), b.copy(), act) for W, b, act in self.layers],
                   time_augmented=self.time_augmented)


def mlp_init(layer_dims, hidden_activation, out_activation=None, rng=None,
             time_augmented=False):
    """Fresh network: weights uniform in [-1/sqrt(fan_in), +1/sqrt(fan_in)],
    biases zero. ``layer_dims`` lists extents [in, h1, ..., out]; the time
    column, when requested, is added on top of ``layer_dims[0]``."""
    if rng is None:
        rng = make_rng(0)
    if out_activation is None:
        out_activation = IDENTITY
    layers = []
    dims = list(layer_dims)
    dims[0] = dims[0] + (1 if time_augmented else 0)
    for i in range(len(dims) - 1):
        fan_in = dims[i]
        bound = 1.0 / np.sqrt(fan_in)
        W = rng.uniform(-bound, bound, size=(dims[i + 1], dims[i]))
        b = np.zeros(dims[i + 1])
        act = out_activation if i == len(dims) - 2 else hidden_activation
        layers.append((W, b, act))
    return Mlp(layers, time_augmented=time_augmented)


def _augment(net, x, t):
    x = np.asarray(x, dtype=np.float64)
    if x.shape != (net.input_dim,):
        raise ValueError("input extent %s does not match net input_dim %d"
                         % (x.shape, net.input_dim))
    if net.time_augmented:
        return np.concatenate([x, [float(t)]])
    return x


def mlp_forward(net, x, t=0.0):
    """Evaluate the network; pure function of (parameters, input, t)."""
    a = _augment(net, x, t)
    for W, b, act in net.layers:
        a = act.value(W @ a + b)
    return a


def _forward_cache(net, x, t):
    # pre-activation z and input a of every layer, for the backward sweep
    a = _augment(net, x, t)
    inputs = []
    zs = []
    for W, b, act in net.layers:
        inputs.append(a)
        z = W @ a + b
        zs.append(z)
        a = act.value(z)
    return a, inputs, zs


def mlp_vjp(net, x, t, cotangent):
    """Pull a cotangent on the output back to the input and the parameters.

    Returns (grad_input, grad_params) with grad_input = cotangent^T d(out)/d(in)
    (time slot dropped) and grad_params flattened in layer order
    [W1, b1, W2, b2, ...].
    """
    cotangent = np.asarray(cotangent, dtype=np.float64)
    if cotangent.shape != (net.output_dim,):
        raise ValueError("cotangent extent %s does not match output_dim %d"
                         % (cotangent.shape, net.output_dim))
    _, inputs, zs = _forward_cache(net, x, t)
    grad_parts = [None] * len(net.layers)
    g = cotangent
    for i in range(len(net.layers) - 1, -1, -1):
        W, _, act = net.layers[i]
        gz = g * act.derivative(zs[i])
        grad_parts[i] = (np.outer(gz, inputs[i]), gz)
        g = W.T @ gz
    if net.time_augmented:
        g = g[:-1]
    flat = np.concatenate([np.concatenate([gW.ravel(), gb])
                           for gW, gb in grad_parts])
    return g, flat


def jacobian_wrt_input(net, x, t=0.0):
    """Full d(out)/d(in) matrix, assembled row by row from unit cotangents."""
    rows = np.empty((net.output_dim, net.input_dim))
    e = np.zeros(net.output_dim)
    for i in range(net.output_dim):
        e[i] = 1.0
        rows[i], _ = mlp_vjp(net, x, t, e)
        e[i] = 0.0
    return rows


def flatten_params(net):
    """All parameters as one flat vector, layer order [W1, b1, W2, b2, ...]."""
    return np.concatenate([np.concatenate([W.ravel(), b])
                           for W, b, _ in net.layers])


def unflatten_params(net, flat):
    """Inverse of flatten_params: a new network with ``net``'s structure and
    the given parameter vector."""
    flat = np.asarray(flat, dtype=np.float64)
    if flat.shape != (net.n_params,):
        raise ValueError("parameter vector has extent %s, expected %d"
                         % (flat.shape, net.n_params))
    layers = []
    k = 0
    for W, b, act in net.layers:
        nw = W.size
        Wn = flat[k:k + nw].reshape(W.shape).copy()
        k += nw
        bn = flat[k:k + b.size].copy()
        k += b.size
        layers.append((Wn, bn, act))
    return Mlp(layers, time_augmented=net.time_augmented)


def set_flat_params(net, flat):
    """Write a flat parameter vector into the network in place."""
    flat = np.asarray(flat, dtype=np.float64)
    if flat.shape != (net.n_params,):
        raise ValueError("parameter vector has extent %s, expected %d"
                         % (flat.shape, net.n_params))
    k = 0
    for W, b, _ in net.layers:
        W.ravel()[:] = flat[k:k + W.size]
        k += W.size
        b[:] = flat[k:k + b.size]
        k += b.size
