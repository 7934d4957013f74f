"""Dynamics families and state packing.

Five right-hand sides over flat state vectors:

  node      dh/dt = f(h, t)
  anode     same, with zero-initialized augmented channels in h
  sonode    dh/dt = v,      dv/dt = f(h, v, t)
  hbnode    dh/dt = m,      dm/dt = -gamma*m + f(h, t)
  ghbnode   dh/dt = sigma(m), dm/dt = -gamma*m + f(h, t) - xi*h

gamma and xi live behind reparameterizations that keep them in range for any
finite raw value: gamma = eps*sigmoid(omega), xi = softplus(chi).
"""

import math

import numpy as np

from .nn import IDENTITY, TANH, Mlp, mlp_forward

FAMILIES = ("node", "anode", "sonode", "hbnode", "ghbnode")
SECOND_ORDER_FAMILIES = ("sonode", "hbnode", "ghbnode")


def scalar_sigmoid(x):
    if x >= 0.0:
        return 1.0 / (1.0 + math.exp(-x))
    e = math.exp(x)
    return e / (1.0 + e)


def scalar_softplus(x):
    if x > 30.0:
        return float(x)
    return math.log1p(math.exp(x))


class ModelSpec:
    """One dynamics family with its network and damping/gating parameters.

    f_net's output extent fixes the position extent. For sonode the network
    consumes the concatenated (position, velocity) pair; for anode, aug_dim
    of the position channels are zero-padded at initial-state construction.
    init_velocity_net, when present, maps the input to the initial momentum
    or velocity; otherwise it starts at zero.
    """

    def __init__(self, family, f_net, init_velocity_net=None, aug_dim=0,
                 gamma_param=-3.0, gamma_scale=1.0, xi_param=0.0,
                 sigma=None, gamma_trainable=True, xi_trainable=True):
        if family not in FAMILIES:
            raise ValueError("unknown family: %r" % (family,))
        if family != "anode":
            aug_dim = 0
        if aug_dim < 0:
            raise ValueError("aug_dim must be nonnegative")
        p = f_net.output_dim
        expect_in = 2 * p if family == "sonode" else p
        if f_net.input_dim != expect_in:
            raise ValueError("f_net input_dim %d does not fit family %r "
                             "(expected %d)" % (f_net.input_dim, family,
                                                expect_in))
        if init_velocity_net is not None:
            if family not in SECOND_ORDER_FAMILIES:
                raise ValueError("init_velocity_net only applies to "
                                 "second-order families")
            if (init_velocity_net.input_dim != p
                    or init_velocity_net.output_dim != p):
                raise ValueError("init_velocity_net must map position to "
                                 "momentum of the same extent")
        if family == "anode" and aug_dim >= p:
            raise ValueError("aug_dim must leave at least one data channel")
        self.family = family
        self.f_net = f_net
        self.init_velocity_net = init_velocity_net
        self.aug_dim = int(aug_dim)
        self.gamma_param = float(gamma_param)
        self.gamma_scale = float(gamma_scale)
        self.xi_param = float(xi_param)
        self.sigma = sigma if sigma is not None else TANH
        self.gamma_trainable = bool(gamma_trainable)
        self.xi_trainable = bool(xi_trainable)

    @property
    def position_dim(self):
        return self.f_net.output_dim

    @property
    def momentum_dim(self):
        return self.position_dim if self.family in SECOND_ORDER_FAMILIES else 0

    @property
    def state_dim(self):
        return self.position_dim + self.momentum_dim

    @property
    def data_dim(self):
        # extent of the raw input the model accepts
        return self.position_dim - self.aug_dim

    @property
    def gamma(self):
        return self.gamma_scale * scalar_sigmoid(self.gamma_param)

    @property
    def xi(self):
        return scalar_softplus(self.xi_param)

    def gamma_param_grad_factor(self):
        # d gamma / d omega
        s = scalar_sigmoid(self.gamma_param)
        return self.gamma_scale * s * (1.0 - s)

    def xi_param_grad_factor(self):
        # d xi / d chi
        return scalar_sigmoid(self.xi_param)

    def has_gamma(self):
        return self.family in ("hbnode", "ghbnode")

    def has_xi(self):
        return self.family == "ghbnode"


class OdeState:
    """Flat state vector plus its (position, momentum) layout."""

    def __init__(self, packed, position_extent, momentum_extent):
        packed = np.asarray(packed, dtype=np.float64)
        if packed.shape != (position_extent + momentum_extent,):
            raise ValueError("packed extent %s does not match layout (%d, %d)"
                             % (packed.shape, position_extent, momentum_extent))
        self.packed = packed
        self.position_extent = int(position_extent)
        self.momentum_extent = int(momentum_extent)

    @classmethod
    def from_parts(cls, position, momentum=None):
        position = np.asarray(position, dtype=np.float64)
        if momentum is None:
            return cls(position.copy(), position.size, 0)
        momentum = np.asarray(momentum, dtype=np.float64)
        return cls(np.concatenate([position, momentum]), position.size,
                   momentum.size)

    @property
    def position(self):
        return self.packed[:self.position_extent]

    @property
    def momentum(self):
        if self.momentum_extent == 0:
            return None
        return self.packed[self.position_extent:]

    def unpack(self):
        return self.position, self.momentum


def state_for(spec, packed):
    return OdeState(packed, spec.position_dim, spec.momentum_dim)


def make_rhs(spec):
    """Flat-vector right-hand side for the solver."""
    family = spec.family
    p = spec.position_dim
    f_net = spec.f_net
    if family in ("node", "anode"):
        def rhs(t, y):
            return mlp_forward(f_net, y, t)
        return rhs
    if family == "sonode":
        def rhs(t, y):
            accel = mlp_forward(f_net, y, t)
            return np.concatenate([y[p:], accel])
        return rhs
    if family == "hbnode":
        def rhs(t, y):
            gamma = spec.gamma
            h, m = y[:p], y[p:]
            return np.concatenate([m, -gamma * m + mlp_forward(f_net, h, t)])
        return rhs

    def rhs(t, y):  # ghbnode
        gamma = spec.gamma
        xi = spec.xi
        h, m = y[:p], y[p:]
        dm = -gamma * m + mlp_forward(f_net, h, t) - xi * h
        return np.concatenate([spec.sigma.value(m), dm])
    return rhs


def rhs(spec, t, s):
    """Derivative of the packed state, same layout as the input state."""
    if (s.position_extent != spec.position_dim
            or s.momentum_extent != spec.momentum_dim):
        raise ValueError("state layout (%d, %d) does not match family %r"
                         % (s.position_extent, s.momentum_extent, spec.family))
    dy = make_rhs(spec)(t, s.packed)
    return OdeState(dy, s.position_extent, s.momentum_extent)


def initial_state(spec, x):
    """Pack a raw input into the family's state layout.

    anode zero-pads the augmented channels; second-order families attach the
    initial momentum/velocity from init_velocity_net (zero without one).
    """
    x = np.asarray(x, dtype=np.float64)
    if x.shape != (spec.data_dim,):
        raise ValueError("input extent %s does not match data_dim %d"
                         % (x.shape, spec.data_dim))
    if spec.family == "anode":
        position = np.concatenate([x, np.zeros(spec.aug_dim)])
    else:
        position = x.copy()
    if spec.family not in SECOND_ORDER_FAMILIES:
        return OdeState(position, spec.position_dim, 0)
    if spec.init_velocity_net is not None:
        momentum = mlp_forward(spec.init_velocity_net, position, 0.0)
    else:
        momentum = np.zeros(spec.position_dim)
    return OdeState(np.concatenate([position, momentum]), spec.position_dim,
                    spec.position_dim)


# ---------------------------------------------------------------------------
# optimizer-race dynamics on closed-form objectives

def rosenbrock(p):
    x, y = p[0], p[1]
    return 100.0 * (y - x * x) ** 2 + (1.0 - x) ** 2


def rosenbrock_grad(p):
    x, y = p[0], p[1]
    return np.array([-400.0 * x * (y - x * x) - 2.0 * (1.0 - x),
                     200.0 * (y - x * x)])


def beale(p):
    x, y = p[0], p[1]
    t1 = 1.5 - x + x * y
    t2 = 2.25 - x + x * y * y
    t3 = 2.625 - x + x * y ** 3
    return t1 * t1 + t2 * t2 + t3 * t3


def beale_grad(p):
    x, y = p[0], p[1]
    t1 = 1.5 - x + x * y
    t2 = 2.25 - x + x * y * y
    t3 = 2.625 - x + x * y ** 3
    gx = (2.0 * t1 * (y - 1.0) + 2.0 * t2 * (y * y - 1.0)
          + 2.0 * t3 * (y ** 3 - 1.0))
    gy = 2.0 * t1 * x + 4.0 * t2 * x * y + 6.0 * t3 * x * y * y
    return np.array([gx, gy])


RACE_OBJECTIVES = {
    "rosenbrock": (rosenbrock, rosenbrock_grad),
    "beale": (beale, beale_grad),
}


def hbode_race_rhs(objective, variant, t, s, gamma=0.9):
    """Gradient-flow or heavy-ball descent dynamics on a race objective.

    gradient_flow expects s=(x, y); heavy_ball expects s=(x, y, xdot, ydot)
    and uses the supplied damping gamma.
    """
    if objective not in RACE_OBJECTIVES:
        raise ValueError("unknown objective: %r" % (objective,))
    _, grad = RACE_OBJECTIVES[objective]
    s = np.asarray(s, dtype=np.float64)
    if variant == "gradient_flow":
        return -grad(s)
    if variant == "heavy_ball":
        pos, vel = s[:2], s[2:]
        return np.concatenate([vel, -gamma * vel - grad(pos)])
    raise ValueError("unknown variant: %r" % (variant,))


def heavy_ball_discrete(grad_f, x0, x1, step, beta, iterations):
    """Momentum gradient descent iterates.

    Rows 0 and 1 are the two starting points; each later row follows
    x_next = x - step*grad_f(x) + beta*(x - x_prev). Returns an array of
    shape (iterations + 1, d).
    """
    if step <= 0.0:
        raise ValueError("step must be positive")
    if not 0.0 <= beta < 1.0:
        raise ValueError("beta must lie in [0, 1)")
    if iterations < 1:
        raise ValueError("iterations must be at least 1")
    x0 = np.asarray(x0, dtype=np.float64)
    x1 = np.asarray(x1, dtype=np.float64)
    out = np.empty((iterations + 1, x0.size))
    out[0] = x0
    out[1] = x1
    for k in range(1, iterations):
        out[k + 1] = out[k] - step * grad_f(out[k]) + beta * (out[k] - out[k - 1])
    return out


def linear_f_net(A, bias=None):
    """Single-layer network computing A @ h (+ bias); handy for closed-form
    dynamics in tests and diagnostics."""
    A = np.atleast_2d(np.asarray(A, dtype=np.float64))
    b = np.zeros(A.shape[0]) if bias is None else np.asarray(bias, float)
    return Mlp([(A, b, IDENTITY)])
