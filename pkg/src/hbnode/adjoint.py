"""Continuous adjoint sensitivities for every dynamics family.

backward_pass integrates a single augmented system from the terminal time
back to the start: the forward state re-solved in reverse, the adjoint
variables, and a running accumulator for the parameter-gradient integral.
Memory stays flat in trajectory length; the cost shows up as backward
function evaluations, which is the number the evaluation-count experiments
record.

The accumulator block is excluded from the solver error norm, so step
control reacts to the state and adjoint only, not to the parameter count.
"""

import numpy as np

from .models import make_rhs
from .nn import mlp_vjp
from .odeint import SolverConfig, integrate


def grad_extent(spec):
    """Length of the flat gradient backward_pass produces for this spec."""
    n = spec.f_net.n_params
    if spec.has_gamma() and spec.gamma_trainable:
        n += 1
    if spec.has_xi() and spec.xi_trainable:
        n += 1
    return n


class AdjointResult:
    """Gradients recovered by one backward solve.

    grad_params is laid out as [network parameters, damping parameter when
    trainable, gating parameter when trainable]; grad_initial_state follows
    the packed state layout. adjoint_trace, when recorded, lists
    (time, l2 norm of the adjoint block) at the backward checkpoint times.
    """

    def __init__(self, grad_params, grad_initial_state, backward_nfe,
                 adjoint_trace=None):
        self.grad_params = grad_params
        self.grad_initial_state = grad_initial_state
        self.backward_nfe = int(backward_nfe)
        self.adjoint_trace = adjoint_trace

    def __repr__(self):
        return ("AdjointResult(%d params, state extent %d, backward_nfe=%d)"
                % (self.grad_params.size, self.grad_initial_state.size,
                   self.backward_nfe))


def adjoint_rhs(spec, t, forward_state, adjoint_state):
    """Forward-time derivatives of the state/adjoint pair plus gradient rate.

    Returns (state_rate, adjoint_rate, param_rate). param_rate is the
    integrand of the parameter-gradient integral, laid out like
    AdjointResult.grad_params; the backward solve integrates its negative.
    Jacobian contractions go through mlp_vjp with the adjoint as cotangent,
    so no Jacobian matrix is ever formed.
    """
    sd = spec.state_dim
    forward_state = np.asarray(forward_state, dtype=np.float64)
    adjoint_state = np.asarray(adjoint_state, dtype=np.float64)
    if forward_state.shape != (sd,) or adjoint_state.shape != (sd,):
        raise ValueError("state/adjoint extents %s/%s do not match family %r"
                         % (forward_state.shape, adjoint_state.shape,
                            spec.family))
    p = spec.position_dim
    net = spec.f_net
    family = spec.family

    if family in ("node", "anode"):
        state_rate = make_rhs(spec)(t, forward_state)
        grad_in, grad_params = mlp_vjp(net, forward_state, t, adjoint_state)
        return state_rate, -grad_in, grad_params

    h, m = forward_state[:p], forward_state[p:]
    a_h, a_m = adjoint_state[:p], adjoint_state[p:]
    state_rate = make_rhs(spec)(t, forward_state)

    if family == "sonode":
        grad_in, grad_params = mlp_vjp(net, forward_state, t, a_m)
        adjoint_rate = np.concatenate([-grad_in[:p], -a_h - grad_in[p:]])
        return state_rate, adjoint_rate, grad_params

    gamma = spec.gamma
    grad_in, grad_net = mlp_vjp(net, h, t, a_m)
    if family == "hbnode":
        adjoint_rate = np.concatenate([-grad_in, -a_h + gamma * a_m])
    else:  # ghbnode
        xi = spec.xi
        adjoint_rate = np.concatenate(
            [-grad_in + xi * a_m,
             -a_h * spec.sigma.derivative(m) + gamma * a_m])
    pieces = [grad_net]
    if spec.gamma_trainable:
        # damping enters the momentum rate as -gamma*m
        pieces.append([-np.dot(a_m, m) * spec.gamma_param_grad_factor()])
    if family == "ghbnode" and spec.xi_trainable:
        # gating enters the momentum rate as -xi*h
        pieces.append([-np.dot(a_m, h) * spec.xi_param_grad_factor()])
    return state_rate, adjoint_rate, np.concatenate(pieces)


def _backward_times(final_time, start_time, trace_times):
    if final_time == start_time:
        raise ValueError("forward result spans zero time")
    lo, hi = sorted((start_time, final_time))
    targets = [final_time]
    if trace_times is not None:
        interior = sorted(set(float(v) for v in trace_times),
                          reverse=final_time > start_time)
        for v in interior:
            if not lo <= v <= hi:
                raise ValueError("trace time %g outside the solved span "
                                 "[%g, %g]" % (v, lo, hi))
            if v != final_time and v != start_time:
                targets.append(v)
    targets.append(start_time)
    return targets


def backward_pass(spec, forward_result, dL_dfinal, cfg, clip_threshold=None,
                  trace_times=None):
    """Gradients of a terminal-time loss via one backward augmented solve.

    forward_result supplies the span and the terminal state; the forward
    trajectory itself is re-solved in reverse alongside the adjoint.
    dL_dfinal is the loss cotangent at the final state, packed like the
    state (momentum slots zero when the loss reads only the position).

    clip_threshold, when set, rescales the adjoint block to that l2 norm
    after every accepted step. trace_times requests norm recordings; the
    requested times become backward checkpoints, and recording itself never
    feeds back into the solve.
    """
    sd = spec.state_dim
    ng = grad_extent(spec)
    terminal = np.asarray(forward_result.final_state, dtype=np.float64)
    cotangent = np.asarray(dL_dfinal, dtype=np.float64)
    if terminal.shape != (sd,):
        raise ValueError("forward final state extent %s does not match "
                         "family %r" % (terminal.shape, spec.family))
    if cotangent.shape != (sd,):
        raise ValueError("loss cotangent extent %s does not match state "
                         "extent %d" % (cotangent.shape, sd))
    final_time = float(forward_result.final_time)
    start_time = float(forward_result.times[0])
    times = _backward_times(final_time, start_time, trace_times)

    def aug_rhs(t, z):
        state_rate, adjoint_rate, param_rate = adjoint_rhs(
            spec, t, z[:sd], z[sd:2 * sd])
        return np.concatenate([state_rate, adjoint_rate, -param_rate])

    hook = None
    if clip_threshold is not None:
        threshold = float(clip_threshold)
        if threshold <= 0.0:
            raise ValueError("clip_threshold must be positive")

        def hook(t, z):
            norm = float(np.linalg.norm(z[sd:2 * sd]))
            if norm > threshold:
                z = z.copy()
                z[sd:2 * sd] *= threshold / norm
            return z

    z_terminal = np.concatenate([terminal, cotangent, np.zeros(ng)])
    result = integrate(aug_rhs, z_terminal, times, cfg, post_accept=hook,
                       err_len=2 * sd)
    trace = None
    if trace_times is not None:
        trace = [(t, float(np.linalg.norm(z[sd:2 * sd])))
                 for t, z in result.checkpoints]
    z_start = result.final_state
    return AdjointResult(z_start[2 * sd:].copy(), z_start[sd:2 * sd].copy(),
                         result.nfe, trace)


def hbnode_second_order_adjoint_check(spec, forward_result, dL_dposition,
                                      cfg=None, samples=9):
    """Cross-check the heavy-ball adjoint against its second-order forms.

    Two independent routes recover the momentum adjoint: its second-order
    equation solved backward in time, and the time-reflected equation solved
    forward from the terminal time. The report's "second_order_gap" is the
    largest disagreement between them on a shared grid. "remark2_residual"
    is the largest gap between the position adjoint of the first-order
    system and its reconstruction gamma*a - da/dt from the second-order
    solution; both vanish up to solver error.
    """
    if spec.family != "hbnode":
        raise ValueError("second-order adjoint check applies to hbnode only")
    if cfg is None:
        cfg = SolverConfig.dopri45(1e-9)
    p = spec.position_dim
    net = spec.f_net
    gamma = spec.gamma
    fwd = make_rhs(spec)
    final_time = float(forward_result.final_time)
    start_time = float(forward_result.times[0])
    terminal = np.asarray(forward_result.final_state, dtype=np.float64)
    cotangent = np.asarray(dL_dposition, dtype=np.float64)
    if cotangent.shape != (p,):
        raise ValueError("cotangent extent %s does not match position "
                         "extent %d" % (cotangent.shape, p))
    grid = np.linspace(start_time, final_time, samples)
    back_grid = grid[::-1].copy()

    # momentum adjoint a satisfies a'' = gamma*a' + a.df/dh; solved backward
    def second_back(t, z):
        y, a, a_dot = z[:2 * p], z[2 * p:3 * p], z[3 * p:]
        pulled, _ = mlp_vjp(net, y[:p], t, a)
        return np.concatenate([fwd(t, y), a_dot, gamma * a_dot + pulled])

    z_terminal = np.concatenate([terminal, np.zeros(p), -cotangent])
    res_back = integrate(second_back, z_terminal, back_grid, cfg)

    # same equation under the reflection tau = T - t, solved forward in tau
    def second_reflected(tau, z):
        t = final_time - tau
        y, b, b_dot = z[:2 * p], z[2 * p:3 * p], z[3 * p:]
        pulled, _ = mlp_vjp(net, y[:p], t, b)
        return np.concatenate([-fwd(t, y), b_dot, -gamma * b_dot + pulled])

    z_reflected = np.concatenate([terminal, np.zeros(p), cotangent])
    tau_grid = final_time - back_grid
    res_refl = integrate(second_reflected, z_reflected, tau_grid, cfg)

    # first-order pair (a_h, a_m) over the same grid, for the identity
    # a_h = gamma*a_m - da_m/dt
    def first_back(t, z):
        y, a_h, a_m = z[:2 * p], z[2 * p:3 * p], z[3 * p:]
        pulled, _ = mlp_vjp(net, y[:p], t, a_m)
        return np.concatenate([fwd(t, y), -pulled, -a_h + gamma * a_m])

    z_first = np.concatenate([terminal, cotangent, np.zeros(p)])
    res_first = integrate(first_back, z_first, back_grid, cfg)

    gap = 0.0
    residual = 0.0
    for j in range(samples):
        z_b = res_back.checkpoints[j][1]
        z_r = res_refl.checkpoints[j][1]
        z_f = res_first.checkpoints[j][1]
        a = z_b[2 * p:3 * p]
        a_dot = z_b[3 * p:]
        gap = max(gap, float(np.max(np.abs(a - z_r[2 * p:3 * p]))))
        recon = gamma * a - a_dot
        residual = max(residual,
                       float(np.max(np.abs(recon - z_f[2 * p:3 * p]))))
    return {"second_order_gap": gap, "remark2_residual": residual}
