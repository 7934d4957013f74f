"""Adam training loops for the classifier and forecasting experiments.

Two pipelines share the optimizer and the solve machinery. The classifier
integrates each input through the model once and reads a scalar class
score off the final position. The forecaster is a recurrent loop: the
latent state is integrated between irregular observation times, rewritten
by a cell network at each observation, and decoded by an output head for
forecasts past the last observation.

Every per-sample solve is independent, so batch results never depend on
what else is in the batch. Training logs are bit-reproducible for a fixed
seed and configuration in every field except the wall-time column.
"""

import time

import numpy as np

from .adjoint import backward_pass, grad_extent
from .models import initial_state, make_rhs
from .nn import make_rng, mlp_forward, mlp_vjp, flatten_params, \
    set_flat_params
from .odeint import BlowUpError, SolveResult, SolverConfig, StepLimitError, \
    integrate
from ._fastpath import fast_backward, fast_forward, supports

# class score targets; sign carries the label, the 0.85 pullback keeps the
# tanh head out of its flat tails
INNER_TARGET = 0.85
OUTER_TARGET = -0.85


class TrainConfig:
    """Optimizer, batching, and solver settings for one training run."""

    def __init__(self, learning_rate, batch_size, epochs, seed=0,
                 solver=None, clip_threshold=None, adam_beta1=0.9,
                 adam_beta2=0.999, adam_eps=1e-8):
        if epochs < 0:
            raise ValueError("epochs must be non-negative")
        if batch_size < 1:
            raise ValueError("batch_size must be positive")
        self.learning_rate = float(learning_rate)
        self.batch_size = int(batch_size)
        self.epochs = int(epochs)
        self.seed = int(seed)
        self.solver = SolverConfig.dopri45(1e-5) if solver is None else solver
        self.clip_threshold = clip_threshold
        self.adam_beta1 = float(adam_beta1)
        self.adam_beta2 = float(adam_beta2)
        self.adam_eps = float(adam_eps)

    @classmethod
    def point_cloud(cls, epochs=200, seed=0, tolerance=1e-7):
        return cls(0.01, 50, epochs, seed=seed,
                   solver=SolverConfig.dopri45(tolerance),
                   clip_threshold=100.0)

    @classmethod
    def plane_vibration(cls, epochs, seed=0, tolerance=1e-5):
        return cls(1e-4, 64, epochs, seed=seed,
                   solver=SolverConfig.dopri45(tolerance),
                   clip_threshold=100.0)

    @classmethod
    def walker(cls, epochs, seed=0, tolerance=1e-5):
        return cls(3e-3, 256, epochs, seed=seed,
                   solver=SolverConfig.dopri45(tolerance),
                   clip_threshold=100.0)


class AdamState:
    """First/second moment accumulators plus the step counter."""

    def __init__(self, n_params):
        self.m = np.zeros(n_params)
        self.v = np.zeros(n_params)
        self.count = 0


def adam_step(params, grads, state, cfg):
    """One bias-corrected Adam update; returns the new parameter vector.

    The epsilon sits outside the square root, so the very first update
    from fresh moments is exactly -lr * g / (|g| + eps) elementwise.
    """
    params = np.asarray(params, dtype=np.float64)
    grads = np.asarray(grads, dtype=np.float64)
    if params.shape != grads.shape:
        raise ValueError("parameter/gradient extents differ: %s vs %s"
                         % (params.shape, grads.shape))
    state.count += 1
    b1, b2 = cfg.adam_beta1, cfg.adam_beta2
    state.m = b1 * state.m + (1.0 - b1) * grads
    state.v = b2 * state.v + (1.0 - b2) * grads * grads
    m_hat = state.m / (1.0 - b1 ** state.count)
    v_hat = state.v / (1.0 - b2 ** state.count)
    return params - cfg.learning_rate * m_hat / (np.sqrt(v_hat)
                                                 + cfg.adam_eps)


class TrainResult:
    """Per-epoch records plus a failure flag for blown-up runs."""

    def __init__(self, log, failed):
        self.log = log
        self.failed = failed

    def __repr__(self):
        return "TrainResult(%d epochs, failed=%s)" % (len(self.log),
                                                      self.failed)


# ---------------------------------------------------------------------------
# classifier pipeline

class ClassifierSpec:
    """An ODE model plus a dense head reading the final position."""

    def __init__(self, ode, head):
        if head.input_dim != ode.position_dim:
            raise ValueError("head input %d does not match position extent %d"
                             % (head.input_dim, ode.position_dim))
        if head.output_dim != 1:
            raise ValueError("classifier head must produce one score")
        self.ode = ode
        self.head = head


def point_cloud_classifier(family, hidden=20, seed=0, aug_dim=1):
    """Standard classifier stack for the disk-and-ring task: a three-layer
    tanh field network and a one-unit tanh head on the final position."""
    from .models import ModelSpec
    from .nn import Activation, mlp_init, split_rngs
    rng_f, rng_h = split_rngs(seed, 2)
    tanh = Activation("tanh")
    aug = aug_dim if family == "anode" else 0
    pos = 2 + aug
    f_in = 2 * pos if family == "sonode" else pos
    f_net = mlp_init([f_in, hidden, hidden, pos], tanh, rng=rng_f)
    kwargs = {"aug_dim": aug} if family == "anode" else {}
    ode = ModelSpec(family, f_net, **kwargs)
    head = mlp_init([pos, 1], tanh, out_activation=tanh, rng=rng_h)
    return ClassifierSpec(ode, head)


def _ode_params(spec):
    parts = [flatten_params(spec.f_net)]
    if spec.has_gamma() and spec.gamma_trainable:
        parts.append([spec.gamma_param])
    if spec.has_xi() and spec.xi_trainable:
        parts.append([spec.xi_param])
    return np.concatenate(parts)


def _set_ode_params(spec, flat):
    nt = spec.f_net.n_params
    set_flat_params(spec.f_net, flat[:nt])
    k = nt
    if spec.has_gamma() and spec.gamma_trainable:
        spec.gamma_param = float(flat[k])
        k += 1
    if spec.has_xi() and spec.xi_trainable:
        spec.xi_param = float(flat[k])
        k += 1


def _gather_classifier(cspec):
    parts = [_ode_params(cspec.ode), flatten_params(cspec.head)]
    if cspec.ode.init_velocity_net is not None:
        parts.append(flatten_params(cspec.ode.init_velocity_net))
    return np.concatenate(parts)


def _scatter_classifier(cspec, flat):
    ng = grad_extent(cspec.ode)
    nh = cspec.head.n_params
    _set_ode_params(cspec.ode, flat[:ng])
    set_flat_params(cspec.head, flat[ng:ng + nh])
    if cspec.ode.init_velocity_net is not None:
        set_flat_params(cspec.ode.init_velocity_net, flat[ng + nh:])


def _resolve_fast(spec, cfg, use_fast):
    if use_fast is None:
        return supports(spec) and cfg.method == "dopri45"
    if use_fast and not (supports(spec) and cfg.method == "dopri45"):
        raise ValueError("compiled path does not cover this model/solver")
    return bool(use_fast)


def _solve_forward(spec, y0, span, cfg, fast):
    if fast:
        return fast_forward(spec, y0, span[0], span[1], cfg)
    return integrate(make_rhs(spec), y0, [span[0], span[1]], cfg)


def _solve_backward(spec, fwd, cot, cfg, clip, fast):
    if fast:
        return fast_backward(spec, fwd, cot, cfg, clip_threshold=clip)
    return backward_pass(spec, fwd, cot, cfg, clip_threshold=clip)


def _class_targets(labels):
    return np.array([INNER_TARGET if lab == "inner" else OUTER_TARGET
                     for lab in labels])


def _classifier_forward_one(cspec, x, cfg, fast, span=(0.0, 1.0)):
    y0 = initial_state(cspec.ode, x).packed
    fwd = _solve_forward(cspec.ode, y0, span, cfg, fast)
    pos = fwd.final_state[:cspec.ode.position_dim]
    score = mlp_forward(cspec.head, pos)[0]
    return fwd, pos, score


def _classifier_batch_grads(cspec, batch_points, batch_targets, cfg, clip,
                            fast):
    ode = cspec.ode
    p = ode.position_dim
    n = len(batch_points)
    loss_sum = 0.0
    correct = 0
    fwd_nfe = 0
    bwd_nfe = 0
    g_ode = np.zeros(grad_extent(ode))
    g_head = np.zeros(cspec.head.n_params)
    g_iv = (np.zeros(ode.init_velocity_net.n_params)
            if ode.init_velocity_net is not None else None)
    for x, target in zip(batch_points, batch_targets):
        fwd, pos, score = _classifier_forward_one(cspec, x, cfg, fast)
        fwd_nfe += fwd.nfe
        loss_sum += (score - target) ** 2
        if np.sign(score) == np.sign(target):
            correct += 1
        cot_score = np.array([2.0 * (score - target) / n])
        grad_pos, grad_head = mlp_vjp(cspec.head, pos, 0.0, cot_score)
        g_head += grad_head
        cot_state = np.zeros(ode.state_dim)
        cot_state[:p] = grad_pos
        adj = _solve_backward(ode, fwd, cot_state, cfg, clip, fast)
        bwd_nfe += adj.backward_nfe
        g_ode += adj.grad_params
        if g_iv is not None:
            a_m = adj.grad_initial_state[p:]
            _, grad_iv = mlp_vjp(ode.init_velocity_net,
                                 fwd.states[0][:p], 0.0, a_m)
            g_iv += grad_iv
    parts = [g_ode, g_head] + ([g_iv] if g_iv is not None else [])
    metrics = {"loss": loss_sum / n, "accuracy": correct / n,
               "forward_nfe": fwd_nfe / n, "backward_nfe": bwd_nfe / n}
    return metrics, np.concatenate(parts)


def train_classifier(cspec, dataset, cfg, use_fast=None):
    """Adam on the batch mean-squared score error.

    Returns a TrainResult whose log holds one record per epoch: epoch
    number, batch loss and sign-agreement accuracy, mean solver evaluation
    counts per sample, and the wall time of the epoch. A solver blow-up
    (or step-limit stop) appends a failure record and ends the run with
    failed=True instead of raising.
    """
    points = np.asarray(dataset.points, dtype=np.float64)
    targets = _class_targets(dataset.labels)
    n = len(points)
    fast = _resolve_fast(cspec.ode, cfg.solver, use_fast)
    rng = make_rng(cfg.seed)
    params = _gather_classifier(cspec)
    opt = AdamState(params.size)
    log = []
    for epoch in range(1, cfg.epochs + 1):
        started = time.perf_counter()
        idx = rng.choice(n, size=min(cfg.batch_size, n), replace=False)
        try:
            metrics, grads = _classifier_batch_grads(
                cspec, points[idx], targets[idx], cfg.solver,
                cfg.clip_threshold, fast)
        except (BlowUpError, StepLimitError) as err:
            log.append({"epoch": epoch, "failed": True,
                        "reason": type(err).__name__})
            return TrainResult(log, True)
        params = adam_step(params, grads, opt, cfg)
        _scatter_classifier(cspec, params)
        record = {"epoch": epoch, "failed": False}
        record.update(metrics)
        record["seconds"] = time.perf_counter() - started
        log.append(record)
    return TrainResult(log, False)


def evaluate_classifier(cspec, dataset, cfg, use_fast=None):
    """Loss, accuracy, and mean forward cost over the whole dataset."""
    points = np.asarray(dataset.points, dtype=np.float64)
    targets = _class_targets(dataset.labels)
    fast = _resolve_fast(cspec.ode, cfg, use_fast)
    loss_sum = 0.0
    correct = 0
    nfe = 0
    for x, target in zip(points, targets):
        fwd, _, score = _classifier_forward_one(cspec, x, cfg, fast)
        loss_sum += (score - target) ** 2
        correct += int(np.sign(score) == np.sign(target))
        nfe += fwd.nfe
    n = len(points)
    return {"loss": loss_sum / n, "accuracy": correct / n,
            "forward_nfe": nfe / n}


def classifier_nfe_profile(cspec, dataset, tolerances, clip_threshold=None,
                           use_fast=None):
    """Mean solver evaluation counts per sample at each tolerance, with the
    parameters held fixed. The backward count drives the loss cotangent
    through the same gradient solve training uses."""
    points = np.asarray(dataset.points, dtype=np.float64)
    targets = _class_targets(dataset.labels)
    ode = cspec.ode
    p = ode.position_dim
    rows = []
    for tol in tolerances:
        cfg = SolverConfig.dopri45(tol)
        fast = _resolve_fast(ode, cfg, use_fast)
        fwd_nfe = 0
        bwd_nfe = 0
        n = len(points)
        for x, target in zip(points, targets):
            fwd, pos, score = _classifier_forward_one(cspec, x, cfg, fast)
            fwd_nfe += fwd.nfe
            cot_score = np.array([2.0 * (score - target) / n])
            grad_pos, _ = mlp_vjp(cspec.head, pos, 0.0, cot_score)
            cot_state = np.zeros(ode.state_dim)
            cot_state[:p] = grad_pos
            adj = _solve_backward(ode, fwd, cot_state, cfg, clip_threshold,
                                  fast)
            bwd_nfe += adj.backward_nfe
        rows.append({"tolerance": float(tol), "forward_nfe": fwd_nfe / n,
                     "backward_nfe": bwd_nfe / n})
    return rows


# ---------------------------------------------------------------------------
# forecasting pipeline

class OdeRnnSpec:
    """Latent ODE, observation cell, and decoding head.

    The cell maps the packed latent state with an observation appended to
    a replacement state; the head decodes the position block into an
    observation-shaped prediction, serving both forecasts and the
    next-observation regularizer.
    """

    def __init__(self, ode, rnn_cell, output_head):
        sd = ode.state_dim
        if rnn_cell.output_dim != sd:
            raise ValueError("cell output %d does not match state extent %d"
                             % (rnn_cell.output_dim, sd))
        if rnn_cell.input_dim <= sd:
            raise ValueError("cell input %d leaves no room for observations"
                             % rnn_cell.input_dim)
        if output_head.input_dim != ode.position_dim:
            raise ValueError("head input %d does not match position extent "
                             "%d" % (output_head.input_dim, ode.position_dim))
        self.ode = ode
        self.rnn_cell = rnn_cell
        self.output_head = output_head
        self.obs_dim = rnn_cell.input_dim - sd
        if output_head.output_dim != self.obs_dim:
            raise ValueError("head output %d does not match observation "
                             "extent %d" % (output_head.output_dim,
                                            self.obs_dim))


def oscillator_rnn(family, latent_dim=3, hidden=12, obs_dim=1, seed=0):
    """Forecasting stack used by the oscillator study."""
    from .models import ModelSpec, SECOND_ORDER_FAMILIES
    from .nn import Activation, mlp_init, split_rngs
    rng_f, rng_c, rng_h = split_rngs(seed, 3)
    tanh = Activation("tanh")
    f_in = 2 * latent_dim if family == "sonode" else latent_dim
    f_net = mlp_init([f_in, hidden, latent_dim], tanh, rng=rng_f)
    ode = ModelSpec(family, f_net)
    sd = 2 * latent_dim if family in SECOND_ORDER_FAMILIES else latent_dim
    cell = mlp_init([sd + obs_dim, hidden, sd], tanh, rng=rng_c)
    head = mlp_init([latent_dim, obs_dim], tanh, rng=rng_h)
    return OdeRnnSpec(ode, cell, head)


class ForecastWindow:
    """Observed stretch of a series plus forecast offsets and targets."""

    def __init__(self, obs_times, obs_values, offsets, targets):
        self.obs_times = np.asarray(obs_times, dtype=np.float64)
        self.obs_values = np.asarray(obs_values, dtype=np.float64)
        self.offsets = np.asarray(offsets, dtype=np.float64)
        self.targets = np.asarray(targets, dtype=np.float64)
        if self.obs_times.ndim != 1 or self.obs_times.size < 1:
            raise ValueError("a window needs at least one observation")
        if np.any(np.diff(self.obs_times) <= 0.0):
            raise ValueError("observation times must be strictly increasing")
        if self.obs_values.shape[0] != self.obs_times.size:
            raise ValueError("observation values do not match times")
        if self.offsets.size:
            if self.offsets[0] <= 0.0 or np.any(np.diff(self.offsets)
                                                <= 0.0):
                raise ValueError("offsets must be positive and strictly "
                                 "increasing")
        if self.targets.shape[0] != self.offsets.size:
            raise ValueError("targets do not match offsets")


def windows_from_series(series, attributes, window_len, forecast_len,
                        stride):
    """Forecast windows over a series; observations and targets both read
    the named attribute columns."""
    from .data import window_series
    out = []
    for inp, tgt in window_series(series, window_len, forecast_len, stride):
        obs = np.stack([inp.attribute(a) for a in attributes], axis=1)
        targets = np.stack([tgt.attribute(a) for a in attributes], axis=1) \
            if len(tgt) else np.zeros((0, len(attributes)))
        offsets = tgt.times - inp.times[-1]
        out.append(ForecastWindow(inp.times, obs, offsets, targets))
    return out


class OdeRnnForward:
    """Forward sweep record: predictions plus the states the backward
    sweep restarts from."""

    def __init__(self, obs_times, obs_values, offsets, predictions,
                 next_obs_predictions, pre_states, post_states,
                 forecast_states, forward_nfe):
        self.obs_times = obs_times
        self.obs_values = obs_values
        self.offsets = offsets
        self.predictions = predictions
        self.next_obs_predictions = next_obs_predictions
        self.pre_states = pre_states
        self.post_states = post_states
        self.forecast_states = forecast_states
        self.forward_nfe = forward_nfe


def ode_rnn_forward(spec, obs_times, obs_values, offsets, cfg,
                    use_fast=None):
    """Run the recurrence and decode forecasts at each offset past the
    last observation. Solves are per-segment, endpoint to endpoint."""
    ode = spec.ode
    sd = ode.state_dim
    p = ode.position_dim
    obs_times = np.asarray(obs_times, dtype=np.float64)
    obs_values = np.asarray(obs_values, dtype=np.float64)
    offsets = np.asarray(offsets, dtype=np.float64)
    if obs_values.ndim == 1:
        obs_values = obs_values[:, None]
    if obs_values.shape != (obs_times.size, spec.obs_dim):
        raise ValueError("observation extent %s does not match (%d, %d)"
                         % (obs_values.shape, obs_times.size, spec.obs_dim))
    fast = _resolve_fast(ode, cfg, use_fast)
    s = np.zeros(sd)
    pre_states = []
    post_states = []
    nfe = 0
    for i in range(obs_times.size):
        if i > 0:
            res = _solve_forward(ode, s, (obs_times[i - 1], obs_times[i]),
                                 cfg, fast)
            nfe += res.nfe
            s = res.final_state.copy()
        pre_states.append(s.copy())
        s = mlp_forward(spec.rnn_cell, np.concatenate([s, obs_values[i]]))
        post_states.append(s.copy())
    next_preds = np.array([mlp_forward(spec.output_head,
                                       pre_states[i][:p])
                           for i in range(1, obs_times.size)])
    if next_preds.size == 0:
        next_preds = np.zeros((0, spec.obs_dim))
    t_last = obs_times[-1]
    t_cur = t_last
    y = s.copy()
    forecast_states = []
    predictions = np.zeros((offsets.size, spec.obs_dim))
    for j, g in enumerate(offsets):
        res = _solve_forward(ode, y, (t_cur, t_last + g), cfg, fast)
        nfe += res.nfe
        y = res.final_state.copy()
        t_cur = t_last + g
        forecast_states.append(y.copy())
        predictions[j] = mlp_forward(spec.output_head, y[:p])
    return OdeRnnForward(obs_times, obs_values, offsets, predictions,
                         next_preds, pre_states, post_states,
                         forecast_states, nfe)


class OdeRnnBackward:
    """Loss value and flat gradients for one window."""

    def __init__(self, loss, grad_ode, grad_cell, grad_head, backward_nfe):
        self.loss = loss
        self.grad_ode = grad_ode
        self.grad_cell = grad_cell
        self.grad_head = grad_head
        self.backward_nfe = backward_nfe


def _segment_result(t_lo, t_hi, terminal):
    return SolveResult([(float(t_lo), terminal.copy()),
                        (float(t_hi), terminal.copy())], 0, 0, 0)


def ode_rnn_loss(forward, targets):
    """Forecast mean squared error plus the next-observation penalty."""
    targets = np.asarray(targets, dtype=np.float64)
    loss = 0.0
    if forward.predictions.size:
        loss += float(np.mean((forward.predictions - targets) ** 2))
    if forward.next_obs_predictions.size:
        loss += float(np.mean((forward.next_obs_predictions
                               - forward.obs_values[1:]) ** 2))
    return loss


def ode_rnn_backward(spec, forward, targets, cfg, clip_threshold=None,
                     use_fast=None):
    """Gradients of the window loss by walking the recurrence in reverse.

    Segment adjoints restart from the states the forward sweep recorded;
    cell and head pullbacks splice the cotangent across observation and
    forecast boundaries. Evaluation counts of all segment solves are
    summed.
    """
    ode = spec.ode
    p = ode.position_dim
    sd = ode.state_dim
    targets = np.asarray(targets, dtype=np.float64)
    if targets.ndim == 1:
        targets = targets[:, None]
    preds = forward.predictions
    if targets.shape != preds.shape:
        raise ValueError("target extent %s does not match predictions %s"
                         % (targets.shape, preds.shape))
    fast = _resolve_fast(ode, cfg, use_fast)
    loss = ode_rnn_loss(forward, targets)
    k = forward.obs_times.size
    n_f = preds.shape[0]
    g_ode = np.zeros(grad_extent(ode))
    g_cell = np.zeros(spec.rnn_cell.n_params)
    g_head = np.zeros(spec.output_head.n_params)
    bwd_nfe = 0
    a = np.zeros(sd)
    t_last = forward.obs_times[-1]
    for j in range(n_f - 1, -1, -1):
        cot_out = 2.0 * (preds[j] - targets[j]) / preds.size
        grad_pos, grad_head = mlp_vjp(spec.output_head,
                                      forward.forecast_states[j][:p], 0.0,
                                      cot_out)
        g_head += grad_head
        a[:p] += grad_pos
        lower = t_last + forward.offsets[j - 1] if j > 0 else t_last
        seg = _segment_result(lower, t_last + forward.offsets[j],
                              forward.forecast_states[j])
        adj = _solve_backward(ode, seg, a, cfg, clip_threshold, fast)
        bwd_nfe += adj.backward_nfe
        g_ode += adj.grad_params
        a = adj.grad_initial_state.copy()
    reg_n = forward.next_obs_predictions.size
    for i in range(k - 1, -1, -1):
        cell_in = np.concatenate([forward.pre_states[i],
                                  forward.obs_values[i]])
        grad_in, grad_cell = mlp_vjp(spec.rnn_cell, cell_in, 0.0, a)
        g_cell += grad_cell
        a = grad_in[:sd].copy()
        if i == 0:
            break
        cot_reg = 2.0 * (forward.next_obs_predictions[i - 1]
                         - forward.obs_values[i]) / reg_n
        grad_pos, grad_head = mlp_vjp(spec.output_head,
                                      forward.pre_states[i][:p], 0.0,
                                      cot_reg)
        g_head += grad_head
        a[:p] += grad_pos
        seg = _segment_result(forward.obs_times[i - 1], forward.obs_times[i],
                              forward.pre_states[i])
        adj = _solve_backward(ode, seg, a, cfg, clip_threshold, fast)
        bwd_nfe += adj.backward_nfe
        g_ode += adj.grad_params
        a = adj.grad_initial_state.copy()
    return OdeRnnBackward(loss, g_ode, g_cell, g_head, bwd_nfe)


def _gather_rnn(spec):
    return np.concatenate([_ode_params(spec.ode),
                           flatten_params(spec.rnn_cell),
                           flatten_params(spec.output_head)])


def _scatter_rnn(spec, flat):
    ng = grad_extent(spec.ode)
    nc = spec.rnn_cell.n_params
    _set_ode_params(spec.ode, flat[:ng])
    set_flat_params(spec.rnn_cell, flat[ng:ng + nc])
    set_flat_params(spec.output_head, flat[ng + nc:])


def train_ode_rnn(spec, windows, cfg, use_fast=None):
    """Adam on the mean window loss over sampled batches of windows."""
    if not windows:
        raise ValueError("no training windows")
    rng = make_rng(cfg.seed)
    params = _gather_rnn(spec)
    opt = AdamState(params.size)
    n = len(windows)
    log = []
    for epoch in range(1, cfg.epochs + 1):
        started = time.perf_counter()
        idx = rng.choice(n, size=min(cfg.batch_size, n), replace=False)
        loss_sum = 0.0
        fwd_nfe = 0
        bwd_nfe = 0
        grads = np.zeros_like(params)
        try:
            for w in (windows[i] for i in idx):
                fwd = ode_rnn_forward(spec, w.obs_times, w.obs_values,
                                      w.offsets, cfg.solver,
                                      use_fast=use_fast)
                back = ode_rnn_backward(spec, fwd, w.targets, cfg.solver,
                                        clip_threshold=cfg.clip_threshold,
                                        use_fast=use_fast)
                loss_sum += back.loss
                fwd_nfe += fwd.forward_nfe
                bwd_nfe += back.backward_nfe
                grads += np.concatenate([back.grad_ode, back.grad_cell,
                                         back.grad_head])
        except (BlowUpError, StepLimitError) as err:
            log.append({"epoch": epoch, "failed": True,
                        "reason": type(err).__name__})
            return TrainResult(log, True)
        b = len(idx)
        params = adam_step(params, grads / b, opt, cfg)
        _scatter_rnn(spec, params)
        log.append({"epoch": epoch, "failed": False, "loss": loss_sum / b,
                    "forward_nfe": fwd_nfe / b, "backward_nfe": bwd_nfe / b,
                    "seconds": time.perf_counter() - started})
    return TrainResult(log, False)


def evaluate_ode_rnn(spec, windows, cfg, use_fast=None):
    """Mean forecast error over windows, without the regularizer term."""
    if not windows:
        raise ValueError("no evaluation windows")
    mse_sum = 0.0
    nfe = 0
    for w in windows:
        fwd = ode_rnn_forward(spec, w.obs_times, w.obs_values, w.offsets,
                              cfg, use_fast=use_fast)
        mse_sum += float(np.mean((fwd.predictions - w.targets) ** 2))
        nfe += fwd.forward_nfe
    return {"mse": mse_sum / len(windows), "forward_nfe": nfe / len(windows)}
