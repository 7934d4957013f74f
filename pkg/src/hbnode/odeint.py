"""Explicit Runge-Kutta integration over flat float64 state vectors.

Two methods: classic fixed-step RK4 and the adaptive Dormand-Prince 4(5)
pair with FSAL stage reuse. Requested output times are hit exactly by step
truncation (no dense-output interpolation), and every right-hand-side
evaluation is counted, because downstream experiments treat the evaluation
count (NFE) as the cost metric of record.

NFE bookkeeping under FSAL: one evaluation primes the first stage, then each
attempted step costs exactly six fresh evaluations, whether accepted or
rejected, so nfe == 1 + 6*(accepted + rejected) for an unmodified solve.
"""

import numpy as np

# Dormand-Prince 4(5) tableau. The 5th-order weights are summed in the order
# b1, b3, b5, b4, b6: this ordering makes them sum to exactly 1.0 in float64,
# so constant dynamics advance bit-exactly and quadrature weights lose nothing.
DP_C2, DP_C3, DP_C4, DP_C5 = 1.0 / 5.0, 3.0 / 10.0, 4.0 / 5.0, 8.0 / 9.0
DP_A21 = 1.0 / 5.0
DP_A31, DP_A32 = 3.0 / 40.0, 9.0 / 40.0
DP_A41, DP_A42, DP_A43 = 44.0 / 45.0, -56.0 / 15.0, 32.0 / 9.0
DP_A51, DP_A52, DP_A53, DP_A54 = (19372.0 / 6561.0, -25360.0 / 2187.0,
                                  64448.0 / 6561.0, -212.0 / 729.0)
DP_A61, DP_A62, DP_A63, DP_A64, DP_A65 = (9017.0 / 3168.0, -355.0 / 33.0,
                                          46732.0 / 5247.0, 49.0 / 176.0,
                                          -5103.0 / 18656.0)
DP_B1, DP_B3, DP_B4, DP_B5, DP_B6 = (35.0 / 384.0, 500.0 / 1113.0,
                                     125.0 / 192.0, -2187.0 / 6784.0,
                                     11.0 / 84.0)
DP_E1, DP_E3, DP_E4, DP_E5, DP_E6, DP_E7 = (71.0 / 57600.0, -71.0 / 16695.0,
                                            71.0 / 1920.0,
                                            -17253.0 / 339200.0, 22.0 / 525.0,
                                            -1.0 / 40.0)


class SolverConfig:
    """Method selection plus step-control constants.

    method is either "dopri45" (rtol/atol drive the controller) or
    "rk4_fixed" (constant step, truncated at requested times).
    """

    def __init__(self, method, rtol=1e-6, atol=1e-6, step=1e-2,
                 max_steps=100000, safety=0.9, min_scale=0.2, max_scale=10.0):
        if method not in ("dopri45", "rk4_fixed"):
            raise ValueError("unknown method: %r" % (method,))
        if method == "dopri45" and (rtol <= 0.0 or atol <= 0.0):
            raise ValueError("rtol and atol must be positive")
        if method == "rk4_fixed" and step <= 0.0:
            raise ValueError("step must be positive")
        if max_steps < 1:
            raise ValueError("max_steps must be at least 1")
        if not (0.0 < safety < 1.0 and 0.0 < min_scale < 1.0 < max_scale):
            raise ValueError("bad controller constants")
        self.method = method
        self.rtol = float(rtol)
        self.atol = float(atol)
        self.step = float(step)
        self.max_steps = int(max_steps)
        self.safety = float(safety)
        self.min_scale = float(min_scale)
        self.max_scale = float(max_scale)

    @classmethod
    def dopri45(cls, rtol, atol=None, **kw):
        if atol is None:
            atol = rtol
        return cls("dopri45", rtol=rtol, atol=atol, **kw)

    @classmethod
    def rk4(cls, step, **kw):
        return cls("rk4_fixed", step=step, **kw)

    def __repr__(self):
        if self.method == "dopri45":
            return "SolverConfig.dopri45(rtol=%g, atol=%g)" % (self.rtol,
                                                               self.atol)
        return "SolverConfig.rk4(step=%g)" % (self.step,)


class SolveResult:
    """Checkpoints at exactly the requested times, plus step statistics."""

    def __init__(self, checkpoints, nfe, accepted_steps, rejected_steps):
        self.checkpoints = checkpoints
        self.nfe = nfe
        self.accepted_steps = accepted_steps
        self.rejected_steps = rejected_steps

    @property
    def times(self):
        return np.array([t for t, _ in self.checkpoints])

    @property
    def states(self):
        return np.array([y for _, y in self.checkpoints])

    @property
    def final_time(self):
        return self.checkpoints[-1][0]

    @property
    def final_state(self):
        return self.checkpoints[-1][1]

    def __repr__(self):
        return ("SolveResult(%d checkpoints, nfe=%d, accepted=%d, rejected=%d)"
                % (len(self.checkpoints), self.nfe, self.accepted_steps,
                   self.rejected_steps))


class StepLimitError(RuntimeError):
    """max_steps exhausted; carries the partial result."""

    def __init__(self, partial):
        super().__init__("step limit exceeded at t=%g" % partial.final_time)
        self.partial = partial


class BlowUpError(RuntimeError):
    """Non-finite state encountered; carries the last finite time reached."""

    def __init__(self, last_time, partial):
        super().__init__("solution blew up after t=%g" % last_time)
        self.last_time = last_time
        self.partial = partial


def step_dopri45(rhs, t, y, h, k1_cached=None):
    """One attempted Dormand-Prince step of size h from (t, y).

    Returns (y5, err_est, k_last). k_last is the stage evaluated at
    (t+h, y5); under FSAL it becomes the next step's first stage if the
    caller accepts this one. Passing k1_cached skips the first evaluation.
    """
    k1 = rhs(t, y) if k1_cached is None else k1_cached
    k2 = rhs(t + DP_C2 * h, y + h * (DP_A21 * k1))
    k3 = rhs(t + DP_C3 * h, y + h * (DP_A31 * k1 + DP_A32 * k2))
    k4 = rhs(t + DP_C4 * h, y + h * (DP_A41 * k1 + DP_A42 * k2 + DP_A43 * k3))
    k5 = rhs(t + DP_C5 * h, y + h * (DP_A51 * k1 + DP_A52 * k2 + DP_A53 * k3
                                     + DP_A54 * k4))
    k6 = rhs(t + h, y + h * (DP_A61 * k1 + DP_A62 * k2 + DP_A63 * k3
                             + DP_A64 * k4 + DP_A65 * k5))
    y5 = y + h * (DP_B1 * k1 + DP_B3 * k3 + DP_B5 * k5 + DP_B4 * k4
                  + DP_B6 * k6)
    k7 = rhs(t + h, y5)
    err = h * (DP_E1 * k1 + DP_E3 * k3 + DP_E4 * k4 + DP_E5 * k5 + DP_E6 * k6
               + DP_E7 * k7)
    return y5, err, k7


def error_norm(err, y_old, y_new, rtol, atol, err_len=None):
    """RMS of the error scaled by atol + rtol*max(|y_old|, |y_new|).

    err_len restricts the norm to the leading components; trailing entries
    (for example a quadrature accumulator riding along with the state) then
    do not influence step control.
    """
    if err_len is not None:
        err = err[:err_len]
        y_old = y_old[:err_len]
        y_new = y_new[:err_len]
    scale = atol + rtol * np.maximum(np.abs(y_old), np.abs(y_new))
    return float(np.sqrt(np.mean((err / scale) ** 2)))


def _validate_times(times):
    times = np.asarray(times, dtype=np.float64)
    if times.ndim != 1 or times.size < 1:
        raise ValueError("times must be a non-empty 1-d sequence")
    if times.size > 1:
        d = np.diff(times)
        if not (np.all(d > 0.0) or np.all(d < 0.0)):
            raise ValueError("times must be strictly monotone")
    return times


def integrate(rhs, y0, times, cfg, post_accept=None, err_len=None):
    """Integrate dy/dt = rhs(t, y) through every requested time.

    times may increase or decrease (decreasing runs drive backward adjoint
    solves). post_accept, when given, maps (t, y) to a possibly adjusted y
    after each accepted step; if it changes the state the cached FSAL stage
    is recomputed and counted. Raises StepLimitError or BlowUpError with the
    partial result attached.
    """
    times = _validate_times(times)
    y = np.array(y0, dtype=np.float64)
    if y.ndim != 1:
        raise ValueError("state must be a flat vector")
    if not np.all(np.isfinite(y)):
        raise ValueError("initial state must be finite")
    checkpoints = [(float(times[0]), y.copy())]
    if times.size == 1:
        return SolveResult(checkpoints, 0, 0, 0)
    if cfg.method == "rk4_fixed":
        return _integrate_rk4(rhs, y, times, cfg, post_accept, checkpoints)
    return _integrate_dopri45(rhs, y, times, cfg, post_accept, err_len,
                              checkpoints)


def _partial(checkpoints, nfe, acc, rej):
    return SolveResult(list(checkpoints), nfe, acc, rej)


def _integrate_dopri45(rhs, y, times, cfg, post_accept, err_len, checkpoints):
    # non-finite values are detected and reported as BlowUpError, so float
    # overflow on the way there is not worth a warning
    with np.errstate(over="ignore", invalid="ignore"):
        return _dopri45_loop(rhs, y, times, cfg, post_accept, err_len,
                             checkpoints)


def _dopri45_loop(rhs, y, times, cfg, post_accept, err_len, checkpoints):
    direction = 1.0 if times[-1] > times[0] else -1.0
    t = float(times[0])
    h = (float(times[-1]) - t) / 100.0
    k1 = rhs(t, y)
    nfe = 1
    acc = rej = 0
    for target in times[1:]:
        target = float(target)
        while (target - t) * direction > 0.0:
            if acc + rej >= cfg.max_steps:
                raise StepLimitError(_partial(checkpoints, nfe, acc, rej))
            remaining = target - t
            truncated = abs(h) >= abs(remaining)
            h_use = remaining if truncated else h
            y5, err, k_last = step_dopri45(rhs, t, y, h_use, k1)
            nfe += 6
            en = error_norm(err, y, y5, cfg.rtol, cfg.atol, err_len)
            if not np.isfinite(en) or not np.all(np.isfinite(y5)):
                raise BlowUpError(t, _partial(checkpoints, nfe, acc, rej))
            if en == 0.0:
                scale = cfg.max_scale
            else:
                scale = min(max(cfg.safety * en ** -0.2, cfg.min_scale),
                            cfg.max_scale)
            if en <= 1.0:
                t = target if truncated else t + h_use
                y = y5
                k1 = k_last
                acc += 1
                if post_accept is not None:
                    y_adj = post_accept(t, y)
                    if y_adj is not y and not np.array_equal(y_adj, y):
                        y = np.asarray(y_adj, dtype=np.float64)
                        k1 = rhs(t, y)
                        nfe += 1
            else:
                rej += 1
            h = h_use * scale
        checkpoints.append((target, y.copy()))
    return SolveResult(checkpoints, nfe, acc, rej)


def _integrate_rk4(rhs, y, times, cfg, post_accept, checkpoints):
    with np.errstate(over="ignore", invalid="ignore"):
        return _rk4_loop(rhs, y, times, cfg, post_accept, checkpoints)


def _rk4_loop(rhs, y, times, cfg, post_accept, checkpoints):
    direction = 1.0 if times[-1] > times[0] else -1.0
    t = float(times[0])
    nfe = 0
    steps = 0
    for target in times[1:]:
        target = float(target)
        while (target - t) * direction > 0.0:
            if steps >= cfg.max_steps:
                raise StepLimitError(_partial(checkpoints, nfe, steps, 0))
            remaining = target - t
            truncated = cfg.step >= abs(remaining)
            h = remaining if truncated else direction * cfg.step
            k1 = rhs(t, y)
            k2 = rhs(t + 0.5 * h, y + 0.5 * h * k1)
            k3 = rhs(t + 0.5 * h, y + 0.5 * h * k2)
            k4 = rhs(t + h, y + h * k3)
            y = y + (h / 6.0) * (k1 + 2.0 * k2 + 2.0 * k3 + k4)
            nfe += 4
            steps += 1
            if not np.all(np.isfinite(y)):
                raise BlowUpError(t, _partial(checkpoints, nfe, steps, 0))
            t = target if truncated else t + h
            if post_accept is not None:
                y_adj = post_accept(t, y)
                if y_adj is not y and not np.array_equal(y_adj, y):
                    y = np.asarray(y_adj, dtype=np.float64)
        checkpoints.append((target, y.copy()))
    return SolveResult(checkpoints, nfe, steps, 0)
