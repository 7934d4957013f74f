"""Compiled solver kernels for the training and study loops.

The pure-numpy paths in odeint/adjoint define the behaviour; the kernels
here replicate it, operation for operation, for the narrow shape the
experiment loops hammer: an autonomous multilayer perceptron vector field,
a single endpoint target, float64 everywhere. Forward solves return the
terminal state, backward solves return the same gradients backward_pass
produces. Anything outside that shape (time-augmented nets, trace
recording, intermediate checkpoints) stays on the reference path.

Parity with the reference path is pinned by tests on step counts and on
values to near machine precision; bit identity is not promised because the
kernels use plain loops where numpy may use pairwise summation.
"""

import numpy as np
from numba import njit

from .nn import ACTIVATION_KINDS, Activation, flatten_params
from .odeint import BlowUpError, SolveResult, StepLimitError
from .adjoint import AdjointResult, grad_extent

# family dispatch codes; anode shares the node rate (its padding lives in
# the state layout, not the dynamics)
FAMILY_CODES = {"node": 0, "anode": 0, "sonode": 2, "hbnode": 3, "ghbnode": 4}

_LOGE2 = 0.6931471805599453

STATUS_OK = 0
STATUS_STEP_LIMIT = 1
STATUS_BLOW_UP = 2


@njit(cache=True)
def _act_val(code, p1, p2, x):
    if code == 0:
        return x
    if code == 1:
        return np.tanh(x)
    if code == 2:
        return x if x > 0.0 else 0.0
    if code == 3:
        return x if x > 0.0 else p1 * x
    if code == 4:
        return x if x > 0.0 else np.expm1(min(x, 0.0))
    if code == 5:
        if x >= 0.0:
            return 1.0 / (1.0 + np.exp(-x))
        ex = np.exp(x)
        return ex / (1.0 + ex)
    if code == 6:
        if x < 0.0:
            return np.log1p(np.exp(x))
        if x > 0.0:
            return x + np.log1p(np.exp(-x))
        return x + _LOGE2
    # hardtanh with bounds (p1, p2)
    if x < p1:
        return p1
    if x > p2:
        return p2
    return x


@njit(cache=True)
def _act_der(code, p1, p2, x):
    if code == 0:
        return 1.0
    if code == 1:
        t = np.tanh(x)
        return 1.0 - t * t
    if code == 2:
        return 1.0 if x > 0.0 else 0.0
    if code == 3:
        return 1.0 if x > 0.0 else p1
    if code == 4:
        return 1.0 if x > 0.0 else np.exp(min(x, 0.0))
    if code == 5 or code == 6:
        if x >= 0.0:
            s = 1.0 / (1.0 + np.exp(-x))
        else:
            ex = np.exp(x)
            s = ex / (1.0 + ex)
        if code == 6:
            return s
        return s * (1.0 - s)
    # hardtanh: 1 on [lo, hi), 0 at hi and outside
    return 1.0 if (x >= p1 and x < p2) else 0.0


@njit(cache=True)
def _mlp_fwd(theta, dims, offs, acodes, ap1, ap2, x, abuf, zbuf, out):
    # abuf[i] holds layer i's input, zbuf[i] its pre-activation; both are
    # left filled for a following vjp at the same input
    nl = dims.shape[0] - 1
    for j in range(dims[0]):
        abuf[0, j] = x[j]
    for i in range(nl):
        di = dims[i]
        do = dims[i + 1]
        base = offs[i]
        boff = base + do * di
        for r in range(do):
            s = 0.0
            row = base + r * di
            for c in range(di):
                s += theta[row + c] * abuf[i, c]
            zbuf[i, r] = s + theta[boff + r]
        code = acodes[i]
        q1 = ap1[i]
        q2 = ap2[i]
        if i < nl - 1:
            for r in range(do):
                abuf[i + 1, r] = _act_val(code, q1, q2, zbuf[i, r])
        else:
            for r in range(do):
                out[r] = _act_val(code, q1, q2, zbuf[i, r])


@njit(cache=True)
def _mlp_vjp(theta, dims, offs, acodes, ap1, ap2, cot, abuf, zbuf,
             gin, gtheta, gz, g):
    # requires abuf/zbuf as _mlp_fwd left them for the same input
    nl = dims.shape[0] - 1
    for j in range(dims[nl]):
        g[j] = cot[j]
    for i in range(nl - 1, -1, -1):
        di = dims[i]
        do = dims[i + 1]
        base = offs[i]
        boff = base + do * di
        code = acodes[i]
        q1 = ap1[i]
        q2 = ap2[i]
        for r in range(do):
            gz[r] = g[r] * _act_der(code, q1, q2, zbuf[i, r])
        for r in range(do):
            row = base + r * di
            for c in range(di):
                gtheta[row + c] = gz[r] * abuf[i, c]
            gtheta[boff + r] = gz[r]
        for c in range(di):
            s = 0.0
            for r in range(do):
                s += theta[base + r * di + c] * gz[r]
            g[c] = s
    for j in range(dims[0]):
        gin[j] = g[j]


@njit(cache=True)
def _state_rate(fam, gamma, xi, sg, sp1, sp2,
                theta, dims, offs, acodes, ap1, ap2, p,
                y, out, abuf, zbuf, fh):
    if fam == 0:
        _mlp_fwd(theta, dims, offs, acodes, ap1, ap2, y, abuf, zbuf, out)
        return
    if fam == 2:
        _mlp_fwd(theta, dims, offs, acodes, ap1, ap2, y, abuf, zbuf, fh)
        for i in range(p):
            out[i] = y[p + i]
            out[p + i] = fh[i]
        return
    _mlp_fwd(theta, dims, offs, acodes, ap1, ap2, y[:p], abuf, zbuf, fh)
    if fam == 3:
        for i in range(p):
            out[i] = y[p + i]
            out[p + i] = -gamma * y[p + i] + fh[i]
        return
    for i in range(p):
        out[i] = _act_val(sg, sp1, sp2, y[p + i])
        out[p + i] = (-gamma * y[p + i] + fh[i]) - xi * y[i]


@njit(cache=True)
def _aug_rate(fam, gamma, xi, sg, sp1, sp2,
              theta, dims, offs, acodes, ap1, ap2, p, sd,
              has_g, gfac, has_x, xfac,
              z, out, abuf, zbuf, fh, gin, gth, gz, g):
    nt = theta.shape[0]
    y = z[:sd]
    a = z[sd:2 * sd]
    if fam == 0:
        _mlp_fwd(theta, dims, offs, acodes, ap1, ap2, y, abuf, zbuf, fh)
        _mlp_vjp(theta, dims, offs, acodes, ap1, ap2, a, abuf, zbuf,
                 gin, gth, gz, g)
        for i in range(sd):
            out[i] = fh[i]
            out[sd + i] = -gin[i]
    elif fam == 2:
        _mlp_fwd(theta, dims, offs, acodes, ap1, ap2, y, abuf, zbuf, fh)
        _mlp_vjp(theta, dims, offs, acodes, ap1, ap2, a[p:], abuf, zbuf,
                 gin, gth, gz, g)
        for i in range(p):
            out[i] = y[p + i]
            out[p + i] = fh[i]
            out[sd + i] = -gin[i]
            out[sd + p + i] = -a[i] - gin[p + i]
    else:
        _mlp_fwd(theta, dims, offs, acodes, ap1, ap2, y[:p], abuf, zbuf, fh)
        _mlp_vjp(theta, dims, offs, acodes, ap1, ap2, a[p:], abuf, zbuf,
                 gin, gth, gz, g)
        if fam == 3:
            for i in range(p):
                out[i] = y[p + i]
                out[p + i] = -gamma * y[p + i] + fh[i]
                out[sd + i] = -gin[i]
                out[sd + p + i] = -a[i] + gamma * a[p + i]
        else:
            for i in range(p):
                out[i] = _act_val(sg, sp1, sp2, y[p + i])
                out[p + i] = (-gamma * y[p + i] + fh[i]) - xi * y[i]
                out[sd + i] = -gin[i] + xi * a[p + i]
                out[sd + p + i] = (-a[i] * _act_der(sg, sp1, sp2, y[p + i])
                                   + gamma * a[p + i])
    # accumulator block integrates the negated gradient rate
    for j in range(nt):
        out[2 * sd + j] = -gth[j]
    k = 2 * sd + nt
    if has_g == 1:
        s = 0.0
        for i in range(p):
            s += a[p + i] * y[p + i]
        out[k] = s * gfac
        k += 1
    if has_x == 1:
        s = 0.0
        for i in range(p):
            s += a[p + i] * y[i]
        out[k] = s * xfac


@njit(cache=True)
def _forward_kernel(fam, gamma, xi, sg, sp1, sp2,
                    theta, dims, offs, acodes, ap1, ap2, p,
                    y0, t_from, t_to, rtol, atol, max_steps,
                    safety, min_scale, max_scale):
    sd = y0.shape[0]
    nl = dims.shape[0] - 1
    maxw = 0
    for i in range(dims.shape[0]):
        if dims[i] > maxw:
            maxw = dims[i]
    abuf = np.empty((nl, maxw))
    zbuf = np.empty((nl, maxw))
    fh = np.empty(maxw)
    y = y0.copy()
    k1 = np.empty(sd)
    k2 = np.empty(sd)
    k3 = np.empty(sd)
    k4 = np.empty(sd)
    k5 = np.empty(sd)
    k6 = np.empty(sd)
    k7 = np.empty(sd)
    yt = np.empty(sd)
    y5 = np.empty(sd)
    direction = 1.0 if t_to > t_from else -1.0
    t = t_from
    h = (t_to - t_from) / 100.0
    _state_rate(fam, gamma, xi, sg, sp1, sp2, theta, dims, offs, acodes,
                ap1, ap2, p, y, k1, abuf, zbuf, fh)
    nfe = 1
    acc = 0
    rej = 0
    status = STATUS_OK
    while (t_to - t) * direction > 0.0:
        if acc + rej >= max_steps:
            status = STATUS_STEP_LIMIT
            break
        remaining = t_to - t
        truncated = abs(h) >= abs(remaining)
        hu = remaining if truncated else h
        for i in range(sd):
            yt[i] = y[i] + hu * (0.2 * k1[i])
        _state_rate(fam, gamma, xi, sg, sp1, sp2, theta, dims, offs, acodes,
                    ap1, ap2, p, yt, k2, abuf, zbuf, fh)
        for i in range(sd):
            yt[i] = y[i] + hu * (3.0 / 40.0 * k1[i] + 9.0 / 40.0 * k2[i])
        _state_rate(fam, gamma, xi, sg, sp1, sp2, theta, dims, offs, acodes,
                    ap1, ap2, p, yt, k3, abuf, zbuf, fh)
        for i in range(sd):
            yt[i] = y[i] + hu * (44.0 / 45.0 * k1[i] - 56.0 / 15.0 * k2[i]
                                 + 32.0 / 9.0 * k3[i])
        _state_rate(fam, gamma, xi, sg, sp1, sp2, theta, dims, offs, acodes,
                    ap1, ap2, p, yt, k4, abuf, zbuf, fh)
        for i in range(sd):
            yt[i] = y[i] + hu * (19372.0 / 6561.0 * k1[i]
                                 - 25360.0 / 2187.0 * k2[i]
                                 + 64448.0 / 6561.0 * k3[i]
                                 - 212.0 / 729.0 * k4[i])
        _state_rate(fam, gamma, xi, sg, sp1, sp2, theta, dims, offs, acodes,
                    ap1, ap2, p, yt, k5, abuf, zbuf, fh)
        for i in range(sd):
            yt[i] = y[i] + hu * (9017.0 / 3168.0 * k1[i]
                                 - 355.0 / 33.0 * k2[i]
                                 + 46732.0 / 5247.0 * k3[i]
                                 + 49.0 / 176.0 * k4[i]
                                 - 5103.0 / 18656.0 * k5[i])
        _state_rate(fam, gamma, xi, sg, sp1, sp2, theta, dims, offs, acodes,
                    ap1, ap2, p, yt, k6, abuf, zbuf, fh)
        # summation order matches the reference tableau exactly
        for i in range(sd):
            y5[i] = y[i] + hu * (35.0 / 384.0 * k1[i]
                                 + 500.0 / 1113.0 * k3[i]
                                 - 2187.0 / 6784.0 * k5[i]
                                 + 125.0 / 192.0 * k4[i]
                                 + 11.0 / 84.0 * k6[i])
        _state_rate(fam, gamma, xi, sg, sp1, sp2, theta, dims, offs, acodes,
                    ap1, ap2, p, y5, k7, abuf, zbuf, fh)
        nfe += 6
        s2 = 0.0
        ok = True
        for i in range(sd):
            e = hu * (71.0 / 57600.0 * k1[i] - 71.0 / 16695.0 * k3[i]
                      + 71.0 / 1920.0 * k4[i] - 17253.0 / 339200.0 * k5[i]
                      + 22.0 / 525.0 * k6[i] - 1.0 / 40.0 * k7[i])
            sc = atol + rtol * max(abs(y[i]), abs(y5[i]))
            q = e / sc
            s2 += q * q
            if not np.isfinite(y5[i]):
                ok = False
        en = np.sqrt(s2 / sd)
        if not np.isfinite(en) or not ok:
            status = STATUS_BLOW_UP
            break
        if en == 0.0:
            sc_f = max_scale
        else:
            sc_f = min(max(safety * en ** -0.2, min_scale), max_scale)
        if en <= 1.0:
            t = t_to if truncated else t + hu
            for i in range(sd):
                y[i] = y5[i]
                k1[i] = k7[i]
            acc += 1
        else:
            rej += 1
        h = hu * sc_f
    return status, t, y, nfe, acc, rej


@njit(cache=True)
def _backward_kernel(fam, gamma, xi, sg, sp1, sp2,
                     theta, dims, offs, acodes, ap1, ap2, p,
                     yT, cot, t_from, t_to, has_g, gfac, has_x, xfac,
                     clip_thr, rtol, atol, max_steps,
                     safety, min_scale, max_scale):
    sd = yT.shape[0]
    nt = theta.shape[0]
    ng = nt + has_g + has_x
    nz = 2 * sd + ng
    nl = dims.shape[0] - 1
    maxw = 0
    for i in range(dims.shape[0]):
        if dims[i] > maxw:
            maxw = dims[i]
    abuf = np.empty((nl, maxw))
    zbuf = np.empty((nl, maxw))
    fh = np.empty(maxw)
    gin = np.empty(maxw)
    gth = np.empty(nt)
    gz = np.empty(maxw)
    g = np.empty(maxw)
    z = np.empty(nz)
    for i in range(sd):
        z[i] = yT[i]
        z[sd + i] = cot[i]
    for j in range(ng):
        z[2 * sd + j] = 0.0
    k1 = np.empty(nz)
    k2 = np.empty(nz)
    k3 = np.empty(nz)
    k4 = np.empty(nz)
    k5 = np.empty(nz)
    k6 = np.empty(nz)
    k7 = np.empty(nz)
    zt = np.empty(nz)
    z5 = np.empty(nz)
    direction = 1.0 if t_to > t_from else -1.0
    t = t_from
    h = (t_to - t_from) / 100.0
    _aug_rate(fam, gamma, xi, sg, sp1, sp2, theta, dims, offs, acodes,
              ap1, ap2, p, sd, has_g, gfac, has_x, xfac,
              z, k1, abuf, zbuf, fh, gin, gth, gz, g)
    nfe = 1
    acc = 0
    rej = 0
    status = STATUS_OK
    while (t_to - t) * direction > 0.0:
        if acc + rej >= max_steps:
            status = STATUS_STEP_LIMIT
            break
        remaining = t_to - t
        truncated = abs(h) >= abs(remaining)
        hu = remaining if truncated else h
        for i in range(nz):
            zt[i] = z[i] + hu * (0.2 * k1[i])
        _aug_rate(fam, gamma, xi, sg, sp1, sp2, theta, dims, offs, acodes,
                  ap1, ap2, p, sd, has_g, gfac, has_x, xfac,
                  zt, k2, abuf, zbuf, fh, gin, gth, gz, g)
        for i in range(nz):
            zt[i] = z[i] + hu * (3.0 / 40.0 * k1[i] + 9.0 / 40.0 * k2[i])
        _aug_rate(fam, gamma, xi, sg, sp1, sp2, theta, dims, offs, acodes,
                  ap1, ap2, p, sd, has_g, gfac, has_x, xfac,
                  zt, k3, abuf, zbuf, fh, gin, gth, gz, g)
        for i in range(nz):
            zt[i] = z[i] + hu * (44.0 / 45.0 * k1[i] - 56.0 / 15.0 * k2[i]
                                 + 32.0 / 9.0 * k3[i])
        _aug_rate(fam, gamma, xi, sg, sp1, sp2, theta, dims, offs, acodes,
                  ap1, ap2, p, sd, has_g, gfac, has_x, xfac,
                  zt, k4, abuf, zbuf, fh, gin, gth, gz, g)
        for i in range(nz):
            zt[i] = z[i] + hu * (19372.0 / 6561.0 * k1[i]
                                 - 25360.0 / 2187.0 * k2[i]
                                 + 64448.0 / 6561.0 * k3[i]
                                 - 212.0 / 729.0 * k4[i])
        _aug_rate(fam, gamma, xi, sg, sp1, sp2, theta, dims, offs, acodes,
                  ap1, ap2, p, sd, has_g, gfac, has_x, xfac,
                  zt, k5, abuf, zbuf, fh, gin, gth, gz, g)
        for i in range(nz):
            zt[i] = z[i] + hu * (9017.0 / 3168.0 * k1[i]
                                 - 355.0 / 33.0 * k2[i]
                                 + 46732.0 / 5247.0 * k3[i]
                                 + 49.0 / 176.0 * k4[i]
                                 - 5103.0 / 18656.0 * k5[i])
        _aug_rate(fam, gamma, xi, sg, sp1, sp2, theta, dims, offs, acodes,
                  ap1, ap2, p, sd, has_g, gfac, has_x, xfac,
                  zt, k6, abuf, zbuf, fh, gin, gth, gz, g)
        for i in range(nz):
            z5[i] = z[i] + hu * (35.0 / 384.0 * k1[i]
                                 + 500.0 / 1113.0 * k3[i]
                                 - 2187.0 / 6784.0 * k5[i]
                                 + 125.0 / 192.0 * k4[i]
                                 + 11.0 / 84.0 * k6[i])
        _aug_rate(fam, gamma, xi, sg, sp1, sp2, theta, dims, offs, acodes,
                  ap1, ap2, p, sd, has_g, gfac, has_x, xfac,
                  z5, k7, abuf, zbuf, fh, gin, gth, gz, g)
        nfe += 6
        # step control reads only the state and adjoint blocks
        s2 = 0.0
        ok = True
        for i in range(2 * sd):
            e = hu * (71.0 / 57600.0 * k1[i] - 71.0 / 16695.0 * k3[i]
                      + 71.0 / 1920.0 * k4[i] - 17253.0 / 339200.0 * k5[i]
                      + 22.0 / 525.0 * k6[i] - 1.0 / 40.0 * k7[i])
            sc = atol + rtol * max(abs(z[i]), abs(z5[i]))
            q = e / sc
            s2 += q * q
        for i in range(nz):
            if not np.isfinite(z5[i]):
                ok = False
        en = np.sqrt(s2 / (2 * sd))
        if not np.isfinite(en) or not ok:
            status = STATUS_BLOW_UP
            break
        if en == 0.0:
            sc_f = max_scale
        else:
            sc_f = min(max(safety * en ** -0.2, min_scale), max_scale)
        if en <= 1.0:
            t = t_to if truncated else t + hu
            for i in range(nz):
                z[i] = z5[i]
                k1[i] = k7[i]
            acc += 1
            if clip_thr > 0.0:
                s = 0.0
                for i in range(sd, 2 * sd):
                    s += z[i] * z[i]
                norm = np.sqrt(s)
                if norm > clip_thr:
                    r = clip_thr / norm
                    for i in range(sd, 2 * sd):
                        z[i] *= r
                    _aug_rate(fam, gamma, xi, sg, sp1, sp2, theta, dims,
                              offs, acodes, ap1, ap2, p, sd, has_g, gfac,
                              has_x, xfac, z, k1, abuf, zbuf, fh, gin, gth,
                              gz, g)
                    nfe += 1
        else:
            rej += 1
        h = hu * sc_f
    return status, t, z, nfe, acc, rej


def supports(spec):
    """Whether the kernels cover this model (autonomous net, known family)."""
    return (spec.family in FAMILY_CODES
            and not spec.f_net.time_augmented)


def pack_net(net):
    """Flatten a network into the arrays the kernels consume."""
    if net.time_augmented:
        raise ValueError("kernels handle autonomous networks only")
    dims = [net.layers[0][0].shape[1]]
    acodes = []
    ap1 = []
    ap2 = []
    offs = []
    k = 0
    for W, b, act in net.layers:
        dims.append(W.shape[0])
        acodes.append(ACTIVATION_KINDS.index(act.kind))
        if act.kind == "hardtanh":
            ap1.append(act.lo)
            ap2.append(act.hi)
        else:
            ap1.append(act.slope)
            ap2.append(0.0)
        offs.append(k)
        k += W.size + b.size
    return (flatten_params(net),
            np.asarray(dims, dtype=np.int64),
            np.asarray(offs, dtype=np.int64),
            np.asarray(acodes, dtype=np.int64),
            np.asarray(ap1, dtype=np.float64),
            np.asarray(ap2, dtype=np.float64))


def _model_args(spec):
    fam = FAMILY_CODES[spec.family]
    theta, dims, offs, acodes, ap1, ap2 = pack_net(spec.f_net)
    sigma = spec.sigma
    sg = ACTIVATION_KINDS.index(sigma.kind)
    if sigma.kind == "hardtanh":
        sp1, sp2 = sigma.lo, sigma.hi
    else:
        sp1, sp2 = sigma.slope, 0.0
    return (fam, float(spec.gamma), float(spec.xi), sg, float(sp1),
            float(sp2), theta, dims, offs, acodes, ap1, ap2,
            np.int64(spec.position_dim))


def _check_cfg(cfg):
    if cfg.method != "dopri45":
        raise ValueError("kernels implement the adaptive method only")


def _raise_for(status, t_reached, t0, y0, nfe, acc, rej):
    partial = SolveResult([(float(t0), np.array(y0, dtype=np.float64))],
                          nfe, acc, rej)
    if status == STATUS_STEP_LIMIT:
        raise StepLimitError(partial)
    raise BlowUpError(float(t_reached), partial)


def fast_forward(spec, y0, t_from, t_to, cfg):
    """Endpoint solve of the model dynamics; mirrors integrate on
    [t_from, t_to] and returns the same SolveResult shape."""
    _check_cfg(cfg)
    if t_from == t_to:
        raise ValueError("solve spans zero time")
    y0 = np.ascontiguousarray(y0, dtype=np.float64)
    if y0.shape != (spec.state_dim,):
        raise ValueError("initial state extent %s does not match family %r"
                         % (y0.shape, spec.family))
    if not np.all(np.isfinite(y0)):
        raise ValueError("initial state must be finite")
    args = _model_args(spec)
    status, t_r, y, nfe, acc, rej = _forward_kernel(
        *args, y0, float(t_from), float(t_to), cfg.rtol, cfg.atol,
        np.int64(cfg.max_steps), cfg.safety, cfg.min_scale, cfg.max_scale)
    if status != STATUS_OK:
        _raise_for(status, t_r, t_from, y0, nfe, acc, rej)
    checkpoints = [(float(t_from), y0.copy()), (float(t_to), y)]
    return SolveResult(checkpoints, nfe, acc, rej)


def fast_backward(spec, forward_result, dL_dfinal, cfg, clip_threshold=None):
    """Gradient solve matching backward_pass (without trace recording)."""
    _check_cfg(cfg)
    sd = spec.state_dim
    terminal = np.ascontiguousarray(forward_result.final_state,
                                    dtype=np.float64)
    cot = np.ascontiguousarray(dL_dfinal, dtype=np.float64)
    if terminal.shape != (sd,):
        raise ValueError("forward final state extent %s does not match "
                         "family %r" % (terminal.shape, spec.family))
    if cot.shape != (sd,):
        raise ValueError("loss cotangent extent %s does not match state "
                         "extent %d" % (cot.shape, sd))
    t_from = float(forward_result.final_time)
    t_to = float(forward_result.times[0])
    if t_from == t_to:
        raise ValueError("forward result spans zero time")
    if clip_threshold is None:
        clip_thr = 0.0
    else:
        clip_thr = float(clip_threshold)
        if clip_thr <= 0.0:
            raise ValueError("clip_threshold must be positive")
    has_g = np.int64(1 if (spec.has_gamma() and spec.gamma_trainable) else 0)
    has_x = np.int64(1 if (spec.has_xi() and spec.xi_trainable) else 0)
    gfac = spec.gamma_param_grad_factor() if has_g else 0.0
    xfac = spec.xi_param_grad_factor() if has_x else 0.0
    args = _model_args(spec)
    z0 = np.concatenate([terminal, cot, np.zeros(grad_extent(spec))])
    status, t_r, z, nfe, acc, rej = _backward_kernel(
        *args, terminal, cot, t_from, t_to, has_g, float(gfac), has_x,
        float(xfac), clip_thr, cfg.rtol, cfg.atol, np.int64(cfg.max_steps),
        cfg.safety, cfg.min_scale, cfg.max_scale)
    if status != STATUS_OK:
        _raise_for(status, t_r, t_from, z0, nfe, acc, rej)
    return AdjointResult(z[2 * sd:].copy(), z[sd:2 * sd].copy(), nfe, None)


def warm_up():
    """Trigger compilation of both kernels on a toy model; repeat runs hit
    the on-disk cache."""
    from .models import ModelSpec, initial_state
    from .nn import make_rng, mlp_init
    from .odeint import SolverConfig
    rng = make_rng(0)
    net = mlp_init([1, 2, 1], Activation("tanh"), rng=rng)
    spec = ModelSpec("hbnode", net)
    y0 = initial_state(spec, np.array([0.3])).packed
    cfg = SolverConfig.dopri45(1e-4)
    fwd = fast_forward(spec, y0, 0.0, 0.3, cfg)
    fast_backward(spec, fwd, np.array([1.0, 0.0]), cfg, clip_threshold=10.0)
