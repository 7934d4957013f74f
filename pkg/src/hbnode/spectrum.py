"""Spectral diagnostics for the damped second-order families.

The backward error behavior of the heavy-ball models is governed by a
2n x 2n block matrix built from time-averaged Jacobians of the vector field
along a trajectory. This module assembles that matrix, computes dense
eigenvalues, verifies that they pair up with sums pinned by the damping
coefficient, and records l2 norms of the adjoint along backward solves.

The averaged-Jacobian matrix is exact for linear vector fields and a
diagnostic approximation otherwise; exactness-based tests belong to the
linear case only.
"""

import numpy as np

from .adjoint import backward_pass
from .models import make_rhs
from .nn import jacobian_wrt_input
from .odeint import integrate


class BlockMatrixM:
    """Averaged-Jacobian block matrix over a time span (t, T), t < T.

    F_bar averages the position Jacobian of the vector field (minus the
    gating coefficient times identity when the family has one); J_bar
    averages the gate derivative applied to the momentum. The assembled
    matrix is [[0, J_bar], [F_bar, -gamma*I]] scaled by (t - T), which is
    negative: backward-time growth shows up as eigenvalues of -matrix.
    """

    def __init__(self, F_bar, J_bar, gamma, span):
        F_bar = np.asarray(F_bar, dtype=np.float64)
        J_bar = np.asarray(J_bar, dtype=np.float64)
        if F_bar.ndim != 2 or F_bar.shape[0] != F_bar.shape[1]:
            raise ValueError("F_bar must be square")
        if J_bar.shape != F_bar.shape:
            raise ValueError("J_bar shape %s does not match F_bar shape %s"
                             % (J_bar.shape, F_bar.shape))
        t, T = float(span[0]), float(span[1])
        if not t < T:
            raise ValueError("span must satisfy t < T")
        self.n = F_bar.shape[0]
        self.F_bar = F_bar
        self.J_bar = J_bar
        self.gamma = float(gamma)
        self.span = (t, T)

    @property
    def matrix(self):
        n = self.n
        block = np.zeros((2 * n, 2 * n))
        block[:n, n:] = self.J_bar
        block[n:, :n] = self.F_bar
        block[n:, n:] = -self.gamma * np.eye(n)
        return block * (self.span[0] - self.span[1])

    def __repr__(self):
        return ("BlockMatrixM(n=%d, gamma=%g, span=(%g, %g))"
                % (self.n, self.gamma, self.span[0], self.span[1]))


def _interp_state(times, states, s):
    # linear interpolation between bracketing checkpoints
    if s <= times[0]:
        return states[0]
    if s >= times[-1]:
        return states[-1]
    j = int(np.searchsorted(times, s, side="right")) - 1
    t0, t1 = times[j], times[j + 1]
    w = (s - t0) / (t1 - t0)
    return (1.0 - w) * states[j] + w * states[j + 1]


def build_M(spec, trajectory, t, T, quad_points=33):
    """Average the trajectory Jacobians into a BlockMatrixM over [t, T].

    trajectory is a forward SolveResult (or a list of (time, state) pairs)
    whose checkpoints cover [t, T]; states between checkpoints are linearly
    interpolated, and the averages use trapezoidal quadrature on
    quad_points uniform nodes.
    """
    if spec.family not in ("hbnode", "ghbnode"):
        raise ValueError("averaged block matrix applies to hbnode/ghbnode "
                         "only, not %r" % (spec.family,))
    t, T = float(t), float(T)
    if not t < T:
        raise ValueError("span must satisfy t < T")
    if quad_points < 2:
        raise ValueError("quad_points must be at least 2")
    checkpoints = getattr(trajectory, "checkpoints", trajectory)
    pairs = sorted(((float(tt), np.asarray(y, dtype=np.float64))
                    for tt, y in checkpoints), key=lambda c: c[0])
    times = np.array([c[0] for c in pairs])
    states = [c[1] for c in pairs]
    if t < times[0] or T > times[-1]:
        raise ValueError("span [%g, %g] not covered by trajectory [%g, %g]"
                         % (t, T, times[0], times[-1]))
    p = spec.position_dim
    xi = spec.xi if spec.family == "ghbnode" else 0.0
    nodes = np.linspace(t, T, quad_points)
    weights = np.ones(quad_points)
    weights[0] = weights[-1] = 0.5
    F_sum = np.zeros((p, p))
    J_sum = np.zeros((p, p))
    for s, w in zip(nodes, weights):
        y = _interp_state(times, states, s)
        F_sum += w * (jacobian_wrt_input(spec.f_net, y[:p], s)
                      - xi * np.eye(p))
        if spec.family == "ghbnode":
            J_sum += w * np.diag(spec.sigma.derivative(y[p:]))
    F_bar = F_sum / (quad_points - 1)
    if spec.family == "ghbnode":
        J_bar = J_sum / (quad_points - 1)
    else:
        # position rate is the momentum itself, so the gate block is exact
        J_bar = np.eye(p)
    return BlockMatrixM(F_bar, J_bar, spec.gamma, (t, T))


def eigenvalues(A):
    """Dense eigenvalues, sorted by real part then imaginary, descending.

    Hessenberg reduction followed by shifted QR iteration (LAPACK dgeev
    through numpy); non-convergence raises numpy.linalg.LinAlgError.
    """
    A = np.asarray(A, dtype=np.float64)
    if A.ndim != 2 or A.shape[0] != A.shape[1]:
        raise ValueError("matrix must be square")
    if A.shape[0] > 64:
        raise ValueError("eigenvalues limited to dimension 64")
    vals = np.linalg.eigvals(A)
    order = np.lexsort((-vals.imag, -vals.real))
    return vals[order]


def pair_by_sum(values, target):
    """Greedily pair values so each pair's sum lands nearest the target.

    Values are sorted by descending (real, imaginary); each leader in turn
    grabs the remaining value minimizing |leader + value - target|.
    """
    vals = list(np.asarray(values, dtype=np.complex128))
    if len(vals) % 2 != 0:
        raise ValueError("need an even number of values to pair")
    vals.sort(key=lambda z: (-z.real, -z.imag))
    pairs = []
    while vals:
        lead = vals.pop(0)
        best = min(range(len(vals)),
                   key=lambda i: abs(lead + vals[i] - target))
        pairs.append((lead, vals.pop(best)))
    return pairs


def verify_pairing(M, a=None, margin=1e-9):
    """Check the eigenvalue pair structure of -M.

    Eigenvalues of -M.matrix are paired greedily toward the target sum
    (t - T)*gamma. The report carries the worst pairing residual plus how
    many eigenvalues (and pairs with a member) sit at or above the real-part
    threshold (t - T)*a, where a defaults to gamma/2; comparisons allow a
    small relative margin for eigensolver rounding.
    """
    if a is None:
        a = 0.5 * M.gamma
    t, T = M.span
    target = (t - T) * M.gamma
    vals = eigenvalues(-M.matrix)
    pairs = pair_by_sum(vals, target)
    residual = max(abs(x + y - target) for x, y in pairs)
    threshold = (t - T) * float(a)
    cut = threshold - margin * max(1.0, abs(threshold))
    above = int(np.sum(vals.real >= cut))
    pairs_above = sum(1 for x, y in pairs
                      if x.real >= cut or y.real >= cut)
    return {"target": target,
            "max_pair_residual": float(residual),
            "pairs": pairs,
            "threshold": threshold,
            "eigenvalues_at_or_above": above,
            "pairs_with_member_at_or_above": pairs_above}


def expm(A):
    """Matrix exponential by scaling and squaring on the Taylor series.

    The argument is scaled to 1-norm at most 0.5, the series is summed to
    machine-level truncation, and the result is squared back up.
    """
    A = np.asarray(A, dtype=np.float64)
    if A.ndim != 2 or A.shape[0] != A.shape[1]:
        raise ValueError("matrix must be square")
    n = A.shape[0]
    if n > 64:
        raise ValueError("expm limited to dimension 64")
    norm = float(np.linalg.norm(A, 1))
    squarings = 0
    if norm > 0.5:
        squarings = int(np.ceil(np.log2(norm / 0.5)))
    B = A / (2.0 ** squarings)
    X = np.eye(n)
    term = np.eye(n)
    for k in range(1, 61):
        term = term @ B / k
        X = X + term
        if float(np.max(np.abs(term))) < 1e-18:
            break
    for _ in range(squarings):
        X = X @ X
    return X


def adjoint_norm_trace(spec, initial_state, horizon, sample_gaps, cfg,
                       dL_dfinal=None):
    """l2 norm of the adjoint at chosen distances behind the final time.

    Solves forward over [0, horizon] from the packed initial state, then
    runs one backward pass recording the stacked adjoint norm at times
    horizon - gap for each requested gap. The default loss cotangent is one
    on every position slot and zero on the momentum. Returns a list of
    (gap, norm) in the requested order.
    """
    y0 = np.asarray(initial_state, dtype=np.float64)
    horizon = float(horizon)
    if horizon <= 0.0:
        raise ValueError("horizon must be positive")
    gaps = [float(g) for g in sample_gaps]
    for g in gaps:
        if not 0.0 <= g <= horizon:
            raise ValueError("sample gap %g outside [0, %g]" % (g, horizon))
    forward = integrate(make_rhs(spec), y0, [0.0, horizon], cfg)
    if dL_dfinal is None:
        dL_dfinal = np.zeros(spec.state_dim)
        dL_dfinal[:spec.position_dim] = 1.0
    result = backward_pass(spec, forward, dL_dfinal, cfg,
                           trace_times=[horizon - g for g in gaps])
    out = []
    for g in gaps:
        want = horizon - g
        norm = None
        for tt, v in result.adjoint_trace:
            if abs(tt - want) <= 1e-12 * max(1.0, abs(horizon)):
                norm = v
                break
        out.append((g, norm))
    return out
