"""How fast does gradient signal decay through the backward solve?

On the linear field f(h) = -2h the answer is closed-form: the first-order
adjoint shrinks like e^{-2(T-t)}, while the heavy-ball adjoint contracts at
the damping rate gamma/2 and so carries signal much further back.
"""

import numpy as np

from hbnode.models import ModelSpec, initial_state, linear_f_net
from hbnode.odeint import SolverConfig
from hbnode.spectrum import adjoint_norm_trace

HORIZON = 14.0


def main():
    cfg = SolverConfig.dopri45(1e-10, atol=1e-14)
    gaps = np.linspace(0.0, HORIZON, 8)
    field = linear_f_net(np.array([[-2.0]]))

    traces = {}
    for family, kw in (("node", {}), ("hbnode", {"gamma_param": 0.0})):
        spec = ModelSpec(family, field, **kw)
        y0 = initial_state(spec, np.array([1.0])).packed
        traces[family] = adjoint_norm_trace(spec, y0, HORIZON, gaps, cfg)

    print("gap T-t    node adjoint    hbnode adjoint (gamma=0.5)")
    for (gap, n_node), (_, n_hb) in zip(traces["node"], traces["hbnode"]):
        print("  %5.1f    %11.3e    %11.3e" % (gap, n_node, n_hb))
    print("\nnode decays like e^{-2 gap}; check at gap %.0f: %.3e"
          % (HORIZON, np.exp(-2.0 * HORIZON)))


if __name__ == "__main__":
    main()
