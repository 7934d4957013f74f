"""Momentum against plain gradient descent on two classic test functions.

Runs the discrete race (same step budget, momentum toggled) and then the
two continuous flows it discretizes, printing objective values along the way.
"""

import numpy as np

from hbnode.models import RACE_OBJECTIVES, heavy_ball_discrete, hbode_race_rhs
from hbnode.odeint import SolverConfig, integrate

SETTINGS = {
    "rosenbrock": {"beta": 0.9, "step": 1e-3, "horizon": 1.0},
    "beale": {"beta": 0.7, "step": 1e-2, "horizon": 2.0},
}


def main():
    for objective, s in SETTINGS.items():
        value, grad = RACE_OBJECTIVES[objective]
        iters = int(round(s["horizon"] / s["step"]))
        start = np.zeros(2)

        momentum = heavy_ball_discrete(grad, start, start, s["step"],
                                       s["beta"], iters)
        descent = heavy_ball_discrete(grad, start, start, s["step"], 0.0,
                                      iters)

        print("%s  (step %.0e, %d iterations)" % (objective, s["step"], iters))
        print("  discrete race:")
        for k in (iters // 4, iters // 2, iters):
            print("    iter %4d   momentum F=%-12.4g descent F=%.4g"
                  % (k, value(momentum[k]), value(descent[k])))

        # the matching continuous dynamics, integrated exactly
        times = np.linspace(0.0, s["horizon"], 5)
        cfg = SolverConfig.dopri45(1e-10)
        flow = integrate(
            lambda t, z: hbode_race_rhs(objective, "gradient_flow", t, z),
            np.zeros(2), times, cfg)
        ball = integrate(
            lambda t, z: hbode_race_rhs(objective, "heavy_ball", t, z,
                                        gamma=s["beta"]),
            np.zeros(4), times, cfg)
        print("  continuous flows:")
        for i, t in enumerate(times[1:], start=1):
            print("    t=%-5.2f     heavy ball F=%-10.4g grad flow F=%.4g"
                  % (t, value(ball.checkpoints[i][1][:2]),
                     value(flow.checkpoints[i][1][:2])))
        print()


if __name__ == "__main__":
    main()
