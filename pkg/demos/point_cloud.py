"""Train each dynamics family on the concentric point-cloud task.

Mid-length run: 140 epochs at a loose tolerance, enough to see the momentum
families pull ahead on training loss.
"""

from hbnode.data import sample_point_cloud
from hbnode.odeint import SolverConfig
from hbnode.training import (TrainConfig, evaluate_classifier,
                             point_cloud_classifier, train_classifier)

FAMILIES = ("node", "anode", "sonode", "hbnode", "ghbnode")


def main():
    cloud = sample_point_cloud(seed=0)
    print("%d points (%d inner / %d outer)"
          % (len(cloud), int(cloud.mask("inner").sum()),
             int(cloud.mask("outer").sum())))
    for family in FAMILIES:
        cspec = point_cloud_classifier(family, seed=0)
        cfg = TrainConfig.point_cloud(epochs=140, seed=0, tolerance=1e-5)
        res = train_classifier(cspec, cloud, cfg)
        if res.failed:
            print("%-8s diverged at epoch %d" % (family, res.log[-1]["epoch"]))
            continue
        last = res.log[-1]
        ev = evaluate_classifier(cspec, cloud, SolverConfig.dopri45(1e-5))
        print("%-8s loss %.4f  acc %.3f  fwd nfe %.0f  bwd nfe %.0f"
              % (family, last["loss"], ev["accuracy"], last["forward_nfe"],
                 last["backward_nfe"]))


if __name__ == "__main__":
    main()
