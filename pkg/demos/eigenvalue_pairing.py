"""Spectrum of the backward sensitivity block matrix.

The eigenvalues of -M pair up to sum (t-T)*gamma, so at least half of the
spectrum sits at or right of (t-T)*gamma/2: the backward dynamics can decay
gradient signal no faster than the damping itself.
"""

import numpy as np

from hbnode.spectrum import BlockMatrixM, verify_pairing


def main():
    rng = np.random.default_rng(7)
    n, gamma, span = 4, 0.8, (0.0, 2.0)
    M = BlockMatrixM(rng.standard_normal((n, n)), np.eye(n), gamma, span)
    report = verify_pairing(M)

    print("n=%d  gamma=%.2f  span=%s" % (n, gamma, (span,)))
    print("pair-sum target (t-T)*gamma = %.3f" % report["target"])
    print("worst pairing residual      = %.2e" % report["max_pair_residual"])
    print("real-part threshold         = %.3f" % report["threshold"])
    print("eigenvalues at/above it     = %d of %d"
          % (report["eigenvalues_at_or_above"], 2 * n))
    print("\neigenvalues of -M, paired:")
    for lam, mu in report["pairs"]:
        print("  %+.4f%+.4fj   <->   %+.4f%+.4fj   (sum %+.4f)"
              % (lam.real, lam.imag, mu.real, mu.imag, (lam + mu).real))


if __name__ == "__main__":
    main()
