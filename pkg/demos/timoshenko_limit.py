"""Shear-stiffness sweep of a tip-loaded cantilever.

The semi-holonomic beam with a = c = ell = 0 and b = EI = 1 is a
Timoshenko beam with shear stiffness d; as d grows its tip deflection
falls to the Euler-Bernoulli value FL^3/3.
"""

import numpy as np

from gcbeam.model import BeamConfig, LoadSet, Regime
from gcbeam.validation import classical_reference, compatible_anchors, d_limit_sweep


def main():
    cfg = BeamConfig(
        a=0.0, b=1.0, c=0.0, d=1.0, e=0.0, regime=Regime.SemiHolonomic, frozen_N_jalpha=np.zeros((3, 3, 2))
    )
    bcs = compatible_anchors(cfg, "0", lambda X, k: np.zeros(3))
    d_values = [1.0, 1e1, 1e2, 1e3, 1e4]
    r = d_limit_sweep(cfg, LoadSet(T0_right=[0, 1.0, 0]), bcs, d_values, n=401)
    eb = classical_reference("EulerBernoulli", {"EI": 1.0, "L": 1.0, "F": 1.0})(1.0)
    print(f"{'d':>8} {'tip':>12} {'1/3 + 1/d':>12} {'|u1 - P1|':>12}")
    for d, tip, gap in zip(r.values, r.tip, r.gaps["du_minus_P1"]):
        print(f"{d:8.0e} {tip:12.8f} {eb + 1.0 / d:12.8f} {gap:12.3e}")
    print(f"Euler-Bernoulli limit {r.limit_tip:.8f}, fitted gap exponent {r.exponent:.4f}")


if __name__ == "__main__":
    main()
