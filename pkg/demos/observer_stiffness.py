"""
Why the observer needs an implicit step late in the run
=======================================================

The adaptive gain g5 / (|c| + gamma exp(-lam t)) grows without bound as the
decaying term vanishes. Its linearised rate soon dwarfs anything an explicit
step of a few milliseconds can follow.
"""

import math

import numpy as np

from quadformation import h_matrix, preset, run
from quadformation.simulation import STIFF_LIMIT, observer_stiffness

sc = preset(2)
go = sc.observer_gains.as_array()
lam_max = np.linalg.eigvalsh(h_matrix(sc.graph))[-1]
h = sc.dt / sc.observer_substeps

# h * rate above STIFF_LIMIT switches the horizontal observers to SDIRK
for t in (0, 25, 50, 75, 100, 150, 200):
    print(f"t={t:3d} s  h*rate = {h * observer_stiffness(t, go, lam_max):10.3g}")
# ignoring g4, h * g5 * lam_max * exp(lam t) / gamma reaches the limit at
switch = math.log(STIFF_LIMIT * go[6] / (h * go[4] * lam_max)) / go[7]
print(f"switch near t = {switch:.1f} s")

# plain joint RK4 for comparison: bounded, but the consensus error chatters
for substeps in (1, 2):
    trace = run(sc.with_overrides(observer_substeps=substeps))
    c = np.abs(trace.consensus_error).max(axis=(1, 2))
    late = trace.t >= 150
    print(f"observer_substeps={substeps}: max |c| after 150 s {c[late].max():.2e}, "
          f"final error {trace.formation_error_norm[-1].max():.2e} m")
