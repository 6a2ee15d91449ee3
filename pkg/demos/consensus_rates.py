"""
How fast does the altitude estimate agree?
==========================================

The last stage of the altitude observer is plain leader-anchored consensus,
z_b' = -h6 (H z_b - b z0). Its slowest mode decays at h6 * lambda_min(H),
which for the ring with one leader link is well under 0.2 1/s.
"""

import numpy as np

from quadformation import CommGraph, h_matrix, min_eigenvalue, preset

ring = CommGraph.ring(4, [1, 0, 0, 0])
H = h_matrix(ring)
print("H =\n", H)
print("eigenvalues:", np.linalg.eigvalsh(H))

h6 = preset(2).observer_gains.h6
rate = h6 * min_eigenvalue(H)
print(f"slowest decay rate: {rate:.5f} 1/s")

# closed form from the case 2 starting altitudes
z0 = 50.0
start = np.array([s.z for s in preset(2).initial]) - z0
lam, vec = np.linalg.eigh(H)
for t in (10, 30, 60, 90):
    e = vec @ (np.exp(-h6 * lam * t) * (vec.T @ start))
    print(f"t={t:3d} s  max |z_b - z0| = {np.abs(e).max():.3e}")

# time until the slowest mode alone is below 1e-3
slow = abs(vec[:, 0] @ start) * np.abs(vec[:, 0]).max()
print(f"1e-3 reached near t = {np.log(slow / 1e-3) / rate:.0f} s")

# a denser graph is faster: complete graph with every agent linked
full = CommGraph(4, [(i, j) for i in range(4) for j in range(i + 1, 4)], [1, 1, 1, 1])
print(f"complete graph, all linked: rate {h6 * min_eigenvalue(h_matrix(full)):.3f} 1/s")
