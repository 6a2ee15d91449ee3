"""
Following a leader on a circle
==============================

The leader flies a 100 m circle at 0.1 rad/s and 100 m altitude, so its
horizontal acceleration has magnitude R w^2 = 1 m/s^2. Once the formation
has settled the vehicles tilt just enough to produce that acceleration.
"""

import math

import numpy as np

from quadformation import preset, run, steady_state_attitude

trace = run(preset(1))

# pitch needed for the leader's acceleration, zero yaw
lead_acc = trace.leader[:, 2, :]
need = np.array([math.degrees(steady_state_attitude(*a)[1]) for a in lead_acc])
print(f"steady pitch amplitude from the leader alone: {np.abs(need).max():.4f} deg")

late = trace.t >= 150
pitch = np.degrees(trace.attitudes[late][..., 1])
print(f"measured pitch amplitude after 150 s:        {np.abs(pitch).max():.4f} deg")

# same bound on the per-vehicle thrust term
print("min ubar:", trace.ubar.min(), " floor:", 9.81 - 1.0 - 0.5 - 1.0)

print("final formation error:", trace.formation_error_norm[-1])
print("final |yaw| (deg):", np.degrees(np.abs(trace.attitudes[-1, :, 2])))
