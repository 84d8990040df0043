"""
Designing state feedback
========================

The certificates become convex design problems after a change of
variables.  This script designs a clock-dependent controller for a system
with both continuous and impulsive inputs, then designs a sampled-data
controller for a double-integrator-like plant with a noisy actuator.
Every design is re-checked on the closed loop before it is trusted.
"""

import numpy as np

from dwelltime import synthesis
from dwelltime.benchmarks import example_feedback, example_sampled_data
from dwelltime.model import sampled_data_to_impulsive

# The open-loop system is unstable both in the flow and at the resets.
sys = example_feedback()
res = synthesis.min_dt_sf(sys, 0.1, N=10)
print("feasible:", res.feasible, "verified:", res.verified)
print("K_d =", np.round(res.gains.K_d, 4))

# The continuous gain depends on the time since the last impulse and is
# held constant after the horizon of the certificate.
for tau in (0.0, 0.05, 0.1, 1.0):
    print(f"K_c({tau}) =", np.round(res.gains.K_c(tau), 3))

# Closed-loop spectral radii at the dwell-times used for verification.
print(dict(zip(np.round(res.check_thetas, 3), np.round(res.rhos, 4))))

# A sampled-data loop holds the control between samples.  Appending the
# held input to the state turns it into an impulsive system whose reset
# applies the new control value.
sd = example_sampled_data(alpha=0.1)
for T_min, T_max in ((0.001, 0.5), (1.0, 10.0)):
    r = synthesis.sampled_data_sf(sd, T_min, T_max)
    print(f"[{T_min}, {T_max}]: verified={r.verified}, K =", np.round(r.gains.K_d, 4))

imp = sampled_data_to_impulsive(sd, r.gains.K_d)
print(imp.A)
