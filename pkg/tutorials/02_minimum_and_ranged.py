"""
Minimum and ranged dwell-times
==============================

When impulses are not periodic we ask for stability under every sequence
of dwell-times that respects a constraint.  Two constraints are covered:

* minimum dwell-time: every gap is at least ``T``;
* ranged dwell-time: every gap lies in ``[T_min, T_max]``.

Both are answered with clock-dependent Lyapunov certificates solved as
semidefinite programs.
"""

from dwelltime import clockcond, dtsearch
from dwelltime.benchmarks import example_constant, example_ranged

# Minimum dwell-time requires a stable flow, because arbitrarily long gaps
# are allowed.  The exact test uses a matrix exponential of the lifted
# generator; the piecewise-linear test uses N linear pieces on [0, T].
sys = example_constant(0.6, 1.2)
print(bool(clockcond.exact_minimum_dt(sys, 1.50)))
print(bool(clockcond.pwl_minimum_dt(sys, 1.50, N=50)))

# The smallest certified minimum dwell-time is never below the constant
# one, since constant schedules are a special case.
const = dtsearch.smallest_constant_dt(sys).threshold
exact = dtsearch.smallest_minimum_dt(sys, T_range=(0.5, 10.0)).threshold
print(f"constant {const:.4f}  minimum {exact:.4f}")

# The piecewise-linear threshold approaches the exact one from above, with
# an error roughly proportional to 1/N.
for N in (10, 25, 50):
    r = dtsearch.smallest_minimum_dt(sys, T_range=(0.5, 10.0), tol=1e-3, mode="pwl", N=N)
    print(f"N = {N:3d}: {r.threshold:.4f}")

# The ranged benchmark has an unstable flow and a contracting reset map, so
# impulses must come often enough.  Fix T_min and look for the largest T_max.
sys = example_ranged(1.5, 0.4)
lifted = dtsearch.largest_ranged_tmax(sys, 0.01, T_range=(0.01, 1.0), mode="lifted")
pwl = dtsearch.largest_ranged_tmax(sys, 0.01, T_range=(0.01, 1.0), tol=1e-3, mode="pwl", N=50)
print(f"largest T_max: lifted {lifted.threshold:.4f}, piecewise-linear {pwl.threshold:.4f}")

# A certificate on an interval can be inspected directly.  Gridded tests
# report that they only check finitely many dwell-times.
cert = clockcond.lifted_quadratic_stability(sys, 0.01, 0.15)
print(bool(cert), cert.to_dict()["caveats"])
