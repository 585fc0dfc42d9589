"""Walk through the static structure: velocity sets, collisions, and the
thermodynamic maps that feed the hydrodynamic flux.

Run: python demos/demo_model_and_thermo.py
"""
import numpy as np

from latgas import thermo as th
from latgas.velocities import (
    collision_quadruples,
    default_velocity_set,
    linear_invariant_dimension,
    validate_velocity_set,
)

for d in (1, 2, 3):
    vs = default_velocity_set(d)
    quads = collision_quadruples(vs)
    print(f"d={d}: {vs.n} velocities, {len(quads)} ordered collision quadruples, "
          f"{len(validate_velocity_set(vs))} symmetry violations, "
          f"linear invariants: {linear_invariant_dimension(vs)} (mass + {d} momenta)")

vs = default_velocity_set(2)
print("\nd=2 velocities:", ", ".join(str(v) for v in vs.velocities))
print("one collision:", quads := collision_quadruples(vs)[0].indices(),
      "=", [str(vs.velocities[i]) for i in quads])

# the moment map and its Newton inverse
lam = np.array([0.4, 0.6, -0.2])
tp = th.moments(lam, vs)
print(f"\nmoments({lam}) = {tp}")
lam_back = th.inverse_lambda(tp, vs)
print(f"inverse recovers lambda to {np.abs(lam_back - lam).max():.2e}")

# the domain U: interior of the convex hull of the 2^|V| conserved vectors
for pt in ([2.0, 0.0, 0.0], [0.5, 0.2, 0.0], [0.0, 0.0, 0.0], [4.5, 0.0, 0.0]):
    ok, margin = th.in_U(np.array(pt), vs)
    print(f"in_U({pt}) = {ok}  (boundary margin {margin:+.3f})")

# the mobility that multiplies the flux
print("\nchi(theta_v) at the barycenter:", th.flux_coefficient(np.array([2.0, 0, 0]), vs))
