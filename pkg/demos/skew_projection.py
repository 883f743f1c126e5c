"""Where does an infeasible proposal land?

Compares the Euclidean projection with the skew projection on the unit ball
and on a smoothed l4 ball, for fields that do and do not vanish on the normal.
Run with ``python demos/skew_projection.py``.
"""

import numpy as np

from skewlangevin.fields import ConstantTridiag, Cross3D, SublevelCurl
from skewlangevin.geometry import Ball, project_euclidean, skew_normal, skew_project, smoothed_lp_ball

np.set_printoptions(precision=5, suppress=True)

ball = Ball.unit(3)
x = np.array([1.2, 0.3, -0.4])
print("proposal            ", x)
print("euclidean projection", project_euclidean(ball, x))

# the axial-vector field satisfies J(p) p = 0, so the skew normal is the normal itself
print("skew, J_s (s=5)     ", skew_project(ball, Cross3D(5.0), x))

# a constant field tilts the correction direction
Ja = ConstantTridiag(1.0, 3)
w = np.array([0.3, 1.1, 0.2])
print("\nproposal            ", w)
print("euclidean projection", project_euclidean(ball, w))
print("skew normal J_a     ", skew_normal(ball, Ja, project_euclidean(ball, w)))
print("skew, J_a           ", skew_project(ball, Ja, w))

# some tilted rays never re-enter the set
y, fell = skew_project(ball, Ja, x, fallback="euclidean", return_fallback=True)
print("\nJ_a from", x, "misses; fallback used:", fell, "result", y)

# the sublevel-set curl field is tangent to the boundary of its own set
lp = smoothed_lp_ball(4, 0.2, 1.0)
Jg = SublevelCurl(lp.g, lp.level, 8.0)
z = np.array([1.1, 0.4, 0.2])
print("\nl4 ball euclidean   ", project_euclidean(lp, z))
print("l4 ball skew, J_g   ", skew_project(lp, Jg, z))
print("g at the result     ", lp.g.value(skew_project(lp, Jg, z)))
