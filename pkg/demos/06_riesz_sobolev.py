"""
Singular integrals and a weighted Sobolev inequality
====================================================

Triangles are integrated exactly against ``|x - y|^-kappa`` by a polar fan
about ``x``.  The same kernel gives the weight integral ``K`` appearing in a
Sobolev inequality with a degenerate weight.
"""

import math

from widedeg import TriMesh
from widedeg.diagnostics import (
    SobolevParams,
    fit_sobolev_constant,
    riesz_lm_constant,
    riesz_potential,
    sobolev_check,
    sobolev_test_functions,
)

mesh = TriMesh((0.0, 1.0, 0.0, 1.0), 16, 16)
val = riesz_potential(mesh, 1.0, 1.0, (0.5, 0.5))
print(f"U_1[1](centre) = {val:.12f}, closed form 4 ln(1 + sqrt 2) = {4 * math.log(1 + math.sqrt(2)):.12f}")

for n in (8, 16):
    print(f"n={n}: fitted L^2 constant {riesz_lm_constant(TriMesh((0, 1, 0, 1), n, n), 1.0, 1.0, 1.5, 2):.4f}")

params = SobolevParams(t=1.0, gamma=0.0, q=3.0)
print("q* =", params.q_star)
mesh = TriMesh((1.0, 2.0, 0.0, 1.0), 16, 16)
c_n = fit_sobolev_constant(mesh, params)
rep = sobolev_check(sobolev_test_functions(mesh), 1.0, params, c_n=c_n)
print(f"max ratio {rep.max_ratio:.4f}, K = {rep.K:.4f}, budget {rep.budget:.4f}")

try:
    SobolevParams(t=1.0, gamma=0.0, q=4.5)
except Exception as exc:
    print("rejected:", exc)
