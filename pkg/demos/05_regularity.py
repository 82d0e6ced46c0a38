"""
Regularity diagnostics
======================

Where ``|Du| <= 1`` the equation carries no information, and a positive
source keeps that set small.  The measure of the near-degenerate set shrinks
under refinement, while with ``f = 0`` and data of slope ``1/2`` the whole
domain stays degenerate.
"""

import math

from widedeg import RhsSpec, TriMesh, interpolate, minimize
from widedeg.diagnostics import degeneracy_measure, regularity_report

inner = (1.25, 1.75, 0.25, 0.75)
for n in (16, 32, 64):
    mesh = TriMesh((1.0, 2.0, 0.0, 1.0), n, n)
    u, _ = minimize(interpolate(mesh, lambda x, y: 0 * x), RhsSpec.constant(1.0), 2)
    theta = 1 - math.sqrt(mesh.cell_size)
    print(f"n={n:3d} |{{|Du| <= {theta:.3f}}}| = {degeneracy_measure(u, (theta,), inner)[0][1]:.5f}")

mesh = TriMesh((1.0, 2.0, 0.0, 1.0), 16, 16)
flat, _ = minimize(interpolate(mesh, lambda x, y: x / 2), RhsSpec.constant(0.0), 2)
print("flat data:", degeneracy_measure(flat, (0.75,), inner))

# second-order quantities on the manufactured solution
u, _ = minimize(interpolate(mesh, lambda x, y: -x * x), RhsSpec.manufactured(3), 3)
rep = regularity_report(u, 3, region=inner)
print(f"I1={rep.I1:.4f} I2={rep.I2:.4f} |H_(p/2)|={rep.s1:.4f} |H_(p-1)|={rep.s2:.4f}")
print(f"s2^2 <= c s1^2 with c={rep.budget:.3g}: {rep.s2**2 <= rep.budget * rep.s1**2}")
