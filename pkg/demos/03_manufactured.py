"""
A manufactured solution
=======================

On ``(1,2) x (0,1)`` the function ``u* = -x^2`` has ``|Du*| = 2x > 1``
everywhere, so the equation is uniformly elliptic there and ``f = 2`` at
``p = 2``.  The discrete minimiser reproduces ``u*`` at the nodes, so the
error is the interpolation error ``h^2/4`` and the observed order is 2.
"""

from widedeg import RhsSpec, TriMesh, interpolate, minimize
from widedeg.diagnostics import max_norm_error, observed_order


def exact(x, y):
    return -x * x


errors, sizes = [], []
for n in (16, 32, 64):
    mesh = TriMesh((1.0, 2.0, 0.0, 1.0), n, n)
    u, rep = minimize(interpolate(mesh, exact), RhsSpec.constant(2.0), 2)
    errors.append(max_norm_error(u, exact))
    sizes.append(mesh.cell_size)
    print(f"n={n:3d} iterations={rep.inner_iterations:4d} residual={rep.weak_residual:.1e} "
          f"error={errors[-1]:.3e}")
print("observed orders:", observed_order(errors, sizes))

# larger p is slower: the energy Hessian degenerates near |Du| = 1
mesh = TriMesh((1.0, 2.0, 0.0, 1.0), 16, 16)
u, rep = minimize(interpolate(mesh, exact), RhsSpec.manufactured(4), 4)
print(f"p=4: iterations={rep.inner_iterations} error={max_norm_error(u, exact):.3e}")
