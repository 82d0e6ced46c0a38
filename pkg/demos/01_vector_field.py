"""
The widely degenerate field
===========================

The flux ``H(xi) = (|xi| - 1)_+^(p-1) xi/|xi|`` vanishes on the whole unit
ball, not only at the origin.  Outside the ball it behaves like a p-Laplacian
flux, but its Jacobian loses ellipticity as ``|xi|`` drops towards 1.
"""

import numpy as np

from widedeg.vector_field import ExponentParams, eigen_bounds, ellipticity_ratio, h_gamma, jacobian_h

par = ExponentParams(3)

# inside the unit ball nothing happens
print("H(0.5, 0.3) =", h_gamma([0.5, 0.3], par))
print("H(3, 4)     =", h_gamma([3.0, 4.0], par))

# the Jacobian has one radial and n-1 tangential eigenvalues
z = np.array([2.0, 0.0])
print("eigenvalues of DH(2, 0):", np.linalg.eigvalsh(jacobian_h(z, par)))
print("sandwich bounds:        ", eigen_bounds(z, par))

# the ratio of extreme eigenvalues blows up at the unit sphere
for r in (4.0, 2.0, 1.1, 1.01, 1.001):
    print(f"|xi| = {r:<6} ellipticity ratio = {ellipticity_ratio([r, 0.0], par):.4g}")
