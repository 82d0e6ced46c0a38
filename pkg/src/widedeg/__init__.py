"""Solvers and checks for widely degenerate elliptic equations

    -div((|Du| - 1)_+^(p-1) Du/|Du|) = f(x, u).

Submodules: ``vector_field`` (the field and its Jacobian), ``inequality_lab``
(randomized inequality campaigns), ``mesh`` (P1 triangulations), ``solver``
(energy minimization), ``diagnostics`` (regularity objects and experiments)
and ``cli``.
"""

from .errors import (
    ConfigError,
    DegeneratePointError,
    DivergenceError,
    DomainError,
    InvalidInputError,
    NumericalFailureError,
    PartialResultError,
    PreconditionError,
    WidedegError,
)
from .mesh import ScalarField, TriMesh, build_mesh, gradient, interpolate
from .solver import RhsSpec, SolveConfig, SolveReport, minimize, picard_outer, weak_residual
from .vector_field import ExponentParams, eigen_bounds, h_gamma, jacobian_h

__version__ = "0.1.0"
