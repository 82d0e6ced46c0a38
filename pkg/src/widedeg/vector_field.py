"""The degenerate vector field ``H_gamma(xi) = (|xi| - 1)_+^gamma xi / |xi|``.

Every function accepts a single vector of shape ``(n,)`` or a stack of
vectors of shape ``(..., n)`` and broadcasts over the leading axes.  The
dimension ``n`` is whatever the last axis says; nothing here is tied to
the plane.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import DegeneratePointError, DomainError, InvalidInputError

__all__ = [
    "ExponentParams",
    "h_gamma",
    "field_h",
    "energy_density",
    "energy_density_derivative",
    "jacobian_h",
    "eigen_bounds",
    "ellipticity_ratio",
    "positive_part",
]


@dataclass(frozen=True)
class ExponentParams:
    """Exponents of the operator.

    ``gamma`` defaults to ``p - 1``, the field that appears in the equation.
    Set it to ``p / 2`` for the companion field of the energy estimates.
    """

    p: float
    gamma: float | None = None

    def __post_init__(self):
        if not np.isfinite(self.p) or self.p < 2:
            raise InvalidInputError(f"p must be >= 2, got {self.p!r}")
        if self.gamma is None:
            object.__setattr__(self, "gamma", float(self.p) - 1.0)
        if not np.isfinite(self.gamma) or self.gamma <= 0:
            raise InvalidInputError(f"gamma must be > 0, got {self.gamma!r}")

    @classmethod
    def half(cls, p):
        return cls(p=p, gamma=p / 2.0)


def _as_vectors(xi):
    xi = np.asarray(xi, dtype=float)
    if xi.ndim == 0:
        raise InvalidInputError("expected a vector, got a scalar")
    if not np.all(np.isfinite(xi)):
        raise InvalidInputError("non-finite vector component")
    return xi


def _norm(xi):
    return np.sqrt(np.einsum("...i,...i->...", xi, xi))


def positive_part(x):
    return np.maximum(x, 0.0)


def h_gamma(xi, params: ExponentParams):
    """Evaluate ``H_gamma`` with ``gamma = params.gamma``.

    Returns the zero vector at the origin and inside the closed unit ball.

    >>> h_gamma([3.0, 4.0], ExponentParams(p=3, gamma=2)).tolist()
    [9.6, 12.8]
    """
    return field_h(_as_vectors(xi), params.gamma)


def field_h(xi, gamma):
    """Unchecked kernel of :func:`h_gamma` for any ``gamma > 0``."""
    r = _norm(xi)
    with np.errstate(divide="ignore", invalid="ignore"):
        scale = np.where(r > 1.0, positive_part(r - 1.0) ** gamma / r, 0.0)
    return scale[..., None] * xi


def energy_density(t, params: ExponentParams):
    """Convex radial energy ``G(t) = (t - 1)_+^p / p``."""
    t = np.asarray(t, dtype=float)
    if np.any(~np.isfinite(t)) or np.any(t < 0):
        raise InvalidInputError("energy_density needs finite t >= 0")
    out = positive_part(t - 1.0) ** params.p / params.p
    return float(out) if out.ndim == 0 else out


def energy_density_derivative(t, params: ExponentParams):
    """``G'(t) = (t - 1)_+^(p-1)``, the radial profile of ``H_{p-1}``."""
    t = np.asarray(t, dtype=float)
    if np.any(~np.isfinite(t)) or np.any(t < 0):
        raise InvalidInputError("energy_density_derivative needs finite t >= 0")
    out = positive_part(t - 1.0) ** (params.p - 1.0)
    return float(out) if out.ndim == 0 else out


def _radial_tangential(r, gamma):
    """Eigenvalues of ``DH_gamma`` along ``z`` and orthogonally to it."""
    pos = positive_part(r - 1.0)
    with np.errstate(divide="ignore", invalid="ignore"):
        radial = np.where(pos > 0.0, gamma * pos ** (gamma - 1.0), 0.0)
        tangential = np.where(pos > 0.0, pos**gamma / r, 0.0)
    return radial, tangential


def jacobian_h(z, params: ExponentParams):
    """Analytic Jacobian of ``H_gamma`` (``gamma = p - 1`` by default).

    ``DH(z) = rad * zz^T/|z|^2 + tan * (I - zz^T/|z|^2)`` with
    ``rad = gamma (|z|-1)_+^(gamma-1)`` and ``tan = (|z|-1)_+^gamma / |z|``.
    On the closed unit ball (the kink included) the zero matrix is returned.
    """
    z = _as_vectors(z)
    r = _norm(z)
    if np.any(r == 0.0):
        raise DomainError("Jacobian of H is undefined at the origin")
    n = z.shape[-1]
    radial, tangential = _radial_tangential(r, params.gamma)
    zhat = z / r[..., None]
    proj = zhat[..., :, None] * zhat[..., None, :]
    eye = np.eye(n)
    return radial[..., None, None] * proj + tangential[..., None, None] * (eye - proj)


def eigen_bounds(z, params: ExponentParams):
    """Return ``(lo, hi)`` with ``lo = (|z|-1)_+^(p-1)/|z|`` and
    ``hi = (p-1)(|z|-1)_+^(p-2)``.

    At ``p = 2`` the upper bound uses ``0**0 == 1``.
    """
    z = _as_vectors(z)
    r = _norm(z)
    if np.any(r == 0.0):
        raise DomainError("eigen bounds are undefined at the origin")
    p = params.p
    pos = positive_part(r - 1.0)
    lo = pos ** (p - 1.0) / r
    hi = (p - 1.0) * pos ** (p - 2.0)
    if lo.ndim == 0:
        return float(lo), float(hi)
    return lo, hi


def ellipticity_ratio(xi, params: ExponentParams):
    """Ratio of the extreme eigenvalues of ``DH_{p-1}``: ``(p-1)|xi|/(|xi|-1)``."""
    xi = _as_vectors(xi)
    r = _norm(xi)
    if np.any(r <= 1.0):
        raise DegeneratePointError("ellipticity ratio needs |xi| > 1")
    out = (params.p - 1.0) * r / (r - 1.0)
    return float(out) if out.ndim == 0 else out
