"""Catalogs of right-hand sides and boundary data used by configuration files."""

from __future__ import annotations

import math

import numpy as np

from .errors import ConfigError, InvalidInputError
from .expr import Expression
from .mesh import ScalarField, TriMesh, interpolate
from .solver import RhsSpec

__all__ = ["build_rhs", "build_boundary", "exact_solution", "smooth_perturbation"]


def build_rhs(spec, p):
    kind = spec.get("kind")
    try:
        if kind == "constant":
            return RhsSpec.constant(spec.get("value", 0.0))
        if kind == "manufactured":
            return RhsSpec.manufactured(p)
        if kind == "separable":
            if "h" not in spec or "g" not in spec:
                raise ConfigError("separable rhs needs both 'h' and 'g'")
            return RhsSpec.separable(
                str(spec["h"]), str(spec["g"]),
                positive=bool(spec.get("positive", False)),
                nonincreasing=bool(spec.get("nonincreasing", False)),
                lipschitz_s=spec.get("L"), lipschitz_x=spec.get("M"),
            )
    except ConfigError:
        raise
    except InvalidInputError as exc:
        raise ConfigError(f"bad rhs: {exc}") from exc
    raise ConfigError(f"unknown rhs kind {kind!r}")


def smooth_perturbation(mesh: TriMesh, seed, amplitude=1.0, nonnegative=False):
    """Random trigonometric field with max modulus ``amplitude``.

    With ``nonnegative`` the field is shifted and scaled into ``[0, amplitude]``.
    """
    rng = np.random.default_rng(int(seed))
    x0, x1, y0, y1 = mesh.bounds
    s = (mesh.nodes[:, 0] - x0) / (x1 - x0)
    t = (mesh.nodes[:, 1] - y0) / (y1 - y0)
    out = np.zeros(mesh.n_nodes)
    for k in range(1, 4):
        for l in range(1, 4):
            a = rng.normal() / (k * l)
            ph = rng.uniform(0, 2 * math.pi, size=2)
            out += a * np.cos(k * math.pi * s + ph[0]) * np.cos(l * math.pi * t + ph[1])
    scale = float(np.max(np.abs(out))) or 1.0
    out /= scale
    if nonnegative:
        out = 0.5 * (out + 1.0)
    return ScalarField(mesh, amplitude * out)


def _base_boundary(mesh, spec):
    kind = spec.get("kind", "manufactured")
    if kind == "manufactured":
        return interpolate(mesh, lambda x, y: -x * x)
    if kind == "zero":
        return interpolate(mesh, lambda x, y: 0.0 * x)
    if kind == "affine":
        a, b, c = (float(spec.get(k, 0.0)) for k in ("a", "b", "c"))
        return interpolate(mesh, lambda x, y: a + b * x + c * y)
    if kind == "expression":
        if "expr" not in spec:
            raise ConfigError("expression boundary needs 'expr'")
        try:
            e = Expression(str(spec["expr"]))
        except InvalidInputError as exc:
            raise ConfigError(f"bad boundary expression: {exc}") from exc
        if e.depends_on("s"):
            raise ConfigError("boundary expression must not use s")
        return interpolate(mesh, lambda x, y: e(x=x, y=y))
    raise ConfigError(f"unknown boundary kind {kind!r}")


def build_boundary(mesh, spec):
    """Nodal field whose boundary values are the Dirichlet data."""
    g = _base_boundary(mesh, spec)
    if "shift" in spec:
        g = g + float(spec["shift"])
    pert = spec.get("perturb")
    if pert:
        g = g + smooth_perturbation(
            mesh, pert.get("seed", 0), float(pert.get("amplitude", 0.1)), bool(pert.get("nonnegative", False))
        )
    return g


def exact_solution(problem):
    """Known solution for the configured problem, or ``None``."""
    if problem.get("exact"):
        e = Expression(problem["exact"])
        return lambda x, y: e(x=x, y=y)
    b, r = problem["boundary"], problem["rhs"]
    if b.get("kind") == "manufactured" and r.get("kind") == "manufactured" and not b.get("perturb"):
        c = float(b.get("shift", 0.0))
        return lambda x, y: -x * x + c
    return None
