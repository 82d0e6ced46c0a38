"""Discrete weak solutions by convex energy minimization.

The discrete energy on a P1 mesh is

    J(u) = sum_T area(T) G(|Du_T|) - sum_i w_i F(x_i, u_i),

with ``G(t) = (t - 1)_+^p / p``, lumped node weights ``w_i`` and ``F`` the
primitive of ``f`` in ``s`` taken from ``s = 0``.  Its gradient at an
interior node is exactly the weak-form residual tested against the hat
function of that node, so a small scaled gradient is a small weak residual.

The minimizer is a preconditioned accelerated gradient method (FISTA with a
Laplace metric), backtracking on the local Lipschitz constant and restarting
the momentum whenever the energy would rise.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Callable, Optional

import numpy as np
import scipy.sparse.linalg as spla

from .errors import (
    DivergenceError,
    InvalidInputError,
    NumericalFailureError,
    PartialResultError,
)
from .expr import Expression
from .mesh import ScalarField, TriMesh, gradient, stiffness_matrix

__all__ = [
    "RhsSpec",
    "SolveConfig",
    "SolveReport",
    "assemble_energy",
    "minimize",
    "weak_residual",
    "picard_outer",
    "harmonic_extension",
    "primitive_quadrature",
]


# --- right-hand sides ------------------------------------------------------


_GL_NODES, _GL_WEIGHTS = np.polynomial.legendre.leggauss(10)


def primitive_quadrature(func, x, y, s, rtol=1e-13, max_level=10):
    """``int_0^s func(x, y, t) dt`` for arrays of nodes, with panel doubling.

    Composite 10-point Gauss-Legendre on ``2**k`` panels; ``k`` grows until
    two successive levels agree to ``rtol * (1 + |F|)`` at every node.
    """
    x, y, s = np.broadcast_arrays(*(np.asarray(a, dtype=float) for a in (x, y, s)))

    def level(k):
        m = 2**k
        edges = np.linspace(0.0, 1.0, m + 1)
        total = np.zeros(s.shape)
        for a, b in zip(edges[:-1], edges[1:]):
            t = a + (b - a) * 0.5 * (_GL_NODES + 1.0)
            for tk, wk in zip(t, _GL_WEIGHTS):
                total += 0.5 * (b - a) * wk * func(x, y, tk * s)
        return total * s

    prev = level(0)
    for k in range(1, max_level + 1):
        cur = level(k)
        if np.all(np.abs(cur - prev) <= rtol * (1.0 + np.abs(cur))):
            return cur
        prev = cur
    return prev


@dataclass(frozen=True)
class RhsSpec:
    """Right-hand side ``f(x, y, s)`` with the structural flags the theory uses.

    ``lipschitz_s`` and ``lipschitz_x`` carry the constants ``L`` and ``M`` of
    the Lipschitz conditions in ``s`` and in ``x``; they are metadata only.
    ``factors`` holds ``(h, g)`` when ``f(x, y, s) = h(x, y) g(s)``.
    """

    func: Callable
    positive: bool = False
    nonincreasing: bool = False
    depends_on_s: bool = True
    lipschitz_s: Optional[float] = None
    lipschitz_x: Optional[float] = None
    primitive: Optional[Callable] = None
    factors: Optional[tuple] = None
    name: str = "custom"

    def __call__(self, x, y, s):
        x, y, s = np.broadcast_arrays(*(np.asarray(a, dtype=float) for a in (x, y, s)))
        return np.asarray(self.func(x, y, s), dtype=float) * np.ones(s.shape)

    def antiderivative(self, x, y, s):
        if self.primitive is not None:
            return np.asarray(self.primitive(x, y, s), dtype=float)
        if not self.depends_on_s:
            return self(x, y, 0.0) * np.asarray(s, dtype=float)
        return primitive_quadrature(self.__call__, x, y, s)

    def probe(self, x, y, s_lo, s_hi, samples=33, tol=1e-10):
        """Check the declared flags at nodes ``(x, y)`` over ``[s_lo, s_hi]``."""
        grid = np.linspace(s_lo, s_hi, samples)
        vals = np.stack([self(x, y, np.full(np.shape(x), t)) for t in grid])
        if not np.all(np.isfinite(vals)):
            raise InvalidInputError(f"rhs {self.name!r} produced non-finite values")
        if self.nonincreasing and np.any(np.diff(vals, axis=0) > tol * (1.0 + np.abs(vals[:-1]))):
            raise InvalidInputError(f"rhs {self.name!r} is flagged nonincreasing but increases in s")
        if not self.depends_on_s and np.any(np.abs(np.diff(vals, axis=0)) > tol * (1.0 + np.abs(vals[:-1]))):
            raise InvalidInputError(f"rhs {self.name!r} is flagged s-independent but varies in s")
        if self.positive and np.any(vals <= 0):
            raise InvalidInputError(f"rhs {self.name!r} is flagged positive but is not")

    @classmethod
    def constant(cls, value):
        value = float(value)
        return cls(
            func=lambda x, y, s: np.full(np.shape(s), value),
            positive=value > 0,
            nonincreasing=True,
            depends_on_s=False,
            lipschitz_s=0.0,
            lipschitz_x=0.0,
            primitive=lambda x, y, s: value * np.asarray(s, dtype=float),
            name=f"constant({value:g})",
        )

    @classmethod
    def manufactured(cls, p):
        """Source for ``u*(x, y) = -x**2`` on a domain with ``x > 1/2``.

        There ``H_{p-1}(Du*) = -(2x - 1)**(p-1) e_1``, so
        ``f = 2 (p-1) (2x - 1)**(p-2)``; for ``p = 2`` this is ``f = 2``.
        """
        p = float(p)

        def f(x, y, s):
            return 2.0 * (p - 1.0) * np.maximum(2.0 * x - 1.0, 0.0) ** (p - 2.0) * np.ones(np.shape(s))

        return cls(
            func=f,
            positive=True,
            nonincreasing=True,
            depends_on_s=False,
            lipschitz_s=0.0,
            primitive=lambda x, y, s: f(x, y, s) * np.asarray(s, dtype=float),
            name=f"manufactured(p={p:g})",
        )

    @classmethod
    def separable(cls, h, g, positive=False, nonincreasing=False, lipschitz_s=None,
                  lipschitz_x=None, name=None):
        """``f(x, y, s) = h(x, y) * g(s)``; ``h``, ``g`` may be expression strings."""
        he = Expression(h) if isinstance(h, str) else None
        ge = Expression(g) if isinstance(g, str) else None
        if he is not None and he.depends_on("s"):
            raise InvalidInputError("h(x, y) must not depend on s")
        if ge is not None and (ge.depends_on("x") or ge.depends_on("y")):
            raise InvalidInputError("g(s) must not depend on x or y")
        hfun = (lambda x, y: he(x=x, y=y)) if he is not None else h
        gfun = (lambda s: ge(s=s)) if ge is not None else g
        depends = ge.depends_on("s") if ge is not None else True
        return cls(
            func=lambda x, y, s: np.asarray(hfun(x, y)) * np.asarray(gfun(s)),
            positive=positive,
            nonincreasing=nonincreasing,
            depends_on_s=depends,
            lipschitz_s=lipschitz_s,
            lipschitz_x=lipschitz_x,
            factors=(h, g),
            name=name or f"separable({h!s}, {g!s})",
        )


# --- configuration and reports ---------------------------------------------


@dataclass(frozen=True)
class SolveConfig:
    tolerance: float = 1e-8
    max_inner: int = 50_000
    max_outer: int = 200
    eps_schedule: tuple = ()
    damping: float = 0.5
    outer_tolerance: Optional[float] = None
    preconditioner: str = "laplace"

    def __post_init__(self):
        if not (self.tolerance > 0 and math.isfinite(self.tolerance)):
            raise InvalidInputError("tolerance must be positive")
        if self.max_inner < 1 or self.max_outer < 1:
            raise InvalidInputError("iteration budgets must be >= 1")
        eps = tuple(float(e) for e in self.eps_schedule)
        if any(not math.isfinite(e) or e <= 0 for e in eps) or any(
            b >= a for a, b in zip(eps, eps[1:])
        ):
            raise InvalidInputError("eps_schedule must be finite, positive and decreasing")
        object.__setattr__(self, "eps_schedule", eps)
        if not 0 < self.damping <= 1:
            raise InvalidInputError("damping must lie in (0, 1]")
        if self.outer_tolerance is not None and self.outer_tolerance <= 0:
            raise InvalidInputError("outer_tolerance must be positive")
        if self.preconditioner not in ("laplace", "none"):
            raise InvalidInputError("preconditioner must be 'laplace' or 'none'")


@dataclass
class SolveReport:
    energy: float = math.nan
    inner_iterations: int = 0
    outer_iterations: int = 0
    gradient_norm: float = math.nan
    weak_residual: float = math.nan
    converged: bool = False
    contracted: Optional[bool] = None
    lipschitz: float = math.nan
    energy_resolution: float = 0.0
    energy_trace: list = field(default_factory=list)
    continuation: list = field(default_factory=list)
    outer_trace: list = field(default_factory=list)

    def to_record(self, trace=False):
        rec = {
            "kind": "solve",
            "energy": self.energy,
            "inner_iterations": self.inner_iterations,
            "outer_iterations": self.outer_iterations,
            "gradient_norm": self.gradient_norm,
            "weak_residual": self.weak_residual,
            "converged": self.converged,
            "contracted": self.contracted,
            "lipschitz": self.lipschitz,
            "continuation": self.continuation,
            "outer_trace": self.outer_trace,
        }
        if trace:
            rec["energy_trace"] = self.energy_trace
        return rec


# --- energy ----------------------------------------------------------------


class _Source:
    """Nodal evaluation of ``f`` and ``F``; ``frozen`` pins ``f`` to an array."""

    def __init__(self, mesh, rhs=None, frozen=None):
        self.x, self.y = mesh.nodes[:, 0], mesh.nodes[:, 1]
        self.rhs = rhs
        self.frozen = None if frozen is None else np.asarray(frozen, dtype=float)

    def f(self, u):
        if self.frozen is not None:
            return self.frozen
        return self.rhs(self.x, self.y, u)

    def F(self, u):
        if self.frozen is not None:
            return self.frozen * u
        return self.rhs.antiderivative(self.x, self.y, u)


def _radial(t, p, eps):
    """``(G(t), G'(t))`` for the plain or smoothed positive part."""
    pos = np.maximum(t - 1.0, 0.0)
    if eps == 0.0:
        return pos**p / p, pos ** (p - 1.0)
    root = np.sqrt(pos * pos + eps * eps)
    phi = root - eps
    return phi**p / p, phi ** (p - 1.0) * pos / root


class _Energy:
    def __init__(self, mesh: TriMesh, p, boundary_values, source: _Source, eps=0.0):
        self.mesh = mesh
        self.p = float(p)
        self.eps = float(eps)
        self.source = source
        self.full = np.array(boundary_values, dtype=float)
        self.interior = mesh.interior
        self.w = mesh.node_weights
        self.w_int = self.w[self.interior]

    def expand(self, x):
        u = self.full.copy()
        u[self.interior] = x
        return u

    def flux(self, u):
        m = self.mesh
        gx, gy = m.grad_x @ u, m.grad_y @ u
        t = np.hypot(gx, gy)
        G, dG = _radial(t, self.p, self.eps)
        with np.errstate(divide="ignore", invalid="ignore"):
            scale = np.where(t > 0, dG / t, 0.0)
        return G, scale * gx, scale * gy

    def value_grad_full(self, u):
        m = self.mesh
        G, hx, hy = self.flux(u)
        value = float(np.dot(m.areas, G) - np.dot(self.w, self.source.F(u)))
        a = m.areas
        grad = m.grad_x.T @ (a * hx) + m.grad_y.T @ (a * hy) - self.w * self.source.f(u)
        return value, grad

    def __call__(self, x):
        value, grad = self.value_grad_full(self.expand(x))
        g = grad[self.interior]
        if not (math.isfinite(value) and np.all(np.isfinite(g))):
            raise NumericalFailureError("non-finite energy or gradient")
        return value, g

    def scaled_norm(self, g):
        return float(np.max(np.abs(g) / self.w_int)) if g.size else 0.0


def _preconditioner(mesh, kind):
    if kind == "none":
        return (lambda v: v), (lambda v: v)
    K = stiffness_matrix(mesh).tocsc()
    idx = mesh.interior
    Kii = K[idx][:, idx].tocsc()
    lu = spla.splu(Kii)
    return lu.solve, (lambda v: Kii @ v)


def harmonic_extension(g: ScalarField) -> ScalarField:
    """Discrete harmonic function with the boundary values of ``g``."""
    mesh = g.mesh
    K = stiffness_matrix(mesh).tocsr()
    idx, bnd = mesh.interior, np.flatnonzero(mesh.boundary)
    u = np.array(g.values, dtype=float)
    if idx.size:
        rhs = -(K[idx][:, bnd] @ u[bnd])
        u[idx] = spla.spsolve(K[idx][:, idx].tocsc(), rhs)
    return ScalarField(mesh, u)


def assemble_energy(u: ScalarField, rhs: RhsSpec, p, eps_reg=0.0):
    """Energy value and its nodal gradient with Dirichlet entries zeroed."""
    en = _Energy(u.mesh, p, u.values, _Source(u.mesh, rhs), eps_reg)
    value, grad = en.value_grad_full(np.asarray(u.values, dtype=float))
    grad = np.array(grad)
    grad[u.mesh.boundary] = 0.0
    return value, grad


def _fista(energy: _Energy, x0, tol, max_iter, solve_p, apply_p, report):
    """Preconditioned FISTA with backtracking and restart.

    Returns ``(x, J, g, iterations, converged)``.
    """
    x = np.array(x0, dtype=float)
    Jx, gx = energy(x)
    trace = report.energy_trace
    trace.append(Jx)
    if energy.scaled_norm(gx) <= tol:
        return x, Jx, gx, 0, True
    y, Jy, gy = x, Jx, gx
    t = 1.0
    L = 1.0
    best = (x, Jx, gx)
    for it in range(1, max_iter + 1):
        d = solve_p(gy)
        gPg = float(np.dot(gy, d))
        allowance = 1e-13 * (1.0 + abs(Jy) + abs(float(np.dot(energy.mesh.areas, energy.flux(energy.expand(y))[0]))))
        for _ in range(200):
            dx = -d / L
            xn = y + dx
            Jn, gn = energy(xn)
            dPd = gPg / (L * L)
            ok_energy = Jn <= Jy + float(np.dot(gy, dx)) + 0.5 * L * dPd + allowance
            ok_secant = float(np.dot(gn - gy, dx)) <= L * dPd * (1.0 + 1e-10) + 1e-300
            if ok_energy and ok_secant:
                break
            L *= 2.0
        else:
            raise NumericalFailureError("line search failed to find an admissible step")

        if Jn > Jx + allowance:
            if y is x:
                # a plain step from x already passed the descent test; accept it
                pass
            else:
                # reject, restart momentum from x
                y, Jy, gy, t = x, Jx, gx, 1.0
                continue

        restart = float(np.dot(gy, xn - x)) > 0.0
        t_next = 0.5 * (1.0 + math.sqrt(1.0 + 4.0 * t * t))
        if restart:
            t_next = 1.0
            y_next = xn
        else:
            y_next = xn + ((t - 1.0) / t_next) * (xn - x)
        x, Jx, gx = xn, Jn, gn
        trace.append(Jx)
        report.energy_resolution = max(report.energy_resolution, allowance)
        if Jx <= best[1]:
            best = (x, Jx, gx)
        if energy.scaled_norm(gx) <= tol:
            return x, Jx, gx, it, True
        t = t_next
        if restart:
            y, Jy, gy = x, Jx, gx
        else:
            y = y_next
            Jy, gy = energy(y)
        L *= 0.9
    x, Jx, gx = best
    return x, Jx, gx, max_iter, False


def _check_boundary(g: ScalarField):
    if not isinstance(g, ScalarField):
        raise InvalidInputError("boundary data must be a ScalarField on the mesh")


def _lipschitz(u: ScalarField):
    return float(gradient(u).norms.max())


def _solve_convex(g, source, p, config, initial, report, tol=None, label=None):
    """Minimize the energy for a fixed convex source; fills ``report``."""
    mesh = g.mesh
    tol = config.tolerance if tol is None else tol
    solve_p, apply_p = _preconditioner(mesh, config.preconditioner)
    start = harmonic_extension(g) if initial is None else initial
    x = np.array(start.values, dtype=float)[mesh.interior]
    stages = list(config.eps_schedule) + [0.0]
    remaining = config.max_inner
    J = gnorm = math.nan
    converged = False
    for eps in stages:
        en = _Energy(mesh, p, g.values, source, eps)
        stage_tol = tol if eps == 0.0 else max(tol, 100.0 * tol)
        x, J, gint, its, converged = _fista(en, x, stage_tol, remaining, solve_p, apply_p, report)
        remaining -= its
        report.inner_iterations += its
        gnorm = en.scaled_norm(gint)
        report.continuation.append(
            {"eps": eps, "iterations": its, "energy": J, "gradient_norm": gnorm, "converged": converged}
        )
        if remaining <= 0 and not (eps == 0.0 and converged):
            break
    u = ScalarField(mesh, _Energy(mesh, p, g.values, source).expand(x))
    report.energy = J
    report.gradient_norm = gnorm
    report.converged = converged and stages[-1] == 0.0 and report.continuation[-1]["eps"] == 0.0
    return u


def minimize(g: ScalarField, rhs: RhsSpec, p, config: SolveConfig | None = None,
             initial: ScalarField | None = None):
    """Discrete weak solution with the Dirichlet values of ``g``.

    An ``s``-independent or nonincreasing ``rhs`` gives a convex energy and is
    solved directly; any other ``s``-dependence falls back to damped Picard.
    Raises :class:`PartialResultError` when the inner budget runs out.
    """
    config = config or SolveConfig()
    _check_boundary(g)
    if p < 2:
        raise InvalidInputError("p must be >= 2")
    mesh = g.mesh
    span = float(np.ptp(g.values)) + 1.0
    rhs.probe(mesh.nodes[:, 0], mesh.nodes[:, 1], float(g.values.min()) - span,
              float(g.values.max()) + span)
    if rhs.depends_on_s and not rhs.nonincreasing:
        return picard_outer(g, rhs, p, config, initial)
    report = SolveReport(outer_iterations=1)
    u = _solve_convex(g, _Source(mesh, rhs), p, config, initial, report)
    report.weak_residual = weak_residual(u, rhs, p)
    report.lipschitz = _lipschitz(u)
    if not report.converged:
        raise PartialResultError(
            f"inner budget of {config.max_inner} iterations exhausted "
            f"(scaled gradient {report.gradient_norm:.3e} > {config.tolerance:.1e})",
            result=u,
            report=report,
        )
    return u, report


def weak_residual(u: ScalarField, rhs: RhsSpec, p):
    """Max over interior hat functions of the weak-form defect per unit weight.

    Recomputes triangle geometry from the vertex coordinates and scatters
    with ``np.add.at``; it shares no assembly code with the energy.
    """
    mesh = u.mesh
    tri = mesh.triangles
    P = mesh.nodes[tri]
    vals = np.asarray(u.values)[tri]
    x0, y0 = P[:, 0, 0], P[:, 0, 1]
    x1, y1 = P[:, 1, 0], P[:, 1, 1]
    x2, y2 = P[:, 2, 0], P[:, 2, 1]
    det = (x1 - x0) * (y2 - y0) - (x2 - x0) * (y1 - y0)
    area = 0.5 * np.abs(det)
    bx = np.stack([y1 - y2, y2 - y0, y0 - y1], axis=1) / det[:, None]
    by = np.stack([x2 - x1, x0 - x2, x1 - x0], axis=1) / det[:, None]
    ux = np.sum(bx * vals, axis=1)
    uy = np.sum(by * vals, axis=1)
    r = np.sqrt(ux * ux + uy * uy)
    with np.errstate(divide="ignore", invalid="ignore"):
        k = np.where(r > 1.0, (r - 1.0) ** (p - 1.0) / r, 0.0)
    hx, hy = k * ux, k * uy
    n = len(mesh.nodes)
    a_i = np.zeros(n)
    weight = np.zeros(n)
    np.add.at(a_i, tri, area[:, None] * (hx[:, None] * bx + hy[:, None] * by))
    np.add.at(weight, tri, np.repeat(area[:, None] / 3.0, 3, axis=1))
    fx = rhs(mesh.nodes[:, 0], mesh.nodes[:, 1], np.asarray(u.values))
    res = np.abs(a_i - weight * fx) / weight
    inner = ~mesh.boundary
    return float(res[inner].max()) if inner.any() else 0.0


def picard_outer(g: ScalarField, rhs: RhsSpec, p, config: SolveConfig | None = None,
                 initial: ScalarField | None = None):
    """Damped fixed-point loop freezing ``u`` inside ``f``.

    ``u <- (1 - d) u + d T(u)`` with ``T(u)`` the minimizer for the frozen
    source ``f(x, u(x))``.  The damping is halved whenever the increment
    grows.  Stops once ``|T(u) - u|_inf <= outer_tolerance`` and the weak
    residual of ``T(u)`` for the true ``f`` is within ``tolerance``.
    """
    config = config or SolveConfig()
    _check_boundary(g)
    mesh = g.mesh
    report = SolveReport()
    outer_tol = config.outer_tolerance or config.tolerance
    inner_tol = 0.5 * config.tolerance
    source = _Source(mesh, rhs)
    if not rhs.depends_on_s:
        u = _solve_convex(g, source, p, config, initial, report)
        report.outer_iterations = 1
        report.contracted = True
        report.outer_trace.append({"iteration": 1, "increment": 0.0, "damping": config.damping})
        report.weak_residual = weak_residual(u, rhs, p)
        report.lipschitz = _lipschitz(u)
        if not report.converged:
            raise PartialResultError("inner budget exhausted", result=u, report=report)
        return u, report

    u = harmonic_extension(g) if initial is None else initial
    d = config.damping
    prev = math.inf
    contracted = True
    for k in range(1, config.max_outer + 1):
        frozen = _Source(mesh, frozen=source.f(np.asarray(u.values)))
        sub = SolveReport()
        w = _solve_convex(g, frozen, p, config, u, sub, tol=inner_tol)
        report.inner_iterations += sub.inner_iterations
        report.energy_trace.extend(sub.energy_trace)
        if not sub.converged:
            raise PartialResultError("inner budget exhausted inside Picard", result=w, report=report)
        inc = float(np.max(np.abs(w.values - u.values)))
        res = weak_residual(w, rhs, p)
        report.outer_trace.append({"iteration": k, "increment": inc, "damping": d, "residual": res})
        report.outer_iterations = k
        if inc <= outer_tol and res <= config.tolerance:
            report.energy = sub.energy
            report.gradient_norm = sub.gradient_norm
            report.weak_residual = res
            report.converged = True
            report.contracted = contracted
            report.lipschitz = _lipschitz(w)
            return w, report
        if inc > prev:
            contracted = False
            d *= 0.5
        prev = inc
        u = ScalarField(mesh, (1.0 - d) * u.values + d * w.values)
    raise DivergenceError(
        f"Picard iteration did not converge in {config.max_outer} outer steps",
        trace=report.outer_trace,
        result=u,
    )
