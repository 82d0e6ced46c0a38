"""Regularity diagnostics on discrete solutions.

Second derivatives of a P1 field do not exist pointwise; they are measured
by the jumps of the piecewise-constant gradient across interior edges,

    |D V|^2  ~  sum_e |e| |[V]_e|^2 / h_e,

with ``h_e`` the mean height of the two triangles over ``e``.  The same
convention is used for every second-order object in this module.

Singular integrals ``int v(y) |x - y|^-kappa dy`` use adaptive midpoint
Planar triangles are integrated in polar coordinates about ``x``: a signed
fan of the three sub-triangles with apex ``x``, each reduced to a smooth
angular integral done by Gauss-Legendre.  Other cells (boxes, simplices in
higher dimension) use adaptive midpoint sums: a cell is accepted once its
diameter is small against its distance to ``x``, otherwise it is split.  At
the finest level a cell containing ``x`` is replaced by the ball of equal
volume centred at ``x``, where the integral is known in closed form.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from .errors import InvalidInputError, PreconditionError
from .mesh import ScalarField, TriMesh, check_region, gradient
from .solver import RhsSpec, SolveConfig, minimize
from .vector_field import field_h

__all__ = [
    "KernelParams",
    "kernel_integral",
    "box_cells",
    "triangle_cells",
    "riesz_potential",
    "riesz_lm_constant",
    "degeneracy_measure",
    "default_thresholds",
    "inverse_weight_integral",
    "InverseWeightResult",
    "second_order_integrals",
    "hdiff_seminorms",
    "hdiff_budget",
    "ComparisonVerdict",
    "compare",
    "SobolevParams",
    "SobolevReport",
    "sobolev_check",
    "sobolev_test_functions",
    "fit_sobolev_constant",
    "RegularityReport",
    "regularity_report",
    "trend_ratios",
    "observed_order",
    "max_norm_error",
]


# --- singular kernel core --------------------------------------------------


def _unit_ball_volume(n):
    return math.pi ** (n / 2.0) / math.gamma(n / 2.0 + 1.0)


def _ball_integral(volume, n, kappa):
    """``int_{B_R} |y|^-kappa dy`` for the ball of the given volume."""
    R = (volume / _unit_ball_volume(n)) ** (1.0 / n)
    sphere = n * _unit_ball_volume(n)
    return sphere * R ** (n - kappa) / (n - kappa)


_GL_NODES, _GL_WEIGHTS = np.polynomial.legendre.leggauss(24)


def _fan_integral(x, verts, kappa):
    """``int_T |x - y|^-kappa dy`` for planar triangles ``verts`` of shape ``(N, 3, 2)``."""
    total = np.zeros(len(verts))
    for i in range(3):
        A = verts[:, i] - x
        B = verts[:, (i + 1) % 3] - x
        cross = A[:, 0] * B[:, 1] - A[:, 1] * B[:, 0]
        L = np.linalg.norm(B - A, axis=1)
        ok = (np.abs(cross) > 0) & (L > 0)
        d = np.abs(cross[ok]) / L[ok]
        t = (B[ok] - A[ok]) / L[ok, None]
        pa = np.arctan2(np.einsum("ij,ij->i", A[ok], t), d)
        pb = np.arctan2(np.einsum("ij,ij->i", B[ok], t), d)
        half = 0.5 * (pb - pa)
        phi = 0.5 * (pa + pb)[:, None] + half[:, None] * _GL_NODES
        R = d[:, None] / np.cos(phi)
        piece = half * (R ** (2.0 - kappa) @ _GL_WEIGHTS) / (2.0 - kappa)
        total[ok] += np.sign(cross[ok]) * piece
    return np.abs(total)


class _Simplices:
    """Stack of simplices as vertex arrays of shape ``(N, n+1, n)``; 2-D split only."""

    def __init__(self, verts):
        self.verts = np.asarray(verts, dtype=float)

    def __len__(self):
        return len(self.verts)

    @property
    def dim(self):
        return self.verts.shape[-1]

    def centroids(self):
        return self.verts.mean(axis=1)

    def volumes(self):
        v = self.verts
        e = v[:, 1:] - v[:, :1]
        return np.abs(np.linalg.det(e)) / math.factorial(self.dim)

    def diameters(self):
        v = self.verts
        k = v.shape[1]
        d = [np.linalg.norm(v[:, a] - v[:, b], axis=1) for a in range(k) for b in range(a + 1, k)]
        return np.max(d, axis=0)

    def contains(self, x, tol=1e-12):
        v = self.verts
        e = v[:, 1:] - v[:, :1]
        lam = np.linalg.solve(np.swapaxes(e, 1, 2), (x - v[:, 0])[..., None])[..., 0]
        lam0 = 1.0 - lam.sum(axis=1)
        return (lam >= -tol).all(axis=1) & (lam0 >= -tol)

    def take(self, mask):
        return _Simplices(self.verts[mask])

    def split(self):
        if self.dim != 2:
            raise InvalidInputError("simplex refinement is implemented for triangles only")
        a, b, c = self.verts[:, 0], self.verts[:, 1], self.verts[:, 2]
        ab, bc, ca = 0.5 * (a + b), 0.5 * (b + c), 0.5 * (c + a)
        kids = np.stack(
            [np.stack(t, axis=1) for t in ((a, ab, ca), (ab, b, bc), (ca, bc, c), (ab, bc, ca))],
            axis=1,
        )
        return _Simplices(kids.reshape(-1, 3, 2)), 4


class _Boxes:
    """Axis-aligned boxes as ``(N, 2, n)`` arrays of low/high corners."""

    def __init__(self, corners):
        self.corners = np.asarray(corners, dtype=float)

    def __len__(self):
        return len(self.corners)

    @property
    def dim(self):
        return self.corners.shape[-1]

    def centroids(self):
        return self.corners.mean(axis=1)

    def volumes(self):
        return np.prod(self.corners[:, 1] - self.corners[:, 0], axis=1)

    def diameters(self):
        return np.linalg.norm(self.corners[:, 1] - self.corners[:, 0], axis=1)

    def contains(self, x, tol=1e-12):
        lo, hi = self.corners[:, 0], self.corners[:, 1]
        return np.all((x >= lo - tol) & (x <= hi + tol), axis=1)

    def take(self, mask):
        return _Boxes(self.corners[mask])

    def split(self):
        lo, hi = self.corners[:, 0], self.corners[:, 1]
        mid = 0.5 * (lo + hi)
        n = self.dim
        kids = []
        for bits in range(2**n):
            sel = np.array([(bits >> k) & 1 for k in range(n)], dtype=bool)
            klo = np.where(sel, mid, lo)
            khi = np.where(sel, hi, mid)
            kids.append(np.stack([klo, khi], axis=1))
        return _Boxes(np.stack(kids, axis=1).reshape(-1, 2, n)), 2**n


def triangle_cells(mesh: TriMesh, mask=None):
    verts = mesh.nodes[mesh.triangles]
    return _Simplices(verts if mask is None else verts[mask])


def box_cells(bounds, shape):
    """Uniform lattice of boxes; ``bounds`` is ``[(lo, hi), ...]`` per axis."""
    axes = [np.linspace(lo, hi, k + 1) for (lo, hi), k in zip(bounds, shape)]
    lows = np.stack(np.meshgrid(*[a[:-1] for a in axes], indexing="ij"), axis=-1).reshape(-1, len(axes))
    highs = np.stack(np.meshgrid(*[a[1:] for a in axes], indexing="ij"), axis=-1).reshape(-1, len(axes))
    return _Boxes(np.stack([lows, highs], axis=1))


def kernel_integral(x, cells, values, kappa, eta=0.25, max_depth=10):
    """Approximate ``sum_cells int_cell v |x - y|^-kappa dy`` for cellwise-constant ``v``.

    Planar triangles are exact up to the angular quadrature.  For other
    cells ``eta`` is the accepted ratio diameter/distance and ``max_depth``
    the number of refinement levels before the equal-volume ball takes over.
    """
    x = np.asarray(x, dtype=float)
    values = np.broadcast_to(np.asarray(values, dtype=float), (len(cells),))
    n = cells.dim
    if not 0 <= kappa < n:
        raise PreconditionError(f"kernel exponent must lie in [0, {n}), got {kappa}")
    if kappa == 0:
        return float(np.dot(cells.volumes(), values))
    keep = values != 0
    cells, values = cells.take(keep), values[keep]
    if isinstance(cells, _Simplices) and n == 2:
        return float(np.dot(values, _fan_integral(x, cells.verts, kappa)))
    total = 0.0
    for depth in range(max_depth + 1):
        if len(cells) == 0:
            break
        cen = cells.centroids()
        vol = cells.volumes()
        dist = np.linalg.norm(cen - x, axis=1)
        diam = cells.diameters()
        far = diam <= eta * dist
        if depth == max_depth:
            inside = cells.contains(x)
            ball = np.array([_ball_integral(v, n, kappa) for v in vol[inside]])
            total += float(np.dot(values[inside], ball)) if inside.any() else 0.0
            mid = ~inside
            total += float(np.sum(values[mid] * vol[mid] * dist[mid] ** (-kappa)))
            break
        total += float(np.sum(values[far] * vol[far] * dist[far] ** (-kappa)))
        near = ~far
        if not near.any():
            break
        cells, k = cells.take(near).split()
        values = np.repeat(values[near], k)
    return total


@dataclass(frozen=True)
class KernelParams:
    """Kernel exponent ``gamma``, Riesz order ``alpha`` and base-point lattice size."""

    gamma: float = 0.0
    alpha: float | None = None
    lattice: int = 5
    n: int = 2

    def __post_init__(self):
        if not 0 <= self.gamma < self.n:
            raise PreconditionError(f"gamma must lie in [0, {self.n}), got {self.gamma}")
        if self.alpha is not None and not 0 < self.alpha < self.n:
            raise PreconditionError(f"alpha must lie in (0, {self.n}), got {self.alpha}")
        if self.lattice < 1:
            raise InvalidInputError("lattice must be >= 1")

    def base_points(self, region):
        x0, x1, y0, y1 = region
        k = self.lattice
        if k == 1:
            return np.array([[0.5 * (x0 + x1), 0.5 * (y0 + y1)]])
        xs, ys = np.linspace(x0, x1, k), np.linspace(y0, y1, k)
        X, Y = np.meshgrid(xs, ys)
        return np.column_stack([X.ravel(), Y.ravel()])


def riesz_potential(mesh: TriMesh, values, alpha, x, n=2, **kw):
    """``U_alpha[f](x) = int f(y) / |x - y|^(n - alpha) dy`` for per-triangle ``f``."""
    if not 0 < alpha < n:
        raise PreconditionError(f"alpha must lie in (0, {n}), got {alpha}")
    values = np.broadcast_to(np.asarray(values, dtype=float), (mesh.n_triangles,))
    return kernel_integral(x, triangle_cells(mesh), values, n - alpha, **kw)


def riesz_lm_constant(mesh: TriMesh, values, alpha, s, m, n=2):
    """Fitted constant ``C = ||U_alpha f||_m / (|Omega|^(1/m - 1/r) ||f||_s)``.

    ``r`` is given by ``1/r = 1/s - alpha/n``; the potential is sampled at
    triangle centroids.  Requires ``1 < s < n/alpha`` and ``1 <= m <= r``.
    """
    if not 0 < alpha < n:
        raise PreconditionError(f"alpha must lie in (0, {n})")
    if not 1 < s < n / alpha:
        raise PreconditionError(f"need 1 < s < n/alpha, got s={s}")
    r = 1.0 / (1.0 / s - alpha / n)
    if not 1 <= m <= r:
        raise PreconditionError(f"need 1 <= m <= r={r:g}, got m={m}")
    values = np.broadcast_to(np.asarray(values, dtype=float), (mesh.n_triangles,))
    cells = triangle_cells(mesh)
    U = np.array([kernel_integral(c, cells, values, n - alpha) for c in mesh.centroids])
    a = mesh.areas
    lm = np.dot(a, np.abs(U) ** m) ** (1.0 / m)
    ls = np.dot(a, np.abs(values) ** s) ** (1.0 / s)
    return float(lm / (mesh.area ** (1.0 / m - 1.0 / r) * ls))


# --- degeneracy ------------------------------------------------------------


def default_thresholds(mesh: TriMesh):
    root = math.sqrt(mesh.h)
    return (1.0 - root, 1.0, 1.0 + root)


def degeneracy_measure(u: ScalarField, thresholds=None, region=None):
    """``[(theta, |{T in region : |Du_T| <= theta}|), ...]`` sorted by theta."""
    mesh = u.mesh
    region = check_region(mesh, region)
    thresholds = default_thresholds(mesh) if thresholds is None else thresholds
    norms = gradient(u).norms
    within = mesh.triangles_within(region)
    out = []
    for th in sorted(float(t) for t in thresholds):
        out.append((th, float(np.sum(mesh.areas[within & (norms <= th)]))))
    return out


@dataclass(frozen=True)
class InverseWeightResult:
    t: float
    gamma: float
    eps_floor: float
    value: float
    argmax: tuple
    divergent: bool

    def to_record(self):
        return {
            "kind": "inverse_weight",
            "t": self.t,
            "gamma": self.gamma,
            "eps_floor": self.eps_floor,
            "value": self.value if math.isfinite(self.value) else "inf",
            "argmax": list(self.argmax),
            "divergent": self.divergent,
        }


def inverse_weight_integral(u: ScalarField, p, t, gamma=0.0, eps_floor=0.0, region=None,
                            lattice=5):
    """``sup_x int_region ((|Du| - 1)_+ + eps)^(-p t) |x - y|^-gamma dy``.

    The sup runs over a ``lattice x lattice`` grid of base points.  With
    ``eps_floor = 0`` and a vanishing weight on some triangle the integral is
    reported as infinite and ``divergent`` is set.
    """
    if not 0 <= t <= (p - 2.0) / p + 1e-15:
        raise PreconditionError(f"t must lie in [0, (p-2)/p] = [0, {(p - 2.0) / p:g}], got {t}")
    if eps_floor < 0:
        raise PreconditionError("eps_floor must be >= 0")
    kp = KernelParams(gamma=gamma, lattice=lattice)
    mesh = u.mesh
    region = check_region(mesh, region)
    within = mesh.triangles_within(region)
    pos = np.maximum(gradient(u).norms[within] - 1.0, 0.0) + eps_floor
    base = kp.base_points(region)
    if t == 0:
        weight = np.ones_like(pos)
    elif np.any(pos == 0):
        return InverseWeightResult(t, gamma, eps_floor, math.inf, tuple(base[0]), True)
    else:
        weight = pos ** (-p * t)
    cells = triangle_cells(mesh, within)
    vals = [kernel_integral(x, cells, weight, gamma) for x in base]
    k = int(np.argmax(vals))
    return InverseWeightResult(t, gamma, eps_floor, float(vals[k]), tuple(map(float, base[k])), False)


# --- edge-jump second derivatives -----------------------------------------


def _interior_edges(mesh: TriMesh, region):
    et = mesh.edge_triangles
    within = mesh.triangles_within(region)
    ok = (et[:, 1] >= 0)
    ok[ok] &= within[et[ok, 0]] & within[et[ok, 1]]
    idx = np.flatnonzero(ok)
    t0, t1 = et[idx, 0], et[idx, 1]
    le = mesh.edge_lengths[idx]
    he = 0.5 * (2.0 * mesh.areas[t0] / le + 2.0 * mesh.areas[t1] / le)
    return t0, t1, le, he


def _jump_sum(mesh, field_t, weight_t, region):
    """``sum_e |e| |[V]|^2 / h_e * (w_T0 + w_T1)/2`` over interior edges in ``region``."""
    t0, t1, le, he = _interior_edges(mesh, region)
    V = np.asarray(field_t, dtype=float)
    if V.ndim == 1:
        V = V[:, None]
    jump = np.sum((V[t0] - V[t1]) ** 2, axis=1)
    w = 0.5 * (weight_t[t0] + weight_t[t1])
    terms = np.where(jump > 0, le * jump / he * w, 0.0)
    return float(np.sum(terms))


def second_order_integrals(u: ScalarField, p, beta=0.0, gamma=0.0, region=None):
    """Discrete proxies of the weighted second-order integrals.

    ``I1 = sum_j int_{|u_j| > 1} (|Du|-1)_+^(p-1) |D u_j|^2 / (|u_j|-1)_+^beta``
    and ``I2 = int_{|Du| > 1} (|Du|-1)_+^(p-1-beta) |D^2 u|^2``, both with
    edge-jump second derivatives and face-averaged weights.  Only ``gamma = 0``
    is available for planar meshes.
    """
    if not 0 <= beta <= 1:
        raise PreconditionError(f"beta must lie in [0, 1], got {beta}")
    if gamma != 0:
        raise PreconditionError("gamma must be 0 in two dimensions")
    mesh = u.mesh
    region = check_region(mesh, region)
    Du = gradient(u).values
    r = np.hypot(Du[:, 0], Du[:, 1])
    pos = np.maximum(r - 1.0, 0.0)
    active = r > 1.0
    with np.errstate(divide="ignore", invalid="ignore"):
        w2 = np.where(active, pos ** (p - 1.0 - beta), 0.0)
    I2 = _jump_sum(mesh, Du, w2, region)
    I1 = 0.0
    for j in range(2):
        pj = np.maximum(np.abs(Du[:, j]) - 1.0, 0.0)
        act = np.abs(Du[:, j]) > 1.0
        with np.errstate(divide="ignore", invalid="ignore"):
            wj = np.where(act, pos ** (p - 1.0) / pj**beta, 0.0)
        I1 += _jump_sum(mesh, Du[:, j], wj, region)
    return I1, I2


def hdiff_seminorms(u: ScalarField, p, region=None):
    """Edge-jump W^{1,2} seminorms of ``H_{p/2}(Du)`` and ``H_{p-1}(Du)``."""
    mesh = u.mesh
    region = check_region(mesh, region)
    Du = gradient(u).values
    ones = np.ones(mesh.n_triangles)
    s1 = math.sqrt(_jump_sum(mesh, field_h(Du, p / 2.0), ones, region))
    s2 = math.sqrt(_jump_sum(mesh, field_h(Du, p - 1.0), ones, region))
    return s1, s2


def hdiff_budget(u: ScalarField, p, region=None):
    """Constants bounding ``s2`` by ``s1``.

    Returns ``(c, sharp)``: ``c = ((p-1) M^(p-2))**2`` with
    ``M = max (|Du| - 1)_+`` over ``region``, and the squared Lipschitz
    constant ``(2(p-1)/p M^((p-2)/2))**2`` of the map ``H_{p/2} -> H_{p-1}``
    on vectors of size at most ``M^(p/2)``.
    """
    mesh = u.mesh
    region = check_region(mesh, region)
    within = mesh.triangles_within(region)
    M = float(np.max(np.maximum(gradient(u).norms[within] - 1.0, 0.0), initial=0.0))
    c = ((p - 1.0) * M ** (p - 2.0)) ** 2
    sharp = (2.0 * (p - 1.0) / p * M ** ((p - 2.0) / 2.0)) ** 2
    return c, sharp


# --- comparison ------------------------------------------------------------


@dataclass
class ComparisonVerdict:
    min_diff: float
    max_diff: float
    tol_cmp: float
    violating: np.ndarray
    h: float
    degeneracy_u: list
    degeneracy_v: list
    reports: tuple = ()
    solutions: tuple = ()

    @property
    def passed(self):
        return self.violating.size == 0

    def to_record(self):
        return {
            "kind": "compare",
            "h": self.h,
            "min_diff": self.min_diff,
            "max_diff": self.max_diff,
            "tol_cmp": self.tol_cmp,
            "violations": int(self.violating.size),
            "violating_nodes": self.violating.tolist(),
            "passed": self.passed,
            "degeneracy_u": [list(t) for t in self.degeneracy_u],
            "degeneracy_v": [list(t) for t in self.degeneracy_v],
        }


def compare(g1: ScalarField, g2: ScalarField, rhs: RhsSpec, p, config: SolveConfig | None = None,
            c_cmp=None, region=None, check_order=True):
    """Solve with data ``g1`` and ``g2`` and check ``v - u >= -tol_cmp`` at interior nodes.

    ``tol_cmp = c_cmp * h`` with ``h`` the cell size; by default it is
    ``10 * tolerance``.  ``check_order=False`` skips the boundary-order and
    flag preconditions, which lets a reversed pair be evaluated.
    """
    config = config or SolveConfig()
    mesh = g1.mesh
    if g2.mesh is not mesh:
        raise InvalidInputError("boundary data live on different meshes")
    if check_order:
        b = mesh.boundary
        bad = np.flatnonzero(g1.values[b] > g2.values[b])
        if bad.size:
            raise PreconditionError(f"g1 <= g2 fails at {bad.size} boundary node(s)")
        if not (rhs.positive and rhs.nonincreasing):
            raise PreconditionError("rhs must be flagged positive and nonincreasing")
    u, ru = minimize(g1, rhs, p, config)
    v, rv = minimize(g2, rhs, p, config)
    tol_cmp = 10.0 * config.tolerance if c_cmp is None else float(c_cmp) * mesh.cell_size
    diff = (v.values - u.values)[mesh.interior]
    viol = mesh.interior[diff < -tol_cmp]
    return ComparisonVerdict(
        min_diff=float(diff.min()),
        max_diff=float(diff.max()),
        tol_cmp=tol_cmp,
        violating=viol,
        h=mesh.cell_size,
        degeneracy_u=degeneracy_measure(u, region=region),
        degeneracy_v=degeneracy_measure(v, region=region),
        reports=(ru, rv),
        solutions=(u, v),
    )


# --- weighted Sobolev ------------------------------------------------------


@dataclass(frozen=True)
class SobolevParams:
    """Exponents of the weighted Sobolev inequality; ``q_star`` is derived."""

    t: float
    gamma: float
    q: float
    n: int = 2
    q_star: float = field(init=False)

    def __post_init__(self):
        n, t, g, q = self.n, self.t, self.gamma, self.q
        if not t > 0:
            raise PreconditionError("t must be > 0")
        if not g < n:
            raise PreconditionError("gamma must be < n")
        if not q > (n - g) / t:
            raise PreconditionError(f"condition (i) q > (n - gamma)/t = {(n - g) / t:g} fails for q = {q:g}")
        if not q > 1.0 + 1.0 / t:
            raise PreconditionError(f"condition (ii) q > 1 + 1/t = {1 + 1 / t:g} fails for q = {q:g}")
        if not q < (n - g) / t + n:
            raise PreconditionError(
                f"condition (iii) q < (n - gamma)/t + n = {(n - g) / t + n:g} fails for q = {q:g}"
            )
        inv = (1.0 / q) * (1.0 + 1.0 / t - g / (n * t)) - 1.0 / n
        if not inv > 0:
            raise PreconditionError("q* would be infinite")
        qs = 1.0 / inv
        if qs < q * (1 - 1e-12):
            raise PreconditionError(f"q* = {qs:g} < q = {q:g}")
        object.__setattr__(self, "q_star", qs)


@dataclass
class SobolevReport:
    params: SobolevParams
    ratios: list
    K: float
    c_n: float | None
    budget: float | None
    h: float

    @property
    def max_ratio(self):
        return max(self.ratios)

    def to_record(self):
        return {
            "kind": "sobolev",
            "h": self.h,
            "t": self.params.t,
            "gamma": self.params.gamma,
            "q": self.params.q,
            "q_star": self.params.q_star,
            "K": self.K,
            "ratios": self.ratios,
            "max_ratio": self.max_ratio,
            "c_n": self.c_n,
            "budget": self.budget,
        }


def _subcentroids(m):
    """Barycentric centroids of the ``m*m`` congruent sub-triangles."""
    pts = []
    for i in range(m):
        for j in range(m - i):
            pts.append((i + 1 / 3, j + 1 / 3))
            if i + j < m - 1:
                pts.append((i + 2 / 3, j + 2 / 3))
    lam = np.array(pts) / m
    return np.column_stack([1.0 - lam.sum(axis=1), lam])


def _lq_norm_p1(u: ScalarField, q, sub=4):
    lam = _subcentroids(sub)
    vals = u.values[u.mesh.triangles] @ lam.T
    return float(np.dot(u.mesh.areas, np.mean(np.abs(vals) ** q, axis=1)) ** (1.0 / q))


def sobolev_test_functions(mesh: TriMesh):
    """Ten smooth functions vanishing on the boundary of the mesh rectangle."""
    x0, x1, y0, y1 = mesh.bounds
    s = (mesh.nodes[:, 0] - x0) / (x1 - x0)
    t = (mesh.nodes[:, 1] - y0) / (y1 - y0)
    b = s * (1 - s) * t * (1 - t)
    sin = np.sin
    pi = math.pi
    funcs = [
        16 * b,
        256 * b**2,
        16 * b * (1 + s),
        16 * b * (s - t),
        16 * b * np.exp(s + t),
        sin(pi * s) * sin(pi * t),
        sin(2 * pi * s) * sin(pi * t),
        sin(pi * s) * sin(3 * pi * t),
        sin(pi * s) ** 2 * sin(pi * t),
        64 * b * s * t,
    ]
    vals = []
    for f in funcs:
        f = np.array(f)
        f[mesh.boundary] = 0.0
        vals.append(ScalarField(mesh, f))
    return vals


def _weight_integral(mesh, rho, params, lattice):
    if np.any(rho < 0) or not np.all(np.isfinite(rho)):
        raise PreconditionError("weight must be finite and nonnegative")
    if np.any(rho == 0):
        return math.inf
    kp = KernelParams(gamma=params.gamma, lattice=lattice, n=params.n)
    cells = triangle_cells(mesh)
    w = rho ** (-params.t)
    return max(kernel_integral(x, cells, w, params.gamma) for x in kp.base_points(mesh.bounds))


def sobolev_check(tests, rho, params: SobolevParams, c_n=None, lattice=5, sub=4):
    """Ratios ``||u||_{q*} / ||Du||_{q, rho}`` over ``tests``.

    ``rho`` is per-triangle.  ``K`` is the sup over base points of
    ``int rho^-t |x - y|^-gamma``; with a frozen ``c_n`` the budget
    ``c_n K^(1/(q t))`` is reported alongside.
    """
    if not tests:
        raise InvalidInputError("empty test set")
    mesh = tests[0].mesh
    rho = np.broadcast_to(np.asarray(rho, dtype=float), (mesh.n_triangles,))
    for u in tests:
        if u.mesh is not mesh:
            raise InvalidInputError("test functions live on different meshes")
        if np.any(u.values[mesh.boundary] != 0):
            raise PreconditionError("test functions must vanish on the boundary")
    K = _weight_integral(mesh, rho, params, lattice)
    if not math.isfinite(K):
        raise PreconditionError("weight integral K diverges")
    ratios = []
    for u in tests:
        du = gradient(u).norms
        denom = float(np.dot(mesh.areas, du**params.q * rho) ** (1.0 / params.q))
        if denom == 0:
            raise PreconditionError("test function with vanishing weighted gradient norm")
        ratios.append(_lq_norm_p1(u, params.q_star, sub) / denom)
    budget = None if c_n is None else float(c_n * K ** (1.0 / (params.q * params.t)))
    return SobolevReport(params, ratios, float(K), c_n, budget, mesh.cell_size)


def fit_sobolev_constant(mesh: TriMesh, params: SobolevParams, tests=None, lattice=5):
    """``C_n`` such that the max ratio at ``rho = 1`` equals ``C_n K^(1/(q t))``."""
    tests = tests or sobolev_test_functions(mesh)
    rep = sobolev_check(tests, 1.0, params, lattice=lattice)
    return rep.max_ratio / rep.K ** (1.0 / (params.q * params.t))


# --- reports and trends ----------------------------------------------------


def trend_ratios(values):
    """Successive ratios ``v[k+1] / v[k]`` (``nan`` where ``v[k] == 0``)."""
    v = [float(a) for a in values]
    return [b / a if a != 0 else math.nan for a, b in zip(v, v[1:])]


def observed_order(errors, sizes):
    """``log(e_k / e_{k+1}) / log(h_k / h_{k+1})`` for successive pairs."""
    return [
        math.log(e0 / e1) / math.log(h0 / h1)
        for (e0, e1), (h0, h1) in zip(zip(errors, errors[1:]), zip(sizes, sizes[1:]))
    ]


def max_norm_error(u: ScalarField, exact, order=4):
    """``max |u_h - u*|`` over a barycentric lattice of ``order`` per triangle.

    Nodes and edge midpoints are included, so for quadratic ``u*`` the value
    is the exact sup over the domain.
    """
    k = int(order)
    lam = np.array([(i, j, k - i - j) for i in range(k + 1) for j in range(k + 1 - i)]) / k
    mesh = u.mesh
    P = mesh.nodes[mesh.triangles]
    pts = np.einsum("qk,tkd->tqd", lam, P)
    uh = u.values[mesh.triangles] @ lam.T
    ex = np.asarray(exact(pts[..., 0], pts[..., 1]), dtype=float)
    return float(np.max(np.abs(uh - ex)))


@dataclass
class RegularityReport:
    h: float
    p: float
    region: tuple
    degeneracy: list
    I1: float
    I2: float
    beta: float
    inverse_weight: list
    s1: float
    s2: float
    budget: float
    sharp_budget: float

    def to_record(self):
        return {
            "kind": "regularity",
            "h": self.h,
            "p": self.p,
            "region": list(self.region),
            "degeneracy": [list(t) for t in self.degeneracy],
            "beta": self.beta,
            "I1": self.I1,
            "I2": self.I2,
            "inverse_weight": [r.to_record() for r in self.inverse_weight],
            "s1": self.s1,
            "s2": self.s2,
            "hdiff_budget": self.budget,
            "hdiff_sharp_budget": self.sharp_budget,
        }


def regularity_report(u: ScalarField, p, region=None, beta=0.0, t_values=None,
                      eps_floors=(1e-2, 1e-4, 0.0), lattice=5):
    mesh = u.mesh
    region = check_region(mesh, region)
    if t_values is None:
        t_values = (0.0, (p - 2.0) / p) if p > 2 else (0.0,)
    inv = [
        inverse_weight_integral(u, p, t, 0.0, e, region, lattice)
        for t in t_values
        for e in eps_floors
    ]
    I1, I2 = second_order_integrals(u, p, beta, 0.0, region)
    s1, s2 = hdiff_seminorms(u, p, region)
    c, sharp = hdiff_budget(u, p, region)
    return RegularityReport(
        h=mesh.cell_size, p=float(p), region=region, degeneracy=degeneracy_measure(u, region=region),
        I1=I1, I2=I2, beta=beta, inverse_weight=inv, s1=s1, s2=s2, budget=c, sharp_budget=sharp,
    )
