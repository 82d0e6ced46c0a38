"""Randomized verification of the pointwise inequalities satisfied by ``H``.

Each ``check_*`` function returns a margin ``greater - lesser`` that must be
nonnegative.  The ``*_terms`` functions underneath are vectorized and return
the two sides separately so that campaigns can apply a relative slack
``1e-12 * (1 + |lhs| + |rhs|)``.

Campaigns draw vector magnitudes log-uniformly, directions uniformly on the
sphere, and force a fraction of the draws onto thin shells around the unit
sphere, where the field stops being elliptic.
"""

from __future__ import annotations

import math
from concurrent.futures import ThreadPoolExecutor
from dataclasses import asdict, dataclass, field

import numpy as np

from .errors import InvalidInputError, PreconditionError
from .vector_field import ExponentParams, eigen_bounds, field_h, jacobian_h

__all__ = [
    "LEMMAS",
    "SLACK",
    "SampleCampaign",
    "InequalityReport",
    "c_star",
    "check_algebraic",
    "check_h_monotonicity",
    "check_h_lipschitz",
    "check_mon_eta",
    "check_pair_ellipticity",
    "check_teps_nonneg",
    "check_eigen_sandwich",
    "g_eps",
    "g_eps_derivative",
    "run_campaign",
]

SLACK = 1e-12

LEMMAS = (
    "algebraic",
    "h_monotonicity",
    "h_lipschitz",
    "mon_eta",
    "pair_ellipticity",
    "eigen_sandwich",
    "teps_nonneg",
)


def c_star(p):
    """Candidate constant of the pair-ellipticity inequality, ``2**-(p+4)``."""
    return 2.0 ** (-(p + 4.0))


def _vec(v):
    v = np.asarray(v, dtype=float)
    if not np.all(np.isfinite(v)):
        raise InvalidInputError("non-finite input")
    return v


def _norm(v):
    return np.sqrt(np.einsum("...i,...i->...", v, v))


def _dot(a, b):
    return np.einsum("...i,...i->...", a, b)


def _pos(x):
    return np.maximum(x, 0.0)


# --- vectorized sides -------------------------------------------------------


def algebraic_terms(a, b, p):
    pa = _pos(a - 1.0) ** p
    pb = _pos(b - 1.0) ** p
    lhs = (pa + pb) / (a * a + b * b)
    rhs = pa / (4.0 * a * a) + pb / (4.0 * b * b)
    return lhs, rhs


def _fields(xi, eta, p):
    return field_h(xi, p - 1.0), field_h(eta, p - 1.0)


def monotonicity_terms(xi, eta, p):
    """``<H_{p-1}(xi) - H_{p-1}(eta), xi - eta>`` against
    ``(4/p^2) |H_{p/2}(xi) - H_{p/2}(eta)|^2``."""
    hx, he = _fields(xi, eta, p)
    dh2 = field_h(xi, p / 2.0) - field_h(eta, p / 2.0)
    lhs = _dot(hx - he, xi - eta)
    rhs = (4.0 / (p * p)) * _dot(dh2, dh2)
    return lhs, rhs


def lipschitz_terms(xi, eta, p):
    """``|H_{p-1}(xi) - H_{p-1}(eta)|`` against its ``H_{p/2}`` bound.

    Returned as ``(bound, value)`` so that ``bound - value >= 0``.
    """
    hx, he = _fields(xi, eta, p)
    gx, ge = field_h(xi, p / 2.0), field_h(eta, p / 2.0)
    e = (p - 2.0) / p
    # numpy follows 0**0 == 1, which is the intended reading at p = 2
    bound = (p - 1.0) * (_norm(gx) ** e + _norm(ge) ** e) * _norm(gx - ge)
    value = _norm(hx - he)
    return bound, value


def mon_eta_terms(xi, eta, p):
    hx, he = _fields(xi, eta, p)
    d = xi - eta
    lhs = _dot(hx - he, d)
    ne, nx = _norm(eta), _norm(xi)
    const = min(1.0, p - 1.0) / 2.0 ** (p + 1.0)
    rhs = const * (ne - 1.0) ** p / (ne * (nx + ne)) * _dot(d, d)
    return lhs, rhs


def pair_ellipticity_weight(xi, eta, p):
    """Bracket times ``|xi - eta|^2``, i.e. the right side without constant."""
    nx, ne = _norm(xi), _norm(eta)
    d = xi - eta
    bracket = _pos(nx - 1.0) ** p / (nx * nx) + _pos(ne - 1.0) ** p / (ne * ne)
    return bracket * _dot(d, d)


def pair_ellipticity_terms(xi, eta, p, constant=None):
    hx, he = _fields(xi, eta, p)
    lhs = _dot(hx - he, xi - eta)
    c = c_star(p) if constant is None else constant
    return lhs, c * pair_ellipticity_weight(xi, eta, p)


def eigen_sandwich_terms(z, zeta, p):
    """Return ``(q - lo|zeta|^2, hi|zeta|^2 - q)`` style sides.

    The quadratic form ``q = zeta^T DH(z) zeta`` is computed from the
    assembled Jacobian matrix.  Result: ``(q, lo|zeta|^2, hi|zeta|^2)``.
    """
    params = ExponentParams(p=p)
    jac = jacobian_h(z, params)
    q = np.einsum("...i,...ij,...j->...", zeta, jac, zeta)
    lo, hi = eigen_bounds(z, params)
    z2 = _dot(zeta, zeta)
    return q, lo * z2, hi * z2


def g_eps(s, eps):
    """Odd piecewise-linear cutoff: 0, then slope 2, then ``|s| - 1``."""
    s = np.asarray(s, dtype=float)
    a = np.abs(s)
    out = np.where(
        a <= 1.0 + eps,
        0.0,
        np.where(a < 1.0 + 2.0 * eps, 2.0 * a - 2.0 * (1.0 + eps), a - 1.0),
    )
    return np.sign(s) * out


def g_eps_derivative(s, eps):
    a = np.abs(np.asarray(s, dtype=float))
    return np.where(a <= 1.0 + eps, 0.0, np.where(a < 1.0 + 2.0 * eps, 2.0, 1.0))


def teps_terms(s, beta, eps, sigma):
    """``(T_eps(s), 2 sigma G_eps(s)/s)``; the first must dominate the second."""
    s = np.asarray(s, dtype=float)
    g = g_eps(s, eps)
    dg = g_eps_derivative(s, eps)
    a = np.abs(s)
    live = g != 0.0
    with np.errstate(divide="ignore", invalid="ignore"):
        ratio = np.where(live, g / s, 0.0)
        blow = np.where(live, a / _pos(a - 1.0), 0.0)
    t = dg - beta * ratio * blow
    return t, 2.0 * sigma * ratio


# --- scalar facades --------------------------------------------------------


def _scalar(x):
    return float(np.asarray(x))


def check_algebraic(a, b, p):
    if a <= 0 or b <= 0:
        raise InvalidInputError("check_algebraic needs a, b > 0")
    if p < 2:
        raise PreconditionError("check_algebraic needs p >= 2")
    lhs, rhs = algebraic_terms(float(a), float(b), p)
    return _scalar(lhs - rhs)


def check_h_monotonicity(xi, eta, p):
    if p < 2:
        raise PreconditionError("p >= 2 required")
    lhs, rhs = monotonicity_terms(_vec(xi), _vec(eta), p)
    return _scalar(lhs - rhs)


def check_h_lipschitz(xi, eta, p):
    if p < 2:
        raise PreconditionError("p >= 2 required")
    bound, value = lipschitz_terms(_vec(xi), _vec(eta), p)
    return _scalar(bound - value)


def check_mon_eta(xi, eta, p):
    xi, eta = _vec(xi), _vec(eta)
    if p <= 1:
        raise PreconditionError("check_mon_eta needs p > 1")
    if _norm(eta) <= 1.0:
        raise PreconditionError("check_mon_eta needs |eta| > 1")
    lhs, rhs = mon_eta_terms(xi, eta, p)
    return _scalar(lhs - rhs)


def check_pair_ellipticity(xi, eta, p, constant=None):
    xi, eta = _vec(xi), _vec(eta)
    if p < 2:
        raise PreconditionError("p >= 2 required")
    if _norm(xi) == 0 or _norm(eta) == 0:
        raise PreconditionError("check_pair_ellipticity needs nonzero vectors")
    lhs, rhs = pair_ellipticity_terms(xi, eta, p, constant)
    return _scalar(lhs - rhs)


def check_eigen_sandwich(z, zeta, p):
    """``min(q - lo|zeta|^2, hi|zeta|^2 - q)``."""
    q, lo, hi = eigen_sandwich_terms(_vec(z), _vec(zeta), p)
    return _scalar(np.minimum(q - lo, hi - q))


def _teps_pre(beta, eps, sigma):
    if not 0.0 <= beta <= 1.0:
        raise PreconditionError("beta must lie in [0, 1]")
    if eps <= 0:
        raise PreconditionError("eps must be > 0")
    # at beta = 1 the admissible sigma interval is empty; sigma = 0 is tested
    if sigma < 0 or (sigma >= (1.0 - beta) / 2.0 and not (beta == 1.0 and sigma == 0.0)):
        raise PreconditionError("sigma must lie in [0, (1 - beta)/2)")


def check_teps_nonneg(s, beta, eps, sigma=0.0):
    _teps_pre(beta, eps, sigma)
    t, absorbed = teps_terms(float(s), beta, eps, sigma)
    return _scalar(t - absorbed)


# --- campaigns -------------------------------------------------------------


DEFAULT_SHELLS = ((1e-2, 0.05), (1e-4, 0.05), (1e-8, 0.05))


@dataclass(frozen=True)
class SampleCampaign:
    seed: int = 42
    count: int = 1_000_000
    p_values: tuple = (2.0, 2.5, 3.0, 5.0)
    dimensions: tuple = (2, 3)
    magnitude_range: tuple = (1e-3, 1e3)
    shells: tuple = DEFAULT_SHELLS
    near_pair_fraction: float = 0.1
    lemmas: tuple = LEMMAS
    chunk_size: int = 1 << 17
    threads: int = 1
    # falsifiability hook: scales the pair-ellipticity constant
    c_star_scale: float = 1.0

    def __post_init__(self):
        if int(self.count) < 1:
            raise InvalidInputError("campaign count must be >= 1")
        lo, hi = self.magnitude_range
        if not (0 < lo < hi and math.isfinite(hi)):
            raise InvalidInputError("magnitude_range must satisfy 0 < lo < hi")
        if any(p < 2 for p in self.p_values) or not self.p_values:
            raise InvalidInputError("p_values must be nonempty and >= 2")
        if any(int(n) < 1 for n in self.dimensions) or not self.dimensions:
            raise InvalidInputError("dimensions must be positive")
        fracs = [f for _, f in self.shells]
        if any(f < 0 for f in fracs) or sum(fracs) + self.near_pair_fraction > 1.0:
            raise InvalidInputError("shell and near-pair fractions must sum to <= 1")
        if any(d <= 0 for d, _ in self.shells):
            raise InvalidInputError("shell widths must be positive")
        unknown = set(self.lemmas) - set(LEMMAS)
        if unknown:
            raise InvalidInputError(f"unknown lemmas: {sorted(unknown)}")
        if self.chunk_size < 1 or self.threads < 1:
            raise InvalidInputError("chunk_size and threads must be >= 1")


@dataclass
class InequalityReport:
    lemma: str
    p: float
    n: int
    samples: int = 0
    violations: int = 0
    tight: int = 0
    worst_margin: float = math.inf
    worst_relative_margin: float = math.inf
    worst_sample: list = field(default_factory=list)
    empirical_constant: float | None = None
    reference_constant: float | None = None
    shells: dict = field(default_factory=dict)

    @property
    def passed(self):
        return self.violations == 0

    def to_record(self):
        rec = asdict(self)
        rec["kind"] = "inequality"
        rec["passed"] = self.passed
        return rec


class _Sampler:
    def __init__(self, campaign: SampleCampaign, rng):
        self.c = campaign
        self.rng = rng

    def magnitudes(self, size, lower=None):
        """Log-uniform magnitudes plus forced shells; returns (r, label)."""
        rng = self.rng
        lo, hi = self.c.magnitude_range
        if lower is not None:
            lo = max(lo, lower)
        u = rng.random(size)
        r = np.exp(math.log(lo) + u * (math.log(hi) - math.log(lo)))
        pick = rng.random(size)
        w = rng.random(size)
        label = np.zeros(size, dtype=np.int64)
        start = 0.0
        for k, (delta, frac) in enumerate(self.c.shells, start=1):
            sel = (pick >= start) & (pick < start + frac)
            if lower is None:
                r[sel] = 1.0 + delta * (2.0 * w[sel] - 1.0)
            else:
                # strictly outside the unit ball: (1, 1 + delta]
                r[sel] = 1.0 + delta * (1.0 - w[sel])
            label[sel] = k
            start += frac
        if lower is not None:
            r = np.maximum(r, np.nextafter(1.0, 2.0))
        return r, label

    def directions(self, size, n):
        g = self.rng.standard_normal((size, n))
        nrm = _norm(g)
        g[nrm == 0] = 1.0
        return g / _norm(g)[:, None]

    def vectors(self, size, n, lower=None):
        r, label = self.magnitudes(size, lower)
        return r[:, None] * self.directions(size, n), label

    def pairs(self, size, n, partner_lower=None):
        """Anchor/partner pairs; a fraction of partners sit close to anchors."""
        if partner_lower is None:
            xi, label = self.vectors(size, n)
            eta, _ = self.vectors(size, n)
        else:
            eta, label = self.vectors(size, n, lower=partner_lower)
            xi, _ = self.vectors(size, n)
        near = self.rng.random(size) < self.c.near_pair_fraction
        rel = np.exp(self.rng.uniform(math.log(1e-8), math.log(1e-1), size))
        off = self.directions(size, n) * (rel * _norm(eta))[:, None]
        if partner_lower is None:
            xi, eta = np.where(near[:, None], eta + off, xi), eta
            # label follows the anchor that carries the shell
            label = np.where(near, self._label_of(eta), label)
        else:
            xi = np.where(near[:, None], eta + off, xi)
        return xi, eta, label

    def _label_of(self, v):
        r = _norm(v)
        label = np.zeros(r.shape, dtype=np.int64)
        # widest shell first so that the thinnest one containing r wins
        order = sorted(enumerate(self.c.shells, start=1), key=lambda t: -t[1][0])
        for k, (delta, _) in order:
            label[np.abs(r - 1.0) <= delta] = k
        return label


class _Acc:
    """Associative accumulator for one (lemma, p, n) cell."""

    def __init__(self, nshells):
        self.samples = 0
        self.violations = 0
        self.tight = 0
        self.worst_margin = math.inf
        self.worst_rel = math.inf
        self.worst_sample = []
        self.ratio = math.inf
        self.shells = [[0, 0, math.inf] for _ in range(nshells + 1)]

    def add(self, greater, lesser, label, samples, ratio=None):
        margin = greater - lesser
        scale = 1.0 + np.abs(greater) + np.abs(lesser)
        rel = margin / scale
        bad = rel < -SLACK
        self.samples += margin.size
        self.violations += int(bad.sum())
        self.tight += int((np.abs(rel) <= SLACK).sum())
        i = int(np.argmin(rel))
        if rel[i] < self.worst_rel:
            self.worst_rel = float(rel[i])
            self.worst_margin = float(margin[i])
            self.worst_sample = [np.asarray(s[i]).ravel().tolist() for s in samples]
        for k, row in enumerate(self.shells):
            sel = label == k
            if sel.any():
                row[0] += int(sel.sum())
                row[1] += int(bad[sel].sum())
                row[2] = min(row[2], float(rel[sel].min()))
        if ratio is not None and ratio.size:
            self.ratio = min(self.ratio, float(np.min(ratio)))

    def merge(self, other):
        self.samples += other.samples
        self.violations += other.violations
        self.tight += other.tight
        if other.worst_rel < self.worst_rel:
            self.worst_rel = other.worst_rel
            self.worst_margin = other.worst_margin
            self.worst_sample = other.worst_sample
        for row, o in zip(self.shells, other.shells):
            row[0] += o[0]
            row[1] += o[1]
            row[2] = min(row[2], o[2])
        self.ratio = min(self.ratio, other.ratio)


def _safe_ratio(num, den):
    ok = den > 1e-200
    return num[ok] / den[ok]


def _run_chunk(campaign, lemma, p, n, size, rng):
    smp = _Sampler(campaign, rng)
    acc = _Acc(len(campaign.shells))
    if lemma == "algebraic":
        a, la = smp.magnitudes(size)
        b, _ = smp.magnitudes(size)
        lhs, rhs = algebraic_terms(a, b, p)
        acc.add(lhs, rhs, la, (np.stack([a, b], axis=-1),))
    elif lemma == "h_monotonicity":
        xi, eta, lab = smp.pairs(size, n)
        lhs, rhs = monotonicity_terms(xi, eta, p)
        acc.add(lhs, rhs, lab, (xi, eta), ratio=_safe_ratio(lhs, rhs * p * p / 4.0))
    elif lemma == "h_lipschitz":
        xi, eta, lab = smp.pairs(size, n)
        bound, value = lipschitz_terms(xi, eta, p)
        acc.add(bound, value, lab, (xi, eta))
    elif lemma == "mon_eta":
        xi, eta, lab = smp.pairs(size, n, partner_lower=1.0)
        lhs, rhs = mon_eta_terms(xi, eta, p)
        acc.add(lhs, rhs, lab, (xi, eta))
    elif lemma == "pair_ellipticity":
        xi, eta, lab = smp.pairs(size, n)
        const = c_star(p) * campaign.c_star_scale
        lhs, rhs = pair_ellipticity_terms(xi, eta, p, const)
        acc.add(lhs, rhs, lab, (xi, eta), ratio=_safe_ratio(lhs, rhs / const))
    elif lemma == "eigen_sandwich":
        z, lab = smp.vectors(size, n)
        zeta, _ = smp.vectors(size, n)
        q, lo, hi = eigen_sandwich_terms(z, zeta, p)
        # both sides at once: the smaller of the two margins
        lower_first = (q - lo) / (1 + abs(q) + abs(lo)) <= (hi - q) / (1 + abs(hi) + abs(q))
        greater = np.where(lower_first, q, hi)
        lesser = np.where(lower_first, lo, q)
        acc.add(greater, lesser, lab, (z, zeta))
    elif lemma == "teps_nonneg":
        r, lab = smp.magnitudes(size)
        sign = np.where(rng.random(size) < 0.5, -1.0, 1.0)
        beta = rng.random(size)
        beta[rng.random(size) < 0.1] = 1.0
        beta[rng.random(size) < 0.05] = 0.0
        eps = np.exp(rng.uniform(math.log(1e-8), math.log(1e-1), size))
        # put a share of the points inside the transition layer of G_eps
        layer = rng.random(size) < 0.3
        r = np.where(layer, 1.0 + eps * (1.0 + 1.5 * rng.random(size)), r)
        s = sign * r
        sigma = rng.random(size) * (1.0 - beta) / 2.0
        sigma = np.where(beta == 1.0, 0.0, sigma)
        t, absorbed = teps_terms(s, beta, eps, sigma)
        acc.add(t, absorbed, lab, (np.stack([s, beta, eps, sigma], axis=-1),))
    else:  # pragma: no cover - guarded by SampleCampaign
        raise InvalidInputError(lemma)
    return acc


def _reference_constant(lemma, p, campaign):
    if lemma == "h_monotonicity":
        return 4.0 / (p * p)
    if lemma == "pair_ellipticity":
        return c_star(p) * campaign.c_star_scale
    return None


def run_campaign(campaign: SampleCampaign):
    """Run every requested lemma for every ``(p, n)``; one report per cell.

    Chunk ``k`` of cell ``(lemma, p, n)`` draws from the stream keyed by
    ``(seed, lemma index, p index, n index, k)``, so results do not depend on
    the thread count.
    """
    jobs = []
    for li, lemma in enumerate(campaign.lemmas):
        lemma_id = LEMMAS.index(lemma)
        for pi, p in enumerate(campaign.p_values):
            for ni, n in enumerate(campaign.dimensions):
                nchunks = -(-int(campaign.count) // campaign.chunk_size)
                for k in range(nchunks):
                    size = min(campaign.chunk_size, int(campaign.count) - k * campaign.chunk_size)
                    key = (int(campaign.seed), lemma_id, pi, ni, k)
                    jobs.append((li, pi, ni, k, lemma, float(p), int(n), size, key))

    def work(job):
        _, _, _, _, lemma, p, n, size, key = job
        rng = np.random.default_rng(np.random.SeedSequence(list(key)))
        return _run_chunk(campaign, lemma, p, n, size, rng)

    if campaign.threads > 1:
        with ThreadPoolExecutor(max_workers=campaign.threads) as ex:
            results = list(ex.map(work, jobs))
    else:
        results = [work(j) for j in jobs]

    cells = {}
    for job, acc in zip(jobs, results):
        cell = job[:3]
        if cell in cells:
            cells[cell][1].merge(acc)
        else:
            cells[cell] = (job, acc)

    labels = ["bulk"] + [f"shell_{d:g}" for d, _ in campaign.shells]
    reports = []
    for cell in sorted(cells):
        job, acc = cells[cell]
        lemma, p, n = job[4], job[5], job[6]
        ref = _reference_constant(lemma, p, campaign)
        emp = None
        if ref is not None and math.isfinite(acc.ratio):
            emp = acc.ratio
        reports.append(
            InequalityReport(
                lemma=lemma,
                p=p,
                n=n,
                samples=acc.samples,
                violations=acc.violations,
                tight=acc.tight,
                worst_margin=acc.worst_margin,
                worst_relative_margin=acc.worst_rel,
                worst_sample=acc.worst_sample,
                empirical_constant=emp,
                reference_constant=ref,
                shells={
                    lab: {"samples": row[0], "violations": row[1], "worst_relative_margin": row[2]}
                    for lab, row in zip(labels, acc.shells)
                },
            )
        )
    return reports
