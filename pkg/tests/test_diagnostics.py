import math

import numpy as np
import pytest
from scipy import integrate

from widedeg import diagnostics as dg
from widedeg.errors import InvalidInputError, PreconditionError
from widedeg.mesh import ScalarField, TriMesh, interpolate
from widedeg.solver import RhsSpec, SolveConfig

DOMAIN = (1.0, 2.0, 0.0, 1.0)
EXP_RHS = RhsSpec(func=lambda x, y, s: 2 + np.exp(-s), positive=True, nonincreasing=True,
                  lipschitz_s=1.0, name="2+exp(-s)")


def polar_oracle(alpha, half=0.5):
    """Potential of the indicator of a square at its center, by symmetry over eight wedges."""
    def inner(theta):
        R = half / math.cos(theta)
        return R**alpha / alpha
    val, _ = integrate.quad(inner, 0.0, math.pi / 4, epsabs=1e-14, epsrel=1e-13)
    return 8 * val


class TestKernel:
    def test_polar_oracle_closed_form(self):
        assert polar_oracle(1.0) == pytest.approx(4 * math.log(1 + math.sqrt(2)), rel=1e-12)

    @pytest.mark.parametrize("alpha", [0.5, 1.0, 1.5])
    def test_riesz_center(self, alpha):
        m = TriMesh((0, 1, 0, 1), 16, 16)
        val = dg.riesz_potential(m, 1.0, alpha, (0.5, 0.5))
        assert val == pytest.approx(polar_oracle(alpha), rel=1e-3)

    def test_riesz_off_center_vs_dblquad(self):
        m = TriMesh((0, 1, 0, 1), 8, 8)
        x = np.array([0.3, 0.8])
        # split at x so the integrable singularity sits on a corner
        ref = 0.0
        for xa, xb in ((0, x[0]), (x[0], 1)):
            for ya, yb in ((0, x[1]), (x[1], 1)):
                v, _ = integrate.dblquad(lambda yy, xx: np.hypot(xx - x[0], yy - x[1]) ** -1.0, xa, xb, ya, yb,
                                         epsabs=1e-10, epsrel=1e-10)
                ref += v
        assert dg.riesz_potential(m, 1.0, 1.0, x) == pytest.approx(ref, rel=1e-3)

    def test_kappa_zero_is_exact(self):
        cells = dg.box_cells([(0, 0.5)] * 3, (3, 3, 3))
        assert dg.kernel_integral([0.1, 0.2, 0.3], cells, 2.0, 0.0) == pytest.approx(0.25, rel=1e-14)

    def test_monotone_in_gamma_3d(self):
        # every point of the box lies within distance < 1 of the base point, so larger gamma grows the integral
        cells = dg.box_cells([(0, 0.5)] * 3, (3, 3, 3))
        x = [0.25, 0.25, 0.25]
        vals = [dg.kernel_integral(x, cells, 1.0, g) for g in (0.0, 0.5, 1.0, 2.0, 2.9)]
        assert all(a < b for a, b in zip(vals, vals[1:]))

    def test_kappa_range(self):
        cells = dg.box_cells([(0, 1)] * 2, (2, 2))
        with pytest.raises(PreconditionError):
            dg.kernel_integral([0.5, 0.5], cells, 1.0, 2.0)
        with pytest.raises(PreconditionError):
            dg.riesz_potential(TriMesh((0, 1, 0, 1), 2, 2), 1.0, 2.0, (0.5, 0.5))

    def test_lm_constant_preconditions(self):
        m = TriMesh((0, 1, 0, 1), 4, 4)
        with pytest.raises(PreconditionError):
            dg.riesz_lm_constant(m, 1.0, 1.0, 2.0, 2)  # s = n/alpha
        with pytest.raises(PreconditionError):
            dg.riesz_lm_constant(m, 1.0, 1.0, 1.5, 7)  # m > r = 6

    def test_kernel_params(self):
        with pytest.raises(PreconditionError):
            dg.KernelParams(gamma=2.0)
        assert dg.KernelParams(lattice=3).base_points((0, 1, 0, 2)).shape == (9, 2)


class TestDegeneracy:
    def test_monotone_in_theta(self, rng):
        m = TriMesh((0, 1, 0, 1), 12, 12)
        u = ScalarField(m, rng.normal(size=m.n_nodes) * 0.2)
        meas = dg.degeneracy_measure(u, thresholds=(2.0, 0.5, 1.0, 0.1, 4.0))
        thetas, areas = zip(*meas)
        assert list(thetas) == sorted(thetas)
        assert all(a <= b for a, b in zip(areas, areas[1:]))

    def test_flat_data(self):
        m = TriMesh((0, 1, 0, 1), 8, 8)
        u = interpolate(m, lambda x, y: x / 2)
        region = (0.25, 0.75, 0.25, 0.75)
        assert dg.degeneracy_measure(u, region=region)[0][1] == 0.25

    def test_default_thresholds(self):
        m = TriMesh((0, 1, 0, 1), 8, 8)
        lo, mid, hi = dg.default_thresholds(m)
        assert mid == 1.0 and lo == pytest.approx(1 - math.sqrt(m.h))


class TestInverseWeight:
    def test_t_zero_is_measure(self, manufactured):
        u, _ = manufactured(3, 16)
        region = (1.25, 1.75, 0.25, 0.75)
        res = dg.inverse_weight_integral(u, 3, 0.0, region=region)
        assert res.value == pytest.approx(0.25, rel=1e-12) and not res.divergent

    def test_flat_is_divergent(self):
        m = TriMesh((0, 1, 0, 1), 8, 8)
        u = interpolate(m, lambda x, y: x / 2)
        res = dg.inverse_weight_integral(u, 3, 1 / 3)
        assert res.divergent and math.isinf(res.value)
        assert res.to_record()["value"] == "inf"
        floored = dg.inverse_weight_integral(u, 3, 1 / 3, eps_floor=0.01)
        assert floored.value == pytest.approx(0.01**-1.0, rel=1e-12)

    def test_preconditions(self):
        m = TriMesh((0, 1, 0, 1), 4, 4)
        u = interpolate(m, lambda x, y: 3 * x)
        with pytest.raises(PreconditionError):
            dg.inverse_weight_integral(u, 3, 0.5)
        with pytest.raises(PreconditionError):
            dg.inverse_weight_integral(u, 3, 0.1, eps_floor=-1)
        with pytest.raises(PreconditionError):
            dg.inverse_weight_integral(u, 3, 0.1, gamma=2.0)

    def test_eps_floor_ordering(self, manufactured):
        u, _ = manufactured(3, 16)
        vals = [dg.inverse_weight_integral(u, 3, 1 / 3, eps_floor=e).value for e in (1e-1, 1e-2, 1e-4)]
        assert vals[0] <= vals[1] <= vals[2]


class TestSecondOrder:
    def test_affine_gives_zero(self):
        m = TriMesh(DOMAIN, 8, 8, "nw")
        u = interpolate(m, lambda x, y: 3 * x - 2 * y)
        assert dg.second_order_integrals(u, 3) == (0.0, 0.0)
        assert dg.hdiff_seminorms(u, 3) == (0.0, 0.0)

    def test_manufactured_limit(self):
        vals = []
        for n in (16, 32, 64):
            m = TriMesh(DOMAIN, n, n)
            vals.append(dg.second_order_integrals(interpolate(m, lambda x, y: -x * x), 2)[1])
        assert abs(vals[-1] - 8) < abs(vals[0] - 8)
        assert vals[-1] == pytest.approx(8.0, rel=0.05)

    def test_beta_monotone(self):
        # where (|Du| - 1)_+ >= 1, raising beta lowers the weight pointwise
        m = TriMesh((2.0, 3.0, 0.0, 1.0), 16, 16)
        u = interpolate(m, lambda x, y: -x * x)
        I2 = [dg.second_order_integrals(u, 3, beta=b)[1] for b in (0.0, 0.5, 1.0)]
        assert I2[0] >= I2[1] >= I2[2] > 0

    def test_preconditions(self):
        m = TriMesh(DOMAIN, 4, 4)
        u = interpolate(m, lambda x, y: -x * x)
        with pytest.raises(PreconditionError):
            dg.second_order_integrals(u, 2, beta=1.5)
        with pytest.raises(PreconditionError):
            dg.second_order_integrals(u, 2, gamma=0.5)

    @pytest.mark.parametrize("p", [2, 3, 4])
    def test_hdiff_budget_holds(self, p):
        m = TriMesh(DOMAIN, 16, 16)
        u = interpolate(m, lambda x, y: -x * x)
        s1, s2 = dg.hdiff_seminorms(u, p)
        c, sharp = dg.hdiff_budget(u, p)
        assert s2**2 <= sharp * s1**2 * (1 + 1e-12)
        assert s2**2 <= c * s1**2 * (1 + 1e-12)


class TestCompare:
    def setup_method(self):
        self.mesh = TriMesh(DOMAIN, 12, 12)
        self.g = interpolate(self.mesh, lambda x, y: -x * x)

    def test_identical_data(self):
        v = dg.compare(self.g, self.g, EXP_RHS, 2)
        assert v.passed and abs(v.min_diff) <= 1e-12 and v.tol_cmp == pytest.approx(1e-7)

    def test_translation(self):
        v = dg.compare(self.g, self.g + 1.0, RhsSpec.constant(2.0), 2)
        assert v.passed
        assert v.min_diff == pytest.approx(1.0, abs=1e-6) and v.max_diff == pytest.approx(1.0, abs=1e-6)

    def test_ordered_pair(self):
        x, y = self.mesh.nodes.T
        g2 = ScalarField(self.mesh, self.g.values + 0.3 * (1 + np.sin(3 * y)))
        v = dg.compare(self.g, g2, EXP_RHS, 3, c_cmp=10)
        assert v.passed and v.min_diff >= -10 * self.mesh.cell_size
        rec = v.to_record()
        assert rec["kind"] == "compare" and rec["violations"] == 0

    def test_antisymmetry(self):
        a = dg.compare(self.g, self.g + 0.5, EXP_RHS, 2)
        b = dg.compare(self.g + 0.5, self.g, EXP_RHS, 2, check_order=False)
        assert a.min_diff == pytest.approx(-b.max_diff, abs=1e-12)
        assert not b.passed

    def test_preconditions(self):
        with pytest.raises(PreconditionError):
            dg.compare(self.g + 0.5, self.g, EXP_RHS, 2)
        with pytest.raises(PreconditionError):
            dg.compare(self.g, self.g + 1, RhsSpec(func=lambda x, y, s: 1 + 0 * s), 2)
        other = interpolate(TriMesh(DOMAIN, 12, 12), lambda x, y: -x * x)
        with pytest.raises(InvalidInputError):
            dg.compare(self.g, other, EXP_RHS, 2)


class TestSobolev:
    def test_q_star(self):
        assert dg.SobolevParams(1, 0, 3).q_star == pytest.approx(6.0)

    @pytest.mark.parametrize(
        "t,gamma,q,tag",
        [(1, 0, 2.0, "(i)"), (1, 0, 1.5, "(i)"), (1, 0, 4.0, "(iii)"), (0.5, 1, 2.5, "(ii)")],
    )
    def test_conditions(self, t, gamma, q, tag):
        with pytest.raises(PreconditionError, match=re_escape(tag)):
            dg.SobolevParams(t, gamma, q)

    def test_test_set(self):
        m = TriMesh(DOMAIN, 8, 8)
        tests = dg.sobolev_test_functions(m)
        assert len(tests) == 10
        assert all(np.all(u.values[m.boundary] == 0) for u in tests)

    def test_scaling_invariance(self):
        m = TriMesh(DOMAIN, 8, 8)
        params = dg.SobolevParams(1, 0, 3)
        tests = dg.sobolev_test_functions(m)[:3]
        a = dg.sobolev_check(tests, 1.0, params).ratios
        b = dg.sobolev_check([3.5 * u for u in tests], 1.0, params).ratios
        np.testing.assert_allclose(a, b, rtol=1e-12)

    def test_weight_scaling(self):
        # rho -> c rho divides ratios by c^(1/q) and K by c^t
        m = TriMesh(DOMAIN, 8, 8)
        params = dg.SobolevParams(1, 0, 3)
        tests = dg.sobolev_test_functions(m)[:2]
        a = dg.sobolev_check(tests, 1.0, params)
        b = dg.sobolev_check(tests, 8.0, params)
        np.testing.assert_allclose(np.array(a.ratios) / 2.0, b.ratios, rtol=1e-12)
        assert b.K == pytest.approx(a.K / 8, rel=1e-12)

    def test_fitted_budget(self):
        m = TriMesh(DOMAIN, 8, 8)
        params = dg.SobolevParams(1, 0, 3)
        c_n = dg.fit_sobolev_constant(m, params)
        rep = dg.sobolev_check(dg.sobolev_test_functions(m), 1.0, params, c_n=c_n)
        assert rep.max_ratio == pytest.approx(rep.budget, rel=1e-12)

    def test_rejects_bad_tests(self):
        m = TriMesh(DOMAIN, 4, 4)
        params = dg.SobolevParams(1, 0, 3)
        with pytest.raises(InvalidInputError):
            dg.sobolev_check([], 1.0, params)
        with pytest.raises(PreconditionError):
            dg.sobolev_check([interpolate(m, lambda x, y: x)], 1.0, params)
        with pytest.raises(PreconditionError):
            dg.sobolev_check(dg.sobolev_test_functions(m)[:1], 0.0, params)


def re_escape(s):
    import re
    return re.escape(s)


class TestTrends:
    def test_ratios(self):
        assert dg.trend_ratios([1, 2, 3]) == [2.0, 1.5]
        assert math.isnan(dg.trend_ratios([0, 1])[0])

    def test_observed_order(self):
        assert dg.observed_order([4.0, 1.0], [0.5, 0.25]) == [pytest.approx(2.0)]

    def test_max_norm_error_quadratic(self):
        m = TriMesh(DOMAIN, 8, 8)
        u = interpolate(m, lambda x, y: -x * x)
        # interpolation error of x^2 along a mesh edge peaks at (h/2)^2
        assert dg.max_norm_error(u, lambda x, y: -x * x) == pytest.approx((1 / 8) ** 2 / 4, rel=1e-9)

    def test_regularity_report(self, manufactured):
        u, _ = manufactured(3, 16)
        rep = dg.regularity_report(u, 3, region=(1.25, 1.75, 0.25, 0.75))
        rec = rep.to_record()
        assert rec["kind"] == "regularity" and len(rec["inverse_weight"]) == 6
        assert rep.s2**2 <= rep.budget * rep.s1**2 * (1 + 1e-12)
