import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from widedeg.errors import DegeneratePointError, DomainError, InvalidInputError
from widedeg.vector_field import (
    ExponentParams,
    eigen_bounds,
    ellipticity_ratio,
    energy_density,
    energy_density_derivative,
    h_gamma,
    jacobian_h,
)


def fd_jacobian(z, params, step=1e-6):
    """Central differences of h_gamma, column j = d H / d z_j."""
    z = np.asarray(z, dtype=float)
    n = z.size
    J = np.empty((n, n))
    for j in range(n):
        e = np.zeros(n)
        e[j] = step
        J[:, j] = (h_gamma(z + e, params) - h_gamma(z - e, params)) / (2 * step)
    return J


class TestParams:
    def test_default_gamma(self):
        assert ExponentParams(3).gamma == 2
        assert ExponentParams.half(3).gamma == 1.5

    @pytest.mark.parametrize("p,gamma", [(1.5, None), (3, 0.0), (3, -1.0), (np.inf, None)])
    def test_rejects(self, p, gamma):
        with pytest.raises(InvalidInputError):
            ExponentParams(p, gamma)

    def test_generic_gamma_allowed(self):
        assert ExponentParams(2, 0.3).gamma == 0.3


class TestHGamma:
    def test_examples(self):
        assert h_gamma([0.0, 0.0], ExponentParams(2, 1)).tolist() == [0.0, 0.0]
        assert h_gamma([0.5, 0.3], ExponentParams(3, 2)).tolist() == [0.0, 0.0]
        np.testing.assert_allclose(h_gamma([3.0, 4.0], ExponentParams(3, 2)), [9.6, 12.8], rtol=1e-15)

    def test_nonfinite(self):
        with pytest.raises(InvalidInputError):
            h_gamma([np.nan, 1.0], ExponentParams(2))

    def test_scalar_rejected(self):
        with pytest.raises(InvalidInputError):
            h_gamma(2.0, ExponentParams(2))

    @pytest.mark.parametrize("gap", [1e-3, 1e-6, 1e-9])
    @pytest.mark.parametrize("gamma", [0.5, 1.0, 2.0])
    def test_continuity_at_shell(self, gap, gamma):
        d = np.array([0.6, -0.8])
        v = h_gamma((1 + gap) * d, ExponentParams(2, gamma))
        assert np.linalg.norm(v) == pytest.approx(gap**gamma, rel=1e-6)

    @given(st.lists(st.floats(-50, 50), min_size=2, max_size=5), st.floats(0.1, 4))
    def test_modulus(self, xi, gamma):
        xi = np.array(xi)
        r = np.linalg.norm(xi)
        out = h_gamma(xi, ExponentParams(2, gamma))
        assert np.linalg.norm(out) == pytest.approx(max(r - 1, 0) ** gamma, rel=1e-12, abs=1e-300)

    def test_stacked(self, rng):
        xi = rng.normal(size=(7, 4, 3)) * 3
        out = h_gamma(xi, ExponentParams(3))
        assert out.shape == xi.shape
        np.testing.assert_array_equal(out[2, 1], h_gamma(xi[2, 1], ExponentParams(3)))

    def test_monotone_map(self, rng):
        for p in (2, 2.5, 4):
            xi, eta = rng.normal(size=(2, 5000, 3)) * 2
            par = ExponentParams(p)
            d = np.einsum("ij,ij->i", h_gamma(xi, par) - h_gamma(eta, par), xi - eta)
            assert d.min() >= -1e-12


class TestEnergy:
    def test_examples(self):
        assert energy_density(1.0, ExponentParams(3)) == 0
        assert energy_density(2.0, ExponentParams(2)) == 0.5
        assert energy_density(3.0, ExponentParams(3)) == pytest.approx(8 / 3, rel=1e-15)

    def test_negative(self):
        with pytest.raises(InvalidInputError):
            energy_density(-0.1, ExponentParams(2))

    @pytest.mark.parametrize("p", [2, 2.5, 3, 6])
    def test_derivative_fd(self, p):
        par = ExponentParams(p)
        t = np.array([0.3, 1.2, 1.7, 3.0, 11.0])
        step = 1e-6
        fd = (energy_density(t + step, par) - energy_density(t - step, par)) / (2 * step)
        np.testing.assert_allclose(energy_density_derivative(t, par), fd, rtol=1e-7, atol=1e-9)

    def test_convex_nondecreasing(self):
        t = np.linspace(0, 5, 501)
        g = energy_density(t, ExponentParams(3))
        assert np.all(np.diff(g) >= 0)
        assert np.all(np.diff(g, 2) >= -1e-15)


class TestJacobian:
    def test_example_p2(self):
        J = jacobian_h([2.0, 0.0], ExponentParams(2))
        np.testing.assert_allclose(J, np.diag([1.0, 0.5]), atol=1e-15)
        np.testing.assert_allclose(fd_jacobian([2.0, 0.0], ExponentParams(2)), J, atol=1e-6)

    def test_example_p3(self):
        par = ExponentParams(3)
        ev = np.linalg.eigvalsh(fd_jacobian([2.0, 0.0], par))
        np.testing.assert_allclose(sorted(ev), [0.5, 2.0], atol=1e-6)
        np.testing.assert_allclose(np.linalg.eigvalsh(jacobian_h([2.0, 0.0], par)), [0.5, 2.0])

    def test_inside_ball_and_kink(self):
        np.testing.assert_array_equal(jacobian_h([0.5, 0.0], ExponentParams(3)), np.zeros((2, 2)))
        np.testing.assert_array_equal(jacobian_h([1.0, 0.0], ExponentParams(2)), np.zeros((2, 2)))
        np.testing.assert_array_equal(jacobian_h([0.0, 1.0], ExponentParams(4)), np.zeros((2, 2)))

    def test_origin(self):
        with pytest.raises(DomainError):
            jacobian_h([0.0, 0.0, 0.0], ExponentParams(2))

    def test_symmetric(self, rng):
        J = jacobian_h(rng.normal(size=(50, 4)) * 3, ExponentParams(2.7))
        np.testing.assert_allclose(J, np.swapaxes(J, -1, -2), atol=0)

    @pytest.mark.parametrize("n", [2, 3, 5])
    def test_fd_agreement_dims(self, rng, n):
        par = ExponentParams(3.5)
        for _ in range(20):
            d = rng.normal(size=n)
            z = d / np.linalg.norm(d) * rng.uniform(1.05, 20)
            J = jacobian_h(z, par)
            np.testing.assert_allclose(J, fd_jacobian(z, par, 1e-6 * np.linalg.norm(z)), rtol=1e-5,
                                       atol=1e-5 * np.abs(J).max())


class TestBounds:
    def test_examples(self):
        assert eigen_bounds([2.0, 0.0], ExponentParams(3)) == (0.5, 2.0)
        assert eigen_bounds([1.0, 0.0], ExponentParams(3.3)) == (0.0, 0.0)
        lo, hi = eigen_bounds([3.0, 4.0], ExponentParams(2))
        assert lo == pytest.approx(0.8) and hi == 1.0

    def test_origin(self):
        with pytest.raises(DomainError):
            eigen_bounds([0.0, 0.0], ExponentParams(2))

    def test_order(self, rng):
        z = rng.normal(size=(1000, 3)) * 5
        lo, hi = eigen_bounds(z, ExponentParams(2.5))
        r = np.linalg.norm(z, axis=1)
        assert np.all(lo[r > 1] <= hi[r > 1])

    def test_ratio_examples(self):
        assert ellipticity_ratio([2.0, 0.0], ExponentParams(2)) == 2
        assert ellipticity_ratio([2.0, 0.0], ExponentParams(3)) == 4
        assert ellipticity_ratio([1 + 1e-6, 0.0], ExponentParams(2)) == pytest.approx(1e6, rel=1e-5)

    def test_ratio_degenerate(self):
        with pytest.raises(DegeneratePointError):
            ellipticity_ratio([0.6, 0.8], ExponentParams(2))

    @settings(max_examples=50)
    @given(st.floats(1.001, 100), st.floats(2, 6))
    def test_ratio_is_hi_over_lo(self, r, p):
        lo, hi = eigen_bounds([r, 0.0], ExponentParams(p))
        assert ellipticity_ratio([r, 0.0], ExponentParams(p)) == pytest.approx(hi / lo, rel=1e-9)
