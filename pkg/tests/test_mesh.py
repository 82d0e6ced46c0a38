from pathlib import Path

import numpy as np
import pytest

from widedeg.errors import InvalidInputError
from widedeg.mesh import (
    GradField,
    ScalarField,
    TriMesh,
    build_mesh,
    divergence_form,
    element_measure,
    gradient,
    interpolate,
    stiffness_matrix,
    write_tables,
)

UNIT = (0.0, 1.0, 0.0, 1.0)


def dense_stiffness(mesh):
    """Element-by-element assembly from vertex coordinates alone."""
    K = np.zeros((mesh.n_nodes, mesh.n_nodes))
    for tri in mesh.triangles:
        P = mesh.nodes[tri]
        M = np.column_stack([np.ones(3), P])
        C = np.linalg.inv(M)[1:]  # gradients of the barycentric coordinates
        area = 0.5 * abs(np.linalg.det(M))
        K[np.ix_(tri, tri)] += area * C.T @ C
    return K


class TestConstruction:
    def test_counts(self):
        m = build_mesh(UNIT, 2, 2)
        assert (m.n_nodes, m.n_triangles) == (9, 8)

    @pytest.mark.parametrize("nx,ny", [(1, 1), (1, 4), (3, 0), (2.5, 2)])
    def test_too_coarse(self, nx, ny):
        with pytest.raises(InvalidInputError):
            build_mesh(UNIT, nx, ny)

    @pytest.mark.parametrize("bounds", [(0, 0, 0, 1), (1, 0, 0, 1), (0, 1, 0, np.nan)])
    def test_bad_bounds(self, bounds):
        with pytest.raises(InvalidInputError):
            build_mesh(bounds, 4, 4)

    @pytest.mark.parametrize("diag", ["ne", "nw"])
    @pytest.mark.parametrize("nx,ny", [(2, 2), (3, 7), (16, 5)])
    def test_invariants(self, diag, nx, ny):
        m = TriMesh((1.0, 2.5, -0.5, 0.25), nx, ny, diag)
        assert np.all(m.areas > 0)
        assert m.triangles.min() == 0 and m.triangles.max() == m.n_nodes - 1
        assert m.areas.sum() == pytest.approx(1.5 * 0.75, rel=1e-12)
        x, y = m.nodes.T
        on_edge = np.isclose(x, 1.0) | np.isclose(x, 2.5) | np.isclose(y, -0.5) | np.isclose(y, 0.25)
        np.testing.assert_array_equal(m.boundary, on_edge)
        assert m.h == pytest.approx(np.hypot(1.5 / nx, 0.75 / ny))
        assert m.node_weights.sum() == pytest.approx(m.area)

    def test_edges(self):
        m = TriMesh(UNIT, 3, 3)
        # interior edges have two triangles, boundary edges one
        n_boundary_edges = int(np.sum(m.edge_triangles[:, 1] < 0))
        assert n_boundary_edges == 12
        assert len(m.edges) == 3 * 3 * 3 + 3 + 3

    def test_refinement_nests(self):
        m = TriMesh(UNIT, 4, 3)
        f = m.refine()
        fine = {tuple(np.round(p, 14)) for p in f.nodes}
        assert all(tuple(np.round(p, 14)) in fine for p in m.nodes)

    def test_read_only(self):
        m = TriMesh(UNIT, 2, 2)
        with pytest.raises(ValueError):
            m.nodes[0, 0] = 3.0


class TestFields:
    def test_value_checks(self):
        m = TriMesh(UNIT, 2, 2)
        with pytest.raises(InvalidInputError):
            ScalarField(m, np.zeros(5))
        with pytest.raises(InvalidInputError):
            ScalarField(m, np.full(9, np.inf))
        with pytest.raises(InvalidInputError):
            GradField(m, np.zeros((3, 2)))

    @pytest.mark.parametrize("diag", ["ne", "nw"])
    def test_affine_exact(self, diag):
        m = TriMesh((0.0, 2.0, 0.0, 1.0), 7, 5, diag)
        g = gradient(interpolate(m, lambda x, y: 3 * x - 2 * y + 0.5))
        np.testing.assert_allclose(g.values, np.tile([3.0, -2.0], (m.n_triangles, 1)), atol=1e-13)

    def test_constant(self):
        m = TriMesh(UNIT, 5, 5)
        assert np.all(gradient(interpolate(m, lambda x, y: 0 * x + 4.0)).values == 0)

    def test_linearity(self, rng):
        m = TriMesh(UNIT, 6, 4)
        u, v = ScalarField(m, rng.normal(size=m.n_nodes)), ScalarField(m, rng.normal(size=m.n_nodes))
        lhs = gradient(2.5 * u + (-1.5) * v).values
        rhs = 2.5 * gradient(u).values - 1.5 * gradient(v).values
        np.testing.assert_allclose(lhs, rhs, rtol=1e-13, atol=1e-13)

    def test_gradient_first_order(self):
        errs = []
        for n in (8, 16, 32):
            m = TriMesh(UNIT, n, n)
            g = gradient(interpolate(m, lambda x, y: x * x)).values
            c = m.centroids
            # exact gradient sampled at the vertices bounds the per-triangle error
            exact = np.stack([2 * m.nodes[m.triangles][..., 0], 0 * c[:, None, 0].repeat(3, 1)], -1)
            errs.append(np.abs(g[:, None, :] - exact).max())
        rates = np.log2(np.array(errs[:-1]) / errs[1:])
        assert np.all(rates > 0.9)


class TestDivergence:
    def test_constant_flux(self):
        m = TriMesh((1.0, 2.0, 0.0, 1.0), 6, 6)
        r = divergence_form(m, np.tile([0.3, -1.7], (m.n_triangles, 1)))
        assert np.abs(r[m.interior]).max() < 1e-13

    def test_zero_flux(self):
        m = TriMesh(UNIT, 3, 3)
        assert np.all(divergence_form(m, np.zeros((m.n_triangles, 2))) == 0)

    def test_adjoint(self, rng):
        m = TriMesh(UNIT, 5, 7)
        w = rng.normal(size=(m.n_triangles, 2))
        u = ScalarField(m, rng.normal(size=m.n_nodes))
        lhs = divergence_form(m, w) @ u.values
        rhs = np.sum(m.areas * np.einsum("td,td->t", w, gradient(u).values))
        assert lhs == pytest.approx(rhs, rel=1e-12)

    def test_matches_independent_stiffness(self, rng):
        m = TriMesh((0.0, 1.5, 0.0, 1.0), 6, 4, "nw")
        u = ScalarField(m, rng.normal(size=m.n_nodes))
        K = dense_stiffness(m)
        np.testing.assert_allclose(divergence_form(m, gradient(u)), K @ u.values, atol=1e-12)
        np.testing.assert_allclose(stiffness_matrix(m).toarray(), K, atol=1e-12)

    @pytest.mark.parametrize("n", [4, 16])
    def test_laplacian_spectrum(self, n):
        m = TriMesh(UNIT, n, n)
        K = stiffness_matrix(m).toarray()
        np.testing.assert_allclose(K, K.T, atol=1e-14)
        ev = np.linalg.eigvalsh(K)
        assert ev[0] == pytest.approx(0.0, abs=1e-10)
        assert ev[1] > 1e-6
        np.testing.assert_allclose(K @ np.ones(m.n_nodes), 0.0, atol=1e-12)


class TestMeasure:
    def test_examples(self):
        m = TriMesh(UNIT, 8, 8)
        assert element_measure(m, np.ones(m.n_triangles, bool)) == pytest.approx(1.0)
        assert element_measure(m, lambda mesh: np.zeros(mesh.n_triangles, bool)) == 0.0
        norms = gradient(interpolate(m, lambda x, y: x / 2)).norms
        assert element_measure(m, norms <= 1) == pytest.approx(1.0)

    def test_subregion(self):
        m = TriMesh(UNIT, 8, 8)
        assert element_measure(m, True, (0.25, 0.75, 0.25, 0.75)) == 0.25

    def test_region_outside(self):
        m = TriMesh(UNIT, 4, 4)
        with pytest.raises(InvalidInputError):
            element_measure(m, True, (0.5, 1.5, 0.0, 1.0))


def test_write_tables(tmp_path: Path):
    m = TriMesh(UNIT, 2, 3)
    u = interpolate(m, lambda x, y: x + y)
    write_tables(m, tmp_path, {"u": u})
    nodes = (tmp_path / "nodes.txt").read_text().splitlines()
    assert nodes[0] == "# format_version=1"
    assert nodes[1] == "# columns: node x y boundary"
    data = np.loadtxt(tmp_path / "nodes.txt")
    np.testing.assert_allclose(data[:, 1:3], m.nodes)
    tris = np.loadtxt(tmp_path / "triangles.txt", dtype=int)
    np.testing.assert_array_equal(tris[:, 1:], m.triangles)
    vals = np.loadtxt(tmp_path / "u.txt")
    np.testing.assert_allclose(vals[:, 1], u.values)
