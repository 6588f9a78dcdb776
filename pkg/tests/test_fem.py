import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from elastinv.fem import (
    ElasticitySolver,
    FemError,
    LameField,
    SurfaceLoad,
    assemble,
    assemble_stiffness,
    isotropic_stress,
)

finite = st.floats(-1e3, 1e3, allow_nan=False)
positive = st.floats(0.1, 100.0, allow_nan=False)


class TestIsotropicStress:
    def test_identity_strain(self):
        assert np.allclose(isotropic_stress(1.0, 1.0, np.eye(2)), 4.0 * np.eye(2))

    def test_zero_strain(self):
        assert np.allclose(isotropic_stress(12.3, 4.5, np.zeros((2, 2))), 0.0)

    def test_traceless_strain_kills_lam(self):
        strain = np.array([[1.0, 2.0], [2.0, -1.0]])
        expected = np.array([[14.0, 28.0], [28.0, -14.0]])
        assert np.allclose(isotropic_stress(3.0, 7.0, strain), expected)

    @given(lam=positive, mu=positive, a=finite, b=finite, c=finite, s=st.floats(-10, 10))
    @settings(max_examples=50, deadline=None)
    def test_linear_and_symmetric(self, lam, mu, a, b, c, s):
        strain = np.array([[a, c], [c, b]])
        stress = isotropic_stress(lam, mu, strain)
        assert np.allclose(stress, stress.T)
        assert np.allclose(isotropic_stress(lam, mu, s * strain), s * stress, rtol=1e-12)


class TestLameField:
    def test_bounds_guard(self):
        with pytest.raises(ValueError):
            LameField(np.array([0.0]), np.array([1.0]), bounds=(0.1, 1.0, 0.1, 1.0))
        with pytest.raises(ValueError):
            LameField(np.array([1.0]), np.array([2.0]), bounds=(0.1, 1.0, 0.1, 1.0))
        with pytest.raises(ValueError):
            LameField(np.array([1.0]), np.array([1.0]), bounds=(0.0, 1.0, 0.1, 1.0))

    def test_mesh_size_guard(self, medium_mesh):
        field = LameField.constant(1.0, 1.0, medium_mesh.n_elements + 1)
        with pytest.raises(ValueError):
            field.check_mesh(medium_mesh)


class TestAssembly:
    def test_doubling_field_doubles_stiffness(self, medium_mesh):
        K1 = assemble_stiffness(medium_mesh, LameField.constant(3.0, 7.0, medium_mesh.n_elements))
        K2 = assemble_stiffness(medium_mesh, LameField.constant(6.0, 14.0, medium_mesh.n_elements))
        assert abs(K2 - 2 * K1).max() < 1e-12 * abs(K1).max()

    def test_stiffness_exactly_symmetric(self, medium_mesh, field_37):
        K = assemble_stiffness(medium_mesh, field_37)
        assert abs(K - K.T).max() == 0.0

    def test_energy_matches_per_element_oracle(self, coarse_mesh):
        """u^T K u against an independent per-element quadrature loop."""
        rng = np.random.default_rng(3)
        field = LameField(
            rng.uniform(1, 4, coarse_mesh.n_elements),
            rng.uniform(2, 8, coarse_mesh.n_elements),
        )
        K = assemble_stiffness(coarse_mesh, field)
        u = rng.standard_normal(2 * coarse_mesh.n_nodes)

        total = 0.0
        for e, tri in enumerate(coarse_mesh.triangles):
            pts = coarse_mesh.nodes[tri]
            d1, d2 = pts[1] - pts[0], pts[2] - pts[0]
            area = 0.5 * abs(d1[0] * d2[1] - d1[1] * d2[0])
            # gradients of P1 shape functions from the affine map
            A = np.column_stack([pts[1] - pts[0], pts[2] - pts[0]])
            grads_ref = np.array([[-1.0, -1.0], [1.0, 0.0], [0.0, 1.0]])
            grads = grads_ref @ np.linalg.inv(A)
            G = np.zeros((2, 2))
            for loc, node in enumerate(tri):
                G += np.outer(u[2 * node : 2 * node + 2], grads[loc])
            strain = 0.5 * (G + G.T)
            stress = isotropic_stress(field.lam[e], field.mu[e], strain)
            total += area * np.tensordot(stress, strain)

        assert np.isclose(u @ (K @ u), total, rtol=1e-10)

    def test_reduced_system_spd(self, coarse_mesh):
        rng = np.random.default_rng(4)
        for _ in range(3):
            field = LameField(
                rng.uniform(0.5, 5, coarse_mesh.n_elements),
                rng.uniform(0.5, 9, coarse_mesh.n_elements),
            )
            system = assemble(coarse_mesh, field, SurfaceLoad(constant=(0.1, 0.1)))
            eigs = np.linalg.eigvalsh(system.stiffness.toarray())
            assert eigs.min() > 0.0


class TestNeumannSolve:
    def test_zero_load_zero_solution(self, medium_mesh, field_37):
        sol = ElasticitySolver(medium_mesh, field_37).solve_neumann(
            SurfaceLoad(constant=(0.0, 0.0))
        )
        assert np.all(sol.displacement == 0.0)

    def test_linearity_in_load(self, medium_mesh, field_37):
        solver = ElasticitySolver(medium_mesh, field_37)
        u1 = solver.solve_neumann(SurfaceLoad(constant=(0.1, 0.1)))
        u2 = solver.solve_neumann(SurfaceLoad(constant=(0.2, 0.2)))
        assert np.allclose(u2.displacement, 2.0 * u1.displacement, rtol=1e-12, atol=1e-16)

    def test_energy_identity(self, medium_mesh, field_37):
        solver = ElasticitySolver(medium_mesh, field_37)
        g = SurfaceLoad(constant=(0.1, 0.1))
        sol = solver.solve_neumann(g)
        boundary = solver.boundary_pairing(g, sol)
        interior = solver.interior_energy(sol)
        assert abs(boundary - interior) <= 1e-10 * abs(interior)

    def test_dirichlet_nodes_exactly_zero(self, medium_mesh, field_37):
        solver = ElasticitySolver(medium_mesh, field_37)
        sol = solver.solve_neumann(SurfaceLoad(constant=(0.3, 0.5)))
        assert np.all(sol.displacement[medium_mesh.dirichlet_nodes] == 0.0)

    def test_galerkin_residual(self, medium_mesh, field_37):
        solver = ElasticitySolver(medium_mesh, field_37)
        b = solver.load_vector(SurfaceLoad(constant=(0.1, 0.2)))
        sol = solver.solve_neumann(SurfaceLoad(constant=(0.1, 0.2)))
        r = solver.K_free @ sol.displacement.ravel()[solver.free_dofs] - b[solver.free_dofs]
        assert np.linalg.norm(r) <= 1e-12 * np.linalg.norm(b[solver.free_dofs])

    def test_div_is_trace_of_strain(self, medium_mesh, field_37):
        sol = ElasticitySolver(medium_mesh, field_37).solve_neumann(
            SurfaceLoad(constant=(0.3, 0.5))
        )
        trace = np.trace(sol.per_element_strain, axis1=1, axis2=2)
        assert np.array_equal(sol.per_element_div, trace)
        assert np.array_equal(sol.per_element_strain, sol.per_element_strain.transpose(0, 2, 1))

    def test_load_size_mismatch(self, medium_mesh, field_37):
        bad = SurfaceLoad(nodal=np.zeros((3, 2)))
        with pytest.raises(ValueError):
            ElasticitySolver(medium_mesh, field_37).solve_neumann(bad)


class TestDirichletSolve:
    def test_zero_trace_zero_solution(self, medium_mesh, field_37):
        solver = ElasticitySolver(medium_mesh, field_37)
        m = len(medium_mesh.neumann_nodes)
        sol = solver.solve_dirichlet(np.zeros((m, 2)))
        assert np.all(sol.displacement == 0.0)

    def test_consistency_with_neumann(self, medium_mesh, field_37):
        solver = ElasticitySolver(medium_mesh, field_37)
        u_n = solver.solve_neumann(SurfaceLoad(constant=(0.1, 0.1)))
        u_d = solver.solve_dirichlet(u_n.trace_on_neumann)
        assert np.abs(u_d.displacement - u_n.displacement).max() <= 1e-12

    def test_scaling(self, medium_mesh, field_37):
        solver = ElasticitySolver(medium_mesh, field_37)
        trace = solver.solve_neumann(SurfaceLoad(constant=(0.1, 0.2))).trace_on_neumann
        u1 = solver.solve_dirichlet(trace)
        u3 = solver.solve_dirichlet(3.0 * trace)
        assert np.allclose(u3.displacement, 3.0 * u1.displacement, rtol=1e-12, atol=1e-16)

    def test_nonfinite_trace_rejected(self, medium_mesh, field_37):
        solver = ElasticitySolver(medium_mesh, field_37)
        m = len(medium_mesh.neumann_nodes)
        bad = np.full((m, 2), np.nan)
        with pytest.raises(FemError):
            solver.solve_dirichlet(bad)


def test_monotone_boundary_energy(medium_mesh):
    # larger parameters -> stiffer body -> smaller measured displacement energy
    g = SurfaceLoad(constant=(0.1, 0.1))
    small = ElasticitySolver(medium_mesh, LameField.constant(1.0, 1.0, medium_mesh.n_elements))
    large = ElasticitySolver(medium_mesh, LameField.constant(3.0, 7.0, medium_mesh.n_elements))
    e_small = small.boundary_pairing(g, small.solve_neumann(g))
    e_large = large.boundary_pairing(g, large.solve_neumann(g))
    assert e_large <= e_small
