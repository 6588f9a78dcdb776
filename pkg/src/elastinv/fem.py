"""P1 finite elements for 2D isotropic linear elasticity on a tagged mesh.

Displacements are piecewise linear, Lame parameters piecewise constant per
element, so strains are constant per element and all volume integrals reduce
to exact per-element sums.  Surface loads live in the space of piecewise
linear traces on the Neumann boundary that vanish at the clamped part; the
boundary mass matrix of that space converts nodal load coefficients into the
FEM right-hand side.
"""

from __future__ import annotations

from dataclasses import dataclass
from functools import cached_property

import numpy as np
import scipy.sparse as sp
import scipy.sparse.linalg as spla

from .mesh import Mesh

SOLVER_RTOL = 1e-12


class FemError(RuntimeError):
    """Solver failure or inconsistent FEM input."""


@dataclass(eq=False)
class LameField:
    """Per-element Lame parameters with admissibility bounds (a, b, c, d).

    Requires a <= lam <= b and c <= mu <= d elementwise with 0 < a, 0 < c.
    """

    lam: np.ndarray
    mu: np.ndarray
    bounds: tuple[float, float, float, float] = (1e-6, 1e6, 1e-6, 1e6)

    def __post_init__(self):
        self.lam = np.asarray(self.lam, dtype=float)
        self.mu = np.asarray(self.mu, dtype=float)
        a, b, c, d = self.bounds
        if not (0 < a <= b and 0 < c <= d):
            raise ValueError(f"invalid bounds {self.bounds}")
        if self.lam.shape != self.mu.shape or self.lam.ndim != 1:
            raise ValueError("lam and mu must be 1-d arrays of equal length")
        if self.lam.min(initial=np.inf) < a or self.lam.max(initial=-np.inf) > b:
            raise ValueError("lam outside admissible bounds")
        if self.mu.min(initial=np.inf) < c or self.mu.max(initial=-np.inf) > d:
            raise ValueError("mu outside admissible bounds")

    @classmethod
    def constant(cls, lam: float, mu: float, n_elements: int, bounds=None) -> "LameField":
        kwargs = {} if bounds is None else {"bounds": bounds}
        return cls(np.full(n_elements, float(lam)), np.full(n_elements, float(mu)), **kwargs)

    def check_mesh(self, mesh: Mesh) -> None:
        if len(self.lam) != mesh.n_elements:
            raise ValueError(
                f"field has {len(self.lam)} elements, mesh has {mesh.n_elements}"
            )


@dataclass(frozen=True)
class SurfaceLoad:
    """Surface load on the Neumann boundary.

    Either a constant 2-vector (interpolated into the nodal trace space) or
    explicit nodal values, one 2-vector per Neumann node in mesh order.
    """

    constant: tuple[float, float] | None = None
    nodal: np.ndarray | None = None

    def __post_init__(self):
        if (self.constant is None) == (self.nodal is None):
            raise ValueError("exactly one of constant/nodal must be given")
        if self.nodal is not None:
            arr = np.asarray(self.nodal, dtype=float)
            if arr.ndim != 2 or arr.shape[1] != 2 or not np.all(np.isfinite(arr)):
                raise ValueError("nodal load must be a finite (m, 2) array")
            object.__setattr__(self, "nodal", arr)
        else:
            if not np.all(np.isfinite(self.constant)):
                raise ValueError("constant load must be finite")

    def nodal_values(self, mesh: Mesh) -> np.ndarray:
        """(m, 2) load coefficients on the Neumann nodes of mesh."""
        m = len(mesh.neumann_nodes)
        if self.constant is not None:
            return np.tile(np.asarray(self.constant, dtype=float), (m, 1))
        if self.nodal.shape[0] != m:
            raise ValueError(
                f"nodal load has {self.nodal.shape[0]} rows, mesh has {m} Neumann nodes"
            )
        return self.nodal


@dataclass(eq=False)
class ForwardSolution:
    """Nodal displacement with per-element strain and divergence."""

    displacement: np.ndarray        # (n_nodes, 2)
    trace_on_neumann: np.ndarray    # (m, 2) on mesh.neumann_nodes
    per_element_strain: np.ndarray  # (n_el, 2, 2), symmetric
    per_element_div: np.ndarray     # (n_el,)


@dataclass(eq=False)
class AssembledSystem:
    """Reduced stiffness on free dofs, load vector, and the dof map."""

    stiffness: sp.csr_matrix
    load: np.ndarray
    free_dofs: np.ndarray  # global dof index per unknown


class ElementGeometry:
    """Per-element shape-function gradients; depends only on the mesh."""

    def __init__(self, mesh: Mesh):
        self.mesh = mesh
        p = mesh.nodes[mesh.triangles]  # (n_el, 3, 2)
        x, y = p[..., 0], p[..., 1]
        # gradients of barycentric coordinates
        self.area = mesh.element_areas
        two_a = 2.0 * self.area
        self.bx = np.stack(
            [y[:, 1] - y[:, 2], y[:, 2] - y[:, 0], y[:, 0] - y[:, 1]], axis=1
        ) / two_a[:, None]
        self.by = np.stack(
            [x[:, 2] - x[:, 1], x[:, 0] - x[:, 2], x[:, 1] - x[:, 0]], axis=1
        ) / two_a[:, None]

    def strains(self, displacement: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
        """Per-element symmetric strain (n_el, 2, 2) and divergence (n_el,)."""
        u = displacement[self.mesh.triangles]  # (n_el, 3, 2)
        exx = np.einsum("ej,ej->e", self.bx, u[..., 0])
        eyy = np.einsum("ej,ej->e", self.by, u[..., 1])
        exy = 0.5 * (
            np.einsum("ej,ej->e", self.by, u[..., 0])
            + np.einsum("ej,ej->e", self.bx, u[..., 1])
        )
        strain = np.empty((len(exx), 2, 2))
        strain[:, 0, 0] = exx
        strain[:, 1, 1] = eyy
        strain[:, 0, 1] = strain[:, 1, 0] = exy
        return strain, exx + eyy


def isotropic_stress(lam: float, mu: float, strain: np.ndarray) -> np.ndarray:
    """Stress lam*tr(strain)*I + 2*mu*strain for a 2x2 symmetric strain."""
    strain = np.asarray(strain, dtype=float)
    return lam * np.trace(strain) * np.eye(2) + 2.0 * mu * strain


def strain_energy_density(field: LameField, strain: np.ndarray, div: np.ndarray) -> np.ndarray:
    """Per-element energy density C(strain):strain = lam*div^2 + 2*mu*strain:strain."""
    ss = np.einsum("eij,eij->e", strain, strain)
    return field.lam * div**2 + 2.0 * field.mu * ss


def assemble_stiffness(mesh: Mesh, field: LameField) -> sp.csr_matrix:
    """Full (unconstrained) stiffness matrix, dofs interleaved (2*node + comp)."""
    field.check_mesh(mesh)
    geo = ElementGeometry(mesh)
    n_el = mesh.n_elements
    lam, mu, area = field.lam, field.mu, geo.area

    # B maps the 6 nodal dofs to Voigt strain (exx, eyy, 2 exy)
    B = np.zeros((n_el, 3, 6))
    B[:, 0, 0::2] = geo.bx
    B[:, 1, 1::2] = geo.by
    B[:, 2, 0::2] = geo.by
    B[:, 2, 1::2] = geo.bx

    D = np.zeros((n_el, 3, 3))
    D[:, 0, 0] = D[:, 1, 1] = lam + 2.0 * mu
    D[:, 0, 1] = D[:, 1, 0] = lam
    D[:, 2, 2] = mu

    ke = np.einsum("e,eji,ejk,ekl->eil", area, B, D, B, optimize=True)
    ke = 0.5 * (ke + ke.transpose(0, 2, 1))  # exact symmetry despite fp rounding

    dofs = np.empty((n_el, 6), dtype=np.int64)
    dofs[:, 0::2] = 2 * mesh.triangles
    dofs[:, 1::2] = 2 * mesh.triangles + 1
    rows = np.repeat(dofs, 6, axis=1).ravel()
    cols = np.tile(dofs, (1, 6)).ravel()
    K = sp.coo_matrix(
        (ke.ravel(), (rows, cols)), shape=(2 * mesh.n_nodes, 2 * mesh.n_nodes)
    ).tocsr()
    # duplicate summation order can differ between (i, j) and (j, i);
    # symmetrize so K == K.T holds exactly
    return ((K + K.T) * 0.5).tocsr()


def neumann_mass_matrix(mesh: Mesh) -> sp.csr_matrix:
    """Boundary mass matrix of the nodal trace space on the Neumann part.

    Size (2m, 2m) with m = len(mesh.neumann_nodes); realizes the L2 inner
    product of piecewise linear traces vanishing at the clamped interface.
    """
    nn = mesh.neumann_nodes
    pos = {int(n): i for i, n in enumerate(nn)}
    rows, cols, vals = [], [], []
    for a, b in mesh.neumann_edges:
        length = float(np.linalg.norm(mesh.nodes[b] - mesh.nodes[a]))
        local = [(a, a, 2.0), (b, b, 2.0), (a, b, 1.0), (b, a, 1.0)]
        for u, v, w in local:
            if int(u) in pos and int(v) in pos:
                for comp in (0, 1):
                    rows.append(2 * pos[int(u)] + comp)
                    cols.append(2 * pos[int(v)] + comp)
                    vals.append(w * length / 6.0)
    m = 2 * len(nn)
    return sp.coo_matrix((vals, (rows, cols)), shape=(m, m)).tocsr()


class ElasticitySolver:
    """Forward and Dirichlet-data solves sharing one stiffness per field.

    Factorizations are built lazily and reused across loads; they are
    immutable once constructed.
    """

    def __init__(self, mesh: Mesh, field: LameField):
        field.check_mesh(mesh)
        self.mesh = mesh
        self.field = field
        self.geometry = ElementGeometry(mesh)
        self.K = assemble_stiffness(mesh, field)

        n = mesh.n_nodes
        dir_dofs = np.concatenate([2 * mesh.dirichlet_nodes, 2 * mesh.dirichlet_nodes + 1])
        self.dirichlet_dofs = np.sort(dir_dofs)
        neu_dofs = np.concatenate([2 * mesh.neumann_nodes, 2 * mesh.neumann_nodes + 1])
        self.neumann_trace_dofs = np.sort(neu_dofs)
        all_dofs = np.arange(2 * n)
        self.free_dofs = np.setdiff1d(all_dofs, self.dirichlet_dofs)
        self.interior_dofs = np.setdiff1d(self.free_dofs, self.neumann_trace_dofs)
        if len(self.dirichlet_dofs) == 0:
            raise FemError("mesh has no Dirichlet boundary; problem is singular")

    @cached_property
    def boundary_mass(self) -> sp.csr_matrix:
        return neumann_mass_matrix(self.mesh)

    @cached_property
    def K_free(self) -> sp.csr_matrix:
        return self.K[np.ix_(self.free_dofs, self.free_dofs)].tocsr()

    @cached_property
    def K_interior(self) -> sp.csr_matrix:
        return self.K[np.ix_(self.interior_dofs, self.interior_dofs)].tocsr()

    @cached_property
    def _neumann_factor(self):
        return spla.splu(self.K_free.tocsc())

    @cached_property
    def _dirichlet_factor(self):
        return spla.splu(self.K_interior.tocsc())

    # -- load handling ----------------------------------------------------

    def load_vector(self, load: SurfaceLoad) -> np.ndarray:
        """Global right-hand side b with b|_free = restriction of M g."""
        g = load.nodal_values(self.mesh).ravel()
        bg = self.boundary_mass @ g
        b = np.zeros(2 * self.mesh.n_nodes)
        idx = np.empty(2 * len(self.mesh.neumann_nodes), dtype=np.int64)
        idx[0::2] = 2 * self.mesh.neumann_nodes
        idx[1::2] = 2 * self.mesh.neumann_nodes + 1
        b[idx] = bg
        return b

    def _package(self, u_flat: np.ndarray) -> ForwardSolution:
        u = u_flat.reshape(-1, 2)
        strain, div = self.geometry.strains(u)
        return ForwardSolution(
            displacement=u,
            trace_on_neumann=u[self.mesh.neumann_nodes],
            per_element_strain=strain,
            per_element_div=div,
        )

    def _check_residual(self, A, x, b):
        r = A @ x - b
        scale = max(np.linalg.norm(b), 1.0e-300)
        rel = np.linalg.norm(r) / scale
        if not np.isfinite(rel) or rel > SOLVER_RTOL:
            raise FemError(f"linear solve failed, relative residual {rel:.3e}")

    # -- solves -----------------------------------------------------------

    @staticmethod
    def _solve_refined(factor, K, b):
        # one step of iterative refinement keeps the relative residual at
        # machine level even for ill-conditioned partitions
        x = factor.solve(b)
        x += factor.solve(b - K @ x)
        return x

    def solve_neumann(self, load: SurfaceLoad) -> ForwardSolution:
        """Solve the traction problem: load on the Neumann part, clamped elsewhere."""
        b = self.load_vector(load)
        bf = b[self.free_dofs]
        uf = self._solve_refined(self._neumann_factor, self.K_free, bf)
        self._check_residual(self.K_free, uf, bf)
        u = np.zeros(2 * self.mesh.n_nodes)
        u[self.free_dofs] = uf
        return self._package(u)

    def solve_dirichlet(self, trace_data: np.ndarray) -> ForwardSolution:
        """Solve with prescribed displacement trace_data on the Neumann nodes.

        trace_data: (m, 2) array on mesh.neumann_nodes; the clamped part stays
        zero and the equation holds against interior test functions.
        """
        trace_data = np.asarray(trace_data, dtype=float)
        m = len(self.mesh.neumann_nodes)
        if trace_data.shape != (m, 2) or not np.all(np.isfinite(trace_data)):
            raise FemError(f"trace data must be a finite ({m}, 2) array")
        u = np.zeros(2 * self.mesh.n_nodes)
        idx = np.empty(2 * m, dtype=np.int64)
        idx[0::2] = 2 * self.mesh.neumann_nodes
        idx[1::2] = 2 * self.mesh.neumann_nodes + 1
        u[idx] = trace_data.ravel()
        b = -(self.K @ u)[self.interior_dofs]
        ui = self._solve_refined(self._dirichlet_factor, self.K_interior, b)
        self._check_residual(self.K_interior, ui, b)
        u[self.interior_dofs] = ui
        return self._package(u)

    # -- energies ---------------------------------------------------------

    def interior_energy(self, sol: ForwardSolution) -> float:
        """Exact volume integral of C(strain):strain over the mesh."""
        dens = strain_energy_density(self.field, sol.per_element_strain, sol.per_element_div)
        return float(np.dot(self.geometry.area, dens))

    def boundary_pairing(self, load: SurfaceLoad, sol: ForwardSolution) -> float:
        """Boundary integral of load . trace over the Neumann part."""
        g = load.nodal_values(self.mesh).ravel()
        t = sol.trace_on_neumann.ravel()
        return float(g @ (self.boundary_mass @ t))


def assemble(mesh: Mesh, field: LameField, load: SurfaceLoad) -> AssembledSystem:
    """Reduced SPD system for the traction problem (Dirichlet dofs eliminated)."""
    solver = ElasticitySolver(mesh, field)
    b = solver.load_vector(load)
    return AssembledSystem(
        stiffness=solver.K_free, load=b[solver.free_dofs], free_dofs=solver.free_dofs
    )


def solve_neumann(mesh: Mesh, field: LameField, load: SurfaceLoad) -> ForwardSolution:
    return ElasticitySolver(mesh, field).solve_neumann(load)


def solve_dirichlet(mesh: Mesh, field: LameField, trace_data: np.ndarray) -> ForwardSolution:
    return ElasticitySolver(mesh, field).solve_dirichlet(trace_data)
