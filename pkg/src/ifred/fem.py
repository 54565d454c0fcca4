"""P1 finite elements for the flux-jump and solution-jump transmission problems.

Conventions used throughout the package:

* jumps are ``[a] = a_plus - a_minus``;
* the interface normal points from the MINUS side into the PLUS side;
* the flux is ``q = -beta grad u``.

Integrating by parts on each side then gives, for the flux-jump problem
``[u] = 0, [beta du/dn] = g``, the weak form ``a(u, v) = (f, v) - <g, v>``.

Broken fields live on ``mesh.n_broken`` degrees of freedom: one per vertex
(the MINUS value on the interface) followed by one PLUS copy per interface
vertex.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Callable, Union

import numpy as np
import scipy.sparse as sp

from .errors import ConfigurationError
from .linalg import SPDFactor, SparseSymMatrix, assemble_from_triplets
from .mesh import MINUS, FittedMesh, InterfaceTrace

FLUX_JUMP, SOLUTION_JUMP = "flux_jump", "solution_jump"

Source = Union[float, Callable, tuple]


@dataclass(frozen=True)
class ProblemSpec:
    """Data of one transmission problem.

    ``source`` is a constant, a callable ``f(x, y)`` or a pair of callables
    ``(f_minus, f_plus)``. ``g`` is a constant or a callable of the interface
    parameter. ``dirichlet`` (optional) is a callable ``u_D(x, y)`` imposed by
    nodal interpolation on the outer boundary.
    """

    case: str
    source: Source = 0.0
    g: Union[float, Callable] = 0.0
    beta_minus: float | None = None
    beta_plus: float | None = None
    dirichlet: Callable | None = None

    def __post_init__(self):
        if self.case not in (FLUX_JUMP, SOLUTION_JUMP):
            raise ConfigurationError(f"unknown problem case {self.case!r}")
        for b in (self.beta_minus, self.beta_plus):
            if b is not None and not b > 0:
                raise ConfigurationError("beta must be strictly positive")

    def with_data(self, **changes) -> "ProblemSpec":
        fields = dict(case=self.case, source=self.source, g=self.g,
                      beta_minus=self.beta_minus, beta_plus=self.beta_plus,
                      dirichlet=self.dirichlet)
        fields.update(changes)
        return ProblemSpec(**fields)

    def check_mesh(self, mesh: FittedMesh) -> None:
        if self.beta_minus is not None and self.beta_minus != mesh.beta_minus:
            raise ConfigurationError("problem beta_minus differs from the mesh coefficient")
        if self.beta_plus is not None and self.beta_plus != mesh.beta_plus:
            raise ConfigurationError("problem beta_plus differs from the mesh coefficient")


def evaluate_source(source: Source, xy: np.ndarray, labels: np.ndarray) -> np.ndarray:
    x, y = xy[..., 0], xy[..., 1]
    if callable(source):
        return np.broadcast_to(np.asarray(source(x, y), dtype=float), x.shape).copy()
    if isinstance(source, tuple):
        fm, fp = (np.broadcast_to(np.asarray(fn(x, y) if callable(fn) else fn, dtype=float), x.shape)
                  for fn in source)
        return np.where(labels == MINUS, fm, fp)
    return np.full(x.shape, float(source))


def evaluate_interface_data(g, s: np.ndarray) -> np.ndarray:
    s = np.asarray(s, dtype=float)
    if callable(g):
        return np.broadcast_to(np.asarray(g(s), dtype=float), s.shape).copy()
    return np.full(s.shape, float(g))


def source_means(mesh: FittedMesh, source: Source) -> np.ndarray:
    """Elementwise value f_K, taken at the barycenter (one-point rule)."""
    return evaluate_source(source, mesh.barycenters, mesh.labels)


@dataclass(frozen=True, eq=False)
class BrokenSolution:
    mesh: FittedMesh
    values: np.ndarray
    case: str | None = None

    @property
    def minus_values(self) -> np.ndarray:
        return self.values[: self.mesh.n_vertices]

    @property
    def plus_values(self) -> np.ndarray:
        return self.values[self.mesh.plus_dof]

    def jump(self, vertices=None) -> np.ndarray:
        """PLUS minus MINUS value at the given (default: all interface) vertices."""
        v = self.mesh.interface_vertices if vertices is None else np.asarray(vertices)
        return self.plus_values[v] - self.minus_values[v]

    def element_values(self) -> np.ndarray:
        return self.values[self.mesh.broken_triangles]

    def gradients(self) -> np.ndarray:
        """Elementwise constant gradient, (T, 2)."""
        return np.einsum("ti,tij->tj", self.element_values(), p1_gradients(self.mesh))

    def __add__(self, other: "BrokenSolution") -> "BrokenSolution":
        return BrokenSolution(self.mesh, self.values + other.values, self.case)

    def __sub__(self, other: "BrokenSolution") -> "BrokenSolution":
        return BrokenSolution(self.mesh, self.values - other.values, self.case)


@dataclass(frozen=True, eq=False)
class LiftingField(BrokenSolution):
    datum: Callable | float | None = None


def p1_gradients(mesh: FittedMesh) -> np.ndarray:
    """Gradients of the three barycentric coordinates on every triangle, (T, 3, 2)."""
    p = mesh.vertices[mesh.triangles]
    x, y = p[..., 0], p[..., 1]
    two_area = mesh.signed_areas * 2
    g = np.empty(p.shape)
    for i in range(3):
        j, k = (i + 1) % 3, (i + 2) % 3
        g[:, i, 0] = (y[:, j] - y[:, k]) / two_area
        g[:, i, 1] = (x[:, k] - x[:, j]) / two_area
    return g


def _local_stiffness(mesh: FittedMesh, coefficient: np.ndarray) -> np.ndarray:
    grads = p1_gradients(mesh)
    return (coefficient * mesh.areas)[:, None, None] * np.einsum("tid,tjd->tij", grads, grads)


def _scatter(conn: np.ndarray, local: np.ndarray, dim: int) -> SparseSymMatrix:
    rows = np.repeat(conn, 3, axis=1)
    cols = np.tile(conn, (1, 3))
    return assemble_from_triplets(dim, rows=rows, cols=cols, values=local.reshape(len(conn), 9))


def _full_stiffness(mesh: FittedMesh, broken: bool, coefficient=None) -> SparseSymMatrix:
    coef = mesh.beta if coefficient is None else coefficient
    conn = mesh.broken_triangles if broken else mesh.triangles
    dim = mesh.n_broken if broken else mesh.n_vertices
    return _scatter(conn, _local_stiffness(mesh, coef), dim)


def mass_matrix(mesh: FittedMesh, broken: bool = True) -> SparseSymMatrix:
    local = (mesh.areas / 12.0)[:, None, None] * (np.ones((3, 3)) + np.eye(3))
    conn = mesh.broken_triangles if broken else mesh.triangles
    dim = mesh.n_broken if broken else mesh.n_vertices
    return _scatter(conn, local, dim)


def dirichlet_dofs(mesh: FittedMesh, broken: bool) -> np.ndarray:
    bv = mesh.boundary_vertices
    if not broken:
        return bv
    return np.unique(np.concatenate([bv, mesh.plus_dof[bv]]))


def _eliminate(A: sp.csr_matrix, fixed: np.ndarray) -> sp.csr_matrix:
    keep = np.ones(A.shape[0])
    keep[fixed] = 0.0
    D = sp.diags(keep)
    ident = sp.diags(1.0 - keep)
    return (D @ A @ D + ident).tocsr()


def assemble_stiffness(mesh: FittedMesh, broken: bool = False,
                       dirichlet: bool = True) -> SparseSymMatrix:
    """P1 stiffness with coefficient beta_K.

    With ``dirichlet=True`` the rows and columns of boundary dofs are
    replaced by identity rows/columns (symmetric elimination).
    """
    A = _full_stiffness(mesh, broken)
    if not dirichlet:
        return A
    return SparseSymMatrix(_eliminate(A.csr, dirichlet_dofs(mesh, broken)), check=False)


def assemble_load(mesh: FittedMesh, f: Source) -> np.ndarray:
    """Load vector (f, phi_i) with the barycenter rule: f_K |K| / 3 per vertex."""
    contrib = np.repeat((source_means(mesh, f) * mesh.areas / 3.0)[:, None], 3, axis=1)
    return np.bincount(mesh.triangles.ravel(), weights=contrib.ravel(),
                       minlength=mesh.n_vertices)


def assemble_interface_load(trace: InterfaceTrace, g) -> np.ndarray:
    """Vector of -<g, phi_i> over the interface (length ``trace.n_vertices``)."""
    gq = evaluate_interface_data(g, trace.quad_s) * trace.quad_w
    t = trace.quad_t[None, :]
    start = (gq * (1.0 - t)).sum(axis=1)
    end = (gq * t).sum(axis=1)
    out = np.zeros(trace.n_vertices)
    np.add.at(out, trace.edges[:, 0], -start)
    np.add.at(out, trace.edges[:, 1], -end)
    return out


def build_lifting(mesh: FittedMesh, trace: InterfaceTrace, phi) -> LiftingField:
    """One-sided lifting: PLUS copy of each interface vertex carries phi(s_v)."""
    values = np.zeros(mesh.n_broken)
    values[mesh.plus_dof[trace.vertex_ids]] = evaluate_interface_data(phi, trace.vertex_s)
    return LiftingField(mesh, values, SOLUTION_JUMP, phi)


def continuous_to_broken(mesh: FittedMesh) -> sp.csr_matrix:
    """Embedding of continuous P1 dofs into the broken space, (n_broken, V)."""
    V = mesh.n_vertices
    rows = np.arange(mesh.n_broken)
    return sp.csr_matrix((np.ones(mesh.n_broken), (rows, mesh.broken_to_vertex)),
                         shape=(mesh.n_broken, V))


class TransmissionSolver:
    """Reusable solver for one mesh: the stiffness is factored once.

    Both problem cases only change the right-hand side, so every reduced
    solve on a mesh shares the factorization of the reference solve.
    """

    def __init__(self, mesh: FittedMesh, trace: InterfaceTrace):
        self.mesh = mesh
        self.trace = trace
        self.A_full = _full_stiffness(mesh, broken=False).csr
        self.Ab_full = _full_stiffness(mesh, broken=True).csr
        self.embed = continuous_to_broken(mesh)
        self.fixed = mesh.boundary_vertices
        self.matrix = SparseSymMatrix(_eliminate(self.A_full, self.fixed), check=False)
        self.factor = SPDFactor(self.matrix)

    def _solve_continuous(self, rhs: np.ndarray, spec: ProblemSpec) -> np.ndarray:
        ud = np.zeros(self.mesh.n_vertices)
        if spec.dirichlet is not None:
            xy = self.mesh.vertices[self.fixed]
            ud[self.fixed] = np.asarray(spec.dirichlet(xy[:, 0], xy[:, 1]), dtype=float)
        b = rhs - self.A_full @ ud
        b[self.fixed] = ud[self.fixed]
        return self.factor.solve(b)

    def solve(self, spec: ProblemSpec) -> BrokenSolution:
        spec.check_mesh(self.mesh)
        if spec.case == FLUX_JUMP:
            return self.solve_flux_jump(spec)
        return self.solve_solution_jump(spec)

    def solve_flux_jump(self, spec: ProblemSpec) -> BrokenSolution:
        rhs = assemble_load(self.mesh, spec.source) + assemble_interface_load(self.trace, spec.g)
        u = self._solve_continuous(rhs, spec)
        return BrokenSolution(self.mesh, self.embed @ u, FLUX_JUMP)

    def solve_solution_jump(self, spec: ProblemSpec) -> BrokenSolution:
        w = build_lifting(self.mesh, self.trace, spec.g)
        rhs = assemble_load(self.mesh, spec.source) - self.embed.T @ (self.Ab_full @ w.values)
        u0 = self._solve_continuous(rhs, spec)
        return BrokenSolution(self.mesh, self.embed @ u0 + w.values, SOLUTION_JUMP)


def solve_flux_jump(mesh: FittedMesh, trace: InterfaceTrace, spec: ProblemSpec) -> BrokenSolution:
    if spec.case != FLUX_JUMP:
        raise ConfigurationError("solve_flux_jump needs a FLUX_JUMP problem")
    spec.check_mesh(mesh)
    return TransmissionSolver(mesh, trace).solve_flux_jump(spec)


def solve_solution_jump(mesh: FittedMesh, trace: InterfaceTrace, spec: ProblemSpec) -> BrokenSolution:
    if spec.case != SOLUTION_JUMP:
        raise ConfigurationError("solve_solution_jump needs a SOLUTION_JUMP problem")
    spec.check_mesh(mesh)
    return TransmissionSolver(mesh, trace).solve_solution_jump(spec)


def broken_h1_norm(mesh: FittedMesh, values: np.ndarray) -> float:
    """sqrt(|v|_1^2 + |v|_0^2) over both subdomains, with exact P1 integrals."""
    K = _full_stiffness(mesh, broken=True, coefficient=np.ones(mesh.n_triangles)).csr
    M = mass_matrix(mesh, broken=True).csr
    return float(np.sqrt(values @ (K @ values) + values @ (M @ values)))


def lumped_l2_norm(mesh: FittedMesh, element_values: np.ndarray) -> float:
    """Vertex-rule L2 norm of per-element nodal values (T, 3)."""
    return float(np.sqrt(np.sum(mesh.areas[:, None] / 3.0 * element_values ** 2)))
