"""P1/P2 Lagrange spaces, discrete fields and sparse assembly.

Vector fields store components interleaved: dof ``2*i + c`` is component
``c`` at node ``i``. P2 nodes are the mesh vertices followed by one
midpoint per edge, in the order of ``P2DofMap.edges``.
"""
from dataclasses import dataclass

import numpy as np
import scipy.sparse as sp
from scipy.sparse.linalg import splu, spsolve

from .quadrature import DEFAULT_DEGREE, triangle_rule

SPACES = ("scalar-P1", "vector-P1", "vector-P2", "scalar-P0")
LOCAL_EDGES = ((0, 1), (1, 2), (2, 0))


class P2DofMap:
    def __init__(self, mesh):
        tri = mesh.triangles
        nv = mesh.n_nodes
        local = np.concatenate([tri[:, list(e)] for e in LOCAL_EDGES])
        key = np.sort(local, axis=1)
        edges, inverse = np.unique(key, axis=0, return_inverse=True)
        inverse = inverse.ravel()
        m = len(tri)
        self.edges = edges
        self.cell_edges = inverse.reshape(3, m).T
        self.cells = np.hstack([tri, nv + self.cell_edges])
        self.n_vertices = nv
        self.ndof = nv + len(edges)
        self.points = np.vstack([mesh.nodes, mesh.nodes[edges].mean(axis=1)])
        bkey = np.sort(mesh.boundary_edges, axis=1)
        pos = {tuple(e): i for i, e in enumerate(edges.tolist())}
        self.boundary_edge_ids = np.array([pos[tuple(e)] for e in bkey.tolist()], dtype=np.int64)
        self.boundary_dofs = np.concatenate(
            [mesh.boundary_nodes, nv + np.sort(self.boundary_edge_ids)]
        )

    def vector_cells(self):
        c = self.cells
        out = np.empty((len(c), 12), dtype=np.int64)
        out[:, 0::2] = 2 * c
        out[:, 1::2] = 2 * c + 1
        return out


@dataclass(eq=False)
class DiscreteField:
    space: str
    dofs: np.ndarray
    mesh: object

    def __post_init__(self):
        if self.space not in SPACES:
            raise ValueError(f"unknown space {self.space!r}")
        self.dofs = np.asarray(self.dofs, dtype=float)
        expected = dof_count(self.mesh, self.space)
        if self.dofs.shape != (expected,):
            raise ValueError(f"{self.space} on this mesh needs {expected} dofs, got {self.dofs.shape}")

    @property
    def is_vector(self):
        return self.space.startswith("vector")

    def nodal(self):
        """Values per node, shape (n,) or (n, 2)."""
        return self.dofs.reshape(-1, 2) if self.is_vector else self.dofs

    def __add__(self, other):
        _check_same(self, other)
        return DiscreteField(self.space, self.dofs + other.dofs, self.mesh)

    def __sub__(self, other):
        _check_same(self, other)
        return DiscreteField(self.space, self.dofs - other.dofs, self.mesh)

    def __mul__(self, c):
        return DiscreteField(self.space, self.dofs * float(c), self.mesh)

    __rmul__ = __mul__

    def at_quad(self, geom):
        """Values at quadrature points, (M, nq) or (M, nq, 2)."""
        if self.space == "scalar-P0":
            return np.repeat(self.dofs[:, None], geom.nq, axis=1)
        if self.space == "scalar-P1":
            return self.dofs[self.mesh.triangles] @ geom.p1.T
        if self.space == "vector-P1":
            u = self.nodal()[self.mesh.triangles]
            return np.einsum("qa,mac->mqc", geom.p1, u)
        u = self.nodal()[self.mesh.p2.cells]
        return np.einsum("qa,mac->mqc", geom.p2, u)

    def grad_at_quad(self, geom):
        """Gradient at quadrature points; for vectors ``[..., i, j] = d_j u_i``."""
        if self.space == "scalar-P0":
            return np.zeros((len(self.dofs), geom.nq, 2))
        if self.space == "scalar-P1":
            g = np.einsum("ma,maj->mj", self.dofs[self.mesh.triangles], geom.dp1)
            return np.repeat(g[:, None], geom.nq, axis=1)
        if self.space == "vector-P1":
            u = self.nodal()[self.mesh.triangles]
            g = np.einsum("mai,maj->mij", u, geom.dp1)
            return np.repeat(g[:, None], geom.nq, axis=1)
        u = self.nodal()[self.mesh.p2.cells]
        return np.einsum("mqaj,mai->mqij", geom.dp2, u)


def _check_same(a, b):
    if a.space != b.space or a.mesh is not b.mesh:
        raise ValueError("fields live on different spaces or meshes")


def dof_count(mesh, space):
    return {
        "scalar-P1": mesh.n_nodes,
        "vector-P1": 2 * mesh.n_nodes,
        "vector-P2": 2 * mesh.p2.ndof,
        "scalar-P0": mesh.n_triangles,
    }[space]


def zero_field(mesh, space):
    return DiscreteField(space, np.zeros(dof_count(mesh, space)), mesh)


def interpolate(mesh, func, space):
    """Nodal interpolant of ``func(x, y)``; vector funcs return a 2-tuple."""
    if space == "scalar-P0":
        pts = mesh.nodes[mesh.triangles].mean(axis=1)
    elif space == "vector-P2":
        pts = mesh.p2.points
    else:
        pts = mesh.nodes
    val = func(pts[:, 0], pts[:, 1])
    if space.startswith("vector"):
        val = np.column_stack([np.broadcast_to(v, len(pts)) for v in val]).ravel()
    else:
        val = np.broadcast_to(val, len(pts))
    return DiscreteField(space, np.array(val, dtype=float), mesh)


def p1_to_p2(field):
    """Exact embedding of a P1 vector field into P2."""
    mesh = field.mesh
    u = field.nodal()
    mid = u[mesh.p2.edges].mean(axis=1)
    return DiscreteField("vector-P2", np.vstack([u, mid]).ravel(), mesh)


def product_p1_p2(scalar, vector):
    """``scalar * vector`` for two P1 fields, which is exactly P2."""
    mesh = scalar.mesh
    s, u = scalar.dofs, vector.nodal()
    e = mesh.p2.edges
    mid = s[e].mean(axis=1)[:, None] * u[e].mean(axis=1)
    return DiscreteField("vector-P2", np.vstack([s[:, None] * u, mid]).ravel(), mesh)


class Geometry:
    """Per-element affine maps, quadrature points and basis tables."""

    def __init__(self, mesh, degree=DEFAULT_DEGREE):
        self.mesh = mesh
        ref, w = triangle_rule(degree)
        self.nq = len(w)
        p = mesh.nodes[mesh.triangles]
        J = np.stack([p[:, 1] - p[:, 0], p[:, 2] - p[:, 0]], axis=2)
        det = J[:, 0, 0] * J[:, 1, 1] - J[:, 0, 1] * J[:, 1, 0]
        invJ = np.linalg.inv(J)
        self.wdet = 0.5 * np.abs(det)[:, None] * w[None, :]
        self.points = p[:, 0][:, None, :] + np.einsum("mij,qj->mqi", J, ref)
        xi, eta = ref[:, 0], ref[:, 1]
        lam = np.stack([1.0 - xi - eta, xi, eta], axis=1)
        dlam = np.array([[-1.0, -1.0], [1.0, 0.0], [0.0, 1.0]])
        self.p1 = lam
        self.dp1 = np.einsum("aj,mji->mai", dlam, invJ)
        vals = np.empty((self.nq, 6))
        dref = np.empty((self.nq, 6, 2))
        for a in range(3):
            vals[:, a] = lam[:, a] * (2.0 * lam[:, a] - 1.0)
            dref[:, a] = (4.0 * lam[:, a] - 1.0)[:, None] * dlam[a]
        for k, (a, b) in enumerate(LOCAL_EDGES):
            vals[:, 3 + k] = 4.0 * lam[:, a] * lam[:, b]
            dref[:, 3 + k] = 4.0 * (lam[:, a, None] * dlam[b] + lam[:, b, None] * dlam[a])
        self.p2 = vals
        self.dp2 = np.einsum("qaj,mji->mqai", dref, invJ)

    def _vector_basis(self):
        m = self.mesh.n_triangles
        F = np.zeros((m, self.nq, 12, 2, 2))
        for a in range(6):
            for c in range(2):
                F[:, :, 2 * a + c, c, :] = self.dp2[:, :, a, :]
        return F

    @property
    def full_grad(self):
        """Gradients of the 12 local vector P2 basis functions, (M, nq, 12, 2, 2)."""
        if not hasattr(self, "_F"):
            self._F = self._vector_basis()
        return self._F

    @property
    def sym_grad(self):
        if not hasattr(self, "_G"):
            F = self.full_grad
            self._G = 0.5 * (F + np.swapaxes(F, -1, -2))
        return self._G

    @property
    def div(self):
        F = self.full_grad
        return F[..., 0, 0] + F[..., 1, 1]

    @property
    def vec_values(self):
        """Values of the 12 local vector basis functions, (nq, 12, 2)."""
        U = np.zeros((self.nq, 12, 2))
        for a in range(6):
            for c in range(2):
                U[:, 2 * a + c, c] = self.p2[:, a]
        return U


def geometry(mesh, degree=DEFAULT_DEGREE):
    cache = mesh.__dict__.setdefault("_geometry_cache", {})
    if degree not in cache:
        cache[degree] = Geometry(mesh, degree)
    return cache[degree]


def assemble_matrix(local, rows, cols, shape):
    r = np.broadcast_to(rows[:, :, None], local.shape)
    c = np.broadcast_to(cols[:, None, :], local.shape)
    return sp.csr_matrix((local.ravel(), (r.ravel(), c.ravel())), shape=shape)


def assemble_vector(local, dofs, n):
    out = np.zeros(n)
    np.add.at(out, dofs.ravel(), local.ravel())
    return out


def sym_grad_matrix(mesh, coeff, geom=None, full=False):
    """Vector P2 matrix of ``(coeff * Du, Dphi)`` (or ``grad`` if ``full``).

    ``coeff`` is a scalar, an (M, nq) array, or an (M, nq, 2, 2, 2, 2)
    fourth-order tensor acting on the (symmetric) gradient.
    """
    geom = geom or geometry(mesh)
    G = geom.full_grad if full else geom.sym_grad
    coeff = np.asarray(coeff, dtype=float)
    if coeff.ndim == 6:
        local = np.einsum("mqAij,mqijkl,mqBkl,mq->mAB", G, coeff, G, geom.wdet, optimize=True)
    else:
        w = np.broadcast_to(coeff, geom.wdet.shape) * geom.wdet
        local = np.einsum("mqAij,mqBij,mq->mAB", G, G, w, optimize=True)
    dofs = mesh.p2.vector_cells()
    n = 2 * mesh.p2.ndof
    return assemble_matrix(local, dofs, dofs, (n, n))


def vector_mass_matrix(mesh, geom=None):
    geom = geom or geometry(mesh)
    U = geom.vec_values
    local = np.einsum("qAi,qBi,mq->mAB", U, U, geom.wdet)
    dofs = mesh.p2.vector_cells()
    n = 2 * mesh.p2.ndof
    return assemble_matrix(local, dofs, dofs, (n, n))


def divergence_matrix(mesh, geom=None):
    """B[j, A] = (div phi_A, q_j) with P1 pressure basis q_j."""
    geom = geom or geometry(mesh)
    local = np.einsum("qj,mqA,mq->mjA", geom.p1, geom.div, geom.wdet)
    return assemble_matrix(
        local, mesh.triangles, mesh.p2.vector_cells(), (mesh.n_nodes, 2 * mesh.p2.ndof)
    )


def p1_mass_matrix(mesh, geom=None):
    geom = geom or geometry(mesh)
    local = np.einsum("qa,qb,mq->mab", geom.p1, geom.p1, geom.wdet)
    n = mesh.n_nodes
    return assemble_matrix(local, mesh.triangles, mesh.triangles, (n, n))


def p1_stiffness_matrix(mesh):
    geom = geometry(mesh)
    local = np.einsum("mai,mbi,m->mab", geom.dp1, geom.dp1, mesh.areas)
    n = mesh.n_nodes
    return assemble_matrix(local, mesh.triangles, mesh.triangles, (n, n))


def p1_integrals(mesh):
    """Vector of ``int q_j`` for the P1 basis."""
    out = np.zeros(mesh.n_nodes)
    np.add.at(out, mesh.triangles.ravel(), np.repeat(mesh.areas / 3.0, 3))
    return out


def load_vector(mesh, f, geom=None):
    """``(f, phi_A)`` for a force density ``f(x, y) -> (fx, fy)``."""
    geom = geom or geometry(mesh)
    x, y = geom.points[..., 0], geom.points[..., 1]
    fx, fy = f(x, y)
    fq = np.stack([np.broadcast_to(fx, x.shape), np.broadcast_to(fy, x.shape)], axis=-1)
    local = np.einsum("mqi,qAi,mq->mA", fq, geom.vec_values, geom.wdet)
    return assemble_vector(local, mesh.p2.vector_cells(), 2 * mesh.p2.ndof)


def p1_load(mesh, values_at_quad):
    geom = geometry(mesh)
    local = np.einsum("mq,qj,mq->mj", values_at_quad, geom.p1, geom.wdet)
    return assemble_vector(local, mesh.triangles, mesh.n_nodes)


def vector_boundary_dofs(mesh):
    b = mesh.p2.boundary_dofs
    return np.sort(np.concatenate([2 * b, 2 * b + 1]))


class DualNorm:
    """Riesz-map norm ``sqrt(r^T M^-1 r)`` for a sparse SPD matrix."""

    def __init__(self, M):
        self._lu = splu(sp.csc_matrix(M))

    def __call__(self, r):
        r = np.asarray(r, dtype=float)
        if not np.any(r):
            return 0.0
        return float(np.sqrt(max(r @ self._lu.solve(r), 0.0)))


def pressure_dual_norm(mesh):
    cache = mesh.__dict__.setdefault("_norm_cache", {})
    if "pressure" not in cache:
        cache["pressure"] = DualNorm(p1_mass_matrix(mesh))
    return cache["pressure"]


def velocity_dual_norm(mesh):
    """Dual norm on free (zero-trace) velocity dofs from P2 mass + stiffness."""
    cache = mesh.__dict__.setdefault("_norm_cache", {})
    if "velocity" not in cache:
        free = free_velocity_dofs(mesh)
        M = vector_mass_matrix(mesh) + sym_grad_matrix(mesh, 1.0, full=True)
        cache["velocity"] = DualNorm(M[free][:, free])
    return cache["velocity"]


def free_velocity_dofs(mesh):
    mask = np.ones(2 * mesh.p2.ndof, dtype=bool)
    mask[vector_boundary_dofs(mesh)] = False
    return np.flatnonzero(mask)


class SaddleSolver:
    """Factorized Taylor-Hood saddle system for a fixed velocity matrix.

    Solves ``A u - B^T p = F``, ``B u + m mu = G``, ``m^T p = 0`` with the
    velocity fixed on all boundary dofs. The factorization pins the
    pressure at one node; the scalar multiplier ``mu`` is recovered by
    superposition with a second precomputed solve and the pressure is
    shifted to zero mean afterwards. A nonzero ``mu`` signals divergence
    data that are incompatible with the boundary values.
    """

    def __init__(self, mesh, A):
        self.mesh = mesh
        self.A = sp.csr_matrix(A)
        self.B = divergence_matrix(mesh).tocsr()
        self.m = p1_integrals(mesh)
        self.fixed = vector_boundary_dofs(mesh)
        self.free = free_velocity_dofs(mesh)
        self.pin = 0
        rows = np.arange(mesh.n_nodes) != self.pin
        self._rows = rows
        Bf = self.B[rows][:, self.free]
        self.K = sp.bmat(
            [[self.A[self.free][:, self.free], -Bf.T], [-Bf, None]], format="csc"
        )
        self._lu = splu(self.K, permc_spec="COLAMD")
        self._um, self._pm = self._solve_pinned(np.zeros(len(self.free)), self.m[rows])

    def _solve_pinned(self, rhs_u, rhs_p):
        b = np.concatenate([rhs_u, -rhs_p])
        x = self._lu.solve(b)
        x += self._lu.solve(b - self.K @ x)
        if not np.all(np.isfinite(x)):
            raise np.linalg.LinAlgError("saddle-point solve produced non-finite values")
        nf = len(self.free)
        return x[:nf], x[nf:]

    def solve(self, F, G, fixed_values=None):
        """Return ``(u, p, mu)``."""
        mesh = self.mesh
        n = 2 * mesh.p2.ndof
        u = np.zeros(n)
        if fixed_values is not None:
            u[self.fixed] = np.asarray(fixed_values)[self.fixed]
        F = np.asarray(F, dtype=float)
        rhs_u = F[self.free] - self.A[self.free][:, self.fixed] @ u[self.fixed]
        Gt = np.asarray(G, dtype=float) - self.B[:, self.fixed] @ u[self.fixed]
        uG, pG = self._solve_pinned(rhs_u, Gt[self._rows])
        # pinned row: B_pin u + m_pin mu = Gt_pin, with u = uG - mu * um
        Bpin = self.B[self.pin][:, self.free].toarray().ravel()
        mu = float((Gt[self.pin] - Bpin @ uG) / (self.m[self.pin] - Bpin @ self._um))
        u[self.free] = uG - mu * self._um
        p = np.zeros(mesh.n_nodes)
        p[self._rows] = pG - mu * self._pm
        p -= (self.m @ p) / self.m.sum()
        return u, p, mu


def saddle_solver(mesh, A, key=None):
    """:class:`SaddleSolver` for ``A``, cached on the mesh under ``key``."""
    if key is None:
        return SaddleSolver(mesh, A)
    cache = mesh.__dict__.setdefault("_saddle_cache", {})
    if key not in cache:
        cache[key] = SaddleSolver(mesh, A)
    return cache[key]


def solve_saddle(mesh, A, F, G, fixed_values=None, key=None):
    """One-shot saddle solve; see :class:`SaddleSolver`. Returns ``(u, p, mu)``."""
    return saddle_solver(mesh, A, key).solve(F, G, fixed_values)
