"""Boundary data, its normal/tangential split and the distance field."""
from dataclasses import dataclass
from typing import Callable, Optional

import numpy as np

from .fem import DiscreteField, interpolate


class BoundaryDataError(ValueError):
    pass


@dataclass(eq=False)
class BoundaryData:
    """Divergence datum ``g1`` (scalar P1) and Dirichlet datum ``g2``.

    ``g2`` holds one vector per mesh node; only boundary rows are read and
    every one must be finite. If ``g2_func`` is given the trace is sampled
    from it at P2 boundary nodes instead of being interpolated linearly.
    """

    mesh: object
    g1: DiscreteField
    g2: np.ndarray
    g2_func: Optional[Callable] = None

    def __post_init__(self):
        self.g2 = np.asarray(self.g2, dtype=float)
        if self.g2.shape != (self.mesh.n_nodes, 2):
            raise BoundaryDataError("g2 must have one (gx, gy) row per mesh node")
        if not np.all(np.isfinite(self.g2[self.mesh.boundary_nodes])):
            missing = self.mesh.boundary_nodes[
                ~np.all(np.isfinite(self.g2[self.mesh.boundary_nodes]), axis=1)
            ]
            raise BoundaryDataError(f"missing boundary values at nodes {missing[:10].tolist()}")
        if self.g1.space != "scalar-P1":
            raise BoundaryDataError("g1 must be a scalar-P1 field")

    @classmethod
    def from_functions(cls, mesh, g2_func, g1_func=None):
        g1 = interpolate(mesh, g1_func or (lambda x, y: 0.0 * x), "scalar-P1")
        vals = np.full((mesh.n_nodes, 2), np.nan)
        b = mesh.boundary_nodes
        gx, gy = g2_func(mesh.nodes[b, 0], mesh.nodes[b, 1])
        vals[b, 0] = gx
        vals[b, 1] = gy
        return cls(mesh, g1, vals, g2_func)

    def trace_p2(self):
        """Boundary values at every P2 boundary node, shape (ndof, 2); zero inside."""
        mesh = self.mesh
        p2 = mesh.p2
        out = np.zeros((p2.ndof, 2))
        vb = mesh.boundary_nodes
        eb = p2.n_vertices + p2.boundary_edge_ids
        if self.g2_func is not None:
            for ids in (vb, eb):
                gx, gy = self.g2_func(p2.points[ids, 0], p2.points[ids, 1])
                out[ids, 0] = gx
                out[ids, 1] = gy
        else:
            out[vb] = self.g2[vb]
            out[eb] = self.g2[p2.edges[p2.boundary_edge_ids]].mean(axis=1)
        return out

    def scaled(self, t):
        func = None
        if self.g2_func is not None:
            f = self.g2_func

            def func(x, y):
                gx, gy = f(x, y)
                return t * np.asarray(gx), t * np.asarray(gy)

        return BoundaryData(self.mesh, self.g1 * t, self.g2 * t, func)


def p2_boundary_normals(mesh):
    """Unit normal at each P2 boundary node: edge normal at midpoints,
    :attr:`Mesh.vertex_normals` at vertices."""
    p2 = mesh.p2
    n = np.zeros((p2.ndof, 2))
    n[: p2.n_vertices] = mesh.vertex_normals
    n[p2.n_vertices + p2.boundary_edge_ids] = mesh.normals
    return n


def split_trace(data):
    """Nodal split of the P2 trace into ``(g_n, g_t)`` arrays of shape (ndof, 2)."""
    g = data.trace_p2()
    n = p2_boundary_normals(data.mesh)
    gn = np.sum(g * n, axis=1)[:, None] * n
    return gn, g - gn


def decompose_boundary(data, mesh=None):
    """Edge-wise split of ``g2`` into normal and tangential parts.

    Returns arrays ``g_n, g_t`` of shape (K, 2, 2): for boundary edge k
    and endpoint j, the vector part computed with that edge's normal.
    Corner nodes therefore carry one value per incident edge.
    """
    mesh = mesh or data.mesh
    g = data.g2[mesh.boundary_edges]
    n = mesh.normals[:, None, :]
    gn = np.sum(g * n, axis=2)[..., None] * n
    return gn, g - gn


def check_compatibility(data, mesh=None):
    """``|int g1 - oint g2.n|`` with exact rules for the discrete data."""
    mesh = mesh or data.mesh
    vol = float(np.sum(mesh.areas * data.g1.dofs[mesh.triangles].mean(axis=1)))
    return abs(vol - boundary_flux(mesh, data.trace_p2()))


def boundary_flux(mesh, trace):
    """``oint w.n`` for a P2 trace (ndof, 2), by Simpson's rule per edge."""
    p2 = mesh.p2
    a, b = mesh.boundary_edges.T
    mid = p2.n_vertices + p2.boundary_edge_ids
    wn = (
        np.sum(trace[a] * mesh.normals, axis=1)
        + 4.0 * np.sum(trace[mid] * mesh.normals, axis=1)
        + np.sum(trace[b] * mesh.normals, axis=1)
    ) / 6.0
    return float(np.sum(wn * mesh.edge_lengths))


def segment_distance(points, a, b):
    """Distance from each point (N, 2) to each segment (K, 2)->(K, 2): (N, K)."""
    d = b - a
    dd = np.einsum("ki,ki->k", d, d)
    rel = points[:, None, :] - a[None, :, :]
    t = np.clip(np.einsum("nki,ki->nk", rel, d) / dd, 0.0, 1.0)
    diff = rel - t[..., None] * d[None]
    return np.sqrt(np.einsum("nki,nki->nk", diff, diff))


def distance_to_boundary(mesh, points, chunk=2048):
    a = mesh.nodes[mesh.boundary_edges[:, 0]]
    b = mesh.nodes[mesh.boundary_edges[:, 1]]
    out = np.empty(len(points))
    for s in range(0, len(points), chunk):
        out[s : s + chunk] = segment_distance(points[s : s + chunk], a, b).min(axis=1)
    return out


def distance_field(mesh):
    """Euclidean distance of every node to the polygonal boundary (scalar P1)."""
    d = distance_to_boundary(mesh, mesh.nodes)
    d[mesh.boundary_nodes] = 0.0
    return DiscreteField("scalar-P1", d, mesh)


def read_boundary_data(path, mesh):
    """Parse ``id gx gy`` records plus one ``G1 <tag> [value]`` line.

    Supported tags: ``zero`` and ``const <c>``.
    """
    vals = np.full((mesh.n_nodes, 2), np.nan)
    g1 = 0.0
    with open(path) as fh:
        for ln in fh:
            tok = ln.split()
            if not tok or tok[0].startswith("#"):
                continue
            if tok[0] == "G1":
                if tok[1] == "zero":
                    g1 = 0.0
                elif tok[1] == "const":
                    g1 = float(tok[2])
                else:
                    raise BoundaryDataError(f"unknown G1 tag {tok[1]!r}")
                continue
            i = int(tok[0])
            if not 0 <= i < mesh.n_nodes:
                raise BoundaryDataError(f"node id {i} out of range")
            vals[i] = float(tok[1]), float(tok[2])
    g1f = DiscreteField("scalar-P1", np.full(mesh.n_nodes, g1), mesh)
    return BoundaryData(mesh, g1f, vals)


def write_boundary_data(data, path, g1_const=None):
    lines = [f"{i} {data.g2[i, 0]:.17g} {data.g2[i, 1]:.17g}" for i in data.mesh.boundary_nodes]
    if g1_const is None:
        c = data.g1.dofs
        if not np.allclose(c, c[0]):
            raise BoundaryDataError("data file format only stores constant g1")
        g1_const = float(c[0])
    lines.append("G1 zero" if g1_const == 0 else f"G1 const {g1_const:.17g}")
    with open(path, "w") as fh:
        fh.write("\n".join(lines) + "\n")
