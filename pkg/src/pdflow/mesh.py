"""Triangulated 2D domains and their boundary structure."""
from dataclasses import dataclass, field
from functools import cached_property

import numpy as np
from scipy.spatial import Delaunay

DOMAINS = ("unit-square", "disc", "annulus")
ANNULUS_RADII = (0.5, 1.0)


CORNER_ANGLE = 30.0


class MeshError(ValueError):
    pass


@dataclass(eq=False)
class Mesh:
    """Conforming triangulation with counter-clockwise triangles.

    ``boundary_edges[k] = (a, b)`` is oriented so the domain lies to the
    left of a -> b, which makes ``normals[k]`` point outward. ``markers``
    label the connected boundary components, 1 for the longest one.
    """

    nodes: np.ndarray
    triangles: np.ndarray
    boundary_edges: np.ndarray
    markers: np.ndarray
    normals: np.ndarray = field(repr=False)

    @property
    def n_nodes(self):
        return len(self.nodes)

    @property
    def n_triangles(self):
        return len(self.triangles)

    @cached_property
    def areas(self):
        p = self.nodes[self.triangles]
        e1 = p[:, 1] - p[:, 0]
        e2 = p[:, 2] - p[:, 0]
        return 0.5 * (e1[:, 0] * e2[:, 1] - e1[:, 1] * e2[:, 0])

    @cached_property
    def h_max(self):
        p = self.nodes[self.triangles]
        lengths = np.linalg.norm(p - np.roll(p, -1, axis=1), axis=2)
        return float(lengths.max())

    @cached_property
    def edge_lengths(self):
        a, b = self.boundary_edges.T
        return np.linalg.norm(self.nodes[b] - self.nodes[a], axis=1)

    @cached_property
    def boundary_nodes(self):
        return np.unique(self.boundary_edges)

    @cached_property
    def is_boundary_node(self):
        mask = np.zeros(self.n_nodes, dtype=bool)
        mask[self.boundary_nodes] = True
        return mask

    @cached_property
    def vertex_normals(self):
        """Unit normal per node, zero for interior nodes.

        Where the two incident boundary edges disagree (a corner of the
        polygon) the normalized mean of both edge normals is used.
        """
        acc = np.zeros_like(self.nodes)
        for k in range(2):
            np.add.at(acc, self.boundary_edges[:, k], self.normals)
        norm = np.linalg.norm(acc, axis=1)
        out = np.zeros_like(acc)
        nz = norm > 0
        out[nz] = acc[nz] / norm[nz, None]
        return out

    @cached_property
    def corner_nodes(self):
        """Boundary nodes where the incident edge normals turn by more than
        ``CORNER_ANGLE`` degrees; smaller kinks approximate a smooth curve."""
        first = np.full((self.n_nodes, 2), np.nan)
        second = np.full((self.n_nodes, 2), np.nan)
        first[self.boundary_edges[:, 0]] = self.normals
        second[self.boundary_edges[:, 1]] = self.normals
        b = self.boundary_nodes
        cosang = np.sum(first[b] * second[b], axis=1)
        return b[cosang < np.cos(np.deg2rad(CORNER_ANGLE))]

    @property
    def area(self):
        return float(self.areas.sum())

    @property
    def perimeter(self):
        return float(self.edge_lengths.sum())

    @cached_property
    def p2(self):
        from .fem import P2DofMap

        return P2DofMap(self)


def mesh_from_arrays(nodes, triangles):
    """Build a Mesh, fixing orientation and deriving the boundary."""
    nodes = np.asarray(nodes, dtype=float)
    tri = np.asarray(triangles, dtype=np.int64).copy()
    p = nodes[tri]
    signed = (p[:, 1, 0] - p[:, 0, 0]) * (p[:, 2, 1] - p[:, 0, 1]) - (
        p[:, 1, 1] - p[:, 0, 1]
    ) * (p[:, 2, 0] - p[:, 0, 0])
    if np.any(signed == 0):
        raise MeshError("degenerate triangle")
    flip = signed < 0
    tri[flip] = tri[flip][:, [0, 2, 1]]

    directed = np.concatenate([tri[:, [0, 1]], tri[:, [1, 2]], tri[:, [2, 0]]])
    key = np.sort(directed, axis=1)
    _, inverse, counts = np.unique(key, axis=0, return_inverse=True, return_counts=True)
    inverse = inverse.ravel()
    if counts.max() > 2:
        raise MeshError("non-conforming triangulation: edge shared by more than two triangles")
    bedges = directed[counts[inverse] == 1]
    markers = _component_markers(nodes, bedges)
    order = np.lexsort((bedges[:, 0], markers))
    bedges, markers = bedges[order], markers[order]
    d = nodes[bedges[:, 1]] - nodes[bedges[:, 0]]
    normals = np.column_stack([d[:, 1], -d[:, 0]]) / np.linalg.norm(d, axis=1)[:, None]
    return Mesh(nodes, tri, bedges, markers, normals)


def _component_markers(nodes, bedges):
    # union-find over boundary vertices
    parent = {}

    def find(a):
        while parent.setdefault(a, a) != a:
            parent[a] = parent[parent[a]]
            a = parent[a]
        return a

    for a, b in bedges:
        ra, rb = find(int(a)), find(int(b))
        if ra != rb:
            parent[max(ra, rb)] = min(ra, rb)
    roots = np.array([find(int(a)) for a in bedges[:, 0]])
    lengths = np.linalg.norm(nodes[bedges[:, 1]] - nodes[bedges[:, 0]], axis=1)
    uniq = np.unique(roots)
    total = {r: lengths[roots == r].sum() for r in uniq}
    ranked = sorted(uniq, key=lambda r: (-round(total[r], 12), r))
    label = {r: i + 1 for i, r in enumerate(ranked)}
    return np.array([label[r] for r in roots], dtype=np.int64)


def build_mesh(domain, resolution):
    """Generate a mesh of a preset domain.

    ``unit-square`` uses an n-by-n grid whose diagonals follow the square's
    own diagonals in each quadrant, so the distance-to-boundary function
    is linear on every triangle. ``disc`` (unit radius) and ``annulus``
    (radii 0.5 and 1) are polygonal ring meshes.
    """
    if domain not in DOMAINS:
        raise MeshError(f"unknown domain {domain!r}; expected one of {DOMAINS}")
    n = int(resolution)
    if n < 2:
        raise MeshError("resolution must be >= 2")
    if domain == "unit-square":
        return _unit_square(n)
    if domain == "disc":
        return _disc(n)
    return _annulus(n)


def _unit_square(n):
    x = np.linspace(0.0, 1.0, n + 1)
    X, Y = np.meshgrid(x, x)
    nodes = np.column_stack([X.ravel(), Y.ravel()])
    tris = []
    for j in range(n):
        for i in range(n):
            v00 = j * (n + 1) + i
            v10, v01, v11 = v00 + 1, v00 + n + 1, v00 + n + 2
            cx, cy = (i + 0.5) / n, (j + 0.5) / n
            if (cx - 0.5) * (cy - 0.5) > 0:
                tris += [(v00, v10, v11), (v00, v11, v01)]
            else:
                tris += [(v00, v10, v01), (v10, v11, v01)]
    return mesh_from_arrays(nodes, tris)


def _ring(radius, count, phase):
    t = phase + 2.0 * np.pi * np.arange(count) / count
    return radius * np.column_stack([np.cos(t), np.sin(t)])


def _disc(n):
    pts = [np.zeros((1, 2))]
    for k in range(1, n + 1):
        pts.append(_ring(k / n, 6 * k, 0.37 * k))
    nodes = np.concatenate(pts)
    tri = Delaunay(nodes).simplices
    return mesh_from_arrays(nodes, tri)


def _annulus(n):
    r_in, r_out = ANNULUS_RADII
    h = (r_out - r_in) / n
    rings, first = [], None
    for i in range(n + 1):
        r = r_in + i * h
        m = max(8, int(round(2.0 * np.pi * r / h)))
        rings.append(_ring(r, m, 0.37 * i))
        if i == 0:
            first = m
    nodes = np.concatenate(rings)
    tri = Delaunay(nodes).simplices
    keep = ~np.all(tri < first, axis=1)
    return mesh_from_arrays(nodes, tri[keep])


def write_mesh(mesh, path):
    lines = [f"NODES {mesh.n_nodes}"]
    lines += [f"{i} {x:.17g} {y:.17g}" for i, (x, y) in enumerate(mesh.nodes)]
    lines.append(f"TRIANGLES {mesh.n_triangles}")
    lines += [f"{i} {a} {b} {c}" for i, (a, b, c) in enumerate(mesh.triangles)]
    lines.append(f"BOUNDARY {len(mesh.boundary_edges)}")
    lines += [
        f"{i} {a} {b} {m}"
        for i, ((a, b), m) in enumerate(zip(mesh.boundary_edges, mesh.markers))
    ]
    with open(path, "w") as fh:
        fh.write("\n".join(lines) + "\n")


def read_mesh(path):
    """Parse the NODES/TRIANGLES/BOUNDARY text format.

    Boundary edges and markers are taken from the file; orientation and
    normals are re-derived from the triangles.
    """
    with open(path) as fh:
        tokens = [ln.split() for ln in fh if ln.strip() and not ln.startswith("#")]
    sections, cur = {}, None
    for tok in tokens:
        if tok[0] in ("NODES", "TRIANGLES", "BOUNDARY"):
            cur = tok[0]
            sections[cur] = (int(tok[1]), [])
        elif cur is None:
            raise MeshError(f"record before section header: {' '.join(tok)}")
        else:
            sections[cur][1].append(tok)
    for name in ("NODES", "TRIANGLES"):
        if name not in sections:
            raise MeshError(f"missing {name} section")
        count, recs = sections[name]
        if len(recs) != count:
            raise MeshError(f"{name}: header says {count}, found {len(recs)}")
    nodes = np.array([[float(r[1]), float(r[2])] for r in sections["NODES"][1]])
    tris = np.array([[int(r[1]), int(r[2]), int(r[3])] for r in sections["TRIANGLES"][1]])
    mesh = mesh_from_arrays(nodes, tris)
    if "BOUNDARY" in sections:
        recs = sections["BOUNDARY"][1]
        given = {tuple(sorted((int(r[1]), int(r[2])))): int(r[3]) for r in recs}
        derived = [tuple(sorted(e)) for e in mesh.boundary_edges.tolist()]
        if set(given) != set(derived):
            raise MeshError("BOUNDARY section does not match the triangulation boundary")
        mesh.markers = np.array([given[e] for e in derived], dtype=np.int64)
    return mesh
