"""Measured data norms K_d, K_f, K_n, K_t of a discrete problem.

Negative-order boundary norms are replaced by the corresponding boundary
Lebesgue norms, which bound them from above. The force enters through its
L^{p'} norm.
"""
import numpy as np

from .boundary import split_trace
from .fem import geometry
from .norms import norm_boundary_Lp, norm_fractional_boundary, norm_Lp
from .smallness import DataNorms

ROUNDING = 1e-12

SURROGATE_LABELS = {
    "K_n": "W^{1-1/p,p} + L^r(boundary) surrogate",
    "K_t": "W^{1-1/p,p} + L^q(boundary) surrogate",
    "K_f": "L^{p'} surrogate",
}


def nodal_split(data):
    """Vertex values ``(g_n, g_t)`` (n_nodes, 2) as used by the extensions:
    the tangential part is zero at corners of the polygon."""
    mesh = data.mesh
    _, gt = split_trace(data)
    gt = gt[: mesh.n_nodes].copy()
    gt[mesh.corner_nodes] = 0.0
    # rounding residue of the split is not data
    tiny = ROUNDING * max(1.0, float(np.abs(data.g2[mesh.boundary_nodes]).max(initial=0.0)))
    gt[np.linalg.norm(gt, axis=1) < tiny] = 0.0
    g = np.zeros((mesh.n_nodes, 2))
    b = mesh.boundary_nodes
    g[b] = data.g2[b]
    gn = g - gt
    gn[np.linalg.norm(gn, axis=1) < tiny] = 0.0
    return gn, gt


def force_norm(mesh, force, p_prime):
    if force is None:
        return 0.0
    geom = geometry(mesh)
    x, y = geom.points[..., 0], geom.points[..., 1]
    fx, fy = force(x, y)
    a = np.hypot(np.broadcast_to(fx, x.shape), np.broadcast_to(fy, x.shape))
    return float(np.sum(a**p_prime * geom.wdet)) ** (1.0 / p_prime)


def measure_data_norms(data, ex, delta=0.0, force=None):
    mesh = data.mesh
    gn, gt = nodal_split(data)
    theta = 1.0 - 1.0 / ex.p
    K_n = K_t = 0.0
    if np.any(gn):
        K_n = norm_fractional_boundary(mesh, gn, theta, ex.p) + norm_boundary_Lp(mesh, gn, ex.r)
    if np.any(gt):
        K_t = norm_fractional_boundary(mesh, gt, theta, ex.p) + norm_boundary_Lp(mesh, gt, ex.q)
    K_d = norm_Lp(data.g1, ex.s)
    return DataNorms(K_d=K_d, K_f=force_norm(mesh, force, ex.p_prime), K_n=K_n, K_t=K_t, delta=delta)
