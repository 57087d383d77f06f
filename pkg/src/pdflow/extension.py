"""Discrete extensions of boundary and divergence data.

The tangential datum is lifted harmonically, localized to a boundary
layer of width 2*eta by a distance cutoff and made solenoidal by a
zero-trace Stokes correction. The normal datum together with the
divergence datum is lifted by an inhomogeneous Stokes problem.
"""
import warnings
from dataclasses import dataclass, field

import numpy as np
from scipy.sparse.linalg import spsolve

from . import fem
from .boundary import (
    BoundaryData,
    boundary_flux,
    check_compatibility,
    distance_field,
    p2_boundary_normals,
    split_trace,
)
from .fem import DiscreteField
from .norms import norm_grad, norm_Lp, norm_W1p

COMPAT_TOL = 1e-10


class PreconditionError(ValueError):
    def __init__(self, message, residual=None):
        super().__init__(message)
        self.residual = residual


class NumericalError(RuntimeError):
    pass


def cutoff_eval(eta, dist):
    """1 for dist <= eta, 2 - dist/eta up to 2*eta, 0 beyond."""
    if not eta > 0:
        raise ValueError(f"eta must be positive, got {eta}")
    return np.clip(2.0 - np.asarray(dist, dtype=float) / eta, 0.0, 1.0)


@dataclass(eq=False)
class CutoffField:
    eta: float
    values: DiscreteField

    def support_area(self):
        """Exact area where the P1 cutoff is positive."""
        return positive_area(self.values)

    def grad_max(self):
        g = np.einsum("ma,maj->mj", self.values.dofs[self.values.mesh.triangles], fem.geometry(self.values.mesh).dp1)
        return float(np.linalg.norm(g, axis=1).max())


def cutoff_field(mesh, eta, dist=None):
    dist = dist if dist is not None else distance_field(mesh)
    return CutoffField(float(eta), DiscreteField("scalar-P1", cutoff_eval(eta, dist.dofs), mesh))


def positive_area(f):
    """Area of ``{f > 0}`` for a scalar P1 field, exact per triangle."""
    mesh = f.mesh
    v = f.dofs[mesh.triangles]
    total = 0.0
    for vals, area in zip(v, mesh.areas):
        pos = vals > 0
        k = int(pos.sum())
        if k == 3:
            total += area
        elif k == 0:
            continue
        elif k == 1:
            i = int(np.flatnonzero(pos)[0])
            a = vals[i]
            others = [vals[j] for j in range(3) if j != i]
            # vertex triangle cut off at the zero crossings on both edges
            t1, t2 = a / (a - others[0]), a / (a - others[1])
            total += area * t1 * t2
        else:
            i = int(np.flatnonzero(~pos)[0])
            a = vals[i]
            others = [vals[j] for j in range(3) if j != i]
            if a == 0:
                total += area
                continue
            t1, t2 = a / (a - others[0]), a / (a - others[1])
            total += area * (1.0 - t1 * t2)
    return float(total)


def harmonic_lift(mesh, trace):
    """Componentwise discrete harmonic extension (P1) of nodal boundary values.

    ``trace`` is an (n_nodes, 2) array; only boundary rows are used.
    """
    trace = np.asarray(trace, dtype=float)
    K = fem.p1_stiffness_matrix(mesh).tocsr()
    b = mesh.boundary_nodes
    inner = np.flatnonzero(~mesh.is_boundary_node)
    out = np.zeros((mesh.n_nodes, 2))
    out[b] = trace[b]
    if len(inner):
        Kii = K[inner][:, inner].tocsc()
        rhs = -K[inner][:, b] @ out[b]
        sol = spsolve(Kii, rhs)
        sol = sol.reshape(len(inner), -1)
        out[inner] = sol
        res = Kii @ sol - rhs
        scale = max(np.linalg.norm(rhs), 1e-300)
        if np.linalg.norm(res) > 1e-10 * scale and np.linalg.norm(rhs) > 0:
            raise NumericalError("harmonic lift: linear residual above 1e-10")
    return DiscreteField("vector-P1", out.ravel(), mesh)


def _laplace_matrix(mesh):
    cache = mesh.__dict__.setdefault("_matrix_cache", {})
    if "laplace" not in cache:
        cache["laplace"] = fem.sym_grad_matrix(mesh, 1.0, full=True)
    return cache["laplace"]


def stokes_lift(mesh, trace, g1, force=None, tol=COMPAT_TOL):
    """Velocity/pressure of ``-lap k + grad pi = force, div k = g1, k = trace``.

    ``trace`` is a P2 boundary array (ndof, 2); ``g1`` a scalar-P1 field.
    ``force`` (default zero) is a density ``f(x, y) -> (fx, fy)``. The
    pressure has zero mean.
    """
    trace = np.asarray(trace, dtype=float)
    vol = float(np.sum(mesh.areas * g1.dofs[mesh.triangles].mean(axis=1)))
    flux = boundary_flux(mesh, trace)
    resid = abs(vol - flux)
    scale = max(1.0, abs(vol), abs(flux))
    if resid > tol * scale:
        raise PreconditionError(
            f"incompatible data: |int g1 - oint g.n| = {resid:.3e}", residual=resid
        )
    n = 2 * mesh.p2.ndof
    F = fem.load_vector(mesh, force) if force is not None else np.zeros(n)
    G = fem.p1_mass_matrix(mesh) @ g1.dofs
    u, p, _ = fem.solve_saddle(mesh, _laplace_matrix(mesh), F, G, trace.ravel(), key="laplace")
    return DiscreteField("vector-P2", u, mesh), DiscreteField("scalar-P1", p, mesh)


def divergence_defect(v, g1=None):
    """Discrete pressure-dual norm of ``div v - g1`` tested against P1."""
    mesh = v.mesh
    r = fem.divergence_matrix(mesh) @ v.dofs
    if g1 is not None:
        r = r - fem.p1_mass_matrix(mesh) @ g1.dofs
    return fem.pressure_dual_norm(mesh)(r)


def normal_trace_max(f):
    mesh = f.mesh
    n = p2_boundary_normals(mesh)
    vals = np.abs(np.sum(f.nodal() * n, axis=1))[mesh.p2.boundary_dofs]
    return float(vals.max(initial=0.0))


def divergence_correct(f, tol=1e-10, return_flux=False, check=True):
    """Zero-trace field with the same discrete divergence as ``f``.

    ``f`` must have vanishing normal component at the boundary nodes. On
    polygons with kinks the edge-wise flux of such an ``f`` can still be
    nonzero; that constant mode cannot be matched by a zero-trace field
    and is returned as the second value when ``return_flux`` is set.
    """
    if f.space != "vector-P2":
        raise ValueError("divergence correction acts on vector-P2 fields")
    mesh = f.mesh
    scale = max(np.abs(f.dofs).max(initial=0.0), 1.0)
    nt = normal_trace_max(f) if check else 0.0
    if nt > tol * scale:
        raise PreconditionError(f"nonzero normal trace (max |f.n| = {nt:.3e})", residual=nt)
    n = 2 * mesh.p2.ndof
    G = fem.divergence_matrix(mesh) @ f.dofs
    if not np.any(G):
        w = fem.zero_field(mesh, "vector-P2")
        return (w, 0.0) if return_flux else w
    u, _, mu = fem.solve_saddle(mesh, _laplace_matrix(mesh), np.zeros(n), G, key="laplace")
    w = DiscreteField("vector-P2", u, mesh)
    return (w, mu) if return_flux else w


@dataclass(eq=False)
class TangentialExtension:
    eta: float
    h: DiscreteField          # harmonic lift (vector-P1)
    cutoff: CutoffField
    h_tilde: DiscreteField    # cutoff * h (vector-P2)
    correction: DiscreteField
    h_eta: DiscreteField
    div_constant: float       # constant weak divergence left in h_eta


def _warn_resolution(mesh, eta):
    if eta < 2.0 * mesh.h_max:
        warnings.warn(
            f"eta = {eta:.3g} is below 2*h_max = {2 * mesh.h_max:.3g}; boundary layer unresolved",
            stacklevel=3,
        )


def build_tangential_extension(mesh, g_t, eta, ex=None, dist=None):
    """Solenoidal extension of the nodal tangential trace ``g_t`` (n_nodes, 2)
    supported (before correction) in the layer of width 2*eta.

    A continuous field tangential to both edges at a corner vanishes
    there, so the datum is zeroed at :attr:`Mesh.corner_nodes`; callers
    move that remainder into the normal lift. Small kinks of polygonal
    curves leave an O(h) normal flux at edge midpoints, which shows up as
    the constant ``div_constant``.
    """
    if not eta > 0:
        raise ValueError("eta must be positive")
    g_t = np.array(g_t, dtype=float)
    g_t[mesh.corner_nodes] = 0.0
    b = mesh.boundary_nodes
    normal_part = np.abs(np.sum(g_t[b] * mesh.vertex_normals[b], axis=1))
    if normal_part.max(initial=0.0) > 1e-10 * max(1.0, np.abs(g_t[b]).max(initial=0.0)):
        raise PreconditionError("tangential datum has a normal component", residual=float(normal_part.max()))
    _warn_resolution(mesh, eta)
    h = harmonic_lift(mesh, g_t)
    psi = cutoff_field(mesh, eta, dist)
    h_tilde = fem.product_p1_p2(psi.values, h)
    corr, mu = divergence_correct(h_tilde, return_flux=True, check=False)
    return TangentialExtension(eta, h, psi, h_tilde, corr, h_tilde - corr, mu)


@dataclass(eq=False)
class ExtensionPair:
    h_eta: DiscreteField
    k: DiscreteField
    g: DiscreteField
    eta: float
    measured_norms: dict = field(default_factory=dict)
    tangential: TangentialExtension = None
    route: str = "stokes"


def _nodal_tangential(mesh, g_t_p2):
    return g_t_p2[: mesh.n_nodes].copy()


def build_extension_pair(mesh, data: BoundaryData, eta, ex, route="stokes", tol=COMPAT_TOL):
    """Extension ``g = h_eta + k`` of (g1, g2).

    ``route="stokes"`` lifts (g1, g_n) with an inhomogeneous Stokes solve;
    ``route="lipschitz"`` uses a harmonic trace lift followed by a
    divergence correction instead.
    """
    resid = check_compatibility(data, mesh)
    scale = max(1.0, float(np.abs(data.g1.dofs).max(initial=0.0)))
    if resid > tol * scale:
        raise PreconditionError(f"incompatible data: residual {resid:.3e}", residual=resid)
    g2 = data.trace_p2()
    _, g_t = split_trace(data)
    tang = build_tangential_extension(mesh, _nodal_tangential(mesh, g_t), eta, ex)
    h_eta = tang.h_eta
    k_trace = g2 - tang.h_tilde.nodal()
    inner = np.ones(mesh.p2.ndof, dtype=bool)
    inner[mesh.p2.boundary_dofs] = False
    k_trace[inner] = 0.0
    g1_eff = DiscreteField("scalar-P1", data.g1.dofs - tang.div_constant, mesh)
    if route == "stokes":
        k, _ = stokes_lift(mesh, k_trace, g1_eff, tol=max(tol, 1e-9))
    elif route == "lipschitz":
        k = _lipschitz_lift(mesh, k_trace, g1_eff)
    else:
        raise ValueError(f"unknown route {route!r}")
    g = h_eta + k
    pair = ExtensionPair(h_eta, k, g, float(eta), tangential=tang, route=route)
    pair.measured_norms = measure_extension(pair, ex)
    pair.measured_norms["div_defect"] = divergence_defect(g, data.g1)
    pair.measured_norms["flux_constant"] = tang.div_constant
    return pair


def _lipschitz_lift(mesh, trace, g1):
    vertex_trace = trace[: mesh.n_nodes]
    k0 = fem.p1_to_p2(harmonic_lift(mesh, vertex_trace))
    vals = k0.nodal().copy()
    bd = mesh.p2.boundary_dofs
    vals[bd] = trace[bd]
    k0 = DiscreteField("vector-P2", vals.ravel(), mesh)
    n = 2 * mesh.p2.ndof
    G = fem.p1_mass_matrix(mesh) @ g1.dofs - fem.divergence_matrix(mesh) @ k0.dofs
    u, _, mu = fem.solve_saddle(mesh, _laplace_matrix(mesh), np.zeros(n), G, key="laplace")
    if abs(mu) > 1e-8:
        raise PreconditionError("incompatible data in divergence correction", residual=abs(mu))
    return k0 + DiscreteField("vector-P2", u, mesh)


def measure_extension(pair, ex):
    h, k = pair.h_eta, pair.k
    out = {}
    if ex is not None:
        out["h_eta_Lr"] = norm_Lp(h, ex.r)
        out["h_eta_grad_p"] = norm_grad(h, ex.p)
        out["h_eta_D_p"] = norm_W1p(h, ex.p)
        out["k_D_p"] = norm_W1p(k, ex.p)
        out["k_Lr"] = norm_Lp(k, ex.r)
        if pair.tangential is not None:
            out["h_Lq"] = norm_Lp(pair.tangential.h, ex.q)
    return out

