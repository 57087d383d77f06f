"""Fitted checks of the coercivity and convection bounds on discrete fields.

The generic constants of both bounds are not quantified, so they are
fitted once on a probe set of discretely solenoidal zero-trace fields and
then asserted on fresh fields.
"""
from dataclasses import dataclass

import numpy as np

from . import fem
from .extension import divergence_correct
from .fem import DiscreteField
from .norms import norm_Lp, norm_W1p
from .solver import convective_form, viscous_form
from .stress import stress_eval


def random_solenoidal(mesh, rng, amplitude=1.0):
    """Random zero-trace vector-P2 field with vanishing discrete divergence."""
    w = np.zeros(2 * mesh.p2.ndof)
    free = fem.free_velocity_dofs(mesh)
    w[free] = rng.standard_normal(len(free))
    f = DiscreteField("vector-P2", w, mesh)
    u = f - divergence_correct(f)
    return u * (amplitude / max(norm_W1p(u, 2.0), 1e-300))


def probe_fields(mesh, count, seed=0, amplitudes=(1e-2, 1e2)):
    rng = np.random.default_rng(seed)
    amps = np.exp(rng.uniform(np.log(amplitudes[0]), np.log(amplitudes[1]), count))
    return [random_solenoidal(mesh, rng, a) for a in amps]


def aligned_fields(g, m=None, amplitudes=(1e-2, 1e-1, 1.0)):
    """Zero-trace solenoidal fields along the Riesz representers of the
    linear terms ``<g (x) g, grad u>`` and, if ``m`` is given,
    ``<S(Dg), Du>``; random probes rarely align with these directions."""
    mesh = g.mesh
    geom = fem.geometry(mesh)
    cells = mesh.p2.vector_cells()
    n = 2 * mesh.p2.ndof
    V = g.at_quad(geom)
    tensors = [np.einsum("mqi,mqj->mqij", V, V)]
    if m is not None:
        G = g.grad_at_quad(geom)
        tensors.append(stress_eval(0.5 * (G + np.swapaxes(G, -1, -2)), m))
    A = fem.sym_grad_matrix(mesh, 1.0, full=True)
    out = []
    for T in tensors:
        local = np.einsum("mqij,mqAij,mq->mA", T, geom.full_grad, geom.wdet, optimize=True)
        F = fem.assemble_vector(local, cells, n)
        if not np.any(F):
            continue
        u, _, _ = fem.solve_saddle(mesh, A, F, np.zeros(mesh.n_nodes), key="laplace-full")
        f = DiscreteField("vector-P2", u, mesh)
        nrm = norm_W1p(f, 2.0)
        if nrm == 0:
            continue
        for a in amplitudes:
            out += [f * (a / nrm), f * (-a / nrm)]
    return out


def coercivity_samples(fields, g, m):
    """Pairs ``(||Du||_p, <S(Du + Dg), Du>)``."""
    x = np.array([norm_W1p(u, m.p) for u in fields])
    y = np.array([viscous_form(u, g, u, m) for u in fields])
    return x, y


def convection_samples(fields, g):
    """Pairs ``(||Du||_p, |<T(u), u>|)``; ``p`` enters through the caller's norm."""
    return np.array([abs(convective_form(u, g, u)) for u in fields])


@dataclass(frozen=True)
class FittedBound:
    kind: str  # "lower" or "upper"
    c_a: float
    c_b: float
    scale_a: float
    scale_b: float
    p: float

    def bound(self, x):
        x = np.asarray(x, dtype=float)
        if self.kind == "lower":
            return self.c_a * self.scale_a * x**self.p - self.c_b * self.scale_b * x
        return self.c_a * self.scale_a * x**2 + self.c_b * self.scale_b * x

    def holds(self, x, y, rtol=1e-12):
        b = self.bound(x)
        slack = rtol * np.maximum(np.abs(b), np.abs(y))
        if self.kind == "lower":
            return bool(np.all(y >= b - slack))
        return bool(np.all(y <= b + slack))


def fit_lower(x, y, p, scale_a, scale_b, margin=1.1, c_b_min=1.0):
    """Fit ``y >= c_a scale_a x^p - c_b scale_b x``.

    ``c_a`` is half the smallest ratio on the upper third of the probes
    (where the p-th power dominates); ``c_b`` then covers every probe with
    a relative margin. Random probes rarely align with the linear term, so
    ``c_b`` is never taken below ``c_b_min``; with the scales of
    :func:`coercivity_scales` the value 1 is the Hoelder bound of that term.
    """
    x, y = np.asarray(x), np.asarray(y)
    top = x >= np.quantile(x, 2.0 / 3.0)
    c_a = 0.5 * float(np.min(np.maximum(y[top], 0.0) / (scale_a * x[top] ** p)))
    need = (c_a * scale_a * x**p - y) / (scale_b * x)
    c_b = max(margin * float(need.max()), c_b_min)
    return FittedBound("lower", c_a, c_b, scale_a, scale_b, p)


def fit_upper(x, y, scale_a, scale_b, margin=1.1):
    """Fit ``y <= c (scale_a x^2 + scale_b x)`` with one constant ``c``."""
    x, y = np.asarray(x), np.asarray(y)
    c = margin * float(np.max(y / (scale_a * x**2 + scale_b * x)))
    return FittedBound("upper", c, c, scale_a, scale_b, 2.0)


def coercivity_scales(g, m):
    """Data-dependent factors of the coercivity bound: ``C1`` and
    ``(||Dg||_p + delta |Omega|^(1/p))^(p-1)`` (1 when both vanish), which
    bounds ``||S(Dg)||_{p'}``."""
    s = (norm_W1p(g, m.p) + m.delta * g.mesh.area ** (1.0 / m.p)) ** (m.p - 1.0)
    return m.C1, s if s > 0 else 1.0


def convection_scales(g, r):
    """``||g||_r`` and ``||g||_r^2`` (1 when ``g`` vanishes)."""
    n = norm_Lp(g, r)
    return (n, n * n) if n > 0 else (1.0, 1.0)
