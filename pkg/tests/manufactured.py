"""Manufactured solutions on the unit square and error norms against them."""
import numpy as np
import sympy as sp

from pdflow import fem

X, Y = sp.symbols("x y")


def _lamb(expr):
    f = sp.lambdify((X, Y), expr, "numpy")
    return lambda x, y: np.broadcast_to(f(x, y), np.shape(x)).astype(float)


class Manufactured:
    """Velocity ``v = amp * curl(sin(pi x) sin(pi y) / pi)`` and pressure
    ``amp * cos(pi x) cos(pi y)``; ``kind`` selects the momentum operator
    used to derive the force: ``"stokes"`` (-lap v + grad pi) or
    ``"navier-stokes"`` (-div Dv + (v.grad) v + grad pi)."""

    def __init__(self, kind="stokes", amp=1.0):
        psi = sp.sin(sp.pi * X) * sp.sin(sp.pi * Y) / sp.pi
        v = sp.Matrix([sp.diff(psi, Y), -sp.diff(psi, X)]) * amp
        pr = amp * sp.cos(sp.pi * X) * sp.cos(sp.pi * Y)
        grad = v.jacobian([X, Y])
        if kind == "stokes":
            visc = -sp.Matrix([sp.diff(v[i], X, 2) + sp.diff(v[i], Y, 2) for i in range(2)])
            conv = sp.zeros(2, 1)
        else:
            D = (grad + grad.T) / 2
            visc = -sp.Matrix([sp.diff(D[i, 0], X) + sp.diff(D[i, 1], Y) for i in range(2)])
            conv = grad * v
        f = sp.simplify(visc + conv + sp.Matrix([sp.diff(pr, X), sp.diff(pr, Y)]))
        self.v = [_lamb(c) for c in v]
        self.grad = [[_lamb(grad[i, j]) for j in range(2)] for i in range(2)]
        self.p = _lamb(pr)
        self.p_grad = [_lamb(sp.diff(pr, X)), _lamb(sp.diff(pr, Y))]
        self.f = [_lamb(c) for c in f]

    def velocity(self, x, y):
        return self.v[0](x, y), self.v[1](x, y)

    def force(self, x, y):
        return self.f[0](x, y), self.f[1](x, y)


def velocity_grad_error(field, ms):
    """``||grad(v_h - v)||_2``."""
    geom = fem.geometry(field.mesh)
    x, y = geom.points[..., 0], geom.points[..., 1]
    G = field.grad_at_quad(geom)
    err = sum((G[..., i, j] - ms.grad[i][j](x, y)) ** 2 for i in range(2) for j in range(2))
    return float(np.sqrt(np.sum(err * geom.wdet)))


def pressure_grad_error(field, ms):
    """``||grad(p_h - p)||_2``."""
    geom = fem.geometry(field.mesh)
    x, y = geom.points[..., 0], geom.points[..., 1]
    G = field.grad_at_quad(geom)
    err = sum((G[..., j] - ms.p_grad[j](x, y)) ** 2 for j in range(2))
    return float(np.sqrt(np.sum(err * geom.wdet)))


def observed_orders(hs, errs):
    hs, errs = np.asarray(hs), np.asarray(errs)
    return np.log(errs[1:] / errs[:-1]) / np.log(hs[1:] / hs[:-1])
