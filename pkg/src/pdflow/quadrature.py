"""Quadrature rules on the reference triangle and the unit interval.

Triangle points are returned in reference coordinates (xi, eta) of the
triangle with vertices (0,0), (1,0), (0,1); weights sum to 1 so that
``sum(w * f) * area`` integrates over a physical triangle.
"""
from functools import lru_cache

import numpy as np

_A1, _B1 = 0.445948490915965, 0.108103018168070
_A2, _B2 = 0.091576213509771, 0.816847572980459
_W1, _W2 = 0.223381589678011, 0.109951743655322

# 7-point rule, exact to degree 5
_C1, _D1 = 0.059715871789770, 0.470142064105115
_C2, _D2 = 0.797426985353087, 0.101286507323456
_V0, _V1, _V2 = 0.225, 0.132394152788506, 0.125939180544827

DEFAULT_DEGREE = 5


@lru_cache(maxsize=None)
def triangle_rule(degree=DEFAULT_DEGREE):
    """Symmetric Gauss rule exact for polynomials of the given total degree.

    Degree 4 is the 6-point and degree 5 the 7-point Dunavant rule; the
    latter, the default for assembly, integrates the P2 convective trilinear
    form exactly. Higher degrees fall back to a collapsed (Duffy)
    Gauss-Legendre tensor rule.
    """
    if degree == 5:
        bary = np.array([
            [1 / 3, 1 / 3, 1 / 3],
            [_C1, _D1, _D1], [_D1, _C1, _D1], [_D1, _D1, _C1],
            [_C2, _D2, _D2], [_D2, _C2, _D2], [_D2, _D2, _C2],
        ])
        w = np.array([_V0] + [_V1] * 3 + [_V2] * 3)
        return bary[:, 1:].copy(), w
    if degree <= 4:
        bary = np.array([
            [_B1, _A1, _A1], [_A1, _B1, _A1], [_A1, _A1, _B1],
            [_B2, _A2, _A2], [_A2, _B2, _A2], [_A2, _A2, _B2],
        ])
        w = np.array([_W1] * 3 + [_W2] * 3)
        return bary[:, 1:].copy(), w
    return collapsed_rule(degree // 2 + 2)


@lru_cache(maxsize=None)
def collapsed_rule(n):
    """Tensor Gauss-Legendre rule mapped onto the triangle, exact to degree 2n-2."""
    x, w = np.polynomial.legendre.leggauss(n)
    x = 0.5 * (x + 1.0)
    w = 0.5 * w
    s, t = np.meshgrid(x, x, indexing="ij")
    ws, wt = np.meshgrid(w, w, indexing="ij")
    xi = s.ravel()
    eta = (t * (1.0 - s)).ravel()
    weights = (ws * wt * (1.0 - s)).ravel() * 2.0
    return np.column_stack([xi, eta]), weights


@lru_cache(maxsize=None)
def line_rule(n=8):
    """Gauss-Legendre points on [0, 1] with weights summing to 1."""
    x, w = np.polynomial.legendre.leggauss(n)
    return 0.5 * (x + 1.0), 0.5 * w
