"""Steady shear-thinning flow with inhomogeneous divergence and Dirichlet data.

Boundary-data extensions, the smallness functional and its optimization,
and a regularized Taylor-Hood solver for the (p, delta)-structure system.
"""
__version__ = "0.1.0"
